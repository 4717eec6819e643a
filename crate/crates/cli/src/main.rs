mod config;
mod report;
mod svg;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand};
use ncfolner::czdec::{cz_decompose, verify_bad_all, verify_good, verify_hybrid, zeta_projection, zeta_vanishing_check, Levels};
use ncfolner::ergodic::{
    admissible_points, admissible_split, boundary_containment_check, cancellation_check, ergodic_converge, l2_bound_check,
    local_estimate_report, maximal_projection, off_bound_check, weak11_check, Action, Observable,
};
use ncfolner::filtration::{build_filtered_sequence, validate_regular, FilteredSequence, FiltrationConfig};
use ncfolner::group::{folner_set, folner_shape, q_f64, q_str, Elem, FiniteSubset, InvarianceCondition, Q};
use ncfolner::ncalg::{parse_opfn, random_hermitian, random_psd, Matrix, OpFn};
use ncfolner::report::Check;
use ncfolner::tiling::{quasi_tile, validate_quasi_tiling};
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use config::{ErgodicSection, Resolved, RunConfig};
use report::{write_outputs, Outputs, ReportEnvelope, Table, Timing};

#[derive(Parser)]
#[command(name = "ncfolner", version, about = "Quasi-tilings, filtered Følner sequences and matrix-valued Calderón–Zygmund checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-tile a window by canonical shapes and validate the result.
    Tile { config: PathBuf },
    /// Partition a window into disjointified translates of a template.
    Partition { config: PathBuf },
    /// Build a filtered Følner sequence and validate regularity.
    Filtration { config: PathBuf },
    /// Cuculescu projections and the decomposition checks over a λ grid.
    Cz { config: PathBuf },
    /// Run the selected verification suites.
    Verify { config: PathBuf },
    /// Ergodic averages of a concrete action.
    Ergodic { config: PathBuf },
}

struct Run {
    rows: Vec<Check>,
    details: BTreeMap<String, Value>,
    table: Option<Table>,
    figures: Vec<(String, String)>,
    stages: Vec<(String, u128)>,
}

impl Run {
    fn new() -> Self {
        Run { rows: Vec::new(), details: BTreeMap::new(), table: None, figures: Vec::new(), stages: Vec::new() }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self)?;
        self.stages.push((name.to_string(), t.elapsed().as_millis()));
        Ok(out)
    }

    fn detail(&mut self, key: &str, v: impl serde::Serialize) -> Result<()> {
        self.details.insert(key.to_string(), serde_json::to_value(v)?);
        Ok(())
    }
}

fn tagged(rows: impl IntoIterator<Item = Check>, tag: &str) -> Vec<Check> {
    rows.into_iter()
        .map(|mut r| {
            r.detail = if r.detail.is_empty() { tag.to_string() } else { format!("{tag}; {}", r.detail) };
            r
        })
        .collect()
}

fn cmd_tile(cfg: &RunConfig, res: &Resolved, run: &mut Run) -> Result<()> {
    let sec = cfg.tile.as_ref().ok_or_else(|| anyhow!("section [tile] is required for `tile`"))?;
    if sec.scales.is_empty() || sec.scales.windows(2).any(|w| w[0] >= w[1]) {
        bail!("field `tile.scales`: must be nonempty and strictly increasing");
    }
    let d = folner_shape(res.model, sec.window);
    let scales: Vec<FiniteSubset> = sec.scales.iter().map(|&l| folner_shape(res.model, l)).collect();
    let tiling = run.stage("quasi_tile", |_| Ok(quasi_tile(&d, &scales, &res.eps)?))?;
    let four = Q::from_integer(4.into()) * &res.eps;
    let cov = run.stage("validate", |_| Ok(validate_quasi_tiling(&tiling.tiling, &d, &four)))?;
    let claim = |s: &str| format!("{s} at parameter 4ε = {}", q_str(&four));
    run.rows.push(Check::flag("tiling_eps_disjoint", &claim("each scale is ε-disjoint"), cov.clause_eps_disjoint));
    run.rows.push(Check::flag("tiling_disjoint_scales", &claim("scale unions are pairwise disjoint"), cov.clause_disjoint_scales));
    run.rows.push(Check::flag("tiling_contained", &claim("every tile lies in D"), cov.clause_contained));
    run.rows.push(
        Check::flag("tiling_coverage", &claim("|∪ tiles| ≥ (1−4ε)|D|"), cov.clause_coverage)
            .with_detail(format!("covered {}/{}", cov.covered, cov.total)),
    );
    for s in &tiling.steps {
        run.rows.push(
            Check::flag("tiling_residual", "residual ≤ max(ε, (1−ε)^{N+1−i})·|D|", s.residual_bound_holds)
                .with_detail(format!("scale {}: residual {} vs {}", s.scale, s.residual_fraction, s.residual_bound)),
        );
    }
    run.rows.push(
        Check::flag("tiling_hypotheses", "shape nesting and window invariance hypotheses", tiling.hypotheses.all_hold).measured_only(),
    );
    run.detail("coverage", &cov)?;
    run.detail("steps", &tiling.steps)?;
    run.detail("hypotheses", &tiling.hypotheses)?;
    run.detail("parameters", &tiling.parameters)?;
    run.detail("warnings", &tiling.warnings)?;
    let unions: Vec<FiniteSubset> = (0..tiling.tiling.scales.len()).map(|i| tiling.tiling.scale_union(i)).collect();
    if let Some(s) = svg::tiling(&d, &unions, "quasi-tiling") {
        run.figures.push(("tiling.svg".into(), s));
    }
    Ok(())
}

fn cmd_partition(cfg: &RunConfig, res: &Resolved, run: &mut Run) -> Result<()> {
    let sec = cfg.partition.as_ref().ok_or_else(|| anyhow!("section [partition] is required for `partition`"))?;
    let d = folner_shape(res.model, sec.window);
    let b = folner_shape(res.model, sec.template);
    let qp = run.stage("partition", |_| Ok(ncfolner::filtration::build_quasi_partition(&d, &b, &InvarianceCondition::default(), &res.eps)?))?;
    let mut seen = std::collections::BTreeSet::new();
    let mut disjoint = true;
    let mut witnessed = true;
    for a in &qp.atoms {
        disjoint &= a.set.iter().all(|e| seen.insert(e.clone()));
        witnessed &= a.set.left_translate(&a.witness).is_subset(&b);
    }
    run.rows.push(Check::flag("partition_disjoint", "atoms are pairwise disjoint", disjoint));
    run.rows.push(Check::flag("partition_witness", "γA ⊆ B for the stored witness γ", witnessed));
    run.rows.push(
        Check::flag("partition_coverage", "|∪A| ≥ (1−ε)|D|", qp.coverage_ok).with_detail(format!("covered {}/{}", qp.covered, qp.total)),
    );
    run.detail(
        "partition",
        json!({
            "atoms": qp.atoms.len(),
            "covered": qp.covered,
            "total": qp.total,
            "dropped": qp.dropped,
            "diagnostics": qp.diagnostics,
            "witnesses": qp.atoms.iter().map(|a| a.witness.clone()).collect::<Vec<Elem>>(),
        }),
    )?;
    let sets: Vec<(&FiniteSubset, bool)> = qp.atoms.iter().map(|a| (&a.set, true)).collect();
    if let Some(s) = svg::atoms(&d, &sets, "quasi-partition") {
        run.figures.push(("partition.svg".into(), s));
    }
    Ok(())
}

fn build_sequence(cfg: &RunConfig, res: &Resolved, run: &mut Run) -> Result<FilteredSequence> {
    let fc = FiltrationConfig::new(res.model, res.eps.clone(), res.c.clone(), cfg.depth, cfg.schedule.clone());
    let seq = run.stage("filtration", |_| Ok(build_filtered_sequence(&fc)?))?;
    match &cfg.override_folner {
        None => Ok(seq),
        Some(sched) => {
            let f = (0..=cfg.depth)
                .map(|n| folner_set(res.model, n, sched).ok_or_else(|| anyhow!("field `override_folner`: no set at level {n}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(FilteredSequence::from_parts(
                res.model,
                f,
                seq.b.clone(),
                seq.p.clone(),
                seq.d.clone(),
                res.c.clone(),
                res.eps.clone(),
                seq.schedule.clone(),
            )?)
        }
    }
}

fn regularity_claim(clause: &str) -> &'static str {
    match clause {
        "atoms_nonempty" => "every atom is nonempty",
        "nesting" => "each atom of 𝒫ₙ lies in one atom of 𝒫ₘ, m ≥ n",
        "admissible_tags" => "atoms tagged admissible pass the admissibility test",
        "folner_boundary_bk" => "Fₙ is (2^{k−n}, B_k)-boundary-invariant",
        "folner_boundary_bn" => "Fₙ is (2^{k−n}, Bₙ)-boundary-invariant",
        "adm_coverage" => "|Dₙ ∩ Adm| ≥ c|Dₙ|",
        "shell_coverage" => "level-n partition covers ≥ (1−δ) of each shell",
        "shell_level0_coverage" => "level-0 atoms cover ≥ (1−ε) of each shell",
        "delta_bookkeeping" => "δᵢ = 1 − Π(1−εⱼ) ≤ ε",
        _ => "regularity clause",
    }
}

fn regularity_rows(seq: &FilteredSequence, res: &Resolved, run: &mut Run) -> Result<()> {
    let rep = run.stage("validate_regular", |_| Ok(validate_regular(seq, &res.c)?))?;
    for r in &rep.rows {
        let mut c = Check::flag(&r.clause, regularity_claim(&r.clause), r.holds)
            .with_detail(format!("n={}{}; {}", r.n, r.k.map(|k| format!(", k={k}")).unwrap_or_default(), r.detail));
        if !r.asserted {
            c = c.measured_only();
        }
        run.rows.push(c);
    }
    run.detail("regularity", json!({ "adm_size": rep.adm_size, "holds": rep.holds, "warnings": rep.warnings }))?;
    Ok(())
}

fn cmd_filtration(cfg: &RunConfig, res: &Resolved, run: &mut Run) -> Result<()> {
    let seq = build_sequence(cfg, res, run)?;
    regularity_rows(&seq, res, run)?;
    let levels: Vec<Value> = (0..=seq.depth())
        .map(|n| {
            json!({
                "level": n,
                "eps_n": q_str(&seq.eps_n[n]),
                "f_size": seq.f[n].len(),
                "b_size": seq.b[n].len(),
                "d_size": seq.d[n].len(),
                "atoms": seq.p[n].atoms.iter().map(|a| json!({
                    "elements": a.set.elems(),
                    "admissible": a.admissible,
                    "witness": a.witness,
                    "completion": a.completion,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    run.detail("levels", levels)?;
    run.detail("shells", &seq.shells)?;
    for n in 0..=seq.depth() {
        let sets: Vec<(&FiniteSubset, bool)> = seq.p[n].atoms.iter().map(|a| (&a.set, a.admissible)).collect();
        if let Some(s) = svg::atoms(seq.window(), &sets, &format!("level {n}")) {
            run.figures.push((format!("level_{n}.svg"), s));
        }
    }
    Ok(())
}

fn load_function(cfg: &RunConfig, res: &Resolved, adm: &FiniteSubset) -> Result<OpFn> {
    match &res.function {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| anyhow!("reading {}: {e}", path.display()))?;
            Ok(parse_opfn(res.model, None, &text)?)
        }
        None => {
            let seed = cfg.require_seed("generating the test function")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(ncfolner::ncalg::random_psd_fn(&mut rng, adm, cfg.d, cfg.density))
        }
    }
}

fn need_lambdas(cfg: &RunConfig) -> Result<&[f64]> {
    if cfg.lambdas.is_empty() {
        bail!("field `lambdas`: at least one λ is required");
    }
    Ok(&cfg.lambdas)
}

fn cz_rows(f: &OpFn, lambdas: &[f64], levels: &Levels, run: &mut Run) -> Result<()> {
    let mut summary = Vec::new();
    for &lambda in lambdas {
        let tag = format!("λ={lambda}");
        let parts = cz_decompose(f, lambda, levels)?;
        let zeta = zeta_projection(&parts.cc)?;
        run.rows.extend(tagged(parts.cc.checks.rows.clone(), &tag));
        run.rows.extend(tagged(verify_good(&parts, lambda)?, &tag));
        run.rows.extend(tagged(verify_hybrid(&parts)?, &tag));
        run.rows.extend(tagged(verify_bad_all(&parts, lambda)?, &tag));
        run.rows.extend(tagged(zeta.rows.clone(), &tag));
        run.rows.extend(tagged([zeta_vanishing_check(&parts, &zeta)?], &tag));
        summary.push(json!({
            "lambda": lambda,
            "residual": parts.residual,
            "f_l1": parts.cc.f_l1,
            "active_atoms": (0..=parts.depth()).map(|k| parts.cc.active_atoms(k).len()).collect::<Vec<_>>(),
            "zeta_complement": zeta.complement_trace,
            "zeta_bound": zeta.bound,
            "cuculescu": parts.cc.checks,
        }));
    }
    run.detail("cz", summary)
}

fn cmd_cz(cfg: &RunConfig, res: &Resolved, run: &mut Run) -> Result<()> {
    let lambdas = need_lambdas(cfg)?.to_vec();
    let seq = build_sequence(cfg, res, run)?;
    let levels = Levels::from_sequence(&seq)?;
    let f = load_function(cfg, res, &admissible_points(&levels))?;
    run.detail("function", json!({ "support": f.values.len(), "d": f.d }))?;
    run.stage("cz", |run| cz_rows(&f, &lambdas, &levels, run))
}

fn local_rows(cfg: &RunConfig, levels: &Levels, run: &mut Run) -> Result<()> {
    let seed = cfg.require_seed("local-estimate fixtures")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10ca1);
    let adm = admissible_points(levels);
    let depth = levels.depth();
    for k in 1..=depth {
        let atoms: Vec<&FiniteSubset> = levels
            .atoms(k)
            .iter()
            .enumerate()
            .filter(|(a, s)| levels.admissible[k][*a] && s.is_subset(&adm))
            .map(|(_, s)| s)
            .take(2)
            .collect();
        for a in atoms {
            let f = OpFn::indicator(a, &random_psd(&mut rng, cfg.d, 1.0));
            for n in 0..k {
                run.rows.push(local_estimate_report(&f, n, k, 1.0, levels)?);
            }
            let mut g = OpFn::zero(levels.model, cfg.d);
            for x in a {
                g.insert(x.clone(), random_hermitian(&mut rng, cfg.d));
            }
            let g = g.sub(&levels.expectation(k, &g)?)?;
            for n in k..=depth {
                for p in [1.0, 2.0, f64::INFINITY] {
                    run.rows.push(local_estimate_report(&g, n, k, p, levels)?);
                }
            }
        }
    }
    Ok(())
}

fn cmd_verify(cfg: &RunConfig, res: &Resolved, run: &mut Run) -> Result<()> {
    let s = &cfg.suites;
    let any = s.regularity || s.cz || s.cancellation || s.local || s.l2 || s.weak11 || s.maximal || s.split;
    if !any {
        return Ok(());
    }
    let seq = build_sequence(cfg, res, run)?;
    if s.regularity {
        regularity_rows(&seq, res, run)?;
    }
    let levels = Levels::from_sequence(&seq)?;
    let needs_f = s.cz || s.cancellation || s.l2 || s.weak11 || s.maximal || s.split;
    let f = if needs_f { Some(load_function(cfg, res, &admissible_points(&levels))?) } else { None };
    if let Some(f) = &f {
        run.detail("function", json!({ "support": f.values.len(), "d": f.d }))?;
    }
    if s.cz {
        let lambdas = need_lambdas(cfg)?.to_vec();
        run.stage("cz", |run| cz_rows(f.as_ref().unwrap(), &lambdas, &levels, run))?;
    }
    if s.cancellation {
        let lambdas = need_lambdas(cfg)?.to_vec();
        run.stage("cancellation", |run| {
            for &lambda in &lambdas {
                let tag = format!("λ={lambda}");
                let parts = cz_decompose(f.as_ref().unwrap(), lambda, &levels)?;
                let zeta = zeta_projection(&parts.cc)?;
                run.rows.extend(tagged([cancellation_check(&parts, &zeta)?], &tag));
                for k in 0..=parts.depth() {
                    for n in k..=parts.depth() {
                        run.rows.extend(tagged([off_bound_check(&parts, n, k)?], &tag));
                    }
                }
            }
            let xs: Vec<Elem> = levels.window.iter().step_by((levels.window.len() / 16).max(1)).cloned().collect();
            for k in 1..=seq.depth() {
                for n in k..=seq.depth() {
                    run.rows.push(boundary_containment_check(&seq, k, n, &xs)?);
                }
            }
            Ok(())
        })?;
    }
    if s.local {
        run.stage("local", |run| local_rows(cfg, &levels, run))?;
    }
    if s.l2 {
        let r = run.stage("l2", |_| Ok(l2_bound_check(f.as_ref().unwrap(), &levels)?))?;
        run.rows.push(r.check.clone());
        run.detail("l2", &r)?;
    }
    if s.weak11 {
        let lambdas = need_lambdas(cfg)?.to_vec();
        let seed = cfg.require_seed("sign sampling")?;
        let r = run.stage("weak11", |_| Ok(weak11_check(f.as_ref().unwrap(), &lambdas, &levels, seed, cfg.weak_ceiling)?))?;
        run.rows.extend(r.checks.iter().cloned());
        run.detail("weak11", json!({
            "rows": r.rows,
            "exact_signs": r.exact_signs,
            "sign_count": r.sign_count,
            "measured_constant": r.measured_constant,
            "ceiling": r.ceiling,
            "note": "the ceiling is an empirical regression bound, not a theorem constant",
        }))?;
    }
    if s.maximal {
        let lambdas = need_lambdas(cfg)?.to_vec();
        let mut out = Vec::new();
        run.stage("maximal", |run| {
            for &lambda in &lambdas {
                let m = maximal_projection(f.as_ref().unwrap(), lambda, &levels)?;
                run.rows.extend(tagged(m.checks.clone(), &format!("λ={lambda}")));
                out.push(m);
            }
            Ok(())
        })?;
        run.detail("maximal", &out)?;
    }
    if s.split {
        let adm = admissible_points(&levels);
        let r = run.stage("split", |_| Ok(admissible_split(f.as_ref().unwrap(), &adm, q_f64(&res.eps), q_f64(&res.c), 256)?))?;
        run.rows.extend(r.checks.iter().cloned());
        run.detail("split", &r)?;
    }
    Ok(())
}

fn cmd_ergodic(cfg: &RunConfig, res: &Resolved, run: &mut Run) -> Result<()> {
    let sec = cfg.ergodic.as_ref().ok_or_else(|| anyhow!("section [ergodic] is required for `ergodic`"))?;
    let (action, x, threshold) = match sec {
        ErgodicSection::Conjugation { theta: Some(theta), threshold, .. } => {
            let d = theta.len();
            if d < 2 {
                bail!("field `ergodic.theta`: need at least two angles");
            }
            let mut x = Matrix::zeros(d);
            x[(0, 1)] = C::new(1.0, 0.0);
            (Action::diagonal(theta.clone()), Observable::Matrix(x), *threshold)
        }
        ErgodicSection::Conjugation { theta: None, dim, threshold } => {
            let seed = cfg.require_seed("the generic unitary")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Action::generic_unitary(&mut rng, *dim)?;
            (a, Observable::Matrix(random_hermitian(&mut rng, *dim)), *threshold)
        }
        ErgodicSection::Translation { periods, threshold } => {
            let a = Action::translation(periods.clone())?;
            let mut v = vec![0.0; periods.iter().product()];
            v[0] = 1.0;
            (a, Observable::Grid(v), *threshold)
        }
    };
    if action.model() != res.model {
        bail!("field `group`: the action needs {}, config has {}", action.model().name(), res.model.name());
    }
    let rep = run.stage("converge", |_| Ok(ergodic_converge(&action, &x, &cfg.schedule, cfg.depth, threshold)?))?;
    let model = res.model;
    let gens = model.generators();
    let words: Vec<(Elem, Elem)> = gens.iter().flat_map(|g| gens.iter().map(move |h| (g.clone(), model.multiply(h, h)))).collect();
    run.rows.extend(action.consistency_checks(&x, &words)?);
    run.rows.extend(rep.checks.iter().cloned());
    run.table = Some(Table {
        header: ["n", "size", "distance", "oracle"].iter().map(|s| s.to_string()).collect(),
        rows: rep
            .rows
            .iter()
            .map(|r| vec![r.n.to_string(), r.size.to_string(), format!("{:e}", r.distance), r.oracle.map(|o| format!("{o:e}")).unwrap_or_default()])
            .collect(),
    });
    run.detail("convergence", &rep)?;
    run.detail("note", "at matrix scale the a.u. and b.a.u. readings reduce to operator-norm convergence; e = 1 is reported")?;
    Ok(())
}

fn execute(name: &str, path: &PathBuf) -> Result<bool> {
    let start = Instant::now();
    let (cfg, res) = RunConfig::load(path)?;
    let mut run = Run::new();
    match name {
        "tile" => cmd_tile(&cfg, &res, &mut run)?,
        "partition" => cmd_partition(&cfg, &res, &mut run)?,
        "filtration" => cmd_filtration(&cfg, &res, &mut run)?,
        "cz" => cmd_cz(&cfg, &res, &mut run)?,
        "verify" => cmd_verify(&cfg, &res, &mut run)?,
        "ergodic" => cmd_ergodic(&cfg, &res, &mut run)?,
        _ => unreachable!(),
    }
    let timing = Timing { total_ms: start.elapsed().as_millis(), stages: std::mem::take(&mut run.stages) };
    let table = run.table.take().unwrap_or_else(|| Table::from_checks(&run.rows));
    let envelope = ReportEnvelope::new(name, cfg, run.rows, run.details, timing);
    let pass = envelope.summary.pass;
    println!(
        "{name}: {} rows, {} asserted, {} failed -> {}",
        envelope.summary.rows,
        envelope.summary.asserted,
        envelope.summary.failed,
        res.output.display()
    );
    for r in envelope.rows.iter().filter(|r| r.failed()) {
        println!("  FAIL {}: {} [{:e} vs {:e}] {}", r.name, r.claim, r.measured, r.bound, r.detail);
    }
    write_outputs(&res.output, &Outputs { envelope, table, figures: run.figures })?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, path) = match &cli.command {
        Command::Tile { config } => ("tile", config),
        Command::Partition { config } => ("partition", config),
        Command::Filtration { config } => ("filtration", config),
        Command::Cz { config } => ("cz", config),
        Command::Verify { config } => ("verify", config),
        Command::Ergodic { config } => ("ergodic", config),
    };
    match execute(name, path) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
