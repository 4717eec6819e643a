//! Plain SVG renderings of subsets of Z².

use std::fmt::Write;

use ncfolner::group::{Elem, FiniteSubset};

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7"];

struct Canvas {
    lo: (i64, i64),
    hi: (i64, i64),
    cell: i64,
    body: String,
}

impl Canvas {
    fn new(window: &FiniteSubset) -> Option<Canvas> {
        let (lo, hi) = window.bounding_box()?;
        if lo.len() != 2 {
            return None;
        }
        let span = (hi[0] - lo[0] + 1).max(hi[1] - lo[1] + 1);
        let cell = (1024 / span).clamp(1, 16);
        Some(Canvas { lo: (lo[0], lo[1]), hi: (hi[0], hi[1]), cell, body: String::new() })
    }

    fn rect(&mut self, e: &Elem, fill: &str) {
        let c = e.coords();
        let x = (c[0] - self.lo.0) * self.cell;
        let y = (self.hi.1 - c[1]) * self.cell;
        let _ = writeln!(self.body, r#"<rect x="{x}" y="{y}" width="{0}" height="{0}" fill="{fill}"/>"#, self.cell);
    }

    fn finish(self, title: &str) -> String {
        let w = (self.hi.0 - self.lo.0 + 1) * self.cell;
        let h = (self.hi.1 - self.lo.1 + 1) * self.cell;
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
                "\n<title>{title}</title>\n",
                r##"<defs><pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse"><rect width="4" height="4" fill="#ffffff"/><path d="M0,4 L4,0" stroke="#555555" stroke-width="1"/></pattern></defs>"##,
                "\n{body}</svg>\n"
            ),
            w = w,
            h = h,
            title = title,
            body = self.body
        )
    }
}

/// Tiles colored by scale; cells of the window left uncovered are hatched.
pub fn tiling(window: &FiniteSubset, scales: &[FiniteSubset], title: &str) -> Option<String> {
    let mut canvas = Canvas::new(window)?;
    let mut covered = std::collections::BTreeSet::new();
    for (i, u) in scales.iter().enumerate() {
        for e in u {
            if covered.insert(e.clone()) {
                canvas.rect(e, PALETTE[i % PALETTE.len()]);
            }
        }
    }
    for e in window {
        if !covered.contains(e) {
            canvas.rect(e, "url(#hatch)");
        }
    }
    Some(canvas.finish(title))
}

/// Atoms colored in rotation; atoms tagged non-admissible are hatched.
pub fn atoms(window: &FiniteSubset, atoms: &[(&FiniteSubset, bool)], title: &str) -> Option<String> {
    let mut canvas = Canvas::new(window)?;
    for (i, (set, admissible)) in atoms.iter().enumerate() {
        let fill = if *admissible { PALETTE[i % PALETTE.len()] } else { "url(#hatch)" };
        for e in *set {
            canvas.rect(e, fill);
        }
    }
    Some(canvas.finish(title))
}
