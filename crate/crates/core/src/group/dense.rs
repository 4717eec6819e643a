//! Dense-array evaluation of Zᵈ set geometry.
//!
//! Sets are rasterised on their bounding boxes. When the structuring set `K`
//! is itself a box, window counts come from summed-area tables; otherwise the
//! counts are accumulated directly. All results are exact.

use smallvec::SmallVec;

use super::{Elem, FiniteSubset, GroupModel};

#[derive(Clone, Debug)]
pub struct Grid {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    volume: u128,
}

impl Grid {
    pub const MAX_CELLS: usize = 1 << 26;

    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Grid {
        let dims: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1).max(0) as usize).collect();
        let volume: u128 = dims.iter().map(|&d| d as u128).product();
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1].saturating_mul(dims[i + 1]);
        }
        Grid { lo, hi, dims, strides, volume }
    }

    pub fn volume(&self) -> usize {
        self.volume.min(usize::MAX as u128) as usize
    }

    pub fn fits(&self) -> bool {
        self.volume <= Self::MAX_CELLS as u128
    }

    pub fn index(&self, c: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..self.dims.len() {
            let off = c[i] - self.lo[i];
            if off < 0 || off as usize >= self.dims[i] {
                return None;
            }
            idx += off as usize * self.strides[i];
        }
        Some(idx)
    }

    pub fn coords(&self, mut idx: usize) -> SmallVec<[i64; 4]> {
        let mut out: SmallVec<[i64; 4]> = SmallVec::from_elem(0, self.dims.len());
        for i in 0..self.dims.len() {
            out[i] = self.lo[i] + (idx / self.strides[i]) as i64;
            idx %= self.strides[i];
        }
        out
    }

    fn raster(&self, set: &FiniteSubset) -> Vec<u8> {
        let mut bits = vec![0u8; self.volume()];
        for e in set {
            if let Some(i) = self.index(e.coords()) {
                bits[i] = 1;
            }
        }
        bits
    }
}

/// Summed-area table over a grid.
struct Prefix {
    grid: Grid,
    pdims: Vec<usize>,
    pstrides: Vec<usize>,
    sums: Vec<u32>,
}

impl Prefix {
    fn new(grid: &Grid, vals: &[u8]) -> Prefix {
        let d = grid.dims.len();
        let pdims: Vec<usize> = grid.dims.iter().map(|x| x + 1).collect();
        let mut pstrides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            pstrides[i] = pstrides[i + 1] * pdims[i + 1];
        }
        let total: usize = pdims.iter().product();
        let mut sums = vec![0u32; total];
        for (idx, &v) in vals.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let mut rem = idx;
            let mut p = 0;
            for i in 0..d {
                let c = rem / grid.strides[i];
                rem %= grid.strides[i];
                p += (c + 1) * pstrides[i];
            }
            sums[p] = v as u32;
        }
        for axis in 0..d {
            let st = pstrides[axis];
            for p in 0..total {
                let c = (p / st) % pdims[axis];
                if c > 0 {
                    sums[p] += sums[p - st];
                }
            }
        }
        Prefix { grid: grid.clone(), pdims, pstrides, sums }
    }

    /// Sum over the inclusive box `[lo, hi]`, clipped to the grid.
    fn sum(&self, lo: &[i64], hi: &[i64]) -> u32 {
        let d = self.pdims.len();
        let mut a: SmallVec<[usize; 4]> = SmallVec::with_capacity(d);
        let mut b: SmallVec<[usize; 4]> = SmallVec::with_capacity(d);
        for i in 0..d {
            let l = (lo[i] - self.grid.lo[i]).max(0);
            let h = (hi[i] - self.grid.lo[i] + 1).min(self.grid.dims[i] as i64);
            if h <= l {
                return 0;
            }
            a.push(l as usize);
            b.push(h as usize);
        }
        let mut total: i64 = 0;
        for mask in 0..(1usize << d) {
            let mut p = 0;
            let mut sign = 1i64;
            for i in 0..d {
                if mask >> i & 1 == 1 {
                    p += a[i] * self.pstrides[i];
                    sign = -sign;
                } else {
                    p += b[i] * self.pstrides[i];
                }
            }
            total += sign * self.sums[p] as i64;
        }
        total as u32
    }
}

fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn collect(grid: &Grid, bits: &[u8], d: usize) -> FiniteSubset {
    let out: Vec<Elem> = bits.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| Elem(grid.coords(i))).collect();
    FiniteSubset::from_sorted(GroupModel::Zd(d), out)
}

/// Rasterised dilation `A + K` of a bitmap `a` on grid `ga`.
fn dilate(ga: &Grid, a: &[u8], k: &FiniteSubset, kbox: &Option<(Vec<i64>, Vec<i64>)>, kbounds: &(Vec<i64>, Vec<i64>)) -> Option<(Grid, Vec<u8>)> {
    let gr = Grid::new(add(&ga.lo, &kbounds.0), add(&ga.hi, &kbounds.1));
    if !gr.fits() {
        return None;
    }
    let mut out = vec![0u8; gr.volume()];
    match kbox {
        Some((klo, khi)) => {
            let pre = Prefix::new(ga, a);
            for (i, o) in out.iter_mut().enumerate() {
                let x = gr.coords(i);
                if pre.sum(&sub(&x, khi), &sub(&x, klo)) > 0 {
                    *o = 1;
                }
            }
        }
        None => {
            for (i, &v) in a.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                let g = ga.coords(i);
                for kk in k {
                    out[gr.index(&add(&g, kk.coords())).unwrap()] = 1;
                }
            }
        }
    }
    Some((gr, out))
}

/// `count[g] = |(g + K) ∩ E|` on the grid of all `g` with nonzero count.
fn window_counts(e: &FiniteSubset, k: &FiniteSubset) -> Option<(Grid, Vec<u32>)> {
    let (elo, ehi) = e.bounding_box()?;
    let (klo, khi) = k.bounding_box()?;
    let gg = Grid::new(sub(&elo, &khi), sub(&ehi, &klo));
    let ge = Grid::new(elo, ehi);
    if !gg.fits() || !ge.fits() {
        return None;
    }
    let mut counts = vec![0u32; gg.volume()];
    if k.is_box() {
        let pre = Prefix::new(&ge, &ge.raster(e));
        for (i, c) in counts.iter_mut().enumerate() {
            let g = gg.coords(i);
            *c = pre.sum(&add(&g, &klo), &add(&g, &khi));
        }
    } else {
        if (e.len() as u128) * (k.len() as u128) > (1u128 << 34) {
            return None;
        }
        for x in e {
            for kk in k {
                counts[gg.index(&sub(x.coords(), kk.coords())).unwrap()] += 1;
            }
        }
    }
    Some((gg, counts))
}

pub fn boundary(k: &FiniteSubset, e: &FiniteSubset) -> Option<FiniteSubset> {
    let GroupModel::Zd(d) = e.model() else { return None };
    let (gg, counts) = window_counts(e, k)?;
    let kn = k.len() as u32;
    let m: Vec<u8> = counts.iter().map(|&c| (c > 0 && c < kn) as u8).collect();
    let kb = k.bounding_box()?;
    let kbox = k.is_box().then(|| kb.clone());
    let (gr, out) = dilate(&gg, &m, k, &kbox, &kb)?;
    Some(collect(&gr, &out, d))
}

/// `{g : gK ⊆ E}`.
pub fn core(k: &FiniteSubset, e: &FiniteSubset) -> Option<FiniteSubset> {
    let GroupModel::Zd(d) = e.model() else { return None };
    let (gg, counts) = window_counts(e, k)?;
    let kn = k.len() as u32;
    let m: Vec<u8> = counts.iter().map(|&c| (c == kn) as u8).collect();
    Some(collect(&gg, &m, d))
}

pub fn product(e: &FiniteSubset, k: &FiniteSubset) -> Option<FiniteSubset> {
    let GroupModel::Zd(d) = e.model() else { return None };
    let (elo, ehi) = e.bounding_box()?;
    let kb = k.bounding_box()?;
    let ge = Grid::new(elo, ehi);
    if !ge.fits() {
        return None;
    }
    let kbox = k.is_box().then(|| kb.clone());
    if kbox.is_none() && (e.len() as u128) * (k.len() as u128) > (1u128 << 34) {
        return None;
    }
    let (gr, out) = dilate(&ge, &ge.raster(e), k, &kbox, &kb)?;
    Some(collect(&gr, &out, d))
}

/// `|E + K ∖ E|`.
pub fn excess(e: &FiniteSubset, k: &FiniteSubset) -> Option<usize> {
    let (elo, ehi) = e.bounding_box()?;
    let kb = k.bounding_box()?;
    let ge = Grid::new(elo, ehi);
    if !ge.fits() {
        return None;
    }
    let kbox = k.is_box().then(|| kb.clone());
    if kbox.is_none() && (e.len() as u128) * (k.len() as u128) > (1u128 << 34) {
        return None;
    }
    let ebits = ge.raster(e);
    let (gr, out) = dilate(&ge, &ebits, k, &kbox, &kb)?;
    let mut n = 0;
    for (i, &v) in out.iter().enumerate() {
        if v != 0 {
            let x = gr.coords(i);
            let inside = ge.index(&x).map(|j| ebits[j] != 0).unwrap_or(false);
            if !inside {
                n += 1;
            }
        }
    }
    Some(n)
}
