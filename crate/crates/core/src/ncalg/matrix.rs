use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use super::NcError;

pub type C = Complex64;

/// Tolerance for detecting Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues within this distance of a threshold count as at-or-below it.
pub const THRESHOLD_TOL: f64 = 1e-10;
/// Jacobi stops once the off-diagonal Frobenius mass drops below this (relative to ‖A‖_F, floored at 1).
pub const JACOBI_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 64;

/// Dense `d×d` complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    d: usize,
    data: Vec<C>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.d, self.d)?;
        for i in 0..self.d {
            let row: Vec<String> = (0..self.d).map(|j| format!("{:.4}", self[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..self.d).map(|i| (0..self.d).map(|j| [self[(i, j)].re, self[(i, j)].im]).collect()).collect();
        rows.serialize(s)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[i * self.d + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[i * self.d + j]
    }
}

/// Which side of a threshold a spectral projection keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    /// Eigenvalues `> λ`.
    Above,
    /// Eigenvalues `≤ λ`.
    AtOrBelow,
}

/// Eigendecomposition `A = V diag(λ) V*`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

impl Matrix {
    pub fn zeros(d: usize) -> Self {
        Matrix { d, data: vec![C::new(0.0, 0.0); d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m[(i, i)] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C>]) -> Result<Self, NcError> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(NcError::Dimension(format!("expected {d}x{d} rows")));
        }
        Ok(Matrix { d, data: rows.iter().flatten().copied().collect() })
    }

    pub fn from_real(d: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), d * d);
        Matrix { d, data: entries.iter().map(|&x| C::new(x, 0.0)).collect() }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C::new(v, 0.0);
        }
        m
    }

    pub fn scalar(d: usize, s: f64) -> Self {
        Self::identity(d).scale(s)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[C] {
        &self.data
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix { d: self.d, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn scale_c(&self, s: C) -> Self {
        Matrix { d: self.d, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn add_assign(&mut self, o: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, o: &Matrix, s: f64) {
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C {
        (0..self.d).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    /// `‖A − A*‖_max ≤ tol·max(1, ‖A‖_max)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        (0..self.d).all(|i| (i..self.d).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol * scale))
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale(0.5)
    }

    /// Commutator `AB − BA`.
    pub fn commutator(&self, o: &Matrix) -> Self {
        &(self * o) - &(o * self)
    }

    /// Cyclic Jacobi rotations for Hermitian input.
    pub fn eigh(&self) -> Result<Eigen, NcError> {
        let d = self.d;
        let mut a = self.hermitian_part();
        let mut v = Matrix::identity(d);
        let scale = a.frobenius().max(1.0);
        let off = |a: &Matrix| -> f64 {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        s += a[(i, j)].norm_sqr();
                    }
                }
            }
            s.sqrt()
        };
        let mut sweeps = 0;
        while off(&a) > JACOBI_TOL * scale {
            if sweeps == MAX_SWEEPS {
                return Err(NcError::NonConvergence { off_diagonal: off(&a), sweeps, norm: scale });
            }
            sweeps += 1;
            for p in 0..d {
                for q in p + 1..d {
                    let b = a[(p, q)];
                    let r = b.norm();
                    if r == 0.0 {
                        continue;
                    }
                    let phase = b / r;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = 0.5 * (2.0 * r).atan2(app - aqq);
                    let (s, c) = theta.sin_cos();
                    // U = diag(1, conj(phase)) · [[c, −s], [s, c]]
                    let upp = C::new(c, 0.0);
                    let upq = C::new(-s, 0.0);
                    let uqp = phase.conj() * s;
                    let uqq = phase.conj() * c;
                    for i in 0..d {
                        let (aip, aiq) = (a[(i, p)], a[(i, q)]);
                        a[(i, p)] = aip * upp + aiq * uqp;
                        a[(i, q)] = aip * upq + aiq * uqq;
                        let (vip, viq) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = vip * upp + viq * uqp;
                        v[(i, q)] = vip * upq + viq * uqq;
                    }
                    for j in 0..d {
                        let (apj, aqj) = (a[(p, j)], a[(q, j)]);
                        a[(p, j)] = upp.conj() * apj + uqp.conj() * aqj;
                        a[(q, j)] = upq.conj() * apj + uqq.conj() * aqj;
                    }
                    a[(p, q)] = C::new(0.0, 0.0);
                    a[(q, p)] = C::new(0.0, 0.0);
                    a[(p, p)] = C::new(a[(p, p)].re, 0.0);
                    a[(q, q)] = C::new(a[(q, q)].re, 0.0);
                }
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut vectors = Matrix::zeros(d);
        for (col, &i) in order.iter().enumerate() {
            for r in 0..d {
                vectors[(r, col)] = v[(r, i)];
            }
        }
        Ok(Eigen { values, vectors, sweeps })
    }

    /// `V diag(φ(λ)) V*` for Hermitian input.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> Result<Self, NcError> {
        let e = self.eigh()?;
        Ok(e.reconstruct(|x| f(x)))
    }

    /// `|A| = (A*A)^{1/2}`.
    pub fn abs(&self) -> Result<Self, NcError> {
        (&self.adjoint() * self).apply_fn(|x| x.max(0.0).sqrt())
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Result<Vec<f64>, NcError> {
        let e = (&self.adjoint() * self).eigh()?;
        let mut s: Vec<f64> = e.values.iter().map(|x| x.max(0.0).sqrt()).collect();
        s.reverse();
        Ok(s)
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> Result<f64, NcError> {
        if self.is_zero(0.0) {
            return Ok(0.0);
        }
        Ok(self.singular_values()?[0])
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64, NcError> {
        Ok(self.eigh()?.values[0])
    }

    /// `A ≥ −tol·max(1, ‖A‖)`.
    pub fn is_psd(&self, tol: f64) -> Result<bool, NcError> {
        Ok(self.is_hermitian(HERMITIAN_TOL) && self.min_eigenvalue()? >= -tol * self.max_abs().max(1.0))
    }

    /// Projection onto eigenvectors with eigenvalue on the chosen side of `λ`.
    /// Non-Hermitian input is replaced by `|A|`.
    pub fn spectral_projection(&self, lambda: f64, side: Side) -> Result<Self, NcError> {
        let h = if self.is_hermitian(HERMITIAN_TOL) { self.clone() } else { self.abs()? };
        let e = h.eigh()?;
        Ok(e.reconstruct(|x| {
            let below = x <= lambda + THRESHOLD_TOL;
            if (side == Side::AtOrBelow) == below {
                1.0
            } else {
                0.0
            }
        }))
    }

    /// Trace of the spectral projection `{|A| > λ}`.
    pub fn count_above(&self, lambda: f64) -> Result<usize, NcError> {
        Ok(self.singular_values()?.iter().filter(|&&s| s > lambda + THRESHOLD_TOL).count())
    }

    /// `(‖P²−P‖_F, ‖P−P*‖_F)`.
    pub fn projection_defect(&self) -> (f64, f64) {
        ((&(self * self) - self).frobenius(), (self - &self.adjoint()).frobenius())
    }

    pub fn is_projection(&self, tol: f64) -> bool {
        let (a, b) = self.projection_defect();
        a <= tol && b <= tol
    }

    /// Meet of projections: projection onto `ran P ∩ ran Q`, the kernel of `(1−P)+(1−Q)`.
    pub fn meet(&self, o: &Matrix) -> Result<Self, NcError> {
        let id = Matrix::identity(self.d);
        let s = &(&id - self) + &(&id - o);
        let e = s.eigh()?;
        Ok(e.reconstruct(|x| if x <= 1e-9 { 1.0 } else { 0.0 }))
    }

    /// Join of projections: `1 − (1−P)∧(1−Q)`.
    pub fn join(&self, o: &Matrix) -> Result<Self, NcError> {
        let id = Matrix::identity(self.d);
        Ok(&id - &(&id - self).meet(&(&id - o))?)
    }

    /// `ran P ⊆ ran Q` for projections.
    pub fn proj_le(&self, o: &Matrix, tol: f64) -> bool {
        (&(o * self) - self).frobenius() <= tol
    }
}

impl Eigen {
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let d = self.values.len();
        let mut m = Matrix::zeros(d);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..d {
                let vik = self.vectors[(i, k)] * w;
                for j in 0..d {
                    m[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        m
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, o: &Matrix) -> Matrix {
        assert_eq!(self.d, o.d, "dimension mismatch");
        Matrix { d: self.d, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, o: &Matrix) -> Matrix {
        assert_eq!(self.d, o.d, "dimension mismatch");
        Matrix { d: self.d, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, o: &Matrix) -> Matrix {
        assert_eq!(self.d, o.d, "dimension mismatch");
        let d = self.d;
        let mut m = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == C::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    m.data[i * d + j] += a * o.data[k * d + j];
                }
            }
        }
        m
    }
}
