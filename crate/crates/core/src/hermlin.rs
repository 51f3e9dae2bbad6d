//! Dense complex linear algebra: Hermitian eigendecomposition, the `LᴴL`
//! Cholesky factorization, tolerance-aware PSD tests and linear solves.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMat, CVec};

/// Relative bound on `‖M − Mᴴ‖` accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

const EIG_MAX_ITER: usize = 10_000;

/// A complex Hermitian matrix. Construction symmetrizes the input and
/// records how far it was from Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix {
    m: CMat,
    deviation: f64,
}

impl HermMatrix {
    /// Accepts `m` if `‖m − mᴴ‖₂ ≤ 1e-12·(1+‖m‖₂)`, storing `(m + mᴴ)/2`.
    pub fn new(m: CMat) -> Result<Self> {
        let (h, deviation) = Self::symmetrize(m)?;
        if deviation > HERMITIAN_TOL * (1.0 + norm2(&h.m)) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(h)
    }

    /// Always symmetrizes; the deviation `‖m − mᴴ‖₂` is kept for inspection.
    pub fn symmetrize(m: CMat) -> Result<(Self, f64)> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let adj = m.adjoint();
        let deviation = norm2(&(&m - &adj));
        let sym = (m + adj).scale(0.5);
        Ok((HermMatrix { m: sym, deviation }, deviation))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let v = CVec::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0)));
        HermMatrix {
            m: CMat::from_diagonal(&v),
            deviation: 0.0,
        }
    }

    pub fn identity(n: usize) -> Self {
        HermMatrix {
            m: CMat::identity(n, n),
            deviation: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        norm2(&self.m)
    }
}

/// Eigenvalues in ascending order with the matching unitary eigenvector matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn herm_eig(m: &HermMatrix) -> Result<HermEig> {
    let n = m.dim();
    if n == 0 {
        return Ok(HermEig {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.m.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::ConvergenceFailure { n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermEig { values, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub psd: bool,
    pub min_eig: f64,
    /// `1 + ‖M‖₂`, the factor the tolerance is scaled by.
    pub scale: f64,
}

/// `psd ⇔ λ_min ≥ −tol·(1+‖M‖₂)`.
pub fn psd_check(m: &HermMatrix, tol: f64) -> Result<PsdReport> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be >= 0, got {tol}")));
    }
    if m.dim() == 0 {
        return Ok(PsdReport {
            psd: true,
            min_eig: 0.0,
            scale: 1.0,
        });
    }
    let eig = herm_eig(m)?;
    let min_eig = eig.values[0];
    let norm = eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale = 1.0 + norm;
    Ok(PsdReport {
        psd: min_eig >= -tol * scale,
        min_eig,
        scale,
    })
}

/// Factor `M = LᴴL` with `L` lower triangular and a real positive diagonal.
///
/// The recursion peels off the trailing pivot: writing
/// `M = [[M₁, c], [cᴴ, β]]` gives `L₂₂ = √β`, last row `cᴴ/√β`, and recurses
/// on `M₁ − ccᴴ/β`.
pub fn cholesky(m: &HermMatrix) -> Result<CMat> {
    let n = m.dim();
    let mut s = m.m.clone();
    let mut l = CMat::zeros(n, n);
    let scale = m
        .m
        .diagonal()
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.re.abs()));
    let floor = (n as f64) * f64::EPSILON * scale;
    for k in (0..n).rev() {
        let beta = s[(k, k)].re;
        if !(beta > floor) {
            return Err(Error::NotPositiveDefinite { pivot: k });
        }
        let lam = beta.sqrt();
        l[(k, k)] = Complex64::new(lam, 0.0);
        for j in 0..k {
            l[(k, j)] = s[(k, j)] / lam;
        }
        for i in 0..k {
            for j in 0..k {
                let c_i = s[(i, k)];
                let c_j = s[(j, k)];
                s[(i, j)] -= c_i * c_j.conj() / beta;
            }
        }
    }
    Ok(l)
}

/// Derivative of the `LᴴL` factor: given `L` and `Ṁ`, returns `L̇` (lower
/// triangular, real diagonal) with `Ṁ = L̇ᴴL + LᴴL̇`.
pub fn cholesky_derivative(l: &CMat, mdot: &CMat) -> Result<CMat> {
    let n = l.nrows();
    let linv = solve(l, &CMat::identity(n, n))?;
    let f = linv.adjoint() * mdot * &linv;
    let mut x = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            // (F + Fᴴ)/2 keeps round-off from leaking into the upper triangle
            x[(i, j)] = (f[(i, j)] + f[(j, i)].conj()) * 0.5;
        }
        x[(i, i)] = Complex64::new(f[(i, i)].re * 0.5, 0.0);
    }
    Ok(x * l)
}

/// Solves `M X = rhs` by partial-pivoting LU.
pub fn solve(m: &CMat, rhs: &CMat) -> Result<CMat> {
    if !m.is_square() || m.nrows() != rhs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve: {}x{} system with {}-row right-hand side",
            m.nrows(),
            m.ncols(),
            rhs.nrows()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(rhs.clone());
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let umax = u.diagonal().iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let umin = u.diagonal().iter().fold(f64::INFINITY, |a, z| a.min(z.norm()));
    let singular = umax == 0.0 || umin <= (n as f64) * f64::EPSILON * umax;
    if !singular {
        if let Some(x) = lu.solve(rhs) {
            if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Ok(x);
            }
        }
    }
    Err(Error::SingularMatrix {
        rank: numerical_rank(m),
        n,
    })
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    solve(m, &CMat::identity(m.nrows(), m.nrows()))
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `max(rows, cols)·ε·σ_max`.
pub fn numerical_rank(m: &CMat) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    let cut = (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * top;
    s.iter().filter(|&&v| v > cut).count()
}

/// Spectral norm.
pub fn norm2(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}
