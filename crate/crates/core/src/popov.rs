//! Galerkin discretization of the Popov operator and the transfer operator.
//!
//! Inputs are approximated by piecewise constants on `N` equal cells of
//! `[t_a, t_b]` and kernels are sampled at cell midpoints, so for `i > j`
//! block `(i, j)` is `h·C(tᵢ)Φ(tᵢ, tⱼ)B(tⱼ)`, the upper blocks are the
//! adjoints and the diagonal is `(D + Dᴴ)(tᵢ) + h·sym(C B)(tᵢ)`. With these
//! blocks `½h·ūᴴ·Gram·ū` approximates the supply from the zero state.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermlin::{herm_eig, psd_check, solve, HermMatrix};
use crate::ltv::{simulate, supply_exact, LtvSystem, MatrixFunction, TransitionFlow};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone)]
pub struct PopovGram {
    pub t_a: f64,
    pub t_b: f64,
    /// Cell midpoints.
    pub grid: Vec<f64>,
    /// Quadrature weight of every cell (all equal to `h`).
    pub weights: Vec<f64>,
    pub h: f64,
    /// Number of ports.
    pub m: usize,
    pub matrix: HermMatrix,
    /// `C(tᵢ)Φ(tᵢ, t_a)` per node.
    pub kernel_left: Vec<CMat>,
    /// `Φ(t_a, tⱼ)B(tⱼ)` per node.
    pub kernel_right: Vec<CMat>,
    /// Minimum eigenvalue of `D + Dᴴ` per node, with its scale `1 + ‖D + Dᴴ‖`.
    pub feedthrough: Vec<(f64, f64)>,
}

pub fn popov_gram(sys: &LtvSystem, t_a: f64, t_b: f64, cells: usize, rtol: f64) -> Result<PopovGram> {
    if cells < 2 {
        return Err(Error::InvalidArgument("the Popov grid needs at least 2 cells".into()));
    }
    if !(t_a < t_b) {
        return Err(Error::InvalidArgument("need t_a < t_b".into()));
    }
    let (n, m) = (sys.n(), sys.m());
    let h = (t_b - t_a) / cells as f64;
    let grid: Vec<f64> = (0..cells).map(|i| t_a + (i as f64 + 0.5) * h).collect();
    let flow = TransitionFlow::new(sys, t_a, t_b, rtol)?;

    struct Node {
        left: CMat,
        right: CMat,
        diag: CMat,
        feed: (f64, f64),
    }
    let nodes = grid
        .par_iter()
        .map(|&t| {
            let k = sys.coefficients(t)?;
            let psi = flow.eval(t)?;
            let dd = &k.d + k.d.adjoint();
            let cb = &k.c * &k.b;
            let diag = &dd + (&cb + cb.adjoint()) * C64::new(0.5 * h, 0.0);
            let feed = psd_check(&HermMatrix::symmetrize(dd)?.0, 0.0)?;
            Ok(Node {
                left: &k.c * &psi,
                right: if n == 0 { k.b.clone() } else { solve(&psi, &k.b)? },
                diag,
                feed: (feed.min_eig, feed.scale),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let size = cells * m;
    let hc = C64::new(h, 0.0);
    let rows: Vec<CMat> = (0..cells)
        .into_par_iter()
        .map(|i| {
            let mut row = CMat::zeros(m, size);
            for j in 0..i {
                row.view_mut((0, j * m), (m, m))
                    .copy_from(&(&nodes[i].left * &nodes[j].right * hc));
            }
            row.view_mut((0, i * m), (m, m)).copy_from(&nodes[i].diag);
            row
        })
        .collect();
    let mut g = CMat::zeros(size, size);
    for (i, row) in rows.iter().enumerate() {
        g.view_mut((i * m, 0), (m, (i + 1) * m))
            .copy_from(&row.view((0, 0), (m, (i + 1) * m)));
    }
    for i in 0..cells {
        for j in 0..i {
            let blk = g.view((i * m, j * m), (m, m)).adjoint();
            g.view_mut((j * m, i * m), (m, m)).copy_from(&blk);
        }
    }
    Ok(PopovGram {
        t_a,
        t_b,
        grid,
        weights: vec![h; cells],
        h,
        m,
        matrix: HermMatrix::new(g)?,
        kernel_left: nodes.iter().map(|x| x.left.clone()).collect(),
        kernel_right: nodes.iter().map(|x| x.right.clone()).collect(),
        feedthrough: nodes.iter().map(|x| x.feed).collect(),
    })
}

impl PopovGram {
    pub fn cells(&self) -> usize {
        self.grid.len()
    }

    /// `Gram·ū` for nodal input samples `ū`, split back into nodes.
    pub fn apply(&self, u: &[CVec]) -> Result<Vec<CVec>> {
        let v = self.stack(u)?;
        let w = self.matrix.matrix() * v;
        Ok((0..self.cells()).map(|i| w.rows(i * self.m, self.m).into_owned()).collect())
    }

    /// `½h·ūᴴ·Gram·ū`.
    pub fn quadratic_supply(&self, u: &[CVec]) -> Result<f64> {
        let v = self.stack(u)?;
        Ok(0.5 * self.h * v.dotc(&(self.matrix.matrix() * &v)).re)
    }

    fn stack(&self, u: &[CVec]) -> Result<CVec> {
        if u.len() != self.cells() || u.iter().any(|x| x.len() != self.m) {
            return Err(Error::DimensionMismatch("one input sample per cell expected".into()));
        }
        let mut v = CVec::zeros(self.cells() * self.m);
        for (i, x) in u.iter().enumerate() {
            v.rows_mut(i * self.m, self.m).copy_from(x);
        }
        Ok(v)
    }

    /// Row-major dump, one matrix row per line as `re im` pairs.
    pub fn to_text(&self) -> String {
        let g = self.matrix.matrix();
        let mut s = String::new();
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{:e} {:e}", g[(i, j)].re, g[(i, j)].im);
            }
            s.push('\n');
        }
        s
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(herm_eig(&self.matrix)?.values)
    }

    pub fn eigenvalues_csv(&self) -> Result<String> {
        let mut s = String::from("index,eigenvalue\n");
        for (k, e) in self.eigenvalues()?.iter().enumerate() {
            let _ = writeln!(s, "{k},{e:e}");
        }
        Ok(s)
    }
}

/// Samples a column input at the given times.
pub fn sample_input(u: &MatrixFunction, grid: &[f64]) -> Result<Vec<CVec>> {
    grid.iter()
        .map(|&t| Ok(u.eval(t)?.column(0).into_owned()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct NnReport {
    pub nn: bool,
    pub min_eig: f64,
    /// `1 + ‖Gram‖₂`.
    pub scale: f64,
    /// A node where `D + Dᴴ` is not positive semidefinite, with its
    /// minimum eigenvalue. Nonnegative supply is then impossible.
    pub witness: Option<(f64, f64)>,
}

/// `nn ⇔ λ_min(Gram) ≥ −tol·(1 + ‖Gram‖₂)` and `D + Dᴴ ⪰ 0` at every node.
pub fn nonnegative_supply_check(gram: &PopovGram, tol: f64) -> Result<NnReport> {
    let witness = gram
        .grid
        .iter()
        .zip(&gram.feedthrough)
        .find(|(_, &(e, s))| e < -tol * s)
        .map(|(&t, &(e, _))| (t, e));
    let r = psd_check(&gram.matrix, tol)?;
    Ok(NnReport {
        nn: r.psd && witness.is_none(),
        min_eig: r.min_eig,
        scale: r.scale,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubintervalResult {
    pub t_0: f64,
    pub t_1: f64,
    pub min_eig: f64,
    pub nn: bool,
}

/// Tests every dyadic subinterval down to `levels` halvings. Subintervals
/// aligned with cells need no new integration: their Gram matrices are
/// principal submatrices of the full one.
pub fn dyadic_subinterval_check(gram: &PopovGram, levels: u32, tol: f64) -> Result<Vec<SubintervalResult>> {
    let cells = gram.cells();
    let m = gram.m;
    let mut out = Vec::new();
    for level in 0..=levels {
        let parts = 1usize << level;
        if parts > cells {
            break;
        }
        for p in 0..parts {
            let (c0, c1) = (p * cells / parts, (p + 1) * cells / parts);
            let sub = gram
                .matrix
                .matrix()
                .view((c0 * m, c0 * m), ((c1 - c0) * m, (c1 - c0) * m))
                .into_owned();
            let r = psd_check(&HermMatrix::symmetrize(sub)?.0, tol)?;
            out.push(SubintervalResult {
                t_0: gram.t_a + c0 as f64 * gram.h,
                t_1: gram.t_a + c1 as f64 * gram.h,
                min_eig: r.min_eig,
                nn: r.psd,
            });
        }
    }
    Ok(out)
}

/// Output of the transfer operator, `y = 𝐙u`, i.e. the response from
/// `x(t0) = 0`, sampled at `grid` (which must start at `t0`).
pub fn transfer_apply(sys: &LtvSystem, t0: f64, u: &MatrixFunction, grid: &[f64], rtol: f64) -> Result<Vec<CVec>> {
    let x0 = CVec::zeros(sys.n());
    Ok(simulate(sys, t0, &x0, u, grid, rtol)?.y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplyIdentity {
    /// `∫ Re(yᴴu)` from the zero state, by integration.
    pub supply_sim: f64,
    /// `½h·ūᴴ·Gram·ū`.
    pub supply_gram: f64,
    pub gap: f64,
}

pub fn popov_supply_identity(
    sys: &LtvSystem,
    u: &MatrixFunction,
    t_a: f64,
    t_b: f64,
    cells: usize,
    rtol: f64,
) -> Result<SupplyIdentity> {
    let gram = popov_gram(sys, t_a, t_b, cells, rtol)?;
    let supply_gram = gram.quadratic_supply(&sample_input(u, &gram.grid)?)?;
    let supply_sim = supply_exact(sys, &CVec::zeros(sys.n()), u, t_a, t_b, rtol)?;
    Ok(SupplyIdentity {
        supply_sim,
        supply_gram,
        gap: (supply_sim - supply_gram).abs(),
    })
}
