//! Port-Hamiltonian representations
//!
//! ```text
//! ẋ = ((J − R)Q − K)x + (G − P)u
//! y = (G + P)ᴴQx + (S − N)u
//! ```
//!
//! with `J`, `N` skew-Hermitian, `QK + KᴴQ = Q̇` and the passivity matrix
//! `W = [[R, P], [Pᴴ, S]] ⪰ 0`.

mod canonical;
mod frame;
mod nullspace;

pub use canonical::{
    autonomize_hamiltonian, canonical_ph, canonical_ph_with, kyp_to_ph, Autonomized, CanonicalOptions,
    CanonicalPh,
};
pub use nullspace::{null_space_decomposition, NullSpaceDecomposition};

use crate::dissipativity::StorageCandidate;
use crate::error::{Error, Result};
use crate::hermlin::{norm2, psd_check, HermMatrix};
use crate::ltv::{Domain, LtvSystem, MatrixFunction, Trajectory};
use crate::{CMat, CVec};

#[derive(Debug, Clone)]
pub struct PhRepresentation {
    pub q: MatrixFunction,
    pub k: MatrixFunction,
    pub j: MatrixFunction,
    pub r: MatrixFunction,
    pub g: MatrixFunction,
    pub p: MatrixFunction,
    pub s: MatrixFunction,
    /// The skew-Hermitian feedthrough part `N`.
    pub n: MatrixFunction,
    pub domain: Domain,
}

/// Invariant residuals at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhResiduals {
    pub j_skew: f64,
    pub n_skew: f64,
    pub q_hermitian: f64,
    pub q_min_eig: f64,
    pub lyapunov: f64,
    pub w_min_eig: f64,
}

impl PhRepresentation {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        q: MatrixFunction,
        k: MatrixFunction,
        j: MatrixFunction,
        r: MatrixFunction,
        g: MatrixFunction,
        p: MatrixFunction,
        s: MatrixFunction,
        n: MatrixFunction,
        domain: Domain,
    ) -> Result<Self> {
        let nx = q.rows();
        let m = g.cols();
        let expect = [
            (&q, (nx, nx), "Q"),
            (&k, (nx, nx), "K"),
            (&j, (nx, nx), "J"),
            (&r, (nx, nx), "R"),
            (&g, (nx, m), "G"),
            (&p, (nx, m), "P"),
            (&s, (m, m), "S"),
            (&n, (m, m), "N"),
        ];
        for (f, shape, name) in expect {
            if f.shape() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {:?}, expected {shape:?}",
                    f.shape()
                )));
            }
        }
        let domain = [&q, &k, &j, &r, &g, &p, &s, &n]
            .iter()
            .fold(domain, |d, f| d.intersect(&f.domain()));
        Ok(PhRepresentation {
            q,
            k,
            j,
            r,
            g,
            p,
            s,
            n,
            domain,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.q.rows()
    }

    pub fn port_dim(&self) -> usize {
        self.g.cols()
    }

    pub fn storage(&self) -> Result<StorageCandidate> {
        StorageCandidate::new(self.q.clone())
    }

    /// `W(t) = [[R, P], [Pᴴ, S]]`.
    pub fn passivity_matrix(&self, t: f64) -> Result<CMat> {
        let (nx, m) = (self.state_dim(), self.port_dim());
        let p = self.p.eval(t)?;
        let mut w = CMat::zeros(nx + m, nx + m);
        w.view_mut((0, 0), (nx, nx)).copy_from(&self.r.eval(t)?);
        w.view_mut((0, nx), (nx, m)).copy_from(&p);
        w.view_mut((nx, 0), (m, nx)).copy_from(&p.adjoint());
        w.view_mut((nx, nx), (m, m)).copy_from(&self.s.eval(t)?);
        Ok(w)
    }

    pub fn residuals(&self, t: f64) -> Result<PhResiduals> {
        let j = self.j.eval(t)?;
        let n = self.n.eval(t)?;
        let q = self.q.eval(t)?;
        let qd = self.q.eval_deriv(t)?;
        let k = self.k.eval(t)?;
        let w = self.passivity_matrix(t)?;
        let rel = |x: f64, s: f64| x / (1.0 + s);
        let qk = &q * &k;
        let lyap = norm2(&(&qk + qk.adjoint() - &qd));
        Ok(PhResiduals {
            j_skew: rel(norm2(&(&j + j.adjoint())), norm2(&j)),
            n_skew: rel(norm2(&(&n + n.adjoint())), norm2(&n)),
            q_hermitian: rel(norm2(&(&q - q.adjoint())), norm2(&q)),
            q_min_eig: psd_check(&HermMatrix::symmetrize(q.clone())?.0, 0.0)?.min_eig,
            lyapunov: rel(lyap, norm2(&q) * norm2(&k) + norm2(&qd)),
            w_min_eig: psd_check(&HermMatrix::symmetrize(w)?.0, 0.0)?.min_eig,
        })
    }

    /// Checks every defining invariant at every node of `grid`, with
    /// relative tolerance `tol`.
    pub fn validate(&self, grid: &[f64], tol: f64) -> Result<()> {
        for &t in grid {
            let r = self.residuals(t)?;
            let qn = norm2(&self.q.eval(t)?);
            let wn = norm2(&self.passivity_matrix(t)?);
            let checks = [
                ("J skew-Hermitian", r.j_skew, r.j_skew <= tol),
                ("N skew-Hermitian", r.n_skew, r.n_skew <= tol),
                ("Q Hermitian", r.q_hermitian, r.q_hermitian <= tol),
                ("Q positive semidefinite", r.q_min_eig, r.q_min_eig >= -tol * (1.0 + qn)),
                ("QK + KᴴQ = Q̇", r.lyapunov, r.lyapunov <= tol),
                ("W positive semidefinite", r.w_min_eig, r.w_min_eig >= -tol * (1.0 + wn)),
            ];
            if let Some((name, residual, _)) = checks.iter().find(|c| !c.2) {
                return Err(Error::InvariantViolation {
                    invariant: (*name).into(),
                    t,
                    residual: *residual,
                });
            }
        }
        Ok(())
    }

    /// `A = (J − R)Q − K, B = G − P, C = (G + P)ᴴQ, D = S − N`, composed
    /// without sampling.
    pub fn assemble_unchecked(&self) -> Result<LtvSystem> {
        let a = self.j.sub(&self.r)?.mul(&self.q)?.sub(&self.k)?;
        let b = self.g.sub(&self.p)?;
        let c = self.g.add(&self.p)?.adjoint().mul(&self.q)?;
        let d = self.s.sub(&self.n)?;
        LtvSystem::new(a, b, c, d, self.domain)
    }

    /// Validates the invariants on `grid`, then assembles the system.
    pub fn assemble_system(&self, grid: &[f64], tol: f64) -> Result<LtvSystem> {
        self.validate(grid, tol)?;
        self.assemble_unchecked()
    }
}

/// Outcome of the power balance check along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBalance {
    /// Largest residual over single grid intervals.
    pub max_residual: f64,
    /// Residual accumulated over the whole trajectory.
    pub total_residual: f64,
    /// `∫ [Qx; u]ᴴ W [Qx; u] dt`, nonnegative for a valid representation.
    pub dissipation_integral: f64,
}

/// Residual of `ℋ(t₁) − ℋ(t₀) = −∫[Qx; u]ᴴW[Qx; u] + ∫Re(yᴴu)` between
/// consecutive nodes, integrals by the trapezoid rule.
pub fn power_balance_residual(ph: &PhRepresentation, traj: &Trajectory) -> Result<PowerBalance> {
    let nx = ph.state_dim();
    let mut ham = Vec::with_capacity(traj.grid.len());
    let mut diss = Vec::with_capacity(traj.grid.len());
    for (k, &t) in traj.grid.iter().enumerate() {
        let q = ph.q.eval(t)?;
        let x = &traj.x[k];
        let qx = &q * x;
        ham.push(0.5 * x.dotc(&qx).re);
        let mut z = CVec::zeros(nx + ph.port_dim());
        z.rows_mut(0, nx).copy_from(&qx);
        z.rows_mut(nx, ph.port_dim()).copy_from(&traj.u[k]);
        diss.push(z.dotc(&(ph.passivity_matrix(t)? * &z)).re);
    }
    let rate = traj.supply_rate();
    let mut out = PowerBalance {
        max_residual: 0.0,
        total_residual: 0.0,
        dissipation_integral: 0.0,
    };
    let mut total = 0.0;
    for k in 0..traj.grid.len().saturating_sub(1) {
        let h = traj.grid[k + 1] - traj.grid[k];
        let d = 0.5 * h * (diss[k] + diss[k + 1]);
        let s = 0.5 * h * (rate[k] + rate[k + 1]);
        let r = ham[k + 1] - ham[k] + d - s;
        out.max_residual = out.max_residual.max(r.abs());
        out.dissipation_integral += d;
        total += r;
    }
    out.total_residual = total.abs();
    Ok(out)
}
