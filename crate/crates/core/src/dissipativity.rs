//! KYP inequalities, dissipation along trajectories, and the Riccati route
//! to the available storage.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::sort_dedup;
use crate::hermlin::{self, psd_check, HermMatrix};
use crate::ltv::ode::{self, DenseSolution};
use crate::ltv::{integrator_options, Domain, Jet, LtvSystem, MatrixFunction, Trajectory};
use crate::{quad, CMat, CVec, C64};

/// A quadratic storage `V(t, x) = ½ xᴴQ(t)x` together with `Q̇`.
#[derive(Debug, Clone)]
pub struct StorageCandidate {
    q: MatrixFunction,
    qdot: MatrixFunction,
}

impl StorageCandidate {
    pub fn new(q: MatrixFunction) -> Result<Self> {
        let qdot = q.derivative();
        Self::from_parts(q, qdot)
    }

    pub fn from_parts(q: MatrixFunction, qdot: MatrixFunction) -> Result<Self> {
        if q.rows() != q.cols() || q.shape() != qdot.shape() {
            return Err(Error::DimensionMismatch(format!(
                "storage matrix {:?} with derivative {:?}",
                q.shape(),
                qdot.shape()
            )));
        }
        Ok(StorageCandidate { q, qdot })
    }

    pub fn parse(rows: &[&[&str]]) -> Result<Self> {
        Self::new(MatrixFunction::parse_rows(rows)?)
    }

    pub fn q(&self) -> &MatrixFunction {
        &self.q
    }

    pub fn qdot(&self) -> &MatrixFunction {
        &self.qdot
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    /// Points where `Q` may fail to be differentiable.
    pub fn excluded_points(&self) -> &[f64] {
        self.q.breakpoints()
    }

    pub fn is_excluded(&self, t: f64) -> bool {
        self.excluded_points()
            .iter()
            .any(|&b| (b - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }

    /// `½ xᴴQ(t)x`.
    pub fn energy(&self, t: f64, x: &CVec) -> Result<f64> {
        let q = self.q.eval(t)?;
        Ok(0.5 * x.dotc(&(q * x)).re)
    }

    /// Checks that `Q(t)` is Hermitian and positive semidefinite on `grid`.
    pub fn validate(&self, grid: &[f64], tol: f64) -> Result<()> {
        for &t in grid {
            let q = self.q.eval(t)?;
            let dev = (&q - q.adjoint()).norm();
            if dev > 1e-10 * (1.0 + q.norm()) {
                return Err(Error::InvariantViolation {
                    invariant: "Q Hermitian".into(),
                    t,
                    residual: dev,
                });
            }
            let r = psd_check(&HermMatrix::symmetrize(q)?.0, tol)?;
            if !r.psd {
                return Err(Error::InvariantViolation {
                    invariant: "Q positive semidefinite".into(),
                    t,
                    residual: r.min_eig,
                });
            }
        }
        Ok(())
    }
}

fn check_dims(sys: &LtvSystem, q: &StorageCandidate) -> Result<()> {
    if q.dim() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "storage is {0}x{0}, system has {1} states",
            q.dim(),
            sys.n()
        )));
    }
    Ok(())
}

/// The block matrix `[[−AᴴQ − QA − Q̇, Cᴴ − QB], [C − BᴴQ, D + Dᴴ]]` at `t`.
pub fn kyp_matrix(sys: &LtvSystem, q: &StorageCandidate, t: f64) -> Result<HermMatrix> {
    check_dims(sys, q)?;
    if q.is_excluded(t) {
        return Err(Error::NonDifferentiablePoint { t });
    }
    let k = sys.coefficients(t)?;
    let qt = q.q.eval(t)?;
    let qd = q.qdot.eval(t)?;
    let m = assemble_kyp(&k.a, &k.b, &k.c, &k.d, &qt, &qd);
    Ok(HermMatrix::symmetrize(m)?.0)
}

pub(crate) fn assemble_kyp(a: &CMat, b: &CMat, c: &CMat, d: &CMat, q: &CMat, qd: &CMat) -> CMat {
    let (n, m) = (a.nrows(), b.ncols());
    let qa = q * a;
    let top_left = -(qa.adjoint() + &qa + qd);
    let off = c - b.adjoint() * q;
    let mut out = CMat::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(&top_left);
    out.view_mut((n, 0), (m, n)).copy_from(&off);
    out.view_mut((0, n), (n, m)).copy_from(&off.adjoint());
    out.view_mut((n, n), (m, m)).copy_from(&(d + d.adjoint()));
    out
}

/// Result of a nodewise KYP test.
#[derive(Debug, Clone)]
pub struct KypReport {
    pub grid: Vec<f64>,
    pub min_eig: Vec<f64>,
    /// `‖KYP(t)‖₂` per node; the tolerance is relative to `1 + scale`.
    pub scale: Vec<f64>,
    /// Grid nodes dropped because `Q` is not differentiable there.
    pub skipped: Vec<f64>,
    pub holds: bool,
    /// Node with the smallest minimum eigenvalue, and that eigenvalue.
    pub worst: Option<(f64, f64)>,
    pub tol: f64,
}

impl KypReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,min_eig\n");
        for (t, e) in self.grid.iter().zip(&self.min_eig) {
            let _ = writeln!(s, "{t:e},{e:e}");
        }
        s
    }
}

/// Nodewise PSD test of the KYP matrix. `holds` iff at every node
/// `min_eig ≥ −tol·(1 + ‖KYP‖₂)`.
pub fn kyp_check(sys: &LtvSystem, q: &StorageCandidate, grid: &[f64], tol: f64) -> Result<KypReport> {
    check_dims(sys, q)?;
    let (kept, skipped): (Vec<f64>, Vec<f64>) = grid.iter().partition(|&&t| !q.is_excluded(t));
    let per_node = kept
        .par_iter()
        .map(|&t| {
            let m = kyp_matrix(sys, q, t)?;
            let r = psd_check(&m, tol)?;
            Ok((r.min_eig, r.scale, r.psd))
        })
        .collect::<Result<Vec<_>>>()?;
    let holds = per_node.iter().all(|r| r.2);
    let worst = kept
        .iter()
        .zip(&per_node)
        .map(|(&t, r)| (t, r.0))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    Ok(KypReport {
        grid: kept,
        min_eig: per_node.iter().map(|r| r.0).collect(),
        scale: per_node.iter().map(|r| r.1).collect(),
        skipped,
        holds,
        worst,
        tol,
    })
}

#[derive(Debug, Clone)]
pub struct IntegralKypReport {
    pub holds: bool,
    pub min_eig: f64,
    pub matrix: HermMatrix,
}

/// PSD test of the integrated KYP matrix on `[t_a, t_b]`:
/// `[[Q(t_a) − Q(t_b) − ∫(AᴴQ + QA), ∫(Cᴴ − QB)], [∫(C − BᴴQ), ∫(D + Dᴴ)]]`.
///
/// `nodes - 1` Gauss–Legendre panels are used, refined at breakpoints.
pub fn integral_kyp_check(
    sys: &LtvSystem,
    q: &StorageCandidate,
    t_a: f64,
    t_b: f64,
    nodes: usize,
    tol: f64,
) -> Result<IntegralKypReport> {
    check_dims(sys, q)?;
    if t_a > t_b {
        return Err(Error::InvalidArgument("need t_a <= t_b".into()));
    }
    let n = sys.n();
    let mut bps = sys.breakpoints();
    bps.extend_from_slice(q.q.breakpoints());
    sort_dedup(&mut bps);
    let zero = CMat::zeros(n, n);
    let mut m = quad::integrate(
        |t| {
            let k = sys.coefficients(t)?;
            let qt = q.q.eval(t)?;
            Ok(assemble_kyp(&k.a, &k.b, &k.c, &k.d, &qt, &zero))
        },
        t_a,
        t_b,
        nodes.saturating_sub(1).max(1),
        &bps,
    )?;
    let jump = q.q.eval(t_a)? - q.q.eval(t_b)?;
    let mut tl = m.view_mut((0, 0), (n, n));
    tl += jump;
    let (h, _) = HermMatrix::symmetrize(m)?;
    let r = psd_check(&h, tol)?;
    Ok(IntegralKypReport {
        holds: r.psd,
        min_eig: r.min_eig,
        matrix: h,
    })
}

#[derive(Debug, Clone)]
pub struct DissipationReport {
    pub passive_on_trajectory: bool,
    /// `max over t0 < t1 of V(t1) − V(t0) − ∫ Re(yᴴu)`.
    pub worst_violation: f64,
    pub worst_pair: Option<(f64, f64)>,
}

/// Checks the dissipation inequality between every ordered pair of nodes.
pub fn dissipation_check(traj: &Trajectory, q: &StorageCandidate, tol: f64) -> Result<DissipationReport> {
    let supply = traj.cumulative_supply();
    let f = traj
        .grid
        .iter()
        .zip(&traj.x)
        .zip(&supply)
        .map(|((&t, x), s)| Ok(q.energy(t, x)? - s))
        .collect::<Result<Vec<f64>>>()?;
    // max over k0 < k1 of f[k1] − f[k0] in one pass
    let mut worst = f64::NEG_INFINITY;
    let mut pair = None;
    let mut best_min = (0usize, f.first().copied().unwrap_or(0.0));
    for k in 1..f.len() {
        let v = f[k] - best_min.1;
        if v > worst {
            worst = v;
            pair = Some((traj.grid[best_min.0], traj.grid[k]));
        }
        if f[k] < best_min.1 {
            best_min = (k, f[k]);
        }
    }
    if pair.is_none() {
        worst = 0.0;
    }
    Ok(DissipationReport {
        passive_on_trajectory: worst <= tol,
        worst_violation: worst,
        worst_pair: pair,
    })
}

/// Backward solution of the Riccati differential equation
/// `Q̇ = −AᴴQ − QA − (Cᴴ − QB)(D + Dᴴ)⁻¹(C − BᴴQ)`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    n: usize,
    sys: LtvSystem,
    sol: DenseSolution,
    t_start: f64,
    t_end: f64,
}

fn riccati_rhs(sys: &LtvSystem, t: f64, q: &CMat) -> Result<CMat> {
    let k = sys.coefficients(t)?;
    let s = &k.d + k.d.adjoint();
    let x = &k.c - k.b.adjoint() * q;
    let qa = q * &k.a;
    Ok(-(qa.adjoint() + qa) - x.adjoint() * hermlin::solve(&s, &x)?)
}

impl RiccatiSolution {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn eval(&self, t: f64) -> Result<CMat> {
        Ok(CMat::from_column_slice(self.n, self.n, &self.sol.eval(t)?))
    }

    /// Derivative of the continuous output (independent of the equation).
    pub fn eval_dense_deriv(&self, t: f64) -> Result<CMat> {
        Ok(CMat::from_column_slice(self.n, self.n, &self.sol.eval_deriv(t)?))
    }

    /// Right-hand side of the equation at `(t, Q)`.
    pub fn rhs(&self, t: f64, q: &CMat) -> Result<CMat> {
        riccati_rhs(&self.sys, t, q)
    }

    /// `Q(t_start)`.
    pub fn initial_value(&self) -> CMat {
        CMat::from_column_slice(self.n, self.n, self.sol.final_state())
    }

    /// Accepted step times, from `t_end` down to `t_start`.
    pub fn step_times(&self) -> Vec<f64> {
        self.sol.step_times()
    }

    /// The solution as a storage candidate on `[t_start, t_end]`; `Q̇` is
    /// the equation's right-hand side at the interpolated `Q`.
    pub fn to_storage(&self) -> StorageCandidate {
        let this = self.clone();
        let n = self.n;
        let dom = Domain::new(self.t_start, self.t_end);
        let q = MatrixFunction::numeric(n, n, dom, self.sys.breakpoints(), "Riccati solution", move |t, need| {
            let q = this.eval(t)?;
            let d = if need { Some(this.rhs(t, &q)?) } else { None };
            Ok(Jet::new(q, d))
        });
        let qdot = q.derivative();
        StorageCandidate { q, qdot }
    }
}

fn feedthrough_witness(sys: &LtvSystem, t_start: f64, t_end: f64) -> Result<()> {
    let mut nodes = crate::ltv::uniform_grid(t_start, t_end, 201);
    for &b in &sys.breakpoints() {
        if b > t_start && b < t_end {
            nodes.push(b);
            nodes.push(b.next_down());
        }
    }
    for t in nodes {
        let d = sys.d().eval(t)?;
        let s = HermMatrix::symmetrize(&d + d.adjoint())?.0;
        let r = psd_check(&s, 0.0)?;
        if r.min_eig <= 1e-10 * (1.0 + r.scale) {
            return Err(Error::DPlusDHNotUniformlyPositive { t, min_eig: r.min_eig });
        }
    }
    Ok(())
}

/// Integrates the Riccati equation backward from `Q(t_end) = q_end` to
/// `t_start`. Requires `D + Dᴴ` positive definite on the interval
/// (checked on 201 nodes plus both sides of every breakpoint).
pub fn rde_integrate(
    sys: &LtvSystem,
    t_end: f64,
    q_end: &HermMatrix,
    t_start: f64,
    rtol: f64,
) -> Result<RiccatiSolution> {
    let n = sys.n();
    if q_end.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "terminal value is {0}x{0}, system has {n} states",
            q_end.dim()
        )));
    }
    if !(t_start < t_end) {
        return Err(Error::InvalidArgument("need t_start < t_end".into()));
    }
    sys.domain().require(t_start)?;
    sys.domain().require(t_end)?;
    feedthrough_witness(sys, t_start, t_end)?;

    let mut opts = integrator_options(rtol).with_breakpoints(sys.breakpoints());
    opts.blowup_bound = Some(1e12 * (1.0 + q_end.norm()));
    // the residual of the continuous output is part of the contract
    opts.quintic_dense = true;
    let symmetrize = |y: &mut [C64]| {
        for i in 0..n {
            for j in 0..i {
                let a = y[i + j * n];
                let b = y[j + i * n];
                let avg = 0.5 * (a + b.conj());
                y[i + j * n] = avg;
                y[j + i * n] = avg.conj();
            }
            y[i + i * n] = Complex64::new(y[i + i * n].re, 0.0);
        }
    };
    let sol = ode::solve(
        |t, y, dy| {
            let q = CMat::from_column_slice(n, n, y);
            dy.copy_from_slice(riccati_rhs(sys, t, &q)?.as_slice());
            Ok(())
        },
        t_end,
        t_start,
        q_end.matrix().as_slice().to_vec(),
        &opts,
        Some(&symmetrize),
    )?;
    Ok(RiccatiSolution {
        n,
        sys: sys.clone(),
        sol,
        t_start,
        t_end,
    })
}

/// Finite-horizon available storage `½ xᴴQ_a(t)x`, with `Q_a` the Riccati
/// solution on `[t, t + horizon]` vanishing at the right end.
pub fn available_storage(sys: &LtvSystem, t: f64, x: &CVec, horizon: f64, rtol: f64) -> Result<f64> {
    let q = available_storage_matrix(sys, t, horizon, rtol)?;
    if x.len() != sys.n() {
        return Err(Error::DimensionMismatch("state size".into()));
    }
    Ok(0.5 * x.dotc(&(q * x)).re)
}

pub fn available_storage_matrix(sys: &LtvSystem, t: f64, horizon: f64, rtol: f64) -> Result<CMat> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let n = sys.n();
    let zero = HermMatrix::new(CMat::zeros(n, n))?;
    Ok(rde_integrate(sys, t + horizon, &zero, t, rtol)?.initial_value())
}

/// One step of a horizon continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonStep {
    pub horizon: f64,
    pub value: f64,
    /// `‖Q_a(t)‖` change relative to the previous horizon (`NaN` for the
    /// first one).
    pub q_change: f64,
}

/// Available storage for a sequence of horizons, reporting how much `Q_a`
/// still moves between consecutive horizons.
pub fn available_storage_continuation(
    sys: &LtvSystem,
    t: f64,
    x: &CVec,
    horizons: &[f64],
    rtol: f64,
) -> Result<Vec<HorizonStep>> {
    let mut prev: Option<CMat> = None;
    let mut out = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let q = available_storage_matrix(sys, t, h, rtol)?;
        let q_change = prev.as_ref().map_or(f64::NAN, |p| hermlin::norm2(&(&q - p)));
        out.push(HorizonStep {
            horizon: h,
            value: 0.5 * x.dotc(&(&q * x)).re,
            q_change,
        });
        prev = Some(q);
    }
    Ok(out)
}
