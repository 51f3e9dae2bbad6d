//! Two worked applications: a body of decreasing mass (a rocket burning
//! fuel) and a two-layer stratified heat storage tank.

use std::sync::Arc;

use crate::dissipativity::StorageCandidate;
use crate::error::{Error, Result};
use crate::expr::TimeExpr;
use crate::ltv::{integrator_options, ode, uniform_grid, Domain, Jet, LtvSystem, MatrixFunction};
use crate::ph::PhRepresentation;
use crate::C64;

/// Mass `m(t)`, positive and non-increasing on `domain`, checked at
/// `nodes` equally spaced points.
#[derive(Debug, Clone)]
pub struct RocketParams {
    pub m: TimeExpr,
    pub domain: Domain,
    pub nodes: usize,
}

impl RocketParams {
    pub fn new(m: TimeExpr, domain: Domain) -> Self {
        RocketParams { m, domain, nodes: 101 }
    }
}

#[derive(Debug, Clone)]
pub struct Rocket {
    /// State `(z, p)` (height, momentum), input `(v_e, F_ext)` (exhaust
    /// velocity, external force), output `(−ṁv, v)` with `v = p/m`.
    pub sys: LtvSystem,
    pub ph: PhRepresentation,
    /// `Q = diag(0, 1/m)`.
    pub q: StorageCandidate,
}

fn validation_grid(domain: Domain, nodes: usize) -> Result<Vec<f64>> {
    if !domain.is_finite() {
        return Err(Error::InvalidArgument("application domains must be finite".into()));
    }
    if nodes < 2 {
        return Err(Error::InvalidArgument("need at least 2 validation nodes".into()));
    }
    Ok(uniform_grid(domain.lo, domain.hi, nodes))
}

fn z() -> TimeExpr {
    TimeExpr::zero()
}

fn rows(r: Vec<Vec<TimeExpr>>) -> MatrixFunction {
    MatrixFunction::from_rows(r).expect("rectangular")
}

/// `ż = p/m`, `ṗ = (ṁ/m)p − ṁv_e + F_ext`, with the port-Hamiltonian form
/// `J = [[0, 1], [−1, 0]]`, `R = ½diag(0, −ṁ)`, `K = ½diag(0, −ṁ/m)`,
/// `Q = diag(0, 1/m)`, `G = B`, `P = S = N = 0`.
pub fn rocket_system(params: &RocketParams) -> Result<Rocket> {
    let grid = validation_grid(params.domain, params.nodes)?;
    let m = &params.m;
    let md = m.derivative();
    for &t in &grid {
        let mv = m.eval_real(t)?;
        if !(mv > 0.0) {
            return Err(Error::InvariantViolation {
                invariant: "positive mass".into(),
                t,
                residual: mv,
            });
        }
        let rate = md.eval_real(t)?;
        if rate > 0.0 {
            return Err(Error::InvariantViolation {
                invariant: "non-increasing mass".into(),
                t,
                residual: rate,
            });
        }
    }
    let inv_m = TimeExpr::one() / m.clone();
    let one = TimeExpr::one;
    let a = rows(vec![vec![z(), inv_m.clone()], vec![z(), &md / m]]);
    let b = rows(vec![vec![z(), z()], vec![-&md, one()]]);
    let q = rows(vec![vec![z(), z()], vec![z(), inv_m.clone()]]);
    let c = b.adjoint().mul(&q)?;
    let d = MatrixFunction::zeros(2, 2);
    let sys = LtvSystem::new(a, b.clone(), c, d, params.domain)?;
    let ph = PhRepresentation::new(
        q.clone(),
        rows(vec![vec![z(), z()], vec![z(), (-(&md / m)) * 0.5]]),
        rows(vec![vec![z(), one()], vec![-one(), z()]]),
        rows(vec![vec![z(), z()], vec![z(), -&md * 0.5]]),
        b,
        MatrixFunction::zeros(2, 2),
        MatrixFunction::zeros(2, 2),
        MatrixFunction::zeros(2, 2),
        params.domain,
    )?;
    ph.validate(&grid, 1e-9)?;
    Ok(Rocket {
        sys,
        ph,
        q: StorageCandidate::new(q)?,
    })
}

/// Mass flows `q_p` (production) and `q_d` (demand), total volume `v_s`
/// and hot-layer volume `v_h0` at the start of `domain`.
#[derive(Debug, Clone)]
pub struct HeatingParams {
    pub q_p: TimeExpr,
    pub q_d: TimeExpr,
    pub v_s: f64,
    pub v_h0: f64,
    pub domain: Domain,
    pub nodes: usize,
}

impl HeatingParams {
    pub fn new(q_p: TimeExpr, q_d: TimeExpr, v_s: f64, v_h0: f64, domain: Domain) -> Self {
        HeatingParams {
            q_p,
            q_d,
            v_s,
            v_h0,
            domain,
            nodes: 201,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Heating {
    /// State `(V_h T_h, V_c T_c)`, input `(T_in,p, T_in,d)`, output
    /// `(q_p T_h, q_d T_c)`.
    pub sys: LtvSystem,
    pub ph: PhRepresentation,
    /// `Q = diag(1/V_h, 1/V_c)`.
    pub q: StorageCandidate,
    /// Hot-layer volume, `V̇_h = q_p − q_d`.
    pub v_h: MatrixFunction,
    pub v_c: MatrixFunction,
    /// Closed form of the top-left KYP block,
    /// `diag((q_d + q_p)/V_h², (q_d + q_p)/V_c²)`.
    pub kyp_residual_ref: MatrixFunction,
}

/// The two-layer tank. `V_h` is integrated numerically from
/// `V̇_h = q_p − q_d` (its derivative is exact); `V_c = V_s − V_h`.
pub fn heating_system(params: &HeatingParams) -> Result<Heating> {
    let grid = validation_grid(params.domain, params.nodes)?;
    for &t in &grid {
        for (name, f) in [("q_p", &params.q_p), ("q_d", &params.q_d)] {
            let v = f.eval_real(t)?;
            if !(v > 0.0) {
                return Err(Error::InvariantViolation {
                    invariant: format!("positive mass flow {name}"),
                    t,
                    residual: v,
                });
            }
        }
    }
    let rate = &params.q_p - &params.q_d;
    let mut bps = rate.breakpoints();
    bps.retain(|&b| b > params.domain.lo && b < params.domain.hi);
    let opts = integrator_options(1e-12).with_breakpoints(bps.clone());
    let r2 = rate.clone();
    let sol = ode::solve(
        |t, _y, dy| {
            dy[0] = C64::new(r2.eval_real(t)?, 0.0);
            Ok(())
        },
        params.domain.lo,
        params.domain.hi,
        vec![C64::new(params.v_h0, 0.0)],
        &opts,
        None,
    )?;
    let sol = Arc::new(sol);
    let scalar = |v: C64| nalgebra::DMatrix::from_element(1, 1, v);
    let v_h = MatrixFunction::numeric(1, 1, params.domain, bps, "V_h", move |t, need| {
        let value = sol.eval(t)?[0];
        let deriv = if need { Some(scalar(C64::new(rate.eval_real(t)?, 0.0))) } else { None };
        Ok(Jet::new(scalar(value), deriv))
    });
    let v_c = MatrixFunction::constant_real(1, 1, &[params.v_s]).sub(&v_h)?;
    for &t in &grid {
        for f in [&v_h, &v_c] {
            let v = f.eval(t)?[(0, 0)].re;
            if !(v > 0.0) {
                return Err(Error::VolumeNonPositive { t, volume: v });
            }
        }
    }

    let qp = MatrixFunction::scalar(params.q_p.clone());
    let qd = MatrixFunction::scalar(params.q_d.clone());
    let ih = v_h.inverse()?;
    let ic = v_c.inverse()?;
    let dg = |x: &MatrixFunction, y: &MatrixFunction| MatrixFunction::block_diag(&[x, y]);
    let half = C64::new(0.5, 0.0);

    let a = dg(&qd.mul(&ih)?.neg(), &qp.mul(&ic)?.neg())?;
    let b = dg(&qp, &qd)?;
    let q = dg(&ih, &ic)?;
    let c = b.adjoint().mul(&q)?;
    let sys = LtvSystem::new(a, b.clone(), c, MatrixFunction::zeros(2, 2), params.domain)?;

    let flow = qd.add(&qp)?;
    let ph = PhRepresentation::new(
        q.clone(),
        dg(&qd.sub(&qp)?.mul(&ih)?.scale(half), &qp.sub(&qd)?.mul(&ic)?.scale(half))?,
        MatrixFunction::zeros(2, 2),
        dg(&flow.scale(half), &flow.scale(half))?,
        b,
        MatrixFunction::zeros(2, 2),
        MatrixFunction::zeros(2, 2),
        MatrixFunction::zeros(2, 2),
        params.domain,
    )?;
    let kyp_residual_ref = dg(&flow.mul(&ih)?.mul(&ih)?, &flow.mul(&ic)?.mul(&ic)?)?;
    ph.validate(&grid, 1e-9)?;
    Ok(Heating {
        sys,
        ph,
        q: StorageCandidate::new(q)?,
        v_h,
        v_c,
        kyp_residual_ref,
    })
}
