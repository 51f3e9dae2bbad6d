//! State, input/output and time transformations of systems, storages and
//! port-Hamiltonian representations, and a numerical invariance check.
//!
//! All validity conditions (invertibility, monotonicity) are checked on a
//! user-supplied grid only.

use std::sync::Arc;

use crate::dissipativity::{kyp_check, kyp_matrix, KypReport, StorageCandidate};
use crate::error::{Error, Result};
use crate::expr::TimeExpr;
use crate::hermlin::{norm2, singular_values};
use crate::ltv::{supply_exact, Domain, Jet, LtvSystem, MatrixFunction};
use crate::ph::PhRepresentation;
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone)]
pub enum Transform {
    /// `x = Z(t) x̃`.
    State { z: MatrixFunction },
    /// `u = V(t) ǔ`, `y̌ = V(t)ᴴ y`.
    Io { v: MatrixFunction },
    /// `t = θ(t̂)` for `t̂` in `domain`, with `θ̇ > 0`.
    Time { theta: TimeExpr, domain: Domain },
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Errors with `SingularTransform` at the first node where
/// `σ_min(M) ≤ tol·σ_max(M)`.
pub fn check_invertible(m: &MatrixFunction, grid: &[f64], tol: f64) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch("transformation must be square".into()));
    }
    for &t in grid {
        let s = singular_values(&m.eval(t)?);
        let (hi, lo) = (s.first().copied().unwrap_or(0.0), s.last().copied().unwrap_or(0.0));
        if !(lo > tol * hi) {
            return Err(Error::SingularTransform { t, sigma_min: lo });
        }
    }
    Ok(())
}

/// `Ã = Z⁻¹(AZ − Ż)`, `B̃ = Z⁻¹B`, `C̃ = CZ`, `D̃ = D`, without checks.
pub fn state_transform_unchecked(sys: &LtvSystem, z: &MatrixFunction) -> Result<LtvSystem> {
    if z.shape() != (sys.n(), sys.n()) {
        return Err(Error::DimensionMismatch(format!(
            "state transformation is {:?}, system has {} states",
            z.shape(),
            sys.n()
        )));
    }
    let zinv = z.inverse()?;
    let a = zinv.mul(&sys.a().mul(z)?.sub(&z.derivative())?)?;
    let b = zinv.mul(sys.b())?;
    let c = sys.c().mul(z)?;
    LtvSystem::new(a, b, c, sys.d().clone(), sys.domain().intersect(&z.domain()))
}

pub fn state_transform(sys: &LtvSystem, z: &MatrixFunction, grid: &[f64], tol: f64) -> Result<LtvSystem> {
    let out = state_transform_unchecked(sys, z)?;
    check_invertible(z, grid, tol)?;
    Ok(out)
}

/// `B̌ = BV`, `Č = VᴴC`, `Ď = VᴴDV`.
pub fn io_transform(sys: &LtvSystem, v: &MatrixFunction, grid: &[f64], tol: f64) -> Result<LtvSystem> {
    if v.shape() != (sys.m(), sys.m()) {
        return Err(Error::DimensionMismatch(format!(
            "port transformation is {:?}, system has {} ports",
            v.shape(),
            sys.m()
        )));
    }
    check_invertible(v, grid, tol)?;
    let vh = v.adjoint();
    LtvSystem::new(
        sys.a().clone(),
        sys.b().mul(v)?,
        vh.mul(sys.c())?,
        vh.mul(&sys.d().mul(v)?)?,
        sys.domain().intersect(&v.domain()),
    )
}

/// Solves `θ(s) = target` for `s` in `[lo, hi]` with `θ` increasing.
/// Infinite ends are handled by expanding a bracket outwards.
pub fn invert_monotone(theta: &TimeExpr, target: f64, lo: f64, hi: f64) -> Result<f64> {
    let f = |s: f64| -> Result<f64> { Ok(theta.eval_real(s)? - target) };
    let fail = || Error::InvalidArgument(format!("time map does not reach {target} on ({lo}, {hi})"));
    let mut a = if lo.is_finite() { lo } else if hi.is_finite() { hi - 1.0 } else { 0.0 };
    let mut b = if hi.is_finite() { hi } else { a.max(lo) + 1.0 };
    let mut step = 1.0;
    let mut fa = f(a)?;
    while fa > 0.0 {
        if lo.is_finite() {
            return Err(fail());
        }
        b = a;
        a -= step;
        step *= 2.0;
        fa = f(a)?;
        if step > 1e300 {
            return Err(fail());
        }
    }
    let mut fb = f(b)?;
    while fb < 0.0 {
        if hi.is_finite() {
            return Err(fail());
        }
        a = b;
        b += step;
        step *= 2.0;
        fb = f(b)?;
        if step > 1e300 {
            return Err(fail());
        }
    }
    if fa == 0.0 {
        return Ok(a);
    }
    let dtheta = theta.derivative();
    let mut s = 0.5 * (a + b);
    for _ in 0..200 {
        let fs = f(s)?;
        if fs == 0.0 {
            return Ok(s);
        }
        if fs < 0.0 {
            a = s;
        } else {
            b = s;
        }
        if b - a <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
            break;
        }
        // Newton step, kept only while it stays inside the bracket
        let d = dtheta.eval_real(s)?;
        let newton = s - fs / d;
        s = if d > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Ok(s)
}

struct TimeMap {
    theta: TimeExpr,
    dtheta: TimeExpr,
    ddtheta: TimeExpr,
}

/// `F ∘ θ`, multiplied by `θ̇` when `scaled`.
fn compose_time(
    f: &MatrixFunction,
    map: &Arc<TimeMap>,
    domain: Domain,
    scaled: bool,
) -> Result<MatrixFunction> {
    let mut bps = map.theta.breakpoints();
    let image = Domain::new(
        if domain.lo.is_finite() { map.theta.eval_real(domain.lo)? } else { f64::NEG_INFINITY },
        if domain.hi.is_finite() { map.theta.eval_real(domain.hi)? } else { f64::INFINITY },
    );
    for &b in f.breakpoints() {
        if b > image.lo && b < image.hi {
            bps.push(invert_monotone(&map.theta, b, domain.lo, domain.hi)?);
        }
    }
    let inner = f.clone();
    let map = map.clone();
    let label = if scaled { "θ̇·(F∘θ)" } else { "F∘θ" };
    Ok(MatrixFunction::numeric(f.rows(), f.cols(), domain, bps, label, move |t, need| {
        let s = map.theta.eval_real(t)?;
        let rate = map.dtheta.eval_real(t)?;
        let j = inner.jet(s, need)?;
        if scaled {
            let deriv = if need {
                let acc = map.ddtheta.eval_real(t)?;
                Some(&j.value * c(acc) + j.deriv.as_ref().expect("requested") * c(rate * rate))
            } else {
                None
            };
            Ok(Jet::new(&j.value * c(rate), deriv))
        } else {
            let deriv = j.deriv.map(|d| d * c(rate));
            Ok(Jet::new(j.value, deriv))
        }
    }))
}

fn time_map(theta: &TimeExpr) -> Arc<TimeMap> {
    let dtheta = theta.derivative();
    let ddtheta = dtheta.derivative();
    Arc::new(TimeMap {
        theta: theta.clone(),
        dtheta,
        ddtheta,
    })
}

/// Checks `θ̇ > 0` on `grid` and that `θ` maps `new_domain` into the
/// closure of `target`.
fn check_time_map(theta: &TimeExpr, new_domain: Domain, target: Domain, grid: &[f64]) -> Result<()> {
    let dtheta = theta.derivative();
    for &t in grid {
        if !new_domain.contains(t) {
            return Err(Error::DomainMismatch(format!(
                "grid node {t} outside the new domain ({}, {})",
                new_domain.lo, new_domain.hi
            )));
        }
        let rate = dtheta.eval_real(t)?;
        if !(rate > 0.0) {
            return Err(Error::NotOrientationPreserving { t, rate });
        }
    }
    let mut probes: Vec<f64> = grid.to_vec();
    probes.extend([new_domain.lo, new_domain.hi].into_iter().filter(|x| x.is_finite()));
    for t in probes {
        let s = theta.eval_real(t)?;
        if !target.contains(s) {
            return Err(Error::DomainMismatch(format!(
                "θ({t}) = {s} outside the system domain ({}, {})",
                target.lo, target.hi
            )));
        }
    }
    Ok(())
}

/// `Â = θ̇(A∘θ)`, `B̂ = θ̇(B∘θ)`, `Ĉ = θ̇(C∘θ)`, `D̂ = θ̇(D∘θ)` on `new_domain`.
pub fn time_transform(sys: &LtvSystem, theta: &TimeExpr, new_domain: Domain, grid: &[f64]) -> Result<LtvSystem> {
    check_time_map(theta, new_domain, sys.domain(), grid)?;
    let map = time_map(theta);
    LtvSystem::new(
        compose_time(sys.a(), &map, new_domain, true)?,
        compose_time(sys.b(), &map, new_domain, true)?,
        compose_time(sys.c(), &map, new_domain, true)?,
        compose_time(sys.d(), &map, new_domain, true)?,
        new_domain,
    )
}

pub fn transform_system(sys: &LtvSystem, tr: &Transform, grid: &[f64], tol: f64) -> Result<LtvSystem> {
    match tr {
        Transform::State { z } => state_transform(sys, z, grid, tol),
        Transform::Io { v } => io_transform(sys, v, grid, tol),
        Transform::Time { theta, domain } => time_transform(sys, theta, *domain, grid),
    }
}

/// `Q̃ = ZᴴQZ` (state), `Q` (ports), `Q∘θ` (time).
pub fn transform_storage(q: &StorageCandidate, tr: &Transform) -> Result<StorageCandidate> {
    match tr {
        Transform::State { z } => StorageCandidate::new(z.adjoint().mul(&q.q().mul(z)?)?),
        Transform::Io { .. } => Ok(q.clone()),
        Transform::Time { theta, domain } => {
            let map = time_map(theta);
            let qt = compose_time(q.q(), &map, *domain, false)?;
            // d/dt̂ Q(θ) = θ̇·(Q̇∘θ)
            let qd = compose_time(q.qdot(), &map, *domain, true)?;
            StorageCandidate::from_parts(qt, qd)
        }
    }
}

/// Transforms every coefficient of a port-Hamiltonian representation:
/// under `x = Zx̃`, `K̃ = Z⁻¹(Ż + KZ)`, `J̃ = Z⁻¹JZ⁻ᴴ`, `R̃ = Z⁻¹RZ⁻ᴴ`,
/// `Q̃ = ZᴴQZ`, `G̃ = Z⁻¹G`, `P̃ = Z⁻¹P`; under `u = Vǔ`, `G, P` are
/// multiplied by `V` and `S, N` congruence-transformed; under `t = θ(t̂)`,
/// `Q` is composed and all other coefficients also scaled by `θ̇`.
pub fn transform_ph(ph: &PhRepresentation, tr: &Transform) -> Result<PhRepresentation> {
    match tr {
        Transform::State { z } => {
            if z.shape() != (ph.state_dim(), ph.state_dim()) {
                return Err(Error::DimensionMismatch("state transformation size".into()));
            }
            let zinv = z.inverse()?;
            let zinv_h = zinv.adjoint();
            let congr = |m: &MatrixFunction| zinv.mul(&m.mul(&zinv_h)?);
            PhRepresentation::new(
                z.adjoint().mul(&ph.q.mul(z)?)?,
                zinv.mul(&z.derivative().add(&ph.k.mul(z)?)?)?,
                congr(&ph.j)?,
                congr(&ph.r)?,
                zinv.mul(&ph.g)?,
                zinv.mul(&ph.p)?,
                ph.s.clone(),
                ph.n.clone(),
                ph.domain.intersect(&z.domain()),
            )
        }
        Transform::Io { v } => {
            if v.shape() != (ph.port_dim(), ph.port_dim()) {
                return Err(Error::DimensionMismatch("port transformation size".into()));
            }
            let vh = v.adjoint();
            PhRepresentation::new(
                ph.q.clone(),
                ph.k.clone(),
                ph.j.clone(),
                ph.r.clone(),
                ph.g.mul(v)?,
                ph.p.mul(v)?,
                vh.mul(&ph.s.mul(v)?)?,
                vh.mul(&ph.n.mul(v)?)?,
                ph.domain.intersect(&v.domain()),
            )
        }
        Transform::Time { theta, domain } => {
            let map = time_map(theta);
            let sc = |m: &MatrixFunction| compose_time(m, &map, *domain, true);
            PhRepresentation::new(
                compose_time(&ph.q, &map, *domain, false)?,
                sc(&ph.k)?,
                sc(&ph.j)?,
                sc(&ph.r)?,
                sc(&ph.g)?,
                sc(&ph.p)?,
                sc(&ph.s)?,
                sc(&ph.n)?,
                *domain,
            )
        }
    }
}

/// The KYP matrix the transformed system must have at `t` (new time),
/// predicted from the original one: `diag(Z, I)ᴴ·KYP·diag(Z, I)`,
/// `diag(I, V)ᴴ·KYP·diag(I, V)` or `θ̇·KYP(θ)`.
pub fn predicted_kyp(sys: &LtvSystem, q: &StorageCandidate, tr: &Transform, t: f64) -> Result<CMat> {
    let (n, m) = (sys.n(), sys.m());
    match tr {
        Transform::State { z } => {
            let mut t_mat = CMat::identity(n + m, n + m);
            t_mat.view_mut((0, 0), (n, n)).copy_from(&z.eval(t)?);
            Ok(t_mat.adjoint() * kyp_matrix(sys, q, t)?.matrix() * t_mat)
        }
        Transform::Io { v } => {
            let mut t_mat = CMat::identity(n + m, n + m);
            t_mat.view_mut((n, n), (m, m)).copy_from(&v.eval(t)?);
            Ok(t_mat.adjoint() * kyp_matrix(sys, q, t)?.matrix() * t_mat)
        }
        Transform::Time { theta, .. } => {
            let rate = theta.derivative().eval_real(t)?;
            let s = theta.eval_real(t)?;
            Ok(kyp_matrix(sys, q, s)?.into_matrix() * c(rate))
        }
    }
}

/// Settings for [`verify_invariance`]. `grid` and `interval` are in the
/// coordinates of the original system; for a time map they are pulled
/// back through `θ⁻¹`.
#[derive(Debug, Clone)]
pub struct InvarianceOptions {
    pub grid: Vec<f64>,
    /// Relative tolerance of the KYP tests and the congruence identity.
    pub tol: f64,
    /// Relative tolerance of the supply comparison.
    pub supply_tol: f64,
    pub input: MatrixFunction,
    pub x0: CVec,
    pub interval: (f64, f64),
    pub rtol: f64,
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub kyp_before: KypReport,
    pub kyp_after: KypReport,
    /// Largest `‖KYP̃ − predicted‖₂ / (1 + ‖KYP̃‖₂)` over the grid.
    pub congruence_residual: f64,
    pub supply_original: f64,
    pub supply_transformed: f64,
    pub supply_gap: f64,
    /// Outcome of validating the transformed pH representation, if one
    /// was supplied: `Ok` or the violated invariant.
    pub ph_check: Option<std::result::Result<(), String>>,
    pub passed: bool,
    pub note: &'static str,
}

/// Checks, for one transformation: that the transformed storage still
/// solves the KYP inequality, the exact congruence identity between the
/// KYP matrices, invariance of the supply on corresponding trajectories,
/// and (if `ph` is given) validity of the transformed representation.
pub fn verify_invariance(
    sys: &LtvSystem,
    q: &StorageCandidate,
    tr: &Transform,
    ph: Option<&PhRepresentation>,
    opts: &InvarianceOptions,
) -> Result<InvarianceReport> {
    let (ta, tb) = opts.interval;
    // grid and interval in the transformed time
    let pull = |t: f64| -> Result<f64> {
        match tr {
            Transform::Time { theta, domain } => invert_monotone(theta, t, domain.lo, domain.hi),
            _ => Ok(t),
        }
    };
    let new_grid = opts.grid.iter().map(|&t| pull(t)).collect::<Result<Vec<_>>>()?;
    let (nta, ntb) = (pull(ta)?, pull(tb)?);

    let sys_t = transform_system(sys, tr, &new_grid, opts.tol)?;
    let q_t = transform_storage(q, tr)?;
    let kyp_before = kyp_check(sys, q, &opts.grid, opts.tol)?;
    let kyp_after = kyp_check(&sys_t, &q_t, &new_grid, opts.tol)?;

    let mut congruence_residual: f64 = 0.0;
    for (&t_old, &t_new) in opts.grid.iter().zip(&new_grid) {
        if q.is_excluded(t_old) || q_t.is_excluded(t_new) {
            continue;
        }
        let actual = kyp_matrix(&sys_t, &q_t, t_new)?.into_matrix();
        let expect = predicted_kyp(sys, q, tr, t_new)?;
        congruence_residual = congruence_residual.max(norm2(&(&actual - expect)) / (1.0 + norm2(&actual)));
    }

    let (input_t, x0_t) = match tr {
        Transform::State { z } => {
            let z0 = z.eval(ta)?;
            let x = crate::hermlin::solve(&z0, &CMat::from_column_slice(opts.x0.len(), 1, opts.x0.as_slice()))?;
            (opts.input.clone(), CVec::from_column_slice(x.as_slice()))
        }
        Transform::Io { v } => (v.inverse()?.mul(&opts.input)?, opts.x0.clone()),
        Transform::Time { theta, domain } => {
            (compose_time(&opts.input, &time_map(theta), *domain, false)?, opts.x0.clone())
        }
    };
    let supply_original = supply_exact(sys, &opts.x0, &opts.input, ta, tb, opts.rtol)?;
    let supply_transformed = supply_exact(&sys_t, &x0_t, &input_t, nta, ntb, opts.rtol)?;
    let supply_gap = (supply_original - supply_transformed).abs();

    let ph_check = match ph {
        Some(ph) => Some(
            transform_ph(ph, tr)?
                .validate(&new_grid, opts.tol)
                .map_err(|e| e.to_string()),
        ),
        None => None,
    };
    let passed = (kyp_after.holds || !kyp_before.holds)
        && congruence_residual <= opts.tol
        && supply_gap <= opts.supply_tol * (1.0 + supply_original.abs())
        && !matches!(ph_check, Some(Err(_)));
    Ok(InvarianceReport {
        kyp_before,
        kyp_after,
        congruence_residual,
        supply_original,
        supply_transformed,
        supply_gap,
        ph_check,
        passed,
        note: "invertibility and monotonicity were checked on the grid nodes only",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltv::{simulate, state_transition, uniform_grid};

    fn sys1(a: &str, b: &str, cc: &str, d: &str) -> LtvSystem {
        LtvSystem::parse(&[&[a]], &[&[b]], &[&[cc]], &[&[d]], Domain::full()).unwrap()
    }

    fn mf(s: &str) -> MatrixFunction {
        MatrixFunction::parse_rows(&[&[s]]).unwrap()
    }

    #[test]
    fn exponential_scaling_of_a_constant_state() {
        let sys = sys1("0", "1", "1", "0");
        let out = state_transform(&sys, &mf("exp(t)"), &[0.0, 1.0], 1e-12).unwrap();
        for t in [0.0, 0.4, 2.0] {
            assert!((out.a().eval(t).unwrap()[(0, 0)].re + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn transition_matrix_freezes_dynamics() {
        let sys = LtvSystem::parse(
            &[&["0", "1"], &["-1 - t", "-0.1"]],
            &[&["0"], &["1"]],
            &[&["1", "0"]],
            &[&["0"]],
            Domain::full(),
        )
        .unwrap();
        let sys2 = sys.clone();
        let z = MatrixFunction::numeric(2, 2, Domain::full(), vec![], "Φ(t, 0)", move |t, need| {
            let phi = state_transition(&sys2, t, 0.0, 1e-12)?;
            let d = need.then(|| sys2.a().eval(t).unwrap() * &phi);
            Ok(Jet::new(phi, d))
        });
        let out = state_transform_unchecked(&sys, &z).unwrap();
        for t in [0.3, 1.0, 1.7] {
            assert!(out.a().eval(t).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn singular_state_map_has_a_witness() {
        let sys = sys1("-1", "1", "1", "0");
        match state_transform(&sys, &mf("t - 0.5"), &uniform_grid(0.0, 1.0, 3), 1e-12) {
            Err(Error::SingularTransform { t, .. }) => assert_eq!(t, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn port_scaling_preserves_supply() {
        let sys = sys1("-1", "1", "1", "1");
        let out = io_transform(&sys, &mf("2"), &[0.0], 1e-12).unwrap();
        assert_eq!(out.d().eval(0.0).unwrap()[(0, 0)].re, 4.0);
        let rot = io_transform(&sys1("0", "0", "0", "3"), &mf("exp(0.7*i)"), &[0.0], 1e-12).unwrap();
        let d = rot.d().eval(0.0).unwrap()[(0, 0)];
        assert!(((d + d.conj()).re - 6.0).abs() < 1e-14);
    }

    #[test]
    fn time_doubling() {
        let sys = sys1("-1 - t", "1", "1", "0");
        let dom = Domain::new(0.0, 5.0);
        let sys = LtvSystem::new(sys.a().clone(), sys.b().clone(), sys.c().clone(), sys.d().clone(), dom).unwrap();
        let theta = TimeExpr::parse("2*t").unwrap();
        let out = time_transform(&sys, &theta, Domain::new(0.0, 2.5), &uniform_grid(0.0, 2.5, 6)).unwrap();
        for t in [0.0, 0.8, 2.5] {
            let a = out.a().eval(t).unwrap()[(0, 0)].re;
            assert!((a - 2.0 * (-1.0 - 2.0 * t)).abs() < 1e-14);
        }
        assert!(matches!(
            time_transform(&sys, &theta, Domain::new(0.0, 3.0), &[0.0]),
            Err(Error::DomainMismatch(_))
        ));
        let back = TimeExpr::parse("-t").unwrap();
        assert!(matches!(
            time_transform(&sys, &back, Domain::new(-1.0, 0.0), &[-0.5]),
            Err(Error::NotOrientationPreserving { .. })
        ));
    }

    #[test]
    fn time_map_supply_and_output_scaling() {
        let sys = sys1("-1", "1", "1", "0");
        let theta = TimeExpr::parse("t + sin(t)/2").unwrap();
        let tr = Transform::Time {
            theta: theta.clone(),
            domain: Domain::full(),
        };
        let opts = InvarianceOptions {
            grid: uniform_grid(0.0, 3.0, 31),
            tol: 1e-9,
            supply_tol: 1e-8,
            input: mf("cos(t)"),
            x0: CVec::from_element(1, c(0.5)),
            interval: (0.0, 3.0),
            rtol: 1e-10,
        };
        let q = StorageCandidate::parse(&[&["1"]]).unwrap();
        let rep = verify_invariance(&sys, &q, &tr, None, &opts).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.congruence_residual < 1e-12);

        // ŷ(t̂) = θ̇(t̂)·y(θ(t̂))
        let sys_t = time_transform(&sys, &theta, Domain::full(), &[0.0]).unwrap();
        let u_t = compose_time(&opts.input, &time_map(&theta), Domain::full(), false).unwrap();
        let gh = uniform_grid(0.0, 2.0, 11);
        let tr_hat = simulate(&sys_t, 0.0, &opts.x0, &u_t, &gh, 1e-11).unwrap();
        let g: Vec<f64> = gh.iter().map(|&s| theta.eval_real(s).unwrap()).collect();
        let tr_orig = simulate(&sys, 0.0, &opts.x0, &opts.input, &g, 1e-11).unwrap();
        for k in 0..gh.len() {
            let rate = 1.0 + gh[k].cos() / 2.0;
            assert!((tr_hat.y[k][0] - tr_orig.y[k][0] * rate).norm() < 1e-8);
        }
    }

    #[test]
    fn state_map_congruence_and_trajectories() {
        let sys = LtvSystem::parse(
            &[&["-1", "t"], &["-t", "-2"]],
            &[&["1"], &["0.5"]],
            &[&["1", "0.5"]],
            &[&["1"]],
            Domain::full(),
        )
        .unwrap();
        let q = StorageCandidate::parse(&[&["1", "0"], &["0", "1"]]).unwrap();
        let z = MatrixFunction::parse_rows(&[&["2 + sin(t)", "0.3"], &["0.1*t", "1"]]).unwrap();
        let tr = Transform::State { z: z.clone() };
        let opts = InvarianceOptions {
            grid: uniform_grid(0.0, 2.0, 21),
            tol: 1e-9,
            supply_tol: 1e-8,
            input: mf("sin(2*t)"),
            x0: CVec::from_vec(vec![c(1.0), c(-0.5)]),
            interval: (0.0, 2.0),
            rtol: 1e-10,
        };
        let rep = verify_invariance(&sys, &q, &tr, None, &opts).unwrap();
        assert!(rep.congruence_residual < 1e-12);
        assert!(rep.supply_gap < 1e-8);

        let rtol = 1e-10;
        let sys_t = state_transform(&sys, &z, &opts.grid, 1e-12).unwrap();
        let x0t = crate::hermlin::solve(&z.eval(0.0).unwrap(), &CMat::from_column_slice(2, 1, opts.x0.as_slice())).unwrap();
        let a = simulate(&sys, 0.0, &opts.x0, &opts.input, &opts.grid, rtol).unwrap();
        let b = simulate(&sys_t, 0.0, &CVec::from_column_slice(x0t.as_slice()), &opts.input, &opts.grid, rtol).unwrap();
        for k in 0..opts.grid.len() {
            let back = z.eval(opts.grid[k]).unwrap() * &b.x[k];
            assert!((back - &a.x[k]).norm() <= 100.0 * rtol * (1.0 + a.x[k].norm()));
            assert!((&b.y[k] - &a.y[k]).norm() < 1e-8);
        }
    }

    #[test]
    fn monotone_inversion() {
        let th = TimeExpr::parse("t + sin(t)/2").unwrap();
        for target in [-7.0, 0.0, 0.3, 12.5] {
            let s = invert_monotone(&th, target, f64::NEG_INFINITY, f64::INFINITY).unwrap();
            assert!((th.eval_real(s).unwrap() - target).abs() < 1e-13);
        }
        assert!(invert_monotone(&th, 5.0, 0.0, 1.0).is_err());
    }
}
