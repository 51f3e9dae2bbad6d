//! From a KYP solution to a port-Hamiltonian representation, and the
//! change of state that makes the Hamiltonian time-independent.

use std::sync::{Arc, Mutex};

use crate::dissipativity::{kyp_check, StorageCandidate};
use crate::error::{Error, Result};
use crate::hermlin::{cholesky, cholesky_derivative, inverse, norm2, HermMatrix};
use crate::ltv::{Jet, LtvSystem, MatrixFunction};
use crate::transforms::{transform_ph, Transform};
use crate::{CMat, C64};

use super::{frame, PhRepresentation};

#[derive(Debug, Clone, Copy)]
pub struct CanonicalOptions {
    /// Relative tolerance of the KYP test run before construction.
    pub kyp_tol: f64,
    /// Eigenvalues of `Q` at or above this count towards its rank.
    pub rank_tol: f64,
    /// Relative size below which the blocks `A₁₂` and `C₂` count as zero,
    /// also used to validate the result.
    pub block_tol: f64,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        CanonicalOptions {
            kyp_tol: 1e-9,
            rank_tol: 1e-9,
            block_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CanonicalPh {
    /// Representation in the original coordinates, with the given `Q`.
    pub ph: PhRepresentation,
    /// Representation in the coordinates `x̃ = Uᴴx`, where
    /// `Q̃ = diag(Q₁₁, 0)` with `Q₁₁ ≻ 0`.
    pub reduced: PhRepresentation,
    /// The unitary frame `U(t)`.
    pub u: MatrixFunction,
    pub rank: usize,
    /// Largest relative mismatch between the assembled and the given
    /// coefficients over the grid.
    pub assembly_residual: f64,
}

/// All coefficients at one time, both coordinate systems.
struct Coeffs {
    q_red: CMat,
    qdot_red: CMat,
    k_red: CMat,
    j_red: CMat,
    r_red: CMat,
    g_red: CMat,
    p_red: CMat,
    k: CMat,
    j: CMat,
    r: CMat,
    g: CMat,
    p: CMat,
    a12: f64,
    c2: f64,
    a_norm: f64,
    c_norm: f64,
}

struct Builder {
    sys: LtvSystem,
    q: StorageCandidate,
    u: MatrixFunction,
    r: usize,
    cache: Mutex<Option<(f64, Arc<Coeffs>)>>,
}

fn half(m: CMat) -> CMat {
    m * C64::new(0.5, 0.0)
}

impl Builder {
    fn at(&self, t: f64) -> Result<Arc<Coeffs>> {
        if let Ok(g) = self.cache.try_lock() {
            if let Some((tc, c)) = g.as_ref() {
                if tc.to_bits() == t.to_bits() {
                    return Ok(c.clone());
                }
            }
        }
        let c = Arc::new(self.compute(t)?);
        if let Ok(mut g) = self.cache.try_lock() {
            *g = Some((t, c.clone()));
        }
        Ok(c)
    }

    fn compute(&self, t: f64) -> Result<Coeffs> {
        let (n, m, r) = (self.sys.n(), self.sys.m(), self.r);
        let k = self.sys.coefficients(t)?;
        let uj = self.u.jet(t, true)?;
        let (u, ud) = (&uj.value, uj.deriv.as_ref().expect("requested"));
        let uh = u.adjoint();
        let q = self.q.q().eval(t)?;
        let qd = self.q.qdot().eval(t)?;

        let at = &uh * (&k.a * u - ud);
        let bt = &uh * &k.b;
        let ct = &k.c * u;
        let q11 = HermMatrix::symmetrize((&uh * &q * u).view((0, 0), (r, r)).into_owned())?.0.into_matrix();
        let qt_dot = ud.adjoint() * &q * u + &uh * &qd * u + &uh * &q * ud;
        let qd11 = HermMatrix::symmetrize(qt_dot.view((0, 0), (r, r)).into_owned())?.0.into_matrix();
        let qi = inverse(&q11)?;

        let a11 = at.view((0, 0), (r, r)).into_owned();
        let a11h = a11.adjoint();
        let b1 = bt.view((0, 0), (r, m)).into_owned();
        let c1h = ct.view((0, 0), (m, r)).adjoint();

        let mut q_red = CMat::zeros(n, n);
        q_red.view_mut((0, 0), (r, r)).copy_from(&q11);
        let mut qdot_red = CMat::zeros(n, n);
        qdot_red.view_mut((0, 0), (r, r)).copy_from(&qd11);

        let mut k_red = -at.clone();
        k_red.view_mut((0, 0), (r, r)).copy_from(&half(&qi * &qd11));
        k_red.view_mut((0, r), (r, n - r)).fill(C64::new(0.0, 0.0));
        let mut j_red = CMat::zeros(n, n);
        j_red
            .view_mut((0, 0), (r, r))
            .copy_from(&half(&a11 * &qi - &qi * &a11h));
        let mut r_red = CMat::zeros(n, n);
        r_red
            .view_mut((0, 0), (r, r))
            .copy_from(&half(-(&a11 * &qi + &qi * &a11h + &qi * &qd11 * &qi)));
        let mut g_red = bt.clone();
        g_red.view_mut((0, 0), (r, m)).copy_from(&half(&qi * &c1h + &b1));
        let mut p_red = CMat::zeros(n, m);
        p_red.view_mut((0, 0), (r, m)).copy_from(&half(&qi * &c1h - &b1));

        Ok(Coeffs {
            k: u * &k_red * &uh + u * ud.adjoint(),
            j: u * &j_red * &uh,
            r: u * &r_red * &uh,
            g: u * &g_red,
            p: u * &p_red,
            a12: norm2(&at.view((0, r), (r, n - r)).into_owned()),
            c2: norm2(&ct.view((0, r), (m, n - r)).into_owned()),
            a_norm: norm2(&at),
            c_norm: norm2(&ct),
            q_red,
            qdot_red,
            k_red,
            j_red,
            r_red,
            g_red,
            p_red,
        })
    }
}

type Pick = fn(&Coeffs) -> &CMat;

fn extract(b: &Arc<Builder>, shape: (usize, usize), label: &str, value: Pick, deriv: Option<Pick>) -> MatrixFunction {
    let b2 = b.clone();
    let what = label.to_string();
    let mut bps = b.u.breakpoints().to_vec();
    bps.extend_from_slice(b.sys.breakpoints().as_slice());
    let domain = b.sys.domain().intersect(&b.u.domain());
    MatrixFunction::numeric(shape.0, shape.1, domain, bps, label, move |t, need| {
        if need && deriv.is_none() {
            return Err(Error::DerivativeUnavailable { what: what.clone() });
        }
        let c = b2.at(t)?;
        Ok(Jet::new(value(&c).clone(), deriv.filter(|_| need).map(|d| d(&c).clone())))
    })
}

fn not_kyp(report: &crate::dissipativity::KypReport) -> Error {
    let (t, min_eig) = report.worst.unwrap_or((f64::NAN, f64::NAN));
    Error::NotAKypSolution { t, min_eig }
}

/// [`canonical_ph_with`] with default options.
pub fn canonical_ph(sys: &LtvSystem, q: &StorageCandidate, grid: &[f64]) -> Result<CanonicalPh> {
    canonical_ph_with(sys, q, grid, CanonicalOptions::default())
}

/// Builds the canonical port-Hamiltonian representation of `sys` with
/// Hamiltonian `½xᴴQx`.
///
/// In the frame `x̃ = Uᴴx` where `Q̃ = diag(Q₁₁, 0)`, the blocks forced by
/// the structure are taken as they come and the free ones are zero:
/// `J₁₁ = ½(A₁₁Q₁₁⁻¹ − Q₁₁⁻¹A₁₁ᴴ)`,
/// `R₁₁ = −½(A₁₁Q₁₁⁻¹ + Q₁₁⁻¹A₁₁ᴴ + Q₁₁⁻¹Q̇₁₁Q₁₁⁻¹)`, `K₁₁ = ½Q₁₁⁻¹Q̇₁₁`,
/// `K₂₁ = −A₂₁`, `K₂₂ = −A₂₂`, `G₁ = ½(Q₁₁⁻¹C₁ᴴ + B₁)`,
/// `P₁ = ½(Q₁₁⁻¹C₁ᴴ − B₁)`, `G₂ = B₂`, `S = ½(D + Dᴴ)`, `N = ½(Dᴴ − D)`.
///
/// Pointwise inverses and the frame are evaluated numerically, so the
/// coefficients carry no derivatives (except `Q`).
pub fn canonical_ph_with(
    sys: &LtvSystem,
    q: &StorageCandidate,
    grid: &[f64],
    opts: CanonicalOptions,
) -> Result<CanonicalPh> {
    let report = kyp_check(sys, q, grid, opts.kyp_tol)?;
    if !report.holds {
        return Err(not_kyp(&report));
    }
    let (u, r) = frame::build(q, grid, opts.rank_tol)?;
    let (n, m) = (sys.n(), sys.m());
    let b = Arc::new(Builder {
        sys: sys.clone(),
        q: q.clone(),
        u: u.clone(),
        r,
        cache: Mutex::new(None),
    });
    let checked: Vec<f64> = grid.iter().copied().filter(|&t| !q.is_excluded(t)).collect();
    for &t in &checked {
        let c = b.at(t)?;
        if c.a12 > opts.block_tol * (1.0 + c.a_norm) {
            return Err(Error::A12NotZero { t, norm: c.a12 });
        }
        if c.c2 > opts.block_tol * (1.0 + c.c_norm) {
            return Err(Error::C2NotZero { t, norm: c.c2 });
        }
    }

    let d = sys.d();
    let s = d.herm_part()?;
    let nn = d.adjoint().sub(d)?.scale(C64::new(0.5, 0.0));
    let domain = sys.domain();
    let reduced = PhRepresentation::new(
        extract(&b, (n, n), "reduced Q", |c| &c.q_red, Some(|c| &c.qdot_red)),
        extract(&b, (n, n), "reduced K", |c| &c.k_red, None),
        extract(&b, (n, n), "reduced J", |c| &c.j_red, None),
        extract(&b, (n, n), "reduced R", |c| &c.r_red, None),
        extract(&b, (n, m), "reduced G", |c| &c.g_red, None),
        extract(&b, (n, m), "reduced P", |c| &c.p_red, None),
        s.clone(),
        nn.clone(),
        domain,
    )?;
    let ph = PhRepresentation::new(
        q.q().clone(),
        extract(&b, (n, n), "canonical K", |c| &c.k, None),
        extract(&b, (n, n), "canonical J", |c| &c.j, None),
        extract(&b, (n, n), "canonical R", |c| &c.r, None),
        extract(&b, (n, m), "canonical G", |c| &c.g, None),
        extract(&b, (n, m), "canonical P", |c| &c.p, None),
        s,
        nn,
        domain,
    )?;
    ph.validate(&checked, opts.block_tol)?;

    let assembled = ph.assemble_unchecked()?;
    let mut assembly_residual: f64 = 0.0;
    for &t in &checked {
        let x = assembled.coefficients(t)?;
        let y = sys.coefficients(t)?;
        for (p, q) in [(&x.a, &y.a), (&x.b, &y.b), (&x.c, &y.c), (&x.d, &y.d)] {
            assembly_residual = assembly_residual.max(norm2(&(p - q)) / (1.0 + norm2(q)));
        }
    }
    Ok(CanonicalPh {
        ph,
        reduced,
        u,
        rank: r,
        assembly_residual,
    })
}

/// Checks that `Q` solves the KYP inequality on `grid` and returns the
/// canonical representation in the original coordinates.
pub fn kyp_to_ph(sys: &LtvSystem, q: &StorageCandidate, grid: &[f64]) -> Result<PhRepresentation> {
    Ok(canonical_ph(sys, q, grid)?.ph)
}

#[derive(Debug, Clone)]
pub struct Autonomized {
    /// `x = Z x̃`.
    pub z: MatrixFunction,
    /// Transformed representation with `Q̃ = diag(I_r, 0)`.
    pub ph: PhRepresentation,
    pub rank: usize,
}

/// Changes the state so that the Hamiltonian becomes `½x̃ᴴdiag(I_r, 0)x̃`:
/// `Z = U·diag(L⁻¹, I)` with `UᴴQU = diag(Q₁₁, 0)` and `Q₁₁ = LᴴL`,
/// `L` lower triangular.
pub fn autonomize_hamiltonian(ph: &PhRepresentation, grid: &[f64]) -> Result<Autonomized> {
    let storage = ph.storage()?;
    let (u, r) = frame::build(&storage, grid, CanonicalOptions::default().rank_tol)?;
    let n = ph.state_dim();
    let st = storage.clone();
    let uf = u.clone();
    let mut bps = u.breakpoints().to_vec();
    bps.extend_from_slice(storage.excluded_points());
    let z = MatrixFunction::numeric(n, n, ph.domain, bps, "autonomizing transformation", move |t, need| {
        let uj = uf.jet(t, need)?;
        let u = &uj.value;
        let q = st.q().eval(t)?;
        let q11 = HermMatrix::symmetrize((u.adjoint() * &q * u).view((0, 0), (r, r)).into_owned())?.0;
        let l = cholesky(&q11)?;
        let li = inverse(&l)?;
        let mut scale = CMat::identity(n, n);
        scale.view_mut((0, 0), (r, r)).copy_from(&li);
        let deriv = if need {
            let ud = uj.deriv.as_ref().expect("requested");
            let qd = st.qdot().eval(t)?;
            let qt_dot = ud.adjoint() * &q * u + u.adjoint() * &qd * u + u.adjoint() * &q * ud;
            let qd11 = HermMatrix::symmetrize(qt_dot.view((0, 0), (r, r)).into_owned())?.0.into_matrix();
            let ld = cholesky_derivative(&l, &qd11)?;
            let mut dscale = CMat::zeros(n, n);
            dscale.view_mut((0, 0), (r, r)).copy_from(&-(&li * ld * &li));
            Some(ud * &scale + u * dscale)
        } else {
            None
        };
        Ok(Jet::new(u * scale, deriv))
    })
    .memoized();

    let mut target = CMat::zeros(n, n);
    for i in 0..r {
        target[(i, i)] = C64::new(1.0, 0.0);
    }
    for &t in grid {
        let zt = z.eval(t)?;
        let res = norm2(&(zt.adjoint() * storage.q().eval(t)? * &zt - &target));
        if res > 1e-8 {
            return Err(Error::InvariantViolation {
                invariant: "ZᴴQZ = diag(I, 0)".into(),
                t,
                residual: res,
            });
        }
    }
    let mut out = transform_ph(ph, &Transform::State { z: z.clone() })?;
    out.q = MatrixFunction::constant(&target);
    Ok(Autonomized { z, ph: out, rank: r })
}
