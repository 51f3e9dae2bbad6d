//! Dormand–Prince 5(4) with PI step-size control and continuous output.
//!
//! The integration runs in a reversed clock when `t1 < t0`; internally the
//! independent variable is `tau = dir * (t - t0) >= 0`. Breakpoints split
//! the span into segments that are integrated separately, and right-hand
//! side evaluations are clamped strictly inside the current segment so a
//! coefficient jump at a segment end is never sampled from the wrong side.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::C64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub breakpoints: Vec<f64>,
    /// Report [`Error::BlowUp`] once the max-norm of the state exceeds this.
    pub blowup_bound: Option<f64>,
    /// Quintic continuous output through a fifth order half step. Costs
    /// six extra evaluations per step; the output derivative then stays
    /// within a small multiple of the tolerance instead of `tol^0.8`.
    pub quintic_dense: bool,
}

impl OdeOptions {
    pub fn new(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            max_steps: 2_000_000,
            breakpoints: Vec::new(),
            blowup_bound: None,
            quintic_dense: false,
        }
    }

    pub fn with_breakpoints(mut self, bps: Vec<f64>) -> Self {
        self.breakpoints = bps;
        self
    }
}

#[derive(Debug, Clone)]
enum Interp {
    /// Dormand–Prince continuous extension in nested form.
    Dopri([Vec<C64>; 5]),
    /// Monomial coefficients in `theta`.
    Quintic([Vec<C64>; 6]),
}

#[derive(Debug, Clone)]
struct DenseStep {
    tau0: f64,
    h: f64,
    coef: Interp,
}

/// Continuous solution of an initial value problem on `[t0, t1]` (or
/// `[t1, t0]` when integrating backward).
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t0: f64,
    t1: f64,
    dir: f64,
    y0: Vec<C64>,
    y1: Vec<C64>,
    steps: Vec<DenseStep>,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t1
    }

    pub fn final_state(&self) -> &[C64] {
        &self.y1
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Times of the accepted step boundaries, in integration order.
    pub fn step_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .steps
            .iter()
            .map(|s| self.t0 + self.dir * s.tau0)
            .collect();
        v.push(self.t1);
        v
    }

    fn locate(&self, t: f64) -> Result<Option<(&DenseStep, f64)>> {
        let (lo, hi) = if self.dir > 0.0 {
            (self.t0, self.t1)
        } else {
            (self.t1, self.t0)
        };
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        if self.steps.is_empty() {
            return Ok(None);
        }
        let tau = (self.dir * (t - self.t0)).max(0.0);
        let idx = self
            .steps
            .partition_point(|s| s.tau0 <= tau)
            .saturating_sub(1);
        let s = &self.steps[idx];
        let theta = ((tau - s.tau0) / s.h).clamp(0.0, 1.0);
        Ok(Some((s, theta)))
    }

    pub fn eval(&self, t: f64) -> Result<Vec<C64>> {
        let Some((s, th)) = self.locate(t)? else {
            return Ok(self.y0.clone());
        };
        let [c0, c1, c2, c3, c4] = match &s.coef {
            Interp::Dopri(c) => c,
            Interp::Quintic(a) => {
                return Ok((0..self.dim)
                    .map(|i| a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * th + c[i]))
                    .collect())
            }
        };
        let th1 = 1.0 - th;
        Ok((0..self.dim)
            .map(|i| c0[i] + th * (c1[i] + th1 * (c2[i] + th * (c3[i] + th1 * c4[i]))))
            .collect())
    }

    /// Time derivative of the continuous output.
    pub fn eval_deriv(&self, t: f64) -> Result<Vec<C64>> {
        let Some((s, th)) = self.locate(t)? else {
            return Ok(vec![Complex64::new(0.0, 0.0); self.dim]);
        };
        let scale = self.dir / s.h;
        let [_, c1, c2, c3, c4] = match &s.coef {
            Interp::Dopri(c) => c,
            Interp::Quintic(a) => {
                return Ok((0..self.dim)
                    .map(|i| {
                        let d = (1..6).rev().fold(Complex64::new(0.0, 0.0), |acc, j| acc * th + j as f64 * a[j][i]);
                        d * scale
                    })
                    .collect())
            }
        };
        let th1 = 1.0 - th;
        Ok((0..self.dim)
            .map(|i| {
                let sv = c3[i] + th1 * c4[i];
                let ds = -c4[i];
                let r = c2[i] + th * sv;
                let dr = sv + th * ds;
                let q = c1[i] + th1 * r;
                let dq = -r + th1 * dr;
                (q + th * dq) * scale
            })
            .collect())
    }
}

fn norm_scaled(e: &[C64], y0: &[C64], y1: &[C64], rtol: f64, atol: f64) -> f64 {
    if e.is_empty() {
        return 0.0;
    }
    let s: f64 = e
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(ei, (a, b))| {
            let sk = atol + rtol * a.norm().max(b.norm());
            (ei.norm() / sk).powi(2)
        })
        .sum();
    (s / e.len() as f64).sqrt()
}

fn axpy_into(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            if *c != 0.0 {
                acc += *c * k[i];
            }
        }
        out[i] = y[i] + h * acc;
    }
}

fn clamp_inside(t: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = if hi - lo > 8.0 * f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
        (lo.next_up(), hi.next_down())
    } else {
        (lo, hi)
    };
    t.clamp(a, b)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
///
/// `project` is applied to every accepted state (for example to restore
/// Hermitian symmetry); it must be idempotent.
pub fn solve<F>(
    f: F,
    t0: f64,
    t1: f64,
    y0: Vec<C64>,
    opts: &OdeOptions,
    project: Option<&dyn Fn(&mut [C64])>,
) -> Result<DenseSolution>
where
    F: Fn(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut sol = DenseSolution {
        dim: n,
        t0,
        t1,
        dir,
        y0: y0.clone(),
        y1: y0.clone(),
        steps: Vec::new(),
    };
    if span == 0.0 || n == 0 {
        return Ok(sol);
    }
    if y0.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::IntegrationFailure {
            t: t0,
            reason: "non-finite initial state".into(),
        });
    }

    let mut cuts: Vec<f64> = opts
        .breakpoints
        .iter()
        .map(|&b| dir * (b - t0))
        .filter(|&tau| tau > 1e-14 * (1.0 + t0.abs()) && tau < span * (1.0 - 1e-14))
        .collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    cuts.push(span);

    let (rtol, atol) = (opts.rtol, opts.atol);
    let time_of = |tau: f64| if tau >= span { t1 } else { t0 + dir * tau };

    let mut y = y0;
    let mut tau = 0.0;
    let mut h = 0.0;
    let mut facold: f64 = 1e-4;
    let mut nsteps = 0usize;
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]);
    let mut ystage = vec![Complex64::new(0.0, 0.0); n];
    let mut y1 = vec![Complex64::new(0.0, 0.0); n];
    let mut err = vec![Complex64::new(0.0, 0.0); n];

    for &seg_end in &cuts {
        let (ta, tb) = (time_of(tau), time_of(seg_end));
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        let rhs = |s: f64, y: &[C64], out: &mut [C64]| -> Result<()> {
            f(clamp_inside(time_of(s), lo, hi), y, out)?;
            if dir < 0.0 {
                out.iter_mut().for_each(|v| *v = -*v);
            }
            Ok(())
        };

        let (k1, rest) = k.split_first_mut().expect("seven stages");
        rhs(tau, &y, k1)?;
        let seg_len = seg_end - tau;
        if h <= 0.0 {
            h = initial_step(&rhs, tau, &y, k1, seg_len, rtol, atol)?;
        }
        let _ = rest;

        while tau < seg_end {
            if nsteps >= opts.max_steps {
                return Err(Error::IntegrationFailure {
                    t: time_of(tau),
                    reason: format!("more than {} steps", opts.max_steps),
                });
            }
            let remaining = seg_end - tau;
            if tau + 1.01 * h >= seg_end {
                h = remaining;
            }
            if h <= 10.0 * f64::EPSILON * tau.abs().max(span) {
                return Err(Error::IntegrationFailure {
                    t: time_of(tau),
                    reason: "step size underflow".into(),
                });
            }

            let [k1, k2, k3, k4, k5, k6, k7] = &mut k;
            axpy_into(&mut ystage, &y, h, &[(A21, k1)]);
            rhs(tau + C2 * h, &ystage, k2)?;
            axpy_into(&mut ystage, &y, h, &[(A31, k1), (A32, k2)]);
            rhs(tau + C3 * h, &ystage, k3)?;
            axpy_into(&mut ystage, &y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
            rhs(tau + C4 * h, &ystage, k4)?;
            axpy_into(&mut ystage, &y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            rhs(tau + C5 * h, &ystage, k5)?;
            axpy_into(
                &mut ystage,
                &y,
                h,
                &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
            );
            let t_next = if tau + h >= seg_end { seg_end } else { tau + h };
            rhs(t_next, &ystage, k6)?;
            axpy_into(
                &mut y1,
                &y,
                h,
                &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
            );
            rhs(t_next, &y1, k7)?;
            for i in 0..n {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
            }
            let e = norm_scaled(&err, &y, &y1, rtol, atol);
            nsteps += 1;

            if !e.is_finite() {
                if let Some(bound) = opts.blowup_bound {
                    let big = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
                    if big > bound.sqrt() {
                        return Err(Error::BlowUp { t: time_of(tau) });
                    }
                }
                h *= 0.1;
                continue;
            }

            let fac11 = e.powf(EXPO1);
            if e <= 1.0 {
                let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                facold = e.max(1e-4);

                let coef = if opts.quintic_dense {
                    let (ym, fm) = half_step(&rhs, tau, &y, k1, 0.5 * h)?;
                    Interp::Quintic(quintic_coefficients(&y, &ym, &y1, h, [&*k1, &fm, &*k7]))
                } else {
                    Interp::Dopri(dense_coefficients(&y, &y1, h, [&*k1, &*k3, &*k4, &*k5, &*k6, &*k7]))
                };
                sol.steps.push(DenseStep { tau0: tau, h, coef });

                tau = t_next;
                std::mem::swap(&mut y, &mut y1);
                if let Some(p) = project {
                    p(&mut y);
                    rhs(tau, &y, k1)?;
                } else {
                    k1.copy_from_slice(k7);
                }
                if let Some(bound) = opts.blowup_bound {
                    let big = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
                    if !(big <= bound) {
                        return Err(Error::BlowUp { t: time_of(tau) });
                    }
                } else if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(Error::IntegrationFailure {
                        t: time_of(tau),
                        reason: "non-finite state".into(),
                    });
                }
                h /= fac;
            } else {
                h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            }
        }
    }
    sol.y1 = y;
    Ok(sol)
}

fn dense_coefficients(y0: &[C64], y1: &[C64], h: f64, k: [&[C64]; 6]) -> [Vec<C64>; 5] {
    let [k1, k3, k4, k5, k6, k7] = k;
    let n = y0.len();
    let mut c: [Vec<C64>; 5] = std::array::from_fn(|_| Vec::with_capacity(n));
    for i in 0..n {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k1[i] - ydiff;
        c[0].push(y0[i]);
        c[1].push(ydiff);
        c[2].push(bspl);
        c[3].push(ydiff - h * k7[i] - bspl);
        c[4].push(
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]),
        );
    }
    c
}

/// One Dormand–Prince step of size `h` from `(tau, y)` with `f0 = f(tau, y)`;
/// returns the fifth order solution and the slope there.
fn half_step<R>(rhs: &R, tau: f64, y: &[C64], f0: &[C64], h: f64) -> Result<(Vec<C64>, Vec<C64>)>
where
    R: Fn(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len();
    let mut k: [Vec<C64>; 5] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]);
    let mut ys = vec![Complex64::new(0.0, 0.0); n];
    let [k2, k3, k4, k5, k6] = &mut k;
    axpy_into(&mut ys, y, h, &[(A21, f0)]);
    rhs(tau + C2 * h, &ys, k2)?;
    axpy_into(&mut ys, y, h, &[(A31, f0), (A32, k2)]);
    rhs(tau + C3 * h, &ys, k3)?;
    axpy_into(&mut ys, y, h, &[(A41, f0), (A42, k2), (A43, k3)]);
    rhs(tau + C4 * h, &ys, k4)?;
    axpy_into(&mut ys, y, h, &[(A51, f0), (A52, k2), (A53, k3), (A54, k4)]);
    rhs(tau + C5 * h, &ys, k5)?;
    axpy_into(&mut ys, y, h, &[(A61, f0), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
    rhs(tau + h, &ys, k6)?;
    axpy_into(&mut ys, y, h, &[(A71, f0), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
    let mut fm = vec![Complex64::new(0.0, 0.0); n];
    rhs(tau + h, &ys, &mut fm)?;
    Ok((ys, fm))
}

/// Hermite quintic in `theta` matching values and slopes at 0, 1/2, 1.
fn quintic_coefficients(y0: &[C64], ym: &[C64], y1: &[C64], h: f64, f: [&[C64]; 3]) -> [Vec<C64>; 6] {
    let [f0, fm, f1] = f;
    let n = y0.len();
    let mut a: [Vec<C64>; 6] = std::array::from_fn(|_| Vec::with_capacity(n));
    for i in 0..n {
        let d0 = h * f0[i];
        let r1 = ym[i] - y0[i] - 0.5 * d0;
        let r2 = h * fm[i] - d0;
        let r3 = y1[i] - y0[i] - d0;
        let r4 = h * f1[i] - d0;
        a[0].push(y0[i]);
        a[1].push(d0);
        a[2].push(16.0 * r1 - 8.0 * r2 + 7.0 * r3 - r4);
        a[3].push(-32.0 * r1 + 32.0 * r2 - 34.0 * r3 + 5.0 * r4);
        a[4].push(16.0 * r1 - 40.0 * r2 + 52.0 * r3 - 8.0 * r4);
        a[5].push(16.0 * r2 - 24.0 * r3 + 4.0 * r4);
    }
    a
}

fn initial_step<R>(
    rhs: &R,
    tau: f64,
    y: &[C64],
    f0: &[C64],
    max_h: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64>
where
    R: Fn(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len() as f64;
    let sk = |v: &C64| atol + rtol * v.norm();
    let dnf = (f0.iter().zip(y).map(|(f, v)| (f.norm() / sk(v)).powi(2)).sum::<f64>() / n).sqrt();
    let dny = (y.iter().map(|v| (v.norm() / sk(v)).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(max_h);
    let y1: Vec<C64> = y.iter().zip(f0).map(|(v, f)| v + h * f).collect();
    let mut f1 = vec![Complex64::new(0.0, 0.0); y.len()];
    rhs(tau + h, &y1, &mut f1)?;
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(y)
        .map(|((a, b), v)| ((a - b).norm() / sk(v)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(max_h))
}
