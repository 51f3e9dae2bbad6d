//! Linear time-varying systems `ẋ = Ax + Bu, y = Cx + Du`.

mod matfun;
pub mod ode;

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;

pub use matfun::{Jet, JetFn, MatrixFunction};

use crate::error::{Error, Result};
use crate::expr::sort_dedup;
use crate::hermlin::HermMatrix;
use crate::{CMat, CVec, C64};
use ode::{DenseSolution, OdeOptions};

/// Interval of definition `(lo, hi)`; infinite ends are allowed.
///
/// Membership is tested on the closure so analyses can sample the ends of
/// a finite domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Self {
        Domain { lo, hi }
    }

    pub fn full() -> Self {
        Domain::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn intersect(&self, other: &Domain) -> Domain {
        Domain::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn require(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// `nodes` equally spaced points on `[a, b]`, endpoints exact.
pub fn uniform_grid(a: f64, b: f64, nodes: usize) -> Vec<f64> {
    assert!(nodes >= 2, "a grid needs at least two nodes");
    let h = (b - a) / (nodes - 1) as f64;
    (0..nodes)
        .map(|k| if k == nodes - 1 { b } else { a + k as f64 * h })
        .collect()
}

/// Splits a relative accuracy target into the local tolerances handed to
/// the integrator. Global error of an adaptive method is typically a small
/// multiple of the local tolerance, hence the margin.
pub fn integrator_options(rtol: f64) -> OdeOptions {
    OdeOptions::new(rtol * 0.1, rtol * 1e-3)
}

/// Coefficients of a system evaluated at one time.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
}

#[derive(Debug, Clone)]
pub struct LtvSystem {
    n: usize,
    m: usize,
    a: MatrixFunction,
    b: MatrixFunction,
    c: MatrixFunction,
    d: MatrixFunction,
    domain: Domain,
}

impl LtvSystem {
    pub fn new(
        a: MatrixFunction,
        b: MatrixFunction,
        c: MatrixFunction,
        d: MatrixFunction,
        domain: Domain,
    ) -> Result<Self> {
        let n = a.rows();
        let m = b.cols();
        let expect = [(&a, (n, n), "A"), (&b, (n, m), "B"), (&c, (m, n), "C"), (&d, (m, m), "D")];
        for (f, shape, name) in expect {
            if f.shape() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {:?}, expected {shape:?}",
                    f.shape()
                )));
            }
        }
        if !(domain.lo < domain.hi) {
            return Err(Error::InvalidArgument(format!(
                "empty domain ({}, {})",
                domain.lo, domain.hi
            )));
        }
        let domain = [&a, &b, &c, &d]
            .iter()
            .fold(domain, |acc, f| acc.intersect(&f.domain()));
        Ok(LtvSystem {
            n,
            m,
            a: a.with_domain(domain),
            b: b.with_domain(domain),
            c: c.with_domain(domain),
            d: d.with_domain(domain),
            domain,
        })
    }

    /// Parses a system from rows of expression strings.
    pub fn parse(
        a: &[&[&str]],
        b: &[&[&str]],
        c: &[&[&str]],
        d: &[&[&str]],
        domain: Domain,
    ) -> Result<Self> {
        Self::new(
            MatrixFunction::parse_rows(a)?,
            MatrixFunction::parse_rows(b)?,
            MatrixFunction::parse_rows(c)?,
            MatrixFunction::parse_rows(d)?,
            domain,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &MatrixFunction {
        &self.a
    }

    pub fn b(&self) -> &MatrixFunction {
        &self.b
    }

    pub fn c(&self) -> &MatrixFunction {
        &self.c
    }

    pub fn d(&self) -> &MatrixFunction {
        &self.d
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn coefficients(&self, t: f64) -> Result<Coefficients> {
        Ok(Coefficients {
            a: self.a.eval(t)?,
            b: self.b.eval(t)?,
            c: self.c.eval(t)?,
            d: self.d.eval(t)?,
        })
    }

    /// Union of the coefficient breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .flat_map(|f| f.breakpoints().iter().copied())
            .collect();
        sort_dedup(&mut v);
        v
    }

    fn check_interval(&self, a: f64, b: f64) -> Result<()> {
        self.domain.require(a)?;
        self.domain.require(b)
    }
}

fn to_cols(v: &[C64], rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v)
}

/// Fundamental solution `Φ(t, t0)` on an interval, available at every
/// intermediate time through the dense output.
#[derive(Debug, Clone)]
pub struct TransitionFlow {
    n: usize,
    sol: DenseSolution,
}

impl TransitionFlow {
    pub fn new(sys: &LtvSystem, t0: f64, t1: f64, rtol: f64) -> Result<Self> {
        sys.check_interval(t0, t1)?;
        let n = sys.n;
        let opts = integrator_options(rtol).with_breakpoints(sys.a.breakpoints().to_vec());
        let y0: Vec<C64> = CMat::identity(n, n).as_slice().to_vec();
        let a = &sys.a;
        let sol = ode::solve(
            |t, y, dy| {
                let at = a.eval(t)?;
                let phi = CMat::from_column_slice(n, n, y);
                dy.copy_from_slice((at * phi).as_slice());
                Ok(())
            },
            t0,
            t1,
            y0,
            &opts,
            None,
        )?;
        Ok(TransitionFlow { n, sol })
    }

    /// `Φ(t, t0)`.
    pub fn eval(&self, t: f64) -> Result<CMat> {
        Ok(to_cols(&self.sol.eval(t)?, self.n, self.n))
    }

    pub fn final_value(&self) -> CMat {
        to_cols(self.sol.final_state(), self.n, self.n)
    }
}

/// `Φ(t, s)`: solves `∂Φ/∂t = A(t)Φ`, `Φ(s, s) = I` from `s` to `t`.
pub fn state_transition(sys: &LtvSystem, t: f64, s: f64, rtol: f64) -> Result<CMat> {
    if t == s {
        sys.check_interval(t, s)?;
        return Ok(CMat::identity(sys.n, sys.n));
    }
    Ok(TransitionFlow::new(sys, s, t, rtol)?.final_value())
}

/// Sampled state, input and output of one solution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    pub x: Vec<CVec>,
    pub u: Vec<CVec>,
    pub y: Vec<CVec>,
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let h = grid[k + 1] - grid[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

impl Trajectory {
    /// Instantaneous supply `Re(yᴴu)` at every node.
    pub fn supply_rate(&self) -> Vec<f64> {
        self.y
            .iter()
            .zip(&self.u)
            .map(|(y, u)| y.dotc(u).re)
            .collect()
    }

    /// Cumulative trapezoid integral of the supply rate from the first node.
    pub fn cumulative_supply(&self) -> Vec<f64> {
        let rate = self.supply_rate();
        let mut acc = vec![0.0; rate.len()];
        for k in 1..rate.len() {
            acc[k] = acc[k - 1] + 0.5 * (self.grid[k] - self.grid[k - 1]) * (rate[k] + rate[k - 1]);
        }
        acc
    }

    /// Index of a node equal to `t` up to rounding.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * (1.0 + t.abs());
        let k = self.grid.partition_point(|&g| g < t - tol);
        if k < self.grid.len() && (self.grid[k] - t).abs() <= tol {
            Ok(k)
        } else {
            Err(Error::NodesNotOnGrid { t })
        }
    }

    /// CSV with columns `t`, then real and imaginary parts of each
    /// component of x, u and y.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for (name, v) in [("x", &self.x), ("u", &self.u), ("y", &self.y)] {
            for i in 1..=v.first().map_or(0, |c| c.len()) {
                let _ = write!(s, ",{name}{i}_re,{name}{i}_im");
            }
        }
        s.push('\n');
        for k in 0..self.grid.len() {
            let _ = write!(s, "{:e}", self.grid[k]);
            for v in [&self.x[k], &self.u[k], &self.y[k]] {
                for z in v.iter() {
                    let _ = write!(s, ",{:e},{:e}", z.re, z.im);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Simulates from `x(grid[0]) = x0` and samples at `grid`.
pub fn simulate(
    sys: &LtvSystem,
    t0: f64,
    x0: &CVec,
    u: &MatrixFunction,
    grid: &[f64],
    rtol: f64,
) -> Result<Trajectory> {
    let (n, m) = (sys.n, sys.m);
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, system has {n} states",
            x0.len()
        )));
    }
    if u.shape() != (m, 1) {
        return Err(Error::DimensionMismatch(format!(
            "input is {:?}, expected ({m}, 1)",
            u.shape()
        )));
    }
    if grid.is_empty() || grid[0] != t0 {
        return Err(Error::InvalidArgument("grid must start at t0".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    let t_end = *grid.last().expect("non-empty");
    sys.check_interval(t0, t_end)?;

    let mut bps = sys.breakpoints();
    bps.extend_from_slice(u.breakpoints());
    let opts = integrator_options(rtol).with_breakpoints(bps);
    let sol = ode::solve(
        |t, x, dx| {
            let xv = DVector::from_column_slice(x);
            let r = sys.a.eval(t)? * xv + sys.b.eval(t)? * u.eval(t)?;
            dx.copy_from_slice(r.as_slice());
            Ok(())
        },
        t0,
        t_end,
        x0.as_slice().to_vec(),
        &opts,
        None,
    )?;

    let mut xs = Vec::with_capacity(grid.len());
    let mut us = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for (k, &t) in grid.iter().enumerate() {
        let x = if k == 0 {
            x0.clone()
        } else if k == grid.len() - 1 {
            CVec::from_column_slice(sol.final_state())
        } else {
            CVec::from_vec(sol.eval(t)?)
        };
        let ut = u.eval(t)?.column(0).into_owned();
        let y = sys.c.eval(t)? * &x + sys.d.eval(t)? * &ut;
        xs.push(x);
        us.push(ut);
        ys.push(y);
    }
    Ok(Trajectory {
        grid: grid.to_vec(),
        weights: trapezoid_weights(grid),
        x: xs,
        u: us,
        y: ys,
    })
}

/// `∫ Re(yᴴu) dt` over `[t_a, t_b]` by the trapezoid rule on the nodes.
pub fn supply(traj: &Trajectory, t_a: f64, t_b: f64) -> Result<f64> {
    let ia = traj.node_index(t_a)?;
    let ib = traj.node_index(t_b)?;
    let (lo, hi, sign) = if ia <= ib { (ia, ib, 1.0) } else { (ib, ia, -1.0) };
    let rate = traj.supply_rate();
    let s: f64 = (lo..hi)
        .map(|k| 0.5 * (traj.grid[k + 1] - traj.grid[k]) * (rate[k] + rate[k + 1]))
        .sum();
    Ok(sign * s)
}

/// Supply `∫ Re(yᴴu) dt` from `x(t_a) = x0`, integrated alongside the
/// state so its accuracy is that of the integrator rather than of a grid.
pub fn supply_exact(
    sys: &LtvSystem,
    x0: &CVec,
    u: &MatrixFunction,
    t_a: f64,
    t_b: f64,
    rtol: f64,
) -> Result<f64> {
    let n = sys.n;
    if x0.len() != n || u.shape() != (sys.m, 1) {
        return Err(Error::DimensionMismatch("state or input size".into()));
    }
    sys.check_interval(t_a, t_b)?;
    let mut bps = sys.breakpoints();
    bps.extend_from_slice(u.breakpoints());
    let opts = integrator_options(rtol).with_breakpoints(bps);
    let mut y0 = x0.as_slice().to_vec();
    y0.push(Complex64::new(0.0, 0.0));
    let sol = ode::solve(
        |t, z, dz| {
            let x = DVector::from_column_slice(&z[..n]);
            let ut = u.eval(t)?;
            let ut = ut.column(0);
            let dx = sys.a.eval(t)? * &x + sys.b.eval(t)? * ut;
            let y = sys.c.eval(t)? * &x + sys.d.eval(t)? * ut;
            dz[..n].copy_from_slice(dx.as_slice());
            dz[n] = Complex64::new(y.dotc(&ut).re, 0.0);
            Ok(())
        },
        t_a,
        t_b,
        y0,
        &opts,
        None,
    )?;
    Ok(sol.final_state()[n].re)
}

/// Reachability Gramian `∫ Φ(t_b, s)B(s)B(s)ᴴΦ(t_b, s)ᴴ ds` over
/// `[t_a, t_b]`, obtained from the differential Lyapunov equation
/// `Ẇ = AW + WAᴴ + BBᴴ`, `W(t_a) = 0`.
pub fn reachability_gramian(sys: &LtvSystem, t_a: f64, t_b: f64, rtol: f64) -> Result<HermMatrix> {
    if !(t_a < t_b) {
        return Err(Error::InvalidArgument("need t_a < t_b".into()));
    }
    sys.check_interval(t_a, t_b)?;
    let n = sys.n;
    let opts = integrator_options(rtol).with_breakpoints(sys.breakpoints());
    let sol = ode::solve(
        |t, w, dw| {
            let a = sys.a.eval(t)?;
            let b = sys.b.eval(t)?;
            let w = CMat::from_column_slice(n, n, w);
            let aw = &a * &w;
            let r = &aw + aw.adjoint() + &b * b.adjoint();
            dw.copy_from_slice(r.as_slice());
            Ok(())
        },
        t_a,
        t_b,
        vec![Complex64::new(0.0, 0.0); n * n],
        &opts,
        None,
    )?;
    Ok(HermMatrix::symmetrize(to_cols(sol.final_state(), n, n))?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: &str, b: &str, c: &str, d: &str) -> LtvSystem {
        LtvSystem::parse(&[&[a]], &[&[b]], &[&[c]], &[&[d]], Domain::new(-10.0, 10.0)).unwrap()
    }

    fn re(x: f64) -> C64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_generator_gives_identity() {
        let sys = LtvSystem::parse(
            &[&["0", "0"], &["0", "0"]],
            &[&["1"], &["0"]],
            &[&["1", "0"]],
            &[&["0"]],
            Domain::full(),
        )
        .unwrap();
        let phi = state_transition(&sys, 3.0, -1.0, 1e-8).unwrap();
        assert!((phi - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn nilpotent_generator() {
        let sys = LtvSystem::parse(
            &[&["0", "1"], &["0", "0"]],
            &[&["0"], &["1"]],
            &[&["1", "0"]],
            &[&["0"]],
            Domain::full(),
        )
        .unwrap();
        for (t, s) in [(2.0, 0.5), (-1.0, 1.5)] {
            let phi = state_transition(&sys, t, s, 1e-8).unwrap();
            let exact = CMat::from_row_slice(2, 2, &[re(1.0), re(t - s), re(0.0), re(1.0)]);
            assert!((phi - exact).norm() < 1e-9);
        }
    }

    #[test]
    fn scalar_transition_is_exponential_of_integral() {
        let sys = scalar("cos(t) - 0.5*t", "1", "1", "0");
        let (t, s): (f64, f64) = (2.5, -0.7);
        // ∫ cos r - r/2 dr
        let integral = (t.sin() - s.sin()) - 0.25 * (t * t - s * s);
        let phi = state_transition(&sys, t, s, 1e-8).unwrap()[(0, 0)].re;
        assert!((phi - integral.exp()).abs() <= 1e-8 * integral.exp());
    }

    #[test]
    fn simulate_integrator_and_decay() {
        let sys = scalar("0", "1", "1", "0");
        let u = MatrixFunction::parse_rows(&[&["1"]]).unwrap();
        let grid = uniform_grid(0.0, 1.0, 11);
        let tr = simulate(&sys, 0.0, &CVec::from_element(1, re(0.0)), &u, &grid, 1e-8).unwrap();
        for (t, x) in grid.iter().zip(&tr.x) {
            assert!((x[0].re - t).abs() < 1e-12);
        }

        let sys = scalar("-1", "1", "1", "0");
        let zero = MatrixFunction::zeros(1, 1);
        let tr = simulate(&sys, 0.0, &CVec::from_element(1, re(1.0)), &zero, &grid, 1e-8).unwrap();
        for (t, x) in grid.iter().zip(&tr.x) {
            assert!((x[0].re - (-t).exp()).abs() < 1e-8);
        }
        for k in 0..grid.len() {
            assert_eq!(tr.y[k], &tr.x[k] * re(1.0));
        }
    }

    #[test]
    fn supply_examples() {
        let sys = scalar("0", "0", "0", "1");
        let one = MatrixFunction::parse_rows(&[&["1"]]).unwrap();
        let grid = uniform_grid(0.0, 1.0, 5);
        let x0 = CVec::from_element(1, re(0.0));
        let tr = simulate(&sys, 0.0, &x0, &one, &grid, 1e-8).unwrap();
        assert!((supply(&tr, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(supply(&tr, 0.0, 0.3), Err(Error::NodesNotOnGrid { .. })));

        let tr = simulate(&sys, 0.0, &x0, &MatrixFunction::zeros(1, 1), &grid, 1e-8).unwrap();
        assert_eq!(supply(&tr, 0.0, 1.0).unwrap(), 0.0);

        let sys = scalar("-1", "1", "1", "0");
        let exact = (-1.0f64).exp();
        let s = supply_exact(&sys, &x0, &one, 0.0, 1.0, 1e-10).unwrap();
        assert!((s - exact).abs() < 1e-9);
        let grid = uniform_grid(0.0, 1.0, 1001);
        let tr = simulate(&sys, 0.0, &x0, &one, &grid, 1e-10).unwrap();
        assert!((supply(&tr, 0.0, 1.0).unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn gramian_examples() {
        let w = reachability_gramian(&scalar("0", "0", "1", "0"), 0.0, 1.0, 1e-8).unwrap();
        assert_eq!(w.matrix()[(0, 0)], re(0.0));
        let w = reachability_gramian(&scalar("0", "1", "1", "0"), 0.0, 1.0, 1e-8).unwrap();
        assert!((w.matrix()[(0, 0)].re - 1.0).abs() < 1e-9);
        let w = reachability_gramian(&scalar("-1", "1", "1", "0"), 0.0, 1.0, 1e-8).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((w.matrix()[(0, 0)].re - exact).abs() < 1e-8);
    }

    #[test]
    fn trajectory_csv_header() {
        let sys = scalar("-1", "1", "1", "0");
        let tr = simulate(
            &sys,
            0.0,
            &CVec::from_element(1, re(1.0)),
            &MatrixFunction::zeros(1, 1),
            &[0.0, 1.0],
            1e-8,
        )
        .unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,x1_re,x1_im,u1_re,u1_im,y1_re,y1_im\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
