//! Random systems shared by the integration tests. Everything is built
//! from symbolic expressions so derivatives are exact.
#![allow(dead_code)]

use ltvdiss::ltv::{Domain, MatrixFunction};
use ltvdiss::ph::PhRepresentation;
use ltvdiss::{CMat, CVec, LtvSystem, TimeExpr, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn parse(s: &str) -> TimeExpr {
    TimeExpr::parse(s).unwrap_or_else(|e| panic!("generated `{s}`: {e}"))
}

fn sym(rng: &mut TestRng, scale: f64) -> f64 {
    rng.gen_range(-scale..scale)
}

/// A smooth real scalar of size about `scale`.
pub fn smooth(rng: &mut TestRng, scale: f64) -> TimeExpr {
    let (a, b) = (sym(rng, scale), sym(rng, scale));
    let w = rng.gen_range(0.5..2.5);
    let p = rng.gen_range(0.0..3.0);
    match rng.gen_range(0..4) {
        0 => TimeExpr::real(a),
        1 => parse(&format!("{a} + {b}*sin({w}*t + {p})")),
        2 => parse(&format!("{a} + {b}*t")),
        _ => parse(&format!("{a}*exp(-{w}*t)*cos({p}*t) + {b}")),
    }
}

/// As [`smooth`], times a random unit complex constant when `complex`.
pub fn entry(rng: &mut TestRng, scale: f64, complex: bool) -> TimeExpr {
    let e = smooth(rng, scale);
    if complex && rng.gen_bool(0.5) {
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        &e * &TimeExpr::constant(C64::from_polar(1.0, phase))
    } else {
        e
    }
}

pub fn matrix(rng: &mut TestRng, rows: usize, cols: usize, scale: f64, complex: bool) -> MatrixFunction {
    let entries = (0..rows * cols).map(|_| entry(rng, scale, complex)).collect();
    MatrixFunction::from_exprs(rows, cols, entries).unwrap()
}

pub fn constant_matrix(rng: &mut TestRng, rows: usize, cols: usize, complex: bool) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(sym(rng, 1.0), if complex { sym(rng, 1.0) } else { 0.0 })
    })
}

pub fn vector(rng: &mut TestRng, n: usize, complex: bool) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(sym(rng, 1.0), if complex { sym(rng, 1.0) } else { 0.0 }))
}

/// A smooth input column.
pub fn input(rng: &mut TestRng, m: usize) -> MatrixFunction {
    matrix(rng, m, 1, 1.0, false)
}

fn skew(x: &MatrixFunction) -> MatrixFunction {
    x.sub(&x.adjoint()).unwrap()
}

/// Lower triangular with diagonal bounded below by 0.5.
fn lower_factor(rng: &mut TestRng, r: usize, complex: bool) -> Vec<Vec<TimeExpr>> {
    (0..r)
        .map(|i| {
            (0..r)
                .map(|j| {
                    if i == j {
                        let a = rng.gen_range(0.0..0.4);
                        let d = 0.5 + a + rng.gen_range(0.0..1.0);
                        let w = rng.gen_range(0.5..2.0);
                        parse(&format!("{d} + {a}*sin({w}*t)"))
                    } else if j < i {
                        entry(rng, 0.5, complex)
                    } else {
                        TimeExpr::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Inverse of a lower triangular matrix by forward substitution, kept
/// symbolic.
fn lower_inverse(l: &[Vec<TimeExpr>]) -> Vec<Vec<TimeExpr>> {
    let r = l.len();
    let mut x = vec![vec![TimeExpr::zero(); r]; r];
    for j in 0..r {
        x[j][j] = l[j][j].clone().recip();
        for i in j + 1..r {
            let mut acc = TimeExpr::zero();
            for k in j..i {
                acc = acc + &l[i][k] * &x[k][j];
            }
            x[i][j] = -(&acc * &l[i][i].clone().recip());
        }
    }
    x
}

/// Shape of a random port-Hamiltonian system.
#[derive(Debug, Clone, Copy)]
pub struct PhShape {
    pub n: usize,
    pub m: usize,
    /// Rank of `Q`.
    pub r: usize,
    pub complex: bool,
}

impl PhShape {
    pub fn random(rng: &mut TestRng) -> Self {
        let n = rng.gen_range(1..=3);
        PhShape {
            n,
            m: rng.gen_range(1..=3),
            r: rng.gen_range(1..=n),
            complex: rng.gen_bool(0.3),
        }
    }
}

pub const PH_DOMAIN: (f64, f64) = (0.0, 2.0);

/// Random valid representation: `J`, `N` skew, `W = MᴴM + εI`,
/// `Q = diag(LᴴL, 0)` and `K = [[½Q₁₁⁻¹Q̇₁₁, 0], [K₂₁, K₂₂]]`.
pub fn random_ph(rng: &mut TestRng, shape: PhShape) -> PhRepresentation {
    let PhShape { n, m, r, complex } = shape;
    let j = skew(&matrix(rng, n, n, 1.0, complex));
    let nn = skew(&matrix(rng, m, m, 0.5, complex));
    let mm = matrix(rng, n + m, n + m, 0.7, complex);
    let w = mm.adjoint().mul(&mm).unwrap().add(&MatrixFunction::identity(n + m).scale(C64::new(0.1, 0.0))).unwrap();
    let rr = w.submatrix(0, 0, n, n).unwrap();
    let p = w.submatrix(0, n, n, m).unwrap();
    let s = w.submatrix(n, n, m, m).unwrap();
    let g = matrix(rng, n, m, 1.0, complex);

    let l = lower_factor(rng, r, complex);
    let linv = MatrixFunction::from_rows(lower_inverse(&l)).unwrap();
    let l = MatrixFunction::from_rows(l).unwrap();
    let q11 = l.adjoint().mul(&l).unwrap();
    let q11_inv = linv.mul(&linv.adjoint()).unwrap();
    let k11 = q11_inv.mul(&q11.derivative()).unwrap().scale(C64::new(0.5, 0.0));
    let z = |a, b| MatrixFunction::zeros(a, b);
    let (q, k) = if r == n {
        (q11, k11)
    } else {
        let k21 = matrix(rng, n - r, r, 1.0, complex);
        let k22 = matrix(rng, n - r, n - r, 1.0, complex);
        let q = MatrixFunction::block(&[vec![&q11, &z(r, n - r)], vec![&z(n - r, r), &z(n - r, n - r)]]).unwrap();
        let k = MatrixFunction::block(&[vec![&k11, &z(r, n - r)], vec![&k21, &k22]]).unwrap();
        (q, k)
    };
    let domain = Domain::new(PH_DOMAIN.0, PH_DOMAIN.1);
    PhRepresentation::new(q, k, j, rr, g, p, s, nn, domain).unwrap()
}

/// Random system with smooth coefficients; with `piecewise`, `A` switches
/// at `t = 0.5`.
pub fn random_system(rng: &mut TestRng, n: usize, m: usize, piecewise: bool) -> LtvSystem {
    let mut a = matrix(rng, n, n, 1.0, false);
    if piecewise {
        let other = matrix(rng, n, n, 1.0, false);
        let entries = a
            .entries()
            .unwrap()
            .iter()
            .zip(other.entries().unwrap())
            .map(|(x, y)| parse(&format!("piecewise{{t < 0.5: {x}; else: {y}}}")))
            .collect();
        a = MatrixFunction::from_exprs(n, n, entries).unwrap();
    }
    let b = matrix(rng, n, m, 1.0, false);
    let c = matrix(rng, m, n, 1.0, false);
    let d = matrix(rng, m, m, 1.0, false);
    LtvSystem::new(a, b, c, d, Domain::new(-1.0, 3.0)).unwrap()
}

pub fn grid(a: f64, b: f64, nodes: usize) -> Vec<f64> {
    ltvdiss::ltv::uniform_grid(a, b, nodes)
}

pub fn norm2(m: &CMat) -> f64 {
    ltvdiss::hermlin::norm2(m)
}
