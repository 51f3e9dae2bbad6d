//! Composite Gauss–Legendre quadrature for matrix-valued integrands.

use crate::error::Result;
use crate::expr::sort_dedup;
use crate::CMat;

// 5-point rule on [-1, 1]
const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Integrates `f` over `[a, b]` with `panels` equal panels, additionally
/// split at every breakpoint inside the interval. Gauss nodes are interior,
/// so integrands are never sampled exactly at a jump.
pub fn integrate<F>(f: F, a: f64, b: f64, panels: usize, breakpoints: &[f64]) -> Result<CMat>
where
    F: Fn(f64) -> Result<CMat>,
{
    let mut cuts: Vec<f64> = (0..=panels.max(1))
        .map(|k| a + (b - a) * k as f64 / panels.max(1) as f64)
        .collect();
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
    if a > b {
        cuts.iter_mut().for_each(|c| *c = -*c);
        sort_dedup(&mut cuts);
        cuts.iter_mut().for_each(|c| *c = -*c);
    } else {
        sort_dedup(&mut cuts);
    }
    let mut acc: Option<CMat> = None;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let half = 0.5 * (q - p);
        let mid = 0.5 * (q + p);
        for (x, wt) in NODES.iter().zip(WEIGHTS) {
            let v = f(mid + half * x)? * num_complex::Complex64::new(wt * half, 0.0);
            acc = Some(match acc {
                Some(s) => s + v,
                None => v,
            });
        }
    }
    match acc {
        Some(s) => Ok(s),
        // empty interval: zero of the integrand's shape
        None => Ok(f(a)?.map(|_| num_complex::Complex64::new(0.0, 0.0))),
    }
}
