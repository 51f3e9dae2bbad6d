//! A differentiable unitary frame `U(t)` splitting `Q(t)` into its range
//! and kernel, for storage matrices of constant rank.
//!
//! Between anchors the frame is the projection of a fixed unitary `R` onto
//! the current range and kernel, orthonormalized symmetrically:
//! `U₁ = PR₁(R₁ᴴPR₁)^{-1/2}`, `U₂ = (I−P)R₂(R₂ᴴ(I−P)R₂)^{-1/2}`, where `P`
//! projects onto the top `r` eigenvectors of `Q`. This is smooth wherever
//! `P` is, needs no eigenvector matching, and `UᴴQU = diag(Q₁₁, 0)`.
//! When the range drifts far from `R₁` the frame re-anchors at a grid node.

use std::sync::Arc;

use crate::dissipativity::StorageCandidate;
use crate::error::{Error, Result};
use crate::hermlin::{herm_eig, HermMatrix};
use crate::ltv::{Jet, MatrixFunction};
use crate::{CMat, C64};

/// Re-anchor once `σ_min(E₁ᴴR₁)` drops below this.
const REANCHOR: f64 = 0.5;

/// Eigen-decomposition with eigenvalues in descending order. Ties keep
/// the solver's order, so `Q = I` yields the identity.
pub(crate) fn eig_desc(q: &CMat) -> Result<(Vec<f64>, CMat)> {
    let e = herm_eig(&HermMatrix::symmetrize(q.clone())?.0)?;
    let n = e.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.values[b].total_cmp(&e.values[a]));
    let vals = order.iter().map(|&k| e.values[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &e.vectors.column(src));
    }
    Ok((vals, vecs))
}

/// Rotates each column so that its largest-magnitude entry is real positive.
pub(crate) fn fix_phases(u: &mut CMat) {
    for mut col in u.column_iter_mut() {
        let Some(big) = col.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
            continue;
        };
        if big.norm() > 0.0 {
            let rot = big.conj() / big.norm();
            col.iter_mut().for_each(|z| *z *= rot);
        }
    }
}

pub(crate) fn rank_at(vals: &[f64], rank_tol: f64) -> usize {
    vals.iter().filter(|&&v| v >= rank_tol).count()
}

/// `S^{-1/2}` for Hermitian positive definite `S`, with its derivative in
/// direction `Ṡ` when given.
fn inv_sqrt(s: &CMat, sdot: Option<&CMat>) -> Result<(CMat, Option<CMat>, f64)> {
    let (mu, v) = eig_desc(s)?;
    let min = mu.last().copied().unwrap_or(1.0);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: mu.len().saturating_sub(1) });
    }
    let sq: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let k = sq.len();
    let mut d = CMat::zeros(k, k);
    for i in 0..k {
        d[(i, i)] = C64::new(1.0 / sq[i], 0.0);
    }
    let value = &v * d * v.adjoint();
    let deriv = sdot.map(|sd| {
        let mut x = v.adjoint() * sd * &v;
        for i in 0..k {
            for j in 0..k {
                x[(i, j)] *= -1.0 / (sq[i] * sq[j] * (sq[i] + sq[j]));
            }
        }
        &v * x * v.adjoint()
    });
    Ok((value, deriv, min.sqrt()))
}

struct Frame {
    q: StorageCandidate,
    n: usize,
    r: usize,
    /// `(start, R)`, starts increasing.
    anchors: Vec<(f64, CMat)>,
}

struct FrameValue {
    u: CMat,
    udot: Option<CMat>,
    /// `σ_min(E₁ᴴR₁)`: how well the anchor still covers the range.
    cover: f64,
}

impl Frame {
    fn anchor_for(&self, t: f64) -> &CMat {
        let k = self.anchors.partition_point(|(s, _)| *s <= t);
        &self.anchors[k.saturating_sub(1)].1
    }

    fn project(&self, anchor: &CMat, t: f64, need: bool) -> Result<FrameValue> {
        let (n, r) = (self.n, self.r);
        if r == 0 || r == n {
            return Ok(FrameValue {
                u: anchor.clone(),
                udot: need.then(|| CMat::zeros(n, n)),
                cover: 1.0,
            });
        }
        let q = self.q.q().eval(t)?;
        let (lam, e) = eig_desc(&q)?;
        let e1 = e.columns(0, r);
        let p = &e1 * e1.adjoint();
        let pdot = if need {
            // first-order perturbation of the spectral projector; only
            // range/kernel couplings contribute
            let m = e.adjoint() * self.q.qdot().eval(t)? * &e;
            let mut x = CMat::zeros(n, n);
            for a in 0..r {
                for b in r..n {
                    let gap = lam[a] - lam[b];
                    x[(a, b)] = m[(a, b)] / gap;
                    x[(b, a)] = m[(b, a)] / gap;
                }
            }
            Some(&e * x * e.adjoint())
        } else {
            None
        };
        let r1 = anchor.columns(0, r).into_owned();
        let r2 = anchor.columns(r, n - r).into_owned();
        let m1 = &p * &r1;
        let m2 = &r2 - &p * &r2;
        let s1 = r1.adjoint() * &m1;
        let s2 = r2.adjoint() * &m2;
        let s1dot = pdot.as_ref().map(|pd| r1.adjoint() * pd * &r1);
        let s2dot = pdot.as_ref().map(|pd| -(r2.adjoint() * pd * &r2));
        let (i1, d1, c1) = inv_sqrt(&s1, s1dot.as_ref())?;
        let (i2, d2, c2) = inv_sqrt(&s2, s2dot.as_ref())?;
        let mut u = CMat::zeros(n, n);
        u.columns_mut(0, r).copy_from(&(&m1 * &i1));
        u.columns_mut(r, n - r).copy_from(&(&m2 * &i2));
        let udot = match (pdot, d1, d2) {
            (Some(pd), Some(d1), Some(d2)) => {
                let mut ud = CMat::zeros(n, n);
                ud.columns_mut(0, r)
                    .copy_from(&(&pd * &r1 * &i1 + &m1 * d1));
                ud.columns_mut(r, n - r)
                    .copy_from(&(-(&pd * &r2) * &i2 + &m2 * d2));
                Some(ud)
            }
            _ => None,
        };
        Ok(FrameValue {
            u,
            udot,
            cover: c1.min(c2),
        })
    }
}

/// Builds the frame for `q` over `grid`. Errors with `RankNotConstant` if
/// the number of eigenvalues `≥ rank_tol` changes between nodes.
pub(crate) fn build(q: &StorageCandidate, grid: &[f64], rank_tol: f64) -> Result<(MatrixFunction, usize)> {
    let Some(&t0) = grid.first() else {
        return Err(Error::InvalidArgument("empty grid".into()));
    };
    let n = q.dim();
    let (vals0, mut vecs0) = eig_desc(&q.q().eval(t0)?)?;
    let r = rank_at(&vals0, rank_tol);
    for &t in &grid[1..] {
        let (vals, _) = eig_desc(&q.q().eval(t)?)?;
        let found = rank_at(&vals, rank_tol);
        if found != r {
            return Err(Error::RankNotConstant { t, expected: r, found });
        }
    }
    let first = if r == 0 || r == n {
        CMat::identity(n, n)
    } else {
        fix_phases(&mut vecs0);
        vecs0
    };
    let mut frame = Frame {
        q: q.clone(),
        n,
        r,
        anchors: vec![(t0, first)],
    };
    if r != 0 && r != n {
        for w in grid.windows(2) {
            let (prev, t) = (w[0], w[1]);
            if frame.project(frame.anchor_for(t), t, false)?.cover >= REANCHOR {
                continue;
            }
            let fresh = frame.project(frame.anchor_for(prev), prev, false)?.u;
            if frame.project(&fresh, t, false)?.cover < REANCHOR {
                return Err(Error::EigenvalueCrossingUnresolved { t });
            }
            frame.anchors.push((prev, fresh));
        }
    }
    let mut bps: Vec<f64> = frame.anchors[1..].iter().map(|a| a.0).collect();
    bps.extend_from_slice(q.q().breakpoints());
    let domain = q.q().domain();
    let frame = Arc::new(frame);
    let u = MatrixFunction::numeric(n, n, domain, bps, "null-space frame", move |t, need| {
        let v = frame.project(frame.anchor_for(t), t, need)?;
        Ok(Jet::new(v.u, v.udot))
    });
    Ok((u.memoized(), r))
}
