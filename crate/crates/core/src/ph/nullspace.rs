//! Nodewise range/kernel splitting of a storage matrix whose rank may drop.

use crate::dissipativity::StorageCandidate;
use crate::error::{Error, Result};
use crate::ltv::{Jet, MatrixFunction};
use crate::CMat;

use super::frame::{eig_desc, fix_phases, rank_at};

/// Alignment fails when the previous frame covers the new subspace worse
/// than this (cosine of the largest principal angle).
const MIN_OVERLAP: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone)]
pub struct NullSpaceDecomposition {
    pub grid: Vec<f64>,
    /// Rank of `Q` at each node, weakly decreasing.
    pub rank: Vec<usize>,
    /// Unitary `U` at each node; the first `rank` columns span the range.
    pub u: Vec<CMat>,
    /// `UᴴQU = diag(Q₁₁, 0)` at each node.
    pub q_tilde: Vec<CMat>,
}

impl NullSpaceDecomposition {
    /// Sample-and-hold interpolation of the nodal frames: pointwise unitary,
    /// piecewise constant, jumping at interior nodes.
    pub fn u_function(&self) -> MatrixFunction {
        let grid = self.grid.clone();
        let u = self.u.clone();
        let n = u.first().map_or(0, |m| m.nrows());
        let bps = grid[1..].to_vec();
        let domain = crate::ltv::Domain::full();
        MatrixFunction::numeric(n, n, domain, bps, "null-space frame (nodal)", move |t, need| {
            let k = grid.partition_point(|&s| s <= t).saturating_sub(1);
            Ok(Jet::new(u[k].clone(), need.then(|| CMat::zeros(n, n))))
        })
    }
}

/// `W Vᴴ` from the SVD `X = W Σ Vᴴ`, and `σ_min`.
fn polar(x: &CMat) -> (CMat, f64) {
    if x.ncols() == 0 {
        return (x.clone(), 1.0);
    }
    let svd = x.clone().svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let w = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    (w * vt, smin)
}

/// Splits `Q(t)` at every node into range and kernel with a unitary `U(t)`.
///
/// Eigenvalues `≥ rank_tol` count towards the rank. From the second node
/// on, the frame is carried over from the previous node by projecting its
/// columns onto the new range and kernel and re-orthonormalizing (closest
/// unitary), so repeated eigenvalues and sign flips cause no jumps.
pub fn null_space_decomposition(
    q: &StorageCandidate,
    grid: &[f64],
    rank_tol: f64,
) -> Result<NullSpaceDecomposition> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let n = q.dim();
    let mut out = NullSpaceDecomposition {
        grid: grid.to_vec(),
        rank: Vec::with_capacity(grid.len()),
        u: Vec::with_capacity(grid.len()),
        q_tilde: Vec::with_capacity(grid.len()),
    };
    for (k, &t) in grid.iter().enumerate() {
        let qt = q.q().eval(t)?;
        let (vals, vecs) = eig_desc(&qt)?;
        let r = rank_at(&vals, rank_tol);
        let u = if k == 0 {
            let mut v = vecs;
            fix_phases(&mut v);
            v
        } else {
            let prev_r = out.rank[k - 1];
            if r > prev_r {
                return Err(Error::RankIncreaseDetected { t, from: prev_r, to: r });
            }
            let prev = &out.u[k - 1];
            let e1 = vecs.columns(0, r);
            let p = &e1 * e1.adjoint();
            // keep the r previous range columns best covered by the new range
            let mut idx: Vec<usize> = (0..prev_r).collect();
            idx.sort_by(|&a, &b| {
                let na = (&p * prev.column(a)).norm();
                let nb = (&p * prev.column(b)).norm();
                nb.total_cmp(&na)
            });
            idx.truncate(r);
            idx.sort_unstable();
            let rest: Vec<usize> = (0..n).filter(|c| !idx.contains(c)).collect();
            let pick = |cols: &[usize]| {
                let mut m = CMat::zeros(n, cols.len());
                for (d, &c) in cols.iter().enumerate() {
                    m.set_column(d, &prev.column(c));
                }
                m
            };
            let (u1, s1) = polar(&(&p * pick(&idx)));
            let compl = CMat::identity(n, n) - &p;
            let (u2, s2) = polar(&(compl * pick(&rest)));
            if s1.min(s2) < MIN_OVERLAP {
                return Err(Error::EigenvalueCrossingUnresolved { t });
            }
            let mut u = CMat::zeros(n, n);
            u.columns_mut(0, r).copy_from(&u1);
            u.columns_mut(r, n - r).copy_from(&u2);
            u
        };
        out.q_tilde.push(u.adjoint() * &qt * &u);
        out.rank.push(r);
        out.u.push(u);
    }
    Ok(out)
}
