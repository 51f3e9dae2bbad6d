use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use super::Domain;
use crate::error::{Error, Result};
use crate::expr::{sort_dedup, Interval, TimeExpr};
use crate::hermlin;
use crate::{CMat, C64};

/// Value of a matrix function at one time, optionally with its first
/// derivative. `deriv` is `Some` exactly when it was requested.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: CMat,
    pub deriv: Option<CMat>,
}

impl Jet {
    pub fn new(value: CMat, deriv: Option<CMat>) -> Self {
        Jet { value, deriv }
    }

    fn d(&self) -> &CMat {
        self.deriv
            .as_ref()
            .expect("derivative requested from an input but not produced")
    }
}

/// Numeric evaluator: `(t, need_deriv) -> Jet`. Must return a derivative
/// when `need_deriv` is true, or an error explaining why it cannot.
pub type JetFn = dyn Fn(f64, bool) -> Result<Jet> + Send + Sync;

struct Symbolic {
    entries: Vec<TimeExpr>,
    derivs: OnceLock<Vec<TimeExpr>>,
}

impl Symbolic {
    fn new(entries: Vec<TimeExpr>) -> Arc<Self> {
        Arc::new(Symbolic {
            entries,
            derivs: OnceLock::new(),
        })
    }

    fn derivs(&self) -> &[TimeExpr] {
        self.derivs
            .get_or_init(|| self.entries.iter().map(TimeExpr::derivative).collect())
    }
}

#[derive(Clone)]
enum Repr {
    Symbolic(Arc<Symbolic>),
    Numeric { f: Arc<JetFn>, label: Arc<str> },
}

/// A matrix-valued function of time on a domain.
///
/// Symbolic functions hold one [`TimeExpr`] per entry (row-major) and
/// differentiate exactly. Numeric functions wrap a closure returning a
/// [`Jet`]; they arise from pointwise inverses, factorizations and ODE
/// solutions and carry their first derivative but not higher ones.
#[derive(Clone)]
pub struct MatrixFunction {
    rows: usize,
    cols: usize,
    domain: Domain,
    breakpoints: Arc<Vec<f64>>,
    repr: Repr,
}

impl fmt::Debug for MatrixFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Symbolic(s) => f
                .debug_struct("MatrixFunction")
                .field("shape", &(self.rows, self.cols))
                .field("entries", &s.entries)
                .finish(),
            Repr::Numeric { label, .. } => f
                .debug_struct("MatrixFunction")
                .field("shape", &(self.rows, self.cols))
                .field("numeric", label)
                .finish(),
        }
    }
}

impl MatrixFunction {
    /// Builds a symbolic function from row-major entries.
    pub fn from_exprs(rows: usize, cols: usize, entries: Vec<TimeExpr>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let mut bps = Vec::new();
        for e in &entries {
            bps.extend(e.breakpoints());
        }
        sort_dedup(&mut bps);
        Ok(MatrixFunction {
            rows,
            cols,
            domain: Domain::full(),
            breakpoints: Arc::new(bps),
            repr: Repr::Symbolic(Symbolic::new(entries)),
        })
    }

    pub fn from_rows(rows: Vec<Vec<TimeExpr>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Self::from_exprs(r, c, rows.into_iter().flatten().collect())
    }

    /// Parses a matrix from rows of expression strings.
    pub fn parse_rows(rows: &[&[&str]]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|row| row.iter().map(|s| TimeExpr::parse(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(parsed)
    }

    pub fn scalar(e: TimeExpr) -> Self {
        Self::from_exprs(1, 1, vec![e]).expect("1x1")
    }

    pub fn constant(m: &CMat) -> Self {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| TimeExpr::constant(m[(i, j)]))
            .collect();
        Self::from_exprs(m.nrows(), m.ncols(), entries).expect("shape")
    }

    pub fn constant_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self::from_exprs(rows, cols, data.iter().map(|&x| TimeExpr::real(x)).collect())
            .expect("shape")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_exprs(rows, cols, vec![TimeExpr::zero(); rows * cols]).expect("shape")
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(&CMat::identity(n, n))
    }

    pub fn diag(d: Vec<TimeExpr>) -> Self {
        let n = d.len();
        let mut entries = vec![TimeExpr::zero(); n * n];
        for (i, e) in d.into_iter().enumerate() {
            entries[i * n + i] = e;
        }
        Self::from_exprs(n, n, entries).expect("shape")
    }

    /// Wraps a numeric evaluator. `breakpoints` lists the points where the
    /// function or its derivative may jump.
    pub fn numeric<F>(
        rows: usize,
        cols: usize,
        domain: Domain,
        mut breakpoints: Vec<f64>,
        label: &str,
        f: F,
    ) -> Self
    where
        F: Fn(f64, bool) -> Result<Jet> + Send + Sync + 'static,
    {
        sort_dedup(&mut breakpoints);
        MatrixFunction {
            rows,
            cols,
            domain,
            breakpoints: Arc::new(breakpoints),
            repr: Repr::Numeric {
                f: Arc::new(f),
                label: label.into(),
            },
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.repr, Repr::Symbolic(_))
    }

    /// Row-major entries of a symbolic function.
    pub fn entries(&self) -> Option<&[TimeExpr]> {
        match &self.repr {
            Repr::Symbolic(s) => Some(&s.entries),
            Repr::Numeric { .. } => None,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&TimeExpr> {
        self.entries().map(|e| &e[i * self.cols + j])
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if self.domain.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                lo: self.domain.lo,
                hi: self.domain.hi,
            })
        }
    }

    fn eval_exprs(&self, exprs: &[TimeExpr], t: f64) -> Result<CMat> {
        let mut m = CMat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = exprs[i * self.cols + j].eval(t)?;
            }
        }
        Ok(m)
    }

    pub fn eval(&self, t: f64) -> Result<CMat> {
        Ok(self.jet(t, false)?.value)
    }

    pub fn eval_deriv(&self, t: f64) -> Result<CMat> {
        Ok(self.jet(t, true)?.deriv.expect("requested"))
    }

    /// Value and, if `need_deriv`, first derivative at `t`.
    pub fn jet(&self, t: f64, need_deriv: bool) -> Result<Jet> {
        self.check_domain(t)?;
        match &self.repr {
            Repr::Symbolic(s) => {
                let value = self.eval_exprs(&s.entries, t)?;
                let deriv = if need_deriv {
                    Some(self.eval_exprs(s.derivs(), t)?)
                } else {
                    None
                };
                Ok(Jet { value, deriv })
            }
            Repr::Numeric { f, .. } => {
                let j = f(t, need_deriv)?;
                debug_assert_eq!(j.value.shape(), (self.rows, self.cols));
                Ok(j)
            }
        }
    }

    /// Entrywise derivative. For numeric functions the result can be
    /// evaluated but not differentiated again.
    pub fn derivative(&self) -> MatrixFunction {
        match &self.repr {
            Repr::Symbolic(s) => {
                let mut d = Self::from_exprs(self.rows, self.cols, s.derivs().to_vec())
                    .expect("same shape");
                d.domain = self.domain;
                d
            }
            Repr::Numeric { f, label } => {
                let f = f.clone();
                let what = format!("d/dt {label}");
                let label = what.clone();
                Self::numeric(
                    self.rows,
                    self.cols,
                    self.domain,
                    self.breakpoints.to_vec(),
                    &label,
                    move |t, need| {
                        if need {
                            return Err(Error::DerivativeUnavailable { what: what.clone() });
                        }
                        let j = f(t, true)?;
                        Ok(Jet::new(j.deriv.expect("requested"), None))
                    },
                )
            }
        }
    }

    /// Caches the most recent evaluation of a numeric function, so that
    /// compositions sharing an expensive input (an eigen-frame, say)
    /// evaluate it once per time point.
    pub fn memoized(&self) -> MatrixFunction {
        let Repr::Numeric { f, label } = &self.repr else {
            return self.clone();
        };
        let f = f.clone();
        let cache: Mutex<Option<(f64, Jet)>> = Mutex::new(None);
        Self::numeric(
            self.rows,
            self.cols,
            self.domain,
            self.breakpoints.to_vec(),
            label,
            move |t, need| {
                if let Ok(guard) = cache.try_lock() {
                    if let Some((tc, j)) = guard.as_ref() {
                        if tc.to_bits() == t.to_bits() && (j.deriv.is_some() || !need) {
                            return Ok(j.clone());
                        }
                    }
                }
                let j = f(t, need)?;
                if let Ok(mut guard) = cache.try_lock() {
                    *guard = Some((t, j.clone()));
                }
                Ok(j)
            },
        )
    }

    /// General pointwise combinator over numeric jets. `f` receives the
    /// jets of `inputs` (with derivatives iff `need_deriv`).
    pub fn combine<F>(
        inputs: &[&MatrixFunction],
        rows: usize,
        cols: usize,
        label: &str,
        f: F,
    ) -> MatrixFunction
    where
        F: Fn(&[Jet], bool) -> Result<Jet> + Send + Sync + 'static,
    {
        let mut domain = Domain::full();
        let mut bps = Vec::new();
        for m in inputs {
            domain = domain.intersect(&m.domain);
            bps.extend_from_slice(&m.breakpoints);
        }
        let owned: Vec<MatrixFunction> = inputs.iter().map(|m| (*m).clone()).collect();
        Self::numeric(rows, cols, domain, bps, label, move |t, need| {
            let jets = owned
                .iter()
                .map(|m| m.jet(t, need))
                .collect::<Result<Vec<_>>>()?;
            f(&jets, need)
        })
    }

    fn all_symbolic<'a>(ms: &[&'a MatrixFunction]) -> Option<Vec<&'a [TimeExpr]>> {
        ms.iter().map(|m| m.entries()).collect()
    }

    fn symbolic_result(
        rows: usize,
        cols: usize,
        entries: Vec<TimeExpr>,
        inputs: &[&MatrixFunction],
    ) -> MatrixFunction {
        let domain = inputs
            .iter()
            .fold(Domain::full(), |d, m| d.intersect(&m.domain));
        Self::from_exprs(rows, cols, entries)
            .expect("shape")
            .with_domain(domain)
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{op} of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sum")?;
        self.zip(other, "sum", |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "difference")?;
        self.zip(other, "difference", |a, b| a - b, |a, b| a - b)
    }

    fn zip(
        &self,
        other: &Self,
        label: &str,
        sym: impl Fn(&TimeExpr, &TimeExpr) -> TimeExpr,
        num: fn(&CMat, &CMat) -> CMat,
    ) -> Result<Self> {
        let inputs = [self, other];
        if let Some(e) = Self::all_symbolic(&inputs) {
            let entries = e[0].iter().zip(e[1]).map(|(a, b)| sym(a, b)).collect();
            return Ok(Self::symbolic_result(self.rows, self.cols, entries, &inputs));
        }
        Ok(Self::combine(&inputs, self.rows, self.cols, label, move |j, need| {
            Ok(Jet::new(
                num(&j[0].value, &j[1].value),
                need.then(|| num(j[0].d(), j[1].d())),
            ))
        }))
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "product of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (r, k, c) = (self.rows, self.cols, other.cols);
        let inputs = [self, other];
        if let Some(e) = Self::all_symbolic(&inputs) {
            let mut entries = Vec::with_capacity(r * c);
            for i in 0..r {
                for j in 0..c {
                    let mut acc = TimeExpr::zero();
                    for l in 0..k {
                        let a = &e[0][i * k + l];
                        let b = &e[1][l * c + j];
                        if !a.is_zero() && !b.is_zero() {
                            acc = acc + a * b;
                        }
                    }
                    entries.push(acc);
                }
            }
            return Ok(Self::symbolic_result(r, c, entries, &inputs));
        }
        Ok(Self::combine(&inputs, r, c, "product", |j, need| {
            let (a, b) = (&j[0], &j[1]);
            Ok(Jet::new(
                &a.value * &b.value,
                need.then(|| a.d() * &b.value + &a.value * b.d()),
            ))
        }))
    }

    /// Multiplies every entry by the scalar function `s` (1x1).
    pub fn scale_by(&self, s: &Self) -> Result<Self> {
        if s.shape() != (1, 1) {
            return Err(Error::DimensionMismatch("scale factor must be 1x1".into()));
        }
        let inputs = [self, s];
        if let Some(e) = Self::all_symbolic(&inputs) {
            let f = &e[1][0];
            let entries = e[0].iter().map(|a| a * f).collect();
            return Ok(Self::symbolic_result(self.rows, self.cols, entries, &inputs));
        }
        Ok(Self::combine(&inputs, self.rows, self.cols, "scaled", |j, need| {
            let (a, s) = (&j[0], &j[1]);
            let sv = s.value[(0, 0)];
            Ok(Jet::new(
                &a.value * sv,
                need.then(|| a.d() * sv + &a.value * s.d()[(0, 0)]),
            ))
        }))
    }

    pub fn scale(&self, c: C64) -> Self {
        self.scale_by(&Self::scalar(TimeExpr::constant(c)))
            .expect("1x1 factor")
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let (r, c) = (self.rows, self.cols);
        if let Some(e) = self.entries() {
            let mut entries = Vec::with_capacity(r * c);
            for j in 0..c {
                for i in 0..r {
                    entries.push(e[i * c + j].conj());
                }
            }
            return Self::symbolic_result(c, r, entries, &[self]);
        }
        Self::combine(&[self], c, r, "adjoint", |j, need| {
            Ok(Jet::new(j[0].value.adjoint(), need.then(|| j[0].d().adjoint())))
        })
    }

    /// Hermitian part `(M + Mᴴ)/2`.
    pub fn herm_part(&self) -> Result<Self> {
        Ok(self.add(&self.adjoint())?.scale(Complex64::new(0.5, 0.0)))
    }

    /// Pointwise inverse. Diagonal symbolic matrices stay symbolic; all
    /// others are inverted numerically at evaluation time.
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        if let Some(e) = self.entries() {
            let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || e[i * n + j].is_zero()));
            if diagonal {
                let d = (0..n).map(|i| e[i * n + i].clone().recip()).collect();
                return Ok(Self::diag(d).with_domain(self.domain));
            }
        }
        Ok(Self::combine(&[self], n, n, "inverse", |j, need| {
            let inv = hermlin::inverse(&j[0].value)?;
            let d = need.then(|| -(&inv * j[0].d() * &inv));
            Ok(Jet::new(inv, d))
        }))
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Result<Self> {
        if r0 + nr > self.rows || c0 + nc > self.cols {
            return Err(Error::DimensionMismatch(format!(
                "block ({r0},{c0}) of size {nr}x{nc} outside {:?}",
                self.shape()
            )));
        }
        if let Some(e) = self.entries() {
            let mut entries = Vec::with_capacity(nr * nc);
            for i in r0..r0 + nr {
                for j in c0..c0 + nc {
                    entries.push(e[i * self.cols + j].clone());
                }
            }
            return Ok(Self::symbolic_result(nr, nc, entries, &[self]));
        }
        Ok(Self::combine(&[self], nr, nc, "block", move |j, need| {
            let take = |m: &CMat| m.view((r0, c0), (nr, nc)).into_owned();
            Ok(Jet::new(take(&j[0].value), need.then(|| take(j[0].d()))))
        }))
    }

    /// Assembles a block matrix from a grid of blocks.
    pub fn block(blocks: &[Vec<&MatrixFunction>]) -> Result<Self> {
        let row_heights: Vec<usize> = blocks
            .iter()
            .map(|row| row.first().map_or(0, |b| b.rows))
            .collect();
        let col_widths: Vec<usize> = blocks
            .first()
            .map(|row| row.iter().map(|b| b.cols).collect())
            .unwrap_or_default();
        for (bi, row) in blocks.iter().enumerate() {
            if row.len() != col_widths.len() {
                return Err(Error::DimensionMismatch("ragged block rows".into()));
            }
            for (bj, b) in row.iter().enumerate() {
                if b.rows != row_heights[bi] || b.cols != col_widths[bj] {
                    return Err(Error::DimensionMismatch(format!(
                        "block ({bi},{bj}) has shape {:?}",
                        b.shape()
                    )));
                }
            }
        }
        let rows: usize = row_heights.iter().sum();
        let cols: usize = col_widths.iter().sum();
        let flat: Vec<&MatrixFunction> = blocks.iter().flatten().copied().collect();
        if let Some(e) = Self::all_symbolic(&flat) {
            let mut entries = vec![TimeExpr::zero(); rows * cols];
            let mut k = 0;
            let mut r0 = 0;
            for &h in &row_heights {
                let mut c0 = 0;
                for &w in &col_widths {
                    for i in 0..h {
                        for j in 0..w {
                            entries[(r0 + i) * cols + c0 + j] = e[k][i * w + j].clone();
                        }
                    }
                    k += 1;
                    c0 += w;
                }
                r0 += h;
            }
            return Ok(Self::symbolic_result(rows, cols, entries, &flat));
        }
        let layout = (row_heights, col_widths);
        Ok(Self::combine(&flat, rows, cols, "block matrix", move |j, need| {
            let place = |pick: &dyn Fn(&Jet) -> &CMat| {
                let mut m = CMat::zeros(rows, cols);
                let mut k = 0;
                let mut r0 = 0;
                for &h in &layout.0 {
                    let mut c0 = 0;
                    for &w in &layout.1 {
                        m.view_mut((r0, c0), (h, w)).copy_from(pick(&j[k]));
                        k += 1;
                        c0 += w;
                    }
                    r0 += h;
                }
                m
            };
            let value = place(&|x: &Jet| &x.value);
            let deriv = need.then(|| place(&|x: &Jet| x.d()));
            Ok(Jet::new(value, deriv))
        }))
    }

    pub fn block_diag(blocks: &[&MatrixFunction]) -> Result<Self> {
        let zeros: Vec<Vec<MatrixFunction>> = blocks
            .iter()
            .map(|a| blocks.iter().map(|b| Self::zeros(a.rows, b.cols)).collect())
            .collect();
        let grid: Vec<Vec<&MatrixFunction>> = (0..blocks.len())
            .map(|i| {
                (0..blocks.len())
                    .map(|j| if i == j { blocks[i] } else { &zeros[i][j] })
                    .collect()
            })
            .collect();
        Self::block(&grid)
    }

    /// Symbolic piecewise-linear interpolant of the values on `grid`, used
    /// to serialize numeric functions.
    pub fn interpolate(&self, grid: &[f64]) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidArgument("interpolation needs two nodes".into()));
        }
        let vals = grid
            .iter()
            .map(|&t| self.eval(t))
            .collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let mut branches = Vec::with_capacity(grid.len() - 1);
                for k in 0..grid.len() - 1 {
                    let (a, b) = (grid[k], grid[k + 1]);
                    let (va, vb) = (vals[k][(i, j)], vals[k + 1][(i, j)]);
                    let slope = (vb - va) / (b - a);
                    let e = TimeExpr::constant(va)
                        + TimeExpr::constant(slope) * (TimeExpr::t() - TimeExpr::real(a));
                    branches.push((Interval::new(a, b), e));
                }
                let last = TimeExpr::constant(vals[grid.len() - 1][(i, j)]);
                entries.push(TimeExpr::piecewise(branches, last));
            }
        }
        Ok(Self::from_exprs(self.rows, self.cols, entries)?.with_domain(self.domain))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn symbolic_product_and_derivative() {
        let a = MatrixFunction::parse_rows(&[&["t", "1"], &["0", "t^2"]]).unwrap();
        let b = MatrixFunction::parse_rows(&[&["1"], &["t"]]).unwrap();
        let p = a.mul(&b).unwrap();
        assert!(p.is_symbolic());
        let v = p.eval(2.0).unwrap();
        assert_eq!(v[(0, 0)], c(4.0));
        assert_eq!(v[(1, 0)], c(8.0));
        let d = p.eval_deriv(2.0).unwrap();
        assert_eq!(d[(0, 0)], c(2.0));
        assert_eq!(d[(1, 0)], c(12.0));
    }

    #[test]
    fn numeric_inverse_has_chain_rule_derivative() {
        let a = MatrixFunction::parse_rows(&[&["2 + t", "t"], &["0", "1 + t^2"]]).unwrap();
        let inv = a.inverse().unwrap();
        assert!(!inv.is_symbolic());
        let t = 0.7;
        let h = 1e-6;
        let fd = (inv.eval(t + h).unwrap() - inv.eval(t - h).unwrap()) / c(2.0 * h);
        let d = inv.eval_deriv(t).unwrap();
        assert!((d - fd).norm() < 1e-8);
        let prod = a.mul(&inv).unwrap().eval(t).unwrap();
        assert!((prod - CMat::identity(2, 2)).norm() < 1e-14);
        assert!(matches!(
            inv.derivative().eval_deriv(t),
            Err(Error::DerivativeUnavailable { .. })
        ));
    }

    #[test]
    fn diagonal_inverse_stays_symbolic() {
        let a = MatrixFunction::diag(vec![TimeExpr::parse("2 - t").unwrap(), TimeExpr::real(4.0)]);
        let inv = a.inverse().unwrap();
        assert!(inv.is_symbolic());
        assert_eq!(inv.eval(0.0).unwrap()[(0, 0)], c(0.5));
    }

    #[test]
    fn mixed_block_assembly() {
        let a = MatrixFunction::parse_rows(&[&["t"]]).unwrap();
        let b = a.inverse().unwrap().add(&a).unwrap();
        let blk = MatrixFunction::block_diag(&[&a, &b]).unwrap();
        let v = blk.eval(2.0).unwrap();
        assert_eq!(v[(0, 0)], c(2.0));
        assert_eq!(v[(1, 1)], c(2.5));
        assert_eq!(v[(0, 1)], c(0.0));
        let d = blk.eval_deriv(2.0).unwrap();
        assert!((d[(1, 1)] - c(0.75)).norm() < 1e-15);
    }

    #[test]
    fn adjoint_conjugates() {
        let a = MatrixFunction::parse_rows(&[&["i*t", "1"]]).unwrap();
        let ah = a.adjoint();
        assert_eq!(ah.shape(), (2, 1));
        assert_eq!(ah.eval(1.0).unwrap()[(0, 0)], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn breakpoints_and_domain() {
        let a = MatrixFunction::parse_rows(&[&["piecewise{t < 1: 0; else: 1}", "abs(t - 2)"]])
            .unwrap()
            .with_domain(Domain::new(0.0, 3.0));
        assert_eq!(a.breakpoints(), &[1.0, 2.0]);
        assert!(matches!(a.eval(4.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let a = MatrixFunction::parse_rows(&[&["sin(t)"]]).unwrap();
        let inv = a.scale(c(2.0)).inverse().unwrap().inverse().unwrap();
        let grid = [0.5, 1.0, 1.5];
        let p = inv.interpolate(&grid).unwrap();
        for &t in &grid {
            assert!((p.eval(t).unwrap() - inv.eval(t).unwrap()).norm() < 1e-14);
        }
    }
}
