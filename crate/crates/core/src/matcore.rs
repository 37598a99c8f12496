//! Dense symmetric linear algebra and the convex projections used by the
//! constant solvers.
//!
//! Everything here is plain `f64` on row-major storage. The matrices in this
//! crate are small to moderate (a few hundred rows at most), so nothing is
//! blocked or vectorised beyond what the compiler does on its own.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric `p x p` matrix.
///
/// Construction symmetrizes the input as `(A + A^T) / 2`, so `get(i, j)` and
/// `get(j, i)` are bit-identical afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major data of length `dim * dim`.
    pub fn new(dim: usize, mut data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be at least 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn diag(d: &[f64]) -> Self {
        let dim = d.len();
        let mut data = vec![0.0; dim * dim];
        for (i, v) in d.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        Self { dim, data }
    }

    /// Equicorrelation matrix with unit diagonal and constant off-diagonal `rho`.
    pub fn equicorrelated(dim: usize, rho: f64) -> Self {
        let mut data = vec![rho; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_diag(&self) -> f64 {
        self.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `out = A u` without allocation.
    #[inline]
    pub fn mul_vec_into(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), u);
        }
    }

    pub fn mul_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(u, &mut out);
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// `self - c * other`.
    pub fn sub_scaled(&self, other: &SymMatrix, c: f64) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - c * b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        Self { dim: k, data }
    }

    /// Congruence `D A D` with `D = diag(d)`.
    pub fn scale_rows_cols(&self, d: &[f64]) -> Self {
        let p = self.dim;
        let mut data = self.data.clone();
        for i in 0..p {
            for j in 0..p {
                data[i * p + j] *= d[i] * d[j];
            }
        }
        Self { dim: p, data }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `u^T A u` with compensated accumulation.
pub fn quadratic_form(a: &SymMatrix, u: &[f64]) -> Result<f64> {
    if u.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: u.len() });
    }
    let p = a.dim();
    Ok(compensated_sum((0..p).flat_map(|i| {
        let ui = u[i];
        a.row(i).iter().zip(u).map(move |(aij, uj)| ui * aij * uj)
    })))
}

/// Uncompensated `u^T A u` for inner loops where dimensions are already known to match.
#[inline]
pub(crate) fn quad(a: &SymMatrix, u: &[f64]) -> f64 {
    (0..a.dim()).map(|i| u[i] * dot(a.row(i), u)).sum()
}

/// Lower-triangular factor stored densely, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// `L z`.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let p = self.dim;
        (0..p).map(|i| dot(&self.data[i * p..i * p + i + 1], &z[..=i])).collect()
    }

    /// Solves `L x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.dim;
        let mut x = vec![0.0; p];
        for i in 0..p {
            let s = dot(&self.data[i * p..i * p + i], &x[..i]);
            x[i] = (b[i] - s) / self.get(i, i);
        }
        x
    }

    /// Solves `L^T x = b`.
    pub fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        let p = self.dim;
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = b[i];
            for k in (i + 1)..p {
                s -= self.get(k, i) * x[k];
            }
            x[i] = s / self.get(i, i);
        }
        x
    }

    /// `L L^T` as a symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        let p = self.dim;
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                let m = j.min(i);
                let v = dot(&self.data[i * p..i * p + m + 1], &self.data[j * p..j * p + m + 1]);
                data[i * p + j] = v;
                data[j * p + i] = v;
            }
        }
        SymMatrix { dim: p, data }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec()).collect()
    }
}

/// Outcome of a Cholesky attempt. A failed pivot is an ordinary result: the
/// population covariance is allowed to be singular.
#[derive(Clone, Debug, PartialEq)]
pub enum Cholesky {
    Factor(LowerTriangular),
    NotPositiveDefinite { pivot: usize },
}

impl Cholesky {
    pub fn factor(self) -> Option<LowerTriangular> {
        match self {
            Cholesky::Factor(l) => Some(l),
            Cholesky::NotPositiveDefinite { .. } => None,
        }
    }

    pub fn into_result(self) -> Result<LowerTriangular> {
        match self {
            Cholesky::Factor(l) => Ok(l),
            Cholesky::NotPositiveDefinite { pivot } => Err(Error::NotPositiveDefinite { pivot }),
        }
    }
}

/// Pivots below `1e-12 * max diagonal` count as failure.
pub fn cholesky(a: &SymMatrix) -> Cholesky {
    let p = a.dim();
    let floor = 1e-12 * a.max_diag().max(0.0);
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let s = dot(&l[j * p..j * p + j], &l[j * p..j * p + j]);
        let d = a.get(j, j) - s;
        if !(d > floor) {
            return Cholesky::NotPositiveDefinite { pivot: j };
        }
        let djj = d.sqrt();
        l[j * p + j] = djj;
        for i in (j + 1)..p {
            let s = dot(&l[i * p..i * p + j], &l[j * p..j * p + j]);
            l[i * p + j] = (a.get(i, j) - s) / djj;
        }
    }
    Cholesky::Factor(LowerTriangular { dim: p, data: l })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenExtremes {
    pub min: f64,
    pub max: f64,
    pub converged: bool,
}

/// Largest eigenvalue of a positive semidefinite operator by power iteration
/// with Rayleigh quotients. Stops once the residual `|Bv - lambda v|` drops to
/// `1e-8 * scale`, which bounds the eigenvalue error by the same amount.
fn power_top(b: impl Fn(&[f64], &mut [f64]), p: usize, start: Vec<f64>, scale: f64) -> (f64, bool) {
    let cap = power_cap(p);
    let mut v = start;
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; p];
    let mut lambda = 0.0;
    for _ in 0..cap {
        b(&v, &mut w);
        lambda = dot(&v, &w);
        let resid = w.iter().zip(&v).map(|(wi, vi)| (wi - lambda * vi).powi(2)).sum::<f64>().sqrt();
        if resid <= 1e-8 * scale {
            return (lambda, true);
        }
        let nw = norm2(&w);
        if nw == 0.0 {
            return (0.0, true);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    (lambda, false)
}

fn power_cap(p: usize) -> usize {
    let pf = p as f64;
    (10.0 * pf * pf.max(1.0).ln()).ceil() as usize + 500
}

fn perturbed_start(p: usize) -> Vec<f64> {
    // golden-ratio sequence, never orthogonal to a coordinate-aligned subspace
    (0..p).map(|i| 1.0 + 0.5 * (((i + 1) as f64 * 0.618_033_988_749_895).fract() - 0.5)).collect()
}

fn top_eigenvalue(b: impl Fn(&[f64], &mut [f64]) + Copy, p: usize, scale: f64) -> (f64, bool) {
    let (l1, c1) = power_top(b, p, vec![1.0; p], scale);
    let (l2, c2) = power_top(b, p, perturbed_start(p), scale);
    if l1 >= l2 {
        (l1, c1)
    } else {
        (l2, c2)
    }
}

/// Smallest and largest eigenvalue by shifted power iteration.
pub fn extreme_eigenvalues(a: &SymMatrix) -> EigenExtremes {
    let p = a.dim();
    // Gershgorin lower bound; shifting by it makes the operator PSD.
    let gersh_low = (0..p)
        .map(|i| a.get(i, i) - a.row(i).iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let shift = (-gersh_low).max(0.0);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let (top, c_top) = top_eigenvalue(
        |v: &[f64], out: &mut [f64]| {
            a.mul_vec_into(v, out);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += shift * vi;
            }
        },
        p,
        scale,
    );
    let max = top - shift;
    let (bottom, c_bot) = top_eigenvalue(
        |v: &[f64], out: &mut [f64]| {
            a.mul_vec_into(v, out);
            for (o, vi) in out.iter_mut().zip(v) {
                *o = max * vi - *o;
            }
        },
        p,
        scale,
    );
    EigenExtremes { min: max - bottom, max, converged: c_top && c_bot }
}

/// Euclidean projection onto `{w >= 0, sum w = total}`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - total) / (k + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Euclidean projection onto the l1 ball of the given radius.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    if norm1(v) <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    project_simplex(&abs, radius).into_iter().zip(v).map(|(w, x)| w.copysign(*x)).collect()
}

/// Projection onto `{w : sign(w_j) signs_j >= 0, sum signs_j w_j = total}`.
pub fn project_signed_simplex(v: &[f64], signs: &[f64], total: f64) -> Vec<f64> {
    let flipped: Vec<f64> = v.iter().zip(signs).map(|(x, s)| x * s).collect();
    project_simplex(&flipped, total).into_iter().zip(signs).map(|(w, s)| w * s).collect()
}

/// Nearest point on the l1 sphere `{||w||_1 = radius}`. Zero coordinates are
/// treated as positive.
pub(crate) fn project_l1_sphere(v: &[f64], radius: f64) -> Vec<f64> {
    let signs: Vec<f64> = v.iter().map(|x| if *x < 0.0 { -1.0 } else { 1.0 }).collect();
    project_signed_simplex(v, &signs, radius)
}

/// Formats with the shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `p` on the first line, then `p` rows of comma-separated values.
pub fn sym_matrix_to_csv(a: &SymMatrix) -> String {
    let mut s = format!("{}\n", a.dim());
    for i in 0..a.dim() {
        let row: Vec<String> = a.row(i).iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse { line: lineno, msg: format!("`{}`: {e}", t.trim()) }))
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

pub fn sym_matrix_from_csv(text: &str) -> Result<SymMatrix> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
    let p: usize = header.parse().map_err(|_| Error::Parse { line: ln, msg: format!("expected dimension, got `{header}`") })?;
    let mut data = Vec::with_capacity(p * p);
    let mut rows = 0;
    for (ln, line) in lines {
        let row = parse_row(line, ln)?;
        if row.len() != p {
            return Err(Error::Parse { line: ln, msg: format!("expected {p} values, got {}", row.len()) });
        }
        data.extend(row);
        rows += 1;
    }
    if rows != p {
        return Err(Error::Parse { line: rows + 2, msg: format!("expected {p} rows, got {rows}") });
    }
    SymMatrix::new(p, data)
}

/// `n,p` on the first line, then `n` rows.
pub fn data_matrix_to_csv(n: usize, p: usize, x: &[f64]) -> String {
    let mut s = format!("{n},{p}\n");
    for i in 0..n {
        let row: Vec<String> = x[i * p..(i + 1) * p].iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn data_matrix_from_csv(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse { line: ln, msg: format!("expected `n,p`, got `{header}`") })?;
    if dims.len() != 2 {
        return Err(Error::Parse { line: ln, msg: format!("expected `n,p`, got `{header}`") });
    }
    let (n, p) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(n * p);
    let mut rows = 0;
    for (ln, line) in lines {
        let row = parse_row(line, ln)?;
        if row.len() != p {
            return Err(Error::Parse { line: ln, msg: format!("expected {p} values, got {}", row.len()) });
        }
        data.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse { line: rows + 2, msg: format!("expected {n} rows, got {rows}") });
    }
    Ok((n, p, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn quadratic_form_examples() {
        assert_eq!(quadratic_form(&SymMatrix::identity(3), &[1.0, 2.0, 2.0]).unwrap(), 9.0);
        let a = SymMatrix::equicorrelated(2, 0.5);
        assert!(close(quadratic_form(&a, &[1.0, -1.0]).unwrap(), 1.0, 1e-15));
        assert_eq!(quadratic_form(&SymMatrix::zeros(2), &[5.0, 7.0]).unwrap(), 0.0);
        assert!(matches!(quadratic_form(&SymMatrix::identity(2), &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn construction_symmetrizes_and_rejects_nan() {
        let a = SymMatrix::new(2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert!(matches!(SymMatrix::new(2, vec![1.0, f64::NAN, 0.0, 1.0]), Err(Error::NonFinite(1))));
        assert!(SymMatrix::new(0, vec![]).is_err());
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&SymMatrix::identity(4)).factor().unwrap();
        assert_eq!(l.to_rows(), SymMatrix::identity(4).to_rows());
        let a = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let l = cholesky(&a).factor().unwrap();
        assert_eq!(l.to_rows(), vec![vec![2.0, 0.0], vec![1.0, 2.0]]);
        let ones = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(cholesky(&ones), Cholesky::NotPositiveDefinite { pivot: 1 });
    }

    #[test]
    fn triangular_solves_invert_products() {
        let a = SymMatrix::from_rows(&[vec![4.0, 2.0, 0.4], vec![2.0, 5.0, 1.0], vec![0.4, 1.0, 3.0]]).unwrap();
        let l = cholesky(&a).factor().unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = l.solve(&b);
        let back = l.mul_vec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!(close(*u, *v, 1e-14));
        }
        let y = l.solve_transposed(&b);
        // L^T y = b  <=>  y^T L = b^T
        for j in 0..3 {
            let s: f64 = (j..3).map(|i| l.get(i, j) * y[i]).sum();
            assert!(close(s, b[j], 1e-14));
        }
    }

    #[test]
    fn eigen_examples() {
        let e = extreme_eigenvalues(&SymMatrix::identity(5));
        assert!(close(e.min, 1.0, 1e-12) && close(e.max, 1.0, 1e-12) && e.converged);
        let e = extreme_eigenvalues(&SymMatrix::diag(&[1.0, 4.0, 9.0]));
        assert!(close(e.min, 1.0, 1e-7) && close(e.max, 9.0, 1e-7));
        let e = extreme_eigenvalues(&SymMatrix::equicorrelated(2, 0.5));
        assert!(close(e.min, 0.5, 1e-8) && close(e.max, 1.5, 1e-8));
    }

    #[test]
    fn eigen_handles_indefinite_input() {
        let e = extreme_eigenvalues(&SymMatrix::diag(&[-3.0, 1.0, 2.0]));
        assert!(close(e.min, -3.0, 1e-7) && close(e.max, 2.0, 1e-7));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_l1_ball(&[0.2, -0.1], 1.0), vec![0.2, -0.1]);
        assert_eq!(project_l1_ball(&[3.0, 0.0], 1.0), vec![1.0, 0.0]);
        assert_eq!(project_l1_ball(&[2.0, 2.0], 2.0), vec![1.0, 1.0]);
        assert_eq!(project_l1_ball(&[2.0, -2.0], 0.0), vec![0.0, 0.0]);
        assert_eq!(project_signed_simplex(&[0.5, 0.5], &[1.0, 1.0], 1.0), vec![0.5, 0.5]);
        assert_eq!(project_signed_simplex(&[2.0, 0.0], &[1.0, 1.0], 1.0), vec![1.0, 0.0]);
        assert_eq!(project_signed_simplex(&[-1.0, -1.0], &[-1.0, -1.0], 1.0), vec![-0.5, -0.5]);
    }

    #[test]
    fn l1_sphere_projection_pushes_outward() {
        let w = project_l1_sphere(&[0.1, -0.1, 0.0], 1.0);
        assert!(close(norm1(&w), 1.0, 1e-15));
        assert!(w[0] > 0.0 && w[1] < 0.0);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let a = SymMatrix::from_rows(&[vec![0.1, 1e-300], vec![1e-300, 2.0 / 3.0]]).unwrap();
        let back = sym_matrix_from_csv(&sym_matrix_to_csv(&a)).unwrap();
        assert_eq!(back, a);
        let x = vec![1.0, -0.3, 1e20, std::f64::consts::PI, 0.0, -0.0];
        let (n, p, y) = data_matrix_from_csv(&data_matrix_to_csv(3, 2, &x)).unwrap();
        assert_eq!((n, p), (3, 2));
        assert!(x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = sym_matrix_from_csv("2\n1,0\n0,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = data_matrix_from_csv("2,2\n1,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn gram_of_factor_reproduces_matrix() {
        let a = SymMatrix::from_rows(&[vec![4.0, 2.0, 0.4], vec![2.0, 5.0, 1.0], vec![0.4, 1.0, 3.0]]).unwrap();
        let l = cholesky(&a).factor().unwrap();
        let g = l.gram();
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(g.get(i, j), a.get(i, j), 1e-14));
            }
        }
    }
}
