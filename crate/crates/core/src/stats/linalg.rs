//! Dense least squares via modified Gram–Schmidt QR.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Prepends a column of ones.
    pub fn with_intercept(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            out.set(r, 0, 1.0);
            for c in 0..self.cols {
                out.set(r, c + 1, self.get(r, c));
            }
        }
        out
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out.set(r, j, self.get(r, c));
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

/// Relative size below which a column counts as dependent on earlier columns.
const RANK_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Qr {
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

/// Modified Gram–Schmidt with one reorthogonalization pass per column.
fn qr(x: &Matrix) -> Result<Qr> {
    let k = x.cols();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    for j in 0..k {
        let mut v = x.column(j);
        let original = norm(&v);
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let proj = dot(qi, &v);
                r[i][j] += proj;
                for (vt, qt) in v.iter_mut().zip(qi) {
                    *vt -= proj * qt;
                }
            }
        }
        let rest = norm(&v);
        if original == 0.0 || rest <= RANK_TOL * original {
            return Err(Error::Singular { column: j });
        }
        r[j][j] = rest;
        v.iter_mut().for_each(|t| *t /= rest);
        q.push(v);
    }
    Ok(Qr { q, r })
}

/// Ordinary least squares of `y` on the columns of `x`.
///
/// `r_squared` is the centered coefficient of determination, taken as 0
/// when `y` is constant.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Shape(format!("design has {n} rows but y has {} values", y.len())));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!("need more rows than columns, got {n}x{k}")));
    }
    let Qr { q, r } = qr(x)?;
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let tail: f64 = (i + 1..k).map(|j| r[i][j] * beta[j]).sum();
        beta[i] = (qty[i] - tail) / r[i][i];
    }
    let fitted = x.mul_vec(&beta);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let r_squared = if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 0.0 };
    Ok(OlsFit { coefficients: beta, residuals, r_squared })
}

/// Greedy left-to-right choice of a full-rank column subset.
///
/// Returns the kept column indices; a column is dropped when it lies within
/// the rank tolerance of the span of the columns kept before it.
pub fn independent_columns(x: &Matrix) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..x.cols() {
        let mut v = x.column(j);
        let original = norm(&v);
        for _pass in 0..2 {
            for qi in &basis {
                let proj = dot(qi, &v);
                for (vt, qt) in v.iter_mut().zip(qi) {
                    *vt -= proj * qt;
                }
            }
        }
        let rest = norm(&v);
        if original > 0.0 && rest > RANK_TOL * original {
            v.iter_mut().for_each(|t| *t /= rest);
            basis.push(v);
            kept.push(j);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng::Rng;

    /// Gauss–Jordan inverse with partial pivoting, used only as an oracle.
    fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap()).unwrap();
            m.swap(c, p);
            let d = m[c][c];
            m[c].iter_mut().for_each(|v| *v /= d);
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let pivot = m[c].clone();
                    m[r].iter_mut().zip(&pivot).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = Rng::new(9);
        let (n, k) = (50, 3);
        let data: Vec<f64> = (0..n * k).map(|_| rng.standard_normal()).collect();
        let x = Matrix::from_row_major(n, k, data).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let fit = ols_fit(&x, &y).unwrap();

        let xtx: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| dot(&x.column(i), &x.column(j))).collect())
            .collect();
        let xty: Vec<f64> = (0..k).map(|i| dot(&x.column(i), &y)).collect();
        let inv = invert(&xtx);
        for i in 0..k {
            let oracle: f64 = (0..k).map(|j| inv[i][j] * xty[j]).sum();
            assert!((fit.coefficients[i] - oracle).abs() < 1e-6);
        }
        let scale = norm(&y);
        for j in 0..k {
            assert!(dot(&x.column(j), &fit.residuals).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn exact_linear_fit() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..10).map(|i| 3.0 - 2.0 * i as f64).collect();
        let fit = ols_fit(&x, &y).unwrap();
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_gives_mean() {
        let x = Matrix::from_rows(&vec![vec![1.0]; 5]).unwrap();
        let y = [1.0, 2.0, 4.0, 8.0, 10.0];
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 5.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        match ols_fit(&x, &[0.0; 8]) {
            Err(Error::Singular { column }) => assert_eq!(column, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert_eq!(independent_columns(&x), vec![0, 1]);
    }

    #[test]
    fn too_few_rows_rejected() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        assert!(matches!(ols_fit(&x, &[1.0, 2.0]), Err(Error::InsufficientData(_))));
    }
}
