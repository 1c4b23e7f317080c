//! Dense symmetric linear algebra: sample covariance, spectral
//! decomposition, norms, and condition numbers.
//!
//! Everything downstream (shrinkage, cross-validation, clustering) works on
//! a symmetric matrix through its spectral decomposition, so this module
//! pins the contracts: exact stored symmetry, descending eigenvalues, and
//! orthonormal eigenvectors.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A square real matrix with exactly symmetric storage.
///
/// Symmetry is enforced at construction: `entries[i][j] == entries[j][i]`
/// bit-for-bit, and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    /// Wraps a matrix that is already exactly symmetric.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        Self::validate_shape(&data)?;
        let p = data.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                if data[[i, j]] != data[[j, i]] {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    /// Builds a symmetric matrix by averaging the two triangles.
    pub fn symmetrized(data: Array2<f64>) -> Result<Self> {
        Self::validate_shape(&data)?;
        let p = data.nrows();
        let mut out = data;
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (out[[i, j]] + out[[j, i]]);
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        Ok(Self { data: out })
    }

    fn validate_shape(data: &Array2<f64>) -> Result<()> {
        if data.nrows() == 0 || data.nrows() != data.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix with dim >= 1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(())
    }

    /// Identity matrix of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    /// `value * I` of dimension `dim`.
    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        assert!(dim >= 1, "dim must be >= 1");
        let mut data = Array2::zeros((dim, dim));
        for i in 0..dim {
            data[[i, i]] = value;
        }
        Self { data }
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "dim must be >= 1");
        let p = diag.len();
        let mut data = Array2::zeros((p, p));
        for (i, &v) in diag.iter().enumerate() {
            data[[i, i]] = v;
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Sum of the diagonal entries.
    pub fn trace(&self) -> f64 {
        self.data.diag().sum()
    }

    /// Square root of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Orthonormal eigenvectors and descending eigenvalues of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    /// Pairs an existing orthonormal basis with replacement eigenvalues.
    ///
    /// The caller must keep the descending-order invariant; the eigenvalue
    /// maps in this crate are monotone, so it carries over from the source
    /// spectrum.
    pub(crate) fn with_basis(eigenvalues: Vec<f64>, eigenvectors: Array2<f64>) -> Self {
        debug_assert_eq!(eigenvalues.len(), eigenvectors.nrows());
        debug_assert!(eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        Self {
            eigenvalues: Array1::from(eigenvalues),
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues sorted from largest to smallest.
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Eigenvector matrix; column `i` pairs with eigenvalue `i`.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    /// Ratio of the largest to the smallest eigenvalue.
    pub fn condition_number(&self) -> Result<f64> {
        let p = self.dim();
        let smallest = self.eigenvalues[p - 1];
        if smallest <= 0.0 {
            return Err(Error::Singular(format!(
                "condition number undefined: smallest eigenvalue {smallest} <= 0"
            )));
        }
        Ok(self.eigenvalues[0] / smallest)
    }

    /// Log-determinant, i.e. the sum of log eigenvalues.
    pub fn ln_det(&self) -> Result<f64> {
        if self.eigenvalues[self.dim() - 1] <= 0.0 {
            return Err(Error::Singular(
                "log-determinant undefined for a non-positive spectrum".into(),
            ));
        }
        Ok(self.eigenvalues.iter().map(|e| e.ln()).sum())
    }

    /// Quadratic form `v' M^{-1} v` evaluated through the spectrum.
    pub fn inverse_quadratic_form(&self, v: ArrayView1<'_, f64>) -> Result<f64> {
        if self.eigenvalues[self.dim() - 1] <= 0.0 {
            return Err(Error::Singular(
                "inverse quadratic form undefined for a non-positive spectrum".into(),
            ));
        }
        let proj = self.eigenvectors.t().dot(&v);
        Ok(proj
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(c, e)| c * c / e)
            .sum())
    }

    /// Rebuilds `Q diag(eigenvalues) Q'`.
    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(self.eigenvalues.as_slice().unwrap())
    }

    /// Rebuilds `Q diag(values) Q'` with replacement eigenvalues.
    ///
    /// Each entry is computed once and mirrored, so the result is exactly
    /// symmetric.
    pub fn reconstruct_with(&self, values: &[f64]) -> SymMatrix {
        let p = self.dim();
        assert_eq!(values.len(), p, "eigenvalue count must match dimension");
        let q = &self.eigenvectors;
        let mut out = Array2::zeros((p, p));
        for i in 0..p {
            for j in i..p {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += q[[i, k]] * values[k] * q[[j, k]];
                }
                out[[i, j]] = acc;
                out[[j, i]] = acc;
            }
        }
        SymMatrix { data: out }
    }
}

/// Sample covariance `S = (1/n) sum_j (y_j - ybar)(y_j - ybar)'`.
///
/// The divisor is `n`, not `n - 1`: this is the maximum likelihood
/// estimator the downstream shrinkage rules are derived from.
pub fn sample_covariance(data: ArrayView2<'_, f64>) -> Result<SymMatrix> {
    let (n, p) = data.dim();
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("empty data matrix".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("data has non-finite entries".into()));
    }
    let mean = data.mean_axis(Axis(0)).expect("n >= 1");
    scatter_about(data, |_| mean.view(), n as f64)
}

/// Pooled within-class covariance with divisor `n - c`.
///
/// Each row is centered by its own class mean before the outer products are
/// accumulated.
pub fn pooled_covariance(
    data: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
) -> Result<SymMatrix> {
    let (n, p) = data.dim();
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("empty data matrix".into()));
    }
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "label count {} does not match row count {}",
            labels.len(),
            n
        )));
    }
    if n_classes == 0 || n <= n_classes {
        return Err(Error::InvalidInput(format!(
            "pooled covariance needs n > c, got n = {n}, c = {n_classes}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("data has non-finite entries".into()));
    }
    let mut counts = vec![0usize; n_classes];
    let mut means = Array2::<f64>::zeros((n_classes, p));
    for (row, &label) in data.outer_iter().zip(labels) {
        if label >= n_classes {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        counts[label] += 1;
        let mut m = means.row_mut(label);
        m += &row;
    }
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::InvalidInput(format!("class {k} has no samples")));
        }
        let mut m = means.row_mut(k);
        m /= count as f64;
    }
    scatter_about(data, |i| means.row(labels[i]), (n - n_classes) as f64)
}

/// Accumulates `(1/divisor) sum_i (x_i - center(i))(x_i - center(i))'` in the
/// upper triangle and mirrors it.
fn scatter_about<'a, F>(data: ArrayView2<'_, f64>, center: F, divisor: f64) -> Result<SymMatrix>
where
    F: Fn(usize) -> ArrayView1<'a, f64>,
{
    let (n, p) = data.dim();
    let mut acc = Array2::<f64>::zeros((p, p));
    let mut dev = vec![0.0; p];
    for i in 0..n {
        let row = data.row(i);
        let c = center(i);
        for (d, (x, m)) in dev.iter_mut().zip(row.iter().zip(c.iter())) {
            *d = x - m;
        }
        for a in 0..p {
            let da = dev[a];
            if da == 0.0 {
                continue;
            }
            for b in a..p {
                acc[[a, b]] += da * dev[b];
            }
        }
    }
    let mut out = Array2::zeros((p, p));
    for a in 0..p {
        for b in a..p {
            let v = acc[[a, b]] / divisor;
            out[[a, b]] = v;
            out[[b, a]] = v;
        }
    }
    SymMatrix::new(out)
}

const MAX_JACOBI_SWEEPS: usize = 64;

/// Spectral decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Guarantees on return: eigenvalues non-increasing, eigenvector columns
/// orthonormal to machine precision, and `Q diag(e) Q'` reproduces the input
/// within `1e-8 * (1 + ||input||_F)`.
pub fn eig_sym(m: &SymMatrix) -> Result<SpectralDecomposition> {
    let p = m.dim();
    let mut a = m.data.clone();
    let mut v = Array2::<f64>::eye(p);
    if p > 1 {
        let scale = 1.0 + m.frobenius_norm();
        let target = f64::EPSILON * scale;
        let mut converged = false;
        for sweep in 0..MAX_JACOBI_SWEEPS {
            let off: f64 = off_diagonal_sq(&a).sqrt();
            if off <= target {
                converged = true;
                break;
            }
            for i in 0..p - 1 {
                for j in i + 1..p {
                    rotate(&mut a, &mut v, i, j, sweep);
                }
            }
        }
        if !converged && off_diagonal_sq(&a).sqrt() > target {
            return Err(Error::Numerical(
                "jacobi eigensolver failed to converge".into(),
            ));
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[[y, y]].partial_cmp(&a[[x, x]]).expect("finite"));
    let mut eigenvalues = Array1::zeros(p);
    let mut eigenvectors = Array2::zeros((p, p));
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = a[[src, src]];
        eigenvectors.column_mut(dst).assign(&v.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_sq(a: &Array2<f64>) -> f64 {
    let p = a.nrows();
    let mut acc = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            acc += 2.0 * a[[i, j]] * a[[i, j]];
        }
    }
    acc
}

/// One Jacobi rotation zeroing `a[i][j]`, applied symmetrically to `a` and
/// accumulated into `v`.
fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, i: usize, j: usize, sweep: usize) {
    let p = a.nrows();
    let apq = a[[i, j]];
    if apq == 0.0 {
        return;
    }
    // After a few sweeps, entries negligible against both diagonal values can
    // be flushed to zero outright (they no longer affect the spectrum).
    let g = 100.0 * apq.abs();
    if sweep > 4 && a[[i, i]].abs() + g == a[[i, i]].abs() && a[[j, j]].abs() + g == a[[j, j]].abs()
    {
        a[[i, j]] = 0.0;
        a[[j, i]] = 0.0;
        return;
    }
    let theta = (a[[j, j]] - a[[i, i]]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else if theta >= 0.0 {
        1.0 / (theta + (1.0 + theta * theta).sqrt())
    } else {
        1.0 / (theta - (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    let h = t * apq;
    a[[i, i]] -= h;
    a[[j, j]] += h;
    a[[i, j]] = 0.0;
    a[[j, i]] = 0.0;
    for k in 0..p {
        if k == i || k == j {
            continue;
        }
        let aki = a[[k, i]];
        let akj = a[[k, j]];
        let new_i = aki - s * (akj + tau * aki);
        let new_j = akj + s * (aki - tau * akj);
        a[[k, i]] = new_i;
        a[[i, k]] = new_i;
        a[[k, j]] = new_j;
        a[[j, k]] = new_j;
    }
    for k in 0..p {
        let vki = v[[k, i]];
        let vkj = v[[k, j]];
        v[[k, i]] = vki - s * (vkj + tau * vki);
        v[[k, j]] = vkj + s * (vki - tau * vkj);
    }
}

/// Sum of the absolute eigenvalues; equals the trace for positive
/// semidefinite input.
pub fn nuclear_norm(m: &SymMatrix) -> Result<f64> {
    Ok(eig_sym(m)?.eigenvalues.iter().map(|e| e.abs()).sum())
}
