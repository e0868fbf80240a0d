//! Linear PCA over latent codes.
//!
//! Latents are standardised per dimension, the covariance of the standardised
//! data is eigendecomposed and the codes are rotated onto the eigenvectors:
//! `V = std(Z) · W`. Components are uncorrelated and ordered by variance, so a
//! single component can be perturbed and pushed back through the decoder.

mod persist;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::neural::{CaeModel, ImageTensor};
use crate::{Error, Result};

pub use persist::{load_pca, save_pca, PcaFile, EIGVECS_FILE, PCA_FILE};

/// Floor applied to per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// `(v − mean) / std`, or 0 for a dimension that was constant when fitted.
pub fn standardize_value(v: f64, mean: f64, std: f64) -> f64 {
    if std <= STD_FLOOR {
        0.0
    } else {
        (v - mean) / std
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    /// `d × d`, one eigenvector per column, ordered like `eigenvalues`.
    pub eigenvectors: Array2<f64>,
    /// Descending, clamped at zero.
    pub eigenvalues: Array1<f64>,
}

/// Column means and (n−1) standard deviations with the [`STD_FLOOR`].
pub fn standardize_stats(z: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = z.nrows() as f64;
    let mean = z.mean_axis(Axis(0)).expect("non-empty rows");
    let std = z
        .axis_iter(Axis(1))
        .zip(mean.iter())
        .map(|(col, m)| {
            let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
            if n > 1.0 {
                (ss / (n - 1.0)).sqrt().max(STD_FLOOR)
            } else {
                1.0
            }
        })
        .collect();
    (mean.to_vec(), std)
}

fn check_finite(z: ArrayView2<f64>) -> Result<()> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite latent values"));
    }
    Ok(())
}

/// Fits PCA on the rows of `z` (`n × d`).
pub fn fit_pca(z: ArrayView2<f64>) -> Result<PcaModel> {
    let (n, d) = z.dim();
    if n < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("PCA needs at least one column"));
    }
    check_finite(z)?;
    let (mean, std) = standardize_stats(z);
    let mean = Array1::from(mean);
    let std = Array1::from(std);
    let x = (&z - &mean) / &std;
    let x = DMatrix::from_row_iterator(n, d, x.iter().copied());
    let denom = (n - 1) as f64;

    let (mut values, mut vectors) = if n > d {
        let cov = (x.transpose() * &x) / denom;
        let eig = SymmetricEigen::new(cov);
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
    } else {
        gram_eigen(&x, denom)
    };

    // descending order, ties broken by original position
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let sorted_vals: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let mut w = Array2::zeros((d, d));
    for (dst, &src) in order.iter().enumerate() {
        let col = vectors.column(src);
        let pivot = (0..d)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
            .unwrap();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            w[[r, dst]] = sign * col[r];
        }
    }
    values.clear();
    vectors = DMatrix::zeros(0, 0);
    drop(vectors);

    Ok(PcaModel {
        mean,
        std,
        eigenvectors: w,
        eigenvalues: Array1::from(sorted_vals),
    })
}

/// Eigenpairs of the covariance via the `n × n` Gram matrix, completed to a
/// full orthonormal basis with zero eigenvalues.
fn gram_eigen(x: &DMatrix<f64>, denom: f64) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = x.shape();
    let gram = (x * x.transpose()) / denom;
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = max * 1e-10 * n.max(d) as f64;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(d);
    let mut values = Vec::with_capacity(d);
    for &i in &idx {
        let lambda = eig.eigenvalues[i];
        if lambda <= tol {
            continue;
        }
        let v = x.transpose() * eig.eigenvectors.column(i) / (denom * lambda).sqrt();
        if let Some(v) = orthonormalize(v, &basis) {
            basis.push(v);
            values.push(lambda);
        }
    }
    for e in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = nalgebra::DVector::zeros(d);
        v[e] = 1.0;
        if let Some(v) = orthonormalize(v, &basis) {
            basis.push(v);
            values.push(0.0);
        }
    }
    (values, DMatrix::from_columns(&basis))
}

/// Two-pass Gram–Schmidt against `basis`; `None` if `v` is (numerically) dependent.
fn orthonormalize(
    mut v: nalgebra::DVector<f64>,
    basis: &[nalgebra::DVector<f64>],
) -> Option<nalgebra::DVector<f64>> {
    let start = v.norm();
    for _ in 0..2 {
        for b in basis {
            let p = b.dot(&v);
            v -= b * p;
        }
    }
    let norm = v.norm();
    (norm > 1e-8 * start.max(1e-300)).then(|| v / norm)
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_width(&self, width: usize, max: bool) -> Result<()> {
        let d = self.dim();
        if (max && width > d) || (!max && width != d) {
            return Err(Error::shape(
                if max { format!("at most {d} columns") } else { format!("{d} columns") },
                width,
            ));
        }
        Ok(())
    }

    pub fn standardize(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(z.ncols(), false)?;
        let mut out = z.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = standardize_value(*v, *m, *sd);
            }
        }
        Ok(out)
    }

    /// `V = std(Z) · W`.
    pub fn project(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.standardize(z)?.dot(&self.eigenvectors))
    }

    /// `Z′ = (V · Wᵀ) ⊙ s + μ`; missing trailing components count as zero.
    pub fn inverse_project(&self, v: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(v.ncols(), true)?;
        let k = v.ncols();
        let w = self.eigenvectors.slice(s![.., ..k]);
        Ok(v.dot(&w.t()) * &self.std + &self.mean)
    }

    /// Projects onto the leading `k` components and back.
    pub fn reconstruct(&self, z: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
        let v = self.project(z)?;
        self.inverse_project(v.slice(s![.., ..k.min(self.dim())]))
    }

    /// Squared reconstruction error of keeping `k` components, measured on the
    /// standardized scale and summed over dimensions, per sample with an
    /// `n − 1` denominator. On the fitting set this equals `Σ_{i>k} λ_i`.
    pub fn truncation_error(&self, z: ArrayView2<f64>, k: usize) -> Result<f64> {
        let x = self.standardize(z)?;
        let xr = self.standardize(self.reconstruct(z, k)?.view())?;
        let n = z.nrows();
        if n < 2 {
            return Err(Error::invalid("need at least 2 rows"));
        }
        Ok((&x - &xr).mapv(|v| v * v).sum() / (n - 1) as f64)
    }

    pub fn explained_variance_ratio(&self) -> Array1<f64> {
        let total = self.eigenvalues.sum();
        if total > 0.0 {
            &self.eigenvalues / total
        } else {
            Array1::zeros(self.dim())
        }
    }

    fn component_index(&self, component: usize) -> Result<usize> {
        if component == 0 || component > self.dim() {
            return Err(Error::invalid(format!(
                "component {component} outside 1..={}",
                self.dim()
            )));
        }
        Ok(component - 1)
    }
}

/// Anything that maps a latent vector to an image.
pub trait LatentDecoder {
    fn latent_dim(&self) -> usize;
    fn decode_latent(&self, z: &[f64]) -> Result<ImageTensor>;
}

impl LatentDecoder for CaeModel {
    fn latent_dim(&self) -> usize {
        CaeModel::latent_dim(self)
    }

    fn decode_latent(&self, z: &[f64]) -> Result<ImageTensor> {
        self.decode(z)
    }
}

/// Inverse-projects one component vector and decodes it.
pub fn decode_components(
    model: &PcaModel,
    decoder: &dyn LatentDecoder,
    values: &[f64],
) -> Result<ImageTensor> {
    if decoder.latent_dim() != model.dim() {
        return Err(Error::shape(
            format!("decoder latent width {}", model.dim()),
            decoder.latent_dim(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite component value"));
    }
    let v = ArrayView2::from_shape((1, values.len()), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let z = model.inverse_project(v)?;
    decoder.decode_latent(z.row(0).as_slice().expect("standard layout"))
}

/// Offsets of a perturbation sweep on `component` (1-based), in component
/// units: `steps` points evenly spaced over `±half_range · √λ_k`.
pub fn sweep_offsets(
    model: &PcaModel,
    component: usize,
    half_range: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let k = model.component_index(component)?;
    if steps == 0 || steps % 2 == 0 {
        return Err(Error::invalid(format!(
            "steps must be odd so the centre is unperturbed, got {steps}"
        )));
    }
    if !(half_range.is_finite() && half_range >= 0.0) {
        return Err(Error::invalid("half_range must be finite and non-negative"));
    }
    let lambda = model.eigenvalues[k];
    if lambda <= 0.0 {
        return Err(Error::ZeroVariance(format!(
            "component {component} has zero eigenvalue; sweep is degenerate"
        )));
    }
    let sigma = lambda.sqrt();
    if steps == 1 {
        return Ok(vec![0.0]);
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| half_range * sigma * (2.0 * i as f64 - last) / last)
        .collect())
}

/// Decodes the mean component vector (all zeros) with one component varied.
pub fn perturb_sweep(
    model: &PcaModel,
    decoder: &dyn LatentDecoder,
    component: usize,
    half_range: f64,
    steps: usize,
) -> Result<Vec<ImageTensor>> {
    let offsets = sweep_offsets(model, component, half_range, steps)?;
    let mut values = vec![0.0; model.dim()];
    offsets
        .into_iter()
        .map(|off| {
            values[component - 1] = off;
            decode_components(model, decoder, &values)
        })
        .collect()
}

/// Row indices of the `count` lowest and highest values of `component`
/// (1-based). Rows are ordered by `(value, row)`; `lowest` is the head of that
/// order and `highest` the tail, listed from the largest value down.
pub fn component_extremes(
    v: ArrayView2<f64>,
    component: usize,
    count: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = v.nrows();
    if n == 0 || v.ncols() == 0 {
        return Err(Error::invalid("empty component matrix"));
    }
    if component == 0 || component > v.ncols() {
        return Err(Error::invalid(format!(
            "component {component} outside 1..={}",
            v.ncols()
        )));
    }
    if count > n / 2 {
        return Err(Error::invalid(format!(
            "count {count} exceeds half the rows ({n})"
        )));
    }
    let col = v.column(component - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
    let lowest = order[..count].to_vec();
    let highest = order[n - count..].iter().rev().copied().collect();
    Ok((lowest, highest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_column_stays_at_zero_on_unseen_rows() {
        let z = array![[1.0, 7.0], [2.0, 7.0], [4.0, 7.0]];
        let m = fit_pca(z.view()).unwrap();
        let s = m.standardize(array![[1.0, 9.0]].view()).unwrap();
        assert_eq!(s[[0, 1]], 0.0);
        let back = m.inverse_project(m.project(z.view()).unwrap().view()).unwrap();
        assert!((&back - &z).iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn perfectly_correlated_pair() {
        let z = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [5.0, 10.0]];
        let m = fit_pca(z.view()).unwrap();
        assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn constant_column_contributes_zero() {
        let z = array![[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]];
        let m = fit_pca(z.view()).unwrap();
        assert!((m.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert_eq!(m.eigenvalues[1], 0.0);
        let v = m.project(z.view()).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_pca(array![[1.0, 2.0]].view()).is_err());
        assert!(fit_pca(array![[1.0, f64::NAN], [0.0, 1.0]].view()).is_err());
    }

    #[test]
    fn mean_row_projects_to_zero() {
        let z = array![[1.0, 0.0, 3.0], [2.0, 1.0, 1.0], [0.0, 4.0, 2.0], [3.0, 3.0, 0.0]];
        let m = fit_pca(z.view()).unwrap();
        let mu = m.mean.clone().insert_axis(Axis(0));
        let v = m.project(mu.view()).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-12));
        let back = m.inverse_project(Array2::zeros((1, 2)).view()).unwrap();
        for (a, b) in back.iter().zip(m.mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(m.inverse_project(Array2::zeros((1, 4)).view()).is_err());
        assert!(m.project(Array2::zeros((1, 2)).view()).is_err());
    }

    #[test]
    fn extremes_basic_and_ties() {
        let v = array![[3.0], [1.0], [2.0]];
        let (lo, hi) = component_extremes(v.view(), 1, 1).unwrap();
        assert_eq!((lo, hi), (vec![1], vec![0]));
        let flat = Array2::from_elem((6, 1), 0.5);
        let (lo, hi) = component_extremes(flat.view(), 1, 2).unwrap();
        assert_eq!(lo, vec![0, 1]);
        assert_eq!(hi, vec![5, 4]);
        assert!(component_extremes(Array2::zeros((0, 1)).view(), 1, 0).is_err());
        assert!(component_extremes(v.view(), 1, 2).is_err());
        assert!(component_extremes(v.view(), 2, 1).is_err());
    }

    #[test]
    fn sweep_grid() {
        let z = array![[0.0, 1.0], [2.0, 0.0], [4.0, 5.0], [1.0, 1.0]];
        let m = fit_pca(z.view()).unwrap();
        let off = sweep_offsets(&m, 1, 3.0, 9).unwrap();
        let sigma = m.eigenvalues[0].sqrt();
        assert_eq!(off.len(), 9);
        assert_eq!(off[4], 0.0);
        for (i, o) in off.iter().enumerate() {
            let expect = -3.0 * sigma + i as f64 * 0.75 * sigma;
            assert!((o - expect).abs() < 1e-12);
        }
        assert!(sweep_offsets(&m, 1, 3.0, 8).is_err());
        assert!(sweep_offsets(&m, 3, 3.0, 9).is_err());
        assert!(sweep_offsets(&m, 0, 3.0, 9).is_err());
    }

    #[test]
    fn zero_eigenvalue_sweep_is_an_error() {
        let z = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let m = fit_pca(z.view()).unwrap();
        assert!(matches!(
            sweep_offsets(&m, 2, 1.0, 3),
            Err(Error::ZeroVariance(_))
        ));
    }
}
