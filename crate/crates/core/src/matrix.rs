//! Sample-by-feature table shared by the reduction, selection and
//! classification stages.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub names: Vec<String>,
    pub labels: Vec<usize>,
    pub sample_ids: Vec<String>,
    pub standardization: Option<Standardizer>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, names: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if values.len() != rows * cols {
            return arg_err(format!("matrix has {} values, expected {rows}x{cols}", values.len()));
        }
        if names.len() != cols {
            return arg_err(format!("{} names for {cols} columns", names.len()));
        }
        if labels.len() != rows {
            return arg_err(format!("{} labels for {rows} rows", labels.len()));
        }
        let sample_ids = (0..rows).map(|i| i.to_string()).collect();
        Ok(Self {
            rows,
            cols,
            values,
            names,
            labels,
            sample_ids,
            standardization: None,
        })
    }

    pub fn with_sample_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.rows {
            return arg_err(format!("{} sample ids for {} rows", ids.len(), self.rows));
        }
        self.sample_ids = ids;
        Ok(self)
    }

    /// Builds a matrix with generated column names `prefix.0`, `prefix.1`, ...
    pub fn from_dmatrix(m: &DMatrix<f64>, prefix: &str, labels: Vec<usize>, sample_ids: Vec<String>) -> Result<Self> {
        let names = (0..m.ncols()).map(|j| format!("{prefix}.{j}")).collect();
        let mut values = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            values.extend(m.row(i).iter());
        }
        Self::new(m.nrows(), m.ncols(), values, names, labels)?.with_sample_ids(sample_ids)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.values[i * self.cols + j])
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            values,
            names: self.names.clone(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            standardization: self.standardization.clone(),
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            values,
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            labels: self.labels.clone(),
            sample_ids: self.sample_ids.clone(),
            standardization: None,
        }
    }

    pub(crate) fn map_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            ..self.clone()
        }
    }
}

/// Per-column z-score statistics fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; 1 for constant columns.
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &FeatureMatrix) -> Result<Self> {
        if m.rows() < 2 {
            return arg_err(format!("standardization needs at least 2 rows, got {}", m.rows()));
        }
        let n = m.rows() as f64;
        let (mut means, mut stds) = (Vec::with_capacity(m.cols()), Vec::with_capacity(m.cols()));
        for j in 0..m.cols() {
            let first = m.get(0, j);
            if m.column(j).all(|v| v == first) {
                means.push(first);
                stds.push(1.0);
                continue;
            }
            let mean = m.column(j).sum::<f64>() / n;
            let var = m.column(j).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means.push(mean);
            stds.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Self { means, stds })
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.cols() != self.means.len() {
            return arg_err(format!(
                "standardizer fitted on {} columns, applied to {}",
                self.means.len(),
                m.cols()
            ));
        }
        let c = m.cols();
        let values = m
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - self.means[k % c]) / self.stds[k % c])
            .collect();
        let mut out = m.map_values(values);
        out.standardization = Some(self.clone());
        Ok(out)
    }
}

/// Fits z-score statistics on `m` and applies them to it.
pub fn standardize_fit_apply(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    Standardizer::fit(m)?.apply(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, v: Vec<f64>) -> FeatureMatrix {
        let names = (0..cols).map(|j| format!("f{j}")).collect();
        FeatureMatrix::new(rows, cols, v, names, vec![0; rows]).unwrap()
    }

    #[test]
    fn zscore_by_hand() {
        let m = mat(3, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let s = standardize_fit_apply(&m).unwrap();
        let z = 1.5f64.sqrt();
        let col0: Vec<f64> = s.column(0).collect();
        assert!((col0[0] + z).abs() < 1e-12 && col0[1].abs() < 1e-15 && (col0[2] - z).abs() < 1e-12);
        assert!(s.column(1).all(|v| v == 0.0));
        assert_eq!(s.standardization.as_ref().unwrap().stds[1], 1.0);
        let again = s.standardization.clone().unwrap().apply(&m).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn needs_two_rows() {
        assert!(standardize_fit_apply(&mat(1, 2, vec![1.0, 2.0])).is_err());
    }

    proptest! {
        #[test]
        fn standardized_columns(v in proptest::collection::vec(-1e3f64..1e3, 24)) {
            let s = standardize_fit_apply(&mat(8, 3, v)).unwrap();
            for j in 0..3 {
                let mean = s.column(j).sum::<f64>() / 8.0;
                let var = s.column(j).map(|x| (x - mean).powi(2)).sum::<f64>() / 8.0;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!(var == 0.0 || (var.sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }
}
