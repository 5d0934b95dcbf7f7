//! Dataset preparation: class balancing, train/test splitting, min-max
//! scaling.
//!
//! The pipeline order is fixed: balance the full table, split 70/30, fit the
//! scaler on the training split only, then apply it to both splits. Every
//! step is a pure function of its inputs and a seed.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{class_counts, FlowTable};
use crate::error::{Error, Result};

/// Per-column minima and maxima fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn feature_dim(&self) -> usize {
        self.min.len()
    }

    /// Inverse of the min-max map. Columns that were constant during fitting
    /// (max == min) scale everything to 0, so inversion returns the fitted
    /// minimum — offsets of unseen values on such columns are not
    /// recoverable.
    pub fn unscale(&self, scaled: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if scaled.ncols() != self.feature_dim() {
            return Err(Error::Dimension {
                context: "scaler vs matrix columns",
                expected: self.feature_dim(),
                actual: scaled.ncols(),
            });
        }
        let mut raw = scaled.to_owned();
        for (col, mut column) in raw.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[col], self.max[col]);
            column.mapv_inplace(|v| v * (hi - lo) + lo);
        }
        Ok(raw)
    }
}

/// A scaled, model-ready dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    /// Row-major scaled features; training rows fall in [0, 1] by
    /// construction, test rows may exceed that range.
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub categories: Vec<String>,
    /// The scaler that produced `features`.
    pub scaler: ScalerParams,
}

impl PreparedDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Balances the two classes to the minority count by uniform subsampling of
/// the majority class without replacement, then shuffles the result. Both
/// draws come from one generator seeded with `seed`.
pub fn balance_classes(table: &FlowTable, seed: u64) -> Result<FlowTable> {
    let (benign, attack) = class_counts(table);
    if benign == 0 || attack == 0 {
        let empty = if benign == 0 { "benign" } else { "attack" };
        return Err(Error::invalid(format!(
            "cannot balance: the {empty} class has no rows"
        )));
    }
    let keep = benign.min(attack);

    let mut benign_rows = Vec::with_capacity(benign);
    let mut attack_rows = Vec::with_capacity(attack);
    for (i, &label) in table.labels().iter().enumerate() {
        if label == 0 {
            benign_rows.push(i);
        } else {
            attack_rows.push(i);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subsample = |mut rows: Vec<usize>| {
        if rows.len() > keep {
            rows.shuffle(&mut rng);
            rows.truncate(keep);
        }
        rows
    };
    let mut selected = subsample(benign_rows);
    selected.extend(subsample(attack_rows));
    selected.shuffle(&mut rng);

    Ok(table.select_rows(&selected))
}

/// Caps the table at `cap` rows, keeping the first `cap / 2` rows of each
/// class in their existing order. On a balanced table this preserves exact
/// balance; tables already at or under the per-class quota come back whole.
pub fn subsample_balanced(table: &FlowTable, cap: usize) -> Result<FlowTable> {
    if cap < 2 {
        return Err(Error::invalid(format!(
            "subsample cap must be at least 2, got {cap}"
        )));
    }
    let per_class = cap / 2;
    let mut kept = Vec::with_capacity(per_class * 2);
    let mut counts = [0usize; 2];
    for (index, &label) in table.labels().iter().enumerate() {
        let count = &mut counts[usize::from(label != 0)];
        if *count < per_class {
            *count += 1;
            kept.push(index);
        }
    }
    Ok(table.select_rows(&kept))
}

/// Number of training rows a split of `n` rows produces.
pub fn train_rows(n: usize, train_fraction: f64) -> usize {
    (train_fraction * n as f64).round() as usize
}

/// Splits the table into (train, test) by a seeded shuffle; the first
/// `round(train_fraction * n)` shuffled rows become the training split.
pub fn split_train_test(
    table: &FlowTable,
    train_fraction: f64,
    seed: u64,
) -> Result<(FlowTable, FlowTable)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let cut = train_rows(n, train_fraction);
    Ok((
        table.select_rows(&indices[..cut]),
        table.select_rows(&indices[cut..]),
    ))
}

pub(crate) fn fit_scaler_matrix(features: ArrayView2<'_, f64>) -> Result<ScalerParams> {
    if features.nrows() == 0 {
        return Err(Error::invalid("cannot fit a scaler on an empty table"));
    }
    let mut min = vec![f64::INFINITY; features.ncols()];
    let mut max = vec![f64::NEG_INFINITY; features.ncols()];
    for row in features.rows() {
        for (col, &v) in row.iter().enumerate() {
            min[col] = min[col].min(v);
            max[col] = max[col].max(v);
        }
    }
    Ok(ScalerParams { min, max })
}

pub(crate) fn apply_scaler_matrix(
    scaler: &ScalerParams,
    features: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if features.ncols() != scaler.feature_dim() {
        return Err(Error::Dimension {
            context: "scaler vs matrix columns",
            expected: scaler.feature_dim(),
            actual: features.ncols(),
        });
    }
    let mut scaled = features.to_owned();
    for (col, mut column) in scaled.axis_iter_mut(Axis(1)).enumerate() {
        let (lo, hi) = (scaler.min[col], scaler.max[col]);
        let range = hi - lo;
        if range == 0.0 {
            column.fill(0.0);
        } else {
            column.mapv_inplace(|v| (v - lo) / range);
        }
    }
    Ok(scaled)
}

/// Fits per-column min-max parameters on a training table. The table must
/// already be identifier-free so the scaler dimension matches the model
/// input.
pub fn fit_scaler(train: &FlowTable) -> Result<ScalerParams> {
    if !train.schema().identifier_names.is_empty() {
        return Err(Error::invalid(
            "drop identifier columns before fitting a scaler",
        ));
    }
    fit_scaler_matrix(train.features().view())
}

/// Applies `X* = (X - min) / (max - min)` column-wise. Columns with
/// max == min scale to 0; out-of-range values (from a test split) are
/// transformed by the same affine map, not clamped.
pub fn apply_scaler(scaler: &ScalerParams, table: &FlowTable) -> Result<PreparedDataset> {
    if !table.schema().identifier_names.is_empty() {
        return Err(Error::invalid(
            "drop identifier columns before scaling",
        ));
    }
    let features = apply_scaler_matrix(scaler, table.features().view())?;
    Ok(PreparedDataset {
        features,
        labels: table.labels().to_vec(),
        categories: table.categories().to_vec(),
        scaler: scaler.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::class_counts;
    use ndarray::array;
    use rand::Rng;

    fn table_with_counts(benign: usize, attack: usize) -> FlowTable {
        let n = benign + attack;
        let features = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= benign)).collect();
        let categories = labels
            .iter()
            .map(|&l| if l == 0 { "Benign".into() } else { "DoS".into() })
            .collect();
        FlowTable::from_parts(
            vec!["a".into(), "b".into()],
            features,
            labels,
            categories,
            "Benign",
        )
        .unwrap()
    }

    #[test]
    fn balance_subsamples_majority_to_minority() {
        let table = table_with_counts(100, 40);
        let balanced = balance_classes(&table, 7).unwrap();
        assert_eq!(balanced.n_rows(), 80);
        assert_eq!(class_counts(&balanced), (40, 40));
    }

    #[test]
    fn balance_is_deterministic_and_seed_sensitive() {
        let table = table_with_counts(60, 25);
        let a = balance_classes(&table, 7).unwrap();
        let b = balance_classes(&table, 7).unwrap();
        let c = balance_classes(&table, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn balance_output_rows_come_from_the_input() {
        let table = table_with_counts(30, 50);
        let balanced = balance_classes(&table, 3).unwrap();
        // Feature rows were built unique, so membership is checkable per row.
        for row in balanced.features().rows() {
            let found = table
                .features()
                .rows()
                .into_iter()
                .any(|orig| orig == row);
            assert!(found);
        }
        // No input row may appear twice (sampling is without replacement).
        let mut firsts: Vec<f64> = balanced
            .features()
            .rows()
            .into_iter()
            .map(|r| r[0])
            .collect();
        firsts.sort_by(f64::total_cmp);
        firsts.dedup();
        assert_eq!(firsts.len(), balanced.n_rows());
    }

    #[test]
    fn balance_requires_both_classes() {
        let table = table_with_counts(10, 0);
        let err = balance_classes(&table, 1).unwrap_err();
        assert!(err.to_string().contains("attack"));
    }

    #[test]
    fn subsample_keeps_the_first_rows_of_each_class() {
        let table = balance_classes(&table_with_counts(50, 40), 5).unwrap();
        let capped = subsample_balanced(&table, 20).unwrap();
        assert_eq!(capped.n_rows(), 20);
        assert_eq!(class_counts(&capped), (10, 10));
        // Kept rows are the earliest ten of each class, in table order.
        let mut benign_seen = 0;
        let mut attack_seen = 0;
        let mut expected = Vec::new();
        for (i, &label) in table.labels().iter().enumerate() {
            let count = if label == 0 {
                &mut benign_seen
            } else {
                &mut attack_seen
            };
            if *count < 10 {
                *count += 1;
                expected.push(i);
            }
        }
        for (row, &source) in capped.features().rows().into_iter().zip(&expected) {
            assert_eq!(row, table.features().row(source));
        }
    }

    #[test]
    fn subsample_under_cap_is_identity() {
        let table = table_with_counts(8, 8);
        let capped = subsample_balanced(&table, 100).unwrap();
        assert_eq!(capped, table);
        // An odd cap rounds down to equal per-class quotas.
        let odd = subsample_balanced(&table, 9).unwrap();
        assert_eq!(class_counts(&odd), (4, 4));
        assert!(subsample_balanced(&table, 1).is_err());
    }

    #[test]
    fn split_sizes_follow_rounding() {
        let table = table_with_counts(5, 5);
        let (train, test) = split_train_test(&table, 0.7, 1).unwrap();
        assert_eq!(train.n_rows(), 7);
        assert_eq!(test.n_rows(), 3);
        assert_eq!(train_rows(190_106, 0.7), 133_074);
        assert_eq!(190_106 - train_rows(190_106, 0.7), 57_032);
    }

    #[test]
    fn split_is_a_partition() {
        let table = table_with_counts(40, 23);
        let (train, test) = split_train_test(&table, 0.7, 9).unwrap();
        assert_eq!(train.n_rows() + test.n_rows(), table.n_rows());
        let mut firsts: Vec<f64> = train
            .features()
            .rows()
            .into_iter()
            .chain(test.features().rows())
            .map(|r| r[0])
            .collect();
        firsts.sort_by(f64::total_cmp);
        firsts.dedup();
        assert_eq!(firsts.len(), table.n_rows());
    }

    #[test]
    fn split_full_scale_balanced_count() {
        // Same arithmetic as the flow pipeline at full dataset scale, on a
        // single-column table to keep memory trivial.
        let n = 190_106;
        let features = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let categories = labels
            .iter()
            .map(|&l| if l == 0 { "Benign".into() } else { "DoS".into() })
            .collect();
        let table =
            FlowTable::from_parts(vec!["x".into()], features, labels, categories, "Benign")
                .unwrap();
        let (train, test) = split_train_test(&table, 0.7, 42).unwrap();
        assert_eq!(train.n_rows(), 133_074);
        assert_eq!(test.n_rows(), 57_032);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let table = table_with_counts(2, 2);
        assert!(split_train_test(&table, 0.0, 1).is_err());
        assert!(split_train_test(&table, 1.0, 1).is_err());
        let tiny = table_with_counts(1, 0);
        assert!(split_train_test(&tiny, 0.7, 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let table = table_with_counts(15, 15);
        let (a_train, a_test) = split_train_test(&table, 0.7, 4).unwrap();
        let (b_train, b_test) = split_train_test(&table, 0.7, 4).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
    }

    #[test]
    fn scaler_fits_column_extrema() {
        let table = FlowTable::from_parts(
            vec!["x".into()],
            array![[2.0], [4.0], [6.0]],
            vec![0, 0, 1],
            vec!["Benign".into(), "Benign".into(), "DoS".into()],
            "Benign",
        )
        .unwrap();
        let scaler = fit_scaler(&table).unwrap();
        assert_eq!(scaler.min, vec![2.0]);
        assert_eq!(scaler.max, vec![6.0]);
        let prepared = apply_scaler(&scaler, &table).unwrap();
        assert_eq!(prepared.features, array![[0.0], [0.5], [1.0]]);
    }

    #[test]
    fn scaling_does_not_clamp_out_of_range_values() {
        let scaler = ScalerParams {
            min: vec![0.0],
            max: vec![10.0],
        };
        let table = FlowTable::from_parts(
            vec!["x".into()],
            array![[12.0]],
            vec![1],
            vec!["DoS".into()],
            "Benign",
        )
        .unwrap();
        let prepared = apply_scaler(&scaler, &table).unwrap();
        assert!((prepared.features[[0, 0]] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn constant_columns_scale_to_zero() {
        let table = FlowTable::from_parts(
            vec!["x".into(), "y".into()],
            array![[5.0, 1.0], [5.0, 3.0]],
            vec![0, 1],
            vec!["Benign".into(), "DoS".into()],
            "Benign",
        )
        .unwrap();
        let scaler = fit_scaler(&table).unwrap();
        let prepared = apply_scaler(&scaler, &table).unwrap();
        assert_eq!(prepared.features.column(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(prepared.features.column(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn training_rows_scale_into_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.random_range(2..60);
            let d = rng.random_range(1..8);
            let features = Array2::from_shape_fn((n, d), |_| rng.random_range(-500.0..500.0));
            let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
            let categories = labels
                .iter()
                .map(|&l| if l == 0 { "Benign".into() } else { "DoS".into() })
                .collect();
            let names = (0..d).map(|i| format!("f{i}")).collect();
            let table =
                FlowTable::from_parts(names, features, labels, categories, "Benign").unwrap();
            let scaler = fit_scaler(&table).unwrap();
            let prepared = apply_scaler(&scaler, &table).unwrap();
            for &v in prepared.features.iter() {
                assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn unscale_inverts_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let features = Array2::from_shape_fn((30, 5), |_| rng.random_range(-50.0..50.0));
        let labels: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let categories = labels
            .iter()
            .map(|&l| if l == 0 { "Benign".into() } else { "DoS".into() })
            .collect();
        let names = (0..5).map(|i| format!("f{i}")).collect();
        let table =
            FlowTable::from_parts(names, features.clone(), labels, categories, "Benign").unwrap();
        let scaler = fit_scaler(&table).unwrap();
        let prepared = apply_scaler(&scaler, &table).unwrap();
        let raw = prepared.scaler.unscale(prepared.features.view()).unwrap();
        for (a, b) in raw.iter().zip(features.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn apply_respects_dimension_checks() {
        let scaler = ScalerParams {
            min: vec![0.0, 0.0],
            max: vec![1.0, 1.0],
        };
        let table = FlowTable::from_parts(
            vec!["x".into()],
            array![[0.5]],
            vec![0],
            vec!["Benign".into()],
            "Benign",
        )
        .unwrap();
        assert!(apply_scaler(&scaler, &table).is_err());
    }

    /// Balanced full-dataset row count; only runs against the real file.
    #[test]
    fn full_dataset_balanced_count_when_available() {
        let Ok(path) = std::env::var("NF_UNSW_CSV") else {
            eprintln!("skipping balanced-count check: NF_UNSW_CSV not set");
            return;
        };
        let schema = crate::dataio::FlowSchema::netflow_v9();
        let table = crate::dataio::load_flow_table(std::path::Path::new(&path), &schema).unwrap();
        let balanced = balance_classes(&table, 1).unwrap();
        assert_eq!(balanced.n_rows(), 190_106);
    }
}
