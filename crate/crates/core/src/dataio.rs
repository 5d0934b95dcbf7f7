//! NetFlow CSV ingestion.
//!
//! Records arrive as CSV with a header naming 43 NetFlow v9 features plus a
//! binary label column and an attack-category column. Four endpoint
//! identifier columns (addresses and ports) are carried as opaque strings so
//! they can be dropped before any modelling; everything else must parse as a
//! finite number. Malformed input fails loudly — nothing is imputed or
//! silently skipped.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// The 43 NetFlow v9 feature columns of the flow datasets, in file order.
pub const NETFLOW_V9_FEATURES: [&str; 43] = [
    "IPV4_SRC_ADDR",
    "L4_SRC_PORT",
    "IPV4_DST_ADDR",
    "L4_DST_PORT",
    "PROTOCOL",
    "L7_PROTO",
    "IN_BYTES",
    "IN_PKTS",
    "OUT_BYTES",
    "OUT_PKTS",
    "TCP_FLAGS",
    "CLIENT_TCP_FLAGS",
    "SERVER_TCP_FLAGS",
    "FLOW_DURATION_MILLISECONDS",
    "DURATION_IN",
    "DURATION_OUT",
    "MIN_TTL",
    "MAX_TTL",
    "LONGEST_FLOW_PKT",
    "SHORTEST_FLOW_PKT",
    "MIN_IP_PKT_LEN",
    "MAX_IP_PKT_LEN",
    "SRC_TO_DST_SECOND_BYTES",
    "DST_TO_SRC_SECOND_BYTES",
    "RETRANSMITTED_IN_BYTES",
    "RETRANSMITTED_IN_PKTS",
    "RETRANSMITTED_OUT_BYTES",
    "RETRANSMITTED_OUT_PKTS",
    "SRC_TO_DST_AVG_THROUGHPUT",
    "DST_TO_SRC_AVG_THROUGHPUT",
    "NUM_PKTS_UP_TO_128_BYTES",
    "NUM_PKTS_128_TO_256_BYTES",
    "NUM_PKTS_256_TO_512_BYTES",
    "NUM_PKTS_512_TO_1024_BYTES",
    "NUM_PKTS_1024_TO_1514_BYTES",
    "TCP_WIN_MAX_IN",
    "TCP_WIN_MAX_OUT",
    "ICMP_TYPE",
    "ICMP_IPV4_TYPE",
    "DNS_QUERY_ID",
    "DNS_QUERY_TYPE",
    "DNS_TTL_ANSWER",
    "FTP_COMMAND_RET_CODE",
];

/// Endpoint identifier columns: dropped before modelling so the detector
/// cannot key on who talked to whom.
pub const IDENTIFIER_COLUMNS: [&str; 4] = [
    "IPV4_SRC_ADDR",
    "L4_SRC_PORT",
    "IPV4_DST_ADDR",
    "L4_DST_PORT",
];

/// Column layout of one flow CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSchema {
    /// Ordered feature column names, identifiers included.
    pub feature_names: Vec<String>,
    /// Subset of `feature_names` to strip before modelling.
    pub identifier_names: Vec<String>,
    pub label_column: String,
    pub category_column: String,
    /// Category string that marks benign traffic (label 0).
    pub benign_marker: String,
}

impl FlowSchema {
    /// Schema of the NetFlow v9 flow datasets: 43 features of which 4 are
    /// endpoint identifiers, `Label` in {0,1}, category in `Attack`.
    pub fn netflow_v9() -> Self {
        FlowSchema {
            feature_names: NETFLOW_V9_FEATURES.iter().map(|s| s.to_string()).collect(),
            identifier_names: IDENTIFIER_COLUMNS.iter().map(|s| s.to_string()).collect(),
            label_column: "Label".to_string(),
            category_column: "Attack".to_string(),
            benign_marker: "Benign".to_string(),
        }
    }

    /// Builds an ingestion schema, validating the structural invariants:
    /// no duplicate columns, identifiers are a subset of the features,
    /// exactly 4 identifiers, and exactly 39 retained feature columns.
    pub fn new(
        feature_names: Vec<String>,
        identifier_names: Vec<String>,
        label_column: impl Into<String>,
        category_column: impl Into<String>,
        benign_marker: impl Into<String>,
    ) -> Result<Self> {
        let schema = FlowSchema {
            feature_names,
            identifier_names,
            label_column: label_column.into(),
            category_column: category_column.into(),
            benign_marker: benign_marker.into(),
        };
        schema.validate_structure()?;
        if schema.identifier_names.len() != 4 {
            return Err(Error::invalid(format!(
                "expected 4 identifier columns, got {}",
                schema.identifier_names.len()
            )));
        }
        if schema.retained_count() != 39 {
            return Err(Error::invalid(format!(
                "expected 39 retained feature columns, got {}",
                schema.retained_count()
            )));
        }
        Ok(schema)
    }

    fn validate_structure(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for name in self
            .feature_names
            .iter()
            .chain([&self.label_column, &self.category_column])
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate column name {name}")));
            }
        }
        for id in &self.identifier_names {
            if !self.feature_names.contains(id) {
                return Err(Error::invalid(format!(
                    "identifier column {id} is not a feature column"
                )));
            }
        }
        Ok(())
    }

    /// Feature columns that survive identifier dropping, in order.
    pub fn retained_features(&self) -> Vec<&str> {
        self.feature_names
            .iter()
            .filter(|name| !self.identifier_names.contains(name))
            .map(|s| s.as_str())
            .collect()
    }

    fn retained_count(&self) -> usize {
        self.feature_names.len() - self.identifier_names.len()
    }

    fn all_columns(&self) -> Vec<&str> {
        self.feature_names
            .iter()
            .map(|s| s.as_str())
            .chain([self.label_column.as_str(), self.category_column.as_str()])
            .collect()
    }
}

/// In-memory flow records under a schema.
///
/// Numeric features live in a dense row-major matrix whose columns follow
/// `schema.retained_features()`; identifier values are kept as raw strings
/// until [`drop_identifiers`] removes them.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    pub(crate) schema: FlowSchema,
    pub(crate) identifiers: Vec<Vec<String>>,
    pub(crate) features: Array2<f64>,
    pub(crate) labels: Vec<u8>,
    pub(crate) categories: Vec<String>,
}

impl FlowTable {
    /// Builds an identifier-free table from already-numeric parts. Intended
    /// for synthetic data and tests; file ingestion goes through
    /// [`load_flow_table`].
    pub fn from_parts(
        feature_names: Vec<String>,
        features: Array2<f64>,
        labels: Vec<u8>,
        categories: Vec<String>,
        benign_marker: impl Into<String>,
    ) -> Result<Self> {
        let schema = FlowSchema {
            feature_names,
            identifier_names: Vec::new(),
            label_column: "Label".to_string(),
            category_column: "Attack".to_string(),
            benign_marker: benign_marker.into(),
        };
        schema.validate_structure()?;
        if schema.feature_names.len() != features.ncols() {
            return Err(Error::Dimension {
                context: "feature names vs matrix columns",
                expected: schema.feature_names.len(),
                actual: features.ncols(),
            });
        }
        if features.nrows() != labels.len() || labels.len() != categories.len() {
            return Err(Error::invalid(format!(
                "row count mismatch: {} feature rows, {} labels, {} categories",
                features.nrows(),
                labels.len(),
                categories.len()
            )));
        }
        for (i, (&label, category)) in labels.iter().zip(&categories).enumerate() {
            validate_row_class(label, category, &schema.benign_marker).map_err(|detail| {
                Error::invalid(format!("row {i}: {detail}"))
            })?;
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {v}")));
        }
        Ok(FlowTable {
            schema,
            identifiers: Vec::new(),
            features,
            labels,
            categories,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Number of feature columns the schema currently describes,
    /// identifiers included.
    pub fn feature_count(&self) -> usize {
        self.schema.feature_names.len()
    }

    pub fn schema(&self) -> &FlowSchema {
        &self.schema
    }

    /// Numeric feature matrix (identifier columns are never part of it).
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// New table containing the given rows, in the given order.
    pub(crate) fn select_rows(&self, indices: &[usize]) -> FlowTable {
        FlowTable {
            schema: self.schema.clone(),
            identifiers: if self.identifiers.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.identifiers[i].clone()).collect()
            },
            features: self.features.select(ndarray::Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            categories: indices.iter().map(|&i| self.categories[i].clone()).collect(),
        }
    }
}

fn validate_row_class(
    label: u8,
    category: &str,
    benign_marker: &str,
) -> std::result::Result<(), String> {
    if label > 1 {
        return Err(format!("label {label} is not 0 or 1"));
    }
    let is_benign = category == benign_marker;
    if (label == 0) != is_benign {
        return Err(format!(
            "label {label} is inconsistent with category {category:?} (benign marker {benign_marker:?})"
        ));
    }
    Ok(())
}

/// Loads one CSV file under `schema`.
///
/// The header must contain exactly the schema's columns (as a set — file
/// order may differ). Identifier cells are kept as strings; every other
/// feature cell must parse as a finite number, labels must be 0 or 1, and
/// the label must agree with the category column.
pub fn load_flow_table(path: &Path, schema: &FlowSchema) -> Result<FlowTable> {
    schema.validate_structure().map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| match source.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: match source.into_kind() {
                    csv::ErrorKind::Io(io) => io,
                    _ => unreachable!(),
                },
            },
            _ => Error::Csv {
                path: path.to_path_buf(),
                source,
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let expected: BTreeSet<&str> = schema.all_columns().into_iter().collect();
    let found: BTreeSet<&str> = headers.iter().map(|h| h.as_str()).collect();
    if found.len() != headers.len() {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            detail: "duplicate column names in header".to_string(),
        });
    }
    let missing: Vec<&str> = expected.difference(&found).copied().collect();
    let extra: Vec<&str> = found.difference(&expected).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut detail = String::new();
        if !missing.is_empty() {
            detail.push_str(&format!("missing columns: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            if !detail.is_empty() {
                detail.push_str("; ");
            }
            detail.push_str(&format!("unexpected columns: {}", extra.join(", ")));
        }
        return Err(Error::Schema {
            path: path.to_path_buf(),
            detail,
        });
    }

    let column_index = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let retained = schema.retained_features();
    let retained_idx: Vec<usize> = retained.iter().map(|name| column_index(name)).collect();
    let identifier_idx: Vec<usize> = schema
        .identifier_names
        .iter()
        .map(|name| column_index(name))
        .collect();
    let label_idx = column_index(&schema.label_column);
    let category_idx = column_index(&schema.category_column);

    let mut identifiers = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut categories = Vec::new();

    for (row_number, record) in reader.records().enumerate() {
        let row = row_number + 1; // 1-based data row for error messages
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if record.len() != headers.len() {
            return Err(Error::Cell {
                path: path.to_path_buf(),
                row,
                column: String::new(),
                detail: format!("expected {} cells, found {}", headers.len(), record.len()),
            });
        }
        let cell_error = |column: &str, detail: String| Error::Cell {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            detail,
        };

        for (&idx, &name) in retained_idx.iter().zip(&retained) {
            let raw = record.get(idx).unwrap_or("").trim();
            let value: f64 = raw
                .parse()
                .map_err(|_| cell_error(name, format!("unparseable numeric value {raw:?}")))?;
            if !value.is_finite() {
                return Err(cell_error(name, format!("non-finite value {raw:?}")));
            }
            values.push(value);
        }

        if !identifier_idx.is_empty() {
            identifiers.push(
                identifier_idx
                    .iter()
                    .map(|&idx| record.get(idx).unwrap_or("").to_string())
                    .collect(),
            );
        }

        let raw_label = record.get(label_idx).unwrap_or("").trim();
        let label: u8 = raw_label
            .parse()
            .map_err(|_| cell_error(&schema.label_column, format!("unparseable label {raw_label:?}")))?;
        let category = record.get(category_idx).unwrap_or("").trim().to_string();
        if category.is_empty() {
            return Err(cell_error(&schema.category_column, "missing category".to_string()));
        }
        validate_row_class(label, &category, &schema.benign_marker)
            .map_err(|detail| cell_error(&schema.label_column, detail))?;
        labels.push(label);
        categories.push(category);
    }

    let n_rows = labels.len();
    let features = Array2::from_shape_vec((n_rows, retained.len()), values)
        .expect("row-major feature buffer matches row count");
    Ok(FlowTable {
        schema: schema.clone(),
        identifiers,
        features,
        labels,
        categories,
    })
}

/// Strips the identifier columns from the table, leaving the 39 numeric
/// features. Fails if the table was already stripped. Retained feature
/// values are carried over untouched.
pub fn drop_identifiers(table: FlowTable) -> Result<FlowTable> {
    if table.schema.identifier_names.is_empty() {
        return Err(Error::invalid(
            "identifier columns already dropped from this table",
        ));
    }
    let retained: Vec<String> = table
        .schema
        .retained_features()
        .into_iter()
        .map(|s| s.to_string())
        .collect();
    let mut schema = table.schema;
    schema.feature_names = retained;
    schema.identifier_names = Vec::new();
    Ok(FlowTable {
        schema,
        identifiers: Vec::new(),
        features: table.features,
        labels: table.labels,
        categories: table.categories,
    })
}

/// Counts (benign, attack) rows.
pub fn class_counts(table: &FlowTable) -> (usize, usize) {
    let attack = table.labels.iter().filter(|&&l| l == 1).count();
    (table.labels.len() - attack, attack)
}
