//! Feature matrices as CSV with a JSON sidecar.
//!
//! The CSV header is `sample_id,label,<feature names>`; numbers use Rust's
//! shortest round-trip decimal form, so save → load → save is a fixpoint and
//! every value reloads bit-exactly. The sidecar `<file>.meta.json` carries
//! the schema version, class names and producing config hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const FEATURES_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesMeta {
    pub schema_version: u32,
    pub config_hash: String,
    pub class_names: Vec<String>,
    pub rows: usize,
    pub cols: usize,
    /// Samples whose mask fell back to the whole image.
    #[serde(default)]
    pub segmentation_fallbacks: Vec<String>,
    /// Samples with no valid co-occurrence pair in some orientation.
    #[serde(default)]
    pub degenerate_texture: Vec<String>,
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line,
            reason: format!("{other:?}"),
        },
    }
}

pub fn features_to_csv(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Serde(e.to_string());
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend(m.names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for i in 0..m.rows() {
        let mut rec = vec![m.sample_ids[i].clone(), m.labels[i].to_string()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Serde(e.to_string()))
}

pub fn save_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, features_to_csv(m)?).map_err(|e| Error::io(path, e))
}

pub fn features_from_csv(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "label" {
        return Err(Error::Parse {
            line: 1,
            reason: "header must start with sample_id,label and name at least one feature".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let cols = names.len();
    let (mut ids, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols + 2 {
            return Err(Error::Parse {
                line,
                reason: format!("{} cells, header has {}", rec.len(), cols + 2),
            });
        }
        ids.push(rec[0].to_string());
        labels.push(rec[1].parse::<usize>().map_err(|_| Error::Parse {
            line,
            reason: format!("label {:?} is not a class index", &rec[1]),
        })?);
        for (j, cell) in rec.iter().skip(2).enumerate() {
            values.push(cell.parse::<f64>().map_err(|_| Error::Parse {
                line,
                reason: format!("column {:?}: {cell:?} is not a number", names[j]),
            })?);
        }
    }
    FeatureMatrix::new(ids.len(), cols, values, names, labels)?.with_sample_ids(ids)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    features_from_csv(&bytes, path)
}

/// Loads a matrix and requires its header to equal `expected`.
pub fn load_features_with_names(path: &Path, expected: &[String]) -> Result<FeatureMatrix> {
    let m = load_features(path)?;
    if m.names != expected {
        let first = m.names.iter().zip(expected).position(|(a, b)| a != b).unwrap_or(m.names.len().min(expected.len()));
        return Err(Error::DictionaryMismatch(format!(
            "{} has {} feature columns, expected {}; first mismatch at feature {first}: found {:?}, expected {:?}",
            path.display(),
            m.names.len(),
            expected.len(),
            m.names.get(first).map_or("<none>", String::as_str),
            expected.get(first).map_or("<none>", String::as_str),
        )));
    }
    Ok(m)
}

pub fn save_meta(meta: &FeaturesMeta, csv: &Path) -> Result<()> {
    let p = meta_path(csv);
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
}

pub fn load_meta(csv: &Path) -> Result<FeaturesMeta> {
    let p = meta_path(csv);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let meta: FeaturesMeta = serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", p.display())))?;
    if meta.schema_version != FEATURES_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: FEATURES_SCHEMA_VERSION,
            found: meta.schema_version,
        });
    }
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> FeatureMatrix {
        let names = vec!["a".to_string(), "b.c".to_string()];
        FeatureMatrix::new(2, 2, vec![0.1, -0.0, 1e-300, 123456789.125], names, vec![0, 5])
            .unwrap()
            .with_sample_ids(vec!["x/one.png".into(), "y/two, three.png".into()])
            .unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact_fixpoint() {
        let m = sample();
        let bytes = features_to_csv(&m).unwrap();
        let back = features_from_csv(&bytes, Path::new("t.csv")).unwrap();
        assert_eq!(back.sample_ids, m.sample_ids);
        assert_eq!(back.labels, m.labels);
        for (a, b) in back.values().iter().zip(m.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(features_to_csv(&back).unwrap(), bytes);
        assert!(!bytes.contains(&b'\r'));
        assert!(String::from_utf8(bytes).unwrap().starts_with("sample_id,label,a,b.c\n"));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let p = Path::new("t.csv");
        let ragged = b"sample_id,label,a,b\ns0,0,1,2\ns1,0,1,2,3\n";
        assert!(matches!(features_from_csv(ragged, p), Err(Error::Parse { line: 3, .. })));
        let bad = b"sample_id,label,a\ns0,0,abc\n";
        assert!(matches!(features_from_csv(bad, p), Err(Error::Parse { line: 2, .. })));
        let header = b"id,label,a\ns0,0,1\n";
        assert!(matches!(features_from_csv(header, p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn dictionary_and_meta() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("f.csv");
        save_features(&sample(), &p).unwrap();
        assert!(matches!(load_features_with_names(&p, &["a".into()]), Err(Error::DictionaryMismatch(_))));
        let meta = FeaturesMeta {
            schema_version: FEATURES_SCHEMA_VERSION,
            config_hash: "abc".into(),
            class_names: vec!["x".into()],
            rows: 2,
            cols: 2,
            segmentation_fallbacks: vec![],
            degenerate_texture: vec![],
        };
        save_meta(&meta, &p).unwrap();
        assert_eq!(load_meta(&p).unwrap(), meta);
        assert!(meta_path(&p).ends_with("f.csv.meta.json"));
    }

    proptest! {
        #[test]
        fn any_finite_value_roundtrips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let m = FeatureMatrix::new(1, 1, vec![v], vec!["f".into()], vec![0]).unwrap();
            let back = features_from_csv(&features_to_csv(&m).unwrap(), Path::new("t")).unwrap();
            prop_assert_eq!(back.values()[0].to_bits(), v.to_bits());
        }
    }
}
