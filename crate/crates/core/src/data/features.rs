//! Feature files (`ZSFV`) and their label sidecars.
//!
//! Layout: magic `ZSFV`, version as `u32` LE, rows and cols as `u64` LE,
//! then `rows × cols` `f32` LE values in row-major order. Labels are UTF-8,
//! one class name per line, line `i` naming row `i`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"ZSFV";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Serializes a matrix. Values are narrowed to `f32`; non-finite values are
/// rejected.
pub fn encode_features(m: &Matrix<f64>) -> Result<Vec<u8>> {
    if let Some((row, col)) = m.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<Matrix<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "feature file has {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::Format("bad magic, expected ZSFV".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!(
            "unsupported feature file version {version}, expected {FEATURE_VERSION}"
        )));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::Format(format!(
            "{rows}x{cols} feature file should be {} bytes, found {}",
            expected.map_or_else(|| "an overflowing number of".to_string(), |n| n.to_string()),
            bytes.len()
        )));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: i / cols,
                col: i % cols,
            });
        }
        data.push(f64::from(v));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_features(path: impl AsRef<Path>, m: &Matrix<f64>) -> Result<()> {
    fs::write(path, encode_features(m)?)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Matrix<f64>> {
    decode_features(&fs::read(path)?)
}

pub fn parse_labels(text: &str) -> Result<Vec<String>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let name = line.strip_suffix('\r').unwrap_or(line);
            if name.is_empty() {
                Err(Error::Format(format!("empty class name on label line {}", i + 1)))
            } else {
                Ok(name.to_string())
            }
        })
        .collect()
}

pub fn format_labels(labels: &[String]) -> Result<String> {
    let mut out = String::new();
    for l in labels {
        if l.is_empty() || l.contains('\n') || l.contains('\r') {
            return Err(Error::Format(format!("class name {l:?} cannot be stored one per line")));
        }
        out.push_str(l);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Format(format!("label file is not UTF-8: {e}")))?;
    parse_labels(&text)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[String]) -> Result<()> {
    fs::write(path, format_labels(labels)?)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRole {
    Sketch,
    Image,
    Database,
}

/// Labelled feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStore {
    pub features: Matrix<f64>,
    pub labels: Vec<String>,
    pub role: FeatureRole,
}

impl FeatureStore {
    pub fn new(features: Matrix<f64>, labels: Vec<String>, role: FeatureRole) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(String::is_empty) {
            return Err(Error::Format(format!("empty class name for row {i}")));
        }
        Ok(Self { features, labels, role })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows whose label satisfies `keep`, in their original order.
    pub fn filter(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.labels[i])).collect();
        Self {
            features: self.features.select_rows(&idx),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            role: self.role,
        }
    }

    pub fn save(&self, features: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<()> {
        write_features(features, &self.features)?;
        write_labels(labels, &self.labels)
    }
}

pub fn load_features(features: impl AsRef<Path>, labels: impl AsRef<Path>, role: FeatureRole) -> Result<FeatureStore> {
    FeatureStore::new(read_features(features)?, read_labels(labels)?, role)
}

/// Sorted distinct class names and the index of each label among them.
pub fn class_index(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let ids = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let vals = [0.0f32, -0.0, 1.5, -3.25e-30, f32::MAX, f32::MIN_POSITIVE / 8.0].map(f64::from);
        let m = Matrix::from_vec(2, 3, vals.to_vec()).unwrap();
        let back = decode_features(&encode_features(&m).unwrap()).unwrap();
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncation_and_bad_headers_are_format_errors() {
        let m = Matrix::from_fn(3, 2, |r, c| (r + c) as f64);
        let bytes = encode_features(&m).unwrap();
        for cut in [0, 3, 10, 23, 24, bytes.len() - 1] {
            assert!(matches!(decode_features(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_features(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_features(&bad), Err(Error::Format(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(decode_features(&extra), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_payload_names_the_row() {
        let m = Matrix::from_fn(3, 2, |_, _| 1.0);
        let mut bytes = encode_features(&m).unwrap();
        let at = HEADER_LEN + 4 * 5;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_features(&bytes), Err(Error::NonFinite { row: 2, col: 1 })));
        let inf = Matrix::from_vec(1, 1, vec![f64::INFINITY]).unwrap();
        assert!(encode_features(&inf).is_err());
    }

    #[test]
    fn labels_round_trip_and_reject_blanks() {
        let labels: Vec<String> = vec!["cat".into(), "hot air balloon".into(), "ünïcode".into()];
        assert_eq!(parse_labels(&format_labels(&labels).unwrap()).unwrap(), labels);
        assert_eq!(parse_labels("a\r\nb\n").unwrap(), vec!["a", "b"]);
        assert!(parse_labels("a\n\nb\n").is_err());
        assert!(format_labels(&["a\nb".to_string()]).is_err());
    }

    #[test]
    fn store_checks_counts() {
        let err = FeatureStore::new(Matrix::zeros(2, 2), vec!["a".into()], FeatureRole::Image).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
    }

    #[test]
    fn class_index_is_sorted() {
        let labels: Vec<String> = ["b", "a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let (classes, ids) = class_index(&labels);
        assert_eq!(classes, vec!["a", "b", "c"]);
        assert_eq!(ids, vec![1, 0, 1, 2]);
    }
}
