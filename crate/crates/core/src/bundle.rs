//! Plain-text SPD bundle format.
//!
//! ```text
//! SPDB 1 <d> <N>
//! <label> <v11> <v12> ... <v1d> <v22> ... <vdd>     (N records, upper triangle)
//! ```
//!
//! Values are written with 17 significant digits, so finite doubles survive a
//! save/load round trip bit-exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::classifier::{Label, LabeledGallery};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

pub const MAGIC: &str = "SPDB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SpdBundle {
    pub dim: usize,
    pub labels: Vec<Label>,
    pub matrices: Vec<SpdMatrix>,
}

impl SpdBundle {
    /// Labels must cover `1..=n` with every class present.
    pub fn new(dim: usize, labels: Vec<Label>, matrices: Vec<SpdMatrix>) -> Result<Self> {
        if labels.len() != matrices.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: matrices.len(),
            });
        }
        for (index, m) in matrices.iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::Validation {
                    index,
                    source: Box::new(Error::DimensionMismatch {
                        expected: dim,
                        found: m.dim(),
                    }),
                });
            }
        }
        validate_labels(&labels)?;
        Ok(Self {
            dim,
            labels,
            matrices,
        })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0) as usize
    }

    /// Record indices of each class, `result[k]` holding class `k + 1`.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize - 1].push(i);
        }
        out
    }

    /// Gallery over the given record indices.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledGallery> {
        LabeledGallery::new(
            indices.iter().map(|&i| self.matrices[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn to_gallery(&self) -> Result<LabeledGallery> {
        LabeledGallery::new(self.matrices.clone(), self.labels.clone())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        writeln!(out, "{MAGIC} {VERSION} {} {}", self.dim, self.len())?;
        for (label, m) in self.labels.iter().zip(&self.matrices) {
            line.clear();
            write!(line, "{label}").unwrap();
            let a = m.as_matrix();
            for i in 0..self.dim {
                for j in i..self.dim {
                    write!(line, " {:.16e}", a[(i, j)]).unwrap();
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };

        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != MAGIC {
            return Err(parse_err(
                1,
                format!("expected '{MAGIC} <version> <d> <N>', found '{header}'"),
            ));
        }
        let version: u32 = fields[1]
            .parse()
            .map_err(|_| parse_err(1, format!("bad version '{}'", fields[1])))?;
        if version != VERSION {
            return Err(parse_err(1, format!("unsupported version {version}")));
        }
        let dim: usize = fields[2]
            .parse()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| parse_err(1, format!("bad dimension '{}'", fields[2])))?;
        let count: usize = fields[3]
            .parse()
            .map_err(|_| parse_err(1, format!("bad record count '{}'", fields[3])))?;

        let expected = dim * (dim + 1) / 2;
        let mut labels = Vec::with_capacity(count);
        let mut matrices = Vec::with_capacity(count);
        for (idx, line) in lines {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record = labels.len();
            if record == count {
                return Err(parse_err(
                    line_no,
                    format!("more than the declared {count} records"),
                ));
            }
            let mut tokens = line.split_whitespace();
            let label: Label = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(line_no, format!("record {record}: bad label")))?;
            let values = tokens
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| parse_err(line_no, format!("record {record}: {e}")))?;
            if values.len() != expected {
                return Err(parse_err(
                    line_no,
                    format!(
                        "record {record}: expected {expected} values for d={dim}, found {}",
                        values.len()
                    ),
                ));
            }
            let mut m = DMatrix::zeros(dim, dim);
            let mut it = values.into_iter();
            for i in 0..dim {
                for j in i..dim {
                    let v = it.next().unwrap();
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let spd = SpdMatrix::new(m).map_err(|e| Error::Validation {
                index: record,
                source: Box::new(e),
            })?;
            labels.push(label);
            matrices.push(spd);
        }
        if labels.len() != count {
            return Err(parse_err(
                0,
                format!("declared {count} records, found {}", labels.len()),
            ));
        }
        Self::new(dim, labels, matrices)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn validate_labels(labels: &[Label]) -> Result<()> {
    let Some(&max) = labels.iter().max() else {
        return Ok(());
    };
    let mut seen = vec![false; max as usize];
    for (index, &l) in labels.iter().enumerate() {
        if l == 0 {
            return Err(Error::Validation {
                index,
                source: Box::new(Error::InvalidParameter("labels start at 1".into())),
            });
        }
        seen[l as usize - 1] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidParameter(format!(
            "class {} has no records",
            missing + 1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_spd;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(b: &SpdBundle) -> SpdBundle {
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        SpdBundle::read_from(buf.as_slice()).unwrap()
    }

    #[test]
    fn identity_round_trips() {
        let b = SpdBundle::new(2, vec![1], vec![SpdMatrix::identity(2)]).unwrap();
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "SPDB 1 2 1\n1 1.0000000000000000e0 0.0000000000000000e0 1.0000000000000000e0\n"
        ));
        assert_eq!(round_trip(&b), b);
    }

    #[test]
    fn wrong_value_count_names_the_record() {
        let text = "SPDB 1 2 2\n1 1 0 1\n1 1 0\n";
        match SpdBundle::read_from(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("record 1"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_headers_and_counts() {
        assert!(matches!(
            SpdBundle::read_from("".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            SpdBundle::read_from("SPDX 1 2 1\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            SpdBundle::read_from("SPDB 2 2 1\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            SpdBundle::read_from("SPDB 1 2 2\n1 1 0 1\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            SpdBundle::read_from("SPDB 1 1 1\n1 abc\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn non_spd_record_reports_its_index() {
        let text = "SPDB 1 2 2\n1 1 0 1\n1 1 2 1\n";
        match SpdBundle::read_from(text.as_bytes()) {
            Err(Error::Validation { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_class_rejected() {
        let text = "SPDB 1 1 2\n1 1\n3 2\n";
        assert!(SpdBundle::read_from(text.as_bytes()).is_err());
    }

    #[test]
    fn hundred_random_matrices_round_trip_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let matrices: Vec<_> = (0..100).map(|_| random_spd(&mut rng, 5, 1.0)).collect();
        let labels = (0..100).map(|i| (i % 4 + 1) as Label).collect();
        let b = SpdBundle::new(5, labels, matrices).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.spdb");
        b.save(&path).unwrap();
        let back = SpdBundle::load(&path).unwrap();
        for (x, y) in b.matrices.iter().zip(&back.matrices) {
            for (u, v) in x.as_matrix().iter().zip(y.as_matrix().iter()) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
        assert_eq!(back, b);
    }

    proptest! {
        #[test]
        fn diagonal_bundles_round_trip(diag in proptest::collection::vec(1e-6f64..1e6, 1..6)) {
            let m = SpdMatrix::from_diagonal(&diag).unwrap();
            let b = SpdBundle::new(diag.len(), vec![1], vec![m]).unwrap();
            prop_assert_eq!(round_trip(&b), b);
        }
    }
}
