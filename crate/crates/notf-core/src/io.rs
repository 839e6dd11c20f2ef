//! On-disk formats.
//!
//! Triple files hold sparse tensors: one JSON header line
//! `{"dims":[n1,n2,n3]}` (optionally with per-mode `labels` and
//! `"signed":true`), then one `i j k value` record per non-zero entry,
//! emitted in ascending canonical linear order. Absent entries are zero.
//! Unsigned files reject negative values on both read and write; the signed
//! form exists for sparse error tensors.
//!
//! Factor files hold a triple as three blocks, each a `NAME rows cols`
//! line (`A`, `B`, `C` in order) followed by `rows` lines of `cols` values.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! save followed by load reproduces every tensor and factor bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::tensor::{FactorTriple, Matrix, Mode, Tensor3};

/// Optional per-mode index names carried in a triple-file header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode1: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode2: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode3: Option<Vec<String>>,
}

impl Labels {
    pub fn for_mode(&self, mode: Mode) -> Option<&[String]> {
        match mode {
            Mode::One => self.mode1.as_deref(),
            Mode::Two => self.mode2.as_deref(),
            Mode::Three => self.mode3.as_deref(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mode1.is_none() && self.mode2.is_none() && self.mode3.is_none()
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Serialize, Deserialize)]
struct TripleHeader {
    dims: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Labels>,
    #[serde(default, skip_serializing_if = "is_false")]
    signed: bool,
}

fn check_labels(labels: &Labels, dims: (usize, usize, usize)) -> std::result::Result<(), String> {
    for (mode, len) in [
        (Mode::One, dims.0),
        (Mode::Two, dims.1),
        (Mode::Three, dims.2),
    ] {
        if let Some(names) = labels.for_mode(mode) {
            if names.len() != len {
                return Err(format!(
                    "{} labels for mode {:?} axis of length {}",
                    names.len(),
                    mode,
                    len
                ));
            }
        }
    }
    Ok(())
}

fn write_triples(path: &Path, t: &Tensor3, labels: Option<&Labels>, signed: bool) -> Result<()> {
    if !signed {
        if let Some(v) = t.values().iter().find(|v| **v < 0.0) {
            return Err(Error::Domain(format!(
                "value {v} is negative; use the signed triple format"
            )));
        }
    }
    let labels = labels.filter(|l| !l.is_empty());
    if let Some(l) = labels {
        check_labels(l, t.dims()).map_err(|msg| Error::Parse(ParseError::Header(msg)))?;
    }
    let (n1, n2, n3) = t.dims();
    let header = TripleHeader {
        dims: [n1, n2, n3],
        labels: labels.cloned(),
        signed,
    };
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut w, &header)
        .map_err(|e| Error::Parse(ParseError::Header(e.to_string())))?;
    writeln!(w)?;
    for linear in 0..t.total_entries() {
        let v = t.values()[linear];
        if v != 0.0 {
            let (i, j, k) = t.multi_index(linear);
            writeln!(w, "{i} {j} {k} {v}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a non-negative tensor as an unsigned triple file.
pub fn save_triples(path: &Path, t: &Tensor3, labels: Option<&Labels>) -> Result<()> {
    write_triples(path, t, labels, false)
}

/// Writes a tensor that may hold negative values (header gains
/// `"signed":true`).
pub fn save_triples_signed(path: &Path, t: &Tensor3) -> Result<()> {
    write_triples(path, t, None, true)
}

/// Reads a triple file. Line numbers in errors are 1-based over the whole
/// file, header included.
pub fn load_triples(path: &Path) -> Result<(Tensor3, Option<Labels>)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(l) => l?,
        None => return Err(ParseError::Header("empty file".into()).into()),
    };
    let header: TripleHeader =
        serde_json::from_str(&header_line).map_err(|e| ParseError::Header(e.to_string()))?;
    let [n1, n2, n3] = header.dims;
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(
            ParseError::Header(format!("dims must be positive, got {:?}", header.dims)).into(),
        );
    }
    if let Some(l) = &header.labels {
        check_labels(l, (n1, n2, n3)).map_err(|msg| Error::Parse(ParseError::Header(msg)))?;
    }

    let mut t = Tensor3::zeros((n1, n2, n3));
    let mut seen = vec![false; t.total_entries()];
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ParseError::Malformed {
                line: line_no,
                msg: format!("expected 4 fields, got {}", fields.len()),
            }
            .into());
        }
        let parse_index = |s: &str| -> std::result::Result<usize, ParseError> {
            s.parse().map_err(|_| ParseError::Malformed {
                line: line_no,
                msg: format!("bad index {s:?}"),
            })
        };
        let i = parse_index(fields[0])?;
        let j = parse_index(fields[1])?;
        let k = parse_index(fields[2])?;
        let v: f64 = fields[3].parse().map_err(|_| ParseError::Malformed {
            line: line_no,
            msg: format!("bad value {:?}", fields[3]),
        })?;
        if !v.is_finite() {
            return Err(ParseError::Malformed {
                line: line_no,
                msg: format!("non-finite value {v}"),
            }
            .into());
        }
        if i >= n1 || j >= n2 || k >= n3 {
            return Err(ParseError::IndexOutOfRange {
                line: line_no,
                i,
                j,
                k,
                n1,
                n2,
                n3,
            }
            .into());
        }
        if v < 0.0 && !header.signed {
            return Err(ParseError::NegativeValue {
                line: line_no,
                value: v,
            }
            .into());
        }
        let linear = t.linear_index(i, j, k);
        if seen[linear] {
            return Err(ParseError::DuplicateKey {
                line: line_no,
                i,
                j,
                k,
            }
            .into());
        }
        seen[linear] = true;
        t.set(i, j, k, v);
    }
    Ok((t, header.labels))
}

/// Writes the three factor blocks `A`, `B`, `C`.
pub fn save_factors(path: &Path, f: &FactorTriple) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (name, m) in [("A", &f.a), ("B", &f.b), ("C", &f.c)] {
        writeln!(w, "{name} {} {}", m.nrows(), m.ncols())?;
        for row in m.rows() {
            let text: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", text.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a factor file written by [`save_factors`]. Blank lines are
/// tolerated anywhere between records.
pub fn load_factors(path: &Path) -> Result<FactorTriple> {
    let reader = BufReader::new(fs::File::open(path)?);
    let numbered: Vec<(usize, String)> = reader
        .lines()
        .enumerate()
        .map(|(idx, l)| l.map(|s| (idx + 1, s)))
        .collect::<std::io::Result<_>>()?;
    let mut cursor = numbered.into_iter().filter(|(_, s)| !s.trim().is_empty());

    let mut next_line = |what: &str| -> Result<(usize, String)> {
        cursor.next().ok_or_else(|| {
            ParseError::Malformed {
                line: 0,
                msg: format!("file ended before {what}"),
            }
            .into()
        })
    };

    let mut mats: Vec<(usize, Matrix)> = Vec::with_capacity(3);
    for expected in ["A", "B", "C"] {
        let (line_no, header) = next_line(&format!("{expected} block header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != expected {
            return Err(ParseError::Malformed {
                line: line_no,
                msg: format!("expected {expected:?} block header, got {header:?}"),
            }
            .into());
        }
        let parse_dim = |s: &str| -> std::result::Result<usize, ParseError> {
            s.parse().map_err(|_| ParseError::Malformed {
                line: line_no,
                msg: format!("bad dimension {s:?}"),
            })
        };
        let rows = parse_dim(fields[1])?;
        let cols = parse_dim(fields[2])?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (row_line_no, row) = next_line(&format!("row of block {expected}"))?;
            let vals: Vec<&str> = row.split_whitespace().collect();
            if vals.len() != cols {
                return Err(ParseError::Malformed {
                    line: row_line_no,
                    msg: format!("expected {cols} values, got {}", vals.len()),
                }
                .into());
            }
            for v in vals {
                let v: f64 = v.parse().map_err(|_| ParseError::Malformed {
                    line: row_line_no,
                    msg: format!("bad value {v:?}"),
                })?;
                if !v.is_finite() {
                    return Err(ParseError::Malformed {
                        line: row_line_no,
                        msg: format!("non-finite value {v}"),
                    }
                    .into());
                }
                data.push(v);
            }
        }
        let m = Matrix::from_shape_vec((rows, cols), data).map_err(|e| ParseError::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        mats.push((line_no, m));
    }
    if let Some((line_no, junk)) = cursor.next() {
        return Err(ParseError::Malformed {
            line: line_no,
            msg: format!("unexpected content after factor blocks: {junk:?}"),
        }
        .into());
    }
    let ranks = (mats[0].1.ncols(), mats[1].1.ncols(), mats[2].1.ncols());
    if ranks.0 != ranks.1 || ranks.0 != ranks.2 {
        return Err(ParseError::RankMismatch(format!(
            "A has {} columns, B has {}, C has {}",
            ranks.0, ranks.1, ranks.2
        ))
        .into());
    }
    let mut it = mats.into_iter();
    let a = it.next().unwrap().1;
    let b = it.next().unwrap().1;
    let c = it.next().unwrap().1;
    FactorTriple::new(a, b, c)
}
