//! Observation matrix file formats.
//!
//! CSV: one line per coordinate, comma-separated integer symbols. Blank lines
//! and lines starting with `#` are skipped.
//!
//! Binary: little-endian `u32` header `M, n, K`, then `M·n` symbol bytes in
//! row-major order. Requires `K ≤ 256`.

use std::io::{Read, Write};
use std::path::Path;

use super::ObservationMatrix;
use crate::error::{Error, Result};

const HEADER_LEN: usize = 12;

impl ObservationMatrix {
    /// Parses CSV text. With `k = None` the alphabet is `max symbol + 1`
    /// (at least 2).
    pub fn from_csv(text: &str, k: Option<usize>) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<usize>().map_err(|e| {
                        Error::InvalidObservation(format!("line {}: {tok:?}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let k = k.unwrap_or_else(|| rows.iter().flatten().max().map_or(2, |&y| (y + 1).max(2)));
        ObservationMatrix::new(rows, k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::InvalidObservation(
                "binary file shorter than its header".into(),
            ));
        }
        let field =
            |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        let (m, n, k) = (field(0), field(1), field(2));
        let body = &bytes[HEADER_LEN..];
        if body.len() != m * n {
            return Err(Error::InvalidObservation(format!(
                "header declares {m}x{n} symbols but body has {} bytes",
                body.len()
            )));
        }
        let rows = if n == 0 {
            vec![Vec::new(); m]
        } else {
            body.chunks(n)
                .map(|c| c.iter().map(|&b| b as usize).collect())
                .collect()
        };
        ObservationMatrix::new(rows, k)
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        if self.alphabet_size() > 256 {
            return Err(Error::InvalidObservation(format!(
                "binary format holds at most 256 symbols, alphabet has {}",
                self.alphabet_size()
            )));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + self.num_coordinates() * self.num_samples());
        for v in [
            self.num_coordinates(),
            self.num_samples(),
            self.alphabet_size(),
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for row in self.rows() {
            out.extend(row.iter().map(|&y| y as u8));
        }
        Ok(out)
    }
}

/// Reads a `.csv` file as text, anything else as the binary format.
pub fn read_observations(path: &Path, k: Option<usize>) -> Result<ObservationMatrix> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let obs = if is_csv {
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::InvalidObservation(format!("not UTF-8: {e}")))?;
        ObservationMatrix::from_csv(&text, k)?
    } else {
        ObservationMatrix::from_binary(&bytes)?
    };
    if let Some(k) = k {
        if obs.alphabet_size() != k {
            return Err(Error::DimensionMismatch {
                left: obs.alphabet_size(),
                right: k,
            });
        }
    }
    Ok(obs)
}

pub fn write_csv(path: &Path, obs: &ObservationMatrix) -> Result<()> {
    std::fs::write(path, obs.to_csv())?;
    Ok(())
}

pub fn write_binary(path: &Path, obs: &ObservationMatrix) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&obs.to_binary()?)?;
    Ok(())
}
