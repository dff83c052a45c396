//! Plain-text matrices.
//!
//! ```text
//! # comments run to the end of a line
//! n m
//! <n x n entries of H>
//! <n x n entries of coupling 1>
//! ...
//! <n x n entries of coupling m>
//! ```
//!
//! Entries are whitespace separated and read row by row; line breaks carry
//! no meaning. An entry is a real number (`1.5`, `-2e-3`), an imaginary
//! number (`0.5i`, `-i`) or both joined by a sign (`1-0.5i`, `2e-3+1e-2i`).
//! The trailing `i` may also be written `j`.

use std::path::{Path, PathBuf};

use nhtopo::linalg::{c64, ComplexMatrix};

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct MatrixFile {
    pub hamiltonian: ComplexMatrix,
    pub couplings: Vec<ComplexMatrix>,
}

impl MatrixFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |line: usize, message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
            let content = line.split('#').next().unwrap_or("");
            content.split_whitespace().map(move |t| (i + 1, t))
        });
        let mut header = |what: &str| -> Result<usize> {
            let (line, token) = tokens.next().ok_or_else(|| fail(1, format!("missing {what} in header")))?;
            token
                .parse()
                .map_err(|_| fail(line, format!("{what} '{token}' is not a non-negative integer")))
        };
        let n = header("dimension")?;
        let m = header("coupling count")?;
        if n == 0 {
            return Err(fail(1, "dimension must be at least 1".into()));
        }
        let mut read_block = |index: usize| -> Result<ComplexMatrix> {
            let mut values = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                let (line, token) = tokens.next().ok_or_else(|| {
                    fail(
                        text.lines().count(),
                        format!("block {index} ended after {} of {} entries", values.len(), n * n),
                    )
                })?;
                values.push(parse_entry(token).ok_or_else(|| fail(line, format!("bad entry '{token}'")))?);
            }
            Ok(ComplexMatrix::from_fn(n, n, |i, j| values[i * n + j]))
        };
        let hamiltonian = read_block(0)?;
        let couplings = (1..=m).map(&mut read_block).collect::<Result<Vec<_>>>()?;
        if let Some((line, token)) = tokens.next() {
            return Err(fail(line, format!("unexpected trailing entry '{token}'")));
        }
        Ok(Self { hamiltonian, couplings })
    }

    pub fn write(&self) -> String {
        let n = self.hamiltonian.nrows();
        let mut out = format!("{n} {}\n", self.couplings.len());
        for block in std::iter::once(&self.hamiltonian).chain(&self.couplings) {
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| format_entry(block[(i, j)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

/// Reads a file holding a single matrix (`m = 0`).
pub fn read_operator(path: &Path) -> Result<ComplexMatrix> {
    let file = MatrixFile::read(path)?;
    if !file.couplings.is_empty() {
        return Err(CliError::Parse {
            path: PathBuf::from(path),
            line: 1,
            message: "operator files must declare 0 couplings".into(),
        });
    }
    Ok(file.hamiltonian)
}

pub fn format_entry(z: c64) -> String {
    format!("{:e}{:+e}i", z.re, z.im)
}

pub fn parse_entry(token: &str) -> Option<c64> {
    let Some(body) = token.strip_suffix(['i', 'j']) else {
        return parse_real(token).map(|re| c64::new(re, 0.0));
    };
    // Split at the last sign that does not belong to an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (parse_real(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => parse_real(s)?,
    };
    Some(c64::new(re, im))
}

fn parse_real(s: &str) -> Option<f64> {
    // `f64::from_str` also accepts "inf" and "nan", which have no place here.
    let value: f64 = s.parse().ok()?;
    value.is_finite().then_some(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_forms() {
        let cases = [
            ("1.5", c64::new(1.5, 0.0)),
            ("-2e-3", c64::new(-2e-3, 0.0)),
            ("0.5i", c64::new(0.0, 0.5)),
            ("-i", c64::new(0.0, -1.0)),
            ("i", c64::new(0.0, 1.0)),
            ("1-0.5i", c64::new(1.0, -0.5)),
            ("2e-3+1e-2i", c64::new(2e-3, 1e-2)),
            ("-1E+2-3E-1j", c64::new(-100.0, -0.3)),
            ("3+i", c64::new(3.0, 1.0)),
        ];
        for (token, expected) in cases {
            assert_eq!(parse_entry(token), Some(expected), "{token}");
        }
        for bad in ["", "x", "1+", "1++2i", "nan", "inf", "1e"] {
            assert_eq!(parse_entry(bad), None, "{bad}");
        }
    }

    #[test]
    fn format_round_trips() {
        for z in [c64::new(0.1, -0.3), c64::new(-1e-300, 7.0), c64::new(0.0, 0.0)] {
            assert_eq!(parse_entry(&format_entry(z)), Some(z));
        }
    }

    #[test]
    fn parses_blocks_and_comments() {
        let text = "# H then one coupling\n2 1\n1 -i\ni -1 # sigma-like\n1 0 0 0\n";
        let file = MatrixFile::parse(text, Path::new("t")).unwrap();
        assert_eq!(file.hamiltonian[(0, 1)], c64::new(0.0, -1.0));
        assert_eq!(file.couplings.len(), 1);
        assert_eq!(file.couplings[0][(0, 0)], c64::new(1.0, 0.0));
        let again = MatrixFile::parse(&file.write(), Path::new("t")).unwrap();
        assert_eq!(again.hamiltonian, file.hamiltonian);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let err = MatrixFile::parse("2 0\n1 0\n0 what\n", Path::new("m.txt")).unwrap_err();
        assert_eq!(err.to_string(), "m.txt:3: bad entry 'what'");
        let short = MatrixFile::parse("2 0\n1 0 0\n", Path::new("m.txt")).unwrap_err();
        assert!(short.to_string().contains("3 of 4"));
        let long = MatrixFile::parse("1 0\n1 2\n", Path::new("m.txt")).unwrap_err();
        assert!(long.to_string().contains("trailing"));
    }
}
