//! Landscape construction from the configured source, including the CSV
//! loader for tabulated fitness data.

use std::fmt;
use std::path::Path;

use actgen_core::blackbox::{
    synthetic_landscape, EhrlichStyleFn, FitnessFn, Motif, SyntheticSpec, TabulatedLandscape,
};
use actgen_core::seq::{SeqSpace, Sequence, Token, Vocabulary};

use crate::config::LandscapeSpec;

#[derive(Debug)]
pub enum LandscapeError {
    Io(std::io::Error),
    /// Malformed CSV content, with the 1-based line number.
    Malformed { line: usize, message: String },
    Core(actgen_core::Error),
}

impl fmt::Display for LandscapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LandscapeError::Io(e) => write!(f, "io error: {e}"),
            LandscapeError::Malformed { line, message } => {
                write!(f, "line {line}: {message}")
            }
            LandscapeError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for LandscapeError {}

impl From<actgen_core::Error> for LandscapeError {
    fn from(e: actgen_core::Error) -> Self {
        LandscapeError::Core(e)
    }
}

/// Parse a `sequence,fitness` CSV into a complete tabulated landscape,
/// filling unlisted sequences with `fill_value`.
pub fn load_landscape(
    path: &Path,
    vocab: &Vocabulary,
    fill_value: f64,
) -> Result<TabulatedLandscape, LandscapeError> {
    let text = std::fs::read_to_string(path).map_err(LandscapeError::Io)?;
    parse_landscape_csv(&text, vocab, fill_value)
}

pub fn parse_landscape_csv(
    text: &str,
    vocab: &Vocabulary,
    fill_value: f64,
) -> Result<TabulatedLandscape, LandscapeError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(LandscapeError::Malformed {
        line: 1,
        message: "empty file".into(),
    })?;
    if header.trim() != "sequence,fitness" {
        return Err(LandscapeError::Malformed {
            line: 1,
            message: format!("expected header 'sequence,fitness', got {:?}", header.trim()),
        });
    }
    let mut rows: Vec<(Sequence, f64)> = Vec::new();
    let mut seq_len: Option<usize> = None;
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (seq_str, fit_str) = line.split_once(',').ok_or(LandscapeError::Malformed {
            line: line_no,
            message: format!("expected 'sequence,fitness', got {line:?}"),
        })?;
        let seq = vocab.encode(seq_str.trim()).map_err(|e| LandscapeError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        match seq_len {
            None => seq_len = Some(seq.len()),
            Some(m) if m != seq.len() => {
                return Err(LandscapeError::Malformed {
                    line: line_no,
                    message: format!("sequence length {} does not match earlier length {m}", seq.len()),
                })
            }
            _ => {}
        }
        let fitness: f64 =
            fit_str.trim().parse().map_err(|_| LandscapeError::Malformed {
                line: line_no,
                message: format!("bad fitness value {:?}", fit_str.trim()),
            })?;
        rows.push((seq, fitness));
    }
    let seq_len = seq_len.ok_or(LandscapeError::Malformed {
        line: 1,
        message: "no data rows".into(),
    })?;
    let space = SeqSpace::new(vocab.size(), seq_len)?;
    Ok(TabulatedLandscape::from_rows(space, rows, fill_value)?)
}

/// A fitness function plus the campaign-level facts derived from it.
pub struct Problem {
    pub fitness: Box<dyn FitnessFn + Send + Sync>,
    pub vocab: Option<Vocabulary>,
    /// Global optimum for regret; the known maximum for closed forms.
    pub y_star: f64,
    /// Tabulated values when the domain is enumerable.
    pub table: Option<TabulatedLandscape>,
}

pub fn build_problem(spec: &LandscapeSpec) -> Result<Problem, LandscapeError> {
    match spec {
        LandscapeSpec::Csv { path, vocab, fill } => {
            let table = load_landscape(path, vocab, *fill)?;
            Ok(Problem {
                y_star: table.max_fitness(),
                fitness: Box::new(table.clone()),
                vocab: Some(vocab.clone()),
                table: Some(table),
            })
        }
        LandscapeSpec::Synthetic { vocab_size, seq_len, seed, epistatic_pairs } => {
            let table = synthetic_landscape(&SyntheticSpec {
                vocab_size: *vocab_size,
                seq_len: *seq_len,
                seed: *seed,
                epistatic_pairs: *epistatic_pairs,
            })?;
            Ok(Problem {
                y_star: table.max_fitness(),
                fitness: Box::new(table.clone()),
                vocab: None,
                table: Some(table),
            })
        }
        LandscapeSpec::Ehrlich { vocab, seq_len, motifs, quantization } => {
            let mut parsed = Vec::new();
            for (pattern, offsets) in motifs {
                let seq = vocab.encode(pattern)?;
                let pattern: Vec<Token> = seq.tokens().to_vec();
                parsed.push(Motif {
                    pattern,
                    offsets: if offsets.is_empty() { None } else { Some(offsets.clone()) },
                });
            }
            let f = EhrlichStyleFn::new(*seq_len, vocab.size(), parsed, *quantization)?;
            Ok(Problem {
                fitness: Box::new(f),
                vocab: Some(vocab.clone()),
                y_star: 1.0,
                table: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let vocab = Vocabulary::from_str("AB").unwrap();
        let text = "sequence,fitness\nAA,0.1\nAB,0.2\nBA,0.3\nBB,0.4\n";
        let t = parse_landscape_csv(text, &vocab, -1.0).unwrap();
        assert_eq!(t.missing_count(), 0);
        let x = vocab.encode("BA").unwrap();
        assert_eq!(t.eval(&x).unwrap(), 0.3);
    }

    #[test]
    fn missing_rows_take_fill() {
        let vocab = Vocabulary::from_str("AB").unwrap();
        let text = "sequence,fitness\nAA,0.1\n";
        let t = parse_landscape_csv(text, &vocab, -1.0).unwrap();
        assert_eq!(t.missing_count(), 3);
        assert_eq!(t.eval(&vocab.encode("BB").unwrap()).unwrap(), -1.0);
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let vocab = Vocabulary::from_str("AB").unwrap();
        let text = "sequence,fitness\nAA,0.1\nABnofitness\n";
        let err = parse_landscape_csv(text, &vocab, -1.0).unwrap_err();
        assert!(err.to_string().starts_with("line 3"), "{err}");

        let text = "sequence,fitness\nAA,xyz\n";
        let err = parse_landscape_csv(text, &vocab, -1.0).unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
    }

    #[test]
    fn inconsistent_length_rejected() {
        let vocab = Vocabulary::from_str("AB").unwrap();
        let text = "sequence,fitness\nAA,0.1\nABA,0.2\n";
        let err = parse_landscape_csv(text, &vocab, -1.0).unwrap_err();
        assert!(err.to_string().contains("length"), "{err}");
    }

    #[test]
    fn duplicate_rows_rejected() {
        let vocab = Vocabulary::from_str("AB").unwrap();
        let text = "sequence,fitness\nAA,0.1\nAA,0.2\n";
        let err = parse_landscape_csv(text, &vocab, -1.0).unwrap_err();
        assert!(err.to_string().contains("duplicate key"), "{err}");
    }

    #[test]
    fn unknown_symbol_rejected() {
        let vocab = Vocabulary::from_str("AB").unwrap();
        let text = "sequence,fitness\nAZ,0.1\n";
        let err = parse_landscape_csv(text, &vocab, -1.0).unwrap_err();
        assert!(err.to_string().contains('Z'), "{err}");
    }
}
