//! Parameter persistence: versioned flat text with shape headers.
//!
//! ```text
//! memrl-params v1
//! kind operation
//! version 3
//! features max_sim mean_sim best_overlap negation bank_empty bias
//! array weights 4 6
//! 0.25 0.0 ... (one row per line)
//! ```
//!
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::io::{BufRead, Write};
use std::path::Path;

use super::answer::{AnswerPolicyParameters, AnswerRule};
use super::operation::OperationPolicyParameters;
use super::PolicyError;

const MAGIC: &str = "memrl-params v1";

fn write_floats<W: Write>(dest: &mut W, row: &[f64]) -> std::io::Result<()> {
    let cells: Vec<String> = row.iter().map(|w| format!("{w:?}")).collect();
    writeln!(dest, "{}", cells.join(" "))
}

pub fn save_operation_params(
    params: &OperationPolicyParameters,
    path: impl AsRef<Path>,
) -> Result<(), PolicyError> {
    let mut dest = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(dest, "{MAGIC}")?;
    writeln!(dest, "kind operation")?;
    writeln!(dest, "version {}", params.version())?;
    writeln!(dest, "features {}", params.feature_names().join(" "))?;
    let f = params.feature_count();
    writeln!(dest, "array weights 4 {f}")?;
    for row in params.weights().chunks(f) {
        write_floats(&mut dest, row)?;
    }
    Ok(())
}

pub fn save_answer_params(
    params: &AnswerPolicyParameters,
    path: impl AsRef<Path>,
) -> Result<(), PolicyError> {
    let mut dest = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(dest, "{MAGIC}")?;
    writeln!(dest, "kind answer")?;
    writeln!(dest, "version {}", params.version())?;
    writeln!(dest, "answer_rule {}", params.answer_rule().as_str())?;
    writeln!(dest, "array selection_weights 1 {}", params.selection_weights().len())?;
    write_floats(&mut dest, params.selection_weights())?;
    Ok(())
}

struct ParamsReader {
    lines: Vec<String>,
    cursor: usize,
}

impl ParamsReader {
    fn open(path: &Path) -> Result<Self, PolicyError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let lines: Vec<String> = file.lines().collect::<Result<_, _>>()?;
        Ok(Self { lines, cursor: 0 })
    }

    fn next_line(&mut self) -> Result<&str, PolicyError> {
        let line = self
            .lines
            .get(self.cursor)
            .ok_or_else(|| PolicyError::ParamsFile("unexpected end of file".into()))?;
        self.cursor += 1;
        Ok(line.trim())
    }

    fn expect_field<'a>(&'a mut self, key: &str) -> Result<&'a str, PolicyError> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .map(str::trim)
            .ok_or_else(|| PolicyError::ParamsFile(format!("expected `{key} ...`, got {line:?}")))
    }

    fn parse_floats(&mut self, expected: usize) -> Result<Vec<f64>, PolicyError> {
        let line = self.next_line()?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| PolicyError::ParamsFile(format!("bad float {t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != expected {
            return Err(PolicyError::ParamsFile(format!(
                "expected {expected} values per row, got {}",
                row.len()
            )));
        }
        Ok(row)
    }

    fn header(&mut self, kind: &str) -> Result<u64, PolicyError> {
        let magic = self.next_line()?;
        if magic != MAGIC {
            return Err(PolicyError::ParamsFile(format!("bad magic {magic:?}")));
        }
        let actual_kind = self.expect_field("kind")?.to_string();
        if actual_kind != kind {
            return Err(PolicyError::ParamsFile(format!(
                "expected kind {kind}, found {actual_kind}"
            )));
        }
        self.expect_field("version")?
            .parse::<u64>()
            .map_err(|e| PolicyError::ParamsFile(format!("bad version: {e}")))
    }

    fn array_shape(&mut self, name: &str) -> Result<(usize, usize), PolicyError> {
        let spec = self.expect_field("array")?;
        let parts: Vec<&str> = spec.split_whitespace().collect();
        match parts.as_slice() {
            [actual, rows, cols] if *actual == name => {
                let rows = rows
                    .parse()
                    .map_err(|e| PolicyError::ParamsFile(format!("bad rows: {e}")))?;
                let cols = cols
                    .parse()
                    .map_err(|e| PolicyError::ParamsFile(format!("bad cols: {e}")))?;
                Ok((rows, cols))
            }
            _ => Err(PolicyError::ParamsFile(format!("expected `array {name} R C`, got {spec:?}"))),
        }
    }
}

pub fn load_operation_params(path: impl AsRef<Path>) -> Result<OperationPolicyParameters, PolicyError> {
    let mut reader = ParamsReader::open(path.as_ref())?;
    let version = reader.header("operation")?;
    let feature_names: Vec<String> =
        reader.expect_field("features")?.split_whitespace().map(str::to_owned).collect();
    let (rows, cols) = reader.array_shape("weights")?;
    if rows != 4 || cols != feature_names.len() {
        return Err(PolicyError::ParamsFile(format!(
            "weights shape {rows}x{cols} does not match 4x{}",
            feature_names.len()
        )));
    }
    let mut weights = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        weights.extend(reader.parse_floats(cols)?);
    }
    OperationPolicyParameters::from_parts(weights, feature_names, version)
}

pub fn load_answer_params(path: impl AsRef<Path>) -> Result<AnswerPolicyParameters, PolicyError> {
    let mut reader = ParamsReader::open(path.as_ref())?;
    let version = reader.header("answer")?;
    let rule = AnswerRule::parse(reader.expect_field("answer_rule")?)?;
    let (rows, cols) = reader.array_shape("selection_weights")?;
    if rows != 1 {
        return Err(PolicyError::ParamsFile("selection_weights must be one row".into()));
    }
    let weights = reader.parse_floats(cols)?;
    AnswerPolicyParameters::from_parts(weights, rule, version)
}
