//! Text dataset formats and model checkpoints.
//!
//! * samples: one configuration per line, whitespace-separated `0`/`1`.
//! * wavefunction: `2^N` lines of `re im`, canonical configuration order.
//! * bases: one basis per line, whitespace-separated gate labels.
//! * checkpoint: a single JSON document carrying a format version and a
//!   SHA-256 digest of its body.
//!
//! Floats are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gates::BasisAssignment;
use crate::metrics::TargetState;
use crate::spin::SampleBatch;
use crate::state::Wavefunction;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Squared-norm deviation above which loading a wavefunction warns.
const NORM_WARNING_THRESHOLD: f64 = 1e-6;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<SampleBatch> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut batch: Option<SampleBatch> = None;
    let mut row = Vec::new();
    for (line_no, line) in records(&text) {
        row.clear();
        for token in line.split_whitespace() {
            match token {
                "0" => row.push(0),
                "1" => row.push(1),
                other => {
                    return Err(parse_error(
                        path,
                        line_no,
                        format!("expected 0 or 1, found {other:?}"),
                    ))
                }
            }
        }
        let b = batch.get_or_insert_with(|| SampleBatch::new(row.len()));
        if row.len() != b.width() {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {} columns, found {}", b.width(), row.len()),
            ));
        }
        b.push_unchecked(&row);
    }
    batch.ok_or_else(|| parse_error(path, 0, "no samples in file"))
}

pub fn save_samples(path: impl AsRef<Path>, samples: &SampleBatch) -> Result<()> {
    let mut out = String::with_capacity(samples.as_flat().len() * 2);
    for row in samples.iter() {
        for (j, &b) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            out.push(if b == 0 { '0' } else { '1' });
        }
        out.push('\n');
    }
    write(path.as_ref(), &out)
}

/// Reads `2^n_qubits` amplitude lines and normalizes them, warning when the
/// stored norm is off by more than `1e-6`.
pub fn load_target_psi(path: impl AsRef<Path>, n_qubits: usize) -> Result<TargetState> {
    let path = path.as_ref();
    let text = read(path)?;
    let expected = 1usize << n_qubits;
    let mut amps = Vec::with_capacity(expected);
    for (line_no, line) in records(&text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected `re im`, found {} fields", fields.len()),
            ));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_error(path, line_no, format!("malformed number {s:?}")))
        };
        amps.push(Complex64::new(parse(fields[0])?, parse(fields[1])?));
    }
    if amps.len() != expected {
        return Err(parse_error(
            path,
            0,
            format!(
                "expected {expected} amplitudes for {n_qubits} qubits, found {}",
                amps.len()
            ),
        ));
    }
    let (state, norm) = TargetState::normalize(n_qubits, amps)?;
    if (norm - 1.0).abs() > NORM_WARNING_THRESHOLD {
        log::warn!(
            "{}: wavefunction squared norm is {norm}; normalized on load",
            path.display()
        );
    }
    Ok(state)
}

/// Infers the qubit count from the number of amplitude lines.
pub fn load_target_psi_auto(path: impl AsRef<Path>) -> Result<TargetState> {
    let path = path.as_ref();
    let lines = records(&read(path)?).count();
    if lines == 0 || !lines.is_power_of_two() {
        return Err(parse_error(
            path,
            0,
            format!("{lines} amplitude lines is not a power of two"),
        ));
    }
    load_target_psi(path, lines.trailing_zeros() as usize)
}

pub fn save_target_psi(path: impl AsRef<Path>, state: &TargetState) -> Result<()> {
    let mut out = String::new();
    for a in state.amplitudes() {
        out.push_str(&format!("{:.16e} {:.16e}\n", a.re, a.im));
    }
    write(path.as_ref(), &out)
}

fn parse_bases_file(path: &Path) -> Result<Vec<BasisAssignment>> {
    let text = read(path)?;
    let mut out: Vec<BasisAssignment> = Vec::new();
    for (line_no, line) in records(&text) {
        let basis: BasisAssignment = line
            .parse()
            .map_err(|e: Error| parse_error(path, line_no, e.to_string()))?;
        if let Some(first) = out.first() {
            if first.len() != basis.len() {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected {} labels, found {}", first.len(), basis.len()),
                ));
            }
        }
        out.push(basis);
    }
    Ok(out)
}

/// Per-sample bases plus the list of distinct bases used in training.
///
/// Labels are resolved against a gate registry only when the bases are used.
pub fn load_bases(
    train_bases_path: impl AsRef<Path>,
    bases_path: impl AsRef<Path>,
    num_samples: usize,
) -> Result<(Vec<BasisAssignment>, Vec<BasisAssignment>)> {
    let train_path = train_bases_path.as_ref();
    let per_sample = parse_bases_file(train_path)?;
    if per_sample.len() != num_samples {
        return Err(parse_error(
            train_path,
            0,
            format!(
                "{} basis records for {num_samples} samples",
                per_sample.len()
            ),
        ));
    }
    let distinct = load_bases_list(bases_path)?;
    if let (Some(a), Some(b)) = (per_sample.first(), distinct.first()) {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "per-sample bases have {} sites but the bases list has {}",
                a.len(),
                b.len()
            )));
        }
    }
    Ok((per_sample, distinct))
}

pub fn load_bases_list(path: impl AsRef<Path>) -> Result<Vec<BasisAssignment>> {
    let path = path.as_ref();
    let list = parse_bases_file(path)?;
    if list.is_empty() {
        return Err(parse_error(path, 0, "no bases in file"));
    }
    Ok(list)
}

pub fn save_bases(path: impl AsRef<Path>, bases: &[BasisAssignment]) -> Result<()> {
    let mut out = String::new();
    for b in bases {
        out.push_str(&b.to_string());
        out.push('\n');
    }
    write(path.as_ref(), &out)
}

/// A trained model plus free-form metadata (metric histories, configuration,
/// RNG description).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: Wavefunction,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    sha256: String,
    body: serde_json::Value,
}

fn digest(body: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(body).expect("JSON values always serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn checkpoint_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: PathBuf::from(path),
        message: message.into(),
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let body = serde_json::to_value(checkpoint)
        .map_err(|e| checkpoint_error(path, format!("serialization failed: {e}")))?;
    let file = CheckpointFile {
        format_version: CHECKPOINT_FORMAT_VERSION,
        sha256: digest(&body),
        body,
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| checkpoint_error(path, format!("serialization failed: {e}")))?;
    text.push('\n');
    write(path, &text)
}

/// Loads and verifies a checkpoint; nothing is returned unless the version,
/// digest and every parameter array check out.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = read(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| checkpoint_error(path, format!("corrupt or truncated file: {e}")))?;
    if file.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(checkpoint_error(
            path,
            format!(
                "unsupported format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                file.format_version
            ),
        ));
    }
    if digest(&file.body) != file.sha256 {
        return Err(checkpoint_error(
            path,
            "integrity check failed: digest mismatch",
        ));
    }
    let checkpoint: Checkpoint = serde_json::from_value(file.body)
        .map_err(|e| checkpoint_error(path, format!("invalid body: {e}")))?;
    if let Some(phase) = checkpoint.model.phase_rbm() {
        if phase.n_visible() != checkpoint.model.n_visible() {
            return Err(checkpoint_error(
                path,
                "phase and amplitude RBMs differ in width",
            ));
        }
    }
    Ok(checkpoint)
}

/// Loads a checkpoint and requires its model kind (`"positive"` or `"complex"`).
pub fn load_checkpoint_as(path: impl AsRef<Path>, kind: &str) -> Result<Checkpoint> {
    let path = path.as_ref();
    let checkpoint = load_checkpoint(path)?;
    if checkpoint.model.kind() != kind {
        return Err(checkpoint_error(
            path,
            format!("holds a {} model, expected {kind}", checkpoint.model.kind()),
        ));
    }
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::RbmParameters;
    use crate::state::PositiveWavefunction;

    #[test]
    fn samples_parse_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        fs::write(&p, "1 0 1 1 0 1 0 0 0 1\n0 0 0 0 0 0 0 0 0 0\n").unwrap();
        let s = load_samples(&p).unwrap();
        assert_eq!(s.row(0), &[1, 0, 1, 1, 0, 1, 0, 0, 0, 1]);
        assert_eq!(s.len(), 2);

        fs::write(&p, "1 0\n2 0\n").unwrap();
        let err = load_samples(&p).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("\"2\""), "{err}");

        fs::write(&p, "1 0\n1 0 1\n").unwrap();
        assert!(matches!(
            load_samples(&p),
            Err(Error::Parse { line: 2, .. })
        ));

        fs::write(&p, "").unwrap();
        assert!(load_samples(&p).is_err());
    }

    #[test]
    fn psi_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("psi.txt");
        fs::write(&p, "0.7071067811865476 0.0\n0.7071067811865476 0.0\n").unwrap();
        let t = load_target_psi(&p, 1).unwrap();
        assert!(t.amplitudes().iter().all(|a| a.im == 0.0));
        assert!((t.probabilities()[0] - 0.5).abs() < 1e-15);
        assert!(load_target_psi(&p, 2).is_err());
        fs::write(&p, "0.5 x\n0.5 0\n").unwrap();
        assert!(matches!(
            load_target_psi(&p, 1),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bases_parse() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train_bases.txt");
        let list = dir.path().join("bases.txt");
        fs::write(&train, "Z Z\nX Z\n").unwrap();
        fs::write(&list, "Z Z\nX Z\nZ X\nY Z\nZ Y\n").unwrap();
        let (per, distinct) = load_bases(&train, &list, 2).unwrap();
        assert_eq!(per[0], BasisAssignment::reference(2));
        assert_eq!(distinct.len(), 5);
        assert!(load_bases(&train, &list, 3).is_err());
        fs::write(&train, "Z Z\nX\n").unwrap();
        assert!(matches!(
            load_bases(&train, &list, 2),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn checkpoint_rejects_tampering_and_kind_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        let model: Wavefunction =
            PositiveWavefunction::new(RbmParameters::zeros(2, 2).unwrap()).into();
        let ck = Checkpoint {
            model,
            metadata: BTreeMap::new(),
        };
        save_checkpoint(&p, &ck).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), ck);
        assert!(load_checkpoint_as(&p, "complex").is_err());
        assert!(load_checkpoint_as(&p, "positive").is_ok());

        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Checkpoint { .. })));

        fs::write(
            &p,
            text.replacen("\"format_version\": 1", "\"format_version\": 9", 1),
        )
        .unwrap();
        let err = load_checkpoint(&p).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }
}
