//! Plain-text checkpoints of states: `#` header lines followed by
//! `index,re,im` records. Density matrices are flattened column-major.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use super::state::{DensityOperator, QuantumState};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Pure(QuantumState),
    Mixed(DensityOperator),
}

/// Writes `state` with a basis description line.
pub fn write_checkpoint<W: Write>(out: &mut W, basis: &str, state: &Checkpoint) -> std::io::Result<()> {
    let (kind, dim, values): (&str, usize, &[C64]) = match state {
        Checkpoint::Pure(s) => ("pure", s.dim(), s.amplitudes()),
        Checkpoint::Mixed(r) => ("density", r.dim(), r.matrix().as_slice()),
    };
    writeln!(out, "# basis: {basis}")?;
    writeln!(out, "# kind: {kind}")?;
    writeln!(out, "# dim: {dim}")?;
    for (i, z) in values.iter().enumerate() {
        if z.re != 0.0 || z.im != 0.0 {
            writeln!(out, "{i},{:.17e},{:.17e}", z.re, z.im)?;
        }
    }
    Ok(())
}

/// Reads a checkpoint, returning the basis description and the state.
pub fn read_checkpoint<R: BufRead>(input: R) -> Result<(String, Checkpoint)> {
    let mut basis = None;
    let mut kind = None;
    let mut dim = None;
    let mut values: Vec<C64> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::arg(format!("checkpoint read failed: {e}")))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let h = h.trim();
            if let Some(v) = h.strip_prefix("basis:") {
                basis = Some(v.trim().to_string());
            } else if let Some(v) = h.strip_prefix("kind:") {
                kind = Some(v.trim().to_string());
            } else if let Some(v) = h.strip_prefix("dim:") {
                let d: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::arg(format!("line {}: bad dimension", lineno + 1)))?;
                dim = Some(d);
            }
            continue;
        }
        let d = dim.ok_or_else(|| Error::arg("checkpoint records before '# dim:' header"))?;
        let len = match kind.as_deref() {
            Some("pure") => d,
            Some("density") => d * d,
            _ => return Err(Error::arg("checkpoint kind must be 'pure' or 'density'")),
        };
        if values.is_empty() {
            values = vec![C64::new(0.0, 0.0); len];
        }
        let bad = || Error::arg(format!("line {}: expected index,re,im", lineno + 1));
        let mut parts = line.split(',');
        let idx: usize = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let re: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let im: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        if parts.next().is_some() || idx >= len {
            return Err(bad());
        }
        values[idx] = C64::new(re, im);
    }
    let basis = basis.ok_or_else(|| Error::arg("checkpoint lacks '# basis:' header"))?;
    let d = dim.ok_or_else(|| Error::arg("checkpoint lacks '# dim:' header"))?;
    match kind.as_deref() {
        Some("pure") => {
            if values.is_empty() {
                values = vec![C64::new(0.0, 0.0); d];
            }
            Ok((basis, Checkpoint::Pure(QuantumState::from_normalized(values)?)))
        }
        Some("density") => {
            if values.is_empty() {
                values = vec![C64::new(0.0, 0.0); d * d];
            }
            let m = DMatrix::from_column_slice(d, d, &values);
            Ok((basis, Checkpoint::Mixed(DensityOperator::new(m)?)))
        }
        _ => Err(Error::arg("checkpoint kind must be 'pure' or 'density'")),
    }
}
