//! Plain-text encoder checkpoints.
//!
//! ```text
//! rll-encoder 1
//! layer_sizes 20 64 32 16
//! weights 0 64 20
//! <64 rows of 20 values>
//! bias 0 64
//! <64 values>
//! ...
//! ```
//!
//! Values are written in shortest round-trip exponent form, so a loaded
//! checkpoint reproduces the saved parameters bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::write_atomic;
use crate::{Result, RllError};

use super::network::DenseLayer;
use super::EncoderParams;

const MAGIC: &str = "rll-encoder";
const VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:e}").expect("writing to a String");
    }
    s
}

pub fn write_checkpoint(params: &EncoderParams) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    let sizes: Vec<String> = params.layer_sizes().iter().map(usize::to_string).collect();
    out.push_str(&format!("layer_sizes {}\n", sizes.join(" ")));
    for (l, layer) in params.layers.iter().enumerate() {
        out.push_str(&format!("weights {l} {} {}\n", layer.outputs, layer.inputs));
        for row in layer.weights.chunks_exact(layer.inputs) {
            out.push_str(&join(row));
            out.push('\n');
        }
        out.push_str(&format!("bias {l} {}\n", layer.outputs));
        out.push_str(&join(&layer.bias));
        out.push('\n');
    }
    out
}

fn bad(msg: impl Into<String>) -> RllError {
    RllError::Checkpoint(msg.into())
}

fn parse_values(line: Option<&str>, expected: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| bad("unexpected end of file"))?;
    let values = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| bad(format!("bad value {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(bad(format!("expected {expected} values, found {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(bad(format!("non-finite value {v}")));
    }
    Ok(values)
}

fn expect_header(line: Option<&str>, header: &str) -> Result<()> {
    match line {
        Some(l) if l.trim_end() == header => Ok(()),
        Some(l) => Err(bad(format!("expected {header:?}, found {l:?}"))),
        None => Err(bad(format!("expected {header:?}, found end of file"))),
    }
}

pub fn read_checkpoint(text: &str) -> Result<EncoderParams> {
    let mut lines = text.lines();
    expect_header(lines.next(), &format!("{MAGIC} {VERSION}"))?;
    let sizes_line = lines.next().ok_or_else(|| bad("missing layer_sizes"))?;
    let sizes = sizes_line
        .strip_prefix("layer_sizes ")
        .ok_or_else(|| bad("missing layer_sizes"))?
        .split_ascii_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| bad(format!("bad layer size {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(bad(format!("invalid layer_sizes {sizes:?}")));
    }
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for (l, w) in sizes.windows(2).enumerate() {
        let (inputs, outputs) = (w[0], w[1]);
        expect_header(lines.next(), &format!("weights {l} {outputs} {inputs}"))?;
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..outputs {
            weights.extend(parse_values(lines.next(), inputs)?);
        }
        expect_header(lines.next(), &format!("bias {l} {outputs}"))?;
        let bias = parse_values(lines.next(), outputs)?;
        layers.push(DenseLayer {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing content"));
    }
    Ok(EncoderParams { layers })
}

pub fn save_checkpoint(params: &EncoderParams, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), write_checkpoint(params).as_bytes())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EncoderParams> {
    read_checkpoint(&fs::read_to_string(path)?)
}
