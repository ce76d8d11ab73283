//! Network checkpoint format.
//!
//! A short text header, one `key value...` pair per line and terminated by
//! `end`, followed by every parameter as little-endian `f64`: layer by
//! layer, weights (row-major, `(out, in)`) then biases.
//!
//! ```text
//! mlp-checkpoint 1
//! layer_dims 4 256 256 256 2
//! hidden relu
//! output tanh_scaled 2
//! seed 17
//! params 133890
//! end
//! <params * 8 bytes>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Mlp, OutputActivation};
use crate::error::{Error, Result};

const MAGIC: &str = "mlp-checkpoint 1";

pub fn write_checkpoint<W: Write>(net: &Mlp, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    let dims: Vec<String> = net.dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "layer_dims {}", dims.join(" "))?;
    writeln!(out, "hidden relu")?;
    match net.output_activation() {
        OutputActivation::Identity => writeln!(out, "output identity")?,
        OutputActivation::TanhScaled(b) => writeln!(out, "output tanh_scaled {b}")?,
    }
    writeln!(out, "seed {}", net.seed())?;
    writeln!(out, "params {}", net.num_params())?;
    writeln!(out, "end")?;
    for v in net.to_flat() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<Mlp> {
    let bad = |detail: String| Error::Format {
        what: "checkpoint",
        detail,
    };
    let mut line = String::new();
    let mut next_line = |input: &mut R| -> Result<String> {
        line.clear();
        let n = input.read_line(&mut line).map_err(|e| bad(e.to_string()))?;
        if n == 0 {
            return Err(bad("truncated header".into()));
        }
        Ok(line.trim_end().to_string())
    };

    if next_line(&mut input)? != MAGIC {
        return Err(bad("missing magic line".into()));
    }
    let mut dims: Option<Vec<usize>> = None;
    let mut output: Option<OutputActivation> = None;
    let mut seed = 0u64;
    let mut n_params: Option<usize> = None;
    loop {
        let l = next_line(&mut input)?;
        if l == "end" {
            break;
        }
        let mut parts = l.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        match key {
            "layer_dims" => {
                let parsed: std::result::Result<Vec<usize>, _> =
                    rest.iter().map(|s| s.parse()).collect();
                dims = Some(parsed.map_err(|e| bad(format!("layer_dims: {e}")))?);
            }
            "hidden" => {
                if rest != ["relu"] {
                    return Err(bad(format!("unsupported hidden activation {rest:?}")));
                }
            }
            "output" => {
                output = Some(match rest.as_slice() {
                    ["identity"] => OutputActivation::Identity,
                    ["tanh_scaled", b] => OutputActivation::TanhScaled(
                        b.parse().map_err(|e| bad(format!("output bound: {e}")))?,
                    ),
                    other => return Err(bad(format!("unknown output activation {other:?}"))),
                });
            }
            "seed" => {
                seed = rest
                    .first()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("seed".into()))?;
            }
            "params" => {
                n_params = Some(
                    rest.first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("params".into()))?,
                );
            }
            other => return Err(bad(format!("unknown header key {other:?}"))),
        }
    }
    let dims = dims.ok_or_else(|| bad("missing layer_dims".into()))?;
    let output = output.ok_or_else(|| bad("missing output".into()))?;
    if dims.len() < 2 {
        return Err(bad(format!("layer_dims {dims:?}")));
    }
    let expected: usize = dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
    if n_params != Some(expected) {
        return Err(bad(format!("params {n_params:?} does not match dims ({expected})")));
    }

    let mut read_f64 = || -> Result<f64> {
        let mut buf = [0u8; 8];
        input
            .read_exact(&mut buf)
            .map_err(|e| bad(format!("parameter block: {e}")))?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let mut w = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in * fan_out {
            w.push(read_f64()?);
        }
        let mut b = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            b.push(read_f64()?);
        }
        weights.push(Array2::from_shape_vec((fan_out, fan_in), w).expect("sized above"));
        biases.push(Array1::from_vec(b));
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing).map_err(|e| bad(e.to_string()))? != 0 {
        return Err(bad("trailing bytes after parameter block".into()));
    }
    Ok(Mlp::from_parts(weights, biases, output)?.with_seed(seed))
}

pub fn save_checkpoint(net: &Mlp, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(net, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
