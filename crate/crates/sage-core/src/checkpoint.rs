//! Weight checkpoint file format.
//!
//! Layout, in order:
//!   1. the line `SAGECKPT v1`
//!   2. one line per tensor: `<name> <dim0> <dim1> ...` (name has no
//!      whitespace; a rank-0 tensor lists no dims)
//!   3. one empty line terminating the manifest
//!   4. the concatenated tensor payloads as little-endian `f64`, in
//!      manifest order, row-major
//!
//! Values are stored as doubles no matter the in-memory scalar type;
//! loading into `f32` rounds.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, CoreResult};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &str = "SAGECKPT v1";

pub fn save_checkpoint<S: Scalar>(
    path: impl AsRef<Path>,
    entries: &[(String, Tensor<S>)],
) -> CoreResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC}")?;
    for (name, t) in entries {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(CoreError::InvalidArgument(format!(
                "checkpoint entry name {name:?} must be non-empty without whitespace"
            )));
        }
        write!(w, "{name}")?;
        for d in t.shape() {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
    }
    writeln!(w)?;
    for (_, t) in entries {
        for v in t.data() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: impl AsRef<Path>) -> CoreResult<Vec<(String, Tensor<S>)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    let payload_start = find_blank_line(&bytes).ok_or_else(|| {
        CoreError::Parse("checkpoint: manifest not terminated by empty line".into())
    })?;
    // Everything up to and including the first newline of the `\n\n` pair is
    // manifest text; the second newline is the blank separator line.
    let header = std::str::from_utf8(&bytes[..payload_start - 1])
        .map_err(|_| CoreError::Parse("checkpoint: manifest is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(CoreError::Parse(format!(
            "checkpoint: missing magic line {MAGIC:?}"
        )));
    }

    let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
    for line in lines {
        let mut parts = line.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| CoreError::Parse("checkpoint: empty manifest line".into()))?;
        let dims = parts
            .map(|p| {
                p.parse::<usize>().map_err(|_| {
                    CoreError::Parse(format!("checkpoint: bad dimension {p:?} for {name}"))
                })
            })
            .collect::<CoreResult<Vec<usize>>>()?;
        shapes.push((name.to_string(), dims));
    }

    let mut payload = &bytes[payload_start..];
    let want: usize = shapes
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum::<usize>()
        * 8;
    if payload.len() != want {
        return Err(CoreError::Parse(format!(
            "checkpoint: payload is {} bytes, manifest wants {want}",
            payload.len()
        )));
    }

    let mut out = Vec::with_capacity(shapes.len());
    for (name, shape) in shapes {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let (chunk, rest) = payload.split_at(8);
            payload = rest;
            data.push(S::of_f64(f64::from_le_bytes(chunk.try_into().unwrap())));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

/// Byte offset just past the first `\n\n`, i.e. where the payload starts.
fn find_blank_line(bytes: &[u8]) -> Option<usize> {
    bytes.windows(2).position(|w| w == b"\n\n").map(|i| i + 2)
}
