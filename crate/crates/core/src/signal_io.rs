//! Signal files. Text: one `x re im` triple per line on the grid
//! `x_m = -1/2 + m/N`. Binary: `OSCS`, u32 version, u64 N, then N pairs of
//! little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::transform::Signal;

pub const MAGIC: &[u8; 4] = b"OSCS";
pub const VERSION: u32 = 1;
/// Allowed deviation of a text abscissa from its grid node.
pub const GRID_TOL: f64 = 1e-9;

pub fn to_text(sig: &Signal) -> String {
    let mut out = String::with_capacity(sig.len() * 64);
    for (m, v) in sig.values.iter().enumerate() {
        out.push_str(&format!("{:.17e} {:.17e} {:.17e}\n", sig.x(m), v.re, v.im));
    }
    out
}

pub fn parse_text(text: &str) -> Result<Signal> {
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: idx + 1, message };
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if nums.len() != 3 {
            return Err(err(format!("expected `x re im`, found {} fields", nums.len())));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        xs.push((idx + 1, nums[0]));
        values.push(Complex64::new(nums[1], nums[2]));
    }
    if values.is_empty() {
        return Err(Error::Parse { line: 0, message: "signal file has no samples".into() });
    }
    let n = values.len();
    for (m, (line, x)) in xs.iter().enumerate() {
        let expect = -0.5 + m as f64 / n as f64;
        if (x - expect).abs() > GRID_TOL {
            return Err(Error::Parse {
                line: *line,
                message: format!("abscissa {x} is off the uniform grid; expected {expect} for N = {n}"),
            });
        }
    }
    Ok(Signal::new(values))
}

pub fn to_binary(sig: &Signal) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 16 * sig.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sig.len() as u64).to_le_bytes());
    for v in &sig.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn parse_binary(mut bytes: &[u8]) -> Result<Signal> {
    let bad = |m: &str| Error::Parse { line: 0, message: m.to_string() };
    let mut head = [0u8; 16];
    bytes.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
    if &head[0..4] != MAGIC {
        return Err(bad("missing OSCS magic"));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 16 * n {
        return Err(bad(&format!("expected {} payload bytes for N = {n}, found {}", 16 * n, bytes.len())));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..16].try_into().expect("8 bytes")),
            )
        })
        .collect();
    Ok(Signal::new(values))
}

/// Reads either format, sniffing the magic.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        parse_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse { line: 0, message: "signal file is neither OSCS nor UTF-8 text".into() })?;
        parse_text(&text)
    }
}

pub fn write_signal(path: &Path, sig: &Signal, binary: bool) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    if binary {
        f.write_all(&to_binary(sig))?;
    } else {
        f.write_all(to_text(sig).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Signal {
        Signal::from_fn(16, |x| Complex64::new(x.cos(), (3.0 * x).sin()))
    }

    #[test]
    fn round_trips() {
        let s = sample();
        assert_eq!(parse_binary(&to_binary(&s)).unwrap(), s);
        let t = parse_text(&to_text(&s)).unwrap();
        assert!(t.values.iter().zip(&s.values).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(parse_text("-0.5 1 0\n0.1 1 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_text("-0.5 1\n"), Err(Error::Parse { line: 1, .. })));
        let mut b = to_binary(&sample());
        b.pop();
        assert!(parse_binary(&b).is_err());
        b[0] = b'X';
        assert!(parse_binary(&b).is_err());
    }
}
