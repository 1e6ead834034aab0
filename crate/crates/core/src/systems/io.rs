//! Newline-delimited integer dumps for paths and symbol sequences.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub fn write_integers<W: Write, T: std::fmt::Display>(mut out: W, values: &[T]) -> Result<()> {
    for v in values {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_integers<B: BufRead>(input: B) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(
            t.parse()
                .map_err(|e| Error::Config(format!("line {}: {e}: {t:?}", i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_integers(&mut buf, &[3i64, -1, 0]).unwrap();
        assert_eq!(buf, b"3\n-1\n0\n");
        assert_eq!(read_integers(&buf[..]).unwrap(), vec![3, -1, 0]);
        assert!(read_integers(&b"1\nx\n"[..]).is_err());
    }
}
