//! Sketch files and identifier streams.
//!
//! A sketch file is line-oriented text:
//!
//! ```text
//! thetasketch v1
//! tcf=kmv
//! k=128
//! seed=00000000000004d2
//! theta=3fe0000000000000
//! retain_ids=1
//! count=2
//! 0a3f5b7700000000 user%2042
//! 1c00000000000000 bob
//! ```
//!
//! `seed` and the entry hashes are 16 lowercase hex digits; `theta` is the
//! hex bit pattern of the binary64 threshold, so files round-trip exactly.
//! Entries are sorted by raw hash. When identifiers are retained each entry
//! line carries one after a single space, with `%`, space, LF and CR written
//! as `%25`, `%20`, `%0A` and `%0D`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hash::{HashSeed, UnitHash};
use crate::sketch::{Entry, TcfKind, ThetaSketch};

pub const MAGIC: &str = "thetasketch";
pub const VERSION: &str = "v1";

fn escape_id(id: &[u8], out: &mut Vec<u8>) {
    for &b in id {
        match b {
            b'%' | b' ' | b'\n' | b'\r' => {
                out.extend_from_slice(format!("%{b:02X}").as_bytes());
            }
            _ => out.push(b),
        }
    }
}

fn unescape_id(text: &[u8], line: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        if text[i] == b'%' {
            let hex = text
                .get(i + 1..i + 3)
                .and_then(|h| std::str::from_utf8(h).ok())
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: "bad percent escape in identifier".into(),
                })?;
            out.push(hex);
            i += 3;
        } else {
            out.push(text[i]);
            i += 1;
        }
    }
    Ok(out)
}

/// Canonical bytes of `sk`.
pub fn serialize_sketch(sk: &ThetaSketch) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 18 * sk.len());
    let header = format!(
        "{MAGIC} {VERSION}\ntcf={}\nk={}\nseed={:016x}\ntheta={:016x}\nretain_ids={}\ncount={}\n",
        sk.kind().name(),
        sk.k(),
        sk.seed().get(),
        sk.theta().to_bits(),
        u8::from(sk.retains_ids()),
        sk.len()
    );
    out.extend_from_slice(header.as_bytes());
    for e in sk.entries() {
        out.extend_from_slice(format!("{:016x}", e.hash.raw()).as_bytes());
        if let Some(id) = &e.id {
            out.push(b' ');
            escape_id(id, &mut out);
        }
        out.push(b'\n');
    }
    out
}

struct Lines<'a> {
    rest: &'a [u8],
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a [u8]> {
        if self.rest.is_empty() {
            return Err(Error::Parse {
                line: self.line + 1,
                message: "unexpected end of file".into(),
            });
        }
        self.line += 1;
        let end = self.rest.iter().position(|&b| b == b'\n').unwrap_or(self.rest.len());
        let (line, rest) = self.rest.split_at(end);
        self.rest = rest.get(1..).unwrap_or(&[]);
        Ok(line)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        let text = std::str::from_utf8(line).map_err(|_| self.err("header is not UTF-8"))?;
        text.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| self.err(format!("expected `{key}=`")))
    }

    fn hex_field(&mut self, key: &str) -> Result<u64> {
        let v = self.field(key)?;
        parse_hex16(v).ok_or_else(|| self.err(format!("`{key}` needs 16 hex digits")))
    }
}

fn parse_hex16(s: &str) -> Option<u64> {
    (s.len() == 16 && s.bytes().all(|b| b.is_ascii_hexdigit()))
        .then(|| u64::from_str_radix(s, 16).ok())
        .flatten()
}

/// Parse and validate a sketch file.
pub fn deserialize_sketch(bytes: &[u8]) -> Result<ThetaSketch> {
    let mut lines = Lines { rest: bytes, line: 0 };
    let first = lines.next_line()?;
    let first = std::str::from_utf8(first).map_err(|_| lines.err("header is not UTF-8"))?;
    match first.split_once(' ') {
        Some((MAGIC, VERSION)) => {}
        Some((MAGIC, other)) => {
            return Err(lines.err(format!("unsupported version `{other}`")));
        }
        _ => return Err(lines.err("not a theta sketch file")),
    }
    let kind: TcfKind = lines.field("tcf")?.parse().map_err(|e: String| lines.err(e))?;
    let k: usize = lines
        .field("k")?
        .parse()
        .map_err(|_| lines.err("`k` is not an integer"))?;
    let seed = HashSeed(lines.hex_field("seed")?);
    let theta = f64::from_bits(lines.hex_field("theta")?);
    let retains_ids = match lines.field("retain_ids")? {
        "0" => false,
        "1" => true,
        _ => return Err(lines.err("`retain_ids` must be 0 or 1")),
    };
    let count: usize = lines
        .field("count")?
        .parse()
        .map_err(|_| lines.err("`count` is not an integer"))?;

    let mut entries = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let line = lines.next_line()?;
        let (hex, id) = match line.iter().position(|&b| b == b' ') {
            Some(sp) => (&line[..sp], Some(&line[sp + 1..])),
            None => (line, None),
        };
        let raw = std::str::from_utf8(hex)
            .ok()
            .and_then(parse_hex16)
            .ok_or_else(|| lines.err("entry needs a 16 hex digit hash"))?;
        let id = id
            .map(|t| unescape_id(t, lines.line))
            .transpose()?
            .map(Vec::into_boxed_slice);
        entries.push(Entry::new(UnitHash::from_raw(raw), id));
    }
    if !lines.rest.is_empty() {
        return Err(Error::Parse {
            line: lines.line + 1,
            message: format!("trailing data after {count} entries"),
        });
    }
    // Equal neighbours are left for validation to report as duplicates.
    if let Some(pos) = entries.windows(2).position(|w| w[0].hash > w[1].hash) {
        return Err(Error::Parse {
            line: 9 + pos,
            message: "entries are not sorted by hash".into(),
        });
    }
    ThetaSketch::new(kind, k, seed, theta, retains_ids, entries)
}

pub fn write_sketch_file(path: &Path, sk: &ThetaSketch) -> Result<()> {
    std::fs::write(path, serialize_sketch(sk)).map_err(|source| Error::Io {
        path: Some(path.to_owned()),
        source,
    })
}

pub fn read_sketch_file(path: &Path) -> Result<ThetaSketch> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: Some(path.to_owned()),
        source,
    })?;
    deserialize_sketch(&bytes)
}

/// Newline-delimited identifiers; blank lines are skipped, duplicates kept.
/// A trailing CR is stripped so CRLF files read the same as LF files.
pub fn read_stream<R: Read>(source: R) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    for line in BufReader::new(source).split(b'\n') {
        let mut line = line?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        if !line.is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

pub fn read_stream_file(path: &Path) -> Result<Vec<Vec<u8>>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: Some(path.to_owned()),
        source,
    })?;
    read_stream(file)
}

/// Write one identifier per line.
pub fn write_stream<W: Write, B: AsRef<[u8]>>(mut sink: W, ids: &[B]) -> Result<()> {
    for id in ids {
        sink.write_all(id.as_ref())?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}
