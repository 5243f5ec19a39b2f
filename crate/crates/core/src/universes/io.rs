//! Plain-text universe files.
//!
//! ```text
//! acidp-universes 1
//! arms 2 batch 1 count 1
//! universe 1 perceived 1
//! 0.1 0.9
//! 0.8 0.2
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Each `universe`
//! line (id, tag, belief) is followed by `arms` rows of `batch + 1`
//! probabilities.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{MultiUniverse, Universe, UniverseTag, ROW_TOLERANCE};
use crate::error::{Error, Result};

const MAGIC: &str = "acidp-universes";
const VERSION: u32 = 1;

pub fn write_universes<W: Write>(mu: &MultiUniverse, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(
        w,
        "arms {} batch {} count {}",
        mu.arms(),
        mu.batch_size(),
        mu.len()
    )?;
    for (u, p) in mu.universes().iter().zip(mu.belief()) {
        writeln!(w, "universe {} {} {}", u.id(), u.tag(), p)?;
        for k in 0..u.arms() {
            let cells: Vec<String> = u.row(k).iter().map(f64::to_string).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_universes(mu: &MultiUniverse, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_universes(mu, std::io::BufWriter::new(file))
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line_no: usize,
}

impl<R: Read> Lines<R> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next_content(&mut self) -> Result<Option<(usize, String)>> {
        for line in self.inner.by_ref() {
            self.line_no += 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(Some((self.line_no, trimmed.to_owned())));
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_content()?
            .ok_or_else(|| Error::parse(self.line_no + 1, 1, format!("unexpected end of file, expected {what}")))
    }
}

fn field<T: std::str::FromStr>(tokens: &[&str], idx: usize, line: usize, what: &str) -> Result<T> {
    let tok = tokens
        .get(idx)
        .ok_or_else(|| Error::parse(line, idx + 1, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, idx + 1, format!("invalid {what} '{tok}'")))
}

fn keyword(tokens: &[&str], idx: usize, line: usize, word: &str) -> Result<()> {
    if tokens.get(idx) == Some(&word) {
        Ok(())
    } else {
        Err(Error::parse(line, idx + 1, format!("expected '{word}'")))
    }
}

/// Parses a universe file into its universes (tags preserved) and stored
/// beliefs.
pub fn read_universes<R: Read>(reader: R) -> Result<(Vec<Universe>, Vec<f64>)> {
    let mut lines = Lines {
        inner: BufReader::new(reader).lines(),
        line_no: 0,
    };

    let (ln, header) = lines.expect("header")?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    keyword(&toks, 0, ln, MAGIC)?;
    let version: u32 = field(&toks, 1, ln, "version")?;
    if version != VERSION {
        return Err(Error::parse(ln, 2, format!("unsupported version {version}")));
    }

    let (ln, dims) = lines.expect("dimensions")?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    keyword(&toks, 0, ln, "arms")?;
    let k: usize = field(&toks, 1, ln, "arm count")?;
    keyword(&toks, 2, ln, "batch")?;
    let n: u32 = field(&toks, 3, ln, "batch size")?;
    keyword(&toks, 4, ln, "count")?;
    let count: usize = field(&toks, 5, ln, "universe count")?;
    if k == 0 {
        return Err(Error::parse(ln, 2, "arm count must be positive"));
    }
    let width = n as usize + 1;

    let mut universes = Vec::with_capacity(count);
    let mut beliefs = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, head) = lines.expect("universe line")?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        keyword(&toks, 0, ln, "universe")?;
        let _id: u64 = field(&toks, 1, ln, "id")?;
        let tag: UniverseTag = field(&toks, 2, ln, "tag")?;
        let belief: f64 = field(&toks, 3, ln, "belief")?;
        if !(belief >= 0.0 && belief.is_finite()) {
            return Err(Error::parse(ln, 4, "belief must be a non-negative number"));
        }
        let mut q = Vec::with_capacity(k * width);
        for _ in 0..k {
            let (ln, row) = lines.expect("likelihood row")?;
            let toks: Vec<&str> = row.split_whitespace().collect();
            if toks.len() != width {
                return Err(Error::parse(
                    ln,
                    toks.len().min(width) + 1,
                    format!("expected {width} probabilities, found {}", toks.len()),
                ));
            }
            let mut sum = 0.0;
            for c in 0..width {
                let v: f64 = field(&toks, c, ln, "probability")?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::parse(ln, c + 1, "probability must be non-negative"));
                }
                sum += v;
                q.push(v);
            }
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::parse(ln, 1, format!("row not normalized (sums to {sum})")));
            }
        }
        universes.push(Universe::from_flat(tag, k, n, q));
        beliefs.push(belief);
    }
    if let Some((ln, _)) = lines.next_content()? {
        return Err(Error::parse(ln, 1, "trailing content after last universe"));
    }
    Ok((universes, beliefs))
}

/// Loads a saved multi-universe, keeping tags and beliefs.
pub fn load_universes(path: &Path) -> Result<MultiUniverse> {
    let (us, ps) = read_universes(open(path)?)?;
    MultiUniverse::with_weights(us, ps)
}

/// Loads historical universes, retagged as vintage, with their stored
/// beliefs.
pub fn load_vintage(path: &Path) -> Result<Vec<(Universe, f64)>> {
    let (us, ps) = read_universes(open(path)?)?;
    Ok(us
        .into_iter()
        .map(|u| u.with_tag(UniverseTag::Vintage))
        .zip(ps)
        .collect())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
