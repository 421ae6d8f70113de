//! Plain-text field files.
//!
//! ```text
//! RLWFIELD v1
//! <dim> <n_x> [<n_y>] <a_x> <b_x> [<a_y> <b_y>] <t>
//! <value>            one per line, row-major (y fastest)
//! ```
//!
//! Values are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::schemes::{Observer, SchemeState};

const MAGIC: &str = "RLWFIELD v1";

pub fn write_field(path: &Path, field: &Field, t: f64) -> Result<()> {
    let grid = field.grid();
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{MAGIC}")?;
    let mut header = vec![grid.dim().to_string()];
    header.extend(grid.n().iter().map(|n| n.to_string()));
    for (a, b) in grid.bounds() {
        header.push(format!("{a:e}"));
        header.push(format!("{b:e}"));
    }
    header.push(format!("{t:e}"));
    writeln!(out, "{}", header.join(" "))?;
    for v in field.values() {
        writeln!(out, "{v:e}")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

/// Reads a field file, returning the field on a freshly built grid and its time.
pub fn read_field(path: &Path) -> Result<(Field, f64)> {
    parse_field(&fs::read_to_string(path)?)
}

pub fn parse_field(text: &str) -> Result<(Field, f64)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((n, other)) => return Err(parse_err(n, format!("expected '{MAGIC}', found '{other}'"))),
        None => return Err(parse_err(1, "empty file")),
    }
    let (hl, header) = lines.next().ok_or_else(|| parse_err(2, "missing header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let dim: usize = parse_num(toks.first().copied().unwrap_or(""), hl, "dimension")?;
    if dim != 1 && dim != 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let expected = dim + 2 * dim + 2;
    if toks.len() != expected {
        return Err(parse_err(
            hl,
            format!("{dim}D header needs {expected} entries, found {}", toks.len()),
        ));
    }
    let n: Vec<usize> = toks[1..=dim]
        .iter()
        .map(|t| parse_num(t, hl, "node count"))
        .collect::<Result<_>>()?;
    let ends: Vec<f64> = toks[dim + 1..=3 * dim]
        .iter()
        .map(|t| parse_num(t, hl, "bound"))
        .collect::<Result<_>>()?;
    let bounds: Vec<(f64, f64)> = ends.chunks(2).map(|c| (c[0], c[1])).collect();
    let t: f64 = parse_num(toks[3 * dim + 1], hl, "time")?;
    let grid = PeriodicGrid::new(&bounds, &n).map_err(|e| parse_err(hl, e.to_string()))?;

    let mut values = Vec::with_capacity(grid.len());
    let mut last = hl;
    for (ln, l) in lines {
        if l.is_empty() {
            continue;
        }
        if values.len() == grid.len() {
            return Err(parse_err(ln, format!("more than {} values", grid.len())));
        }
        let v: f64 = parse_num(l, ln, "value")?;
        if !v.is_finite() {
            return Err(parse_err(ln, "non-finite value"));
        }
        values.push(v);
        last = ln;
    }
    if values.len() != grid.len() {
        return Err(parse_err(
            last + 1,
            format!("expected {} values, found {} (missing {})", grid.len(), values.len(), grid.len() - values.len()),
        ));
    }
    Ok((Field::from_values(&grid, values)?, t))
}

/// Writes `u` (and `q` when present) to numbered files at a fixed step
/// stride or at prescribed times.
#[derive(Debug, Clone)]
pub struct SnapshotWriter {
    dir: PathBuf,
    prefix: String,
    stride: usize,
    times: Option<Vec<f64>>,
    pub written: Vec<PathBuf>,
}

impl SnapshotWriter {
    pub fn every(dir: &Path, prefix: &str, stride: usize) -> Self {
        SnapshotWriter {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            stride: stride.max(1),
            times: None,
            written: Vec::new(),
        }
    }

    pub fn at_times(dir: &Path, prefix: &str, times: &[f64]) -> Self {
        SnapshotWriter {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            stride: 1,
            times: Some(times.to_vec()),
            written: Vec::new(),
        }
    }
}

impl Observer for SnapshotWriter {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, state: &SchemeState) -> Result<()> {
        let t = state.t();
        if let Some(times) = &self.times {
            let half = 0.5 * state.tau();
            if !times.iter().any(|s| (s - t).abs() < half) {
                return Ok(());
            }
        }
        let stem = format!("{}_{:08}", self.prefix, state.steps());
        let path = self.dir.join(format!("{stem}_u.txt"));
        if self.written.last() == Some(&path) {
            return Ok(());
        }
        write_field(&path, state.u(), t)?;
        if let Some(q) = state.q() {
            write_field(&self.dir.join(format!("{stem}_q.txt")), q, t)?;
        }
        self.written.push(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_2d() -> std::sync::Arc<PeriodicGrid> {
        PeriodicGrid::new_2d((0.0, 1.5), (-2.0, 3.0), 8, 10).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        let g = grid_2d();
        let u = Field::from_fn(&g, |x, y| (x * 1.1).sin() / 3.0 + y.exp() * 1e-17);
        write_field(&path, &u, 0.1 + 0.2).unwrap();
        let (v, t) = read_field(&path).unwrap();
        assert_eq!(t, 0.1 + 0.2);
        assert!(v.grid().same_as(&g));
        assert_eq!(u.values(), v.values());
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        let g = PeriodicGrid::new_1d(-1.0, 1.0, 8).unwrap();
        write_field(&path, &Field::constant(&g, 2.0), 0.5).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "RLWFIELD v1");
        assert_eq!(lines[1], "1 8 -1e0 1e0 5e-1");
        assert_eq!(lines.len(), 10);
    }

    #[test]
    fn truncated_file_names_missing_count() {
        let text = "RLWFIELD v1\n1 8 0 1 0\n1\n2\n3\n";
        match parse_field(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("missing 5"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            parse_field("RLWFIELD v1\n3 8 8 8 0 1 0 1 0 1 0\n"),
            Err(Error::UnsupportedDimension(3))
        ));
        assert!(matches!(parse_field("RLWFIELD v2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_field(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_field("RLWFIELD v1\n1 8 0 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_field("RLWFIELD v1\n1 7 0 1 0\n"), Err(Error::Parse { line: 2, .. })));
        let mut text = String::from("RLWFIELD v1\n1 8 0 1 0\n");
        for i in 0..8 {
            text.push_str(if i == 4 { "NaN\n" } else { "1\n" });
        }
        assert!(matches!(parse_field(&text), Err(Error::Parse { line: 7, .. })));
        let text = text.replace("NaN", "abc");
        assert!(matches!(parse_field(&text), Err(Error::Parse { line: 7, .. })));
        let mut long = String::from("RLWFIELD v1\n1 8 0 1 0\n");
        long.push_str(&"0\n".repeat(9));
        assert!(matches!(parse_field(&long), Err(Error::Parse { line: 11, .. })));
    }

    proptest! {
        #[test]
        fn any_values_round_trip(vals in proptest::collection::vec(-1e300f64..1e300, 80)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.txt");
            let g = grid_2d();
            let u = Field::from_values(&g, vals).unwrap();
            write_field(&path, &u, 3.0).unwrap();
            let (v, _) = read_field(&path).unwrap();
            prop_assert_eq!(u.values(), v.values());
        }
    }
}
