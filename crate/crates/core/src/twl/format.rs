//! Plain-text DTDG format:
//!
//! ```text
//! % comment
//! N T
//! u v        (edge lines of snapshot 0)
//! #
//! x_1 .. x_D (N feature rows, or none for a featureless snapshot)
//! #
//! ...        (repeated for each of the T snapshots)
//! ```

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::Dtdg;
use crate::error::{Error, Result};

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| err(line, format!("invalid {what} '{tok}'")))
}

/// Parses the text format. Line numbers in errors are 1-based.
pub fn parse_dtdg(text: &str) -> Result<Dtdg> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('%').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hl, header) = lines.next().ok_or_else(|| err(1, "missing 'N T' header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(err(hl, "header must be 'N T'"));
    }
    let n: usize = parse_num(toks[0], hl, "node count")?;
    let t: usize = parse_num(toks[1], hl, "snapshot count")?;
    if t == 0 {
        return Err(err(hl, "snapshot count must be positive"));
    }

    let mut snapshots = Vec::with_capacity(t);
    let mut last_line = hl;
    for s in 0..t {
        let mut edges = Vec::new();
        loop {
            let (ln, l) = lines.next().ok_or_else(|| err(last_line, format!("snapshot {s}: missing '#' after edges")))?;
            last_line = ln;
            if l == "#" {
                break;
            }
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(err(ln, "edge line must be 'u v'"));
            }
            let u: usize = parse_num(toks[0], ln, "node id")?;
            let v: usize = parse_num(toks[1], ln, "node id")?;
            if u >= n || v >= n {
                return Err(err(ln, format!("node id out of range for {n} nodes")));
            }
            if u == v {
                return Err(err(ln, "self-loops are not allowed"));
            }
            edges.push((u, v));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        loop {
            let (ln, l) =
                lines.next().ok_or_else(|| err(last_line, format!("snapshot {s}: missing '#' after features")))?;
            last_line = ln;
            if l == "#" {
                break;
            }
            let row = l.split_whitespace().map(|tok| parse_num::<f64>(tok, ln, "feature")).collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(err(ln, format!("feature row has {} values, expected {}", row.len(), first.len())));
                }
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(err(ln, "features must be finite"));
            }
            rows.push(row);
        }
        let features = if rows.is_empty() {
            Array2::zeros((n, 0))
        } else {
            if rows.len() != n {
                return Err(err(last_line, format!("snapshot {s}: {} feature rows, expected {n}", rows.len())));
            }
            let d = rows[0].len();
            Array2::from_shape_vec((n, d), rows.concat()).map_err(|e| err(last_line, e.to_string()))?
        };
        snapshots.push((edges, features));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, format!("trailing content after {t} snapshots")));
    }
    Dtdg::new(n, snapshots).map_err(|e| err(last_line, e.to_string()))
}

pub fn read_dtdg(path: &Path) -> Result<Dtdg> {
    parse_dtdg(&std::fs::read_to_string(path)?)
}

/// Writes `g` in the text format; parsing the output reproduces `g` exactly.
pub fn write_dtdg<W: Write>(mut w: W, g: &Dtdg) -> Result<()> {
    writeln!(w, "{} {}", g.nodes(), g.steps())?;
    for s in g.snapshots() {
        for (u, v) in s.edges() {
            writeln!(w, "{u} {v}")?;
        }
        writeln!(w, "#")?;
        if s.features().ncols() > 0 {
            for row in s.features().rows() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", cells.join(" "))?;
            }
        }
        writeln!(w, "#")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn roundtrip_with_features() {
        let g = Dtdg::new(
            3,
            vec![(vec![(0, 1)], array![[0.1, -2.0], [1e-300, 3.5], [0.0, 1.0 / 3.0]]), (vec![(2, 1), (0, 2)], Array2::zeros((3, 2)))],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dtdg(&mut buf, &g).unwrap();
        assert_eq!(parse_dtdg(std::str::from_utf8(&buf).unwrap()).unwrap(), g);
    }

    #[test]
    fn comments_and_featureless_blocks() {
        let text = "% two nodes\n2 2\n0 1 % edge\n#\n#\n#\n#\n";
        let g = parse_dtdg(text).unwrap();
        assert_eq!(g.snapshots()[0].edges(), &[(0, 1)]);
        assert!(g.snapshots()[1].edges().is_empty());
        assert_eq!(g.dims(), 0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_dtdg("2 1\n0 5\n#\n#\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_dtdg("2 1\n#\n1.0\n#\n") {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_dtdg("2 1\n0 1\n").is_err());
    }
}
