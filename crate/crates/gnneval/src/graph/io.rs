//! Text serialization: the `gtxt` graph format and the split file format.
//!
//! `gtxt` v1 layout, LF line endings, one trailing newline:
//!
//! ```text
//! #gtxt v1
//! N M d C
//! <node_id> <label> <f_0> ... <f_{d-1}>     × N  (ids in order, label -1 = unknown)
//! <src> <dst>                               × M  (src < dst)
//! ```
//!
//! Floats are written in scientific notation with 9 significant digits,
//! matching the quantization applied by [`Graph::new`], so
//! `load ∘ save` is the identity on graphs and `save ∘ load` is the identity
//! on files.
//!
//! Split files hold three lines, `train:`, `val:`, `test:`, each followed by
//! strictly ascending node ids.

use std::fmt::Write as _;
use std::path::Path;

use super::{Graph, Split};
use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Canonical 9-significant-digit rendering used for feature values.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Rounds to the nearest value representable with 9 significant decimal
/// digits (the precision of the text format).
pub fn quantize_sig9(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0; // avoid keeping a negative-zero sign bit
    }
    format_sig9(x).parse().expect("sig9 round-trip")
}

pub fn to_gtxt_string(g: &Graph) -> String {
    let n = g.num_nodes();
    let d = g.feature_dim();
    let mut out = String::new();
    out.push_str("#gtxt v1\n");
    let _ = writeln!(out, "{n} {} {d} {}", g.num_edges(), g.num_classes());
    for u in 0..n {
        let _ = write!(out, "{u} {}", g.labels()[u]);
        for &f in g.features().row(u) {
            out.push(' ');
            out.push_str(&format_sig9(f));
        }
        out.push('\n');
    }
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn save_graph(g: &Graph, path: &Path) -> Result<()> {
    crate::fsio::write_text(path, &to_gtxt_string(g))
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gtxt(path, &text)
}

/// Splits into lines, rejecting CR characters and interior blank lines.
fn clean_lines<'t>(path: &Path, text: &'t str) -> Result<Vec<&'t str>> {
    if let Some(pos) = text.find('\r') {
        let line = text[..pos].matches('\n').count() + 1;
        return Err(Error::parse(path, line, "carriage return; format requires LF line endings"));
    }
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    if let Some(i) = lines.iter().position(|l| l.is_empty()) {
        return Err(Error::parse(path, i + 1, "blank line"));
    }
    Ok(lines)
}

pub fn parse_gtxt(path: &Path, text: &str) -> Result<Graph> {
    let lines = clean_lines(path, text)?;
    if lines.first() != Some(&"#gtxt v1") {
        return Err(Error::parse(path, 1, "expected header '#gtxt v1'"));
    }
    let counts = lines
        .get(1)
        .ok_or_else(|| Error::parse(path, 2, "missing counts line 'N M d C'"))?;
    let nums = parse_ints(path, 2, counts, 4, "N M d C")?;
    let (n, m, d, c) = (nums[0], nums[1], nums[2], nums[3]);
    let expected = 2 + n + m;
    if lines.len() != expected {
        return Err(Error::parse(
            path,
            lines.len().min(expected) + 1,
            format!("expected {expected} lines for N={n} M={m}, found {}", lines.len()),
        ));
    }

    let mut features = Tensor2::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for u in 0..n {
        let line_no = 3 + u;
        let line = lines[2 + u];
        let mut tok = line.split(' ');
        let id: usize = next_token(path, line_no, &mut tok, "node id")?
            .parse()
            .map_err(|_| Error::parse(path, line_no, "node id must be an integer"))?;
        if id != u {
            return Err(Error::parse(
                path,
                line_no,
                format!("node id {id} out of order (expected {u})"),
            ));
        }
        let label: i64 = next_token(path, line_no, &mut tok, "label")?
            .parse()
            .map_err(|_| Error::parse(path, line_no, "label must be an integer"))?;
        labels.push(label);
        for k in 0..d {
            let t = next_token(path, line_no, &mut tok, "feature value")?;
            let f: f64 = t
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad float '{t}'")))?;
            if !f.is_finite() {
                return Err(Error::parse(path, line_no, format!("non-finite feature '{t}'")));
            }
            features.set(u, k, f);
        }
        if let Some(extra) = tok.next() {
            return Err(Error::parse(
                path,
                line_no,
                format!("trailing token '{extra}' (expected {d} features)"),
            ));
        }
    }

    let mut edges = Vec::with_capacity(m);
    for e in 0..m {
        let line_no = 3 + n + e;
        let pair = parse_ints(path, line_no, lines[2 + n + e], 2, "src dst")?;
        let (src, dst) = (pair[0], pair[1]);
        if src == dst {
            return Err(Error::parse(path, line_no, format!("self-loop at node {src}")));
        }
        if src > dst {
            return Err(Error::parse(
                path,
                line_no,
                format!("edge {src} {dst} is directed (src must be < dst)"),
            ));
        }
        if dst >= n {
            return Err(Error::parse(
                path,
                line_no,
                format!("edge endpoint {dst} outside [0, {n})"),
            ));
        }
        edges.push((src as u32, dst as u32));
    }

    Graph::new(features, labels, c, edges).map_err(|e| match e {
        Error::Invalid(msg) => Error::parse(path, 0, msg),
        other => other,
    })
}

fn next_token<'t>(
    path: &Path,
    line: usize,
    tok: &mut std::str::Split<'t, char>,
    what: &str,
) -> Result<&'t str> {
    match tok.next() {
        Some(t) if !t.is_empty() => Ok(t),
        _ => Err(Error::parse(path, line, format!("missing {what}"))),
    }
}

fn parse_ints(path: &Path, line_no: usize, line: &str, count: usize, what: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = line.split(' ').collect();
    if parts.len() != count || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::parse(
            path,
            line_no,
            format!("expected '{what}' ({count} integers)"),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| Error::parse(path, line_no, format!("'{p}' is not a non-negative integer")))
        })
        .collect()
}

pub fn to_split_string(s: &Split) -> String {
    let fmt = |ids: &[u32]| {
        ids.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    let _ = writeln!(out, "train:{}{}", if s.train.is_empty() { "" } else { " " }, fmt(&s.train));
    let _ = writeln!(out, "val:{}{}", if s.val.is_empty() { "" } else { " " }, fmt(&s.val));
    let _ = writeln!(out, "test:{}{}", if s.test.is_empty() { "" } else { " " }, fmt(&s.test));
    out
}

pub fn save_split(s: &Split, path: &Path) -> Result<()> {
    crate::fsio::write_text(path, &to_split_string(s))
}

pub fn load_split(path: &Path) -> Result<Split> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(path, &text)
}

pub fn parse_split(path: &Path, text: &str) -> Result<Split> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    if lines.len() != 3 {
        return Err(Error::parse(
            path,
            lines.len() + 1,
            "split file must have exactly three lines: train:, val:, test:",
        ));
    }
    let mut sections = Vec::with_capacity(3);
    for (i, (line, prefix)) in lines.iter().zip(["train:", "val:", "test:"]).enumerate() {
        let rest = line.strip_prefix(prefix).ok_or_else(|| {
            Error::parse(path, i + 1, format!("line must start with '{prefix}'"))
        })?;
        let ids = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::parse(path, i + 1, format!("'{t}' is not a node id")))
            })
            .collect::<Result<Vec<u32>>>()?;
        sections.push(ids);
    }
    let test = sections.pop().unwrap();
    let val = sections.pop().unwrap();
    let train = sections.pop().unwrap();
    Split::new(train, val, test).map_err(|e| match e {
        Error::Invalid(msg) => Error::parse(path, 0, msg),
        other => other,
    })
}
