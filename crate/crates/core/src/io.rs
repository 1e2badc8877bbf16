//! Text formats: graph edge lists, trajectory and dataset CSV, and JSON with
//! fixed-width floats.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` and keeps output byte-stable across runs.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{DragonError, Result};
use crate::graphdyn::GraphSpec;
use crate::solvers::Trajectory;
use crate::visco::Dataset;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(DragonError::Parse {
        line,
        msg: msg.into(),
    })
}

/// Parses a whitespace-separated `i j w` edge list.
///
/// Lines starting with `#` are comments; a `# nodes N` comment fixes the
/// node count, otherwise it is the largest index plus one. Line numbers in
/// errors are 1-based.
pub fn parse_edge_list(text: &str) -> Result<GraphSpec> {
    let mut declared: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut max_index: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if words.next() == Some("nodes") {
                let n = match (words.next(), words.next()) {
                    (Some(v), None) => v.parse::<usize>().or_else(|_| {
                        parse_err(
                            line_no,
                            format!("node count {v:?} is not a non-negative integer"),
                        )
                    })?,
                    _ => return parse_err(line_no, "expected `# nodes N`"),
                };
                if declared.is_some() {
                    return parse_err(line_no, "node count declared twice");
                }
                declared = Some((n, line_no));
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return parse_err(
                line_no,
                format!("expected `i j w`, found {} fields", fields.len()),
            );
        }
        let i: usize = fields[0]
            .parse()
            .or_else(|_| parse_err(line_no, format!("bad node index {:?}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .or_else(|_| parse_err(line_no, format!("bad node index {:?}", fields[1])))?;
        let w: f64 = fields[2]
            .parse()
            .or_else(|_| parse_err(line_no, format!("bad weight {:?}", fields[2])))?;
        if !(w.is_finite() && w > 0.0) {
            return parse_err(
                line_no,
                format!("weight must be positive and finite, got {w}"),
            );
        }
        if i == j {
            return parse_err(line_no, format!("self-loop on node {i}"));
        }
        max_index = Some(max_index.map_or(i.max(j), |m: usize| m.max(i).max(j)));
        edges.push((i, j, w));
    }
    let n = match (declared, max_index) {
        (Some((n, line_no)), Some(m)) if m >= n => {
            return parse_err(
                line_no,
                format!("node index {m} exceeds declared count {n}"),
            )
        }
        (Some((n, _)), _) => n,
        (None, Some(m)) => match m.checked_add(1) {
            Some(n) => n,
            None => return parse_err(0, format!("node index {m} is too large")),
        },
        (None, None) => return parse_err(0, "edge list is empty"),
    };
    GraphSpec::new(n, edges)
}

/// Writes `t,state_0,...` rows.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> io::Result<()> {
    let mut header = String::from("t");
    for c in 0..traj.dim() {
        header.push_str(&format!(",state_{c}"));
    }
    writeln!(out, "{header}")?;
    for (t, state) in traj.times().iter().zip(traj.states()) {
        let mut row = fmt_f64(*t);
        for v in state {
            row.push(',');
            row.push_str(&fmt_f64(*v));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Writes `t,epsilon,sigma` rows.
pub fn write_dataset_csv<W: Write>(data: &Dataset, mut out: W) -> io::Result<()> {
    writeln!(out, "t,epsilon,sigma")?;
    for i in 0..data.len() {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(data.t[i]),
            fmt_f64(data.epsilon[i]),
            fmt_f64(data.sigma[i])
        )?;
    }
    Ok(())
}

/// Parses a `t,epsilon,sigma` CSV with that exact header.
pub fn parse_dataset_csv(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "t,epsilon,sigma" => {}
        Some((i, _)) => return parse_err(i + 1, "expected header `t,epsilon,sigma`"),
        None => return parse_err(0, "dataset is empty"),
    }
    let (mut t, mut eps, mut sig) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 3 {
            return parse_err(
                line_no,
                format!("expected 3 columns, found {}", fields.len()),
            );
        }
        let mut vals = [0.0f64; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f
                .trim()
                .parse()
                .or_else(|_| parse_err(line_no, format!("bad number {f:?}")))?;
            if !v.is_finite() {
                return parse_err(line_no, "non-finite value");
            }
        }
        t.push(vals[0]);
        eps.push(vals[1]);
        sig.push(vals[2]);
    }
    Dataset::new(t, eps, sig)
}

/// JSON formatter that writes floats with 17 significant digits.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixedFloatFormatter;

impl serde_json::ser::Formatter for FixedFloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as compact JSON with fixed-width floats and a trailing
/// newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloatFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| DragonError::Input(format!("cannot serialize: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
