//! Debug text format: the first line holds `N`; each following line holds
//! one nonzero upper-triangular coefficient as `i j value` with 0-based
//! indices `i <= j` and 17 significant digits.

use std::fmt::Write;

use super::{QuboError, QuboModel};

/// Hard cap on the declared size so hostile input cannot request huge matrices.
pub const MAX_TEXT_SIZE: usize = 4096;

pub fn to_qubo_text(model: &QuboModel) -> String {
    let n = model.size();
    let mut out = format!("{n}\n");
    for i in 0..n {
        for j in i..n {
            let v = model.coefficient(i, j);
            if v != 0.0 {
                writeln!(out, "{i} {j} {v:.16e}").expect("writing to a String");
            }
        }
    }
    out
}

pub fn parse_qubo_text(text: &str) -> Result<QuboModel, QuboError> {
    let err = |line: usize, message: String| QuboError::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (_, head) = lines.next().ok_or_else(|| err(1, "missing size line".into()))?;
    let n: usize = head.parse().map_err(|_| err(1, format!("invalid size `{head}`")))?;
    if n > MAX_TEXT_SIZE {
        return Err(err(1, format!("size {n} exceeds {MAX_TEXT_SIZE}")));
    }
    let mut model = QuboModel::zeros(n);
    let mut seen = std::collections::HashSet::new();
    for (line, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.split_whitespace().collect();
        let [i, j, v] = parts.as_slice() else {
            return Err(err(line, format!("expected `i j value`, found `{raw}`")));
        };
        let i: usize = i.parse().map_err(|_| err(line, format!("invalid index `{i}`")))?;
        let j: usize = j.parse().map_err(|_| err(line, format!("invalid index `{j}`")))?;
        let v: f64 = v.parse().map_err(|_| err(line, format!("invalid value `{v}`")))?;
        if i > j || j >= n {
            return Err(err(line, format!("index ({i}, {j}) outside the upper triangle of {n}")));
        }
        if !v.is_finite() {
            return Err(err(line, "non-finite coefficient".into()));
        }
        if !seen.insert((i, j)) {
            return Err(err(line, format!("duplicate entry ({i}, {j})")));
        }
        model.set(i, j, v);
    }
    Ok(model)
}
