//! Plain-text LP dump for offline cross-checking.
//!
//! ```text
//! LP <num_vars> <num_rows>
//! OBJ
//! <col> <c>            # nonzero entries only
//! RHS
//! <row> <b>            # every row
//! TRIPLETS
//! <row> <col> <value>
//! BOUNDS
//! <col> <lb> <ub>      # every column, infinities as inf / -inf
//! END
//! ```
//!
//! Numbers are written in shortest round-trip form, so parsing a dump gives
//! back the identical problem.

use std::fmt::Write as _;

use super::{LpError, StandardLp};

pub fn write_dump(lp: &StandardLp) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "LP {} {}", lp.num_vars, lp.num_rows());
    s.push_str("OBJ\n");
    for (j, c) in lp.c.iter().enumerate().filter(|(_, c)| **c != 0.0) {
        let _ = writeln!(s, "{j} {c:?}");
    }
    s.push_str("RHS\n");
    for (i, b) in lp.b.iter().enumerate() {
        let _ = writeln!(s, "{i} {b:?}");
    }
    s.push_str("TRIPLETS\n");
    for (i, j, v) in &lp.triplets {
        let _ = writeln!(s, "{i} {j} {v:?}");
    }
    s.push_str("BOUNDS\n");
    for j in 0..lp.num_vars {
        let _ = writeln!(s, "{j} {:?} {:?}", lp.lb[j], lp.ub[j]);
    }
    s.push_str("END\n");
    s
}

pub fn parse_dump(text: &str) -> Result<StandardLp, LpError> {
    let err = |line: usize, msg: &str| LpError::Dump { line: line + 1, msg: msg.to_string() };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let (n0, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != "LP" {
        return Err(err(n0, "expected `LP <vars> <rows>`"));
    }
    let n: usize = h[1].parse().map_err(|_| err(n0, "bad variable count"))?;
    let m: usize = h[2].parse().map_err(|_| err(n0, "bad row count"))?;
    let mut lp = StandardLp::new(n, m);

    let mut section = "";
    let mut ended = false;
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if matches!(f[0], "OBJ" | "RHS" | "TRIPLETS" | "BOUNDS") {
            section = f[0];
            continue;
        }
        if f[0] == "END" {
            ended = true;
            break;
        }
        let idx = |k: usize, lim: usize| -> Result<usize, LpError> {
            let v: usize = f
                .get(k)
                .ok_or_else(|| err(ln, "missing field"))?
                .parse()
                .map_err(|_| err(ln, "bad index"))?;
            if v >= lim {
                return Err(err(ln, "index out of range"));
            }
            Ok(v)
        };
        let num = |k: usize| -> Result<f64, LpError> {
            f.get(k)
                .ok_or_else(|| err(ln, "missing field"))?
                .parse()
                .map_err(|_| err(ln, "bad number"))
        };
        match section {
            "OBJ" => lp.c[idx(0, n)?] = num(1)?,
            "RHS" => lp.b[idx(0, m)?] = num(1)?,
            "TRIPLETS" => lp.triplets.push((idx(0, m)?, idx(1, n)?, num(2)?)),
            "BOUNDS" => {
                let j = idx(0, n)?;
                lp.lb[j] = num(1)?;
                lp.ub[j] = num(2)?;
            }
            _ => return Err(err(ln, "data before any section header")),
        }
    }
    if !ended {
        return Err(err(text.lines().count(), "missing END"));
    }
    lp.validate()?;
    Ok(lp)
}
