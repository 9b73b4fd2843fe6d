//! Export of the (u, v)-space model in LP-format text for external
//! quadratically constrained solvers, with a reader for the same dialect.
//!
//! Variables: `u_i`, `v_j` (free), `x_k`, `y_k` (nonnegative by LP-format
//! default). The objective is one bracketed quadratic block holding a term
//! per nonzero of A.

use crate::error::{Error, Result};
use crate::instance::SVInstance;
use crate::numerics::Mat;
use std::fmt::Write as _;
use std::path::Path;

/// The data of an exported model.
#[derive(Debug, Clone, PartialEq)]
pub struct MiqcpModel {
    pub a: Mat,
    pub g: Mat,
    pub h: Mat,
}

impl MiqcpModel {
    pub fn from_instance(inst: &SVInstance) -> Self {
        MiqcpModel {
            a: inst.a().clone(),
            g: inst.p().generators().clone(),
            h: inst.q().generators().clone(),
        }
    }

    /// Number of bilinear terms in the objective.
    pub fn objective_terms(&self) -> usize {
        self.a.iter().filter(|&&t| t != 0.0).count()
    }
}

fn num(t: f64) -> String {
    format!("{t:.16e}")
}

pub fn model_text(model: &MiqcpModel) -> String {
    let (m, n) = model.a.shape();
    let mut s = String::new();
    s.push_str("\\ least cone-constrained singular value\n");
    s.push_str("Minimize\n obj: [");
    for i in 0..m {
        for j in 0..n {
            let t = model.a[(i, j)];
            if t != 0.0 {
                // LP format halves the bracket
                write!(s, " + {} u{i} * v{j}", num(2.0 * t)).unwrap();
            }
        }
    }
    s.push_str(" ] / 2\nSubject To\n");
    let link = |s: &mut String, lhs: char, var: char, gen: &Mat| {
        for r in 0..gen.nrows() {
            write!(s, " {lhs}{r}_link: {lhs}{r}").unwrap();
            for k in 0..gen.ncols() {
                let t = gen[(r, k)];
                if t != 0.0 {
                    write!(s, " - {} {var}{k}", num(t)).unwrap();
                }
            }
            s.push_str(" = 0\n");
        }
    };
    link(&mut s, 'u', 'x', &model.g);
    link(&mut s, 'v', 'y', &model.h);
    for (name, var, len) in [("u_ball", 'u', m), ("v_ball", 'v', n)] {
        write!(s, " {name}: [").unwrap();
        for r in 0..len {
            write!(s, " + {var}{r} ^ 2").unwrap();
        }
        s.push_str(" ] <= 1\n");
    }
    s.push_str("Bounds\n");
    for i in 0..m {
        writeln!(s, " u{i} free").unwrap();
    }
    for j in 0..n {
        writeln!(s, " v{j} free").unwrap();
    }
    s.push_str("End\n");
    s
}

pub fn export_miqcp(inst: &SVInstance, path: &Path) -> Result<()> {
    std::fs::write(path, model_text(&MiqcpModel::from_instance(inst))).map_err(|e| Error::Io(e.to_string()))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(format!("model file: {}", msg.into()))
}

fn var_index(tok: &str, prefix: char) -> Result<usize> {
    tok.strip_prefix(prefix)
        .and_then(|r| r.parse().ok())
        .ok_or_else(|| bad(format!("expected a {prefix} variable, got `{tok}`")))
}

fn coef(tok: &str) -> Result<f64> {
    tok.parse().map_err(|_| bad(format!("bad number `{tok}`")))
}

/// Parse a model written by [`model_text`]. Dimensions are taken from the
/// ball constraints and the largest `x`/`y` index.
pub fn read_miqcp(text: &str) -> Result<MiqcpModel> {
    let mut obj = Vec::new();
    let mut links: Vec<(char, usize, Vec<(usize, f64)>)> = Vec::new();
    let mut dims = [0usize; 2];
    let mut section = "";
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Minimize" | "Subject To" | "Bounds" | "End" => {
                section = line;
                continue;
            }
            _ => {}
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match section {
            "Minimize" => {
                let body = toks.iter().skip_while(|t| **t != "[").skip(1).take_while(|t| **t != "]");
                let body: Vec<&str> = body.copied().collect();
                for term in body.chunks(5) {
                    let [sign, c, u, star, v] = term else { return Err(bad("truncated objective term")) };
                    if *sign != "+" || *star != "*" {
                        return Err(bad("unexpected objective syntax"));
                    }
                    obj.push((var_index(u, 'u')?, var_index(v, 'v')?, coef(c)? / 2.0));
                }
            }
            "Subject To" => {
                let name = toks.first().ok_or_else(|| bad("empty constraint"))?;
                if name.ends_with("_ball:") {
                    let side = usize::from(name.starts_with('v'));
                    dims[side] = toks.iter().filter(|t| **t == "^").count();
                } else if name.ends_with("_link:") {
                    let lhs = toks[1];
                    let kind = lhs.chars().next().ok_or_else(|| bad("empty link"))?;
                    let row = var_index(lhs, kind)?;
                    let var = if kind == 'u' { 'x' } else { 'y' };
                    let mut entries = Vec::new();
                    let mut rest = &toks[2..];
                    while let [minus, c, x, tail @ ..] = rest {
                        if *minus != "-" {
                            break;
                        }
                        entries.push((var_index(x, var)?, coef(c)?));
                        rest = tail;
                    }
                    if rest != ["=", "0"] {
                        return Err(bad(format!("unexpected link syntax in `{line}`")));
                    }
                    links.push((kind, row, entries));
                } else {
                    return Err(bad(format!("unknown constraint `{name}`")));
                }
            }
            "Bounds" => {}
            _ => return Err(bad(format!("text outside a section: `{line}`"))),
        }
    }
    let [m, n] = dims;
    let cols = |kind: char| {
        links
            .iter()
            .filter(|l| l.0 == kind)
            .flat_map(|l| l.2.iter().map(|e| e.0 + 1))
            .max()
            .unwrap_or(0)
    };
    let mut g = Mat::zeros(m, cols('u'));
    let mut h = Mat::zeros(n, cols('v'));
    for (kind, row, entries) in links {
        let target = if kind == 'u' { &mut g } else { &mut h };
        if row >= target.nrows() {
            return Err(bad("link row outside the ball dimension"));
        }
        for (k, c) in entries {
            target[(row, k)] = c;
        }
    }
    let mut a = Mat::zeros(m, n);
    for (i, j, c) in obj {
        if i >= m || j >= n {
            return Err(bad("objective term outside the ball dimension"));
        }
        a[(i, j)] = c;
    }
    Ok(MiqcpModel { a, g, h })
}
