//! Versioned text dump of a [`ConicProblem`].
//!
//! ```text
//! conic-dump 1
//! variables N
//! objective NNZ C0          then NNZ lines `j v`
//! equalities R NNZ          then NNZ triplets `i j v`, then R right-hand sides
//! inequalities R NNZ        same layout, rows read `row · x ≤ rhs`
//! cones K
//! cone M                    M body rows; the cone is ‖A·x + b‖ ≤ c·x + d
//! head NNZ d                then NNZ lines `j c_j`
//! row NNZ b                 M times, each followed by NNZ lines `j a_j`
//! bounds B                  then B lines `j lower upper` (only non-free columns)
//! end
//! ```
//!
//! A projected chance constraint `μ + λ‖σ‖ ≤ 0` appears as a cone whose head
//! is `−μ/λ` and whose body rows are the spread coefficients `σ`. Numbers use
//! the shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::problem::{ConicProblem, Row, SocCone};

pub const DUMP_HEADER: &str = "conic-dump 1";

pub fn write_dump(p: &ConicProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DUMP_HEADER}");
    let _ = writeln!(out, "variables {}", p.n_vars);
    let _ = writeln!(out, "objective {} {}", p.objective.len(), p.objective_constant);
    for &(j, v) in &p.objective {
        let _ = writeln!(out, "{j} {v}");
    }
    write_rows(&mut out, "equalities", &p.equalities);
    write_rows(&mut out, "inequalities", &p.inequalities);
    let _ = writeln!(out, "cones {}", p.cones.len());
    for c in &p.cones {
        let _ = writeln!(out, "cone {}", c.body.len());
        write_affine(&mut out, "head", &c.head);
        for r in &c.body {
            write_affine(&mut out, "row", r);
        }
    }
    let bounded: Vec<usize> = (0..p.n_vars)
        .filter(|&j| p.lower[j] != f64::NEG_INFINITY || p.upper[j] != f64::INFINITY)
        .collect();
    let _ = writeln!(out, "bounds {}", bounded.len());
    for j in bounded {
        let _ = writeln!(out, "{j} {} {}", p.lower[j], p.upper[j]);
    }
    out.push_str("end\n");
    out
}

fn write_rows(out: &mut String, name: &str, rows: &[Row]) {
    let nnz: usize = rows.iter().map(|r| r.terms.len()).sum();
    let _ = writeln!(out, "{name} {} {nnz}", rows.len());
    for (i, r) in rows.iter().enumerate() {
        for &(j, v) in &r.terms {
            let _ = writeln!(out, "{i} {j} {v}");
        }
    }
    for r in rows {
        let _ = writeln!(out, "{}", r.value);
    }
}

fn write_affine(out: &mut String, tag: &str, r: &Row) {
    let _ = writeln!(out, "{tag} {} {}", r.terms.len(), r.value);
    for &(j, v) in &r.terms {
        let _ = writeln!(out, "{j} {v}");
    }
}

pub fn dump(problem: &ConicProblem, path: &Path) -> Result<()> {
    std::fs::write(path, write_dump(problem)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ConicProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_dump(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l.split_whitespace().collect());
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn keyword(&mut self, kw: &str, n_args: usize) -> Result<Vec<&'a str>> {
        let t = self.next_tokens()?;
        if t.first() != Some(&kw) || t.len() != n_args + 1 {
            return Err(self.err(format!("expected `{kw}` with {n_args} arguments")));
        }
        Ok(t[1..].to_vec())
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(format!("invalid number `{s}`")))
    }

    fn pairs(&mut self, n: usize, n_vars: usize) -> Result<Vec<(usize, f64)>> {
        (0..n)
            .map(|_| {
                let t = self.next_tokens()?;
                if t.len() != 2 {
                    return Err(self.err("expected `j v`"));
                }
                let j: usize = self.num(t[0])?;
                if j >= n_vars {
                    return Err(self.err(format!("column {j} out of range")));
                }
                Ok((j, self.num(t[1])?))
            })
            .collect()
    }

    fn rows(&mut self, kw: &str, n_vars: usize) -> Result<Vec<Row>> {
        let a = self.keyword(kw, 2)?;
        let (n_rows, nnz): (usize, usize) = (self.num(a[0])?, self.num(a[1])?);
        let mut rows = vec![Row::default(); n_rows];
        for _ in 0..nnz {
            let t = self.next_tokens()?;
            if t.len() != 3 {
                return Err(self.err("expected `i j v`"));
            }
            let (i, j): (usize, usize) = (self.num(t[0])?, self.num(t[1])?);
            if i >= n_rows || j >= n_vars {
                return Err(self.err(format!("entry ({i}, {j}) out of range")));
            }
            rows[i].terms.push((j, self.num(t[2])?));
        }
        for r in &mut rows {
            let t = self.next_tokens()?;
            if t.len() != 1 {
                return Err(self.err("expected a right-hand side"));
            }
            r.value = self.num(t[0])?;
        }
        Ok(rows)
    }

    fn affine(&mut self, kw: &str, n_vars: usize) -> Result<Row> {
        let a = self.keyword(kw, 2)?;
        let nnz: usize = self.num(a[0])?;
        let value = self.num(a[1])?;
        Ok(Row::new(self.pairs(nnz, n_vars)?, value))
    }
}

pub fn read_dump(text: &str) -> Result<ConicProblem> {
    let mut l = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = l.next_tokens()?.join(" ");
    if header != DUMP_HEADER {
        return Err(l.err(format!("expected header `{DUMP_HEADER}`, found `{header}`")));
    }
    let a = l.keyword("variables", 1)?;
    let n: usize = l.num(a[0])?;
    let mut p = ConicProblem::new(n);
    let a = l.keyword("objective", 2)?;
    let nnz: usize = l.num(a[0])?;
    p.objective_constant = l.num(a[1])?;
    p.objective = l.pairs(nnz, n)?;
    p.equalities = l.rows("equalities", n)?;
    p.inequalities = l.rows("inequalities", n)?;
    let a = l.keyword("cones", 1)?;
    let k: usize = l.num(a[0])?;
    for _ in 0..k {
        let a = l.keyword("cone", 1)?;
        let m: usize = l.num(a[0])?;
        let head = l.affine("head", n)?;
        let body = (0..m)
            .map(|_| l.affine("row", n))
            .collect::<Result<Vec<_>>>()?;
        p.cones.push(SocCone { head, body });
    }
    let a = l.keyword("bounds", 1)?;
    let b: usize = l.num(a[0])?;
    for _ in 0..b {
        let t = l.next_tokens()?;
        if t.len() != 3 {
            return Err(l.err("expected `j lower upper`"));
        }
        let j: usize = l.num(t[0])?;
        if j >= n {
            return Err(l.err(format!("column {j} out of range")));
        }
        p.lower[j] = l.num(t[1])?;
        p.upper[j] = l.num(t[2])?;
    }
    l.keyword("end", 0)?;
    p.validate().map_err(|e| l.err(e.to_string()))?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConicProblem {
        let mut p = ConicProblem::new(3);
        p.objective = vec![(0, 0.1), (2, -1.0 / 3.0)];
        p.objective_constant = 2.5;
        p.equalities.push(Row::new(vec![(0, 1.0), (1, 1e-300)], 7.0));
        p.inequalities.push(Row::new(vec![], 0.0));
        p.cones.push(SocCone {
            head: Row::new(vec![(1, -1.0 / 1.645)], 0.3),
            body: vec![Row::new(vec![(2, 2.0)], -0.0), Row::new(vec![], 1.0)],
        });
        p.lower[0] = 0.0;
        p.upper[2] = 5.0;
        p
    }

    #[test]
    fn round_trip() {
        let p = sample();
        let text = write_dump(&p);
        let q = read_dump(&text).unwrap();
        assert_eq!(q, p);
        assert_eq!(write_dump(&q), text);
    }

    #[test]
    fn rejects_out_of_range() {
        let text = write_dump(&sample()).replace("variables 3", "variables 2");
        assert!(read_dump(&text).is_err());
    }
}
