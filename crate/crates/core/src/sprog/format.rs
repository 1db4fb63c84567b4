//! Line-based text schema for [`StochModel`].
//!
//! ```text
//! chaosproj-model 1
//! germ xi_L normal mean=0 sd=0.1075 units=pu
//! unused xi_T
//! var dam_bid first 24
//! var soc second 24
//! objective
//!   1.5 dam_bid[3]
//!   -2 xi_L soc[0]
//! end
//! le soc_cap eps=0.1
//!   1 soc[0]
//!   -4
//! end
//! ```
//!
//! Each term line is `coef [germ] [var[flat]]`. Coefficients are written in
//! the shortest decimal form that parses back to the same `f64`, so a written
//! model reads back exactly and rewrites byte-identically. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::polybasis::Distribution;

use super::expr::{AffineExpr, AffineTerm, GermId, VarId};
use super::model::{NameRef, Sense, Stage, StochModel};

pub const MODEL_HEADER: &str = "chaosproj-model 1";

pub fn write_model(model: &StochModel) -> String {
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    for (i, g) in model.germs().iter().enumerate() {
        let _ = write!(out, "germ {} {}", g.name, g.distribution.kind_name());
        for (k, v) in g.distribution.params() {
            let _ = write!(out, " {k}={v}");
        }
        if let Some(u) = model.germ_units(GermId(i)) {
            let _ = write!(out, " units={u}");
        }
        out.push('\n');
    }
    for g in model.unused_germs() {
        let _ = writeln!(out, "unused {}", model.germs()[g.0].name);
    }
    for b in model.blocks() {
        let shape: Vec<String> = b.shape.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "var {} {} {}", b.name, b.stage.name(), shape.join("x"));
    }
    if let Some(obj) = model.objective() {
        out.push_str("objective\n");
        write_terms(&mut out, model, obj);
        out.push_str("end\n");
    }
    for c in model.constraints() {
        match c.sense {
            Sense::Eq => {
                let _ = write!(out, "eq {}", c.name);
            }
            Sense::Le => {
                let _ = write!(out, "le {}", c.name);
            }
        }
        if let Some(e) = c.epsilon {
            let _ = write!(out, " eps={e}");
        }
        out.push('\n');
        write_terms(&mut out, model, &c.expr);
        out.push_str("end\n");
    }
    out
}

fn write_terms(out: &mut String, model: &StochModel, e: &AffineExpr) {
    for t in e.terms() {
        let _ = write!(out, "  {}", t.coef);
        if let Some(g) = t.germ {
            let _ = write!(out, " {}", model.germs()[g.0].name);
        }
        if let Some(v) = t.var {
            let _ = write!(out, " {}", model.var_label(v));
        }
        out.push('\n');
    }
}

pub fn save_model(model: &StochModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<StochModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&text)
}

enum Section {
    Objective,
    Constraint {
        name: String,
        sense: Sense,
        epsilon: Option<f64>,
    },
}

/// Parses a model. The result is not finalized.
pub fn read_model(text: &str) -> Result<StochModel> {
    let mut model = StochModel::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        Some((_, MODEL_HEADER)) => {}
        Some((n, other)) => {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected header `{MODEL_HEADER}`, found `{other}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 0,
                msg: "empty model file".into(),
            })
        }
    }

    let mut section: Option<(usize, Section, Vec<AffineTerm>)> = None;
    for (n, line) in lines {
        let perr = |msg: String| Error::Parse { line: n, msg };
        let at = |e: Error| match e {
            Error::Parse { .. } => e,
            other => Error::Parse {
                line: n,
                msg: other.to_string(),
            },
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();

        if let Some((start, sec, terms)) = section.as_mut() {
            if line == "end" {
                let expr = AffineExpr::from_terms(terms.drain(..));
                let start = *start;
                let result = match sec {
                    Section::Objective => model.set_objective_affine(expr),
                    Section::Constraint {
                        name,
                        sense,
                        epsilon,
                    } => model
                        .push_constraint(name, expr, *sense, *epsilon)
                        .map(|_| ()),
                };
                result.map_err(|e| Error::Parse {
                    line: start,
                    msg: e.to_string(),
                })?;
                section = None;
            } else {
                terms.push(parse_term(&model, &tokens).map_err(perr)?);
            }
            continue;
        }

        match tokens[0] {
            "germ" => {
                if tokens.len() < 3 {
                    return Err(perr("germ needs a name and a distribution kind".into()));
                }
                let mut params = Vec::new();
                let mut units = None;
                for tok in &tokens[3..] {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| perr(format!("expected key=value, found `{tok}`")))?;
                    if k == "units" {
                        units = Some(v);
                        continue;
                    }
                    let v: f64 = v
                        .parse()
                        .map_err(|_| perr(format!("invalid number `{v}` for `{k}`")))?;
                    params.push((k, v));
                }
                let dist = Distribution::from_kind(tokens[2], &params).map_err(at)?;
                let g = model.add_germ(tokens[1], dist).map_err(at)?;
                if let Some(u) = units {
                    model.set_germ_units(g, u).map_err(at)?;
                }
            }
            "unused" => {
                let [_, name] = tokens[..] else {
                    return Err(perr("unused takes exactly one germ name".into()));
                };
                let g = model
                    .germ_id(name)
                    .ok_or_else(|| perr(format!("unknown germ `{name}`")))?;
                model.declare_unused(g).map_err(at)?;
            }
            "var" => {
                let [_, name, stage, shape] = tokens[..] else {
                    return Err(perr("var takes a name, a stage and a shape".into()));
                };
                let stage = match stage {
                    "first" => Stage::First,
                    "second" => Stage::Second,
                    s => return Err(perr(format!("unknown stage `{s}`"))),
                };
                let shape = shape
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| perr(format!("invalid shape `{shape}`")))?;
                model.add_variable(name, stage, &shape).map_err(at)?;
            }
            "objective" => {
                if tokens.len() != 1 {
                    return Err(perr("objective takes no arguments".into()));
                }
                section = Some((n, Section::Objective, Vec::new()));
            }
            kw @ ("eq" | "le") => {
                if tokens.len() < 2 {
                    return Err(perr(format!("{kw} needs a constraint name")));
                }
                let mut epsilon = None;
                for tok in &tokens[2..] {
                    match tok.split_once('=') {
                        Some(("eps", v)) => {
                            epsilon = Some(
                                v.parse::<f64>()
                                    .map_err(|_| perr(format!("invalid eps `{v}`")))?,
                            )
                        }
                        _ => return Err(perr(format!("unexpected `{tok}`"))),
                    }
                }
                let sense = if kw == "eq" { Sense::Eq } else { Sense::Le };
                section = Some((
                    n,
                    Section::Constraint {
                        name: tokens[1].to_string(),
                        sense,
                        epsilon,
                    },
                    Vec::new(),
                ));
            }
            "correlate" => {
                return Err(perr(
                    "germs must be independent; transform correlated inputs into \
                     independent germs (e.g. with a copula) before building the model"
                        .into(),
                ))
            }
            other => return Err(perr(format!("unknown directive `{other}`"))),
        }
    }
    if let Some((start, _, _)) = section {
        return Err(Error::Parse {
            line: start,
            msg: "section is not closed with `end`".into(),
        });
    }
    Ok(model)
}

fn parse_term(model: &StochModel, tokens: &[&str]) -> std::result::Result<AffineTerm, String> {
    let (coef, rest) = tokens.split_first().ok_or("empty term")?;
    let coef: f64 = coef
        .parse()
        .map_err(|_| format!("invalid coefficient `{coef}`"))?;
    if !coef.is_finite() {
        return Err(format!("coefficient `{coef}` is not finite"));
    }
    let mut germ = None;
    let mut var = None;
    for tok in rest {
        if let Some((name, idx)) = tok.strip_suffix(']').and_then(|t| t.split_once('[')) {
            let h = model
                .variable(name)
                .ok_or_else(|| format!("unknown variable `{name}`"))?;
            let i: usize = idx.parse().map_err(|_| format!("invalid index in `{tok}`"))?;
            if i >= h.len() {
                return Err(format!("index {i} out of range for `{name}` ({})", h.len()));
            }
            if var.replace(h.at(i)).is_some() {
                return Err(format!("term has more than one variable: `{}`", tokens.join(" ")));
            }
        } else {
            match model.lookup(tok) {
                Some(NameRef::Germ(g)) => {
                    if germ.replace(GermId(g)).is_some() {
                        return Err(format!("germ degree exceeds 1: `{}`", tokens.join(" ")));
                    }
                }
                Some(NameRef::Block(_)) => {
                    return Err(format!("variable `{tok}` needs an index"));
                }
                None => return Err(format!("unknown name `{tok}`")),
            }
        }
    }
    Ok(AffineTerm {
        coef,
        germ,
        var: var.map(|v: VarId| v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sprog::Expr;

    fn sample() -> StochModel {
        let mut m = StochModel::new();
        let g = m
            .add_germ("xi_DAM", Distribution::normal(0.0, 4.28).unwrap())
            .unwrap();
        m.set_germ_units(g, "EUR/MWh").unwrap();
        let ev = m
            .add_germ("xi_EV", Distribution::uniform_from_moments(0.1, 0.0577).unwrap())
            .unwrap();
        let x = m.add_variable("dam_bid", Stage::First, &[3]).unwrap();
        let z = m.add_variable("grid", Stage::Second, &[3, 2]).unwrap();
        m.set_objective(
            Expr::new()
                .add_var(0.1 + 0.2, x.at(0))
                .add_germ_var(-1.0 / 3.0, g, z.at(5)),
        )
        .unwrap();
        m.add_constraint(
            "bal",
            Expr::var(x.at(0)) - Expr::var(z.at(0)) + Expr::germ(ev),
            Sense::Eq,
            None,
        )
        .unwrap();
        m.add_constraint("cap[0]", Expr::var(z.at(1)).add_const(-1e-17), Sense::Le, Some(0.1))
            .unwrap();
        m
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = write_model(&sample());
        let back = read_model(&text).unwrap();
        assert_eq!(write_model(&back), text);
        assert!(text.contains("units=EUR/MWh"));
        assert!(text.contains("0.30000000000000004 dam_bid[0]"));
    }

    #[test]
    fn unknown_kind_is_named() {
        let text = "chaosproj-model 1\ngerm xi_bad triangular lo=0 hi=1\n";
        let err = read_model(text).unwrap_err().to_string();
        assert!(err.contains("triangular"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn rejects_germ_squared_and_correlation() {
        let text = "chaosproj-model 1\ngerm a normal mean=0 sd=1\nvar x first 1\nobjective\n  1 a a x[0]\nend\n";
        assert!(read_model(text).unwrap_err().to_string().contains("degree"));
        let text = "chaosproj-model 1\ncorrelate a b 0.5\n";
        assert!(read_model(text).unwrap_err().to_string().contains("copula"));
    }

    #[test]
    fn unclosed_section() {
        let text = "chaosproj-model 1\nvar x first 1\nobjective\n  1 x[0]\n";
        assert!(read_model(text).is_err());
    }
}
