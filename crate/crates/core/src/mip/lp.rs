//! LP-format text export and a reader for the subset this module writes.
//!
//! Every variable is listed in the `Bounds` section in program order so that the
//! reader can rebuild the exact variable table; constraint names are `{tag}_{k}`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Constraint, MipProgram, ProgramShape, Sense, VarKind, Variable};
use crate::metrics::FairnessMetric;
use crate::{Error, Result};

const HEADER: &str = "\\ fairmip-program";
const MAX_LINE: usize = 100;

fn push_terms(out: &mut String, head: &str, terms: &[(usize, f64)], vars: &[Variable], tail: &str) {
    let mut line = head.to_string();
    for (k, &(j, c)) in terms.iter().enumerate() {
        let piece = match (k, c < 0.0) {
            (0, false) => format!("{c} {}", vars[j].name),
            (0, true) => format!("- {} {}", -c, vars[j].name),
            (_, false) => format!("+ {c} {}", vars[j].name),
            (_, true) => format!("- {} {}", -c, vars[j].name),
        };
        if line.len() + piece.len() + 1 > MAX_LINE && !line.trim().is_empty() && !line.ends_with(':') {
            out.push_str(&line);
            out.push('\n');
            line = "   ".to_string();
        }
        line.push(' ');
        line.push_str(&piece);
    }
    line.push_str(tail);
    out.push_str(&line);
    out.push('\n');
}

/// The program as LP-format text (LF line endings).
pub fn write_lp_string(p: &MipProgram) -> String {
    let s = &p.shape;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{HEADER} n={} d={} depth={} metric={} lambda={} big_m={} eps_tol={}",
        s.n,
        s.d,
        s.depth,
        s.metric.as_str(),
        s.lambda,
        s.big_m,
        s.eps_tol
    );
    out.push_str("Minimize\n");
    push_terms(&mut out, " obj:", &p.objective, &p.vars, "");
    out.push_str("Subject To\n");
    for (k, c) in p.constraints.iter().enumerate() {
        let tail = format!(" {} {}", c.sense.symbol(), c.rhs);
        push_terms(&mut out, &format!(" {}_{k}:", c.tag), &c.terms, &p.vars, &tail);
    }
    out.push_str("Bounds\n");
    for v in &p.vars {
        if v.ub.is_finite() {
            let _ = writeln!(out, " {} <= {} <= {}", v.lb, v.name, v.ub);
        } else {
            let _ = writeln!(out, " {} >= {}", v.name, v.lb);
        }
    }
    out.push_str("Binaries\n");
    let binaries: Vec<&str> = p
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    for chunk in binaries.chunks(8) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(p: &MipProgram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_lp_string(p)).map_err(|e| Error::io(path, e))
}

pub fn read_lp(path: impl AsRef<Path>) -> Result<MipProgram> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_lp_str(&text)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Schema(format!("LP: {}", msg.into()))
}

fn number(tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| bad(format!("expected a number, found `{tok}`")))
}

fn parse_shape(line: &str) -> Result<ProgramShape> {
    let rest = line
        .strip_prefix(HEADER)
        .ok_or_else(|| bad("missing program header comment"))?;
    let fields: HashMap<&str, &str> = rest
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("header lacks `{k}`")));
    let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad `{k}`"))) };
    Ok(ProgramShape {
        n: int("n")?,
        d: int("d")?,
        depth: int("depth")?,
        metric: get("metric")?.parse::<FairnessMetric>()?,
        lambda: number(get("lambda")?)?,
        big_m: number(get("big_m")?)?,
        eps_tol: number(get("eps_tol")?)?,
    })
}

fn parse_terms(tokens: &[&str], index: &HashMap<String, usize>) -> Result<Vec<(usize, f64)>> {
    let mut terms = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        let mut sign = 1.0;
        if tokens[k] == "+" || tokens[k] == "-" {
            if tokens[k] == "-" {
                sign = -1.0;
            }
            k += 1;
        }
        let (coef, name) = match (tokens.get(k), tokens.get(k + 1)) {
            (Some(a), Some(b)) if a.parse::<f64>().is_ok() => {
                k += 2;
                (number(a)?, *b)
            }
            (Some(a), _) => {
                k += 1;
                (1.0, *a)
            }
            _ => return Err(bad("dangling sign")),
        };
        let j = *index.get(name).ok_or_else(|| bad(format!("undeclared variable `{name}`")))?;
        terms.push((j, sign * coef));
    }
    Ok(terms)
}

/// Parses LP text written by [`write_lp_string`].
pub fn read_lp_str(text: &str) -> Result<MipProgram> {
    let mut lines = text.lines();
    let shape = parse_shape(lines.next().unwrap_or_default().trim_end())?;

    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Objective,
        Constraints,
        Bounds,
        Binaries,
        End,
    }
    let mut section = Section::None;
    let mut objective = String::new();
    let mut constraint_items: Vec<String> = Vec::new();
    let mut bound_lines = Vec::new();
    let mut binary_names = Vec::new();
    for raw in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        let next = match line.to_ascii_lowercase().as_str() {
            "minimize" => Some(Section::Objective),
            "subject to" => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binaries" => Some(Section::Binaries),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        match section {
            Section::Objective => {
                objective.push(' ');
                objective.push_str(line);
            }
            Section::Constraints => {
                if line.contains(':') {
                    constraint_items.push(line.to_string());
                } else {
                    let last = constraint_items
                        .last_mut()
                        .ok_or_else(|| bad("continuation line before any constraint"))?;
                    last.push(' ');
                    last.push_str(line);
                }
            }
            Section::Bounds => bound_lines.push(line.to_string()),
            Section::Binaries => binary_names.extend(line.split_whitespace().map(str::to_string)),
            Section::None | Section::End => return Err(bad(format!("unexpected line `{line}`"))),
        }
    }
    if section != Section::End {
        return Err(bad("missing `End`"));
    }

    let binaries: std::collections::HashSet<String> = binary_names.into_iter().collect();
    let mut vars = Vec::with_capacity(bound_lines.len());
    for line in &bound_lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (name, lb, ub) = match toks.as_slice() {
            [lb, "<=", name, "<=", ub] => (*name, number(lb)?, number(ub)?),
            [name, ">=", lb] => (*name, number(lb)?, f64::INFINITY),
            _ => return Err(bad(format!("unsupported bound `{line}`"))),
        };
        let kind = if binaries.contains(name) { VarKind::Binary } else { VarKind::Continuous };
        vars.push(Variable { name: name.to_string(), kind, lb, ub });
    }
    let index: HashMap<String, usize> = vars.iter().enumerate().map(|(k, v)| (v.name.clone(), k)).collect();
    if index.len() != vars.len() {
        return Err(bad("duplicate variable in Bounds"));
    }

    let obj = objective.trim();
    let obj = obj.strip_prefix("obj:").ok_or_else(|| bad("objective must be named `obj`"))?;
    let obj_tokens: Vec<&str> = obj.split_whitespace().collect();
    let objective = parse_terms(&obj_tokens, &index)?;

    let mut constraints = Vec::with_capacity(constraint_items.len());
    for item in &constraint_items {
        let (name, body) = item.split_once(':').expect("items contain a colon");
        let tag = name
            .trim()
            .rsplit_once('_')
            .map(|(tag, _)| tag.to_string())
            .ok_or_else(|| bad(format!("constraint name `{name}` lacks an index")))?;
        let toks: Vec<&str> = body.split_whitespace().collect();
        let pos = toks
            .iter()
            .position(|t| matches!(*t, "<=" | ">=" | "="))
            .ok_or_else(|| bad(format!("constraint `{name}` has no sense")))?;
        let sense = match toks[pos] {
            "<=" => Sense::Le,
            ">=" => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = match &toks[pos + 1..] {
            [r] => number(r)?,
            _ => return Err(bad(format!("constraint `{name}` needs one right-hand side"))),
        };
        constraints.push(Constraint { tag, terms: parse_terms(&toks[..pos], &index)?, sense, rhs });
    }

    Ok(MipProgram { shape, vars, constraints, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TabularDataset;
    use crate::mip::{build_program, ModelConfig};

    fn batch() -> TabularDataset {
        TabularDataset::from_rows(
            &[
                vec![Some(0.1), Some(0.5)],
                vec![None, Some(0.2)],
                vec![Some(0.6), None],
                vec![Some(0.9), Some(1.0)],
            ],
            vec![1, 0, 0, 1],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_identical() {
        for metric in FairnessMetric::ALL {
            for depth in [1, 2] {
                let p = build_program(&batch(), &ModelConfig::new(depth, 0.3, metric)).unwrap();
                let text = write_lp_string(&p);
                assert!(text.lines().all(|l| l.len() <= MAX_LINE + 40), "long line");
                assert_eq!(read_lp_str(&text).unwrap(), p);
            }
        }
    }

    #[test]
    fn declares_binaries() {
        let p = build_program(&batch(), &ModelConfig::new(1, 0.5, FairnessMetric::FnrDiff)).unwrap();
        let text = write_lp_string(&p);
        let section = text.split("Binaries\n").nth(1).unwrap().split("End").next().unwrap();
        assert_eq!(section.split_whitespace().count(), 29);
        assert!(text.contains("p_v0_j1"));
    }

    #[test]
    fn malformed_input() {
        assert!(read_lp_str("Minimize\n obj:\nEnd\n").is_err());
        let p = build_program(&batch(), &ModelConfig::new(1, 0.5, FairnessMetric::FnrDiff)).unwrap();
        let text = write_lp_string(&p).replace("End\n", "");
        assert!(read_lp_str(&text).is_err());
    }
}
