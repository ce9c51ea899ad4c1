//! Free-format MPS writer and a minimal reader for round-trip checks.
//!
//! Rows and columns are written in problem order, one coefficient per
//! COLUMNS line. Binaries sit between `INTORG`/`INTEND` markers. Every
//! column gets explicit bounds so the reader never relies on MPS defaults.
//! Numbers use Rust's shortest round-trip formatting, so values survive a
//! write/read cycle bit-for-bit.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::problem::{Constraint, Problem, Relation, VarKind, Variable};

const OBJ_ROW: &str = "COST";

#[derive(Debug, Error, PartialEq)]
pub enum MpsError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown row {0}")]
    UnknownRow(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
}

fn token(name: &str) -> String {
    if name.is_empty() {
        return "_".into();
    }
    name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}

pub fn write_mps(p: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", token(&p.name));
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for c in &p.constraints {
        let kind = match c.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        let _ = writeln!(out, " {kind}  {}", token(&c.name));
    }

    // column-wise coefficient lists
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.variables.len()];
    for (i, c) in p.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            cols[j].push((i, a));
        }
    }
    let cost = p.cost_vector();

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, v) in p.variables.iter().enumerate() {
        let is_int = v.kind == VarKind::Binary;
        if is_int != in_int {
            let tag = if is_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARKER{marker} 'MARKER' '{tag}'");
            marker += 1;
            in_int = is_int;
        }
        let name = token(&v.name);
        let _ = writeln!(out, "    {name} {OBJ_ROW} {}", cost[j]);
        for &(i, a) in &cols[j] {
            let _ = writeln!(out, "    {name} {} {a}", token(&p.constraints[i].name));
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    for c in &p.constraints {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    RHS {} {}", token(&c.name), c.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for v in &p.variables {
        let name = token(&v.name);
        let (lo, up) = (v.lower, v.upper);
        if v.kind == VarKind::Binary && lo == 0.0 && up == 1.0 {
            let _ = writeln!(out, " BV BND {name}");
        } else if lo == up {
            let _ = writeln!(out, " FX BND {name} {lo}");
        } else if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            let _ = writeln!(out, " FR BND {name}");
        } else {
            if lo == f64::NEG_INFINITY {
                let _ = writeln!(out, " MI BND {name}");
            } else {
                let _ = writeln!(out, " LO BND {name} {lo}");
            }
            if up == f64::INFINITY {
                let _ = writeln!(out, " PL BND {name}");
            } else {
                let _ = writeln!(out, " UP BND {name} {up}");
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

pub fn read_mps(text: &str) -> Result<Problem, MpsError> {
    let mut p = Problem::default();
    let mut section = Section::None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut obj_row: Option<String> = None;
    let mut in_int = false;
    let mut objective: Vec<(usize, f64)> = Vec::new();

    let num = |s: &str, line: usize| -> Result<f64, MpsError> {
        s.parse::<f64>().map_err(|_| MpsError::Syntax {
            line,
            msg: format!("bad number {s:?}"),
        })
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match fields[0] {
                "NAME" => {
                    p.name = fields.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                other => {
                    return Err(MpsError::Syntax {
                        line,
                        msg: format!("unknown section {other}"),
                    })
                }
            };
            continue;
        }
        let short = || MpsError::Syntax {
            line,
            msg: "too few fields".into(),
        };
        match section {
            Section::Rows => {
                let [kind, name] = fields[..] else { return Err(short()) };
                let relation = match kind {
                    "N" => {
                        obj_row.get_or_insert_with(|| name.to_string());
                        continue;
                    }
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    k => {
                        return Err(MpsError::Syntax {
                            line,
                            msg: format!("row type {k}"),
                        })
                    }
                };
                row_index.insert(name.to_string(), p.constraints.len());
                p.constraints.push(Constraint::new(name, Vec::new(), relation, 0.0));
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    in_int = match fields[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        m => {
                            return Err(MpsError::Syntax {
                                line,
                                msg: format!("marker {m}"),
                            })
                        }
                    };
                    continue;
                }
                if fields.len() < 3 || fields.len().is_multiple_of(2) {
                    return Err(short());
                }
                let name = fields[0];
                let j = *col_index.entry(name.to_string()).or_insert_with(|| {
                    let kind = if in_int { VarKind::Binary } else { VarKind::Continuous };
                    let upper = if in_int { 1.0 } else { f64::INFINITY };
                    p.variables.push(Variable {
                        name: name.to_string(),
                        lower: 0.0,
                        upper,
                        kind,
                    });
                    p.variables.len() - 1
                });
                for pair in fields[1..].chunks(2) {
                    let v = num(pair[1], line)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        if v != 0.0 {
                            objective.push((j, v));
                        }
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| MpsError::UnknownRow(pair[0].into()))?;
                        p.constraints[i].coeffs.push((j, v));
                    }
                }
            }
            Section::Rhs => {
                if fields.len() < 3 {
                    return Err(short());
                }
                for pair in fields[1..].chunks(2) {
                    let [row, value] = pair else { return Err(short()) };
                    let v = num(value, line)?;
                    if Some(*row) == obj_row.as_deref() {
                        continue;
                    }
                    let &i = row_index
                        .get(*row)
                        .ok_or_else(|| MpsError::UnknownRow(row.to_string()))?;
                    p.constraints[i].rhs = v;
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(short());
                }
                let &j = col_index
                    .get(fields[2])
                    .ok_or_else(|| MpsError::UnknownColumn(fields[2].into()))?;
                let value = || fields.get(3).ok_or_else(short).and_then(|s| num(s, line));
                let var = &mut p.variables[j];
                match fields[0] {
                    "LO" => var.lower = value()?,
                    "UP" => var.upper = value()?,
                    "FX" => {
                        let v = value()?;
                        var.lower = v;
                        var.upper = v;
                    }
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    "BV" => {
                        var.kind = VarKind::Binary;
                        var.lower = 0.0;
                        var.upper = 1.0;
                    }
                    b => {
                        return Err(MpsError::Syntax {
                            line,
                            msg: format!("bound type {b}"),
                        })
                    }
                }
            }
            Section::None | Section::Done => {
                return Err(MpsError::Syntax {
                    line,
                    msg: "data outside a section".into(),
                })
            }
        }
    }
    p.objective = objective;
    Ok(p)
}

impl Problem {
    /// Same problem with coefficient lists sorted by column, duplicates
    /// merged and zeros dropped; the form `read_mps` reproduces.
    pub fn canonical(&self) -> Problem {
        fn canon(list: &[(usize, f64)]) -> Vec<(usize, f64)> {
            let mut v = list.to_vec();
            v.sort_by_key(|&(j, _)| j);
            let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
            for (j, a) in v {
                match out.last_mut() {
                    Some((lj, la)) if *lj == j => *la += a,
                    _ => out.push((j, a)),
                }
            }
            out.retain(|&(_, a)| a != 0.0);
            out
        }
        Problem {
            name: token(&self.name),
            variables: self
                .variables
                .iter()
                .map(|v| Variable {
                    name: token(&v.name),
                    ..v.clone()
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    name: token(&c.name),
                    coeffs: canon(&c.coeffs),
                    ..c.clone()
                })
                .collect(),
            objective: canon(&self.objective),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_lp_round_trips() {
        let mut p = Problem::new("one");
        p.add_variable(Variable::continuous("x", 0.0, 1.0));
        p.objective = vec![(0, -1.0)];
        let text = write_mps(&p);
        let col_lines = text
            .lines()
            .skip_while(|l| *l != "COLUMNS")
            .skip(1)
            .take_while(|l| l.starts_with(' '))
            .count();
        assert_eq!(col_lines, 1);
        assert_eq!(read_mps(&text).unwrap(), p.canonical());
    }

    #[test]
    fn binaries_are_wrapped_in_markers() {
        let mut p = Problem::new("b");
        p.add_variable(Variable::continuous("x", -1.5, f64::INFINITY));
        p.add_variable(Variable::binary("z"));
        p.add_constraint(Constraint::new("link", vec![(0, 1.0), (1, -3.0)], Relation::Le, 0.0));
        let text = write_mps(&p);
        let lines: Vec<&str> = text.lines().collect();
        let open = lines.iter().position(|l| l.contains("'INTORG'")).unwrap();
        let z = lines.iter().position(|l| l.trim_start().starts_with("z ")).unwrap();
        let close = lines.iter().position(|l| l.contains("'INTEND'")).unwrap();
        assert!(open < z && z < close);
        assert_eq!(read_mps(&text).unwrap(), p.canonical());
    }

    #[test]
    fn bound_kinds_survive() {
        let mut p = Problem::new("bounds");
        p.add_variable(Variable::continuous("free", f64::NEG_INFINITY, f64::INFINITY));
        p.add_variable(Variable::continuous("mi", f64::NEG_INFINITY, 2.5));
        p.add_variable(Variable::continuous("fx", 0.1, 0.1));
        p.add_variable(Variable::continuous("pl", 1e-7, f64::INFINITY));
        p.add_variable(Variable {
            name: "fixed_bin".into(),
            lower: 1.0,
            upper: 1.0,
            kind: VarKind::Binary,
        });
        p.add_constraint(Constraint::new(
            "r",
            vec![(0, 1.0 / 3.0), (3, 2.0)],
            Relation::Ge,
            -4.25,
        ));
        p.objective = vec![(1, 0.1), (2, 3.0)];
        let back = read_mps(&write_mps(&p)).unwrap();
        assert_eq!(back, p.canonical());
    }

    #[test]
    fn unknown_row_is_an_error() {
        let text = "NAME x\nROWS\n N  COST\nCOLUMNS\n    x nope 1\nENDATA\n";
        assert_eq!(read_mps(text), Err(MpsError::UnknownRow("nope".into())));
    }
}
