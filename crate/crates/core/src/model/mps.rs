//! Free-format MPS export and import so problems can be cross-checked with
//! external solvers. Exported files always carry `OBJSENSE MAX` and declare
//! every variable binary via `BV` bounds; import requires the same shape.
//! Variable kinds and raw edge weights are not representable in MPS, so an
//! imported problem carries structure only.

use std::fmt::Write as _;
use std::path::Path;

use super::ilp::{ConstraintTag, IlpProblem, LinearConstraint, Sense, VarId};
use super::ModelError;

fn row_name(idx: usize, tag: &ConstraintTag) -> String {
    let sanitized: String = tag
        .name()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("R{idx:06}_{sanitized}")
}

/// Shortest decimal form that round-trips through f64.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn export_mps(p: &IlpProblem) -> Result<String, ModelError> {
    if p.n_vars() == 0 {
        return Err(ModelError::NothingToExport);
    }
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", p.name);
    out.push_str("OBJSENSE\n    MAX\nROWS\n N  OBJ\n");
    for (idx, c) in p.constraints.iter().enumerate() {
        let t = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {}  {}", t, row_name(idx, &c.tag));
    }
    out.push_str("COLUMNS\n");
    // Entries grouped per column so import rebuilds the variable order from
    // first appearance; the objective entry is emitted even when zero.
    let mut per_var: Vec<Vec<(String, f64)>> = vec![Vec::new(); p.n_vars()];
    for (idx, c) in p.constraints.iter().enumerate() {
        for &(VarId(v), coeff) in &c.terms {
            per_var[v].push((row_name(idx, &c.tag), coeff));
        }
    }
    for (v, var) in p.vars.iter().enumerate() {
        let _ = writeln!(out, "    {}  OBJ  {}", var.name, num(var.weight));
        for (row, coeff) in &per_var[v] {
            let _ = writeln!(out, "    {}  {}  {}", var.name, row, num(*coeff));
        }
    }
    out.push_str("RHS\n");
    for (idx, c) in p.constraints.iter().enumerate() {
        let _ = writeln!(out, "    RHS  {}  {}", row_name(idx, &c.tag), num(c.rhs));
    }
    out.push_str("BOUNDS\n");
    for var in &p.vars {
        let _ = writeln!(out, " BV BND  {}", var.name);
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

pub fn write_mps(p: &IlpProblem, path: &Path) -> Result<(), ModelError> {
    let text = export_mps(p)?;
    std::fs::write(path, text)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

fn parse_tag(row: &str) -> ConstraintTag {
    // R{idx:06}_{Tag}; anything else keeps the whole row name.
    let tag = row
        .strip_prefix('R')
        .filter(|r| r.len() > 7 && r.as_bytes()[..6].iter().all(u8::is_ascii_digit))
        .map(|r| &r[7..])
        .unwrap_or(row);
    ConstraintTag::from_name(tag)
}

pub fn import_mps(text: &str) -> Result<IlpProblem, ModelError> {
    use std::collections::HashMap;

    #[derive(PartialEq)]
    enum Section {
        None,
        ObjSense,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }
    let err = |line: usize, message: &str| ModelError::MpsParse {
        line,
        message: message.to_string(),
    };

    let mut name = String::new();
    let mut sense_max = false;
    let mut section = Section::None;
    let mut rows: Vec<(String, Sense)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut obj_row: Option<String> = None;
    let mut p = IlpProblem::new("");
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut binary: Vec<bool> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let is_header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if is_header {
            match toks[0] {
                "NAME" => {
                    name = toks.get(1).unwrap_or(&"").to_string();
                    continue;
                }
                "OBJSENSE" => {
                    if let Some(&v) = toks.get(1) {
                        sense_max = v.eq_ignore_ascii_case("MAX");
                        if !sense_max {
                            return Err(err(line, "only OBJSENSE MAX is supported"));
                        }
                        section = Section::None;
                    } else {
                        section = Section::ObjSense;
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "RANGES" => return Err(err(line, "RANGES section is not supported")),
                "ENDATA" => {
                    section = Section::Done;
                    continue;
                }
                other => return Err(err(line, &format!("unknown section {other}"))),
            }
        }
        match section {
            Section::ObjSense => {
                sense_max = toks[0].eq_ignore_ascii_case("MAX");
                if !sense_max {
                    return Err(err(line, "only OBJSENSE MAX is supported"));
                }
                section = Section::None;
            }
            Section::Rows => {
                let &[t, r] = &toks[..] else {
                    return Err(err(line, "expected <type> <row>"));
                };
                match t {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(err(line, "multiple N rows"));
                        }
                        obj_row = Some(r.to_string());
                    }
                    "L" | "G" | "E" => {
                        let s = match t {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            _ => Sense::Eq,
                        };
                        row_index.insert(r.to_string(), rows.len());
                        rows.push((r.to_string(), s));
                        terms.push(Vec::new());
                        rhs.push(0.0);
                    }
                    other => return Err(err(line, &format!("unknown row type {other}"))),
                }
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    continue;
                }
                if toks.len() < 3 || toks.len().is_multiple_of(2) {
                    return Err(err(line, "expected <col> (<row> <value>)+"));
                }
                let col = toks[0];
                let v = *col_index.entry(col.to_string()).or_insert_with(|| {
                    binary.push(false);
                    p.add_var(col, 0.0, None).0
                });
                for pair in toks[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(line, &format!("bad number {}", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        p.vars[v].weight += value;
                    } else {
                        let r = *row_index
                            .get(pair[0])
                            .ok_or_else(|| err(line, &format!("unknown row {}", pair[0])))?;
                        terms[r].push((v, value));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() < 3 || toks.len().is_multiple_of(2) {
                    return Err(err(line, "expected <set> (<row> <value>)+"));
                }
                for pair in toks[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(line, &format!("bad number {}", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue;
                    }
                    let r = *row_index
                        .get(pair[0])
                        .ok_or_else(|| err(line, &format!("unknown row {}", pair[0])))?;
                    rhs[r] = value;
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(err(line, "expected <type> <set> <col> [value]"));
                }
                let col = *col_index
                    .get(toks[2])
                    .ok_or_else(|| err(line, &format!("unknown column {}", toks[2])))?;
                match toks[0] {
                    "BV" => binary[col] = true,
                    // 0/1 box bounds describe the same binary domain.
                    "UP" if toks.get(3) == Some(&"1") => binary[col] = true,
                    "LO" if toks.get(3) == Some(&"0") => {}
                    other => {
                        return Err(err(line, &format!("unsupported bound type {other}")))
                    }
                }
            }
            Section::None | Section::Done => {
                return Err(err(line, "data outside any section"));
            }
        }
    }
    if !sense_max {
        return Err(err(0, "missing OBJSENSE MAX"));
    }
    if let Some(v) = binary.iter().position(|&b| !b) {
        return Err(err(0, &format!("variable {} has no binary bound", p.vars[v].name)));
    }
    p.name = name;
    for (r, (row, sense)) in rows.iter().enumerate() {
        p.constraints.push(LinearConstraint {
            tag: parse_tag(row),
            terms: terms[r].iter().map(|&(v, c)| (VarId(v), c)).collect(),
            sense: *sense,
            rhs: rhs[r],
        });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ilp::VarKind;

    fn sample() -> IlpProblem {
        let mut p = IlpProblem::new("sample");
        let a = p.add_var("xa0", 1.5, Some(VarKind::Choice { index: 0 }));
        let b = p.add_var("xa1", -0.25, Some(VarKind::Choice { index: 1 }));
        let c = p.add_var("xq0", 0.0, Some(VarKind::Constituent { index: 0 }));
        p.add_constraint(
            ConstraintTag::ChooseOnlySingleOption,
            vec![(a, 1.0), (b, 1.0)],
            Sense::Le,
            1.0,
        );
        p.add_constraint(
            ConstraintTag::MinActiveQCons,
            vec![(c, 1.0)],
            Sense::Ge,
            1.0,
        );
        p.add_constraint(
            ConstraintTag::EssentialTermForcing,
            vec![(c, 1.0)],
            Sense::Eq,
            1.0,
        );
        // Infeasibility marker row survives the trip.
        p.add_constraint(ConstraintTag::EssentialTermForcing, vec![], Sense::Eq, 1.0);
        p
    }

    #[test]
    fn round_trip_preserves_structure() {
        let p = sample();
        let text = export_mps(&p).unwrap();
        let q = import_mps(&text).unwrap();
        assert_eq!(q.name, p.name);
        assert_eq!(q.n_vars(), p.n_vars());
        for (a, b) in p.vars.iter().zip(&q.vars) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.weight, b.weight);
        }
        assert_eq!(q.n_constraints(), p.n_constraints());
        for (a, b) in p.constraints.iter().zip(&q.constraints) {
            assert_eq!(a.tag, b.tag);
            assert_eq!(a.terms, b.terms);
            assert_eq!(a.sense, b.sense);
            assert_eq!(a.rhs, b.rhs);
        }
        // And a second trip is byte-identical.
        assert_eq!(export_mps(&q).unwrap(), text);
    }

    #[test]
    fn export_declares_max_and_binaries() {
        let text = export_mps(&sample()).unwrap();
        assert!(text.contains("OBJSENSE\n    MAX"));
        assert_eq!(text.matches(" BV BND  ").count(), 3);
        assert!(text.contains(" E  R000003_EssentialTermForcing"));
    }

    #[test]
    fn empty_problem_is_an_error() {
        assert!(matches!(
            export_mps(&IlpProblem::new("void")),
            Err(ModelError::NothingToExport)
        ));
    }

    #[test]
    fn import_rejects_minimization_and_ranges() {
        let min = "NAME  x\nOBJSENSE\n    MIN\nROWS\n N  OBJ\nENDATA\n";
        assert!(matches!(import_mps(min), Err(ModelError::MpsParse { .. })));
        let ranges = "NAME  x\nOBJSENSE\n    MAX\nROWS\n N  OBJ\nRANGES\nENDATA\n";
        assert!(matches!(import_mps(ranges), Err(ModelError::MpsParse { .. })));
    }

    #[test]
    fn import_reports_unknown_row_with_line() {
        let text = "NAME  x\nOBJSENSE\n    MAX\nROWS\n N  OBJ\nCOLUMNS\n    c1  NOPE  1\nENDATA\n";
        match import_mps(text) {
            Err(ModelError::MpsParse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weights_round_trip_shortest_form() {
        let mut p = IlpProblem::new("w");
        let v = p.add_var("x0", 0.1 + 0.2, None);
        p.add_constraint(ConstraintTag::Custom("c".into()), vec![(v, 1.0 / 3.0)], Sense::Le, 1.0);
        let q = import_mps(&export_mps(&p).unwrap()).unwrap();
        assert_eq!(q.vars[0].weight, 0.1 + 0.2);
        assert_eq!(q.constraints[0].terms[0].1, 1.0 / 3.0);
    }
}
