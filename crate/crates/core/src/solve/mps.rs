//! Free-format MPS export and parse-back.
//!
//! Row and column order follow the model's own deterministic ordering, so
//! identical inputs produce byte-identical files. Integer columns sit
//! inside `MARKER INTORG/INTEND` fences and every integer column gets an
//! explicit bound row (binaries `BV` or `FX` when pinned, general integers
//! `UP` with their tight cap), sidestepping the ambiguous default integer
//! bounds of the historical format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::plan::{PlanModel, Sense, VarKind};
use crate::scalar::Scalar;

use super::SolveError;

/// Write the model as free-format MPS.
pub fn export_mps<T: Scalar>(model: &PlanModel<T>, path: &Path) -> Result<(), SolveError> {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          VAXSITE_{}", model.meta.formulation.tag());
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  COST");
    for constraint in &model.constraints {
        let sense = match constraint.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        let _ = writeln!(out, " {}  {}", sense, constraint.name);
    }

    // Column-major entries: objective first, then rows in declaration order.
    let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.n_vars()];
    for &(index, coeff) in &model.objective {
        columns[index].push(("COST".to_owned(), coeff.to_f64().unwrap()));
    }
    for constraint in &model.constraints {
        for &(index, coeff) in &constraint.terms {
            columns[index].push((constraint.name.clone(), coeff.to_f64().unwrap()));
        }
    }

    let _ = writeln!(out, "COLUMNS");
    let mut in_integer_block = false;
    let mut marker = 0usize;
    for (index, variable) in model.variables.iter().enumerate() {
        let is_integer = matches!(variable.kind, VarKind::Binary | VarKind::Integer);
        if is_integer && !in_integer_block {
            let _ = writeln!(out, "    M{marker:05}    'MARKER'    'INTORG'");
            marker += 1;
            in_integer_block = true;
        }
        if !is_integer && in_integer_block {
            let _ = writeln!(out, "    M{marker:05}    'MARKER'    'INTEND'");
            marker += 1;
            in_integer_block = false;
        }
        if columns[index].is_empty() {
            // Keep the column visible to parsers.
            let _ = writeln!(out, "    {}  COST  0", variable.name);
            continue;
        }
        for (row, coeff) in &columns[index] {
            let _ = writeln!(out, "    {}  {}  {}", variable.name, row, format_value(*coeff));
        }
    }
    if in_integer_block {
        let _ = writeln!(out, "    M{marker:05}    'MARKER'    'INTEND'");
    }

    let _ = writeln!(out, "RHS");
    for constraint in &model.constraints {
        let rhs = constraint.rhs.to_f64().unwrap();
        if rhs != 0.0 {
            let _ = writeln!(out, "    RHS  {}  {}", constraint.name, format_value(rhs));
        }
    }

    let _ = writeln!(out, "BOUNDS");
    for variable in &model.variables {
        match variable.kind {
            VarKind::Binary => {
                if let Some(fixed) = variable.fixed_value() {
                    let _ = writeln!(
                        out,
                        " FX BND  {}  {}",
                        variable.name,
                        format_value(fixed.to_f64().unwrap())
                    );
                } else {
                    let _ = writeln!(out, " BV BND  {}", variable.name);
                }
            }
            VarKind::Integer => {
                let upper = variable
                    .upper
                    .map(|u| u.to_f64().unwrap())
                    .unwrap_or(f64::INFINITY);
                if upper.is_finite() {
                    let _ = writeln!(out, " UP BND  {}  {}", variable.name, format_value(upper));
                } else {
                    let _ = writeln!(out, " PL BND  {}", variable.name);
                }
            }
            VarKind::Continuous => {
                // Default [0, +inf) continuous bounds; nothing to emit.
            }
        }
    }
    let _ = writeln!(out, "ENDATA");

    std::fs::write(path, out).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `Display` for f64 already picks the shortest representation that parses
/// back to the same bits, which is what a round-trip contract needs.
fn format_value(value: f64) -> String {
    format!("{value}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub name: String,
    pub sense: Sense,
    pub terms: Vec<(String, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedColumn {
    pub name: String,
    pub integer: bool,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

/// Structural content of an MPS file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedModel {
    pub name: String,
    pub rows: Vec<ParsedRow>,
    pub columns: Vec<ParsedColumn>,
}

impl ParsedModel {
    pub fn column(&self, name: &str) -> Option<&ParsedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn row(&self, name: &str) -> Option<&ParsedRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn integer_columns(&self) -> usize {
        self.columns.iter().filter(|c| c.integer).count()
    }
}

/// Parse free-format MPS (the subset this crate emits plus common solver
/// output conventions).
pub fn parse_mps(path: &Path) -> Result<ParsedModel, SolveError> {
    let text = std::fs::read_to_string(path).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let perr = |line: u64, reason: String| SolveError::Parse {
        path: path.display().to_string(),
        line,
        reason,
    };

    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Ranges,
        Bounds,
        Done,
    }

    let mut name = String::new();
    let mut objective_row: Option<String> = None;
    let mut rows: Vec<(String, Sense)> = Vec::new();
    let mut row_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut terms: Vec<Vec<(String, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut columns: Vec<ParsedColumn> = Vec::new();
    let mut column_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut section = Section::None;
    let mut integer_mode = false;

    for (line_number, raw) in text.lines().enumerate() {
        let line_no = line_number as u64 + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let is_header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if is_header {
            match fields[0] {
                "NAME" => {
                    name = fields.get(1).copied().unwrap_or("").to_owned();
                }
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "RANGES" => section = Section::Ranges,
                "BOUNDS" => section = Section::Bounds,
                "OBJSENSE" => {}
                "ENDATA" => section = Section::Done,
                other => return Err(perr(line_no, format!("unknown section {other:?}"))),
            }
            continue;
        }
        match section {
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(perr(line_no, "ROWS entries need `sense name`".into()));
                }
                match fields[0] {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(fields[1].to_owned());
                        }
                    }
                    sense => {
                        let sense = match sense {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            "E" => Sense::Eq,
                            other => {
                                return Err(perr(line_no, format!("bad row sense {other:?}")))
                            }
                        };
                        row_index.insert(fields[1].to_owned(), rows.len());
                        rows.push((fields[1].to_owned(), sense));
                        terms.push(Vec::new());
                        rhs.push(0.0);
                    }
                }
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1].trim_matches('\'') == "MARKER" {
                    match fields[2].trim_matches('\'') {
                        "INTORG" => integer_mode = true,
                        "INTEND" => integer_mode = false,
                        other => return Err(perr(line_no, format!("bad marker {other:?}"))),
                    }
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(perr(
                        line_no,
                        "COLUMNS entries need `col row value [row value]`".into(),
                    ));
                }
                let column_id = match column_index.get(fields[0]) {
                    Some(&id) => id,
                    None => {
                        column_index.insert(fields[0].to_owned(), columns.len());
                        columns.push(ParsedColumn {
                            name: fields[0].to_owned(),
                            integer: integer_mode,
                            lower: 0.0,
                            upper: f64::INFINITY,
                            objective: 0.0,
                        });
                        columns.len() - 1
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad value {:?}", pair[1])))?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        columns[column_id].objective = value;
                    } else {
                        let &row_id = row_index
                            .get(pair[0])
                            .ok_or_else(|| perr(line_no, format!("unknown row {:?}", pair[0])))?;
                        terms[row_id].push((fields[0].to_owned(), value));
                    }
                }
            }
            Section::Rhs => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(perr(line_no, "RHS entries need `set row value`".into()));
                }
                for pair in fields[1..].chunks(2) {
                    if Some(pair[0]) == objective_row.as_deref() {
                        continue;
                    }
                    let &row_id = row_index
                        .get(pair[0])
                        .ok_or_else(|| perr(line_no, format!("unknown row {:?}", pair[0])))?;
                    rhs[row_id] = pair[1]
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad value {:?}", pair[1])))?;
                }
            }
            Section::Ranges => {
                return Err(perr(line_no, "RANGES are not used by this format".into()));
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(perr(line_no, "BOUNDS entries need `kind set col`".into()));
                }
                let column = fields[2];
                let &column_id = column_index
                    .get(column)
                    .ok_or_else(|| perr(line_no, format!("unknown column {column:?}")))?;
                let bound_value = || -> Result<f64, SolveError> {
                    fields
                        .get(3)
                        .ok_or_else(|| perr(line_no, "missing bound value".into()))?
                        .parse()
                        .map_err(|_| perr(line_no, "bad bound value".into()))
                };
                match fields[0] {
                    "UP" => columns[column_id].upper = bound_value()?,
                    "LO" => columns[column_id].lower = bound_value()?,
                    "FX" => {
                        let value = bound_value()?;
                        columns[column_id].lower = value;
                        columns[column_id].upper = value;
                    }
                    "BV" => {
                        columns[column_id].lower = 0.0;
                        columns[column_id].upper = 1.0;
                        columns[column_id].integer = true;
                    }
                    "PL" => columns[column_id].upper = f64::INFINITY,
                    "MI" => columns[column_id].lower = f64::NEG_INFINITY,
                    "FR" => {
                        columns[column_id].lower = f64::NEG_INFINITY;
                        columns[column_id].upper = f64::INFINITY;
                    }
                    "UI" => {
                        columns[column_id].upper = bound_value()?;
                        columns[column_id].integer = true;
                    }
                    "LI" => {
                        columns[column_id].lower = bound_value()?;
                        columns[column_id].integer = true;
                    }
                    other => return Err(perr(line_no, format!("bad bound kind {other:?}"))),
                }
            }
            Section::None | Section::Done => {
                return Err(perr(line_no, "data outside any section".into()));
            }
        }
    }

    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(index, (row_name, sense))| ParsedRow {
            name: row_name,
            sense,
            terms: std::mem::take(&mut terms[index]),
            rhs: rhs[index],
        })
        .collect();
    Ok(ParsedModel {
        name,
        rows,
        columns,
    })
}

/// Compare a freshly built model with a parsed MPS file: identical variable
/// and constraint counts, kinds, senses, bounds, and coefficient values.
pub fn structurally_identical<T: Scalar>(model: &PlanModel<T>, parsed: &ParsedModel) -> bool {
    structural_mismatch(model, parsed).is_none()
}

/// Human-readable description of the first structural difference, if any.
pub fn structural_mismatch<T: Scalar>(
    model: &PlanModel<T>,
    parsed: &ParsedModel,
) -> Option<String> {
    if parsed.columns.len() != model.n_vars() || parsed.rows.len() != model.n_constraints() {
        return Some(format!(
            "shape: {} vars / {} rows vs parsed {} / {}",
            model.n_vars(),
            model.n_constraints(),
            parsed.columns.len(),
            parsed.rows.len()
        ));
    }
    for (variable, column) in model.variables.iter().zip(&parsed.columns) {
        if variable.name != column.name {
            return Some(format!("column order: {} vs {}", variable.name, column.name));
        }
        let want_integer = matches!(variable.kind, VarKind::Binary | VarKind::Integer);
        if want_integer != column.integer {
            return Some(format!("integrality of {}", variable.name));
        }
        let want_upper = match (variable.kind, variable.fixed_value(), variable.upper) {
            (VarKind::Binary, Some(fixed), _) => fixed.to_f64().unwrap(),
            (VarKind::Binary, None, _) => 1.0,
            (_, _, Some(upper)) => upper.to_f64().unwrap(),
            (_, _, None) => f64::INFINITY,
        };
        if column.upper != want_upper {
            return Some(format!(
                "upper bound of {}: {} vs {}",
                variable.name, want_upper, column.upper
            ));
        }
    }
    // Objective coefficients, exactly.
    let mut want_objective: BTreeMap<&str, f64> = BTreeMap::new();
    for &(index, coeff) in &model.objective {
        want_objective.insert(&model.variables[index].name, coeff.to_f64().unwrap());
    }
    for column in &parsed.columns {
        let want = want_objective.get(column.name.as_str()).copied().unwrap_or(0.0);
        if column.objective != want {
            return Some(format!(
                "objective of {}: {} vs {}",
                column.name, want, column.objective
            ));
        }
    }
    for (constraint, row) in model.constraints.iter().zip(&parsed.rows) {
        if constraint.name != row.name
            || constraint.sense != row.sense
            || constraint.rhs.to_f64().unwrap() != row.rhs
            || constraint.terms.len() != row.terms.len()
        {
            return Some(format!(
                "row {}: name/sense/rhs/terms mismatch ({} vs {} terms, rhs {} vs {})",
                constraint.name,
                constraint.terms.len(),
                row.terms.len(),
                constraint.rhs.to_f64().unwrap(),
                row.rhs
            ));
        }
        // COLUMNS is written column-major, so parsed terms arrive in column
        // order; compare as name-sorted sets.
        let mut want: Vec<(&str, f64)> = constraint
            .terms
            .iter()
            .map(|&(index, coeff)| (model.variables[index].name.as_str(), coeff.to_f64().unwrap()))
            .collect();
        let mut got: Vec<(&str, f64)> = row
            .terms
            .iter()
            .map(|(name, coeff)| (name.as_str(), *coeff))
            .collect();
        want.sort_by(|a, b| a.0.cmp(b.0));
        got.sort_by(|a, b| a.0.cmp(b.0));
        if want != got {
            return Some(format!("row {}: term values differ", constraint.name));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{build_p1, build_p2_fixed};
    use crate::testutil::*;

    #[test]
    fn roundtrip_reproduces_structure() {
        let dir = tempfile::tempdir().unwrap();
        let inst = small_instance(3, 2);
        let model =
            build_p1(&inst.table, &inst.commuters, &inst.travel, &inst.supply, 2, true).unwrap();
        let path = dir.path().join("model.mps");
        export_mps(&model, &path).unwrap();
        let parsed = parse_mps(&path).unwrap();
        assert_eq!(parsed.columns.len(), 75);
        assert_eq!(parsed.rows.len(), model.n_constraints());
        assert_eq!(structural_mismatch(&model, &parsed), None);
        // Columns preserve the model ordering: x block first.
        assert_eq!(parsed.columns[0].name, "X_00");
        assert_eq!(parsed.columns[3].name, "Y_00_00_00");
    }

    #[test]
    fn fixed_sites_export_fx_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let inst = small_instance(3, 2);
        let scores = uniform_scores(3, 2);
        let model = build_p2_fixed(
            &inst.table,
            &inst.commuters,
            &inst.travel,
            &inst.supply,
            2,
            &[0.5; 3],
            &scores,
            10.0,
            150.0,
            &[2],
        )
        .unwrap();
        let path = dir.path().join("fixed.mps");
        export_mps(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains(" FX BND  X_02  1"));
        assert!(text.contains(" FX BND  X_00  0"));
        let parsed = parse_mps(&path).unwrap();
        assert_eq!(parsed.column("X_02").unwrap().lower, 1.0);
        assert_eq!(structural_mismatch(&model, &parsed), None);
    }

    #[test]
    fn export_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let inst = small_instance(4, 2);
        let model =
            build_p1(&inst.table, &inst.commuters, &inst.travel, &inst.supply, 2, true).unwrap();
        let a = dir.path().join("a.mps");
        let b = dir.path().join("b.mps");
        export_mps(&model, &a).unwrap();
        export_mps(&model, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
