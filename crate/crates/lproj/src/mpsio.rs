//! File formats: MPS ingestion, JSON instance/matrix serialization, and the
//! dataset directory layout (`manifest.json` plus one instance file per id).
//!
//! MPS files follow the minimize convention; ingestion negates the objective
//! so everything downstream is uniformly a maximization.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::densela::DenseMatrix;
use crate::error::{Error, Result};
use crate::lp::LpInstance;
use crate::project::{MethodTag, ProjectionMatrix};
use crate::reform::GeneralLp;

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::ParseError { line, message: message.into() }
}

// ---------------------------------------------------------------------------
// MPS
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Objective,
    Le,
    Ge,
    Eq,
}

/// Parse free-format MPS text into a `GeneralLp`.
///
/// Sections: NAME, ROWS (N/L/G/E), COLUMNS, RHS, optional BOUNDS
/// (LO/UP/FX/FR/MI/PL), ENDATA. RANGES is rejected. The N row is negated so
/// the result maximizes; unmentioned variables default to `0 <= x < inf`.
pub fn parse_mps(text: &str) -> Result<GeneralLp> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }

    let mut section = Section::None;
    let mut name = String::from("mps");
    let mut row_kind: HashMap<String, RowKind> = HashMap::new();
    let mut row_order: Vec<String> = Vec::new();
    let mut objective_row: Option<String> = None;
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut col_order: Vec<String> = Vec::new();
    // entries[(row, col)] = coefficient
    let mut entries: HashMap<(String, String), f64> = HashMap::new();
    let mut rhs: HashMap<String, f64> = HashMap::new();
    let mut bounds: HashMap<String, (f64, f64)> = HashMap::new();

    let parse_num = |tok: &str, lineno: usize| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| perr(lineno, format!("bad number '{tok}'")))
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let is_header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if is_header {
            let head = toks[0].to_ascii_uppercase();
            match head.as_str() {
                "NAME" => {
                    if let Some(n) = toks.get(1) {
                        name = n.to_string();
                    }
                }
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "BOUNDS" => section = Section::Bounds,
                "RANGES" => return Err(perr(lineno, "RANGES section unsupported")),
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(perr(lineno, format!("unknown section '{other}'"))),
            }
            continue;
        }
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(perr(lineno, "ROWS line needs a type and a name"));
                }
                let kind = match toks[0].to_ascii_uppercase().as_str() {
                    "N" => RowKind::Objective,
                    "L" => RowKind::Le,
                    "G" => RowKind::Ge,
                    "E" => RowKind::Eq,
                    other => return Err(perr(lineno, format!("unknown row type '{other}'"))),
                };
                let rname = toks[1].to_string();
                if row_kind.contains_key(&rname) {
                    return Err(perr(lineno, format!("duplicate row name '{rname}'")));
                }
                if kind == RowKind::Objective {
                    if objective_row.is_some() {
                        return Err(perr(lineno, "multiple N rows"));
                    }
                    objective_row = Some(rname.clone());
                } else {
                    row_order.push(rname.clone());
                }
                row_kind.insert(rname, kind);
            }
            Section::Columns => {
                // COLUMN ROW VALUE [ROW VALUE]; skip marker lines
                if toks.len() >= 3 && toks[1].to_ascii_uppercase() == "'MARKER'" {
                    return Err(perr(lineno, "integer markers unsupported"));
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(perr(lineno, "COLUMNS line needs 3 or 5 tokens"));
                }
                let col = toks[0].to_string();
                if !col_index.contains_key(&col) {
                    col_index.insert(col.clone(), col_order.len());
                    col_order.push(col.clone());
                }
                for pair in toks[1..].chunks(2) {
                    let row = pair[0].to_string();
                    if !row_kind.contains_key(&row) {
                        return Err(perr(lineno, format!("unknown row '{row}'")));
                    }
                    let val = parse_num(pair[1], lineno)?;
                    *entries.entry((row, col.clone())).or_insert(0.0) += val;
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(perr(lineno, "RHS line needs 3 or 5 tokens"));
                }
                for pair in toks[1..].chunks(2) {
                    let row = pair[0].to_string();
                    if !row_kind.contains_key(&row) {
                        return Err(perr(lineno, format!("unknown row '{row}'")));
                    }
                    rhs.insert(row, parse_num(pair[1], lineno)?);
                }
            }
            Section::Bounds => {
                // TYPE SET COLUMN [VALUE]
                if toks.len() < 3 {
                    return Err(perr(lineno, "BOUNDS line needs at least 3 tokens"));
                }
                let kind = toks[0].to_ascii_uppercase();
                let col = toks[2].to_string();
                if !col_index.contains_key(&col) {
                    return Err(perr(lineno, format!("unknown column '{col}'")));
                }
                let cur = bounds
                    .entry(col)
                    .or_insert((0.0, f64::INFINITY));
                let val = if toks.len() >= 4 {
                    Some(parse_num(toks[3], lineno)?)
                } else {
                    None
                };
                let need = |v: Option<f64>| v.ok_or_else(|| perr(lineno, "bound needs a value"));
                match kind.as_str() {
                    "LO" => cur.0 = need(val)?,
                    "UP" => cur.1 = need(val)?,
                    "FX" => {
                        let v = need(val)?;
                        *cur = (v, v);
                    }
                    "FR" => *cur = (f64::NEG_INFINITY, f64::INFINITY),
                    "MI" => cur.0 = f64::NEG_INFINITY,
                    "PL" => cur.1 = f64::INFINITY,
                    other => return Err(perr(lineno, format!("unknown bound type '{other}'"))),
                }
            }
            Section::None | Section::Done => {
                return Err(perr(lineno, "data outside any section"));
            }
        }
    }
    if section != Section::Done {
        return Err(perr(text.lines().count(), "missing ENDATA"));
    }
    let obj = objective_row.ok_or_else(|| perr(0, "no N row"))?;
    let n = col_order.len();
    if n == 0 {
        return Err(perr(0, "no columns"));
    }

    // minimize convention -> negate into a maximization
    let w: Vec<f64> = col_order
        .iter()
        .map(|c| -entries.get(&(obj.clone(), c.clone())).copied().unwrap_or(0.0))
        .collect();

    let mut ineq_rows: Vec<Vec<f64>> = Vec::new();
    let mut b_ineq: Vec<f64> = Vec::new();
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    let mut b_eq: Vec<f64> = Vec::new();
    for rname in &row_order {
        let coeffs: Vec<f64> = col_order
            .iter()
            .map(|c| entries.get(&(rname.clone(), c.clone())).copied().unwrap_or(0.0))
            .collect();
        let rv = rhs.get(rname).copied().unwrap_or(0.0);
        match row_kind[rname] {
            RowKind::Le => {
                ineq_rows.push(coeffs);
                b_ineq.push(rv);
            }
            RowKind::Ge => {
                ineq_rows.push(coeffs.iter().map(|v| -v).collect());
                b_ineq.push(-rv);
            }
            RowKind::Eq => {
                eq_rows.push(coeffs);
                b_eq.push(rv);
            }
            RowKind::Objective => unreachable!(),
        }
    }

    let bound_list: Vec<(f64, f64)> = col_order
        .iter()
        .map(|c| bounds.get(c).copied().unwrap_or((0.0, f64::INFINITY)))
        .collect();

    let to_matrix = |rows: &[Vec<f64>]| {
        if rows.is_empty() {
            DenseMatrix::zeros(0, n)
        } else {
            DenseMatrix::from_rows(rows)
        }
    };

    Ok(GeneralLp {
        w,
        a_ineq: to_matrix(&ineq_rows),
        b_ineq,
        a_eq: to_matrix(&eq_rows),
        b_eq,
        bounds: bound_list,
        id: name,
    })
}

// ---------------------------------------------------------------------------
// JSON instance / matrix formats
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    id: String,
    n: usize,
    m: usize,
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

pub fn write_instance_json(inst: &LpInstance) -> Result<String> {
    if !inst.is_finite() {
        return Err(perr(0, "non-finite entry in instance"));
    }
    let doc = InstanceJson {
        id: inst.id.clone(),
        n: inst.num_vars(),
        m: inst.num_constraints(),
        c: inst.c.clone(),
        a: (0..inst.num_constraints()).map(|i| inst.a.row(i).to_vec()).collect(),
        b: inst.b.clone(),
    };
    serde_json::to_string(&doc).map_err(|e| perr(0, e.to_string()))
}

pub fn read_instance_json(text: &str) -> Result<LpInstance> {
    let doc: InstanceJson =
        serde_json::from_str(text).map_err(|e| perr(e.line(), e.to_string()))?;
    if doc.c.len() != doc.n || doc.b.len() != doc.m || doc.a.len() != doc.m {
        return Err(perr(0, "dimension fields disagree with array lengths"));
    }
    if doc.a.iter().any(|r| r.len() != doc.n) {
        return Err(perr(0, "ragged constraint matrix"));
    }
    let a = if doc.m == 0 {
        DenseMatrix::zeros(0, doc.n)
    } else {
        DenseMatrix::from_rows(&doc.a)
    };
    let inst = LpInstance::new(doc.c, a, doc.b, doc.id);
    if !inst.is_finite() {
        return Err(perr(0, "non-finite entry in instance"));
    }
    Ok(inst)
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    k: usize,
    method_tag: MethodTag,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
}

pub fn write_matrix(pm: &ProjectionMatrix) -> Result<String> {
    if !pm.p.is_finite() {
        return Err(perr(0, "non-finite entry in matrix"));
    }
    let doc = MatrixJson {
        n: pm.n(),
        k: pm.k,
        method_tag: pm.method_tag,
        p: (0..pm.n()).map(|i| pm.p.row(i).to_vec()).collect(),
    };
    serde_json::to_string(&doc).map_err(|e| perr(0, e.to_string()))
}

pub fn read_matrix(text: &str) -> Result<ProjectionMatrix> {
    let doc: MatrixJson =
        serde_json::from_str(text).map_err(|e| perr(e.line(), e.to_string()))?;
    if doc.k >= doc.n {
        return Err(Error::ShapeError(format!(
            "matrix k = {} must be below n = {}",
            doc.k, doc.n
        )));
    }
    if doc.p.len() != doc.n || doc.p.iter().any(|r| r.len() != doc.k) {
        return Err(perr(0, "P shape disagrees with n/k"));
    }
    let p = DenseMatrix::from_rows(&doc.p);
    let mut pm = ProjectionMatrix::new(p, doc.method_tag);
    pm.k = doc.k;
    Ok(pm)
}

// ---------------------------------------------------------------------------
// Dataset directories
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub identical_a: bool,
    /// Relative file path per id.
    pub files: HashMap<String, String>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        for id in self.train_ids.iter().chain(&self.test_ids) {
            if !self.files.contains_key(id) {
                return Err(Error::ConfigError(format!("id '{id}' has no file entry")));
            }
        }
        if self.train_ids.iter().any(|id| self.test_ids.contains(id)) {
            return Err(Error::ConfigError("train/test ids overlap".into()));
        }
        Ok(())
    }
}

/// Write `manifest.json` plus one instance file per id under `dir`.
pub fn write_dataset(
    dir: &Path,
    name: &str,
    train: &[LpInstance],
    test: &[LpInstance],
    identical_a: bool,
) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let first = train.first().or_else(|| test.first());
    let (n, m) = first.map_or((0, 0), |i| (i.num_vars(), i.num_constraints()));
    let mut files = HashMap::new();
    for inst in train.iter().chain(test) {
        let fname = format!("{}.json", inst.id);
        fs::write(dir.join(&fname), write_instance_json(inst)?)?;
        files.insert(inst.id.clone(), fname);
    }
    let manifest = DatasetManifest {
        name: name.to_string(),
        n,
        m,
        train_ids: train.iter().map(|i| i.id.clone()).collect(),
        test_ids: test.iter().map(|i| i.id.clone()).collect(),
        identical_a,
        files,
    };
    manifest.validate()?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| perr(0, e.to_string()))?,
    )?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| perr(e.line(), e.to_string()))?;
    manifest.validate()?;
    for path in manifest.files.values() {
        if !dir.join(path).exists() {
            return Err(Error::ConfigError(format!("missing instance file '{path}'")));
        }
    }
    Ok(manifest)
}

pub fn read_instances(dir: &Path, manifest: &DatasetManifest, ids: &[String]) -> Result<Vec<LpInstance>> {
    ids.iter()
        .map(|id| {
            let path: &String = manifest
                .files
                .get(id)
                .ok_or_else(|| Error::ConfigError(format!("unknown id '{id}'")))?;
            read_instance_json(&fs::read_to_string(dir.join(path))?)
        })
        .collect()
}

pub fn dataset_path(dir: &str) -> PathBuf {
    PathBuf::from(dir)
}
