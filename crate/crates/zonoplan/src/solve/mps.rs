//! Free-format MPS export and re-import.
//!
//! The model carries both the factor variables and the decoded lifted
//! vector so the file is a faithful, solver-ready copy of the [`Miqp`]:
//!
//! * `xF{i}` continuous factors in `[0,1]`, `xB{i}` binary factors,
//!   `xL{i}` free lifted coordinates;
//! * `EQ{r}` rows: the factor equality system `A [xF; xB] = b`;
//! * `DC{i}` rows: the decode map `G [xF; xB] - xL = -c`;
//! * `QMATRIX`: the full symmetric matrix `2 P` over `xL`, so the
//!   objective `1/2 x' Q x` equals `z' P z`;
//! * a `* INDEX n_x n_b n_u n_steps` comment preserving the lifted
//!   coordinate bookkeeping (ignored by other readers).
//!
//! Numbers print in shortest round-trip form and orderings are fixed,
//! so exports are byte-stable across runs. See `docs/mps-dialect.md`
//! for the grammar.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::num::sparse::SpMat;
use crate::reach::LiftedIndex;
use crate::solve::miqp::Miqp;
use crate::solve::{SolveError, SolveResult};

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

/// Render the model as an MPS string (deterministic).
pub fn write_mps_string(miqp: &Miqp, name: &str) -> String {
    let m = miqp.num_factors();
    let n = miqp.p.nrows();
    let n_c = miqp.a.nrows();
    let idx = miqp.index;
    let mut s = String::new();
    let _ = writeln!(s, "* zonoplan model export");
    let _ = writeln!(
        s,
        "* INDEX {} {} {} {}",
        idx.n_x, idx.n_b, idx.n_u, idx.n_steps
    );
    let _ = writeln!(s, "NAME {name}");
    let _ = writeln!(s, "ROWS");
    let _ = writeln!(s, " N OBJ");
    for r in 0..n_c {
        let _ = writeln!(s, " E EQ{r}");
    }
    for i in 0..n {
        let _ = writeln!(s, " E DC{i}");
    }

    // Column-major views of the factor blocks.
    let at = miqp.a.transpose();
    let gt = miqp.decode_g.transpose();
    let var_name = |j: usize| {
        if j < miqp.n_cont {
            format!("xF{j}")
        } else {
            format!("xB{}", j - miqp.n_cont)
        }
    };

    let _ = writeln!(s, "COLUMNS");
    let mut in_int = false;
    for j in 0..m {
        let is_bin = j >= miqp.n_cont;
        if is_bin && !in_int {
            let _ = writeln!(s, " M1 'MARKER' 'INTORG'");
            in_int = true;
        }
        let name = var_name(j);
        let mut wrote = false;
        for (r, v) in at.row(j) {
            let _ = writeln!(s, " {name} EQ{r} {}", fmt_f(v));
            wrote = true;
        }
        for (r, v) in gt.row(j) {
            let _ = writeln!(s, " {name} DC{r} {}", fmt_f(v));
            wrote = true;
        }
        if !wrote {
            // Declare otherwise-empty columns through the objective.
            let _ = writeln!(s, " {name} OBJ 0.0");
        }
    }
    if in_int {
        let _ = writeln!(s, " M2 'MARKER' 'INTEND'");
    }
    for i in 0..n {
        let _ = writeln!(s, " xL{i} DC{i} -1.0");
    }

    let _ = writeln!(s, "RHS");
    for r in 0..n_c {
        if miqp.b[r] != 0.0 {
            let _ = writeln!(s, " RHS EQ{r} {}", fmt_f(miqp.b[r]));
        }
    }
    for i in 0..n {
        if miqp.decode_c[i] != 0.0 {
            let _ = writeln!(s, " RHS DC{i} {}", fmt_f(-miqp.decode_c[i]));
        }
    }

    let _ = writeln!(s, "BOUNDS");
    for j in 0..miqp.n_cont {
        let _ = writeln!(s, " UP BND xF{j} 1.0");
    }
    for j in 0..miqp.n_bin {
        let _ = writeln!(s, " BV BND xB{j}");
    }
    for i in 0..n {
        let _ = writeln!(s, " FR BND xL{i}");
    }

    let _ = writeln!(s, "QMATRIX");
    for i in 0..n {
        for (j, v) in miqp.p.row(i) {
            let _ = writeln!(s, " xL{i} xL{j} {}", fmt_f(2.0 * v));
        }
    }
    let _ = writeln!(s, "ENDATA");
    s
}

/// Write the model to `path`.
pub fn export_mip(miqp: &Miqp, path: &Path) -> SolveResult<()> {
    let body = write_mps_string(miqp, "zonoplan");
    std::fs::write(path, body).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Qmatrix,
    Done,
}

fn parse_named_index(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix).and_then(|t| t.parse().ok())
}

/// Parse an MPS string produced by [`write_mps_string`] back into an
/// [`Miqp`]. Matrix entries round-trip bit-exactly.
pub fn parse_mps_str(text: &str) -> SolveResult<Miqp> {
    let mut section = Section::Preamble;
    let mut index: Option<LiftedIndex> = None;
    let mut n_eq = 0usize;
    let mut n_dc = 0usize;
    let mut a_triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut g_triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut p_triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b_entries: Vec<(usize, f64)> = Vec::new();
    let mut c_entries: Vec<(usize, f64)> = Vec::new();
    let mut n_cont = 0usize;
    let mut n_bin = 0usize;
    let mut n_lifted = 0usize;
    let mut in_int = false;

    let err = |line: usize, message: String| SolveError::MpsParse { line, message };
    let parse_num = |tok: &str, line: usize| {
        tok.parse::<f64>()
            .map_err(|_| SolveError::MpsParse {
                line,
                message: format!("bad number `{tok}`"),
            })
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.starts_with('*') {
            let toks: Vec<&str> = raw[1..].split_whitespace().collect();
            if toks.first() == Some(&"INDEX") && toks.len() == 5 {
                let v: Vec<usize> = toks[1..]
                    .iter()
                    .map(|t| t.parse().unwrap_or(usize::MAX))
                    .collect();
                if v.iter().any(|&x| x == usize::MAX) {
                    return Err(err(line, "bad INDEX comment".into()));
                }
                index = Some(LiftedIndex {
                    n_x: v[0],
                    n_b: v[1],
                    n_u: v[2],
                    n_steps: v[3],
                });
            }
            continue;
        }
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !raw.starts_with(' ') {
            let head = trimmed.split_whitespace().next().unwrap();
            section = match head {
                "NAME" => Section::Preamble,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "QMATRIX" | "QUADOBJ" => Section::Qmatrix,
                "ENDATA" => Section::Done,
                other => return Err(err(line, format!("unknown section `{other}`"))),
            };
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(err(line, "ROWS line needs two fields".into()));
                }
                match (toks[0], toks[1]) {
                    ("N", _) => {}
                    ("E", name) => {
                        if parse_named_index(name, "EQ").is_some() {
                            n_eq += 1;
                        } else if parse_named_index(name, "DC").is_some() {
                            n_dc += 1;
                        } else {
                            return Err(err(line, format!("unknown row `{name}`")));
                        }
                    }
                    (kind, _) => return Err(err(line, format!("unsupported row type `{kind}`"))),
                }
            }
            Section::Columns => {
                if toks.len() == 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        other => return Err(err(line, format!("unknown marker `{other}`"))),
                    }
                    continue;
                }
                if toks.len() != 3 {
                    return Err(err(line, "COLUMNS line needs `var row value`".into()));
                }
                let (var, row, val) = (toks[0], toks[1], parse_num(toks[2], line)?);
                if let Some(i) = parse_named_index(var, "xF") {
                    n_cont = n_cont.max(i + 1);
                } else if let Some(i) = parse_named_index(var, "xB") {
                    if !in_int {
                        return Err(err(line, format!("`{var}` outside INTORG block")));
                    }
                    n_bin = n_bin.max(i + 1);
                } else if let Some(i) = parse_named_index(var, "xL") {
                    n_lifted = n_lifted.max(i + 1);
                }
                if row == "OBJ" {
                    if val != 0.0 {
                        return Err(err(line, "linear objective terms unsupported".into()));
                    }
                    continue;
                }
                // Defer column resolution until all xF counted: store
                // raw names via a second pass is avoided by encoding
                // variable identity in the triplet streams directly.
                if let Some(r) = parse_named_index(row, "EQ") {
                    // Factor columns only appear in EQ rows.
                    a_triplets.push((r, encode_var(var, line)?, val));
                } else if let Some(r) = parse_named_index(row, "DC") {
                    if parse_named_index(var, "xL").is_some() {
                        if val != -1.0 {
                            return Err(err(line, "lifted column must carry -1".into()));
                        }
                    } else {
                        g_triplets.push((r, encode_var(var, line)?, val));
                    }
                } else {
                    return Err(err(line, format!("unknown row `{row}`")));
                }
            }
            Section::Rhs => {
                if toks.len() != 3 {
                    return Err(err(line, "RHS line needs `set row value`".into()));
                }
                let val = parse_num(toks[2], line)?;
                if let Some(r) = parse_named_index(toks[1], "EQ") {
                    b_entries.push((r, val));
                } else if let Some(r) = parse_named_index(toks[1], "DC") {
                    c_entries.push((r, -val));
                } else {
                    return Err(err(line, format!("unknown rhs row `{}`", toks[1])));
                }
            }
            Section::Bounds => {
                // Bounds are implied by variable kind in this dialect;
                // validate the marker shape only.
                if toks.is_empty() {
                    return Err(err(line, "empty BOUNDS line".into()));
                }
            }
            Section::Qmatrix => {
                if toks.len() != 3 {
                    return Err(err(line, "QMATRIX line needs `var var value`".into()));
                }
                let i = parse_named_index(toks[0], "xL")
                    .ok_or_else(|| err(line, "QMATRIX rows must be lifted vars".into()))?;
                let j = parse_named_index(toks[1], "xL")
                    .ok_or_else(|| err(line, "QMATRIX cols must be lifted vars".into()))?;
                let val = parse_num(toks[2], line)?;
                p_triplets.push((i, j, val / 2.0));
            }
            Section::Preamble | Section::Done => {}
        }
    }

    let index = index.ok_or_else(|| SolveError::MpsParse {
        line: 0,
        message: "missing * INDEX comment".into(),
    })?;

    // Resolve encoded variable ids now that n_cont is known.
    let m = n_cont + n_bin;
    let decode_var = |enc: usize| -> usize {
        if enc & 1 == 0 {
            enc >> 1
        } else {
            n_cont + (enc >> 1)
        }
    };
    let a_triplets: Vec<(usize, usize, f64)> = a_triplets
        .into_iter()
        .map(|(r, e, v)| (r, decode_var(e), v))
        .collect();
    let g_triplets: Vec<(usize, usize, f64)> = g_triplets
        .into_iter()
        .map(|(r, e, v)| (r, decode_var(e), v))
        .collect();

    let mut b = DVector::zeros(n_eq);
    for (r, v) in b_entries {
        b[r] = v;
    }
    let mut c = DVector::zeros(n_dc);
    for (r, v) in c_entries {
        c[r] = v;
    }
    Ok(Miqp {
        p: SpMat::from_triplets(n_lifted, n_lifted, &p_triplets),
        decode_g: SpMat::from_triplets(n_dc, m, &g_triplets),
        decode_c: c,
        a: SpMat::from_triplets(n_eq, m, &a_triplets),
        b,
        n_cont,
        n_bin,
        index,
    })
}

/// Factor variables are encoded as `2*i` (continuous) or `2*i + 1`
/// (binary) until the continuous count is known.
fn encode_var(name: &str, line: usize) -> SolveResult<usize> {
    if let Some(i) = parse_named_index(name, "xF") {
        Ok(i << 1)
    } else if let Some(i) = parse_named_index(name, "xB") {
        Ok((i << 1) | 1)
    } else {
        Err(SolveError::MpsParse {
            line,
            message: format!("expected factor variable, got `{name}`"),
        })
    }
}

/// Read a model file.
pub fn read_mps(path: &Path) -> SolveResult<Miqp> {
    let text = std::fs::read_to_string(path).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mps_str(&text)
}
