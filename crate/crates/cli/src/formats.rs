//! On-disk artifact formats.
//!
//! Everything is line-oriented text. Floating-point values are written
//! with 17 significant digits (`{:.16e}`), which round-trips `f64`
//! bit-exactly, and no file carries a timestamp, so identical inputs
//! produce byte-identical artifacts. Indices are zero-based throughout.
//!
//! Trajectory file (`layout dense`): after the header, each grid point is
//! a `t <time>` line followed by a `re` line and an `im` line, each with
//! the d*d row-major matrix entries. `layout sparse` instead lists
//! `e <row> <col> <re> <im>` lines per nonzero entry; the conjugate
//! element may be omitted and is restored on read.
//!
//! Operators file: per grid point, a `t <time>` line followed by
//! `matrix U` and `matrix H` blocks of d rows, each row holding d
//! `re im` pairs.
//!
//! Rates table: CSV with columns `t,term,target,source,dagger,rate`
//! (dagger is 0 or 1), one row per synthesized term per grid point.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use lindblad_resign::eigenflow::Trajectory;
use lindblad_resign::evolution::{
    GeneratorPoint, LindbladGenerator, RatedOperator, VerificationReport,
};
use lindblad_resign::matrix::{validate_density, ComplexMatrix, DensityState};
use lindblad_resign::synthesis::{JumpSpec, RatedTerm};

pub const TRAJECTORY_MAGIC: &str = "lindblad-resign trajectory v1";
pub const OPERATORS_MAGIC: &str = "lindblad-resign operators v1";
pub const SUMMARY_MAGIC: &str = "lindblad-resign summary v1";
pub const REPORT_MAGIC: &str = "lindblad-resign report v1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: state invalid: {message}")]
    InvalidState {
        path: String,
        line: usize,
        message: String,
    },
}

impl FormatError {
    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

/// 17-significant-digit decimal, round-trip safe for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Line-based cursor that tracks line numbers for error reporting.
struct Lines<'a> {
    path: &'a Path,
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Lines {
            path,
            lines: text.lines().collect(),
            next: 0,
        }
    }

    fn number(&self) -> usize {
        self.next
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.next).copied()
    }

    fn take(&mut self, what: &str) -> Result<&'a str, FormatError> {
        let line = self.lines.get(self.next).copied().ok_or_else(|| {
            FormatError::parse(
                self.path,
                self.next + 1,
                format!("expected {what}, found end of file"),
            )
        })?;
        self.next += 1;
        Ok(line)
    }

    fn take_keyword<T: std::str::FromStr>(&mut self, keyword: &str) -> Result<T, FormatError> {
        let line = self.take(keyword)?;
        let rest = line
            .strip_prefix(keyword)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| {
                FormatError::parse(
                    self.path,
                    self.next,
                    format!("expected '{keyword} <value>', got '{line}'"),
                )
            })?;
        rest.trim().parse::<T>().map_err(|_| {
            FormatError::parse(
                self.path,
                self.next,
                format!("cannot parse '{rest}' after '{keyword}'"),
            )
        })
    }

    fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::parse(self.path, self.next, message)
    }
}

fn parse_floats(cursor: &Lines<'_>, line: &str, expected: usize) -> Result<Vec<f64>, FormatError> {
    let values: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
    let values = values.map_err(|e| cursor.error(format!("bad float: {e}")))?;
    if values.len() != expected {
        return Err(cursor.error(format!("expected {expected} values, got {}", values.len())));
    }
    Ok(values)
}

/// How matrix entries are laid out in a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryLayout {
    Dense,
    Sparse,
}

/// Write a trajectory file.
pub fn write_trajectory(
    path: &Path,
    trajectory: &Trajectory,
    tol: f64,
    layout: TrajectoryLayout,
) -> Result<(), FormatError> {
    let d = trajectory.dim();
    let mut out = String::new();
    let _ = writeln!(out, "{TRAJECTORY_MAGIC}");
    let _ = writeln!(out, "dim {d}");
    let _ = writeln!(out, "tol {}", fmt_f64(tol));
    let _ = writeln!(out, "points {}", trajectory.len());
    let _ = writeln!(
        out,
        "layout {}",
        match layout {
            TrajectoryLayout::Dense => "dense",
            TrajectoryLayout::Sparse => "sparse",
        }
    );
    for (state, &t) in trajectory.states().iter().zip(trajectory.times()) {
        let _ = writeln!(out, "t {}", fmt_f64(t));
        let m = state.matrix();
        match layout {
            TrajectoryLayout::Dense => {
                let mut re_line = String::from("re");
                let mut im_line = String::from("im");
                for i in 0..d {
                    for j in 0..d {
                        let _ = write!(re_line, " {}", fmt_f64(m[(i, j)].re));
                        let _ = write!(im_line, " {}", fmt_f64(m[(i, j)].im));
                    }
                }
                let _ = writeln!(out, "{re_line}");
                let _ = writeln!(out, "{im_line}");
            }
            TrajectoryLayout::Sparse => {
                for i in 0..d {
                    for j in 0..d {
                        let z = m[(i, j)];
                        if z != Complex64::new(0.0, 0.0) {
                            let _ = writeln!(out, "e {i} {j} {} {}", fmt_f64(z.re), fmt_f64(z.im));
                        }
                    }
                }
            }
        }
    }
    write_file(path, &out)
}

/// Read a trajectory file. Every point is validated against the header
/// tolerance.
pub fn read_trajectory(path: &Path) -> Result<Trajectory, FormatError> {
    let text = read_file(path)?;
    let mut cursor = Lines::new(path, &text);
    let magic = cursor.take("header")?;
    if magic != TRAJECTORY_MAGIC {
        return Err(cursor.error(format!("not a trajectory file (header '{magic}')")));
    }
    let d: usize = cursor.take_keyword("dim")?;
    if d < 2 {
        return Err(cursor.error("dim must be at least 2"));
    }
    let tol: f64 = match cursor.peek() {
        Some(line) if line.starts_with("tol ") => cursor.take_keyword("tol")?,
        _ => 1e-8,
    };
    let points: usize = cursor.take_keyword("points")?;
    let layout_word: String = cursor.take_keyword("layout")?;
    let layout = match layout_word.as_str() {
        "dense" => TrajectoryLayout::Dense,
        "sparse" => TrajectoryLayout::Sparse,
        other => return Err(cursor.error(format!("unknown layout '{other}'"))),
    };

    let mut times = Vec::with_capacity(points);
    let mut states = Vec::with_capacity(points);
    for _ in 0..points {
        let t: f64 = cursor.take_keyword("t")?;
        times.push(t);
        let mut m = ComplexMatrix::zeros(d, d);
        match layout {
            TrajectoryLayout::Dense => {
                let re_line = cursor.take("re line")?;
                let re_values = parse_floats(
                    &cursor,
                    re_line
                        .strip_prefix("re ")
                        .ok_or_else(|| cursor.error("expected 're ...'"))?,
                    d * d,
                )?;
                let im_line = cursor.take("im line")?;
                let im_values = parse_floats(
                    &cursor,
                    im_line
                        .strip_prefix("im ")
                        .ok_or_else(|| cursor.error("expected 'im ...'"))?,
                    d * d,
                )?;
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = Complex64::new(re_values[i * d + j], im_values[i * d + j]);
                    }
                }
            }
            TrajectoryLayout::Sparse => {
                let mut listed = vec![false; d * d];
                while let Some(line) = cursor.peek() {
                    if !line.starts_with("e ") {
                        break;
                    }
                    let line = cursor.take("entry")?;
                    let fields: Vec<&str> = line.split_whitespace().collect();
                    if fields.len() != 5 {
                        return Err(cursor.error("entry must be 'e row col re im'"));
                    }
                    let i: usize = fields[1]
                        .parse()
                        .map_err(|_| cursor.error("bad row index"))?;
                    let j: usize = fields[2]
                        .parse()
                        .map_err(|_| cursor.error("bad col index"))?;
                    if i >= d || j >= d {
                        return Err(cursor.error(format!("index ({i}, {j}) outside dim {d}")));
                    }
                    let re: f64 = fields[3]
                        .parse()
                        .map_err(|_| cursor.error("bad re value"))?;
                    let im: f64 = fields[4]
                        .parse()
                        .map_err(|_| cursor.error("bad im value"))?;
                    m[(i, j)] = Complex64::new(re, im);
                    listed[i * d + j] = true;
                }
                // Restore omitted conjugate elements.
                for i in 0..d {
                    for j in 0..d {
                        if !listed[i * d + j] && listed[j * d + i] {
                            m[(i, j)] = m[(j, i)].conj();
                        }
                    }
                }
            }
        }
        let line = cursor.number();
        let state = validate_density(&m, tol).map_err(|e| FormatError::InvalidState {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        states.push(state);
    }
    Trajectory::new(times, states).map_err(|e| cursor.error(format!("trajectory rejected: {e}")))
}

fn write_matrix_block(out: &mut String, name: &str, m: &ComplexMatrix) {
    let _ = writeln!(out, "matrix {name}");
    for i in 0..m.nrows() {
        let mut row = String::new();
        for j in 0..m.ncols() {
            if j > 0 {
                row.push(' ');
            }
            let _ = write!(row, "{} {}", fmt_f64(m[(i, j)].re), fmt_f64(m[(i, j)].im));
        }
        let _ = writeln!(out, "{row}");
    }
}

fn read_matrix_block(
    cursor: &mut Lines<'_>,
    name: &str,
    d: usize,
) -> Result<ComplexMatrix, FormatError> {
    let header = cursor.take("matrix header")?;
    if header != format!("matrix {name}") {
        return Err(cursor.error(format!("expected 'matrix {name}', got '{header}'")));
    }
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        let line = cursor.take("matrix row")?;
        let values = parse_floats(cursor, line, 2 * d)?;
        for j in 0..d {
            m[(i, j)] = Complex64::new(values[2 * j], values[2 * j + 1]);
        }
    }
    Ok(m)
}

/// Write the per-point frame bases and Hamiltonians.
pub fn write_operators(
    path: &Path,
    times: &[f64],
    bases: &[ComplexMatrix],
    hamiltonians: &[ComplexMatrix],
) -> Result<(), FormatError> {
    let d = bases[0].nrows();
    let mut out = String::new();
    let _ = writeln!(out, "{OPERATORS_MAGIC}");
    let _ = writeln!(out, "dim {d}");
    let _ = writeln!(out, "points {}", times.len());
    for ((t, u), h) in times.iter().zip(bases).zip(hamiltonians) {
        let _ = writeln!(out, "t {}", fmt_f64(*t));
        write_matrix_block(&mut out, "U", u);
        write_matrix_block(&mut out, "H", h);
    }
    write_file(path, &out)
}

pub struct OperatorsFile {
    pub times: Vec<f64>,
    pub bases: Vec<ComplexMatrix>,
    pub hamiltonians: Vec<ComplexMatrix>,
}

pub fn read_operators(path: &Path) -> Result<OperatorsFile, FormatError> {
    let text = read_file(path)?;
    let mut cursor = Lines::new(path, &text);
    let magic = cursor.take("header")?;
    if magic != OPERATORS_MAGIC {
        return Err(cursor.error(format!("not an operators file (header '{magic}')")));
    }
    let d: usize = cursor.take_keyword("dim")?;
    let points: usize = cursor.take_keyword("points")?;
    let mut times = Vec::with_capacity(points);
    let mut bases = Vec::with_capacity(points);
    let mut hamiltonians = Vec::with_capacity(points);
    for _ in 0..points {
        times.push(cursor.take_keyword::<f64>("t")?);
        bases.push(read_matrix_block(&mut cursor, "U", d)?);
        hamiltonians.push(read_matrix_block(&mut cursor, "H", d)?);
    }
    Ok(OperatorsFile {
        times,
        bases,
        hamiltonians,
    })
}

/// Write the rates table: one CSV row per term per grid point.
pub fn write_rates(
    path: &Path,
    times: &[f64],
    terms: &[Vec<RatedTerm>],
) -> Result<(), FormatError> {
    let mut out = String::from("t,term,target,source,dagger,rate\n");
    for (t, point_terms) in times.iter().zip(terms) {
        for (index, term) in point_terms.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(*t),
                index,
                term.spec.target(),
                term.spec.source(),
                term.spec.dagger() as u8,
                fmt_f64(term.rate)
            );
        }
    }
    write_file(path, &out)
}

/// Read the rates table back into per-time term lists, keyed by the times
/// of `grid` (rows must use exactly the serialized grid times).
pub fn read_rates(
    path: &Path,
    grid: &[f64],
    dim: usize,
) -> Result<Vec<Vec<RatedTerm>>, FormatError> {
    let text = read_file(path)?;
    let mut terms: Vec<Vec<RatedTerm>> = vec![Vec::new(); grid.len()];
    let mut cursor_index = 0usize;
    for (line_no, line) in text.lines().enumerate() {
        if line_no == 0 {
            if line != "t,term,target,source,dagger,rate" {
                return Err(FormatError::parse(path, 1, "bad rates header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(FormatError::parse(path, line_no + 1, "expected 6 fields"));
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|_| FormatError::parse(path, line_no + 1, "bad time"))?;
        // Times arrive in grid order; advance the cursor to the matching
        // grid point.
        while cursor_index < grid.len() && grid[cursor_index] != t {
            cursor_index += 1;
        }
        if cursor_index == grid.len() {
            return Err(FormatError::parse(
                path,
                line_no + 1,
                format!("time {t} not on the artifact grid"),
            ));
        }
        let target: usize = fields[2]
            .parse()
            .map_err(|_| FormatError::parse(path, line_no + 1, "bad target index"))?;
        let source: usize = fields[3]
            .parse()
            .map_err(|_| FormatError::parse(path, line_no + 1, "bad source index"))?;
        let dagger = match fields[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(FormatError::parse(
                    path,
                    line_no + 1,
                    format!("bad dagger flag '{other}'"),
                ))
            }
        };
        let rate: f64 = fields[5]
            .parse()
            .map_err(|_| FormatError::parse(path, line_no + 1, "bad rate"))?;
        let spec = JumpSpec::new(target, source, dagger, dim).ok_or_else(|| {
            FormatError::parse(
                path,
                line_no + 1,
                format!("invalid jump spec ({target}, {source}) for dim {dim}"),
            )
        })?;
        terms[cursor_index].push(RatedTerm { spec, rate });
    }
    Ok(terms)
}

/// Rebuild the lab-frame generator from reloaded artifacts:
/// `A = U a U^dag` per term, plus the stored Hamiltonians.
pub fn rebuild_generator(
    operators: &OperatorsFile,
    terms: &[Vec<RatedTerm>],
) -> Result<LindbladGenerator, lindblad_resign::evolution::EvolutionError> {
    let points: Vec<GeneratorPoint> = operators
        .times
        .iter()
        .enumerate()
        .map(|(n, _)| {
            let u = &operators.bases[n];
            let ops = terms[n]
                .iter()
                .map(|term| RatedOperator {
                    operator: u * term.spec.matrix() * u.adjoint(),
                    rate: term.rate,
                })
                .collect();
            GeneratorPoint {
                hamiltonian: operators.hamiltonians[n].clone(),
                terms: ops,
            }
        })
        .collect();
    LindbladGenerator::new(operators.times.clone(), points)
}

/// Key-value summary of a synthesis run, plus flagged intervals.
pub struct Summary {
    pub entries: Vec<(String, String)>,
    pub capped_intervals: Vec<(f64, f64)>,
    pub singular_intervals: Vec<(f64, f64)>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), FormatError> {
    let mut out = String::new();
    let _ = writeln!(out, "{SUMMARY_MAGIC}");
    for (key, value) in &summary.entries {
        let _ = writeln!(out, "{key} = {value}");
    }
    let _ = writeln!(
        out,
        "capped_interval_count = {}",
        summary.capped_intervals.len()
    );
    for (a, b) in &summary.capped_intervals {
        let _ = writeln!(out, "capped_interval {} {}", fmt_f64(*a), fmt_f64(*b));
    }
    let _ = writeln!(
        out,
        "singular_interval_count = {}",
        summary.singular_intervals.len()
    );
    for (a, b) in &summary.singular_intervals {
        let _ = writeln!(out, "singular_interval {} {}", fmt_f64(*a), fmt_f64(*b));
    }
    write_file(path, &out)
}

pub fn read_summary(path: &Path) -> Result<Summary, FormatError> {
    let text = read_file(path)?;
    let mut cursor = Lines::new(path, &text);
    let magic = cursor.take("header")?;
    if magic != SUMMARY_MAGIC {
        return Err(cursor.error(format!("not a summary file (header '{magic}')")));
    }
    let mut summary = Summary {
        entries: Vec::new(),
        capped_intervals: Vec::new(),
        singular_intervals: Vec::new(),
    };
    while cursor.peek().is_some() {
        let line = cursor.take("summary line")?;
        if let Some(rest) = line.strip_prefix("capped_interval ") {
            let values = parse_floats(&cursor, rest, 2)?;
            summary.capped_intervals.push((values[0], values[1]));
        } else if let Some(rest) = line.strip_prefix("singular_interval ") {
            let values = parse_floats(&cursor, rest, 2)?;
            summary.singular_intervals.push((values[0], values[1]));
        } else if let Some((key, value)) = line.split_once(" = ") {
            summary.entries.push((key.to_string(), value.to_string()));
        } else if !line.trim().is_empty() {
            return Err(cursor.error(format!("unrecognized summary line '{line}'")));
        }
    }
    Ok(summary)
}

/// Write a verification report: headline numbers, excluded intervals and
/// the per-point residual table.
pub fn write_report(
    path: &Path,
    report: &VerificationReport,
    bound: f64,
    passed: bool,
) -> Result<(), FormatError> {
    let mut out = String::new();
    let _ = writeln!(out, "{REPORT_MAGIC}");
    let _ = writeln!(out, "max_state_error = {}", fmt_f64(report.max_state_error));
    let _ = writeln!(out, "max_rhs_error = {}", fmt_f64(report.max_rhs_error));
    let _ = writeln!(out, "trace_drift = {}", fmt_f64(report.trace_drift));
    let _ = writeln!(out, "min_eigenvalue = {}", fmt_f64(report.min_eigenvalue));
    let _ = writeln!(out, "bound = {}", fmt_f64(bound));
    let _ = writeln!(out, "passed = {passed}");
    let _ = writeln!(
        out,
        "excluded_interval_count = {}",
        report.excluded_intervals.len()
    );
    for (a, b) in &report.excluded_intervals {
        let _ = writeln!(out, "excluded_interval {} {}", fmt_f64(*a), fmt_f64(*b));
    }
    let _ = writeln!(out, "points");
    let _ = writeln!(out, "t,rhs_error,state_error,excluded");
    for r in &report.residuals {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.rhs_error),
            fmt_f64(r.state_error),
            r.excluded as u8
        );
    }
    write_file(path, &out)
}

/// Side-by-side closed-form JC rate curves for plotting; `None` cells
/// (singular points) are left empty.
#[allow(clippy::type_complexity)]
pub fn write_demo_csv(
    path: &Path,
    rows: &[(f64, Option<(f64, f64)>, Option<(f64, f64)>, f64)],
) -> Result<(), FormatError> {
    let mut out =
        String::from("t,gamma1_nonneg,gamma2_nonneg,gamma1_nonpos,gamma2_nonpos,lambda1\n");
    for (t, nonneg, nonpos, lambda1) in rows {
        let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(*t),
            cell(nonneg.map(|g| g.0)),
            cell(nonneg.map(|g| g.1)),
            cell(nonpos.map(|g| g.0)),
            cell(nonpos.map(|g| g.1)),
            fmt_f64(*lambda1)
        );
    }
    write_file(path, &out)
}

/// DensityState list helper for building trajectories from raw samples.
pub fn trajectory_from_unchecked(
    times: Vec<f64>,
    matrices: Vec<ComplexMatrix>,
    tol: f64,
) -> Result<Trajectory, lindblad_resign::eigenflow::EigenflowError> {
    let states = matrices
        .into_iter()
        .map(|m| DensityState::from_matrix_unchecked(m, tol))
        .collect();
    Trajectory::new(times, states)
}
