//! Command-line front end.
//!
//! Exit codes: 0 when every checked residual is within tolerance, 1 when a
//! residual check fails, 2 on input errors. The report is written on 0 and 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::algebra::{AlgebraError, AlgebraSpec};
use crate::analytic::{
    apply_operator, basis_equivalence_check, cr_residual, scalar_equation_check, source_solution,
    AnalyticError, GammaField, PolyPolynomial, SourceCase,
};
use crate::conformal::{
    compose_and_check, delta_euclidean, delta_polynumber, gallery, jet_and_fields_at, jet_at,
    recover_fields, trace_residual, verify_on_grid, ConformalError, DeltaTensor, GridSpec, Skip,
    SkipCounts, VerifyOptions, DEFAULT_FD_TOL, DEFAULT_MARGIN, DEFAULT_TOL,
};
use crate::expr::{EvalOptions, MapError, MapExpr, ParseError, ScalarExpr};
use crate::geometry::MetricSpec;
use crate::jets::{eval_jet2_with, VectorMap};
use crate::report::{num, nums, residual_report, Cell, Report, Table};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "polyconf",
    version,
    about = "Verify generalized conformal maps over polynumber algebras"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the unit and the derived q tensors of an algebra.
    AlgebraInfo {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recover (p, s) over a grid and check the second-derivative system.
    Verify {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        check: CheckArgs,
        /// Tolerance for the symmetry of the recovered gradient field.
        #[arg(long, default_value_t = DEFAULT_FD_TOL)]
        fd_tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recover (p, s) at a single point.
    Recover {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        check: CheckArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Contract the system residual with g^kl (metric) or q^kl (algebra).
    Trace {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        check: CheckArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check that f⁻¹ ∘ g satisfies the composed system.
    Compose {
        /// Map file for f (the inverted map).
        #[arg(
            long,
            conflicts_with = "f_gallery",
            required_unless_present = "f_gallery"
        )]
        f_map: Option<PathBuf>,
        /// Gallery map for f, followed by `key=value` parameters.
        #[arg(long, num_args = 1.., value_name = "NAME [KEY=VALUE]...")]
        f_gallery: Option<Vec<String>>,
        /// Map file for g.
        #[arg(
            long,
            conflicts_with = "g_gallery",
            required_unless_present = "g_gallery"
        )]
        g_map: Option<PathBuf>,
        /// Gallery map for g, followed by `key=value` parameters.
        #[arg(long, num_args = 1.., value_name = "NAME [KEY=VALUE]...")]
        g_gallery: Option<Vec<String>>,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        check: CheckArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check the Cauchy-Riemann analogue and the scalar equation over a grid.
    AnalyticCheck {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        check: CheckArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve the wave or Laplace equation with a polynomial source.
    SourceSolve {
        /// One of c-wave, h2-laplace, h4x-laplace, h4psi.
        #[arg(long)]
        case: String,
        /// Coefficients c0;c1;... with components separated by commas.
        #[arg(long, conflicts_with = "source", required_unless_present = "source")]
        coeffs: Option<String>,
        /// File holding coefficients, one per line.
        #[arg(long)]
        source: Option<PathBuf>,
        #[command(flatten)]
        check: CheckArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare the 4-D Laplacian in the x-basis with the ψ-basis form.
    BasisCheck {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        check: CheckArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Map definition file.
    #[arg(long, conflicts_with = "gallery", required_unless_present = "gallery")]
    pub map: Option<PathBuf>,
    /// Gallery map followed by `key=value` parameters.
    #[arg(long, num_args = 1.., value_name = "NAME [KEY=VALUE]...")]
    pub gallery: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// `euclidN`, `minkowskiN`, a built-in algebra name, or an algebra file.
    #[arg(long, default_value = "euclid2")]
    pub algebra: String,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// `[lo,hi]^n@res` or `[a,b]x[c,d]@r1,r2`.
    #[arg(long)]
    pub grid: String,
    /// Skip points where this expression is positive.
    #[arg(long)]
    pub exclude: Option<String>,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, env = "POLYCONF_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Points closer than this to a singularity are skipped.
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Report path; `-` writes the report to stdout and the summary to stderr.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("exclusion predicate: {0}")]
    Exclusion(ParseError),
}

/// A finished run: the report, a human summary, and the verdict.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub summary: String,
    pub passed: bool,
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_PASS
            };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let outcome = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let out = output_args(&cli.command);
    let text = match out.format {
        Format::Json => outcome.report.to_json(),
        Format::Csv => outcome.report.to_csv(),
    };
    if out.output == Path::new("-") {
        print!("{text}");
        eprint!("{}", outcome.summary);
    } else {
        if let Err(source) = std::fs::write(&out.output, text) {
            eprintln!(
                "error: {}",
                CliError::Io {
                    path: out.output.clone(),
                    source
                }
            );
            return EXIT_INPUT;
        }
        print!("{}", outcome.summary);
    }
    if outcome.passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn output_args(cmd: &Command) -> &OutputArgs {
    match cmd {
        Command::AlgebraInfo { output, .. }
        | Command::Verify { output, .. }
        | Command::Recover { output, .. }
        | Command::Trace { output, .. }
        | Command::Compose { output, .. }
        | Command::AnalyticCheck { output, .. }
        | Command::SourceSolve { output, .. }
        | Command::BasisCheck { output, .. } => output,
    }
}

/// Runs a command without writing anything.
pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::AlgebraInfo { space, .. } => algebra_info(space),
        Command::Verify {
            map,
            space,
            grid,
            check,
            fd_tol,
            ..
        } => verify(map, space, grid, check, *fd_tol),
        Command::Recover {
            map,
            space,
            point,
            check,
            ..
        } => recover(map, space, point, check),
        Command::Trace {
            map,
            space,
            grid,
            check,
            ..
        } => trace(map, space, grid, check),
        Command::Compose {
            f_map,
            f_gallery,
            g_map,
            g_gallery,
            space,
            grid,
            check,
            ..
        } => {
            let f = MapArgs {
                map: f_map.clone(),
                gallery: f_gallery.clone(),
            };
            let g = MapArgs {
                map: g_map.clone(),
                gallery: g_gallery.clone(),
            };
            compose(&f, &g, space, grid, check)
        }
        Command::AnalyticCheck {
            map,
            space,
            grid,
            check,
            ..
        } => analytic_check(map, space, grid, check),
        Command::SourceSolve {
            case,
            coeffs,
            source,
            check,
            ..
        } => source_solve(case, coeffs.as_deref(), source.as_deref(), check),
        Command::BasisCheck {
            map, grid, check, ..
        } => basis_check(map, grid, check),
    }
}

/// What `--algebra` names.
#[derive(Debug, Clone)]
pub enum Space {
    Metric(String, MetricSpec),
    Algebra(AlgebraSpec),
}

impl Space {
    pub fn resolve(name: &str) -> Result<Self, CliError> {
        if let Some(m) = MetricSpec::from_name(name) {
            return Ok(Space::Metric(name.to_string(), m));
        }
        match AlgebraSpec::builtin(name) {
            Ok(a) => Ok(Space::Algebra(a)),
            Err(AlgebraError::Unknown(_)) if Path::new(name).is_file() => {
                let text = read(Path::new(name))?;
                Ok(Space::Algebra(AlgebraSpec::parse_definition(&text)?))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Space::Metric(n, _) => n,
            Space::Algebra(a) => a.name(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Space::Metric(_, m) => m.dim(),
            Space::Algebra(a) => a.dim(),
        }
    }

    pub fn metric(&self) -> Option<&MetricSpec> {
        match self {
            Space::Metric(_, m) => Some(m),
            Space::Algebra(_) => None,
        }
    }

    pub fn delta(&self) -> Result<DeltaTensor, CliError> {
        Ok(match self {
            Space::Metric(_, m) => delta_euclidean(m),
            Space::Algebra(a) => delta_polynumber(a)?,
        })
    }

    fn algebra(&self) -> Result<&AlgebraSpec, CliError> {
        match self {
            Space::Algebra(a) => Ok(a),
            Space::Metric(n, _) => Err(CliError::Usage(format!(
                "`{n}` is a metric, not an algebra"
            ))),
        }
    }

    /// `g^kl` for a metric, `q^kl` for an algebra.
    fn contraction(&self) -> Result<DMatrix<f64>, CliError> {
        match self {
            Space::Metric(_, m) => Ok(m.g_inv().clone()),
            Space::Algebra(a) => a
                .derived_tensors()
                .q_upper
                .ok_or_else(|| CliError::Usage(format!("algebra `{}` is degenerate", a.name()))),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a map and describes its origin for the report.
pub fn load_map(args: &MapArgs, metric: Option<&MetricSpec>) -> Result<(MapExpr, Value), CliError> {
    let mut desc = Map::new();
    let map = match (&args.map, &args.gallery) {
        (Some(path), None) => {
            let map = MapExpr::parse_file(&read(path)?)?;
            desc.insert("file".into(), Value::from(path.display().to_string()));
            map
        }
        (None, Some(spec)) => {
            let (name, rest) = spec
                .split_first()
                .ok_or_else(|| CliError::Usage("--gallery needs a name".into()))?;
            let params = parse_params(rest)?;
            let map = gallery(name, &params, metric)?;
            desc.insert("gallery".into(), Value::from(name.as_str()));
            desc.insert(
                "params".into(),
                Value::Object(params.iter().map(|(k, v)| (k.clone(), num(*v))).collect()),
            );
            map
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --map or --gallery".into(),
            ))
        }
    };
    let unbound = map.unbound_params();
    if !unbound.is_empty() {
        return Err(CliError::Usage(format!(
            "unbound parameters: {}",
            unbound.join(", ")
        )));
    }
    desc.insert("definition".into(), Value::from(map.to_file_string()));
    Ok((map, Value::Object(desc)))
}

pub fn parse_params(items: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got `{item}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad value in `{item}`")))?;
        if out.insert(k.trim().to_string(), v).is_some() {
            return Err(CliError::Usage(format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

fn parse_numbers(src: &str, what: &str) -> Result<Vec<f64>, CliError> {
    src.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("bad number `{}` in {what}", t.trim())))
        })
        .collect()
}

fn load_grid(args: &GridArgs, dim: usize) -> Result<GridSpec, CliError> {
    let grid = GridSpec::parse(&args.grid)?;
    if grid.dim() != dim {
        return Err(ConformalError::DimensionMismatch {
            expected: dim,
            got: grid.dim(),
        }
        .into());
    }
    match &args.exclude {
        None => Ok(grid),
        Some(src) => {
            let pred = ScalarExpr::parse(src, dim).map_err(CliError::Exclusion)?;
            Ok(grid.with_exclusion(pred)?)
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), CliError> {
    if expected == got {
        Ok(())
    } else {
        Err(ConformalError::DimensionMismatch { expected, got }.into())
    }
}

/// Usable points as `(index, point, value)`, plus skip counts.
type Scan<T> = (Vec<(usize, Vec<f64>, T)>, SkipCounts);

/// Evaluates `f` at every grid point in parallel, in grid order.
fn scan<T: Send>(
    grid: &GridSpec,
    f: impl Fn(&[f64]) -> Result<T, Skip> + Sync,
) -> Result<Scan<T>, CliError> {
    let outcomes: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let r = f(&x);
            (i, x, r)
        })
        .collect();
    let mut skipped = SkipCounts::default();
    let mut rows = Vec::new();
    for (i, x, r) in outcomes {
        match r {
            Ok(v) => rows.push((i, x, v)),
            Err(s) => skipped.add(s),
        }
    }
    if rows.is_empty() {
        return Err(ConformalError::EmptyGrid.into());
    }
    Ok((rows, skipped))
}

fn grid_meta(grid: &GridSpec, skipped: &SkipCounts, points: usize) -> Value {
    let mut m = Map::new();
    m.insert("spec".into(), Value::from(grid.to_string()));
    m.insert(
        "exclusion".into(),
        grid.exclusion()
            .map_or(Value::Null, |e| Value::from(e.expr.to_string())),
    );
    m.insert("points".into(), Value::from(points as u64));
    m.insert("skipped".into(), Value::from(skipped.total() as u64));
    Value::Object(m)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let off_diag = (0..m.nrows()).any(|i| (0..m.ncols()).any(|j| i != j && m[(i, j)] != 0.0));
    if !off_diag && m.is_square() {
        let d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)]).collect();
        return format!("diag{}", fmt_vec(&d));
    }
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| fmt_vec(&m.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    format!("[{}]", rows.join(", "))
}

fn matrix_value(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| nums(&m.row(i).iter().copied().collect::<Vec<_>>()))
            .collect(),
    )
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn algebra_info(space: &SpaceArgs) -> Result<Outcome, CliError> {
    let s = Space::resolve(&space.algebra)?;
    let alg = s.algebra()?;
    let t = alg.derived_tensors();
    let degenerate = t.is_degenerate();
    let mut report = Report::new("algebra-info");
    report
        .set("algebra", Value::from(alg.name()))
        .set("dim", Value::from(alg.dim() as u64))
        .set(
            "basis",
            Value::Array(
                alg.basis_labels()
                    .iter()
                    .map(|l| Value::from(l.as_str()))
                    .collect(),
            ),
        )
        .set("unit", nums(&t.epsilon))
        .set("q_lower", matrix_value(&t.q_lower))
        .set(
            "q_upper",
            t.q_upper.as_ref().map_or(Value::Null, matrix_value),
        )
        .set("big_q", t.big_q.as_ref().map_or(Value::Null, matrix_value))
        .set("degenerate", Value::Bool(degenerate))
        .set("diagonal", Value::Bool(alg.is_diagonal()));

    let mut summary = String::new();
    let _ = writeln!(summary, "algebra: {} (dim {})", alg.name(), alg.dim());
    let _ = writeln!(summary, "basis: {}", alg.basis_labels().join(" "));
    let _ = writeln!(summary, "ε = {}", fmt_vec(&t.epsilon));
    let _ = writeln!(summary, "q = {}", fmt_matrix(&t.q_lower));
    if let Some(q) = &t.q_upper {
        let _ = writeln!(summary, "q^-1 = {}", fmt_matrix(q));
    }
    if let Some(q) = &t.big_q {
        let _ = writeln!(summary, "Q = {}", fmt_matrix(q));
    }
    let _ = writeln!(summary, "degenerate: {degenerate}");
    Ok(Outcome {
        report,
        summary,
        passed: true,
    })
}

fn verify(
    map: &MapArgs,
    space: &SpaceArgs,
    grid: &GridArgs,
    check: &CheckArgs,
    fd_tol: f64,
) -> Result<Outcome, CliError> {
    let s = Space::resolve(&space.algebra)?;
    let (map, desc) = load_map(map, s.metric())?;
    check_dim(s.dim(), map.dim())?;
    let grid = load_grid(grid, s.dim())?;
    let opts = VerifyOptions {
        singular_margin: check.margin,
        ..VerifyOptions::default()
    };
    let r = verify_on_grid(&map, &s.delta()?, &grid, &opts)?;
    let gradient_ok = r.gradient_defect.is_none_or(|g| g <= fd_tol);
    let passed = r.passes(check.tol) && gradient_ok;

    let mut report = Report::new("verify");
    report
        .set("algebra", Value::from(s.name()))
        .set("map", desc);
    residual_report(&mut report, &r, check.tol);
    report
        .set("fd_tolerance", num(fd_tol))
        .set("passed", Value::Bool(passed));

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "points: {} evaluated, {} skipped",
        r.records.len(),
        r.skipped.total()
    );
    let _ = writeln!(
        summary,
        "max residual: {:.6e} (tol {:e})",
        r.max_residual, check.tol
    );
    if let Some(g) = r.gradient_defect {
        let _ = writeln!(summary, "gradient defect: {g:.6e} (tol {fd_tol:e})");
    }
    let _ = writeln!(summary, "{}", verdict(passed));
    Ok(Outcome {
        report,
        summary,
        passed,
    })
}

fn recover(
    map: &MapArgs,
    space: &SpaceArgs,
    point: &PointArgs,
    check: &CheckArgs,
) -> Result<Outcome, CliError> {
    let s = Space::resolve(&space.algebra)?;
    let (map, desc) = load_map(map, s.metric())?;
    check_dim(s.dim(), map.dim())?;
    let x = parse_numbers(&point.point, "--point")?;
    check_dim(s.dim(), x.len())?;
    let jet = eval_jet2_with(&map, &x, &EvalOptions::with_margin(check.margin))
        .map_err(|e| CliError::Usage(format!("cannot evaluate the map at {}: {e}", fmt_vec(&x))))?;
    let fields = recover_fields(&jet, &s.delta()?)?;
    let passed = fields.residual_norm <= check.tol;

    let mut report = Report::new("recover");
    report
        .set("algebra", Value::from(s.name()))
        .set("map", desc)
        .set("point", nums(&x))
        .set("p", nums(&fields.p))
        .set("s", nums(&fields.s))
        .set("residual", num(fields.residual_norm))
        .set("degenerate", Value::Bool(fields.degenerate))
        .set("tolerance", num(check.tol))
        .set("passed", Value::Bool(passed));

    let mut summary = String::new();
    let _ = writeln!(summary, "p = {}", fmt_vec(&fields.p));
    let _ = writeln!(summary, "s = {}", fmt_vec(&fields.s));
    let _ = writeln!(
        summary,
        "residual: {:.6e} (tol {:e})",
        fields.residual_norm, check.tol
    );
    if fields.degenerate {
        let _ = writeln!(summary, "degenerate: minimum-norm solution");
    }
    let _ = writeln!(summary, "{}", verdict(passed));
    Ok(Outcome {
        report,
        summary,
        passed,
    })
}

fn trace(
    map: &MapArgs,
    space: &SpaceArgs,
    grid: &GridArgs,
    check: &CheckArgs,
) -> Result<Outcome, CliError> {
    let s = Space::resolve(&space.algebra)?;
    let (map, desc) = load_map(map, s.metric())?;
    let n = s.dim();
    check_dim(n, map.dim())?;
    let grid = load_grid(grid, n)?;
    let delta = s.delta()?;
    let contraction = s.contraction()?;
    let (rows, skipped) = scan(&grid, |x| {
        let (jet, fields) = jet_and_fields_at(&map, &delta, &grid, x, check.margin)?;
        trace_residual(&jet, &fields, &delta, &contraction).map_err(|_| Skip::Domain)
    })?;
    let norm = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max = rows.iter().fold(0.0f64, |m, (_, _, t)| m.max(norm(t)));
    let passed = max <= check.tol;

    let mut table = Table::new(&[("index", 0), ("x", n), ("trace", n), ("norm", 0)]);
    for (i, x, t) in &rows {
        let mut row = vec![Cell::Int(*i as u64)];
        row.extend(x.iter().chain(t).map(|v| Cell::Num(*v)));
        row.push(Cell::Num(norm(t)));
        table.push(row);
    }
    let mut report = Report::new("trace");
    report
        .set("algebra", Value::from(s.name()))
        .set("map", desc)
        .set("contraction", matrix_value(&contraction))
        .set("grid", grid_meta(&grid, &skipped, rows.len()))
        .set("max_trace_residual", num(max))
        .set("tolerance", num(check.tol))
        .set("passed", Value::Bool(passed))
        .with_table(table);
    let summary = format!(
        "points: {} evaluated, {} skipped\nmax trace residual: {max:.6e} (tol {:e})\n{}\n",
        rows.len(),
        skipped.total(),
        check.tol,
        verdict(passed)
    );
    Ok(Outcome {
        report,
        summary,
        passed,
    })
}

fn compose(
    f: &MapArgs,
    g: &MapArgs,
    space: &SpaceArgs,
    grid: &GridArgs,
    check: &CheckArgs,
) -> Result<Outcome, CliError> {
    let s = Space::resolve(&space.algebra)?;
    let (fmap, fdesc) = load_map(f, s.metric())?;
    let (gmap, gdesc) = load_map(g, s.metric())?;
    check_dim(s.dim(), fmap.dim())?;
    check_dim(s.dim(), gmap.dim())?;
    let grid = load_grid(grid, s.dim())?;
    let opts = VerifyOptions {
        singular_margin: check.margin,
        ..VerifyOptions::default()
    };
    let r = compose_and_check(&fmap, &gmap, &s.delta()?, &grid, &opts)?;
    let passed = r.passes(check.tol);
    let mut report = Report::new("compose");
    report
        .set("algebra", Value::from(s.name()))
        .set("f", fdesc)
        .set("g", gdesc);
    residual_report(&mut report, &r, check.tol);
    let summary = format!(
        "points: {} evaluated, {} skipped\nmax composition defect: {:.6e} (tol {:e})\n{}\n",
        r.records.len(),
        r.skipped.total(),
        r.max_residual,
        check.tol,
        verdict(passed)
    );
    Ok(Outcome {
        report,
        summary,
        passed,
    })
}

fn analytic_check(
    map: &MapArgs,
    space: &SpaceArgs,
    grid: &GridArgs,
    check: &CheckArgs,
) -> Result<Outcome, CliError> {
    let s = Space::resolve(&space.algebra)?;
    let alg = s.algebra()?;
    let (map, desc) = load_map(map, None)?;
    let n = alg.dim();
    check_dim(n, map.dim())?;
    let grid = load_grid(grid, n)?;
    let gamma = GammaField::zero(n);
    let with_scalar = !alg.is_degenerate();
    let (rows, skipped) = scan(&grid, |x| {
        let jet = jet_at(&map, &grid, x, check.margin)?;
        let cr = cr_residual(&jet, &gamma, alg)
            .map_err(|_| Skip::Domain)?
            .norm();
        let scalar = if with_scalar {
            scalar_equation_check(&map, alg, x)
                .map_err(|_| Skip::Domain)?
                .defect()
        } else {
            f64::NAN
        };
        Ok((cr, scalar))
    })?;
    let max_cr = rows.iter().fold(0.0f64, |m, (_, _, (c, _))| m.max(*c));
    let max_scalar = with_scalar.then(|| rows.iter().fold(0.0f64, |m, (_, _, (_, d))| m.max(*d)));
    let passed = max_cr <= check.tol && max_scalar.is_none_or(|d| d <= check.tol);

    let mut table = Table::new(&[
        ("index", 0),
        ("x", n),
        ("cr_residual", 0),
        ("scalar_defect", 0),
    ]);
    for (i, x, (c, d)) in &rows {
        let mut row = vec![Cell::Int(*i as u64)];
        row.extend(x.iter().map(|v| Cell::Num(*v)));
        row.push(Cell::Num(*c));
        row.push(Cell::Num(*d));
        table.push(row);
    }
    let mut report = Report::new("analytic-check");
    report
        .set("algebra", Value::from(alg.name()))
        .set("map", desc)
        .set("grid", grid_meta(&grid, &skipped, rows.len()))
        .set("max_cr_residual", num(max_cr))
        .set("max_scalar_defect", max_scalar.map_or(Value::Null, num))
        .set("tolerance", num(check.tol))
        .set("passed", Value::Bool(passed))
        .with_table(table);
    let mut summary = format!(
        "points: {} evaluated, {} skipped\nmax CR residual: {max_cr:.6e} (tol {:e})\n",
        rows.len(),
        skipped.total(),
        check.tol
    );
    match max_scalar {
        Some(d) => {
            let _ = writeln!(summary, "max scalar-equation defect: {d:.6e}");
        }
        None => summary.push_str("scalar equation skipped: degenerate algebra\n"),
    }
    let _ = writeln!(summary, "{}", verdict(passed));
    Ok(Outcome {
        report,
        summary,
        passed,
    })
}

/// Coefficients `c0;c1;…`, each a comma-separated vector; newlines also
/// separate coefficients and `#` starts a comment.
pub fn parse_coefficients(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(';'))
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_numbers(t, "coefficients"))
        .collect()
}

fn source_solve(
    case: &str,
    coeffs: Option<&str>,
    source: Option<&Path>,
    check: &CheckArgs,
) -> Result<Outcome, CliError> {
    let case = SourceCase::from_name(case).ok_or_else(|| {
        let names: Vec<&str> = SourceCase::ALL.iter().map(|c| c.name()).collect();
        CliError::Usage(format!(
            "unknown case `{case}` (expected one of {})",
            names.join(", ")
        ))
    })?;
    let text = match (coeffs, source) {
        (Some(c), None) => c.to_string(),
        (None, Some(p)) => read(p)?,
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --coeffs or --source".into(),
            ))
        }
    };
    let alg = Arc::new(case.algebra());
    let src = PolyPolynomial::new(alg.clone(), parse_coefficients(&text)?)?;
    let solution = source_solution(&src, case, None)?;
    let defect = apply_operator(&solution, case)?.max_coeff_diff(&src);
    let passed = defect <= check.tol;

    let n = alg.dim();
    let mut table = Table::new(&[("degree", 0), ("c", n)]);
    for (k, c) in solution.coeffs().iter().enumerate() {
        let mut row = vec![Cell::Int(k as u64)];
        row.extend(c.iter().map(|v| Cell::Num(*v)));
        table.push(row);
    }
    let mut report = Report::new("source-solve");
    report
        .set("case", Value::from(case.name()))
        .set("algebra", Value::from(alg.name()))
        .set(
            "source",
            Value::Array(src.coeffs().iter().map(|c| nums(c)).collect()),
        )
        .set("divisor", num(case.divisor()))
        .set("defect", num(defect))
        .set("tolerance", num(check.tol))
        .set("passed", Value::Bool(passed))
        .with_table(table);
    let mut summary = format!("case: {} over {}\nsolution:\n", case.name(), alg.name());
    for (k, c) in solution.coeffs().iter().enumerate() {
        let _ = writeln!(summary, "  X^{k}: {}", fmt_vec(c));
    }
    let _ = writeln!(
        summary,
        "operator defect: {defect:.6e} (tol {:e})",
        check.tol
    );
    let _ = writeln!(summary, "{}", verdict(passed));
    Ok(Outcome {
        report,
        summary,
        passed,
    })
}

fn basis_check(map: &MapArgs, grid: &GridArgs, check: &CheckArgs) -> Result<Outcome, CliError> {
    let (map, desc) = load_map(map, None)?;
    check_dim(4, map.dim())?;
    let grid = load_grid(grid, 4)?;
    let (rows, skipped) = scan(&grid, |x| {
        if grid.excludes(x) {
            return Err(Skip::Excluded);
        }
        let b = basis_equivalence_check(&map, x).map_err(|_| Skip::Domain)?;
        let d = b
            .lhs_x
            .iter()
            .zip(&b.lhs_psi)
            .fold(0.0f64, |m, (x, p)| m.max((x - 4.0 * p).abs()));
        Ok((b, d))
    })?;
    let max = rows.iter().fold(0.0f64, |m, (_, _, (_, d))| m.max(*d));
    let passed = max <= check.tol;
    let mut table = Table::new(&[
        ("index", 0),
        ("x", 4),
        ("lhs_x", 4),
        ("lhs_psi", 4),
        ("defect", 0),
    ]);
    for (i, x, (b, d)) in &rows {
        let mut row = vec![Cell::Int(*i as u64)];
        row.extend(
            x.iter()
                .chain(&b.lhs_x)
                .chain(&b.lhs_psi)
                .map(|v| Cell::Num(*v)),
        );
        row.push(Cell::Num(*d));
        table.push(row);
    }
    let mut report = Report::new("basis-check");
    report
        .set("map", desc)
        .set("grid", grid_meta(&grid, &skipped, rows.len()))
        .set("max_defect", num(max))
        .set("tolerance", num(check.tol))
        .set("passed", Value::Bool(passed))
        .with_table(table);
    let summary = format!(
        "points: {} evaluated, {} skipped\nmax |lhs_x - 4 lhs_psi|: {max:.6e} (tol {:e})\n{}\n",
        rows.len(),
        skipped.total(),
        check.tol,
        verdict(passed)
    );
    Ok(Outcome {
        report,
        summary,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(args: &[&str]) -> Result<Outcome, CliError> {
        let cli =
            Cli::try_parse_from(std::iter::once("polyconf").chain(args.iter().copied())).unwrap();
        execute(&cli.command)
    }

    #[test]
    fn algebra_info_for_h4() {
        let o = outcome(&["algebra-info", "--algebra", "H4psi"]).unwrap();
        assert!(o.summary.contains("ε = (1, 1, 1, 1)"), "{}", o.summary);
        assert!(o.summary.contains("q = diag(1, 1, 1, 1)"));
        assert!(o.summary.contains("degenerate: false"));
        assert!(o.passed);
    }

    #[test]
    fn gallery_verify_passes() {
        let o = outcome(&[
            "verify",
            "--gallery",
            "mobius",
            "a=1",
            "b=1",
            "--algebra",
            "euclid2",
            "--grid",
            "[-0.4,0.4]^2@21",
        ])
        .unwrap();
        assert!(o.passed, "{}", o.summary);
        let max = o.report.header()["aggregates"]["max_residual"]
            .as_f64()
            .unwrap();
        assert!(max <= 1e-8);
    }

    #[test]
    fn recover_at_point() {
        let o = outcome(&[
            "recover",
            "--gallery",
            "scaled",
            "c=3",
            "--point",
            "-0.2,0.1",
        ])
        .unwrap();
        assert!(o.passed);
        assert_eq!(o.report.header()["p"][0].as_f64(), Some(0.0));
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            outcome(&["verify", "--gallery", "nope", "--grid", "[0,1]^2@3"]),
            Err(CliError::Conformal(ConformalError::UnknownGallery(_)))
        ));
        assert!(matches!(
            outcome(&["algebra-info", "--algebra", "octonions"]),
            Err(CliError::Algebra(AlgebraError::Unknown(_)))
        ));
        assert!(matches!(
            outcome(&[
                "verify",
                "--gallery",
                "mobius",
                "a=1",
                "--grid",
                "[0,1]^2@3"
            ]),
            Err(CliError::Conformal(ConformalError::DegenerateParameters(_)))
        ));
        assert!(matches!(
            outcome(&[
                "verify",
                "--gallery",
                "scaled",
                "c=1",
                "--grid",
                "[0,1]^2@3",
                "--exclude",
                "1"
            ]),
            Err(CliError::Conformal(ConformalError::EmptyGrid))
        ));
        assert!(outcome(&[
            "verify",
            "--gallery",
            "scaled",
            "c=1",
            "--grid",
            "[0,1]^3@3"
        ])
        .is_err());
    }

    #[test]
    fn source_solve_and_coefficients() {
        assert_eq!(
            parse_coefficients("1, 2; 3,4\n# note\n5,6").unwrap(),
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]
        );
        let o = outcome(&[
            "source-solve",
            "--case",
            "c-wave",
            "--coeffs",
            "1,0;0,1;2,-1",
        ])
        .unwrap();
        assert!(o.passed, "{}", o.summary);
        assert_eq!(o.report.table().unwrap().len(), 5);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["polyconf", "verify", "--grid"]), EXIT_INPUT);
        assert_eq!(main_with_args(["polyconf", "no-such-command"]), EXIT_INPUT);
    }
}
