//! The `kmsforge` command line.
//!
//! Every subcommand reads one JSON spec (see [`crate::spec`]) and writes a
//! JSON or CSV report. Exit codes: 0 success, 1 a check failed, 2 usage or
//! I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{
    stable_extreme_rays, ConeApprox, ConeVector, GaugedSystem, DEFAULT_DELTA, DEFAULT_THETA,
};
use crate::diagram::{DSequence, LeveledDiagram};
use crate::glue::{boundary_report_with, default_anchor, GluedDiagram, Topology};
use crate::spec::{AnySpec, DiagramSpec, GlueSpec, PipelineSpec, RationalFamily, UhfSpec};
use crate::spectral::{
    kms_defect, local_basis, state_from_cone, triviality_report, KmsFunctionalTable,
    DEFAULT_PATH_CAP,
};
use crate::uhf::{
    embed_into_uhf, realize_on_uhf, realized_report, Realization, DEFAULT_WINDOW_CAP,
};
use crate::{Error, Result};

/// Rows whose KMS defect exceeds this are marked failed.
pub const ROW_DEFECT_TOL: f64 = 1e-10;
/// Largest level at which sweeps check the KMS condition.
pub const MAX_CHECK_LEVEL: usize = 3;
/// Shift applied to grid points that land on an interval endpoint.
pub const ENDPOINT_OFFSET: f64 = 1e-3;
/// Default β grid when neither the spec nor the command line gives one.
pub const DEFAULT_GRID: &str = "-4:4:0.5";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "kmsforge",
    version,
    about = "KMS-state cones of Bratteli diagrams with potentials"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a diagram for sources, sinks and shape errors.
    Validate(CommonArgs),
    /// One row per β: interval count, extreme rays, contraction sum, topology, KMS defect.
    Sweep(CommonArgs),
    /// Boundary reports of a glued diagram.
    Glue(CommonArgs),
    /// Embed a diagram into a UHF diagram and print the certificate.
    Embed(EmbedArgs),
    /// Realize a glued diagram on a UHF algebra and report the realized cones.
    Pipeline(CommonArgs),
    /// Rational-interval family demo: distinct cells get distinct extreme counts.
    Thm11Demo(DemoArgs),
    /// Turn cone generators into states and measure their KMS defect.
    KmsCheck(KmsArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Truncation depth (defaults to the spec's depth).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Grid `min:max:step`.
    #[arg(long, conflicts_with = "beta", allow_hyphen_values = true)]
    pub beta_grid: Option<String>,
    /// Explicit β values `v1,v2,...`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Clustering tolerance θ, or the defect tolerance for `kms-check`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads for per-β rows.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Keep β = 0 (the trace cone) in the grid.
    #[arg(long)]
    pub include_zero: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Repeated UHF factor pattern, e.g. `2` or `2,3` (overrides the spec).
    #[arg(long, value_delimiter = ',')]
    pub uhf: Option<Vec<u64>>,
    /// Most UHF factors one level may absorb.
    #[arg(long, default_value_t = DEFAULT_WINDOW_CAP)]
    pub window_cap: usize,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Endpoints range over `[-Q, Q]`.
    #[arg(long = "big-q", default_value_t = 2)]
    pub big_q: u32,
    /// Largest endpoint denominator.
    #[arg(long, default_value_t = 1)]
    pub q: u32,
    /// Growth of the simplex seeds.
    #[arg(long, default_value_t = 4)]
    pub growth: u64,
    /// Sample points per open cell.
    #[arg(long, default_value_t = 2)]
    pub per_cell: usize,
    /// Write the generated pipeline spec here.
    #[arg(long)]
    pub emit_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KmsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Level `n` of the local algebra.
    #[arg(long, default_value_t = MAX_CHECK_LEVEL)]
    pub level: usize,
    /// Check this state table instead of the generated ones.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Write the state of the first generator at the first β here.
    #[arg(long)]
    pub dump_state: Option<PathBuf>,
    /// Path enumeration cap.
    #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
    pub path_cap: u64,
}

/// A report plus, for failed checks, the reason; the report is written either way.
enum Outcome {
    Ok(String),
    Failed(String, String),
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("KMSFORGE_LOG", "warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let common = match &cli.command {
        Command::Validate(c) | Command::Sweep(c) | Command::Glue(c) | Command::Pipeline(c) => c,
        Command::Embed(a) => &a.common,
        Command::Thm11Demo(a) => &a.common,
        Command::KmsCheck(a) => &a.common,
    };
    let out = common.out.clone();
    let result = match common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::Spec(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(outcome) => {
            let (text, failure) = match outcome {
                Outcome::Ok(t) => (t, None),
                Outcome::Failed(t, why) => (t, Some(why)),
            };
            if let Err(e) = write_output(out.as_ref(), &text) {
                eprintln!("kmsforge: {e}");
                return EXIT_USAGE;
            }
            match failure {
                Some(why) => {
                    eprintln!("kmsforge: {why}");
                    EXIT_FAILED
                }
                None => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("kmsforge: {e}");
            exit_code(&e)
        }
    }
}

/// 2 for malformed input and I/O, 1 for everything the numerics rejected.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Spec(_) | Error::Io(_) | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_FAILED,
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Validate(c) => cmd_validate(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Glue(c) => cmd_glue(c),
        Command::Embed(a) => cmd_embed(a),
        Command::Pipeline(c) => cmd_pipeline(c),
        Command::Thm11Demo(a) => cmd_thm11_demo(a),
        Command::KmsCheck(a) => cmd_kms_check(a),
    }
}

fn load(c: &CommonArgs) -> Result<AnySpec> {
    let path = c
        .spec
        .as_ref()
        .ok_or_else(|| Error::Spec("--spec is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
    AnySpec::from_json(&text)
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn require_json(c: &CommonArgs, what: &str) -> Result<()> {
    if c.format == Format::Csv {
        return Err(Error::Spec(format!(
            "{what} writes JSON only; CSV is available for sweep, pipeline and thm11-demo"
        )));
    }
    Ok(())
}

/// `min:max:step`, both ends included up to rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Spec(format!("β grid `{text}` is not min:max:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(Error::Spec(format!(
            "β grid `{text}` has more than a million points"
        )));
    }
    Ok((0..=n)
        .map(|i| a + step * i as f64)
        .map(|x| if x.abs() < 1e-12 * step { 0.0 } else { x })
        .collect())
}

/// Grid points drop β = 0 unless asked and move off interval endpoints;
/// explicit `--beta` values are used as given apart from the β = 0 rule.
pub fn beta_values(c: &CommonArgs, spec_grid: &[f64], endpoints: &[f64]) -> Result<Vec<f64>> {
    let (mut betas, is_grid) = match (&c.beta, &c.beta_grid) {
        (Some(list), _) => (list.clone(), false),
        (None, Some(g)) => (parse_grid(g)?, true),
        (None, None) if !spec_grid.is_empty() => (spec_grid.to_vec(), false),
        (None, None) => (parse_grid(DEFAULT_GRID)?, true),
    };
    if betas.iter().any(|b| !b.is_finite()) {
        return Err(Error::Spec("β values must be finite".into()));
    }
    if is_grid {
        for b in betas.iter_mut() {
            if endpoints.iter().any(|e| (*b - e).abs() < 1e-12) {
                *b += ENDPOINT_OFFSET;
            }
        }
    }
    if !c.include_zero {
        let before = betas.len();
        betas.retain(|b| *b != 0.0);
        if betas.len() < before {
            info!("β = 0 removed from the grid");
        }
    }
    if betas.is_empty() {
        return Err(Error::Spec("the β grid is empty".into()));
    }
    Ok(betas)
}

fn endpoints(g: &GluedDiagram) -> Vec<f64> {
    g.intervals.iter().flat_map(|i| i.endpoints()).collect()
}

fn depth_of(c: &CommonArgs, spec_depth: usize) -> Result<usize> {
    let d = c.depth.unwrap_or(spec_depth);
    if d < 2 {
        return Err(Error::Spec(format!("depth must be at least 2, got {d}")));
    }
    Ok(d)
}

fn theta(c: &CommonArgs) -> f64 {
    c.tol.unwrap_or(DEFAULT_THETA)
}

#[derive(Debug, Serialize)]
struct ValidateOutput {
    passed: bool,
    #[serde(flatten)]
    report: crate::diagram::ValidationReport,
    messages: Vec<String>,
}

fn cmd_validate(c: &CommonArgs) -> Result<Outcome> {
    let spec = load(c)?;
    let (d, depth, uhf) = match &spec {
        AnySpec::Diagram(d) => {
            let d = d.build()?;
            let depth = c.depth.unwrap_or(d.depth_limit().unwrap_or(8));
            (d, depth, None)
        }
        AnySpec::Glue(g) => (g.build()?.diagram().clone(), depth_of(c, g.depth)?, None),
        AnySpec::Pipeline(p) => (
            p.glue.build()?.diagram().clone(),
            depth_of(c, p.depth)?,
            Some(&p.uhf),
        ),
    };
    if let Some(u) = uhf {
        u.validate()?;
    }
    let report = d.validate(depth);
    let out = ValidateOutput {
        passed: report.passed(),
        messages: report.violations.iter().map(|v| v.to_string()).collect(),
        report,
    };
    let text = match c.format {
        Format::Json => json(&out)?,
        Format::Csv => {
            let mut s = String::from("level,violation\n");
            for (v, m) in out.report.violations.iter().zip(&out.messages) {
                let _ = writeln!(s, "{},{}", v.level, m.replace(',', ";"));
            }
            s
        }
    };
    Ok(if out.passed {
        Outcome::Ok(text)
    } else {
        Outcome::Failed(text, out.messages[0].clone())
    })
}

/// One line of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub n_intervals: usize,
    pub extreme_rays: usize,
    pub stability_gap: f64,
    pub contraction_sum: f64,
    pub topology: String,
    pub kms_defect: f64,
    /// Level at which the KMS defect was measured.
    pub n_check: usize,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const CSV_HEADER: &str =
    "beta,n_intervals,extreme_rays,stability_gap,contraction_sum,topology,kms_defect";

/// Fixed formatting: 17 significant digits, `.` separator, `\n` endings.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{:.16e},{},{},{:.16e},{:.16e},{},{:.16e}",
            r.beta,
            r.n_intervals,
            r.extreme_rays,
            r.stability_gap,
            r.contraction_sum,
            r.topology,
            r.kms_defect
        );
    }
    s
}

/// What a sweep row is computed on.
pub enum SweepTarget<'a> {
    Glued(&'a GluedDiagram),
    Realized(&'a Realization),
}

impl SweepTarget<'_> {
    fn glued(&self) -> &GluedDiagram {
        match self {
            SweepTarget::Glued(g) => g,
            SweepTarget::Realized(r) => &r.glued,
        }
    }
}

/// Largest `n <= max_n` whose local basis fits under `cap`, and the largest
/// KMS defect of the states built from `gens` there.
pub fn max_kms_defect(
    d: &LeveledDiagram,
    beta: f64,
    gens: &[ConeVector],
    max_n: usize,
    cap: u64,
) -> Result<(usize, f64)> {
    let top = gens.iter().map(|g| g.depth()).min().unwrap_or(0).min(max_n);
    for n in (0..=top).rev() {
        let basis = match local_basis(d, n, cap) {
            Ok(b) => b,
            Err(Error::PathCap { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut worst = 0.0f64;
        for g in gens {
            worst = worst.max(kms_defect(&basis, beta, &state_of(&basis, beta, g, n)?));
        }
        return Ok((n, worst));
    }
    Ok((0, 0.0))
}

/// The state of a cone vector at level `n`, normalized by its mass.
fn state_of(
    basis: &crate::spectral::LocalAlgebraBasis,
    beta: f64,
    g: &ConeVector,
    n: usize,
) -> Result<KmsFunctionalTable> {
    let mass = g.mass();
    let psi: Vec<f64> = g.natural(n).iter().map(|x| x / mass).collect();
    state_from_cone(basis, beta, &psi)
}

/// One sweep row; failures are recorded in the row.
pub fn sweep_row(t: &SweepTarget, beta: f64, depth: usize, theta: f64, delta: usize) -> SweepRow {
    let g = t.glued();
    let mut row = SweepRow {
        beta,
        n_intervals: g.active(beta).len(),
        extreme_rays: 0,
        stability_gap: f64::NAN,
        contraction_sum: f64::NAN,
        topology: Topology::Unstable.to_string(),
        kms_defect: f64::NAN,
        n_check: 0,
        failed: true,
        error: None,
    };
    let res = (|| -> Result<()> {
        let anchor = default_anchor(g).min(depth - 1);
        let br = boundary_report_with(g, beta, anchor, depth, theta, delta)?;
        row.contraction_sum = triviality_report(g.diagram(), beta, depth)?.total();
        let mut topology = br.topology;
        let (n, defect) = match t {
            SweepTarget::Glued(_) => {
                row.extreme_rays = br.extreme_rays;
                row.stability_gap = br.stability_gap;
                max_kms_defect(
                    g.diagram(),
                    beta,
                    &br.generators,
                    MAX_CHECK_LEVEL,
                    DEFAULT_PATH_CAP,
                )?
            }
            SweepTarget::Realized(r) => {
                let rr = realized_report(r, beta, depth, theta, delta)?;
                row.extreme_rays = rr.extreme_rays;
                row.stability_gap = rr.stability_gap;
                if !rr.stable {
                    topology = Topology::Unstable;
                }
                if rr.generators.is_empty() {
                    max_kms_defect(
                        g.diagram(),
                        beta,
                        &br.generators,
                        MAX_CHECK_LEVEL,
                        DEFAULT_PATH_CAP,
                    )?
                } else {
                    max_kms_defect(
                        r.diagram(),
                        beta,
                        &rr.generators,
                        MAX_CHECK_LEVEL,
                        DEFAULT_PATH_CAP,
                    )?
                }
            }
        };
        row.topology = topology.to_string();
        row.n_check = n;
        row.kms_defect = defect;
        Ok(())
    })();
    match res {
        Ok(()) if row.kms_defect <= ROW_DEFECT_TOL => row.failed = false,
        Ok(()) => warn!(
            "β = {beta}: KMS defect {:e} above {ROW_DEFECT_TOL:e}",
            row.kms_defect
        ),
        Err(e) => {
            warn!("β = {beta}: {e}");
            row.error = Some(e.to_string());
        }
    }
    if row.failed {
        row.topology = "failed".into();
    }
    row
}

/// Rows in β order, computed in parallel.
pub fn sweep(
    t: &SweepTarget,
    betas: &[f64],
    depth: usize,
    theta: f64,
    delta: usize,
) -> Vec<SweepRow> {
    betas
        .par_iter()
        .map(|&b| {
            info!("sweep row β = {b}");
            sweep_row(t, b, depth, theta, delta)
        })
        .collect()
}

fn render_rows(c: &CommonArgs, rows: &[SweepRow]) -> Result<String> {
    match c.format {
        Format::Json => json(&rows),
        Format::Csv => Ok(rows_to_csv(rows)),
    }
}

fn cmd_sweep(c: &CommonArgs) -> Result<Outcome> {
    let rows = match load(c)? {
        AnySpec::Glue(gs) => {
            let depth = depth_of(c, gs.depth)?;
            let g = gs.build()?;
            let betas = beta_values(c, &[], &endpoints(&g))?;
            sweep(
                &SweepTarget::Glued(&g),
                &betas,
                depth,
                theta(c),
                DEFAULT_DELTA,
            )
        }
        AnySpec::Pipeline(p) => {
            let depth = depth_of(c, p.depth)?;
            let r = realize_on_uhf(&p.glue.build()?, &p.uhf, DEFAULT_WINDOW_CAP)?;
            let betas = beta_values(c, &p.beta_grid, &endpoints(&r.glued))?;
            sweep(
                &SweepTarget::Realized(&r),
                &betas,
                depth,
                theta(c),
                DEFAULT_DELTA,
            )
        }
        AnySpec::Diagram(_) => {
            return Err(Error::Spec("sweep needs a glue or pipeline spec".into()))
        }
    };
    Ok(Outcome::Ok(render_rows(c, &rows)?))
}

#[derive(Debug, Serialize)]
struct GlueOutput {
    intervals: Vec<crate::glue::IntervalSpec>,
    level_sizes: Vec<usize>,
    reports: Vec<serde_json::Value>,
}

fn glue_spec_of(spec: AnySpec) -> Result<(GlueSpec, Vec<f64>)> {
    match spec {
        AnySpec::Glue(g) => Ok((g, Vec::new())),
        AnySpec::Pipeline(p) => Ok((p.glue, p.beta_grid)),
        AnySpec::Diagram(DiagramSpec::Glued(g)) => Ok((g, Vec::new())),
        AnySpec::Diagram(_) => Err(Error::Spec("expected a glue spec".into())),
    }
}

fn cmd_glue(c: &CommonArgs) -> Result<Outcome> {
    require_json(c, "glue")?;
    let (gs, grid) = glue_spec_of(load(c)?)?;
    let depth = depth_of(c, gs.depth)?;
    let g = gs.build()?;
    let betas = beta_values(c, &grid, &endpoints(&g))?;
    let level_sizes = (0..=depth)
        .map(|j| g.diagram().level_size(j))
        .collect::<Result<_>>()?;
    let anchor = default_anchor(&g).min(depth - 1);
    let th = theta(c);
    let reports: Vec<serde_json::Value> = betas
        .par_iter()
        .map(
            |&b| match boundary_report_with(&g, b, anchor, depth, th, DEFAULT_DELTA) {
                Ok(r) => serde_json::to_value(r).unwrap_or_default(),
                Err(e) => serde_json::json!({ "beta": b, "error": e.to_string() }),
            },
        )
        .collect();
    let failed = reports.iter().any(|r| r.get("error").is_some());
    let text = json(&GlueOutput {
        intervals: g.intervals.clone(),
        level_sizes,
        reports,
    })?;
    Ok(if failed {
        Outcome::Failed(text, "some boundary reports failed".into())
    } else {
        Outcome::Ok(text)
    })
}

fn cmd_embed(a: &EmbedArgs) -> Result<Outcome> {
    let c = &a.common;
    require_json(c, "embed")?;
    let flag = a.uhf.as_ref().map(|v| UhfSpec {
        d: DSequence::repeat(v.clone()),
    });
    let (d, depth, u) = match load(c)? {
        AnySpec::Pipeline(p) => (
            p.glue.build()?.diagram().clone(),
            depth_of(c, p.depth)?,
            flag.unwrap_or(p.uhf),
        ),
        AnySpec::Glue(g) => (
            g.build()?.diagram().clone(),
            depth_of(c, g.depth)?,
            flag.ok_or_else(no_uhf)?,
        ),
        AnySpec::Diagram(d) => (d.build()?, depth_of(c, 8)?, flag.ok_or_else(no_uhf)?),
    };
    u.validate()?;
    match embed_into_uhf(&d, &u, depth, a.window_cap) {
        Ok((_, cert)) => {
            cert.verify()?;
            Ok(Outcome::Ok(json(&cert)?))
        }
        Err(e @ (Error::Certificate(_) | Error::WindowCap { .. } | Error::InvalidDiagram(_))) => {
            let text = json(&serde_json::json!({ "verified": false, "error": e.to_string() }))?;
            Ok(Outcome::Failed(text, e.to_string()))
        }
        Err(e) => Err(e),
    }
}

fn no_uhf() -> Error {
    Error::Spec("--uhf is required unless the spec is a pipeline".into())
}

#[derive(Debug, Serialize)]
struct PipelineOutput {
    depth: usize,
    /// `t_k` of the plus and minus factors.
    t_plus: Vec<f64>,
    t_minus: Vec<f64>,
    certificates_verified: bool,
    path_counts_match: bool,
    reports: Vec<serde_json::Value>,
}

fn cmd_pipeline(c: &CommonArgs) -> Result<Outcome> {
    let p: PipelineSpec = match load(c)? {
        AnySpec::Pipeline(p) => p,
        _ => {
            return Err(Error::Spec(
                "pipeline needs a pipeline spec (glue, uhf, depth)".into(),
            ))
        }
    };
    let depth = depth_of(c, p.depth)?;
    let r = realize_on_uhf(&p.glue.build()?, &p.uhf, DEFAULT_WINDOW_CAP)?;
    let betas = beta_values(c, &p.beta_grid, &endpoints(&r.glued))?;
    if c.format == Format::Csv {
        let rows = sweep(
            &SweepTarget::Realized(&r),
            &betas,
            depth,
            theta(c),
            DEFAULT_DELTA,
        );
        return Ok(Outcome::Ok(rows_to_csv(&rows)));
    }
    let verified = [&r.plus, &r.minus]
        .iter()
        .all(|f| f.certificate(depth).and_then(|c| c.verify()).is_ok());
    let path_counts_match =
        (1..=depth.min(8)).all(|j| r.path_count_check(j).map(|(a, b)| a == b).unwrap_or(false));
    let t_plus = (1..=depth)
        .map(|k| r.plus.extended.t(k))
        .collect::<Result<_>>()?;
    let t_minus = (1..=depth)
        .map(|k| r.minus.extended.t(k))
        .collect::<Result<_>>()?;
    let th = theta(c);
    let reports: Vec<serde_json::Value> = betas
        .par_iter()
        .map(
            |&b| match realized_report(&r, b, depth, th, DEFAULT_DELTA) {
                Ok(rep) => serde_json::to_value(rep).unwrap_or_default(),
                Err(e) => serde_json::json!({ "beta": b, "error": e.to_string() }),
            },
        )
        .collect();
    let ok = verified && path_counts_match && reports.iter().all(|r| r.get("error").is_none());
    let text = json(&PipelineOutput {
        depth,
        t_plus,
        t_minus,
        certificates_verified: verified,
        path_counts_match,
        reports,
    })?;
    Ok(if ok {
        Outcome::Ok(text)
    } else {
        Outcome::Failed(text, "pipeline checks failed".into())
    })
}

/// Sample points: `per_cell` points inside every open cell of the grid.
pub fn demo_points(grid: &[f64], per_cell: usize) -> Vec<f64> {
    let per_cell = per_cell.max(1);
    let mut out = Vec::new();
    let frac = |i: usize| (i + 1) as f64 / (per_cell + 1) as f64;
    if let (Some(&first), Some(&last)) = (grid.first(), grid.last()) {
        out.extend((0..per_cell).map(|i| first - 1.0 + frac(i)));
        for w in grid.windows(2) {
            out.extend((0..per_cell).map(|i| w[0] + (w[1] - w[0]) * frac(i)));
        }
        out.extend((0..per_cell).map(|i| last + frac(i)));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct DemoCheck {
    pub pairs_checked: usize,
    /// `(β, β')` pairs whose counts contradict their active sets.
    pub failures: Vec<(f64, f64)>,
}

/// Counts must agree exactly when the active sets agree.
pub fn check_distinct(rows: &[SweepRow], active: &[Vec<usize>]) -> DemoCheck {
    let mut failures = Vec::new();
    let mut pairs = 0;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            pairs += 1;
            let same = active[a] == active[b];
            let equal = rows[a].extreme_rays == rows[b].extreme_rays;
            if rows[a].failed || rows[b].failed || same != equal {
                failures.push((rows[a].beta, rows[b].beta));
            }
        }
    }
    DemoCheck {
        pairs_checked: pairs,
        failures,
    }
}

#[derive(Debug, Serialize)]
struct DemoOutput {
    big_q: u32,
    q: u32,
    spec: PipelineSpec,
    rows: Vec<SweepRow>,
    check: DemoCheck,
}

fn cmd_thm11_demo(a: &DemoArgs) -> Result<Outcome> {
    let c = &a.common;
    let family = RationalFamily::new(a.big_q, a.q)?;
    let n_seeds = family.intervals().len() + 1;
    let depth = depth_of(c, n_seeds + 20)?;
    let g = family.build(a.growth, depth)?;
    info!(
        "glued {} seeds, level {depth} has {} vertices",
        n_seeds,
        g.diagram().level_size(depth)?
    );
    let grid = family.grid();
    let points = match (&c.beta, &c.beta_grid) {
        (None, None) => demo_points(&grid, a.per_cell),
        _ => beta_values(c, &[], &grid)?,
    };
    let points: Vec<f64> = points
        .into_iter()
        .filter(|b| *b != 0.0 || c.include_zero)
        .collect();
    let uhf = UhfSpec {
        d: DSequence::repeat(vec![2]),
    };
    let spec = PipelineSpec {
        glue: family.glue_spec(a.growth, depth),
        uhf: uhf.clone(),
        depth,
        beta_grid: points.clone(),
    };
    if let Some(p) = &a.emit_spec {
        std::fs::write(p, json(&spec)?)?;
    }
    let r = realize_on_uhf(&g, &uhf, DEFAULT_WINDOW_CAP)?;
    let rows = sweep(
        &SweepTarget::Realized(&r),
        &points,
        depth,
        theta(c),
        DEFAULT_DELTA,
    );
    let active: Vec<Vec<usize>> = points.iter().map(|&b| g.active(b)).collect();
    let check = check_distinct(&rows, &active);
    let why = (!check.failures.is_empty()).then(|| {
        format!(
            "{} of {} pairs contradict their cells",
            check.failures.len(),
            check.pairs_checked
        )
    });
    let text = match c.format {
        Format::Json => json(&DemoOutput {
            big_q: a.big_q,
            q: a.q,
            spec,
            rows,
            check,
        })?,
        Format::Csv => rows_to_csv(&rows),
    };
    Ok(match why {
        Some(w) => Outcome::Failed(text, w),
        None => Outcome::Ok(text),
    })
}

#[derive(Debug, Serialize)]
pub struct KmsCheckRow {
    pub beta: f64,
    pub level: usize,
    pub generators: usize,
    pub defects: Vec<f64>,
    pub max_defect: f64,
    pub passed: bool,
}

/// Generators of the β-KMS cone and the diagram they live on.
pub fn cone_generators(
    spec: &AnySpec,
    beta: f64,
    depth: usize,
    level: usize,
    theta: f64,
) -> Result<(LeveledDiagram, Vec<ConeVector>)> {
    match spec {
        AnySpec::Diagram(DiagramSpec::Glued(gs)) | AnySpec::Glue(gs) => {
            let g = gs.build()?;
            let anchor = default_anchor(&g).min(depth - 1);
            let br = boundary_report_with(&g, beta, anchor, depth, theta, DEFAULT_DELTA)?;
            Ok((g.diagram().clone(), br.generators))
        }
        AnySpec::Diagram(ds) => {
            let d = ds.build()?;
            let sys = GaugedSystem::new(&d, beta, depth + DEFAULT_DELTA)?;
            let m = level.clamp(1, depth - 1);
            let rays = stable_extreme_rays(&sys, m, depth, theta, DEFAULT_DELTA)?;
            let approx = ConeApprox::from_system(&sys, m, depth)?;
            let gens = rays
                .representatives
                .iter()
                .map(|&i| approx.generator(&sys, i))
                .collect::<Result<_>>()?;
            Ok((d, gens))
        }
        AnySpec::Pipeline(p) => {
            let r = realize_on_uhf(&p.glue.build()?, &p.uhf, DEFAULT_WINDOW_CAP)?;
            let rr = realized_report(&r, beta, depth, theta, DEFAULT_DELTA)?;
            if rr.generators.is_empty() {
                return Err(Error::Domain(
                    "the realized diagram is too large to check directly; lower --depth".into(),
                ));
            }
            Ok((r.diagram().clone(), rr.generators))
        }
    }
}

fn cmd_kms_check(a: &KmsArgs) -> Result<Outcome> {
    let c = &a.common;
    require_json(c, "kms-check")?;
    let tol = c.tol.unwrap_or(ROW_DEFECT_TOL);
    let spec = load(c)?;
    let spec_depth = match &spec {
        AnySpec::Glue(g) => g.depth,
        AnySpec::Pipeline(p) => p.depth,
        AnySpec::Diagram(_) => 12,
    };
    let depth = depth_of(c, spec_depth)?.max(a.level + 1);
    let capped = |e: Error| match e {
        Error::PathCap { level, count, cap } => Error::Domain(format!(
            "level {level} needs {count} paths (cap {cap}); try a smaller --level"
        )),
        e => e,
    };

    if let Some(path) = &a.state {
        let table: KmsFunctionalTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let d = match &spec {
            AnySpec::Diagram(ds) => ds.build()?,
            AnySpec::Glue(g) => g.build()?.diagram().clone(),
            AnySpec::Pipeline(p) => realize_on_uhf(&p.glue.build()?, &p.uhf, DEFAULT_WINDOW_CAP)?
                .diagram()
                .clone(),
        };
        let basis = local_basis(&d, table.level, a.path_cap).map_err(capped)?;
        if basis.paths.len() != table.diag.len() {
            return Err(Error::Spec(format!(
                "state has {} entries, level {} has {} paths",
                table.diag.len(),
                table.level,
                basis.paths.len()
            )));
        }
        let defect = kms_defect(&basis, table.beta, &table);
        let row = KmsCheckRow {
            beta: table.beta,
            level: table.level,
            generators: 1,
            defects: vec![defect],
            max_defect: defect,
            passed: defect <= tol,
        };
        let text = json(&vec![&row])?;
        return Ok(if row.passed {
            Outcome::Ok(text)
        } else {
            Outcome::Failed(text, format!("KMS defect {defect:e} exceeds {tol:e}"))
        });
    }

    // `--tol` is the defect tolerance here, so clustering keeps its default θ.
    let betas = beta_values(c, &[], &[])?;
    let mut rows = Vec::with_capacity(betas.len());
    for (i, &beta) in betas.iter().enumerate() {
        let (d, gens) = cone_generators(&spec, beta, depth, a.level, DEFAULT_THETA)?;
        let basis = local_basis(&d, a.level, a.path_cap).map_err(capped)?;
        let mut defects = Vec::with_capacity(gens.len());
        for (k, g) in gens.iter().enumerate() {
            let table = state_of(&basis, beta, g, a.level)?;
            if i == 0 && k == 0 {
                if let Some(p) = &a.dump_state {
                    std::fs::write(p, json(&table)?)?;
                }
            }
            defects.push(kms_defect(&basis, beta, &table));
        }
        let max_defect = defects.iter().cloned().fold(0.0, f64::max);
        rows.push(KmsCheckRow {
            beta,
            level: a.level,
            generators: gens.len(),
            defects,
            max_defect,
            passed: max_defect <= tol,
        });
    }
    let text = json(&rows)?;
    let bad: Vec<f64> = rows.iter().filter(|r| !r.passed).map(|r| r.beta).collect();
    Ok(if bad.is_empty() {
        Outcome::Ok(text)
    } else {
        Outcome::Failed(text, format!("KMS defect above {tol:e} at β = {bad:?}"))
    })
}
