use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use covertime_core::graph::{serialize_graph, Ball};
use covertime_core::green::{find_small_radius, green_table, GreenTableExport, SmallRadiusWitness};
use covertime_core::mdp::{self, Model};
use covertime_core::walk::{
    default_levels, exact_tail_estimate, rate_curve, tail_probability_mc,
    tail_probability_splitting, RateMethod, TailEstimate,
};
use covertime_core::{Error, Execution};

use crate::config::{build_corpus, build_family, build_graph, Params};
use crate::verify::{run_suite, SuiteOptions, Verdict};
use crate::CliError;

/// What a command produced: text for stdout (or `--out`), extra files, and
/// a diagnostic for stderr.
#[derive(Debug, Default)]
pub struct Output {
    pub body: String,
    pub sidecars: Vec<(PathBuf, String)>,
    pub note: Option<String>,
    pub failed: bool,
}

impl Output {
    fn body(body: String) -> Self {
        Output { body, ..Output::default() }
    }
}

pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: &'a Params,
    result: T,
}

fn json<T: Serialize>(command: &str, config: &Params, result: T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope { command, config, result })
        .map_err(|e| CliError::Runtime(e.into()))?;
    s.push('\n');
    Ok(s)
}

fn need<T: Clone>(value: &Option<T>, name: &str) -> Result<T, CliError> {
    Params::require(value, name).map_err(CliError::Usage)
}

fn graph_of(p: &Params) -> Result<covertime_core::Graph, CliError> {
    build_graph(&need(&p.graph, "graph")?).map_err(CliError::Usage)
}

fn model_of(p: &Params) -> Result<Model, CliError> {
    match p.model.as_deref() {
        None | Some("full") => Ok(Model::Full),
        Some("collapsed") => Ok(Model::Collapsed),
        Some(other) => Err(CliError::Usage(anyhow!("unknown model {other:?}"))),
    }
}

pub fn gen(p: &Params) -> Result<Output, CliError> {
    Ok(Output::body(serialize_graph(&graph_of(p)?)))
}

#[derive(Serialize)]
struct GreenResult {
    table: GreenTableExport,
    small_radius: Option<SmallRadiusWitness>,
}

pub fn green(p: &Params) -> Result<Output, CliError> {
    let g = graph_of(p)?;
    let (v, r) = (need(&p.v, "v")?, need(&p.r, "r")?);
    let table = green_table(&g, v, r)?;
    let small_radius = match find_small_radius(&g, v, r) {
        Ok(w) => Some(w),
        Err(Error::BallCoversGraph { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Output::body(json("green", p, GreenResult { table: table.export(&g), small_radius })?))
}

pub fn mdp_cmd(p: &Params) -> Result<Output, CliError> {
    let g = graph_of(p)?;
    let (v, r) = (need(&p.v, "v")?, need(&p.r, "r")?);
    let ball = Ball::new(&g, v, r)?;
    let value = mdp::solve(&g, &ball, model_of(p)?)?;
    let start = match p.start {
        Some(s) => s,
        None => value.min_psi().1,
    };
    Ok(Output::body(json("mdp", p, value.export(start, &g)?)?))
}

fn tail_estimate(p: &Params, g: &covertime_core::Graph) -> Result<TailEstimate, CliError> {
    let start = p.start.unwrap_or(0);
    let horizon = need(&p.t, "T")?;
    let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
    Ok(match p.method.as_deref().unwrap_or("exact") {
        "exact" => exact_tail_estimate(g, start, horizon)?,
        "mc" => tail_probability_mc(g, start, horizon, samples, p.seed())?,
        "splitting" => {
            let levels = p.levels.clone().unwrap_or_else(|| default_levels(g.n()));
            let budget = p.budget.unwrap_or(samples);
            tail_probability_splitting(g, start, horizon, &levels, budget, p.seed())?
        }
        other => return Err(CliError::Usage(anyhow!("unknown method {other:?}"))),
    })
}

pub fn tail(p: &Params) -> Result<Output, CliError> {
    let g = graph_of(p)?;
    let est = tail_estimate(p, &g)?;
    Ok(Output::body(json("tail", p, est)?))
}

#[derive(Serialize)]
struct RateMeta<'a> {
    command: &'a str,
    config: &'a Params,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    dropped: &'a [usize],
}

pub fn rate(p: &Params) -> Result<Output, CliError> {
    let family = build_family(&need(&p.family, "family")?, p.seed()).map_err(CliError::Usage)?;
    let c = need(&p.c, "C")?;
    let sizes = need(&p.n_list, "n")?;
    let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
    let method = match p.method.as_deref().unwrap_or("exact") {
        "exact" => RateMethod::Exact,
        "mc" => RateMethod::Mc { samples, seed: p.seed() },
        "splitting" => RateMethod::Splitting { budget: p.budget.unwrap_or(samples), seed: p.seed() },
        other => return Err(CliError::Usage(anyhow!("unknown method {other:?}"))),
    };
    let curve = rate_curve(family, c, &sizes, method)?;

    let config = serde_json::to_string(p).map_err(|e| CliError::Runtime(e.into()))?;
    let mut csv = format!("# config: {config}\n");
    csv.push_str("n,method,T,p_hat,ci_low,ci_high,alpha_hat,samples,seed\n");
    for row in &curve.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            row.n,
            row.method.name(),
            row.threshold,
            row.p_hat,
            row.ci_low,
            row.ci_high,
            row.alpha_hat,
            row.samples,
            row.seed
        );
    }
    let meta = RateMeta {
        command: "rate",
        config: p,
        slope: curve.slope,
        intercept: curve.intercept,
        r_squared: curve.r_squared,
        dropped: &curve.dropped,
    };
    let mut out = Output::body(csv);
    out.note = Some(format!(
        "fit of -ln p vs n: slope={} intercept={} r_squared={} dropped={:?}",
        curve.slope, curve.intercept, curve.r_squared, curve.dropped
    ));
    if let Some(path) = &p.out {
        let mut text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Runtime(e.into()))?;
        text.push('\n');
        out.sidecars.push((sidecar_path(path), text));
    }
    Ok(out)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    command: &'a str,
    config: &'a Params,
    verdicts: Vec<Verdict>,
    summary: Summary,
}

#[derive(Serialize)]
struct Summary {
    total: usize,
    failed: usize,
    skipped_bounds: usize,
}

pub fn verify(p: &Params) -> Result<Output, CliError> {
    let corpus = build_corpus(p).map_err(CliError::Usage)?;
    let defaults = SuiteOptions::default();
    let opts = SuiteOptions {
        tol: p.tol.unwrap_or(defaults.tol),
        max_radius: p.r.unwrap_or(defaults.max_radius),
        samples: p.samples.unwrap_or(defaults.samples),
        seed: p.seed(),
    };
    if !(opts.tol >= 0.0) || opts.samples == 0 {
        return Err(CliError::Usage(anyhow!("tol must be >= 0 and samples >= 1")));
    }
    let verdicts = run_suite(&corpus, opts, Execution::default())?;
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    let summary = Summary {
        total: verdicts.len(),
        failed,
        skipped_bounds: verdicts.iter().filter(|v| v.bound.is_none() && v.pass).count(),
    };
    let note = format!("{} verdicts, {} failed", summary.total, failed);
    let mut body = serde_json::to_string_pretty(&VerifyReport { command: "verify", config: p, verdicts, summary })
        .map_err(|e| CliError::Runtime(e.into()))?;
    body.push('\n');
    Ok(Output { body, sidecars: Vec::new(), note: Some(note), failed: failed > 0 })
}

#[derive(Serialize)]
struct SweepRow {
    v: usize,
    reversibility_residual: Option<f64>,
    small_radius: Option<SmallRadiusWitness>,
    psi: Option<f64>,
    psi_normalized: Option<f64>,
    start: Option<usize>,
    skipped: Option<String>,
}

#[derive(Serialize)]
struct SweepCell<'a> {
    command: &'a str,
    config: Params,
    rows: Vec<SweepRow>,
}

fn sweep_row(g: &covertime_core::Graph, v: usize, r: usize) -> Result<SweepRow, Error> {
    let mut row = SweepRow {
        v,
        reversibility_residual: None,
        small_radius: None,
        psi: None,
        psi_normalized: None,
        start: None,
        skipped: None,
    };
    match green_table(g, v, r) {
        Ok(t) => row.reversibility_residual = Some(t.reversibility_residual(g)),
        Err(e @ Error::EmptyAnnulus { .. }) => {
            row.skipped = Some(e.to_string());
            return Ok(row);
        }
        Err(e) => return Err(e),
    }
    match find_small_radius(g, v, r) {
        Ok(w) => row.small_radius = Some(w),
        Err(Error::BallCoversGraph { .. }) => {}
        Err(e) => return Err(e),
    }
    match mdp::psi_normalized(g, v, r) {
        Ok(res) => {
            row.psi = Some(res.psi);
            row.psi_normalized = Some(res.psi_normalized);
            row.start = Some(res.start);
        }
        Err(e @ (Error::BallCoversGraph { .. } | Error::MaskCapExceeded { .. })) => {
            row.skipped = Some(e.to_string())
        }
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Writes `text` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| anyhow!("{} has no file name", path.display()))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = dir.join(tmp_name);
    std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

fn cell_file_name(graph: &str, r: usize) -> String {
    let safe: String =
        graph.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    format!("{safe}_r{r}.json")
}

pub fn sweep(p: &Params) -> Result<Output, CliError> {
    let dir = need(&p.out, "out")?;
    let corpus = build_corpus(p).map_err(CliError::Usage)?;
    let radii = p.radii.clone().unwrap_or_else(|| vec![0, 1, 2]);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CliError::Runtime)?;
    let cells: Vec<(usize, usize)> =
        (0..corpus.len()).flat_map(|i| radii.iter().map(move |&r| (i, r))).collect();
    let written = Execution::default().map_slice(&cells, |&(i, r)| -> Result<String, CliError> {
        let c = &corpus[i];
        let rows = (0..c.graph.n())
            .map(|v| sweep_row(&c.graph, v, r))
            .collect::<Result<Vec<_>, _>>()?;
        let config = Params {
            graph: Some(c.name.clone()),
            r: Some(r),
            seed: p.seed,
            graphs: None,
            corpus: None,
            radii: None,
            out: None,
            ..p.clone()
        };
        let mut text = serde_json::to_string_pretty(&SweepCell { command: "sweep", config, rows })
            .map_err(|e| CliError::Runtime(e.into()))?;
        text.push('\n');
        let name = cell_file_name(&c.name, r);
        write_atomic(&dir.join(&name), &text).map_err(CliError::Runtime)?;
        Ok(name)
    });
    let files = written.into_iter().collect::<Result<Vec<_>, _>>()?;
    #[derive(Serialize)]
    struct Index<'a> {
        command: &'a str,
        config: &'a Params,
        cells: Vec<String>,
    }
    let mut index = serde_json::to_string_pretty(&Index { command: "sweep", config: p, cells: files })
        .map_err(|e| CliError::Runtime(e.into()))?;
    index.push('\n');
    write_atomic(&dir.join("index.json"), &index).map_err(CliError::Runtime)?;
    Ok(Output::body(index))
}

/// Dispatches by command name.
pub fn dispatch(command: &str, p: &Params) -> Result<Output, CliError> {
    match command {
        "gen" => gen(p),
        "green" => green(p),
        "mdp" => mdp_cmd(p),
        "tail" => tail(p),
        "rate" => rate(p),
        "verify" => verify(p),
        "sweep" => sweep(p),
        other => Err(CliError::Usage(anyhow!("unknown command {other:?}"))),
    }
}

/// Where the main body goes: stdout, or `--out` for single-file commands.
pub fn body_target(command: &str, p: &Params) -> Option<PathBuf> {
    if command == "sweep" {
        None
    } else {
        p.out.clone()
    }
}
