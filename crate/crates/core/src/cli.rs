//! Experiment runner behind the `sepval` binary.
//!
//! Each subcommand reads optional parameters from a TOML file (`--config`)
//! and from flags; flags win. Every CSV is written next to a JSON sidecar
//! carrying the resolved parameters, so any file can be regenerated.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::blockgraph::{BlockStructure, InterconnectionGraph};
use crate::error::Error;
use crate::format::{csv_line, fmt17};
use crate::lqr_models::{column_decay, exp_fit, heat_model, random_lqr, random_lqr_decay, QuadraticValue};
use crate::riccati::SolverOptions;
use crate::sampling;
use crate::sdre::{cost_error_table, frozen_decay_study, CostScale, RefreshPolicy, SdreConfig};
use crate::valuefn::{assemble, export_term_dataset, sensitivity_profile, Sampler};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(#[source] Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 configuration, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn setup<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn solve<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::Io(source) => CliError::Io {
            path: PathBuf::new(),
            source,
        },
        other => CliError::Solver(other),
    })
}

#[derive(Parser, Debug)]
#[command(name = "sepval", version, about = "Separable value-function experiments")]
pub struct Cli {
    /// TOML parameter file; keys are the long flag names
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Riccati relative residual tolerance [default: 1e-10]
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Doubling / sign iteration cap [default: 200]
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Also write a gnuplot script `plot.gp`
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Distances and neighborhoods of an interconnection graph
    GraphDemo(GraphDemoArgs),
    /// Column decay of the heat-equation CARE solution
    Heat(HeatArgs),
    /// Decay fits of random banded DARE solutions per bandwidth
    RandomLqr(RandomLqrArgs),
    /// A1 residuals and the separable approximation error bound
    A1Check(A1Args),
    /// Finite-difference sensitivities grouped by graph distance
    Sensitivity(SensitivityArgs),
    /// Column decay of the Allen-Cahn SDRE solution per viscosity
    AllenCahnDecay(AcDecayArgs),
    /// Closed-loop cost error of banded SDRE feedback
    AllenCahnCost(AcCostArgs),
    /// Training rows for one separable term
    ExportDataset(ExportArgs),
}

impl Experiment {
    fn id(&self) -> &'static str {
        match self {
            Experiment::GraphDemo(_) => "graph-demo",
            Experiment::Heat(_) => "heat",
            Experiment::RandomLqr(_) => "random-lqr",
            Experiment::A1Check(_) => "a1-check",
            Experiment::Sensitivity(_) => "sensitivity",
            Experiment::AllenCahnDecay(_) => "allen-cahn-decay",
            Experiment::AllenCahnCost(_) => "allen-cahn-cost",
            Experiment::ExportDataset(_) => "export-dataset",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum Topology {
    Path,
    Cycle,
    Star,
    Grid,
    Edges,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    /// Semi-discrete heat equation (continuous time)
    Heat,
    /// Random banded system (discrete time)
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum PointSet {
    /// Low-discrepancy lattice plus block-axis points
    Lattice,
    /// Seeded i.i.d. uniform points
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum DatasetSampler {
    Grid,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum ScaleArg {
    Unweighted,
    Weighted,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct GraphDemoArgs {
    /// Node count [default: 5]
    #[arg(long)]
    s: Option<usize>,
    /// Graph shape [default: path]
    #[arg(long, value_enum)]
    topology: Option<Topology>,
    /// Rows of the grid topology; s must be a multiple
    #[arg(long)]
    rows: Option<usize>,
    /// Edge-list file, one 1-based `i j` pair per line (topology edges)
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Radii to list [default: 0 through the diameter]
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<usize>>,
    /// Measure distances along reversed edges [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    transpose: Option<bool>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct HeatArgs {
    /// Grid points [default: 10]
    #[arg(long)]
    s: Option<usize>,
    /// Diffusion coefficient [default: 1]
    #[arg(long)]
    c: Option<f64>,
    /// Grid spacing [default: 1]
    #[arg(long)]
    dx: Option<f64>,
    /// 1-based column of P to report [default: 1]
    #[arg(long)]
    column: Option<usize>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RandomLqrArgs {
    /// State dimension [default: 100]
    #[arg(long)]
    s: Option<usize>,
    /// Generator seed [default: 7]
    #[arg(long)]
    seed: Option<u64>,
    /// Bandwidths of A [default: 1,2,4,8]
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<usize>>,
}

macro_rules! model_args {
    ($name:ident, $s_default:literal { $($extra:tt)* }) => {
        #[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        struct $name {
            /// Value function source [default: heat]
            #[arg(long, value_enum)]
            model: Option<ModelKind>,
            #[arg(long, help = concat!("Number of blocks [default: ", $s_default, "]"))]
            s: Option<usize>,
            /// Heat diffusion coefficient [default: 1]
            #[arg(long)]
            c: Option<f64>,
            /// Heat grid spacing [default: 1]
            #[arg(long)]
            dx: Option<f64>,
            /// Random model seed [default: 7]
            #[arg(long)]
            seed: Option<u64>,
            /// Random model bandwidth [default: 1]
            #[arg(long)]
            band: Option<usize>,
            /// Half-width of the box [-a, a]^n [default: 1]
            #[arg(long)]
            a: Option<f64>,
            $($extra)*
        }
    };
}

model_args!(A1Args, "5" {
    /// Radii l [default: 0 through the diameter]
    #[arg(long = "l", value_delimiter = ',')]
    #[serde(rename = "l")]
    radii: Option<Vec<usize>>,
    /// Sample set [default: lattice]
    #[arg(long, value_enum)]
    samples: Option<PointSet>,
    /// Number of lattice or uniform points [default: 200]
    #[arg(long)]
    count: Option<usize>,
    /// Seed of uniform samples [default: 0]
    #[arg(long)]
    sample_seed: Option<u64>,
});

model_args!(SensitivityArgs, "10" {
    /// Finite-difference step [default: 1e-4·max(1, |x|∞) per point]
    #[arg(long)]
    h: Option<f64>,
    /// Number of lattice points [default: 20]
    #[arg(long)]
    count: Option<usize>,
});

model_args!(ExportArgs, "5" {
    /// 1-based term index [default: 1]
    #[arg(long)]
    j: Option<usize>,
    /// Neighborhood radius [default: 1]
    #[arg(long)]
    l: Option<usize>,
    /// Input sampler [default: grid]
    #[arg(long, value_enum)]
    sampler: Option<DatasetSampler>,
    /// Requested rows [default: 100]
    #[arg(long)]
    count: Option<usize>,
    /// Seed of the uniform sampler [default: 0]
    #[arg(long)]
    sample_seed: Option<u64>,
});

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct AcDecayArgs {
    /// Grid points [default: 100]
    #[arg(long)]
    s: Option<usize>,
    /// Viscosities [default: 1e-1,1e-2,1e-3,1e-4]
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct AcCostArgs {
    /// Grid points [default: 100]
    #[arg(long)]
    s: Option<usize>,
    /// Viscosities, one table column each [default: 1e-4,1e-3]
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Feedback bandwidths, one table row each [default: 2,5,10,20]
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<usize>>,
    /// Time step [default: 1e-2]
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon T [default: 10]
    #[arg(long)]
    horizon: Option<f64>,
    /// Relative state change that triggers an SDRE re-solve [default: 0.05]
    #[arg(long)]
    tau: Option<f64>,
    /// Steps between forced re-solves [default: 25]
    #[arg(long)]
    max_steps: Option<usize>,
    /// Re-solve the SDRE at every step [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    every_step: Option<bool>,
    /// Cost functional compared [default: unweighted]
    #[arg(long, value_enum)]
    cost_scale: Option<ScaleArg>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct CommonFile {
    experiment: Option<String>,
    out: Option<PathBuf>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    plot: Option<bool>,
}

const COMMON_KEYS: [&str; 5] = ["experiment", "out", "tol", "max-iter", "plot"];

/// Parses `args` (including the program name), runs the experiment and
/// returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("sepval: {e}");
            e.exit_code()
        }
    }
}

fn read_config(path: &Path) -> CliResult<(CommonFile, toml::Table)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut common = toml::Table::new();
    for key in COMMON_KEYS {
        if let Some(v) = table.remove(key) {
            common.insert(key.to_string(), v);
        }
    }
    let common: CommonFile = toml::Value::Table(common)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((common, table))
}

/// Flags override file values key by key.
fn merge<P: Serialize + DeserializeOwned>(flags: &P, file: Option<&toml::Table>, origin: &Path) -> CliResult<P> {
    let Some(file) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("serializable")).expect("roundtrip"));
    };
    let from_file: P = toml::Value::Table(file.clone())
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", origin.display())))?;
    let mut base = serde_json::to_value(&from_file).expect("serializable");
    if let (Value::Object(base), Value::Object(over)) = (&mut base, serde_json::to_value(flags).expect("serializable"))
    {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| CliError::Config(e.to_string()))
}

struct Ctx {
    experiment: &'static str,
    out: PathBuf,
    solver: SolverOptions,
    plot: bool,
    params: Value,
    written: Vec<PathBuf>,
    plot_lines: Vec<String>,
}

impl Ctx {
    fn write_file(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }

    /// `<stem>.csv` plus `<stem>.json`.
    fn write_csv(&mut self, stem: &str, csv: &str, info: Value) -> CliResult<()> {
        self.write_file(&format!("{stem}.csv"), csv)?;
        let meta = json!({
            "experiment": self.experiment,
            "file": format!("{stem}.csv"),
            "version": env!("CARGO_PKG_VERSION"),
            "parameters": self.params,
            "solver": { "tol": self.solver.tol, "max_iter": self.solver.max_iter, "newton_max_iter": self.solver.newton_max_iter },
            "info": info,
        });
        let text = serde_json::to_string_pretty(&meta).expect("serializable") + "\n";
        self.write_file(&format!("{stem}.json"), &text)
    }

    fn plot(&mut self, line: String) {
        self.plot_lines.push(line);
    }

    fn finish(mut self) -> CliResult<Vec<PathBuf>> {
        if self.plot && !self.plot_lines.is_empty() {
            let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\n");
            for l in std::mem::take(&mut self.plot_lines) {
                script.push_str(&l);
                script.push('\n');
            }
            script.push_str("pause -1\n");
            self.write_file("plot.gp", &script)?;
        }
        Ok(self.written)
    }
}

pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let id = cli.experiment.id();
    let (common, table) = match &cli.config {
        Some(path) => {
            let (c, t) = read_config(path)?;
            (c, Some(t))
        }
        None => (CommonFile::default(), None),
    };
    if let Some(e) = &common.experiment {
        if e != id {
            return Err(CliError::Config(format!(
                "config file is for `{e}` but `{id}` was requested"
            )));
        }
    }
    let solver = SolverOptions {
        tol: cli.tol.or(common.tol).unwrap_or(SolverOptions::default().tol),
        max_iter: cli
            .max_iter
            .or(common.max_iter)
            .unwrap_or(SolverOptions::default().max_iter),
        ..SolverOptions::default()
    };
    if !(solver.tol > 0.0) || solver.max_iter == 0 {
        return Err(CliError::Config("tol must be positive and max-iter at least 1".into()));
    }
    let out = cli.out.or(common.out).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    let origin = cli.config.clone().unwrap_or_default();
    let file = table.as_ref();
    let mut ctx = Ctx {
        experiment: id,
        out,
        solver,
        plot: cli.plot || common.plot.unwrap_or(false),
        params: Value::Null,
        written: Vec::new(),
        plot_lines: Vec::new(),
    };
    match &cli.experiment {
        Experiment::GraphDemo(a) => graph_demo(&mut ctx, merge(a, file, &origin)?)?,
        Experiment::Heat(a) => heat(&mut ctx, merge(a, file, &origin)?)?,
        Experiment::RandomLqr(a) => random_lqr_exp(&mut ctx, merge(a, file, &origin)?)?,
        Experiment::A1Check(a) => a1_check(&mut ctx, merge(a, file, &origin)?)?,
        Experiment::Sensitivity(a) => sensitivity(&mut ctx, merge(a, file, &origin)?)?,
        Experiment::AllenCahnDecay(a) => allen_cahn_decay(&mut ctx, merge(a, file, &origin)?)?,
        Experiment::AllenCahnCost(a) => allen_cahn_cost(&mut ctx, merge(a, file, &origin)?)?,
        Experiment::ExportDataset(a) => export_dataset(&mut ctx, merge(a, file, &origin)?)?,
    }
    ctx.finish()
}

fn series_csv(series: &[(usize, f64)]) -> String {
    let mut out = csv_line(["index", "value"]);
    for &(i, v) in series {
        out.push_str(&csv_line([i.to_string(), fmt17(v)]));
    }
    out
}

fn sigma_tag(sigma: f64) -> String {
    format!("{sigma:e}")
}

fn graph_demo(ctx: &mut Ctx, a: GraphDemoArgs) -> CliResult<()> {
    let s = a.s.unwrap_or(5);
    let topology = a.topology.unwrap_or(Topology::Path);
    let transpose = a.transpose.unwrap_or(false);
    let graph = match topology {
        Topology::Path => setup(InterconnectionGraph::path(s))?,
        Topology::Cycle => setup(InterconnectionGraph::cycle(s))?,
        Topology::Star => setup(InterconnectionGraph::star(s))?,
        Topology::Grid => {
            let rows = a
                .rows
                .ok_or_else(|| CliError::Config("grid topology needs --rows".into()))?;
            if rows == 0 || !s.is_multiple_of(rows) {
                return Err(CliError::Config(format!("s = {s} is not a multiple of rows = {rows}")));
            }
            setup(InterconnectionGraph::grid(rows, s / rows))?
        }
        Topology::Edges => {
            let path = a
                .edges
                .as_ref()
                .ok_or_else(|| CliError::Config("edges topology needs --edges".into()))?;
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            setup(InterconnectionGraph::parse_edge_list(s, &text))?
        }
    };
    let graph = if transpose { graph.transposed() } else { graph };
    let blocks = setup(BlockStructure::scalar(s))?;
    let radii = a.radii.clone().unwrap_or_else(|| (0..=graph.diameter()).collect());
    ctx.params = json!({ "s": s, "topology": topology, "rows": a.rows, "edges": a.edges, "radii": radii, "transpose": transpose });

    let mut dist = csv_line(["i", "j", "dist"]);
    for i in 0..s {
        for j in 0..s {
            let d = graph.dist(i, j).map_or("inf".to_string(), |d| d.to_string());
            dist.push_str(&csv_line([(i + 1).to_string(), (j + 1).to_string(), d]));
        }
    }
    let info = json!({ "diameter": graph.diameter(), "strongly_connected": graph.is_strongly_connected() });
    ctx.write_csv("distances", &dist, info.clone())?;

    let mut nbs = csv_line(["j", "l", "members", "sub_dim"]);
    for j in 0..s {
        for &l in &radii {
            let nb = setup(graph.neighborhood(&blocks, j, l))?;
            let members: Vec<String> = nb.members.iter().map(|m| (m + 1).to_string()).collect();
            nbs.push_str(&csv_line([
                (j + 1).to_string(),
                l.to_string(),
                members.join(" "),
                nb.sub_dim.to_string(),
            ]));
        }
    }
    ctx.write_csv("neighborhoods", &nbs, info)?;
    ctx.plot("set xlabel 'j'; set ylabel 'sub_dim'\nplot 'neighborhoods.csv' using 1:4:2 with points palette".into());
    Ok(())
}

fn heat(ctx: &mut Ctx, a: HeatArgs) -> CliResult<()> {
    let s = a.s.unwrap_or(10);
    let c = a.c.unwrap_or(1.0);
    let dx = a.dx.unwrap_or(1.0);
    let column = a.column.unwrap_or(1);
    if column == 0 || column > s {
        return Err(CliError::Config(format!("column must be in 1..={s}")));
    }
    ctx.params = json!({ "s": s, "c": c, "dx": dx, "column": column });
    let problem = setup(heat_model(s, c, dx))?;
    let (p, report) = solve(problem.solve(&ctx.solver))?;
    let series = setup(column_decay(&p, column - 1))?;
    let fit = solve(exp_fit(&series))?;
    let info = json!({ "residual": report.residual, "iterations": report.iterations, "spectral_abscissa": report.closed_loop.value, "fit": fit });
    ctx.write_csv("decay", &series_csv(&series), info.clone())?;
    ctx.write_csv("fit", &fit_csv("column", &[(column.to_string(), fit)]), info.clone())?;
    ctx.write_file("P.txt", &p.to_text())?;
    ctx.plot(
        "set logscale y; set xlabel 'i'; set ylabel '|P[i,j]|'\nplot 'decay.csv' using 1:2 with linespoints".into(),
    );
    Ok(())
}

fn fit_csv(key: &str, rows: &[(String, crate::lqr_models::DecayFit)]) -> String {
    let mut out = csv_line([key, "A_fit", "B_fit", "residual"]);
    for (k, f) in rows {
        out.push_str(&csv_line([
            k.clone(),
            fmt17(f.a_fit),
            fmt17(f.b_fit),
            fmt17(f.residual),
        ]));
    }
    out
}

fn random_lqr_exp(ctx: &mut Ctx, a: RandomLqrArgs) -> CliResult<()> {
    let s = a.s.unwrap_or(100);
    let seed = a.seed.unwrap_or(7);
    let bands = a.bands.clone().unwrap_or_else(|| vec![1, 2, 4, 8]);
    if bands.is_empty() {
        return Err(CliError::Config("bands must be nonempty".into()));
    }
    ctx.params = json!({ "s": s, "seed": seed, "bands": bands });
    for &r in &bands {
        setup(random_lqr(s, seed, r))?;
    }
    let results = solve(random_lqr_decay(s, seed, &bands, &ctx.solver))?;
    let mut fits = Vec::new();
    let mut plot = Vec::new();
    for r in &results {
        let info = json!({ "band": r.band, "residual": r.report.residual, "iterations": r.report.iterations, "spectral_radius": r.report.closed_loop.value, "fit": r.fit });
        ctx.write_csv(&format!("decay_r{}", r.band), &series_csv(&r.series), info)?;
        fits.push((r.band.to_string(), r.fit));
        plot.push(format!(
            "'decay_r{}.csv' using 1:2 with lines title 'r = {}'",
            r.band, r.band
        ));
    }
    ctx.write_csv("fit", &fit_csv("r", &fits), json!({ "column": 1 }))?;
    ctx.plot(format!(
        "set logscale y; set xlabel 'i'; set ylabel '|P[i,1]|'\nplot {}",
        plot.join(", ")
    ));
    Ok(())
}

struct ModelSpec {
    kind: ModelKind,
    s: usize,
    c: f64,
    dx: f64,
    seed: u64,
    band: usize,
    a: f64,
}

impl ModelSpec {
    fn params(&self) -> Value {
        json!({ "model": self.kind, "s": self.s, "c": self.c, "dx": self.dx, "seed": self.seed, "band": self.band, "a": self.a })
    }

    fn build(&self, solver: &SolverOptions) -> CliResult<(QuadraticValue, InterconnectionGraph, BlockStructure)> {
        if !(self.a > 0.0) {
            return Err(CliError::Config(format!("a must be positive, got {}", self.a)));
        }
        let problem = match self.kind {
            ModelKind::Heat => setup(heat_model(self.s, self.c, self.dx))?,
            ModelKind::Random => setup(random_lqr(self.s, self.seed, self.band))?,
        };
        let v = solve(problem.value_function(solver))?;
        Ok((v, problem.graph.clone(), problem.blocks.clone()))
    }
}

macro_rules! model_spec {
    ($a:expr, $s_default:expr) => {
        ModelSpec {
            kind: $a.model.unwrap_or(ModelKind::Heat),
            s: $a.s.unwrap_or($s_default),
            c: $a.c.unwrap_or(1.0),
            dx: $a.dx.unwrap_or(1.0),
            seed: $a.seed.unwrap_or(7),
            band: $a.band.unwrap_or(1),
            a: $a.a.unwrap_or(1.0),
        }
    };
}

fn a1_check(ctx: &mut Ctx, args: A1Args) -> CliResult<()> {
    let spec = model_spec!(args, 5);
    let points = args.samples.unwrap_or(PointSet::Lattice);
    let count = args.count.unwrap_or(sampling::DEFAULT_LATTICE_POINTS);
    let sample_seed = args.sample_seed.unwrap_or(0);
    let (v, graph, blocks) = spec.build(&ctx.solver)?;
    let radii = args.radii.clone().unwrap_or_else(|| (0..=graph.diameter()).collect());
    let mut params = spec.params();
    params["l"] = json!(radii);
    params["samples"] = json!(points);
    params["count"] = json!(count);
    params["sample_seed"] = json!(sample_seed);
    ctx.params = params;
    let samples = match points {
        PointSet::Lattice => {
            let mut pts = sampling::lattice(blocks.dim(), count, spec.a);
            pts.extend(sampling::axis_points(&blocks, spec.a));
            pts
        }
        PointSet::Uniform => sampling::uniform(blocks.dim(), count, spec.a, sample_seed),
    };
    if samples.is_empty() {
        return Err(CliError::Config("sample set is empty".into()));
    }

    let mut summary = csv_line(["l", "gamma_hat", "max_error", "bound", "satisfied"]);
    let mut terms = csv_line(["l", "j", "residual"]);
    for &l in &radii {
        let approx = solve(assemble(&v, &graph, &blocks, l))?;
        let res = solve(approx.a1_residual(&samples))?;
        let report = solve(approx.theorem_bound_report(res.max, &samples))?;
        summary.push_str(&csv_line([
            l.to_string(),
            fmt17(res.max),
            fmt17(report.max_error),
            fmt17(report.bound),
            report.satisfied.to_string(),
        ]));
        for (j, r) in res.per_term.iter().enumerate() {
            terms.push_str(&csv_line([l.to_string(), (j + 1).to_string(), fmt17(*r)]));
        }
    }
    let info = json!({ "points": samples.len(), "diameter": graph.diameter() });
    ctx.write_csv("a1", &summary, info.clone())?;
    ctx.write_csv("a1_terms", &terms, info)?;
    ctx.plot("set logscale y; set xlabel 'l'\nplot 'a1.csv' using 1:2 with linespoints title 'gamma_hat', '' using 1:3 with linespoints title 'max error', '' using 1:4 with linespoints title 'bound'".into());
    Ok(())
}

fn sensitivity(ctx: &mut Ctx, args: SensitivityArgs) -> CliResult<()> {
    let spec = model_spec!(args, 10);
    let count = args.count.unwrap_or(20);
    if let Some(h) = args.h {
        if !(h > 0.0) {
            return Err(CliError::Config(format!("h must be positive, got {h}")));
        }
    }
    if count == 0 {
        return Err(CliError::Config("count must be at least 1".into()));
    }
    let (v, graph, blocks) = spec.build(&ctx.solver)?;
    let mut params = spec.params();
    params["h"] = json!(args.h);
    params["count"] = json!(count);
    ctx.params = params;
    let samples = sampling::lattice(blocks.dim(), count, spec.a);
    let profile = solve(sensitivity_profile(&v, &graph, &blocks, &samples, args.h))?;

    let mut pairs = csv_line(["i", "j", "dist", "value"]);
    for r in &profile.records {
        pairs.push_str(&csv_line([
            (r.i + 1).to_string(),
            (r.j + 1).to_string(),
            r.dist.to_string(),
            fmt17(r.value),
        ]));
    }
    let mut by_dist = csv_line(["dist", "max_delta"]);
    for (d, m) in profile.per_distance() {
        by_dist.push_str(&csv_line([d.to_string(), fmt17(m)]));
    }
    let info = json!({ "points": samples.len() });
    ctx.write_csv("sensitivity_pairs", &pairs, info.clone())?;
    ctx.write_csv("sensitivity", &by_dist, info)?;
    ctx.plot("set logscale y; set xlabel 'dist(i,j)'; set ylabel 'max |delta_ij|'\nplot 'sensitivity.csv' using 1:2 with linespoints".into());
    Ok(())
}

fn check_sigmas(sigmas: &[f64]) -> CliResult<()> {
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(CliError::Config(
            "sigmas must be a nonempty list of positive numbers".into(),
        ));
    }
    Ok(())
}

fn allen_cahn_decay(ctx: &mut Ctx, a: AcDecayArgs) -> CliResult<()> {
    let s = a.s.unwrap_or(100);
    let sigmas = a.sigmas.clone().unwrap_or_else(|| crate::sdre::DECAY_SIGMAS.to_vec());
    check_sigmas(&sigmas)?;
    setup(crate::sdre::AllenCahnModel::discretize(s, sigmas[0]))?;
    ctx.params = json!({ "s": s, "sigmas": sigmas, "y0": "sin(pi x)" });
    let study = solve(frozen_decay_study(s, &sigmas, &ctx.solver))?;
    let mut fits = Vec::new();
    let mut plot = Vec::new();
    for d in &study {
        let tag = sigma_tag(d.sigma);
        let info =
            json!({ "sigma": d.sigma, "residual": d.report.residual, "iterations": d.report.iterations, "fit": d.fit });
        ctx.write_csv(&format!("decay_sigma_{tag}"), &series_csv(&d.series), info)?;
        fits.push((tag.clone(), d.fit));
        plot.push(format!(
            "'decay_sigma_{tag}.csv' using 1:2 with lines title 'sigma = {tag}'"
        ));
    }
    ctx.write_csv("fit", &fit_csv("sigma", &fits), json!({ "column": 1 }))?;
    ctx.plot(format!(
        "set logscale y; set xlabel 'i'; set ylabel '|P(y0)[i,1]|'\nplot {}",
        plot.join(", ")
    ));
    Ok(())
}

fn allen_cahn_cost(ctx: &mut Ctx, a: AcCostArgs) -> CliResult<()> {
    let s = a.s.unwrap_or(100);
    let sigmas = a.sigmas.clone().unwrap_or_else(|| crate::sdre::TABLE_SIGMAS.to_vec());
    let bands = a.bands.clone().unwrap_or_else(|| crate::sdre::TABLE_BANDS.to_vec());
    check_sigmas(&sigmas)?;
    if bands.is_empty() {
        return Err(CliError::Config("bands must be nonempty".into()));
    }
    let refresh = if a.every_step.unwrap_or(false) {
        RefreshPolicy::EveryStep
    } else {
        RefreshPolicy::Threshold {
            tau: a.tau.unwrap_or(0.05),
            max_steps: a.max_steps.unwrap_or(25),
        }
    };
    let config = SdreConfig {
        dt: a.dt.unwrap_or(1e-2),
        horizon: a.horizon.unwrap_or(10.0),
        refresh,
        solver: ctx.solver,
        band: None,
    };
    setup(config.validate())?;
    setup(crate::sdre::AllenCahnModel::discretize(s, sigmas[0]))?;
    let scale = match a.cost_scale.unwrap_or(ScaleArg::Unweighted) {
        ScaleArg::Unweighted => CostScale::Unweighted,
        ScaleArg::Weighted => CostScale::Weighted,
    };
    ctx.params = json!({
        "s": s, "sigmas": sigmas, "bands": bands, "dt": config.dt, "horizon": config.horizon,
        "refresh": refresh, "cost_scale": scale, "y0": "sin(pi x)",
    });
    let table = solve(cost_error_table(s, &config, &bands, &sigmas, scale))?;
    let full: BTreeMap<String, f64> = sigmas
        .iter()
        .map(|s| sigma_tag(*s))
        .zip(table.full_costs.iter().copied())
        .collect();
    ctx.write_csv("cost_error", &table.to_csv(), json!({ "full_costs": full }))?;
    for (sigma, run) in sigmas.iter().zip(&table.full_runs) {
        let info = json!({
            "sigma": sigma, "total_cost": run.total_cost, "unweighted_cost": run.unweighted_cost,
            "final_norm": run.final_norm, "solves": run.solves, "band": null,
        });
        ctx.write_csv(&format!("trajectory_sigma_{}", sigma_tag(*sigma)), &run.to_csv(), info)?;
    }
    let cols: Vec<String> = (0..sigmas.len())
        .map(|c| format!("'cost_error.csv' using 1:{} with linespoints", c + 2))
        .collect();
    ctx.plot(format!(
        "set logscale y; set xlabel 'r'; set ylabel '|J_r - J|'\nplot {}",
        cols.join(", ")
    ));
    Ok(())
}

fn export_dataset(ctx: &mut Ctx, args: ExportArgs) -> CliResult<()> {
    let spec = model_spec!(args, 5);
    let j = args.j.unwrap_or(1);
    let l = args.l.unwrap_or(1);
    let count = args.count.unwrap_or(100);
    let sample_seed = args.sample_seed.unwrap_or(0);
    let sampler = match args.sampler.unwrap_or(DatasetSampler::Grid) {
        DatasetSampler::Grid => Sampler::Grid,
        DatasetSampler::Uniform => Sampler::UniformRandom { seed: sample_seed },
    };
    if j == 0 || j > spec.s {
        return Err(CliError::Config(format!("j must be in 1..={}", spec.s)));
    }
    if count == 0 {
        return Err(CliError::Config("count must be at least 1".into()));
    }
    let (v, graph, blocks) = spec.build(&ctx.solver)?;
    let nb = setup(graph.neighborhood(&blocks, j - 1, l))?;
    let mut params = spec.params();
    params["j"] = json!(j);
    params["l"] = json!(l);
    params["sampler"] = json!(sampler);
    params["count"] = json!(count);
    ctx.params = params;
    let data = solve(export_term_dataset(&v, &blocks, &nb, sampler, count, spec.a))?;
    let info: Value = serde_json::from_str(&data.metadata_json()).expect("valid JSON");
    ctx.write_csv(&format!("psi_j{j}_l{l}"), &data.to_csv(), info)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: toml::Table = "s = 20\nseed = 3\nbands = [1, 2]".parse().unwrap();
        let flags = RandomLqrArgs {
            seed: Some(9),
            ..Default::default()
        };
        let m = merge(&flags, Some(&file), Path::new("cfg.toml")).unwrap();
        assert_eq!((m.s, m.seed, m.bands), (Some(20), Some(9), Some(vec![1, 2])));
    }

    #[test]
    fn unknown_keys_rejected() {
        let file: toml::Table = "s = 20\nsede = 3".parse().unwrap();
        let err = merge(&RandomLqrArgs::default(), Some(&file), Path::new("cfg.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("sede"), "{err}");
    }

    #[test]
    fn parse_lists_and_flags() {
        let cli = Cli::try_parse_from([
            "sepval",
            "allen-cahn-cost",
            "--sigmas",
            "1e-4,1e-3",
            "--every-step",
            "--out",
            "x",
        ])
        .unwrap();
        let Experiment::AllenCahnCost(a) = cli.experiment else {
            panic!("wrong subcommand");
        };
        assert_eq!(a.sigmas, Some(vec![1e-4, 1e-3]));
        assert_eq!(a.every_step, Some(true));
        let cli = Cli::try_parse_from(["sepval", "a1-check", "--model", "heat", "--s", "5", "--l", "5"]).unwrap();
        let Experiment::A1Check(a) = cli.experiment else {
            panic!("wrong subcommand");
        };
        assert_eq!(a.radii, Some(vec![5]));
    }

    #[test]
    fn help_exits_zero_and_bad_flag_two() {
        assert_eq!(run_from_args(["sepval", "--help"]), 0);
        assert_eq!(run_from_args(["sepval", "heat", "--bogus"]), 2);
    }
}
