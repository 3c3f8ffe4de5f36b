//! Subcommand definitions and their implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use ckdr::json::{format_f64, matrix_rows, rows_matrix, Num};
use ckdr::metrics::{adjusted_rand_index, chordal_distance, cluster_columns, numerical_rank, Subspace, RANK_TOL};
use ckdr::optimizer::fit_ckdr_real;
use ckdr::predictor::{class_of, Responses};
use ckdr::selection::{cross_validate, CvReport, Grid};
use ckdr::simdata::{simulate, Setting, SimSpec};
use ckdr::simplex::detect_amalgamation;
use ckdr::viz::{render_allocation_plot, render_projection_plot, render_projection_plot_with_boundary, PlotSpec, PointValue, TernaryPoint};
use ckdr::{fit_dual, FitConfig, FittedModel, Sigma};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, ingest_csv_lenient, write_csv, BinaryMap, Dataset, IngestOptions, ResponseKind};

/// Version tag of the simulation truth document.
pub const TRUTH_VERSION: u64 = 1;

/// Entries of `P̂` below this count as zero in the sparsity fraction.
pub const SPARSITY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "ckdr", version, about = "Compositional kernel dimension reduction")]
pub struct Cli {
    /// Worker threads for the parallel inner loops; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a CDR matrix and its kernel ridge predictor.
    Fit(FitArgs),
    /// Predict responses for new compositions.
    Predict(PredictArgs),
    /// Cross-validate m, the bandwidth exponent b and epsilon over a grid.
    Cv(CvArgs),
    /// Generate a simulated data set with its ground truth.
    Simulate(SimulateArgs),
    /// Render ternary projection and variable allocation plots of an m = 3 model.
    Plot(PlotArgs),
    /// Compare a fitted model with a simulation truth file.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Rescale each row to unit sum (for count tables).
    #[arg(long)]
    pub normalize: bool,
    /// Drop features nonzero in fewer samples than this, before normalizing.
    #[arg(long, default_value_t = 0)]
    pub min_prevalence: usize,
    /// Label assignments such as `CD=1,healthy=-1`.
    #[arg(long)]
    pub binary_map: Option<String>,
}

impl InputArgs {
    fn options(&self) -> Result<IngestOptions> {
        Ok(IngestOptions {
            normalize: self.normalize,
            min_prevalence: self.min_prevalence,
            binary_map: self.binary_map.as_deref().map(BinaryMap::parse).transpose()?,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub m: usize,
    /// `auto` (median heuristic times 2^b) or a positive bandwidth.
    #[arg(long, default_value = "auto")]
    pub sigma: String,
    /// Exponent b of the median heuristic multiplier; only used with `--sigma auto`.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub sigma_b: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Max-norm distance under which columns count as one amalgamation block.
    #[arg(long, default_value_t = 1e-3)]
    pub amalgam_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Rows to predict; errors are reported when the response column is present.
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated target dimensions.
    #[arg(long, default_value = "2")]
    pub grid_m: String,
    /// Comma-separated bandwidth exponents b (σ = 2^b σ₀).
    #[arg(long, default_value = "-1,0,1", allow_hyphen_values = true)]
    pub grid_b: String,
    /// Comma-separated ridge parameters.
    #[arg(long, default_value = "0.001")]
    pub grid_eps: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// One of i, ii, iii, iv.
    #[arg(long)]
    pub setting: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    /// Fraction of entries zeroed in every sample.
    #[arg(long, default_value_t = 0.5)]
    pub trunc: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Compositions to draw; a response column colours the points.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long)]
    pub normalize: bool,
    /// Overlay the zero level set of the predictor.
    #[arg(long)]
    pub boundary: bool,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Max-norm distance to a vertex under which columns share a bubble.
    #[arg(long, default_value_t = 1e-3)]
    pub cluster_tol: f64,
    /// Writes `<prefix>projection.svg` and `<prefix>allocation.svg`.
    #[arg(long)]
    pub out_prefix: String,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Seed of the k-means column clustering.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub kmeans_restarts: usize,
}

/// Ground truth of a simulated data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthDoc {
    pub version: u64,
    pub setting: Setting,
    pub n: usize,
    pub d: usize,
    pub trunc: Num,
    pub seed: u64,
    /// Orthonormal rows spanning the central subspace.
    pub basis: Vec<Vec<Num>>,
    /// Block label of every variable.
    pub blocks: Vec<usize>,
}

impl TruthDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        ckdr::json::check_version(text, TRUTH_VERSION)?;
        serde_json::from_str(text).map_err(|e| ckdr::Error::Format(e.to_string()).into())
    }

    pub fn subspace(&self) -> Result<Subspace> {
        let basis = rows_matrix(&self.basis, self.basis.len(), self.d, "basis")?;
        Ok(Subspace::new(&basis)?)
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_model(path: &Path) -> Result<FittedModel> {
    Ok(FittedModel::from_json(&read_text(path)?)?)
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("{flag}: cannot parse `{s}`"))))
        .collect()
}

fn parse_sigma(text: &str, b: f64) -> Result<Sigma> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(Sigma::Auto { b });
    }
    text.parse().map(Sigma::Fixed).map_err(|_| CliError::Usage(format!("--sigma: expected `auto` or a number, got `{text}`")))
}

fn fit_config(m: usize, sigma: Sigma, epsilon: f64, opt: &OptimizerArgs, seed: u64) -> FitConfig {
    FitConfig {
        m,
        sigma,
        epsilon,
        restarts: opt.restarts,
        max_iters: opt.max_iters,
        seed,
        ..FitConfig::default()
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cli.command {
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Cv(a) => cmd_cv(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Plot(a) => cmd_plot(&a),
        Command::Eval(a) => cmd_eval(&a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io { path: "<stdout>".into(), message: e.to_string() })
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let data = ingest_csv(&a.input.input, &a.input.response, &a.input.options()?)?;
    let seed = resolve_seed(a.optimizer.seed);
    let config = fit_config(a.m, parse_sigma(&a.sigma, a.sigma_b)?, a.epsilon, &a.optimizer, seed);
    let fit = fit_ckdr_real(&data.x, &data.y, &config)?;
    let mut model = fit_dual(&fit.p_hat, &data.x, Responses::Real(data.y.clone()), ckdr::kernels::KernelSpec::gaussian(fit.sigma)?, fit.epsilon)?;
    model.seed = Some(seed);
    model.objective = Some(fit.objective);
    write_text(&a.out, &model.to_json()?)?;

    let blocks = detect_amalgamation(&fit.p_hat, a.amalgam_tol);
    let mut s = String::new();
    s.push_str(&format!("seed: {seed}\n"));
    s.push_str(&format!("n: {}\nd: {}\nm: {}\n", data.n(), data.d(), a.m));
    s.push_str(&format!("sigma: {}\nepsilon: {}\n", format_f64(fit.sigma), format_f64(fit.epsilon)));
    s.push_str(&format!("objective: {}\n", format_f64(fit.objective)));
    s.push_str(&format!("converged: {}\niterations: {}\nbest_restart: {}\n", fit.converged, fit.iterations, fit.restart_index));
    s.push_str(&format!("rank: {}\n", numerical_rank(&fit.p_hat, RANK_TOL)));
    s.push_str(&format!("sparsity: {:.4}\n", fit.sparsity(SPARSITY_THRESHOLD)));
    s.push_str(&format!("blocks: {}\n", blocks.len()));
    for (k, block) in blocks.blocks().iter().enumerate().filter(|(_, b)| b.len() > 1) {
        let names: Vec<&str> = block.iter().map(|&j| data.features[j].as_str()).collect();
        s.push_str(&format!("block {}: {}\n", k + 1, names.join(" ")));
    }
    emit(out, &s)
}

fn is_binary_model(model: &FittedModel) -> bool {
    matches!(model.responses(), Responses::Real(y) if y.iter().all(|&v| v == 1.0 || v == -1.0))
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = ingest_csv_lenient(&a.input.input, &a.input.response, &a.input.options()?)?;
    if data.d() != model.d() {
        return Err(ckdr::Error::DimensionMismatch { expected: model.d(), found: data.d() }.into());
    }
    let binary = is_binary_model(&model);
    let with_y = data.kind != ResponseKind::Absent;
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let mut header: Vec<String> = (1..=model.m()).map(|a| format!("z{a}")).collect();
    header.push("y_hat".into());
    if binary {
        header.push("class".into());
    }
    if with_y {
        header.push(data.response_name.clone());
        header.push("error".into());
    }
    w.write_record(&header)?;
    let mut total_error = 0.0;
    for i in 0..data.n() {
        let x = data.row(i);
        let z = model.project(&x)?;
        let y_hat = model.predict_real_at(&z)?;
        let mut rec: Vec<String> = z.iter().map(|&v| format_f64(v)).collect();
        rec.push(format_f64(y_hat));
        if binary {
            rec.push(class_of(y_hat).to_string());
        }
        if with_y {
            let err = model.out_of_sample_error(&x, data.y[i])?;
            total_error += err;
            rec.push(format_f64(data.y[i]));
            rec.push(format_f64(err));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(&a.out, e))?;

    let mut s = format!("rows: {}\n", data.n());
    if with_y {
        let mean = total_error / data.n() as f64;
        let ridge = model.epsilon() * model.regularizer_norm();
        s.push_str(&format!("mean_error: {}\nridge_term: {}\nmean_error_plus_ridge: {}\n", format_f64(mean), format_f64(ridge), format_f64(mean + ridge)));
        if let Some(t) = model.objective {
            s.push_str(&format!("model_objective: {}\n", format_f64(t)));
        }
    }
    emit(out, &s)
}

pub fn cmd_cv(a: &CvArgs, out: &mut dyn Write) -> Result<()> {
    let data = ingest_csv(&a.input.input, &a.input.response, &a.input.options()?)?;
    let grid = Grid {
        m_values: parse_list(&a.grid_m, "--grid-m")?,
        b_values: parse_list(&a.grid_b, "--grid-b")?,
        epsilon_values: parse_list(&a.grid_eps, "--grid-eps")?,
    };
    let seed = resolve_seed(a.optimizer.seed);
    let base = fit_config(grid.m_values.first().copied().unwrap_or(1), Sigma::Auto { b: 0.0 }, 1e-3, &a.optimizer, seed);
    let report: CvReport = cross_validate(&data.x, &data.y, &grid, a.folds, &base, seed)?;
    write_text(&a.out, &report.to_json()?)?;
    let best = &report.best;
    let s = format!(
        "seed: {seed}\n{}best: m={} b={} epsilon={} mean={}\n",
        report.render_table(),
        best.m,
        best.b,
        best.epsilon,
        format_f64(best.mean)
    );
    emit(out, &s)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let setting = Setting::parse(&a.setting).ok_or_else(|| CliError::Usage(format!("--setting: unknown setting `{}`", a.setting)))?;
    let seed = resolve_seed(a.seed);
    let spec = SimSpec { d: a.d, trunc_frac: a.trunc, ..SimSpec::new(setting, a.n, seed) };
    let sim = simulate(&spec)?;
    let data = Dataset {
        x: sim.x,
        y: sim.y,
        features: (1..=a.d).map(|j| format!("x{j}")).collect(),
        response_name: "y".into(),
        kind: if setting.is_binary() { ResponseKind::Binary } else { ResponseKind::Real },
    };
    write_csv(&data, &a.out)?;
    if let Some(path) = &a.truth_out {
        let truth = TruthDoc {
            version: TRUTH_VERSION,
            setting,
            n: a.n,
            d: a.d,
            trunc: Num(a.trunc),
            seed,
            basis: matrix_rows(sim.truth.basis()),
            blocks: sim.blocks.labels(),
        };
        let text = serde_json::to_string_pretty(&truth).map_err(|e| ckdr::Error::Format(e.to_string()))?;
        write_text(path, &text)?;
    }
    emit(out, &format!("seed: {seed}\nsetting: {}\nn: {}\nd: {}\n", setting.name(), a.n, a.d))
}

pub fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if model.m() != 3 {
        return Err(ckdr::Error::WrongTargetDimension { expected: 3, found: model.m() }.into());
    }
    let options = IngestOptions { normalize: a.normalize, ..IngestOptions::default() };
    let data = ingest_csv_lenient(&a.data, &a.response, &options)?;
    if data.d() != model.d() {
        return Err(ckdr::Error::DimensionMismatch { expected: model.d(), found: data.d() }.into());
    }
    let points = (0..data.n())
        .map(|i| {
            let z = model.project(&data.row(i))?;
            let value = match data.kind {
                ResponseKind::Absent => PointValue::None,
                ResponseKind::Binary => PointValue::Class(data.y[i] as i64),
                ResponseKind::Real => PointValue::Continuous(data.y[i]),
            };
            Ok(TernaryPoint::new([z[0], z[1], z[2]], value)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = PlotSpec { resolution: a.resolution, ..PlotSpec::default() };
    let projection = if a.boundary {
        render_projection_plot_with_boundary(&points, &model, &spec)?
    } else {
        render_projection_plot(&points, &spec)?
    };
    let allocation = render_allocation_plot(model.p_hat(), &spec, a.cluster_tol)?;
    write_text(Path::new(&format!("{}projection.svg", a.out_prefix)), &projection)?;
    write_text(Path::new(&format!("{}allocation.svg", a.out_prefix)), &allocation)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let truth = TruthDoc::from_json(&read_text(&a.truth)?)?;
    if truth.d != model.d() {
        return Err(ckdr::Error::DimensionMismatch { expected: truth.d, found: model.d() }.into());
    }
    let seed = resolve_seed(a.seed);
    let p = model.p_hat();
    let rho = chordal_distance(&Subspace::row_space(p.entries())?, &truth.subspace()?)?;
    let k = truth.blocks.iter().max().map_or(0, |&b| b + 1);
    let ari = if k <= p.d() && a.kmeans_restarts > 0 {
        let labels = cluster_columns(p, k, seed, a.kmeans_restarts)?;
        Some(adjusted_rand_index(&labels, &truth.blocks)?)
    } else {
        None
    };
    let mut s = format!("seed: {seed}\nrho: {}\nrank: {}\n", format_f64(rho), numerical_rank(p, RANK_TOL));
    if let Some(ari) = ari {
        s.push_str(&format!("ari: {}\n", format_f64(ari)));
    }
    emit(out, &s)
}
