use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fishy_core::avar::XiKind;
use fishy_core::bundle::{build_bundle, CouplingSpec, ModelBundle, ModelSpec};
use serde::Deserialize;

pub const SEED_ENV: &str = "FISHY_SEED";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Options shared by every subcommand. Each one may also be given in the
/// config file; a flag wins over the file.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// TOML experiment configuration
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// ar1, cauchy-gibbs, cauchy-mrth or finite
    #[arg(long, required_unless_present = "config")]
    pub model: Option<String>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Transition matrix CSV for the finite model
    #[arg(long, value_name = "FILE")]
    pub matrix_file: Option<PathBuf>,
    /// identity, square, powers:p1,p2 (real states); table, column:j (finite)
    #[arg(long)]
    pub test_function: Option<String>,
    #[arg(long)]
    pub init_mean: Option<f64>,
    #[arg(long)]
    pub init_sd: Option<f64>,

    /// Coupling kind, e.g. reflection-maximal, maximal-rejection, crn,
    /// independent, switch-to-crn-composite
    #[arg(long)]
    pub coupling: Option<String>,
    /// Switching distance of switch-to-crn-composite
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Master seed; falls back to the config file, then $FISHY_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of independent replicates
    #[arg(long)]
    pub reps: Option<usize>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    pub workers: Option<usize>,
    /// Transition budget per coupled run
    #[arg(long)]
    pub budget: Option<u64>,

    #[arg(long)]
    pub k: Option<usize>,
    /// Lag between the coupled chains
    #[arg(long = "L", value_name = "L")]
    pub lag: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    /// Fishy estimates per signed measure
    #[arg(long = "R", value_name = "R")]
    pub r: Option<usize>,
    /// Anchor state of the fishy function
    #[arg(long)]
    pub y: Option<f64>,
    /// Selection probabilities: uniform, proportional or optimal
    #[arg(long)]
    pub xi: Option<String>,
    /// Fishy estimate every D-th step (epave)
    #[arg(long = "D", visible_alias = "thin", value_name = "D")]
    pub thin: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub t_steps: Option<usize>,
    /// Comma-separated evaluation points
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    /// Second-moment table: a CSV written by `fishy`
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    /// Quantile of τ used by the pilot
    #[arg(long)]
    pub quantile: Option<f64>,
    /// Replicates of the pilot meeting run
    #[arg(long)]
    pub pilot_reps: Option<usize>,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Starting states of theory-check
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    /// Bootstrap confidence level
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub n_resamples: Option<usize>,
    /// Meetings CSV to read instead of simulating
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// Per-replicate table destination (default stdout)
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// JSON summary destination
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    reps: Option<usize>,
    workers: Option<usize>,
    budget: Option<u64>,
    model: ModelSpec,
    coupling: CouplingSpec,
    estimator: EstimatorFile,
    output: OutputFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EstimatorFile {
    k: Option<usize>,
    #[serde(rename = "L")]
    lag: Option<usize>,
    ell: Option<usize>,
    #[serde(rename = "R")]
    r: Option<usize>,
    y: Option<f64>,
    xi: Option<String>,
    #[serde(rename = "D", alias = "thin")]
    thin: Option<usize>,
    burn_in: Option<usize>,
    t_steps: Option<usize>,
    grid: Option<Vec<f64>>,
    table: Option<PathBuf>,
    quantile: Option<f64>,
    pilot_reps: Option<usize>,
    tmin: Option<f64>,
    t_max: Option<usize>,
    x0: Option<f64>,
    y0: Option<f64>,
    level: Option<f64>,
    n_resamples: Option<usize>,
    input: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputFile {
    path: Option<PathBuf>,
    summary: Option<PathBuf>,
    format: Option<Format>,
}

/// A failure to load or validate a configuration; exits with status 2.
#[derive(Debug)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{l}: {}", p.display(), self.message),
            (Some(p), None) => write!(f, "{}: {}", p.display(), self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Merged settings of one invocation.
pub struct Settings {
    pub bundle: ModelBundle,
    pub model_name: String,
    pub seed: u64,
    pub reps: Option<usize>,
    pub workers: usize,
    pub budget: Option<u64>,
    pub k: Option<usize>,
    pub lag: Option<usize>,
    pub ell: Option<usize>,
    pub r: Option<usize>,
    pub y: Option<f64>,
    pub xi: XiKind,
    pub thin: Option<usize>,
    pub burn_in: Option<usize>,
    pub t_steps: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub table: Option<PathBuf>,
    pub quantile: f64,
    pub pilot_reps: usize,
    pub tmin: Option<f64>,
    pub t_max: Option<usize>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub level: f64,
    pub n_resamples: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub format: Format,
}

/// Source text of the config file, used to point errors at a line.
struct Source<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Source<'_> {
    /// Line of the first `key = ...` assignment, optionally inside `[table]`.
    fn line_of(&self, table: Option<&str>, key: &str) -> Option<usize> {
        let mut current: Option<String> = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.trim().to_string());
                continue;
            }
            let Some((lhs, _)) = line.split_once('=') else {
                continue;
            };
            let lhs = lhs.trim().trim_matches('"');
            let in_table = match table {
                Some(t) => current.as_deref() == Some(t),
                None => true,
            };
            if in_table && lhs == key {
                return Some(i + 1);
            }
        }
        None
    }

    fn error(&self, table: Option<&str>, key: &str, message: String) -> ConfigError {
        ConfigError {
            file: Some(self.path.to_path_buf()),
            line: self.line_of(table, key),
            message,
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// The config key a parameter name from the core library refers to.
fn key_of(name: &str) -> (Option<&'static str>, &str) {
    match name {
        "model.name" => (Some("model"), "name"),
        "phi" | "sigma" | "init_sd" | "matrix" | "h_values" | "test_function" | "observations" | "prior_variance"
        | "proposal_sd" => (Some("model"), name),
        "coupling.threshold" => (Some("coupling"), "threshold"),
        "kind" => (Some("coupling"), "kind"),
        other => (Some("estimator"), other),
    }
}

fn resolve(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

pub fn load(flags: &Flags) -> Result<Settings, ConfigError> {
    let plain = |message: String| ConfigError {
        file: None,
        line: None,
        message,
    };
    let text = match &flags.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| ConfigError {
            file: Some(p.clone()),
            line: None,
            message: format!("cannot read: {e}"),
        })?),
        None => None,
    };
    let source = flags
        .config
        .as_deref()
        .zip(text.as_deref())
        .map(|(path, text)| Source { path, text });
    let file: FileConfig = match &source {
        Some(src) => toml::from_str(src.text).map_err(|e| ConfigError {
            file: Some(src.path.to_path_buf()),
            line: e.span().map(|s| line_of_offset(src.text, s.start)),
            message: e.message().to_string(),
        })?,
        None => FileConfig::default(),
    };
    let base_dir = flags.config.as_deref().and_then(Path::parent).map(Path::to_path_buf);
    let base = base_dir.as_deref();
    let fail = |table: Option<&str>, key: &str, message: String| match &source {
        Some(src) => src.error(table, key, message),
        None => plain(message),
    };

    let mut model = file.model.clone();
    if let Some(m) = &flags.model {
        model.name = m.clone();
    }
    if flags.phi.is_some() {
        model.phi = flags.phi;
    }
    if flags.sigma.is_some() {
        model.sigma = flags.sigma;
    }
    if flags.init_mean.is_some() {
        model.init_mean = flags.init_mean;
    }
    if flags.init_sd.is_some() {
        model.init_sd = flags.init_sd;
    }
    if let Some(tf) = &flags.test_function {
        model.test_function = Some(tf.clone());
    }
    let mut model_base = base;
    if let Some(mf) = &flags.matrix_file {
        model.matrix_file = Some(mf.to_string_lossy().into_owned());
        model.matrix = None;
        model_base = None;
    }
    let mut coupling = file.coupling.clone();
    if let Some(c) = &flags.coupling {
        coupling.kind = Some(c.clone());
    }
    if flags.threshold.is_some() {
        coupling.threshold = flags.threshold;
    }
    let bundle = build_bundle(&model, &coupling, model_base).map_err(|e| match &e {
        fishy_core::Error::InvalidParameter { name, .. } => {
            let (table, key) = key_of(name);
            fail(table, key, e.to_string())
        }
        fishy_core::Error::IncompatibleCoupling { .. } => fail(Some("coupling"), "kind", e.to_string()),
        fishy_core::Error::Parse(_) if model.matrix_file.is_some() => fail(Some("model"), "matrix_file", e.to_string()),
        _ => fail(Some("model"), "name", e.to_string()),
    })?;

    let est = file.estimator;
    let seed = match flags.seed.or(file.seed) {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| plain(format!("${SEED_ENV} must be an unsigned integer, got `{v}`")))?,
            Err(_) => 0,
        },
    };
    let xi_name = flags.xi.clone().or(est.xi);
    let xi = match &xi_name {
        Some(s) => s
            .parse::<XiKind>()
            .map_err(|e| fail(Some("estimator"), "xi", e.to_string()))?,
        None => XiKind::Uniform,
    };
    let level = flags.level.or(est.level).unwrap_or(0.95);
    if !(level > 0.0 && level < 1.0) {
        return Err(fail(
            Some("estimator"),
            "level",
            format!("level must lie in (0, 1), got {level}"),
        ));
    }
    let quantile = flags.quantile.or(est.quantile).unwrap_or(0.99);
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(fail(
            Some("estimator"),
            "quantile",
            format!("quantile must lie in (0, 1], got {quantile}"),
        ));
    }
    let positive = |v: Option<usize>, key: &str, name: &str| -> Result<Option<usize>, ConfigError> {
        match v {
            Some(0) => Err(fail(Some("estimator"), key, format!("{name} must be at least 1"))),
            v => Ok(v),
        }
    };
    let lag = positive(flags.lag.or(est.lag), "L", "L")?;
    let r = positive(flags.r.or(est.r), "R", "R")?;
    let thin = positive(flags.thin.or(est.thin), "D", "D")?;
    let k = flags.k.or(est.k);
    let ell = flags.ell.or(est.ell);
    if let (Some(k), Some(ell)) = (k, ell) {
        if k > ell {
            return Err(fail(
                Some("estimator"),
                "ell",
                format!("ell ({ell}) must be at least k ({k})"),
            ));
        }
    }
    let reps = flags.reps.or(file.reps);
    if reps == Some(0) {
        return Err(fail(None, "reps", "reps must be at least 1".into()));
    }
    let workers = flags
        .workers
        .or(file.workers)
        .unwrap_or_else(fishy_core::parallel::default_workers);
    if workers == 0 {
        return Err(fail(None, "workers", "workers must be at least 1".into()));
    }
    let budget = flags.budget.or(file.budget);
    if budget == Some(0) {
        return Err(fail(None, "budget", "budget must be at least 1".into()));
    }
    if let (Some(y), Some(fm)) = (flags.y.or(est.y), bundle.finite()) {
        if !(y >= 0.0 && y.fract() == 0.0 && (y as usize) < fm.n_states()) {
            return Err(fail(
                Some("estimator"),
                "y",
                format!("y must be a state index below {}, got {y}", fm.n_states()),
            ));
        }
    }

    Ok(Settings {
        model_name: model.name.clone(),
        bundle,
        seed,
        reps,
        workers,
        budget,
        k,
        lag,
        ell,
        r,
        y: flags.y.or(est.y),
        xi,
        thin,
        burn_in: flags.burn_in.or(est.burn_in),
        t_steps: flags.t_steps.or(est.t_steps),
        grid: flags.grid.clone().or(est.grid),
        table: flags.table.clone().or_else(|| est.table.map(|p| resolve(base, p))),
        quantile,
        pilot_reps: flags.pilot_reps.or(est.pilot_reps).unwrap_or(1000),
        tmin: flags.tmin.or(est.tmin),
        t_max: flags.t_max.or(est.t_max),
        x0: flags.x0.or(est.x0),
        y0: flags.y0.or(est.y0),
        level,
        n_resamples: flags.n_resamples.or(est.n_resamples).unwrap_or(2000),
        input: flags.input.clone().or_else(|| est.input.map(|p| resolve(base, p))),
        output: flags
            .output
            .clone()
            .or_else(|| file.output.path.map(|p| resolve(base, p))),
        summary: flags
            .summary
            .clone()
            .or_else(|| file.output.summary.map(|p| resolve(base, p))),
        format: flags.format.or(file.output.format).unwrap_or_default(),
    })
}
