use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use fishy_core::avar::{epave, inefficiency, suave_multivariate, AvarEstimate, EpaveConfig, SuaveConfig, XiKind};
use fishy_core::bundle::{BundleOp, ModelBundle, StateValue};
use fishy_core::diagnostics::{tail_fit, tv_curve};
use fishy_core::fishy::{fishy_profile, GridTable, SecondMomentLookup};
use fishy_core::models::FiniteChainModel;
use fishy_core::oracle::{ar1_fishy_exact, ar1_survival_bound, solve_finite, Ar1TheoryBound};
use fishy_core::parallel::replicate;
use fishy_core::sim::{run_coupled, sample_meetings_each, simulate, SimOptions, DEFAULT_BUDGET};
use fishy_core::umcmc::{h_kl_estimator, pilot_tuning, PilotChoice};
use fishy_core::{CoupledKernel, InitialDistribution, RngStream, TestFunction};
use serde_json::{json, Value};

use crate::config::Settings;
use crate::output::{num, Table};

/// Stream ids under the master seed.
const REPLICATES: u64 = 0;
const PILOT: u64 = 1;
const BOOTSTRAP: u64 = 2;

/// Replicates that failed, with the reason.
type Failures = Vec<(usize, String)>;

/// What a subcommand produced.
pub struct Outcome {
    pub table: Table,
    pub summary: Option<Value>,
    pub failures: Failures,
}

impl Outcome {
    fn new(table: Table) -> Self {
        Outcome {
            table,
            summary: None,
            failures: Vec::new(),
        }
    }

    /// Adds the partial-output flag to the summary.
    pub fn finish(mut self) -> Self {
        if let Some(Value::Object(m)) = &mut self.summary {
            m.insert("partial".into(), Value::Bool(!self.failures.is_empty()));
            m.insert(
                "failed_reps".into(),
                Value::Array(
                    self.failures
                        .iter()
                        .map(|(rep, msg)| json!({"rep": rep, "error": msg}))
                        .collect(),
                ),
            );
        }
        self
    }
}

fn state<S: StateValue>(v: f64, what: &str) -> Result<S> {
    S::from_f64(v).with_context(|| format!("`{what}` = {v} is not a state of this model"))
}

fn root(s: &Settings, stream: u64) -> RngStream {
    RngStream::new(s.seed, stream)
}

fn default_grid(b: &ModelBundle) -> Vec<f64> {
    match b.finite() {
        Some(m) => (0..m.n_states()).map(|i| i as f64).collect(),
        None => (-3..=3).map(f64::from).collect(),
    }
}

fn split<T, E: std::fmt::Display>(results: Vec<std::result::Result<T, E>>) -> (Vec<T>, Failures) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    (ok, failed)
}

/// Mean, variance, cost and inefficiency with bootstrap intervals, under
/// both generic and table-style names.
fn efficiency_summary(s: &Settings, values: &[f64], costs: &[f64], fishy_costs: Option<&[f64]>) -> Result<Value> {
    if values.len() < 2 {
        return Ok(json!({"n": values.len()}));
    }
    let e = inefficiency(values, costs, s.n_resamples, s.level, &root(s, BOOTSTRAP))?;
    let mut v = serde_json::to_value(&e)?;
    if let Value::Object(m) = &mut v {
        m.insert("estimate".into(), num(e.mean));
        m.insert("total_cost".into(), num(e.mean_cost));
        if let Some(fc) = fishy_costs {
            m.insert("fishy_cost".into(), num(fc.iter().sum::<f64>() / fc.len() as f64));
        }
        m.insert("variance_of_estimator".into(), num(e.variance));
    }
    Ok(v)
}

#[derive(Clone, Copy)]
struct Meetings<'a> {
    s: &'a Settings,
    lag: usize,
    reps: usize,
}

type MeetingRow = (usize, u64);

impl BundleOp for Meetings<'_> {
    type Output = Result<Vec<Result<MeetingRow>>>;

    fn run<K>(
        self,
        kernel: &K,
        init: &dyn InitialDistribution<K::State>,
        _h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        let budget = self.s.budget.unwrap_or(DEFAULT_BUDGET);
        let all = sample_meetings_each(
            kernel,
            init,
            self.lag,
            self.reps,
            budget,
            &root(self.s, REPLICATES),
            self.s.workers,
        )?;
        Ok(all
            .into_iter()
            .map(|r| r.map(|m| (m.tau, m.cost_units)).map_err(Into::into))
            .collect())
    }
}

fn meeting_samples(s: &Settings) -> Result<(Vec<(usize, usize, u64)>, Failures)> {
    let lag = s.lag.unwrap_or(1);
    let reps = s.reps.unwrap_or(1000);
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (rep, r) in s.bundle.apply(Meetings { s, lag, reps })?.into_iter().enumerate() {
        match r {
            Ok((tau, cost)) => rows.push((rep, tau, cost)),
            Err(e) => failed.push((rep, format!("{e:#}"))),
        }
    }
    Ok((rows, failed))
}

pub fn meetings(s: &Settings) -> Result<Outcome> {
    let lag = s.lag.unwrap_or(1);
    let (rows, failures) = meeting_samples(s)?;
    let mut t = Table::new(["rep", "tau", "lag", "cost"]);
    for (rep, tau, cost) in &rows {
        t.push(vec![json!(rep), json!(tau), json!(lag), json!(cost)]);
    }
    let n = rows.len().max(1) as f64;
    let summary = json!({
        "model": s.bundle.label(),
        "lag": lag,
        "n": rows.len(),
        "mean_tau": num(rows.iter().map(|r| r.1 as f64).sum::<f64>() / n),
        "max_tau": rows.iter().map(|r| r.1).max(),
        "mean_cost": num(rows.iter().map(|r| r.2 as f64).sum::<f64>() / n),
    });
    Ok(Outcome {
        table: t,
        summary: Some(summary),
        failures,
    })
}

/// Meeting times and their common lag, read from `--input` or simulated.
fn taus(s: &Settings) -> Result<(Vec<usize>, usize, Failures)> {
    match &s.input {
        Some(p) => {
            let (taus, lag) = read_meetings(p)?;
            Ok((taus, lag, Vec::new()))
        }
        None => {
            let (rows, failed) = meeting_samples(s)?;
            Ok((rows.iter().map(|r| r.1).collect(), s.lag.unwrap_or(1), failed))
        }
    }
}

pub fn read_meetings(path: &Path) -> Result<(Vec<usize>, usize)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()))
    };
    let (ti, li) = (col("tau")?, col("lag")?);
    let mut taus = Vec::new();
    let mut lag = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let parse = |j: usize| -> Result<usize> {
            rec.get(j)
                .unwrap_or("")
                .trim()
                .parse()
                .with_context(|| format!("{}:{line}: expected a non-negative integer", path.display()))
        };
        let l = parse(li)?;
        if *lag.get_or_insert(l) != l {
            bail!("{}:{line}: all rows must share one lag", path.display());
        }
        taus.push(parse(ti)?);
    }
    let lag = lag.ok_or_else(|| anyhow!("{}: no meeting times", path.display()))?;
    Ok((taus, lag))
}

pub fn tvbound(s: &Settings) -> Result<Outcome> {
    let (taus, lag, failures) = taus(s)?;
    if taus.is_empty() {
        bail!("no meeting times to summarize");
    }
    let t_max = s
        .t_max
        .unwrap_or_else(|| taus.iter().max().map_or(0, |m| m.saturating_sub(lag)));
    let mut t = Table::new(["t", "bound"]);
    for (time, b) in tv_curve(&taus, lag, t_max)? {
        t.push(vec![json!(time), num(b)]);
    }
    Ok(Outcome {
        table: t,
        summary: Some(json!({"lag": lag, "n": taus.len(), "t_max": t_max})),
        failures,
    })
}

pub fn tailfit(s: &Settings) -> Result<Outcome> {
    let (taus, lag, failures) = taus(s)?;
    let fit = tail_fit(&taus, lag, s.tmin)?;
    let mut t = Table::new(["slope", "intercept", "r2", "tmin", "tmax", "n", "lag"]);
    t.single = true;
    t.push(vec![
        num(fit.slope),
        num(fit.intercept),
        num(fit.r_squared),
        num(fit.t_min),
        num(fit.t_max),
        json!(taus.len()),
        json!(lag),
    ]);
    Ok(Outcome {
        table: t,
        summary: None,
        failures,
    })
}

#[derive(Clone, Copy)]
struct Pilot<'a>(&'a Settings);

impl BundleOp for Pilot<'_> {
    type Output = Result<PilotChoice>;

    fn run<K>(
        self,
        kernel: &K,
        init: &dyn InitialDistribution<K::State>,
        _h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        let s = self.0;
        Ok(pilot_tuning(
            kernel,
            init,
            s.pilot_reps,
            s.quantile,
            &root(s, PILOT),
            s.workers,
        )?)
    }
}

pub fn pilot(s: &Settings) -> Result<Outcome> {
    let p = s.bundle.apply(Pilot(s))?;
    let mut t = Table::new(["k", "L", "ell", "tau_quantile"]);
    t.single = true;
    t.push(vec![json!(p.k), json!(p.lag), json!(p.ell), num(p.tau_quantile)]);
    Ok(Outcome::new(t))
}

/// (k, L, ℓ): explicit values win; missing ones come from a pilot run.
fn tuning(s: &Settings) -> Result<(usize, usize, usize, Value)> {
    if let (Some(k), Some(lag), Some(ell)) = (s.k, s.lag, s.ell) {
        return Ok((k, lag, ell, json!({"k": k, "L": lag, "ell": ell, "source": "given"})));
    }
    let p = s.bundle.apply(Pilot(s))?;
    let k = s.k.unwrap_or(p.k);
    let lag = s.lag.unwrap_or(p.lag);
    let ell = s.ell.unwrap_or(5 * k);
    log::info!("pilot tuning: k = {k}, L = {lag}, ell = {ell}");
    if k > ell {
        bail!("ell ({ell}) must be at least k ({k})");
    }
    Ok((
        k,
        lag,
        ell,
        json!({
            "k": k,
            "L": lag,
            "ell": ell,
            "source": "pilot",
            "pilot": {"reps": s.pilot_reps, "tau_quantile": s.quantile, "k": p.k},
        }),
    ))
}

#[derive(Clone, Copy)]
struct Fishy<'a>(&'a Settings);

impl BundleOp for Fishy<'_> {
    type Output = Result<Vec<Vec<Value>>>;

    fn run<K>(
        self,
        kernel: &K,
        _init: &dyn InitialDistribution<K::State>,
        h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        let s = self.0;
        let grid = s
            .grid
            .clone()
            .unwrap_or_else(|| default_grid(&s.bundle))
            .into_iter()
            .map(|v| state::<K::State>(v, "grid"))
            .collect::<Result<Vec<_>>>()?;
        let y = state::<K::State>(s.y.unwrap_or(0.0), "y")?;
        let rows = fishy_profile(
            kernel,
            h,
            &grid,
            &y,
            s.reps.unwrap_or(1000),
            &root(s, REPLICATES),
            s.workers,
        )?;
        Ok(rows
            .iter()
            .map(|r| {
                vec![
                    num(r.x.to_f64()),
                    num(r.mean),
                    num(r.se),
                    num(r.second_moment),
                    num(r.mean_cost),
                ]
            })
            .collect())
    }
}

pub fn fishy(s: &Settings) -> Result<Outcome> {
    let mut t = Table::new(["x", "mean", "se", "second_moment", "mean_cost"]);
    t.rows = s.bundle.apply(Fishy(s))?;
    Ok(Outcome::new(t))
}

fn estimate_columns(prefix: &str, d: usize, square: bool) -> Vec<String> {
    match (d, square) {
        (1, _) => vec![prefix.to_string()],
        (_, false) => (0..d).map(|i| format!("{prefix}_{i}")).collect(),
        (_, true) => (0..d)
            .flat_map(|i| (0..d).map(move |j| format!("{prefix}_{i}_{j}")))
            .collect(),
    }
}

#[derive(Clone, Copy)]
struct Umcmc<'a> {
    s: &'a Settings,
    k: usize,
    lag: usize,
    ell: usize,
}

impl BundleOp for Umcmc<'_> {
    type Output = (usize, Vec<Result<(Vec<f64>, u64)>>);

    fn run<K>(
        self,
        kernel: &K,
        init: &dyn InitialDistribution<K::State>,
        h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        let s = self.s;
        let rootr = root(s, REPLICATES);
        let budget = s.budget.unwrap_or(DEFAULT_BUDGET);
        let out = replicate(s.reps.unwrap_or(1000), s.workers, |i| {
            let mut rng = rootr.child(i as u64);
            let x0 = init.sample(&mut rng);
            let y0 = init.sample(&mut rng);
            let opts = SimOptions::new(self.lag, self.ell).with_budget(budget);
            let run = run_coupled(kernel, x0, y0, opts, &mut rng)?;
            let e = h_kl_estimator(&run, h, self.k, self.ell)?;
            Ok((e.value, e.cost_units))
        });
        (h.arity(), out)
    }
}

pub fn umcmc(s: &Settings) -> Result<Outcome> {
    let (k, lag, ell, tuning) = tuning(s)?;
    let (d, results) = s.bundle.apply(Umcmc { s, k, lag, ell });
    let mut cols = vec!["rep".to_string()];
    cols.extend(estimate_columns("estimate", d, false));
    cols.push("cost".into());
    let mut t = Table::new(cols);
    let mut values = Vec::new();
    let mut costs = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok((v, c)) => {
                let mut row = vec![json!(rep)];
                row.extend(v.iter().map(|x| num(*x)));
                row.push(json!(c));
                t.push(row);
                values.push(v[0]);
                costs.push(c as f64);
            }
            Err(e) => failures.push((rep, format!("{e:#}"))),
        }
    }
    let mut summary = efficiency_summary(s, &values, &costs, None)?;
    summary["tuning"] = tuning;
    summary["model"] = json!(s.bundle.label());
    summary["d"] = json!(d);
    Ok(Outcome {
        table: t,
        summary: Some(summary),
        failures,
    })
}

#[derive(Clone, Copy)]
struct Epave<'a> {
    s: &'a Settings,
    cfg: EpaveConfig,
}

impl BundleOp for Epave<'_> {
    type Output = Result<Vec<Result<fishy_core::avar::EpaveEstimate>>>;

    fn run<K>(
        self,
        kernel: &K,
        init: &dyn InitialDistribution<K::State>,
        h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        let s = self.s;
        let y = state::<K::State>(s.y.unwrap_or(0.0), "y")?;
        let rootr = root(s, REPLICATES);
        Ok(replicate(s.reps.unwrap_or(100), s.workers, |i| {
            let rep_root = rootr.child(i as u64);
            let x0 = init.sample(&mut rep_root.child(2));
            Ok(epave(kernel, h, x0, &y, &self.cfg, &rep_root)?)
        }))
    }
}

pub fn epave_cmd(s: &Settings) -> Result<Outcome> {
    let burn_in = match s.burn_in {
        Some(b) => b,
        None => {
            let p = s.bundle.apply(Pilot(s))?;
            log::info!("burn-in from pilot: {}", p.k);
            p.k
        }
    };
    let cfg = EpaveConfig {
        t_steps: s.t_steps.unwrap_or(10_000),
        burn_in,
        thin: s.thin.unwrap_or(1),
    };
    let results = s.bundle.apply(Epave { s, cfg })?;
    let mut t = Table::new(["rep", "estimate", "cost_total", "cost_chain", "cost_fishy", "n_fishy"]);
    let (mut values, mut costs, mut fishy_costs) = (Vec::new(), Vec::new(), Vec::new());
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => {
                let total = e.cost_chain + e.cost_fishy;
                t.push(vec![
                    json!(rep),
                    num(e.value),
                    json!(total),
                    json!(e.cost_chain),
                    json!(e.cost_fishy),
                    json!(e.n_fishy),
                ]);
                values.push(e.value);
                costs.push(total as f64);
                fishy_costs.push(e.cost_fishy as f64);
            }
            Err(e) => failures.push((rep, format!("{e:#}"))),
        }
    }
    let mut summary = efficiency_summary(s, &values, &costs, Some(&fishy_costs))?;
    summary["model"] = json!(s.bundle.label());
    summary["config"] = json!({
        "t_steps": cfg.t_steps,
        "burn_in": cfg.burn_in,
        "D": cfg.thin,
        "y": s.y.unwrap_or(0.0),
    });
    Ok(Outcome {
        table: t,
        summary: Some(summary),
        failures,
    })
}

/// Second moments of G_y read from a `fishy` CSV, looked up at the
/// nearest evaluation point.
fn read_table(path: &Path) -> Result<GridTable> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()))
    };
    let (xi, mi) = (col("x")?, col("second_moment")?);
    let mut xs = Vec::new();
    let mut ms = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j)
                .unwrap_or("")
                .trim()
                .parse()
                .with_context(|| format!("{}:{}: expected a number", path.display(), i + 2))
        };
        xs.push(parse(xi)?);
        ms.push(parse(mi)?);
    }
    Ok(GridTable::new(xs, ms)?)
}

#[derive(Clone, Copy)]
struct Suave<'a> {
    s: &'a Settings,
    cfg: SuaveConfig,
    table: Option<&'a GridTable>,
}

impl BundleOp for Suave<'_> {
    type Output = Result<Vec<Result<AvarEstimate>>>;

    fn run<K>(
        self,
        kernel: &K,
        init: &dyn InitialDistribution<K::State>,
        h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        let s = self.s;
        let y = state::<K::State>(s.y.unwrap_or(0.0), "y")?;
        let lookup = self.table.map(|g| move |z: &K::State| g.second_moment(&z.to_f64()));
        let table = lookup.as_ref().map(|f| f as &dyn SecondMomentLookup<K::State>);
        let rootr = root(s, REPLICATES);
        Ok(replicate(s.reps.unwrap_or(100), s.workers, |i| {
            Ok(suave_multivariate(
                kernel,
                init,
                h,
                &y,
                &self.cfg,
                table,
                &rootr.child(i as u64),
            )?)
        }))
    }
}

pub fn suave_cmd(s: &Settings) -> Result<Outcome> {
    let (k, lag, ell, tuning) = tuning(s)?;
    let table = match &s.table {
        Some(p) => Some(read_table(p)?),
        None if s.xi == XiKind::Optimal => {
            bail!("optimal selection probabilities need --table, a CSV written by `fishy`")
        }
        None => None,
    };
    let cfg = SuaveConfig {
        k,
        ell,
        lag,
        r: s.r.unwrap_or(50),
        xi: s.xi,
    };
    let results = s.bundle.apply(Suave {
        s,
        cfg,
        table: table.as_ref(),
    })?;
    let d = s.bundle.apply(Arity);
    let mut cols = vec!["rep".to_string()];
    cols.extend(estimate_columns("estimate", d, true));
    cols.extend(["cost_total", "cost_fishy", "cost_signed_measures"].map(String::from));
    let mut t = Table::new(cols);
    let (mut values, mut costs, mut fishy_costs) = (Vec::new(), Vec::new(), Vec::new());
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => {
                let mut row = vec![json!(rep)];
                row.extend(e.value.iter().map(|v| num(*v)));
                row.extend([json!(e.cost_total), json!(e.cost_fishy), json!(e.cost_signed_measures)]);
                t.push(row);
                values.push(e.value[0]);
                costs.push(e.cost_total as f64);
                fishy_costs.push(e.cost_fishy as f64);
            }
            Err(e) => failures.push((rep, format!("{e:#}"))),
        }
    }
    let mut summary = efficiency_summary(s, &values, &costs, Some(&fishy_costs))?;
    summary["model"] = json!(s.bundle.label());
    summary["tuning"] = tuning;
    summary["config"] = json!({"R": cfg.r, "xi": cfg.xi.to_string(), "y": s.y.unwrap_or(0.0)});
    summary["d"] = json!(d);
    Ok(Outcome {
        table: t,
        summary: Some(summary),
        failures,
    })
}

struct Arity;

impl BundleOp for Arity {
    type Output = usize;

    fn run<K>(self, _k: &K, _i: &dyn InitialDistribution<K::State>, h: &dyn TestFunction<K::State>) -> usize
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        h.arity()
    }
}

pub fn theory_check(s: &Settings) -> Result<Outcome> {
    let ModelBundle::Ar1(b) = &s.bundle else {
        bail!("theory-check applies to the ar1 model only, not `{}`", s.model_name);
    };
    let m = &b.kernel.model;
    let bound = Ar1TheoryBound::new(m.phi(), m.sigma())?;
    let (x0, y0) = (s.x0.unwrap_or(2.0), s.y0.unwrap_or(-2.0));
    let budget = s.budget.unwrap_or(DEFAULT_BUDGET);
    let rootr = root(s, REPLICATES);
    let results = replicate(s.reps.unwrap_or(10_000), s.workers, |i| {
        let opts = SimOptions::new(0, 0).with_budget(budget);
        simulate(&b.kernel, x0, y0, opts, &mut rootr.child(i as u64), &mut ()).map(|r| r.tau)
    });
    let (taus, failures) = split(results);
    if taus.is_empty() {
        bail!("every replicate failed");
    }
    let max_tau = *taus.iter().max().unwrap_or(&0);
    let t_max = s.t_max.unwrap_or(max_tau);
    let mut sorted = taus.clone();
    sorted.sort_unstable();
    let n = taus.len() as f64;
    let mut t = Table::new(["n", "bound", "empirical"]);
    let mut dominated = true;
    for step in 0..=t_max {
        let above = sorted.len() - sorted.partition_point(|&v| v <= step);
        let emp = above as f64 / n;
        let bnd = ar1_survival_bound(&bound, x0, y0, step);
        dominated &= emp <= bnd;
        t.push(vec![json!(step), num(bnd), num(emp)]);
    }
    let summary = json!({
        "constants": bound,
        "c_tilde": num(bound.c_tilde(x0, y0)),
        "constants_in_range": bound.constants_in_range(),
        "bound_dominates": dominated,
        "x0": x0,
        "y0": y0,
        "n": taus.len(),
        "max_tau": max_tau,
    });
    Ok(Outcome {
        table: t,
        summary: Some(summary),
        failures,
    })
}

pub fn oracle(s: &Settings) -> Result<Outcome> {
    match &s.bundle {
        ModelBundle::Finite(b) => {
            let m = &b.kernel.model;
            let n = m.n_states();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
            let model = FiniteChainModel::new(rows, b.h.clone())?;
            let sol = solve_finite(&model)?;
            let d = sol.d;
            let mut cols = vec!["state".to_string(), "pi".to_string()];
            cols.extend(estimate_columns("h", d, false));
            cols.extend(estimate_columns("g", d, false));
            let mut t = Table::new(cols);
            for i in 0..n {
                let mut row = vec![json!(i), num(sol.pi[i])];
                row.extend(model.h().row(i).iter().map(|v| num(*v)));
                row.extend((0..d).map(|c| num(sol.g(i, c))));
                t.push(row);
            }
            let v: Vec<Vec<Value>> = (0..d)
                .map(|i| (0..d).map(|j| num(sol.v_entry(i, j))).collect())
                .collect();
            let summary = json!({
                "n": n,
                "d": d,
                "pi_h": sol.pi_h.iter().map(|v| num(*v)).collect::<Vec<_>>(),
                "asymptotic_variance": v,
            });
            Ok(Outcome {
                table: t,
                summary: Some(summary),
                failures: Vec::new(),
            })
        }
        ModelBundle::Ar1(b) => {
            if b.h.arity() != 1 || [-1.5, 2.0].iter().any(|x| b.h.eval_scalar(x) != *x) {
                bail!("the ar1 closed forms hold for the identity test function only");
            }
            let m = &b.kernel.model;
            let (phi, sigma) = (m.phi(), m.sigma());
            let y = s.y.unwrap_or(0.0);
            let mut t = Table::new(["x", "g"]);
            for x in s.grid.clone().unwrap_or_else(|| default_grid(&s.bundle)) {
                t.push(vec![num(x), num(ar1_fishy_exact(phi, x, y))]);
            }
            let summary = json!({
                "phi": phi,
                "sigma": sigma,
                "y": y,
                "asymptotic_variance": num(sigma * sigma / (1.0 - phi).powi(2)),
                "fishy_slope": num(1.0 / (1.0 - phi)),
                "stationary_variance": num(m.stationary_variance()),
            });
            Ok(Outcome {
                table: t,
                summary: Some(summary),
                failures: Vec::new(),
            })
        }
        _ => bail!("no exact oracle for model `{}`; use ar1 or finite", s.model_name),
    }
}
