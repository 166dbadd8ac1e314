//! Monte Carlo simulation of paths, hitting and exit functionals, occupation
//! measures, local time and quadratic variation.

mod kernel;
pub mod rng;

use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify_all, ClassifyOptions, Tri};
use crate::config::SkewConfig;
use crate::error::SimError;
use crate::scalar::Scalar;
use crate::scale::ScaleFunction;

pub use kernel::{exact_skew_step, MAX_HALVINGS, WINDOW};
use kernel::Kernel;
pub use rng::{path_rng, Axis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler steps for `h(X)` with piecewise-constant volatility, mapped back through `h⁻¹`.
    EulerTransformed,
    /// Exact single-interface transitions, with step halving near clustered interfaces.
    ExactSkew,
}

impl FromStr for Scheme {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "euler_transformed" | "euler" => Ok(Self::EulerTransformed),
            "exact_skew" | "exact" => Ok(Self::ExactSkew),
            _ => Err(SimError::Plan(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    FullPath,
    EndpointsOnly,
    Functionals,
}

impl FromStr for Record {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "full_path" => Ok(Self::FullPath),
            "endpoints_only" => Ok(Self::EndpointsOnly),
            "functionals" => Ok(Self::Functionals),
            _ => Err(SimError::Plan(format!("unknown record mode `{s}`"))),
        }
    }
}

/// Equal-width bins on `[lo, hi)`; mass outside is kept as underflow and overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Bins {
    fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    /// Slot `0` is underflow, `n+1` overflow.
    fn slot(&self, x: f64) -> usize {
        if x < self.lo {
            0
        } else if x >= self.hi {
            self.n + 1
        } else {
            1 + (((x - self.lo) / self.width()) as usize).min(self.n - 1)
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.lo + i as f64 * self.width()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub scheme: Scheme,
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Paths reaching `|x| ≥ x_max` are censored.
    pub x_max: f64,
    pub eps_cluster: Option<f64>,
    pub record: Record,
    /// Keep every `stride`-th step of full paths.
    pub stride: usize,
    pub threads: Option<usize>,
    pub allow_explosive: bool,
    /// `(a, ε)` pairs for local-time functionals.
    pub local_time: Vec<(f64, f64)>,
    pub occupation: Option<Bins>,
    /// Occupation time before `burn_in` is discarded.
    pub burn_in: f64,
}

impl SimPlan {
    pub fn new(scheme: Scheme, x0: f64, horizon: f64, dt: f64, n_paths: u64, seed: u64) -> Self {
        Self {
            scheme,
            x0,
            horizon,
            dt,
            n_paths,
            seed,
            x_max: 1e3,
            eps_cluster: None,
            record: Record::EndpointsOnly,
            stride: 1,
            threads: None,
            allow_explosive: false,
            local_time: Vec::new(),
            occupation: None,
            burn_in: 0.0,
        }
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Plan(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be finite and ≥ 0, got {}", self.horizon));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be ≥ 1".into());
        }
        if !(self.x0.abs() < self.x_max) {
            return bad(format!("x0 = {} outside (−x_max, x_max)", self.x0));
        }
        if self.stride == 0 {
            return bad("stride must be ≥ 1".into());
        }
        if self.local_time.iter().any(|&(_, e)| !(e > 0.0)) {
            return bad("local-time ε must be positive".into());
        }
        if let Some(b) = self.occupation {
            if !(b.n > 0 && b.hi > b.lo) {
                return bad("occupation bins need n > 0 and hi > lo".into());
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be ≥ 1".into());
        }
        Ok(())
    }

    fn steps(&self) -> (u64, f64) {
        if self.horizon == 0.0 {
            return (0, self.dt);
        }
        let n = (self.horizon / self.dt).round().max(1.0) as u64;
        (n, self.horizon / n as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub halvings: u64,
    pub fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub id: u64,
    pub x_end: f64,
    pub censored: bool,
    pub censor_time: Option<f64>,
    /// `(t, x)`, filled for full paths.
    pub samples: Vec<(f64, f64)>,
    pub qv: f64,
    pub local_times: Vec<f64>,
    /// Occupation time per slot (underflow, bins, overflow).
    pub occupation: Vec<f64>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub scheme: Scheme,
    pub eps_cluster: f64,
    pub cluster_bound: f64,
    pub interfaces: usize,
    pub halvings: u64,
    pub fallbacks: u64,
    pub censored: u64,
    pub dt_used: f64,
    pub n_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub plan: SimPlan,
    pub paths: Vec<PathRecord>,
    pub log: RunLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_effective: u64,
    /// Paths dropped from the estimate (censored or past the time cap).
    pub excluded: u64,
    /// Analytic value when one is available.
    pub target: Option<f64>,
}

impl MCEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { estimate: f64::NAN, std_error: f64::NAN, n_effective: 0, excluded: 0, target: None };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Self { estimate: mean, std_error: (var / n as f64).sqrt(), n_effective: n as u64, excluded: 0, target: None }
    }

    /// `|estimate − target| / SE`, infinite when the error is nonzero but SE is 0.
    pub fn z_score(&self) -> Option<f64> {
        let t = self.target?;
        let d = (self.estimate - t).abs();
        Some(if d == 0.0 { 0.0 } else { d / self.std_error })
    }
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `∑ (x_{i+1} − x_i)²`
pub fn quadratic_variation(path: &[f64]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
}

/// Occupation estimate `(1/2ε) ∑ dt·1{|X_{t_i} − a| < ε}` over the left endpoints of an
/// equally spaced path.
pub fn local_time_estimate(path: &[f64], dt: f64, a: f64, eps: f64) -> f64 {
    let n = path.len().saturating_sub(1);
    path[..n].iter().filter(|&&x| (x - a).abs() < eps).count() as f64 * dt / (2.0 * eps)
}

fn run_parallel<F, T>(n: u64, threads: Option<usize>, f: F) -> Result<Vec<T>, SimError>
where
    F: Fn(u64) -> T + Sync + Send,
    T: Send,
{
    match threads {
        None => Ok((0..n).into_par_iter().map(f).collect()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().map_err(|e| SimError::Pool(e.to_string()))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
        }
    }
}

fn simulate_one(k: &Kernel<'_>, plan: &SimPlan, n_steps: u64, dt: f64, id: u64) -> PathRecord {
    let mut rng = path_rng(plan.seed, Axis::X, id);
    let mut w = k.start(plan.x0);
    let mut stats = StepStats::default();
    let full = plan.record == Record::FullPath;
    let funcs = plan.record == Record::Functionals;
    let mut samples = Vec::new();
    if full {
        samples.reserve((n_steps as usize) / plan.stride + 2);
        samples.push((0.0, w.x));
    }
    let mut qv = 0.0;
    let mut lt = vec![0.0; if funcs { plan.local_time.len() } else { 0 }];
    let occ_bins = if funcs { plan.occupation } else { None };
    let mut occ = vec![0.0; occ_bins.map_or(0, |b| b.n + 2)];
    let mut censor_time = None;
    for i in 0..n_steps {
        let t = i as f64 * dt;
        let prev = w.x;
        if funcs {
            for (slot, &(a, eps)) in lt.iter_mut().zip(&plan.local_time) {
                if (prev - a).abs() < eps {
                    *slot += dt / (2.0 * eps);
                }
            }
            if let Some(b) = occ_bins {
                if t >= plan.burn_in {
                    occ[b.slot(prev)] += dt;
                }
            }
        }
        let censored = k.step(&mut w, dt, &mut rng, &mut stats);
        qv += (w.x - prev) * (w.x - prev);
        if full && ((i + 1) as usize % plan.stride == 0 || censored || i + 1 == n_steps) {
            samples.push((t + dt, w.x));
        }
        if censored {
            censor_time = Some(t + dt);
            break;
        }
    }
    if let Some(b) = occ_bins {
        if occ.iter().all(|&v| v == 0.0) {
            occ[b.slot(w.x)] = 1.0;
        }
    }
    PathRecord {
        id,
        x_end: w.x,
        censored: censor_time.is_some(),
        censor_time,
        samples,
        qv,
        local_times: lt,
        occupation: occ,
        stats,
    }
}

fn require_conservative<T: Scalar>(config: &SkewConfig<T>, allow_explosive: bool) -> Result<(), SimError> {
    if allow_explosive {
        return Ok(());
    }
    let rep = classify_all(config, &ClassifyOptions::default());
    let v = &rep.conservative;
    if v.holds == Tri::True {
        return Ok(());
    }
    let mut msg = format!("conservative = {:?}", v.holds).to_lowercase();
    for e in &v.evidence {
        let side = e.side.map_or("both", |s| s.name());
        msg.push_str(&format!("; {side}: {:?} by {}", e.verdict.status, e.verdict.rule));
    }
    Err(SimError::Explosive(msg))
}

pub(crate) fn kernel_for<'a>(sf: &'a ScaleFunction, plan: &SimPlan) -> Result<Kernel<'a>, SimError> {
    plan.check()?;
    Kernel::new(sf, plan.scheme, plan.x_max, plan.eps_cluster)
}

pub(crate) fn plan_steps(plan: &SimPlan) -> (u64, f64) {
    plan.steps()
}

/// Simulates `plan.n_paths` paths. Path `i` always draws from stream `(seed, X, i)`
/// and results come back in path order, so output does not depend on the thread count.
pub fn simulate_path<T: Scalar>(config: &SkewConfig<T>, sf: &ScaleFunction, plan: &SimPlan) -> Result<PathEnsemble, SimError> {
    plan.check()?;
    require_conservative(config, plan.allow_explosive)?;
    let k = Kernel::new(sf, plan.scheme, plan.x_max, plan.eps_cluster)?;
    let (n_steps, dt) = plan.steps();
    let paths = run_parallel(plan.n_paths, plan.threads, |i| simulate_one(&k, plan, n_steps, dt, i))?;
    let log = RunLog {
        scheme: plan.scheme,
        eps_cluster: k.eps_cluster,
        cluster_bound: k.cluster_bound,
        interfaces: k.interfaces.len(),
        halvings: paths.iter().map(|p| p.stats.halvings).sum(),
        fallbacks: paths.iter().map(|p| p.stats.fallbacks).sum(),
        censored: paths.iter().filter(|p| p.censored).count() as u64,
        dt_used: dt,
        n_steps,
    };
    Ok(PathEnsemble { plan: plan.clone(), paths, log })
}

impl PathEnsemble {
    pub fn censored_fraction(&self) -> f64 {
        self.log.censored as f64 / self.paths.len() as f64
    }

    /// `h(X_T)` over uncensored paths; the target is `h(x0)`.
    pub fn martingale_check(&self, sf: &ScaleFunction) -> MCEstimate {
        let v: Vec<f64> = self.paths.iter().filter(|p| !p.censored).map(|p| sf.h(p.x_end)).collect();
        let mut e = MCEstimate::from_samples(&v);
        e.excluded = self.log.censored;
        e.target = Some(sf.h(self.plan.x0));
        e
    }

    pub fn write_paths_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["path_id", "t", "x", "censored"])?;
        for p in &self.paths {
            let rows: Vec<(f64, f64)> = if p.samples.is_empty() {
                vec![(p.censor_time.unwrap_or(self.plan.horizon), p.x_end)]
            } else {
                p.samples.clone()
            };
            let last = rows.len() - 1;
            for (j, (t, x)) in rows.into_iter().enumerate() {
                let c = p.censored && j == last;
                wr.write_record([p.id.to_string(), crate::scale::fmt(t), crate::scale::fmt(x), (c as u8).to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_functionals_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["path_id", "functional", "value"])?;
        let fmt = crate::scale::fmt;
        for p in &self.paths {
            let id = p.id.to_string();
            wr.write_record([id.as_str(), "x_end", &fmt(p.x_end)])?;
            wr.write_record([id.as_str(), "censored", if p.censored { "1" } else { "0" }])?;
            wr.write_record([id.as_str(), "qv", &fmt(p.qv)])?;
            for (j, &(a, eps)) in self.plan.local_time.iter().enumerate() {
                if let Some(v) = p.local_times.get(j) {
                    wr.write_record([id.as_str(), &format!("local_time[a={a},eps={eps}]"), &fmt(*v)])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Monte Carlo settings shared by the hitting and exit estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub scheme: Scheme,
    pub n_paths: u64,
    pub seed: u64,
    pub dt: f64,
    pub threads: Option<usize>,
    /// Paths still inside the interval at this time are excluded.
    pub t_cap: f64,
    pub eps_cluster: Option<f64>,
}

impl McSpec {
    pub fn new(scheme: Scheme, n_paths: u64, seed: u64, dt: f64) -> Self {
        Self { scheme, n_paths, seed, dt, threads: None, t_cap: 1e4, eps_cluster: None }
    }
}

enum Exit {
    Upper(f64),
    Lower(f64),
    Timeout,
}

fn first_exit(k: &Kernel<'_>, spec: &McSpec, x: f64, a: f64, b: f64, id: u64) -> Exit {
    if x >= b {
        return Exit::Upper(0.0);
    }
    if x <= a {
        return Exit::Lower(0.0);
    }
    let mut rng = path_rng(spec.seed, Axis::X, id);
    let mut stats = StepStats::default();
    let (ya, yb) = (k.h(a), k.h(b));
    let dt = spec.dt;
    let mut w = k.start(x);
    let n_max = (spec.t_cap / dt).ceil() as u64;
    for i in 0..n_max {
        let t_mid = (i as f64 + 0.5) * dt;
        let prev = w;
        k.step(&mut w, dt, &mut rng, &mut stats);
        if w.x >= b {
            return Exit::Upper(t_mid);
        }
        if w.x <= a {
            return Exit::Lower(t_mid);
        }
        let (ub, ua): (f64, f64) = (rng.random(), rng.random());
        if ub < k.bridge_prob(&prev, &w, b, yb, dt) {
            return Exit::Upper(t_mid);
        }
        if ua < k.bridge_prob(&prev, &w, a, ya, dt) {
            return Exit::Lower(t_mid);
        }
    }
    Exit::Timeout
}

fn exits(sf: &ScaleFunction, spec: &McSpec, x: f64, a: f64, b: f64) -> Result<Vec<Exit>, SimError> {
    if !(a < b) || !(a <= x && x <= b) {
        return Err(SimError::Plan(format!("need a ≤ x ≤ b with a < b, got a={a}, x={x}, b={b}")));
    }
    if !(spec.dt > 0.0) || spec.n_paths == 0 || spec.threads == Some(0) {
        return Err(SimError::Plan("need dt > 0, n_paths ≥ 1, threads ≥ 1".into()));
    }
    let (lo, hi) = sf.x_range();
    if a < lo || b > hi {
        return Err(SimError::Plan(format!("[{a}, {b}] exceeds the scale table [{lo}, {hi}]")));
    }
    let x_max = 2.0 * a.abs().max(b.abs()).max(1.0);
    let x_max = x_max.min(-lo).min(hi).max(a.abs().max(b.abs()));
    let k = Kernel::new(sf, spec.scheme, x_max, spec.eps_cluster)?;
    run_parallel(spec.n_paths, spec.threads, |i| first_exit(&k, spec, x, a, b, i))
}

/// Estimates `P_x(D_b < D_a)`.
pub fn mc_hitting(sf: &ScaleFunction, spec: &McSpec, x: f64, a: f64, b: f64) -> Result<MCEstimate, SimError> {
    let ex = exits(sf, spec, x, a, b)?;
    let v: Vec<f64> = ex
        .iter()
        .filter_map(|e| match e {
            Exit::Upper(_) => Some(1.0),
            Exit::Lower(_) => Some(0.0),
            Exit::Timeout => None,
        })
        .collect();
    let mut e = MCEstimate::from_samples(&v);
    e.excluded = ex.len() as u64 - e.n_effective;
    e.target = sf.hitting_prob_complement(x, a, b).ok();
    Ok(e)
}

/// Estimates `E_x[D_a ∧ D_b]`.
pub fn mc_exit_time(sf: &ScaleFunction, spec: &McSpec, x: f64, a: f64, b: f64) -> Result<MCEstimate, SimError> {
    let ex = exits(sf, spec, x, a, b)?;
    let v: Vec<f64> = ex
        .iter()
        .filter_map(|e| match *e {
            Exit::Upper(t) | Exit::Lower(t) => Some(t),
            Exit::Timeout => None,
        })
        .collect();
    let mut e = MCEstimate::from_samples(&v);
    e.excluded = ex.len() as u64 - e.n_effective;
    e.target = sf.mean_exit_time(x, a, b).ok();
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    pub bins: Bins,
    /// Time fraction per bin.
    pub frac: Vec<f64>,
    pub underflow: f64,
    pub overflow: f64,
    /// Invariant-law mass per bin, when the invariant law exists.
    pub target: Option<Vec<f64>>,
    pub target_underflow: Option<f64>,
    pub target_overflow: Option<f64>,
    /// Total variation distance over bins plus the two outside slots.
    pub tv: Option<f64>,
}

impl Occupation {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bin_lo", "bin_hi", "fraction", "invariant"])?;
        let e = self.bins.edges();
        let fmt = crate::scale::fmt;
        for i in 0..self.bins.n {
            let tgt = self.target.as_ref().map_or(String::new(), |t| fmt(t[i]));
            wr.write_record([fmt(e[i]), fmt(e[i + 1]), fmt(self.frac[i]), tgt])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Time-averaged occupation of the bins over `[burn_in, horizon]`, pooled over paths.
pub fn occupation_histogram<T: Scalar>(
    config: &SkewConfig<T>,
    sf: &ScaleFunction,
    plan: &SimPlan,
    bins: Bins,
) -> Result<Occupation, SimError> {
    let mut p = plan.clone();
    p.record = Record::Functionals;
    p.occupation = Some(bins);
    let ens = simulate_path(config, sf, &p)?;
    let mut tot = vec![0.0; bins.n + 2];
    for path in &ens.paths {
        for (t, v) in tot.iter_mut().zip(&path.occupation) {
            *t += v;
        }
    }
    let z: f64 = tot.iter().sum();
    let frac: Vec<f64> = tot.iter().map(|v| v / z).collect();
    let (target, tu, to, tv) = match sf.invariant() {
        Some(inv) => {
            let e = bins.edges();
            let cdf: Vec<f64> = e.iter().map(|&x| inv.cdf_at(x)).collect();
            let t: Vec<f64> = cdf.windows(2).map(|w| w[1] - w[0]).collect();
            let (tu, to) = (cdf[0], 1.0 - cdf[bins.n]);
            let tv = 0.5
                * ((frac[0] - tu).abs()
                    + (frac[bins.n + 1] - to).abs()
                    + t.iter().zip(&frac[1..=bins.n]).map(|(a, b)| (a - b).abs()).sum::<f64>());
            (Some(t), Some(tu), Some(to), Some(tv))
        }
        None => (None, None, None, None),
    };
    Ok(Occupation {
        bins,
        frac: frac[1..=bins.n].to_vec(),
        underflow: frac[0],
        overflow: frac[bins.n + 1],
        target,
        target_underflow: tu,
        target_overflow: to,
        tv,
    })
}
