//! Advection-diffusion in layered media: the transversal process `X = Ψ(Z)` built
//! from layer diffusivities, and a longitudinal coordinate `Y` driven by `X`.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify_all, mass_side, recurrence_side, ClassificationReport, ClassifyOptions, Tri};
use crate::config::{validate, PartitionSpec, SequenceSpec, Side, SkewConfig};
use crate::error::{LayerError, SimError};
use crate::scale::{build_scale, fmt, ScaleFunction, ScaleOptions};
use crate::series::{Budget, SeriesVerdict};
use crate::sim::{path_rng, Axis, McSpec, MCEstimate, SimPlan, StepStats};
use crate::tail::{Form, TailFamily};

pub const LAYER_SCHEMA: &str = "skewdiff-layers/1";

/// Piecewise-constant function: `values[i]` on `[breaks[i-1], breaks[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTable {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepTable {
    pub fn constant(v: f64) -> Self {
        Self { breaks: Vec::new(), values: vec![v] }
    }

    pub fn at(&self, x: f64) -> f64 {
        self.values[self.breaks.partition_point(|&b| b <= x)]
    }

    fn check(&self, what: &str, positive: bool) -> Result<(), LayerError> {
        let bad = |m: String| Err(LayerError::Unsupported(format!("{what}: {m}")));
        if self.values.len() != self.breaks.len() + 1 {
            return bad(format!("{} values for {} breaks", self.values.len(), self.breaks.len()));
        }
        if self.breaks.windows(2).any(|w| !(w[0] < w[1])) || self.breaks.iter().any(|b| !b.is_finite()) {
            return bad("breaks must be finite and strictly increasing".into());
        }
        if self.values.iter().any(|v| !v.is_finite() || (positive && *v <= 0.0)) {
            return bad(if positive { "values must be finite and > 0".into() } else { "values must be finite".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPartition {
    /// Magnitudes `-l_k`.
    pub negative: PartitionSpec<f64>,
    pub positive: PartitionSpec<f64>,
}

/// Layer data. `d` holds `D_k` on `(l_k, l_{k+1})` and `dbar` holds `D̄_k` on `(r_k, r_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    #[serde(default)]
    pub schema: Option<String>,
    #[serde(default)]
    pub name: String,
    pub partition: LayerPartition,
    #[serde(rename = "D")]
    pub d: SequenceSpec<f64>,
    #[serde(rename = "Dbar")]
    pub dbar: SequenceSpec<f64>,
    pub alpha: f64,
    /// Tables over the state space of `X`.
    pub sigma2_table: StepTable,
    pub beta2_table: StepTable,
}

impl LayerConfig {
    pub fn from_json(s: &str) -> Result<Self, LayerError> {
        let c: Self = serde_json::from_str(s).map_err(|e| {
            LayerError::Config(crate::error::ConfigError::Parse { line: e.line(), column: e.column(), msg: e.to_string() })
        })?;
        if let Some(sc) = &c.schema {
            if sc != LAYER_SCHEMA {
                return Err(LayerError::Unsupported(format!("schema `{sc}`, expected `{LAYER_SCHEMA}`")));
            }
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        let mut c = self.clone();
        c.schema = Some(LAYER_SCHEMA.into());
        serde_json::to_string_pretty(&c).expect("serializable")
    }
}

/// `Ψ` as a piecewise-linear map with knots `(z, Ψ(z))`.
#[derive(Debug, Clone)]
pub struct PsiMap {
    pub knots: Vec<(f64, f64)>,
    /// `Ψ(±∞)`, infinite when the side has infinite `Ψ`-increment.
    pub range: (f64, f64),
}

impl PsiMap {
    fn seg(&self, v: f64, by_psi: bool) -> usize {
        let i = self.knots.partition_point(|k| if by_psi { k.1 <= v } else { k.0 <= v });
        i.saturating_sub(1).min(self.knots.len() - 2)
    }

    pub fn eval(&self, z: f64) -> f64 {
        let i = self.seg(z, false);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        a.1 + (b.1 - a.1) / (b.0 - a.0) * (z - a.0)
    }

    pub fn inverse(&self, x: f64) -> f64 {
        let i = self.seg(x, true);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        a.0 + (b.0 - a.0) / (b.1 - a.1) * (x - a.1)
    }

    pub fn bounded(&self) -> bool {
        self.range.0.is_finite() && self.range.1.is_finite()
    }
}

/// Result of [`build_layered`].
#[derive(Debug, Clone)]
pub struct Layered {
    pub layer: LayerConfig,
    /// Skew configuration of `Z` with densities `c_α√D_k`, `c̄_α√D̄_k`.
    pub z_config: SkewConfig<f64>,
    pub z_scale: ScaleFunction,
    pub psi: PsiMap,
    pub c_alpha: f64,
    pub cbar_alpha: f64,
    pub report: ClassificationReport,
}

/// `j ↦ k · √(D_{j−1})` in product form, for tail indices on one side.
fn shifted_sqrt(f: &Form<f64>, k: f64, d: i64) -> TailFamily<f64> {
    TailFamily::product(f.shift(d).pow_scaled(k, 0.5))
}

fn derived_density(d: &SequenceSpec<f64>, side: Side, k: f64) -> Result<SequenceSpec<f64>, LayerError> {
    let seq = d.compile(side)?;
    let (inner_shift, outer_shift) = match side {
        Side::Negative => (-1, 1),
        Side::Positive => (1, -1),
    };
    let lo = d.window_lo;
    let hi = d.window_hi + 1;
    if lo > 0 || d.window_hi < 0 {
        return Err(LayerError::Unsupported("diffusivity windows must contain index 0".into()));
    }
    let values = (lo..=hi).map(|j| k * seq.at(j - 1).sqrt()).collect();
    Ok(SequenceSpec {
        window_lo: lo,
        window_hi: hi,
        explicit_values: values,
        inner_tail: shifted_sqrt(&seq.inner, k, inner_shift),
        outer_tail: shifted_sqrt(&seq.outer, k, outer_shift),
    })
}

fn limit_at_origin(d: &SequenceSpec<f64>, side: Side, what: &str) -> Result<f64, LayerError> {
    let seq = d.compile(side)?;
    match seq.inner_limit() {
        Some(v) if v > 0.0 => Ok(v),
        _ => Err(LayerError::Preconditions(format!("{what} has no positive finite limit at the origin"))),
    }
}

pub fn build_layered(layer: &LayerConfig, opts: &ScaleOptions) -> Result<Layered, LayerError> {
    if !(layer.alpha > 0.0 && layer.alpha < 1.0) {
        return Err(LayerError::Unsupported(format!("α = {} outside (0,1)", layer.alpha)));
    }
    layer.sigma2_table.check("sigma2_table", true)?;
    layer.beta2_table.check("beta2_table", false)?;
    let dl = limit_at_origin(&layer.d, Side::Negative, "D")?;
    let dr = limit_at_origin(&layer.dbar, Side::Positive, "Dbar")?;
    let c_alpha = layer.alpha / dl.sqrt();
    let cbar_alpha = (1.0 - layer.alpha) / dr.sqrt();
    let z_config = SkewConfig {
        name: if layer.name.is_empty() { "layered".into() } else { layer.name.clone() },
        neg_partition: layer.partition.negative.clone(),
        pos_partition: layer.partition.positive.clone(),
        neg_density: derived_density(&layer.d, Side::Negative, c_alpha)?,
        pos_density: derived_density(&layer.dbar, Side::Positive, cbar_alpha)?,
    };
    let v = validate(&z_config);
    if !v.is_valid() {
        return Err(LayerError::Preconditions(format!("derived configuration invalid: {v:?}")));
    }
    let report = classify_all(&z_config, &ClassifyOptions { budget: opts.budget, ..ClassifyOptions::default() });
    let standing = [("S0", report.s0.holds), ("S1", report.s1.holds), ("C0∧C1", report.conservative.holds)];
    let failed: Vec<String> = standing.iter().filter(|s| s.1 != Tri::True).map(|s| format!("{}={:?}", s.0, s.1)).collect();
    if !failed.is_empty() {
        return Err(LayerError::Preconditions(failed.join(", ")));
    }
    let z_scale = build_scale(&z_config, opts)?;
    let compiled = z_config.compile()?;
    let side_mass = |side| {
        let m: SeriesVerdict = mass_side(&compiled.view(side), &opts.budget);
        if m.converges() { m.value } else { f64::INFINITY }
    };
    // Ψ′ equals the derived density, so Ψ(z) = ∫_0^z ρ.
    let knots = z_scale.knots.iter().map(|k| (k.x, k.m)).collect();
    let psi = PsiMap { knots, range: (-side_mass(Side::Negative), side_mass(Side::Positive)) };
    Ok(Layered { layer: layer.clone(), z_config, z_scale, psi, c_alpha, cbar_alpha, report })
}

impl Layered {
    /// `σ₁(x)`, the slope of `Ψ` on the layer containing `Ψ⁻¹(x)`.
    pub fn sigma1(&self, x: f64) -> f64 {
        let z = self.psi.inverse(x);
        let i = self.z_scale.locate(z).unwrap_or(0);
        self.z_scale.segments[i].dens
    }

    /// Scale function of `X` with slope `1/σ₁²`, normalized by `h̄(0) = 0`.
    pub fn hbar(&self, x: f64) -> f64 {
        let z = self.psi.inverse(x);
        let sf = &self.z_scale;
        let i = sf.locate(z).expect("inside the table");
        let zero = sf.locate(0.0).expect("0 is tabulated");
        let mut acc = 0.0;
        let seg = |j: usize| {
            let d = sf.segments[j].dens;
            (self.psi.knots[j + 1].1 - self.psi.knots[j].1) / (d * d)
        };
        if i >= zero {
            for j in zero..i {
                acc += seg(j);
            }
        } else {
            for j in i..zero {
                acc -= seg(j);
            }
        }
        let d = sf.segments[i].dens;
        acc + (x - self.psi.knots[i].1) / (d * d)
    }

    /// `P_x(X hits b before a)` from `h̄`.
    pub fn hitting_prob_upper(&self, x: f64, a: f64, b: f64) -> f64 {
        let (ha, hb) = (self.hbar(a), self.hbar(b));
        ((self.hbar(x) - ha) / (hb - ha)).clamp(0.0, 1.0)
    }

    /// Monte Carlo estimate of `P_x(X hits b before a)`, with the `h̄` value as target.
    pub fn mc_hitting(&self, spec: &McSpec, x: f64, a: f64, b: f64) -> Result<MCEstimate, LayerError> {
        let p = &self.psi;
        let mut e = crate::sim::mc_hitting(&self.z_scale, spec, p.inverse(x), p.inverse(a), p.inverse(b))?;
        e.target = Some(self.hitting_prob_upper(x, a, b));
        Ok(e)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayeredReport {
    pub schema: &'static str,
    pub name: String,
    pub c_alpha: f64,
    pub cbar_alpha: f64,
    pub psi_range: (f64, f64),
    pub bounded_range: bool,
    /// `∑ ΔΨ/D` per side (negative first); divergence on both sides means recurrence.
    pub recurrence_evidence: [SeriesVerdict; 2],
    /// `∑ ΔΨ` per side.
    pub range_evidence: [SeriesVerdict; 2],
    pub recurrent: Tri,
    pub positive_recurrent: Tri,
    /// Present when positive recurrent: the invariant law is uniform on this interval.
    pub invariant_uniform_on: Option<(f64, f64)>,
}

impl LayeredReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

pub fn classify_layered(lay: &Layered, budget: &Budget) -> LayeredReport {
    let c = lay.z_config.compile().expect("validated at build");
    let rec = [recurrence_side(&c.view(Side::Negative), budget), recurrence_side(&c.view(Side::Positive), budget)];
    let rng = [mass_side(&c.view(Side::Negative), budget), mass_side(&c.view(Side::Positive), budget)];
    let recurrent = if rec.iter().all(|v| v.diverges()) {
        Tri::True
    } else if rec.iter().any(|v| v.converges()) {
        Tri::False
    } else {
        Tri::Unknown
    };
    let positive_recurrent = match recurrent {
        Tri::False => Tri::False,
        _ if rng.iter().any(|v| v.diverges()) => Tri::False,
        Tri::True if rng.iter().all(|v| v.converges()) => Tri::True,
        _ => Tri::Unknown,
    };
    LayeredReport {
        schema: LAYER_SCHEMA,
        name: lay.z_config.name.clone(),
        c_alpha: lay.c_alpha,
        cbar_alpha: lay.cbar_alpha,
        psi_range: lay.psi.range,
        bounded_range: lay.psi.bounded(),
        recurrence_evidence: rec,
        range_evidence: rng,
        recurrent,
        positive_recurrent,
        invariant_uniform_on: (positive_recurrent == Tri::True).then_some(lay.psi.range),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPath {
    pub id: u64,
    /// `(t, x, y)` every `plan.stride` steps, starting at `t = 0`.
    pub samples: Vec<(f64, f64, f64)>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEnsemble {
    pub plan: SimPlan,
    pub y0: f64,
    pub dt_used: f64,
    pub paths: Vec<JointPath>,
}

/// Simulates `(X, Y)`: `Z` from `Ψ⁻¹(plan.x0)` with the plan's scheme, `X = Ψ(Z)`, and
/// `Y` integrated with `σ₂(X)`, `β₂(X)` frozen over each step on an independent stream.
/// `plan.x_max` bounds `Z`.
pub fn simulate_xy(lay: &Layered, plan: &SimPlan, y0: f64) -> Result<JointEnsemble, LayerError> {
    let mut zplan = plan.clone();
    zplan.x0 = lay.psi.inverse(plan.x0);
    let k = crate::sim::kernel_for(&lay.z_scale, &zplan)?;
    let (n_steps, dt) = crate::sim::plan_steps(&zplan);
    let one = |id: u64| {
        let mut rx = path_rng(plan.seed, Axis::X, id);
        let mut ry = path_rng(plan.seed, Axis::Y, id);
        let mut w = k.start(zplan.x0);
        let mut stats = StepStats::default();
        let mut y = y0;
        let mut x = lay.psi.eval(w.x);
        let mut samples = vec![(0.0, x, y)];
        let mut censored = false;
        for i in 0..n_steps {
            let eta: f64 = StandardNormal.sample(&mut ry);
            y += lay.layer.sigma2_table.at(x) * dt.sqrt() * eta + lay.layer.beta2_table.at(x) * dt;
            censored = k.step(&mut w, dt, &mut rx, &mut stats);
            x = lay.psi.eval(w.x);
            if (i + 1) as usize % plan.stride == 0 || i + 1 == n_steps || censored {
                samples.push(((i + 1) as f64 * dt, x, y));
            }
            if censored {
                break;
            }
        }
        JointPath { id, samples, censored }
    };
    let paths = match plan.threads {
        None => (0..plan.n_paths).into_par_iter().map(one).collect(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| SimError::Pool(e.to_string()))?
            .install(|| (0..plan.n_paths).into_par_iter().map(one).collect()),
    };
    Ok(JointEnsemble { plan: plan.clone(), y0, dt_used: dt, paths })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub t: f64,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub n: u64,
}

/// Moments of `Y_t` across uncensored paths at each grid time (snapped to the recording grid).
pub fn dispersion_stats(ens: &JointEnsemble, grid: &[f64]) -> Vec<DispersionRow> {
    let h = ens.dt_used * ens.plan.stride as f64;
    grid.iter()
        .map(|&t| {
            let j = (t / h).round() as usize;
            let ys: Vec<f64> = ens
                .paths
                .iter()
                .filter(|p| !p.censored)
                .filter_map(|p| p.samples.get(j).map(|s| s.2))
                .collect();
            let e = MCEstimate::from_samples(&ys);
            let n = ys.len() as f64;
            let var = e.std_error * e.std_error * n;
            let m4 = ys.iter().map(|y| (y - e.estimate).powi(4)).sum::<f64>() / n;
            let se_var = if n > 1.0 { ((m4 - var * var).max(0.0) / n).sqrt() } else { 0.0 };
            DispersionRow { t: j as f64 * h, mean: e.estimate, var, se_mean: e.std_error, se_var, n: ys.len() as u64 }
        })
        .collect()
}

pub fn write_dispersion_csv<W: Write>(rows: &[DispersionRow], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "mean", "var", "se_mean", "se_var"])?;
    for r in rows {
        wr.write_record([fmt(r.t), fmt(r.mean), fmt(r.var), fmt(r.se_mean), fmt(r.se_var)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_joint_csv<W: Write>(ens: &JointEnsemble, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["path_id", "t", "x", "y", "censored"])?;
    for p in &ens.paths {
        let last = p.samples.len() - 1;
        for (j, &(t, x, y)) in p.samples.iter().enumerate() {
            let c = p.censored && j == last;
            wr.write_record([p.id.to_string(), fmt(t), fmt(x), fmt(y), (c as u8).to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Layers of the fixture with `r_k = k`, `√D̄_k = k⁻²` for `k ≥ 1`, mirrored to the left,
/// unit diffusivity near the origin.
pub fn bounded_range_fixture(alpha: f64) -> LayerConfig {
    let w = 4;
    let pos = SequenceSpec::from_tails(Side::Positive, -w, w, 0, TailFamily::constant(1.0), TailFamily::power(1.0, -4.0))
        .expect("valid families");
    let neg = SequenceSpec::from_tails(
        Side::Negative,
        -w,
        w,
        -1,
        TailFamily::constant(1.0),
        TailFamily::shifted_power(1.0, -4.0, -1.0),
    )
    .expect("valid families");
    LayerConfig {
        schema: Some(LAYER_SCHEMA.into()),
        name: "bounded-range".into(),
        partition: LayerPartition {
            negative: crate::fixtures::unit_partition(Side::Negative),
            positive: crate::fixtures::unit_partition(Side::Positive),
        },
        d: neg,
        dbar: pos,
        alpha,
        sigma2_table: StepTable::constant(1.0),
        beta2_table: StepTable::constant(0.0),
    }
}

/// Constant diffusivity `d` everywhere.
pub fn homogeneous_fixture(d: f64, alpha: f64) -> LayerConfig {
    let c = |side| SequenceSpec::from_tails(side, -4, 4, 0, TailFamily::constant(d), TailFamily::constant(d)).expect("valid");
    LayerConfig {
        schema: Some(LAYER_SCHEMA.into()),
        name: "homogeneous".into(),
        partition: LayerPartition {
            negative: crate::fixtures::unit_partition(Side::Negative),
            positive: crate::fixtures::unit_partition(Side::Positive),
        },
        d: c(Side::Negative),
        dbar: c(Side::Positive),
        alpha,
        sigma2_table: StepTable::constant(1.0),
        beta2_table: StepTable::constant(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_medium_halves_brownian_motion() {
        let lay = build_layered(&homogeneous_fixture(1.0, 0.5), &ScaleOptions::default()).unwrap();
        assert_eq!((lay.c_alpha, lay.cbar_alpha), (0.5, 0.5));
        for z in [-3.0, -0.1, 0.0, 0.7, 5.0] {
            assert!((lay.psi.eval(z) - 0.5 * z).abs() < 1e-12);
            assert!((lay.psi.inverse(0.5 * z) - z).abs() < 1e-12);
        }
        let r = classify_layered(&lay, &Budget::default());
        assert_eq!((r.recurrent, r.positive_recurrent, r.bounded_range), (Tri::True, Tri::False, false));
    }

    #[test]
    fn bounded_range_fixture_is_positive_recurrent() {
        let lay = build_layered(&bounded_range_fixture(0.5), &ScaleOptions::default()).unwrap();
        let r = classify_layered(&lay, &Budget::default());
        assert_eq!((r.recurrent, r.positive_recurrent), (Tri::True, Tri::True));
        // Ψ(+∞) = c̄(1/2 + 1/2 + ∑_{k≥1} k⁻²)
        let expect = 0.5 * (1.0 + std::f64::consts::PI.powi(2) / 6.0);
        assert!((r.psi_range.1 - expect).abs() < 1e-6, "{:?}", r.psi_range);
        assert!((r.psi_range.0 + expect).abs() < 1e-6, "{:?}", r.psi_range);
    }

    #[test]
    fn skew_weights_from_diffusivities_match_derived_densities() {
        // D_k alternating 1, 4 inside the window
        let mut cfg = homogeneous_fixture(1.0, 0.3);
        for (i, v) in cfg.dbar.explicit_values.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 1.0 } else { 4.0 };
        }
        cfg.dbar.explicit_values[0] = 1.0;
        let n = cfg.dbar.explicit_values.len();
        cfg.dbar.explicit_values[n - 1] = 1.0;
        let lay = build_layered(&cfg, &ScaleOptions::default()).unwrap();
        let c = lay.z_config.compile().unwrap();
        let d = cfg.dbar.compile(Side::Positive).unwrap();
        for k in -3..4 {
            let from_d = d.at(k).sqrt() / (d.at(k).sqrt() + d.at(k - 1).sqrt());
            let from_g = c.pos_d.at(k + 1) / (c.pos_d.at(k + 1) + c.pos_d.at(k));
            assert!((from_d - from_g).abs() < 1e-12);
        }
    }

    #[test]
    fn single_path_at_time_zero() {
        let lay = build_layered(&homogeneous_fixture(1.0, 0.5), &ScaleOptions::default()).unwrap();
        let plan = SimPlan::new(crate::sim::Scheme::EulerTransformed, 0.0, 0.1, 1e-3, 1, 3);
        let ens = simulate_xy(&lay, &plan, 2.0).unwrap();
        let r = dispersion_stats(&ens, &[0.0]);
        assert_eq!((r[0].mean, r[0].var), (2.0, 0.0));
    }
}
