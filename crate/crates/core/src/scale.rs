//! Piecewise-linear scale function, Feller's Φ, speed measure, invariant law,
//! hitting probabilities and mean exit times.
//!
//! Under S0∧S1 the inner density tails are constant (every other tail family has
//! limit 0 or ∞), so `h`, `Φ` and the mass function are exactly linear or
//! quadratic on the inner regions around 0 and only finitely many segments need
//! to be tabulated up to a given reach.

use std::io::Write;

use serde::Serialize;

use crate::classifier::{mass_side, recurrence_side};
use crate::config::{Compiled, Side, SkewConfig};
use crate::error::ScaleError;
use crate::scalar::Scalar;
use crate::series::{evaluate, sum_verdicts, Budget, Series, SeriesVerdict, Status};

/// Segments beyond which a side stops tabulating unless its reach is met earlier.
pub const DEFAULT_CAP: usize = 1 << 18;
/// Relative increment below which an outer segment no longer changes `h`.
const SATURATION: f64 = 1e-17;
/// Segments computed on the fly beyond the table before giving up.
const FLY_CAP: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleOptions {
    /// Distance from 0 up to which both sides are tabulated.
    pub reach: f64,
    pub cap: usize,
    pub budget: Budget,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self { reach: 1e3, cap: DEFAULT_CAP, budget: Budget::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knot {
    pub x: f64,
    pub h: f64,
    /// `Φ(x)`
    pub phi: f64,
    /// `∫_0^x ρ`, negative for `x < 0`.
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub slope: f64,
    pub dens: f64,
}

/// Running state at the outer end of one side's table.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Edge {
    t: i64,
    u: f64,
    h: f64,
    phi: f64,
    m: f64,
    coef: f64,
    saturated: bool,
}

#[derive(Debug, Clone)]
pub struct ScaleFunction {
    pub name: String,
    /// Ascending knots; every knot is a breakpoint or 0.
    pub knots: Vec<Knot>,
    /// `segments[i]` lies between `knots[i]` and `knots[i+1]`.
    pub segments: Vec<Segment>,
    pub alpha: f64,
    /// `(γ, γ̄)`
    pub limits: (f64, f64),
    /// `(h(−∞), h(+∞))`, infinite where the side is recurrent.
    pub h_range: (f64, f64),
    /// Series verdicts for `h(±∞)` (negative side first); `Diverges` means infinite.
    pub h_inf: [SeriesVerdict; 2],
    /// Series verdicts for `Φ(±∞)`; `Diverges` means the boundary is inaccessible.
    pub phi_inf: [SeriesVerdict; 2],
    pub mass: SeriesVerdict,
    /// `∫_{−∞}^0 ρ` (infinite when the left side has infinite mass)
    pub left_mass: f64,
    compiled: Compiled<f64>,
    edges: [Edge; 2],
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Negative => 0,
        Side::Positive => 1,
    }
}

/// Magnitude-space tabulation of one side: `(u, h, Φ, M)` rows and segment data.
struct Half {
    rows: Vec<(f64, f64, f64, f64)>,
    segs: Vec<Segment>,
    edge: Edge,
    inner_slope: f64,
}

fn step(v: &crate::config::SideView<'_, f64>, e: &mut Edge) -> Segment {
    let sp = v.sp(e.t);
    let d = v.dens(e.t);
    let slope = e.coef / d;
    let dh = slope * sp;
    let dphi = 0.5 * sp * sp + sp * e.m / d;
    e.saturated = dh <= SATURATION * e.h;
    e.h += dh;
    e.phi += dphi;
    e.m += d * sp;
    e.t += 1;
    e.u = v.bp(e.t);
    Segment { slope, dens: d }
}

fn build_half(c: &Compiled<f64>, side: Side, coef: f64, opts: &ScaleOptions) -> Half {
    let v = c.view(side);
    let (t_in, thi) = v.t_window();
    let l = v.inner_dens_form().c;
    let u_in = v.bp(t_in);
    let inner_slope = coef / l;
    let mut e = Edge {
        t: t_in,
        u: u_in,
        h: inner_slope * u_in,
        phi: 0.5 * u_in * u_in,
        m: l * u_in,
        coef,
        saturated: false,
    };
    let mut rows = vec![(e.u, e.h, e.phi, e.m)];
    let mut segs = Vec::new();
    let mut quiet = 0;
    while e.t <= thi || (e.u < opts.reach && segs.len() < opts.cap && quiet < 16) {
        segs.push(step(&v, &mut e));
        rows.push((e.u, e.h, e.phi, e.m));
        quiet = if e.saturated { quiet + 1 } else { 0 };
    }
    e.saturated = quiet >= 16;
    Half { rows, segs, edge: e, inner_slope }
}

/// `∑_t {½sp² + sp·M_t/dens_t}` over a side: `Φ` at infinity.
fn phi_series(c: &Compiled<f64>, side: Side, b: &Budget) -> SeriesVerdict {
    let v = c.view(side);
    let (t_in, thi) = v.t_window();
    let u_in = v.bp(t_in);
    let l = v.inner_dens_form().c;
    let sp_g = v.outer_spacing_growth();
    let d_g = v.outer_dens_growth();
    let mass_g = sp_g.mul(d_g).partial_sums();
    let growth = sp_g.mul(sp_g).max(sp_g.mul(mass_g).div(d_g));
    let mut m = l * u_in;
    let mut term = |n: u64| {
        let t = t_in + n as i64;
        let (sp, d) = (v.sp(t), v.dens(t));
        let x = 0.5 * sp * sp + sp * m / d;
        m += d * sp;
        x
    };
    let mut s = Series { term: &mut term, symbolic_from: (thi - t_in + 2) as u64, tail: growth, tail_exact: None };
    let mut out = evaluate(&mut s, b);
    out.value += 0.5 * u_in * u_in;
    out
}

/// Builds `h` with `h(0) = 0` and slopes `αγ/γ_{k+1}`, `(1−α)γ̄/γ̄_{k+1}`.
pub fn build_scale<T: Scalar>(config: &SkewConfig<T>, opts: &ScaleOptions) -> Result<ScaleFunction, ScaleError> {
    let cfg = config.to_f64();
    let b = &opts.budget;
    let s0 = crate::classifier::check_s0(&cfg, b);
    let s1 = crate::classifier::check_s1(&cfg, b);
    if s1.diverges() {
        return Err(ScaleError::NoScaleFunction(format!("S1 diverges ({})", s1.rule)));
    }
    if s0.diverges() {
        return Err(ScaleError::NoScaleFunction(format!("S0 diverges ({})", s0.rule)));
    }
    if !(s0.converges() && s1.converges()) {
        return Err(ScaleError::Inconclusive(format!("S0 {:?}, S1 {:?}", s0.status, s1.status)));
    }
    let c = cfg.compile()?;
    for side in [Side::Negative, Side::Positive] {
        if !c.view(side).inner_dens_form().is_constant() {
            return Err(ScaleError::Inconclusive(format!(
                "{} inner density tail is not constant",
                side.name()
            )));
        }
    }
    let g = c.neg_d.inner.c;
    let gb = c.pos_d.inner.c;
    let alpha = cfg.effective_alpha()?;
    let neg = build_half(&c, Side::Negative, alpha * g, opts);
    let pos = build_half(&c, Side::Positive, (1.0 - alpha) * gb, opts);

    let mut knots = Vec::with_capacity(neg.rows.len() + pos.rows.len() + 1);
    let mut segments = Vec::with_capacity(neg.segs.len() + pos.segs.len() + 2);
    for (i, &(u, h, phi, m)) in neg.rows.iter().enumerate().rev() {
        knots.push(Knot { x: -u, h: -h, phi, m: -m });
        if i > 0 {
            segments.push(neg.segs[i - 1]);
        }
    }
    segments.push(Segment { slope: neg.inner_slope, dens: g });
    knots.push(Knot { x: 0.0, h: 0.0, phi: 0.0, m: 0.0 });
    segments.push(Segment { slope: pos.inner_slope, dens: gb });
    for (i, &(u, h, phi, m)) in pos.rows.iter().enumerate() {
        knots.push(Knot { x: u, h, phi, m });
        if i < pos.segs.len() {
            segments.push(pos.segs[i]);
        }
    }

    let hv = |side: Side, coef: f64| {
        let mut v = recurrence_side(&c.view(side), b);
        v.value *= coef;
        v.error_bound *= coef;
        v
    };
    let h_inf = [hv(Side::Negative, alpha * g), hv(Side::Positive, (1.0 - alpha) * gb)];
    let lim = |v: &SeriesVerdict, edge: &Edge| match v.status {
        Status::Diverges => f64::INFINITY,
        Status::Converges => {
            if edge.saturated {
                edge.h
            } else {
                v.value
            }
        }
        Status::Inconclusive => f64::NAN,
    };
    let h_range = (-lim(&h_inf[0], &neg.edge), lim(&h_inf[1], &pos.edge));
    let phi_inf = [phi_series(&c, Side::Negative, b), phi_series(&c, Side::Positive, b)];
    let left = mass_side(&c.view(Side::Negative), b);
    let mass = sum_verdicts(&left, &mass_side(&c.view(Side::Positive), b));
    let left_mass = if left.converges() { left.value } else { f64::INFINITY };
    Ok(ScaleFunction {
        name: cfg.name.clone(),
        knots,
        segments,
        alpha,
        limits: (g, gb),
        h_range,
        h_inf,
        phi_inf,
        mass,
        left_mass,
        compiled: c,
        edges: [neg.edge, pos.edge],
    })
}

/// Value returned beyond the table: `(h, Φ, M)` in magnitudes.
fn beyond(sf: &ScaleFunction, side: Side, u: f64) -> (f64, f64, f64) {
    let mut e = sf.edges[side_index(side)];
    let phi_inf = &sf.phi_inf[side_index(side)];
    let phi_limit = if phi_inf.converges() { phi_inf.value } else { f64::NAN };
    if e.saturated {
        return (e.h, phi_limit, f64::INFINITY);
    }
    let v = sf.compiled.view(side);
    let mut n = 0u64;
    loop {
        let next = v.bp(e.t + 1);
        if next > u {
            let d = v.dens(e.t);
            let w = u - e.u;
            return (e.h + e.coef / d * w, e.phi + w * e.m / d + 0.5 * w * w, e.m + d * w);
        }
        step(&v, &mut e);
        n += 1;
        if n > FLY_CAP || e.saturated {
            return if e.saturated { (e.h, phi_limit, f64::INFINITY) } else { (f64::NAN, f64::NAN, f64::NAN) };
        }
    }
}

impl ScaleFunction {
    /// Whether the table on `side` stops because `h` stopped growing.
    pub fn saturated(&self, side: Side) -> bool {
        self.edges[side_index(side)].saturated
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.knots[0].x, self.knots[self.knots.len() - 1].x)
    }

    /// Index `i` with `knots[i].x ≤ x < knots[i+1].x`, if `x` is tabulated.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.x_range();
        if !(x >= lo && x <= hi) {
            return None;
        }
        let i = self.knots.partition_point(|k| k.x <= x);
        Some(i.saturating_sub(1).min(self.segments.len() - 1))
    }

    pub fn h(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => self.knots[i].h + self.segments[i].slope * (x - self.knots[i].x),
            None if x > 0.0 => beyond(self, Side::Positive, x).0,
            None => -beyond(self, Side::Negative, -x).0,
        }
    }

    /// Symmetric derivative: one-sided slope inside segments, average at breakpoints.
    pub fn h_prime(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => {
                if x == self.knots[i].x && i > 0 {
                    0.5 * (self.segments[i - 1].slope + self.segments[i].slope)
                } else {
                    self.segments[i].slope
                }
            }
            None => {
                let side = if x > 0.0 { Side::Positive } else { Side::Negative };
                let v = self.compiled.view(side);
                let e = &self.edges[side_index(side)];
                match v.locate(x.abs()) {
                    Ok(crate::config::Loc::Interior(t)) => e.coef / v.dens(t),
                    Ok(crate::config::Loc::Breakpoint(t)) => 0.5 * e.coef * (1.0 / v.dens(t) + 1.0 / v.dens(t - 1)),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    pub fn h_inverse(&self, y: f64) -> Result<f64, ScaleError> {
        let (lo, hi) = self.h_range;
        if !(y > lo && y < hi) {
            return Err(ScaleError::BoundaryRange { y, lo, hi });
        }
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if y >= first.h && y <= last.h {
            let i = self.knots.partition_point(|k| k.h <= y).saturating_sub(1).min(self.segments.len() - 1);
            return Ok(self.knots[i].x + (y - self.knots[i].h) / self.segments[i].slope);
        }
        let (side, v) = if y > 0.0 { (Side::Positive, y) } else { (Side::Negative, -y) };
        let mut e = self.edges[side_index(side)];
        let view = self.compiled.view(side);
        let sign = if y > 0.0 { 1.0 } else { -1.0 };
        for _ in 0..FLY_CAP {
            let before = e;
            step(&view, &mut e);
            if e.h >= v {
                return Ok(sign * (before.u + (v - before.h) * view.dens(before.t) / before.coef));
            }
        }
        Err(ScaleError::BoundaryRange { y, lo, hi })
    }

    /// `Φ(x) = ∫_0^x h′(z) ∫_0^z 1/h′(y) dy dz`
    pub fn phi(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => {
                let s = self.segments[i];
                if x >= 0.0 {
                    let k = self.knots[i];
                    let w = x - k.x;
                    k.phi + w * k.m / s.dens + 0.5 * w * w
                } else {
                    let k = self.knots[i + 1];
                    let w = k.x - x;
                    k.phi + w * k.m.abs() / s.dens + 0.5 * w * w
                }
            }
            None if x > 0.0 => beyond(self, Side::Positive, x).1,
            None => beyond(self, Side::Negative, -x).1,
        }
    }

    /// `∫_0^x ρ`, negative for `x < 0`.
    pub fn mass_to(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => self.knots[i].m + self.segments[i].dens * (x - self.knots[i].x),
            None if x > 0.0 => beyond(self, Side::Positive, x).2,
            None => -beyond(self, Side::Negative, -x).2,
        }
    }

    /// `P_x(D_a < D_b)`
    pub fn hitting_prob(&self, x: f64, a: f64, b: f64) -> Result<f64, ScaleError> {
        check_interval(x, a, b)?;
        let (ha, hb) = (self.h(a), self.h(b));
        Ok(((hb - self.h(x)) / (hb - ha)).clamp(0.0, 1.0))
    }

    /// `P_x(D_b < D_a)`
    pub fn hitting_prob_complement(&self, x: f64, a: f64, b: f64) -> Result<f64, ScaleError> {
        Ok(1.0 - self.hitting_prob(x, a, b)?)
    }

    /// Speed density `2/h′`.
    pub fn speed_density(&self, x: f64) -> f64 {
        2.0 / self.h_prime(x)
    }

    /// Pieces `(y0, y1, segment)` covering `[a, b]` inside the table.
    fn pieces(&self, a: f64, b: f64) -> Result<Vec<(f64, f64, Segment)>, ScaleError> {
        let (Some(ia), Some(ib)) = (self.locate(a), self.locate(b)) else {
            let (lo, hi) = self.x_range();
            return Err(ScaleError::Domain(format!("[{a}, {b}] exceeds the tabulated range [{lo}, {hi}]")));
        };
        let mut out = Vec::with_capacity(ib - ia + 1);
        for i in ia..=ib {
            let y0 = self.knots[i].x.max(a);
            let y1 = self.knots[i + 1].x.min(b);
            if y1 > y0 {
                out.push((y0, y1, self.segments[i]));
            }
        }
        Ok(out)
    }

    /// `E_x[D_a ∧ D_b] = ∫_a^b G(x,y) 2/h′(y) dy`, integrated exactly per segment.
    pub fn mean_exit_time(&self, x: f64, a: f64, b: f64) -> Result<f64, ScaleError> {
        check_interval(x, a, b)?;
        if x == a || x == b {
            return Ok(0.0);
        }
        let (ha, hb, hx) = (self.h(a), self.h(b), self.h(x));
        let dd = hb - ha;
        let mut total = 0.0;
        for (lo, hi) in [(a, x), (x, b)] {
            for (y0, y1, s) in self.pieces(lo, hi)? {
                let w = y1 - y0;
                let h0 = self.h(y0);
                let speed = 2.0 / s.slope;
                // ∫ (h(y) − h(a)) dy or ∫ (h(b) − h(y)) dy over the piece, h linear
                let lin = if hi == x { (h0 - ha) * w + 0.5 * s.slope * w * w } else { (hb - h0) * w - 0.5 * s.slope * w * w };
                let other = if hi == x { hb - hx } else { hx - ha };
                total += speed * other * lin / dd;
            }
        }
        Ok(total)
    }

    /// Invariant distribution when `∫ρ < ∞`, otherwise `None` (infinite mass).
    pub fn invariant(&self) -> Option<InvariantDistribution> {
        if !self.mass.converges() {
            return None;
        }
        let z = self.mass.value;
        let neg_total = self.left_mass;
        let cdf: Vec<(f64, f64)> = self.knots.iter().map(|k| (k.x, ((neg_total + k.m) / z).clamp(0.0, 1.0))).collect();
        Some(InvariantDistribution {
            total_mass: z,
            mass_error: self.mass.error_bound,
            left_mass: neg_total,
            cdf,
            dens: self.segments.iter().map(|s| s.dens / z).collect(),
        })
    }

    pub fn write_scale_csv<W: Write>(&self, w: W, xs: &[f64]) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "h", "h_prime"])?;
        for &x in sorted(xs).iter() {
            wr.write_record([fmt(x), fmt(self.h(x)), fmt(self.h_prime(x))])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_phi_csv<W: Write>(&self, w: W, xs: &[f64]) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "phi"])?;
        for &x in sorted(xs).iter() {
            wr.write_record([fmt(x), fmt(self.phi(x))])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn check_interval(x: f64, a: f64, b: f64) -> Result<(), ScaleError> {
    if !(a < b) {
        return Err(ScaleError::Domain(format!("need a < b, got a={a}, b={b}")));
    }
    if !(x >= a && x <= b) {
        return Err(ScaleError::Domain(format!("x={x} outside [{a}, {b}]")));
    }
    Ok(())
}

/// Normalized `ρ dx` with a piecewise-linear CDF on the scale table.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantDistribution {
    pub total_mass: f64,
    pub mass_error: f64,
    /// `∫_{−∞}^0 ρ`
    pub left_mass: f64,
    /// `(x, F(x))` at the knots
    pub cdf: Vec<(f64, f64)>,
    /// normalized density on each knot segment
    pub dens: Vec<f64>,
}

impl InvariantDistribution {
    pub fn cdf_at(&self, x: f64) -> f64 {
        let n = self.cdf.len();
        if x <= self.cdf[0].0 {
            return self.cdf[0].1;
        }
        if x >= self.cdf[n - 1].0 {
            return self.cdf[n - 1].1;
        }
        let i = self.cdf.partition_point(|p| p.0 <= x) - 1;
        (self.cdf[i].1 + self.dens[i] * (x - self.cdf[i].0)).min(1.0)
    }

    pub fn density_at(&self, x: f64) -> f64 {
        let n = self.cdf.len();
        if x < self.cdf[0].0 || x >= self.cdf[n - 1].0 {
            return 0.0;
        }
        self.dens[self.cdf.partition_point(|p| p.0 <= x) - 1]
    }

    /// Inverse CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|c| c.1 < p);
        if i == 0 {
            return self.cdf[0].0;
        }
        if i >= self.cdf.len() {
            return self.cdf[self.cdf.len() - 1].0;
        }
        let (x0, f0) = self.cdf[i - 1];
        let d = self.dens[i - 1];
        if d > 0.0 {
            (x0 + (p - f0) / d).min(self.cdf[i].0)
        } else {
            x0
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "cdf"])?;
        for &(x, f) in &self.cdf {
            wr.write_record([fmt(x), fmt(f)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Speed density and invariant law: `(2/h′ evaluator, law or None for infinite mass)`.
pub fn speed_and_invariant(sf: &ScaleFunction) -> (impl Fn(f64) -> f64 + '_, Option<InvariantDistribution>) {
    (move |x| sf.speed_density(x), sf.invariant())
}

/// `Φ(±∞)` divergence per side as decided by the series engine: `(left, right)`.
pub fn phi_diverges(sf: &ScaleFunction) -> (Status, Status) {
    (sf.phi_inf[0].status, sf.phi_inf[1].status)
}
