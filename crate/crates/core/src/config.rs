//! Skew configuration: partitions, densities, α/γ conversions and the symmetric density.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::scalar::Scalar;
use crate::tail::{Form, Growth, TailFamily};

pub const CONFIG_SCHEMA: &str = "skewdiff-config/1";

/// Relative tolerance for window/tail agreement at the window edges.
pub const EDGE_TOL: f64 = 1e-12;

/// Number of tail indices probed by the validator.
pub const PROBE: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Negative,
    Positive,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Negative => "negative",
            Side::Positive => "positive",
        }
    }
}

/// Window of explicit values plus closed-form tails.
///
/// On the negative side the inner tail covers `k > window_hi` and the outer
/// tail `k < window_lo`; on the positive side it is the other way round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SequenceSpec<T> {
    pub window_lo: i64,
    pub window_hi: i64,
    #[serde(rename = "values")]
    pub explicit_values: Vec<T>,
    pub inner_tail: TailFamily<T>,
    pub outer_tail: TailFamily<T>,
}

/// Breakpoint positions. The negative side stores magnitudes `-l_k > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Scalar")]
pub struct PartitionSpec<T>(pub SequenceSpec<T>);

#[derive(Debug, Clone, PartialEq)]
pub struct SkewConfig<T> {
    pub name: String,
    pub neg_partition: PartitionSpec<T>,
    pub pos_partition: PartitionSpec<T>,
    pub neg_density: SequenceSpec<T>,
    pub pos_density: SequenceSpec<T>,
}

impl<T: Scalar> SequenceSpec<T> {
    pub fn new(window_lo: i64, values: Vec<T>, inner_tail: TailFamily<T>, outer_tail: TailFamily<T>) -> Self {
        let window_hi = window_lo + values.len() as i64 - 1;
        Self { window_lo, window_hi, explicit_values: values, inner_tail, outer_tail }
    }

    /// Sequence equal to `v` everywhere.
    pub fn constant(v: T) -> Self {
        Self::new(0, vec![v], TailFamily::constant(v), TailFamily::constant(v))
    }

    /// Builds the window `[lo, hi]` by sampling the tails: `inner` for indices on
    /// the inner side of `split` (inclusive), `outer` for the rest.
    pub fn from_tails(
        side: Side,
        lo: i64,
        hi: i64,
        split: i64,
        inner: TailFamily<T>,
        outer: TailFamily<T>,
    ) -> Result<Self, ConfigError> {
        let fi = inner.form()?;
        let fo = outer.form()?;
        let values = (lo..=hi)
            .map(|k| {
                let n = k.unsigned_abs();
                let is_inner = match side {
                    Side::Negative => k >= split,
                    Side::Positive => k <= split,
                };
                if is_inner { fi.eval(n) } else { fo.eval(n) }
            })
            .collect();
        Ok(Self { window_lo: lo, window_hi: hi, explicit_values: values, inner_tail: inner, outer_tail: outer })
    }

    pub fn compile(&self, side: Side) -> Result<Seq<T>, ConfigError> {
        let expected = (self.window_hi - self.window_lo + 1).max(0) as usize;
        if self.explicit_values.len() != expected || expected == 0 {
            return Err(ConfigError::WindowLength {
                lo: self.window_lo,
                hi: self.window_hi,
                got: self.explicit_values.len(),
                expected,
            });
        }
        Ok(Seq {
            side,
            lo: self.window_lo,
            hi: self.window_hi,
            values: self.explicit_values.clone(),
            inner: self.inner_tail.form()?,
            outer: self.outer_tail.form()?,
        })
    }
}

impl<T: Scalar> PartitionSpec<T> {
    pub fn seq(&self) -> &SequenceSpec<T> {
        &self.0
    }
}

/// Compiled sequence with parsed tail forms.
#[derive(Debug, Clone)]
pub struct Seq<T> {
    pub side: Side,
    pub lo: i64,
    pub hi: i64,
    pub values: Vec<T>,
    pub inner: Form<T>,
    pub outer: Form<T>,
}

impl<T: Scalar> Seq<T> {
    pub fn is_inner_index(&self, k: i64) -> bool {
        match self.side {
            Side::Negative => k > self.hi,
            Side::Positive => k < self.lo,
        }
    }

    #[inline]
    pub fn at(&self, k: i64) -> T {
        if k >= self.lo && k <= self.hi {
            self.values[(k - self.lo) as usize]
        } else if self.is_inner_index(k) {
            self.inner.eval(k.unsigned_abs())
        } else {
            self.outer.eval(k.unsigned_abs())
        }
    }

    /// Limit toward the accumulation point (`k → +∞` negative, `k → −∞` positive).
    pub fn inner_limit(&self) -> Option<T> {
        self.inner.limit()
    }
}

/// Compiled configuration.
#[derive(Debug, Clone)]
pub struct Compiled<T> {
    pub neg_bp: Seq<T>,
    pub pos_bp: Seq<T>,
    pub neg_d: Seq<T>,
    pub pos_d: Seq<T>,
}

/// One half-line seen from the origin outward.
///
/// Breakpoint magnitudes are indexed by `t`: `bp(t) = r_t` on the positive side
/// and `bp(t) = -l_{-t}` on the negative side, so `t → −∞` approaches 0 and
/// `t → +∞` runs to infinity. `dens(t)` is the density on the segment between
/// `bp(t)` and `bp(t+1)`.
#[derive(Debug, Clone, Copy)]
pub struct SideView<'a, T> {
    pub side: Side,
    pub bpseq: &'a Seq<T>,
    pub dseq: &'a Seq<T>,
}

impl<'a, T: Scalar> SideView<'a, T> {
    #[inline]
    pub fn bp(&self, t: i64) -> T {
        match self.side {
            Side::Positive => self.bpseq.at(t),
            Side::Negative => self.bpseq.at(-t),
        }
    }

    #[inline]
    pub fn dens(&self, t: i64) -> T {
        match self.side {
            Side::Positive => self.dseq.at(t + 1),
            Side::Negative => self.dseq.at(-t),
        }
    }

    #[inline]
    pub fn sp(&self, t: i64) -> T {
        self.bp(t + 1) - self.bp(t)
    }

    /// Partition index `k` of breakpoint `t`.
    pub fn k_of(&self, t: i64) -> i64 {
        match self.side {
            Side::Positive => t,
            Side::Negative => -t,
        }
    }

    /// `t`-range where breakpoints or densities come from the explicit windows.
    pub fn t_window(&self) -> (i64, i64) {
        let (blo, bhi) = match self.side {
            Side::Positive => (self.bpseq.lo, self.bpseq.hi),
            Side::Negative => (-self.bpseq.hi, -self.bpseq.lo),
        };
        let (dlo, dhi) = match self.side {
            Side::Positive => (self.dseq.lo - 1, self.dseq.hi - 1),
            Side::Negative => (-self.dseq.hi, -self.dseq.lo),
        };
        (blo.min(dlo), bhi.max(dhi))
    }

    pub fn inner_bp_form(&self) -> &Form<T> {
        &self.bpseq.inner
    }

    pub fn outer_bp_form(&self) -> &Form<T> {
        &self.bpseq.outer
    }

    pub fn inner_dens_form(&self) -> &Form<T> {
        &self.dseq.inner
    }

    pub fn outer_dens_form(&self) -> &Form<T> {
        &self.dseq.outer
    }

    pub fn inner_spacing_growth(&self) -> Growth {
        Growth::diff(self.inner_bp_form())
    }

    pub fn outer_spacing_growth(&self) -> Growth {
        Growth::diff(self.outer_bp_form())
    }

    pub fn inner_dens_growth(&self) -> Growth {
        Growth::of(self.inner_dens_form().class())
    }

    pub fn outer_dens_growth(&self) -> Growth {
        Growth::of(self.outer_dens_form().class())
    }

    /// Limit of the density at the origin.
    pub fn dens_limit(&self) -> Option<T> {
        self.dseq.inner_limit()
    }

    /// Locates magnitude `u > 0`.
    pub fn locate(&self, u: T) -> Result<Loc, ConfigError> {
        let (mut lo, mut hi) = self.t_window();
        hi += 1;
        let mut step: i64 = 1;
        while self.bp(lo) > u {
            if lo < -(1i64 << 60) {
                return Ok(Loc::Interior(i64::MIN));
            }
            lo -= step;
            step = step.saturating_mul(2);
        }
        step = 1;
        while !(self.bp(hi) > u) {
            if hi > (1i64 << 60) {
                return Err(ConfigError::Unreachable(u.f64()));
            }
            hi += step;
            step = step.saturating_mul(2);
        }
        // invariant: bp(lo) <= u < bp(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.bp(mid) <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if self.bp(lo) == u {
            Ok(Loc::Breakpoint(lo))
        } else {
            Ok(Loc::Interior(lo))
        }
    }
}

/// Position of a magnitude relative to the breakpoints of one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loc {
    /// Strictly between `bp(t)` and `bp(t+1)`.
    Interior(i64),
    Breakpoint(i64),
}

/// Limit of a density sequence at the accumulation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Limit<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Limit::Finite(v) => Some(v),
            Limit::Infinite => None,
        }
    }
}

impl<T: Scalar> SkewConfig<T> {
    pub fn compile(&self) -> Result<Compiled<T>, ConfigError> {
        Ok(Compiled {
            neg_bp: self.neg_partition.0.compile(Side::Negative)?,
            pos_bp: self.pos_partition.0.compile(Side::Positive)?,
            neg_d: self.neg_density.compile(Side::Negative)?,
            pos_d: self.pos_density.compile(Side::Positive)?,
        })
    }

    /// `(γ, γ̄)` as limits at the origin.
    pub fn limits(&self) -> Result<(Limit<T>, Limit<T>), ConfigError> {
        let c = self.compile()?;
        let lim = |s: &Seq<T>| s.inner_limit().map(Limit::Finite).unwrap_or(Limit::Infinite);
        Ok((lim(&c.neg_d), lim(&c.pos_d)))
    }

    /// `α = γ̄/(γ̄+γ)`, or `1/2` when the limits coincide.
    pub fn effective_alpha(&self) -> Result<T, ConfigError> {
        let (g, gb) = self.limits()?;
        match (g, gb) {
            (Limit::Finite(g), Limit::Finite(gb)) => {
                if g == gb {
                    Ok(T::lit(0.5))
                } else {
                    Ok(gb / (gb + g))
                }
            }
            _ => Err(ConfigError::EffectiveAlphaUndefined("density limit at 0 is infinite".into())),
        }
    }
}

impl<T: Scalar> SequenceSpec<T> {
    pub fn to_f64(&self) -> SequenceSpec<f64> {
        let fam = |f: &TailFamily<T>| TailFamily { kind: f.kind, params: f.params.iter().map(|v| v.f64()).collect() };
        SequenceSpec {
            window_lo: self.window_lo,
            window_hi: self.window_hi,
            explicit_values: self.explicit_values.iter().map(|v| v.f64()).collect(),
            inner_tail: fam(&self.inner_tail),
            outer_tail: fam(&self.outer_tail),
        }
    }
}

impl<T: Scalar> SkewConfig<T> {
    pub fn to_f64(&self) -> SkewConfig<f64> {
        SkewConfig {
            name: self.name.clone(),
            neg_partition: PartitionSpec(self.neg_partition.0.to_f64()),
            pos_partition: PartitionSpec(self.pos_partition.0.to_f64()),
            neg_density: self.neg_density.to_f64(),
            pos_density: self.pos_density.to_f64(),
        }
    }
}

impl<T: Scalar> Compiled<T> {
    pub fn view(&self, side: Side) -> SideView<'_, T> {
        match side {
            Side::Negative => SideView { side, bpseq: &self.neg_bp, dseq: &self.neg_d },
            Side::Positive => SideView { side, bpseq: &self.pos_bp, dseq: &self.pos_d },
        }
    }
}

// ---------------------------------------------------------------- validation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub code: &'static str,
    pub message: String,
    pub index: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, code: &'static str, index: Option<i64>, message: String) {
        self.issues.push(ValidationIssue { code, message, index });
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.issues.iter().any(|i| i.message.contains(needle))
    }
}

fn check_sequence<T: Scalar>(rep: &mut ValidationReport, what: &str, side: Side, s: &SequenceSpec<T>) -> Option<Seq<T>> {
    let seq = match s.compile(side) {
        Ok(seq) => seq,
        Err(e) => {
            rep.push("malformed", None, format!("{what}: {e}"));
            return None;
        }
    };
    if !(seq.lo <= 0 && seq.hi >= 0) {
        rep.push("window", None, format!("{what}: window [{}, {}] must contain 0", seq.lo, seq.hi));
        return None;
    }
    let mut ok = true;
    for (i, v) in seq.values.iter().enumerate() {
        let k = seq.lo + i as i64;
        if !v.is_finite() || !(*v > T::zero()) {
            rep.push("positivity", Some(k), format!("{what}: positivity violated at k={k}"));
            ok = false;
        }
    }
    let tol = T::lit(EDGE_TOL).max(T::epsilon() * T::lit(8.0));
    let (inner_edge, outer_edge) = match side {
        Side::Negative => (seq.hi, seq.lo),
        Side::Positive => (seq.lo, seq.hi),
    };
    for (label, form, edge) in [("inner", &seq.inner, inner_edge), ("outer", &seq.outer, outer_edge)] {
        let fv = form.eval(edge.unsigned_abs());
        let ev = seq.at(edge);
        if !((fv - ev).abs() <= tol * ev.abs()) {
            rep.push(
                "edge-agreement",
                Some(edge),
                format!("{what}: {label} tail gives {fv} at window edge k={edge}, explicit value {ev} (agreement-tolerance failure)"),
            );
            ok = false;
        }
        let dir: i64 = if (label == "inner") == (side == Side::Negative) { 1 } else { -1 };
        // p, q terms need n+s > 0 from the first tail index on; beyond that the form is positive
        // even where the floating value underflows.
        let first = T::from_u64((edge + dir).unsigned_abs()).unwrap();
        let symbolic_ok = (form.p == T::zero() && form.q == T::zero()) || first + form.s > T::zero();
        for j in 1..=PROBE {
            let k = edge + dir * j;
            let v = seq.at(k);
            if !symbolic_ok || v.is_nan() || v.is_infinite() || (v < T::zero()) {
                rep.push("positivity", Some(k), format!("{what}: {label} tail positivity violated at k={k}"));
                ok = false;
                break;
            }
        }
    }
    ok.then_some(seq)
}

/// Checks every configuration invariant; never aborts.
pub fn validate<T: Scalar>(config: &SkewConfig<T>) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let nb = check_sequence(&mut rep, "negative breakpoints", Side::Negative, &config.neg_partition.0);
    let pb = check_sequence(&mut rep, "positive breakpoints", Side::Positive, &config.pos_partition.0);
    let nd = check_sequence(&mut rep, "negative densities", Side::Negative, &config.neg_density);
    let pd = check_sequence(&mut rep, "positive densities", Side::Positive, &config.pos_density);
    let (Some(nb), Some(pb), Some(nd), Some(pd)) = (nb, pb, nd, pd) else {
        return rep;
    };
    let c = Compiled { neg_bp: nb, pos_bp: pb, neg_d: nd, pos_d: pd };
    for side in [Side::Negative, Side::Positive] {
        let v = c.view(side);
        let (tlo, thi) = v.t_window();
        for t in (tlo - PROBE)..(thi + PROBE) {
            let (a, b) = (v.bp(t), v.bp(t + 1));
            if b < T::min_positive_value() && a <= b {
                continue;
            }
            if !(a < b) {
                rep.push(
                    "monotonicity",
                    Some(v.k_of(t)),
                    format!("{} partition not strictly monotone at k={}", side.name(), v.k_of(t)),
                );
                break;
            }
        }
        if v.inner_bp_form().limit() != Some(T::zero()) {
            rep.push("accumulation", None, format!("{} breakpoints do not accumulate at 0", side.name()));
        }
        if v.outer_bp_form().limit().is_some() {
            rep.push("accumulation", None, format!("{} outer breakpoints are bounded", side.name()));
        }
        let mass = v.inner_dens_growth().mul(v.inner_spacing_growth());
        if mass.summable() == Some(false) {
            rep.push("l1loc", None, format!("{} density is not integrable near 0", side.name()));
        }
    }
    rep
}

// ------------------------------------------------------------- α ↔ γ

/// Skew parameters on a window with constant continuation beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AlphaSequence<T> {
    pub window_lo: i64,
    pub values: Vec<T>,
    /// α for indices below the window.
    pub lower_tail: T,
    /// α for indices above the window.
    pub upper_tail: T,
}

impl<T: Scalar> AlphaSequence<T> {
    pub fn window_hi(&self) -> i64 {
        self.window_lo + self.values.len() as i64 - 1
    }

    pub fn at(&self, j: i64) -> T {
        if j < self.window_lo {
            self.lower_tail
        } else if j > self.window_hi() {
            self.upper_tail
        } else {
            self.values[(j - self.window_lo) as usize]
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        let lo = self.window_lo;
        let all = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (lo + i as i64, *v))
            .chain([(lo - 1, self.lower_tail), (self.window_hi() + 1, self.upper_tail)]);
        for (j, v) in all {
            if !(v > T::zero() && v < T::one()) {
                return Err(ConfigError::AlphaDomain { index: j, value: v.f64() });
            }
        }
        Ok(())
    }
}

fn gammas_one_side<T: Scalar>(side: Side, al: &AlphaSequence<T>, g0: T) -> Result<SequenceSpec<T>, ConfigError> {
    al.check()?;
    if !(g0 > T::zero()) || !g0.is_finite() {
        return Err(ConfigError::Invalid(format!("γ_0 must be positive, got {g0}")));
    }
    let lo = al.window_lo.min(-1);
    let hi = (al.window_hi() + 1).max(1);
    let one = T::one();
    let mut vals = vec![T::zero(); (hi - lo + 1) as usize];
    vals[(-lo) as usize] = g0;
    let mut g = g0;
    for k in (lo..=-1).rev() {
        let a = al.at(k);
        g = g * (one - a) / a;
        vals[(k - lo) as usize] = g;
    }
    g = g0;
    for k in 1..=hi {
        let a = al.at(k - 1);
        g = g * a / (one - a);
        vals[(k - lo) as usize] = g;
    }
    let tail = |edge: i64, ratio: T| {
        if ratio == one {
            TailFamily::constant(vals[(edge - lo) as usize])
        } else {
            let n = T::from_u64(edge.unsigned_abs()).unwrap();
            TailFamily::geometric(vals[(edge - lo) as usize] / ratio.powf(n), ratio)
        }
    };
    let lower = tail(lo, (one - al.lower_tail) / al.lower_tail);
    let upper = tail(hi, al.upper_tail / (one - al.upper_tail));
    let (inner, outer) = match side {
        Side::Negative => (upper, lower),
        Side::Positive => (lower, upper),
    };
    Ok(SequenceSpec { window_lo: lo, window_hi: hi, explicit_values: vals, inner_tail: inner, outer_tail: outer })
}

/// Densities from skew parameters by telescoping products anchored at `γ_0`, `γ̄_0`.
pub fn gammas_from_alphas<T: Scalar>(
    alphas_neg: &AlphaSequence<T>,
    alphas_pos: &AlphaSequence<T>,
    gamma0: T,
    gammabar0: T,
) -> Result<(SequenceSpec<T>, SequenceSpec<T>), ConfigError> {
    Ok((gammas_one_side(Side::Negative, alphas_neg, gamma0)?, gammas_one_side(Side::Positive, alphas_pos, gammabar0)?))
}

#[derive(Debug, Clone)]
pub struct AlphaProfile<T> {
    /// `α_k = γ_{k+1}/(γ_{k+1}+γ_k)`
    pub neg: AlphaSequence<T>,
    /// `ᾱ_k = γ̄_{k+1}/(γ̄_{k+1}+γ̄_k)`
    pub pos: AlphaSequence<T>,
    pub effective: Result<T, ConfigError>,
}

fn alphas_one_side<T: Scalar>(seq: &Seq<T>) -> AlphaSequence<T> {
    let lo = seq.lo - 1;
    let values = (lo..=seq.hi).map(|k| {
        let (a, b) = (seq.at(k + 1), seq.at(k));
        a / (a + b)
    });
    let values: Vec<T> = values.collect();
    let one = T::one();
    let ratio_limit = |f: &Form<T>| {
        let c = f.class();
        if c.a != 1.0 {
            Some(f.a)
        } else {
            None
        }
    };
    // upper direction: γ_{k+1}/γ_k → a when the upper tail grows geometrically
    let (upper_form, lower_form) = match seq.side {
        Side::Negative => (&seq.inner, &seq.outer),
        Side::Positive => (&seq.outer, &seq.inner),
    };
    let upper = ratio_limit(upper_form).map(|a| a / (one + a)).unwrap_or(T::lit(0.5));
    let lower = ratio_limit(lower_form).map(|a| one / (one + a)).unwrap_or(T::lit(0.5));
    AlphaSequence { window_lo: lo, values, lower_tail: lower, upper_tail: upper }
}

/// Per-index skew parameters and the effective skew at the origin.
pub fn alphas_from_gammas<T: Scalar>(config: &SkewConfig<T>) -> Result<AlphaProfile<T>, ConfigError> {
    let c = config.compile()?;
    Ok(AlphaProfile {
        neg: alphas_one_side(&c.neg_d),
        pos: alphas_one_side(&c.pos_d),
        effective: config.effective_alpha(),
    })
}

// ------------------------------------------------------------- ρ̃ and Revuz factor

/// Symmetric pointwise version of ρ.
pub fn rho_eval<T: Scalar>(config: &SkewConfig<T>, x: T) -> Result<T, ConfigError> {
    let c = config.compile()?;
    rho_eval_compiled(config, &c, x)
}

pub fn rho_eval_compiled<T: Scalar>(config: &SkewConfig<T>, c: &Compiled<T>, x: T) -> Result<T, ConfigError> {
    let half = T::lit(0.5);
    if x == T::zero() {
        let (g, gb) = config.limits()?;
        return match (g, gb) {
            (Limit::Finite(g), Limit::Finite(gb)) => Ok(half * (g + gb)),
            _ => Err(ConfigError::UndefinedAtOrigin("density limit at 0 does not exist".into())),
        };
    }
    let side = if x < T::zero() { Side::Negative } else { Side::Positive };
    let v = c.view(side);
    match v.locate(x.abs())? {
        Loc::Interior(t) => Ok(v.dens(t)),
        Loc::Breakpoint(t) => Ok(half * (v.dens(t) + v.dens(t - 1))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakpointRef {
    /// `l_k`
    Left(i64),
    /// `r_k`
    Right(i64),
    Origin,
}

/// Factor converting the symmetric semimartingale local time into the Revuz-normalized one.
pub fn revuz_factor<T: Scalar>(config: &SkewConfig<T>, at: BreakpointRef) -> Result<T, ConfigError> {
    let c = config.compile()?;
    let two = T::lit(2.0);
    let (sum, label) = match at {
        BreakpointRef::Left(k) => (c.neg_d.at(k + 1) + c.neg_d.at(k), format!("l_{k}")),
        BreakpointRef::Right(k) => (c.pos_d.at(k + 1) + c.pos_d.at(k), format!("r_{k}")),
        BreakpointRef::Origin => match config.limits()? {
            (Limit::Finite(g), Limit::Finite(gb)) => (g + gb, "0".to_string()),
            _ => return Err(ConfigError::DegeneratePoint("0 (density limit infinite)".into())),
        },
    };
    if !(sum > T::zero()) || !sum.is_finite() {
        return Err(ConfigError::DegeneratePoint(label));
    }
    Ok(two / sum)
}

// ------------------------------------------------------------- file format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct SideDoc<T> {
    breakpoints: SequenceSpec<T>,
    gammas: SequenceSpec<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ConfigDoc<T> {
    schema: String,
    name: String,
    negative: SideDoc<T>,
    positive: SideDoc<T>,
}

impl<T: Scalar> SkewConfig<T> {
    pub fn to_json(&self) -> String {
        let doc = ConfigDoc {
            schema: CONFIG_SCHEMA.to_string(),
            name: self.name.clone(),
            negative: SideDoc { breakpoints: self.neg_partition.0.clone(), gammas: self.neg_density.clone() },
            positive: SideDoc { breakpoints: self.pos_partition.0.clone(), gammas: self.pos_density.clone() },
        };
        serde_json::to_string_pretty(&doc).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDoc<T> = serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse { line: e.line(), column: e.column(), msg: e.to_string() })?;
        if doc.schema != CONFIG_SCHEMA {
            return Err(ConfigError::Parse {
                line: 1,
                column: 1,
                msg: format!("schema `{}` is not `{CONFIG_SCHEMA}`", doc.schema),
            });
        }
        Ok(Self {
            name: doc.name,
            neg_partition: PartitionSpec(doc.negative.breakpoints),
            pos_partition: PartitionSpec(doc.positive.breakpoints),
            neg_density: doc.negative.gammas,
            pos_density: doc.positive.gammas,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn brownian_is_valid_and_flat() {
        let c = fixtures::brownian::<f64>();
        assert!(validate(&c).is_valid(), "{:?}", validate(&c));
        for x in [-3.7, -1.0, -0.25, 0.0, 1e-9, 0.5, 2.0, 17.0] {
            assert_eq!(rho_eval(&c, x).unwrap(), 1.0);
        }
        assert_eq!(revuz_factor(&c, BreakpointRef::Origin).unwrap(), 1.0);
        assert_eq!(revuz_factor(&c, BreakpointRef::Left(-4)).unwrap(), 1.0);
    }

    #[test]
    fn zero_density_is_reported_with_index() {
        let mut c = fixtures::brownian::<f64>();
        c.neg_density = SequenceSpec::new(-5, vec![1.0; 11], TailFamily::constant(1.0), TailFamily::constant(1.0));
        c.neg_density.explicit_values[8] = 0.0;
        let rep = validate(&c);
        assert!(rep.contains("positivity violated at k=3"), "{rep:?}");
    }

    #[test]
    fn edge_mismatch_is_reported() {
        let mut c = fixtures::brownian::<f64>();
        // l_k = -1/k on the inner tail
        let mut s = SequenceSpec::from_tails(
            Side::Negative,
            -2,
            4,
            1,
            TailFamily::power(1.0, -1.0),
            TailFamily::shifted_power(1.0, 1.0, 2.0),
        )
        .unwrap();
        c.neg_partition = PartitionSpec(s.clone());
        assert!(validate(&c).is_valid(), "{:?}", validate(&c));
        let last = s.explicit_values.len() - 1;
        s.explicit_values[last] *= 1.1;
        c.neg_partition = PartitionSpec(s);
        assert!(validate(&c).contains("agreement-tolerance failure"));
    }

    #[test]
    fn skewbm_rho_and_revuz_at_origin() {
        let c = fixtures::skew_bm::<f64>(0.7);
        assert!((rho_eval(&c, 0.0).unwrap() - 5.0 / 7.0).abs() < 1e-15);
        assert!((revuz_factor(&c, BreakpointRef::Origin).unwrap() - 7.0 / 5.0).abs() < 1e-14);
        assert!((c.effective_alpha().unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn breakpoint_midpoint_average() {
        let mut c = fixtures::brownian::<f64>();
        let mut g = vec![1.0; 11];
        g[10] = 3.0; // γ_5
        c.neg_density = SequenceSpec::new(-5, g, TailFamily::constant(3.0), TailFamily::constant(1.0));
        let l4 = -c.neg_partition.0.compile(Side::Negative).unwrap().at(4);
        assert_eq!(rho_eval(&c, l4).unwrap(), 2.0);
        assert_eq!(revuz_factor(&c, BreakpointRef::Left(4)).unwrap(), 0.5);
    }

    #[test]
    fn alpha_gamma_examples() {
        let half = AlphaSequence { window_lo: -3, values: vec![0.5f64; 7], lower_tail: 0.5, upper_tail: 0.5 };
        let (gn, gp) = gammas_from_alphas(&half, &half, 1.0, 1.0).unwrap();
        assert!(gn.explicit_values.iter().chain(&gp.explicit_values).all(|v| *v == 1.0));
        let mut a = half.clone();
        a.values[3] = 2.0 / 3.0; // α_0
        let (gn, _) = gammas_from_alphas(&a, &half, 1.0, 1.0).unwrap();
        let s = gn.compile(Side::Negative).unwrap();
        assert!((s.at(1) - 2.0).abs() < 1e-15);
        let bad = AlphaSequence { window_lo: 0, values: vec![1.0], lower_tail: 0.5, upper_tail: 0.5 };
        assert!(matches!(gammas_from_alphas(&bad, &half, 1.0, 1.0), Err(ConfigError::AlphaDomain { .. })));
    }

    #[test]
    fn json_round_trip_and_line_diagnostics() {
        let c = fixtures::counterexample::<f64>(2.0);
        let back = SkewConfig::<f64>::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let broken = c.to_json().replacen("\"window_lo\"", "\"window_lo\" 3", 1);
        match SkewConfig::<f64>::from_json(&broken) {
            Err(ConfigError::Parse { line, .. }) => assert!(line > 1),
            other => panic!("{other:?}"),
        }
    }
}
