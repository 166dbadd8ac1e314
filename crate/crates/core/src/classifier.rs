//! Series criteria for the semimartingale property, scale regularity,
//! conservativeness and recurrence.

use serde::Serialize;

use crate::config::{Compiled, Limit, Side, SideView, SkewConfig};
use crate::error::ClassifyError;
use crate::scalar::Scalar;
use crate::series::{evaluate, sum_verdicts, Budget, Series, SeriesVerdict, Status};
use crate::tail::{Form, Growth};

pub const REPORT_SCHEMA: &str = "skewdiff-report/1";

/// Admissible starting indices for the conservativeness double sums.
pub const N0_CHOICES: [i64; 3] = [1, 2, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    pub fn is_true(self) -> bool {
        self == Tri::True
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub n0: i64,
    pub budget: Budget,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { n0: 1, budget: Budget::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub side: Option<Side>,
    #[serde(flatten)]
    pub verdict: SeriesVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub holds: Tri,
    pub evidence: Vec<Evidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    fn note(mut self, msg: impl Into<String>) -> Self {
        let msg = msg.into();
        self.note = Some(match self.note.take() {
            Some(old) => format!("{old}; {msg}"),
            None => msg,
        });
        self
    }

    pub fn conclusive(&self) -> bool {
        self.holds != Tri::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub name: String,
    pub s0: Verdict,
    pub s1: Verdict,
    pub lgloc: Verdict,
    pub h1: Verdict,
    pub conservative: Verdict,
    pub recurrent: Verdict,
    pub positive_recurrent: Verdict,
    pub effective_alpha: Option<f64>,
    /// `(γ, γ̄)`
    pub limits: Option<(f64, f64)>,
    pub n0: i64,
}

impl ClassificationReport {
    /// True when every tri-state verdict other than the H1 heuristic is decided.
    pub fn all_conclusive(&self) -> bool {
        [&self.s0, &self.s1, &self.lgloc, &self.conservative, &self.recurrent, &self.positive_recurrent]
            .iter()
            .all(|v| v.conclusive())
    }

    pub fn verdicts(&self) -> [(&'static str, &Verdict); 7] {
        [
            ("s0", &self.s0),
            ("s1", &self.s1),
            ("lgloc", &self.lgloc),
            ("h1", &self.h1),
            ("conservative", &self.conservative),
            ("recurrent", &self.recurrent),
            ("positive_recurrent", &self.positive_recurrent),
        ]
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            condition: &'a str,
            side: Option<Side>,
            holds: Tri,
            status: Option<Status>,
            value: Option<f64>,
            error_bound: Option<f64>,
            k_max: Option<u64>,
            rule: Option<&'a str>,
            note: Option<&'a str>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: &'a str,
            name: &'a str,
            n0: i64,
            effective_alpha: Option<f64>,
            limits: Option<(f64, f64)>,
            records: Vec<Record<'a>>,
        }
        let mut records = Vec::new();
        for (cond, v) in self.verdicts() {
            let note = v.note.as_deref();
            if v.evidence.is_empty() {
                records.push(Record {
                    condition: cond,
                    side: None,
                    holds: v.holds,
                    status: None,
                    value: None,
                    error_bound: None,
                    k_max: None,
                    rule: None,
                    note,
                });
            }
            for e in &v.evidence {
                let sv = &e.verdict;
                records.push(Record {
                    condition: cond,
                    side: e.side,
                    holds: v.holds,
                    status: Some(sv.status),
                    value: sv.value.is_finite().then_some(sv.value),
                    error_bound: sv.error_bound.is_finite().then_some(sv.error_bound),
                    k_max: Some(sv.k_max_used),
                    rule: Some(&sv.rule),
                    note,
                });
            }
        }
        let doc = Doc {
            schema: REPORT_SCHEMA,
            name: &self.name,
            n0: self.n0,
            effective_alpha: self.effective_alpha,
            limits: self.limits,
            records,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}

// ---------------------------------------------------------------- per-side series

fn run(term: &mut dyn FnMut(u64) -> f64, from: u64, tail: Growth, exact: Option<f64>, b: &Budget) -> SeriesVerdict {
    let mut s = Series { term, symbolic_from: from, tail, tail_exact: exact };
    evaluate(&mut s, b)
}

/// First inward step `n` (with `t = -1-n`) from which both densities of the term are tail values.
fn inward_start<T: Scalar>(v: &SideView<'_, T>) -> u64 {
    (1 - v.t_window().0).max(0) as u64
}

/// `∑_{t≤-1} |f(dens(t+1)) − f(dens(t))|` with `f` the identity or the reciprocal.
fn variation_side<T: Scalar>(v: &SideView<'_, T>, recip: bool, b: &Budget) -> SeriesVerdict {
    let f = |t: i64| {
        let d = v.dens(t).f64();
        if recip {
            1.0 / d
        } else {
            d
        }
    };
    let form: Form<T> = if recip { v.inner_dens_form().recip() } else { *v.inner_dens_form() };
    let start = inward_start(v);
    let exact = if form.globally_monotone() {
        form.limit().map(|l| (l.f64() - f(-(start as i64))).abs())
    } else {
        None
    };
    let mut term = |n: u64| {
        let t = -1 - n as i64;
        (f(t + 1) - f(t)).abs()
    };
    run(&mut term, start, Growth::diff(&form), exact, b)
}

fn lgloc_side<T: Scalar>(v: &SideView<'_, T>, b: &Budget) -> SeriesVerdict {
    let form = v.inner_dens_form();
    let growth = Growth::diff(form).div(Growth::of(form.class()));
    let mut term = |n: u64| {
        let t = -1 - n as i64;
        let (x, y) = (v.dens(t + 1).f64(), v.dens(t).f64());
        (x - y).abs() / (x + y)
    };
    run(&mut term, inward_start(v), growth, None, b)
}

fn spacing_f64<T: Scalar>(v: &SideView<'_, T>, t: i64) -> f64 {
    v.sp(t).f64()
}

/// `∑_t g(t)` over the whole half-line, split at the inner edge of the windows.
fn whole_line<T: Scalar>(
    v: &SideView<'_, T>,
    g: &dyn Fn(i64) -> f64,
    inner: Growth,
    outer: Growth,
    b: &Budget,
) -> SeriesVerdict {
    let (tlo, thi) = v.t_window();
    let mut ti = |n: u64| g(tlo - 1 - n as i64);
    let inn = run(&mut ti, 0, inner, None, b);
    let mut to = |n: u64| g(tlo + n as i64);
    let out = run(&mut to, (thi - tlo + 2) as u64, outer, None, b);
    sum_verdicts(&inn, &out)
}

/// `∑_t sp(t)/dens(t)`: the increment of the scale function over the half-line, up to a constant.
pub fn recurrence_side<T: Scalar>(v: &SideView<'_, T>, b: &Budget) -> SeriesVerdict {
    let g = |t: i64| spacing_f64(v, t) / v.dens(t).f64();
    let inner = v.inner_spacing_growth().div(v.inner_dens_growth());
    let outer = v.outer_spacing_growth().div(v.outer_dens_growth());
    whole_line(v, &g, inner, outer, b)
}

/// `∑_t dens(t)·sp(t)`: the mass of ρ on the half-line.
pub fn mass_side<T: Scalar>(v: &SideView<'_, T>, b: &Budget) -> SeriesVerdict {
    let g = |t: i64| spacing_f64(v, t) * v.dens(t).f64();
    let inner = v.inner_spacing_growth().mul(v.inner_dens_growth());
    let outer = v.outer_spacing_growth().mul(v.outer_dens_growth());
    whole_line(v, &g, inner, outer, b)
}

/// Double sum of the conservativeness criterion from `t0` outward. `Diverges` means
/// the boundary is not reached (conservative side).
pub fn feller_side<T: Scalar>(v: &SideView<'_, T>, t0: i64, b: &Budget) -> SeriesVerdict {
    let sp_g = v.outer_spacing_growth();
    let d_g = v.outer_dens_growth();
    let mass_g = sp_g.mul(d_g).partial_sums();
    let vbar_g = sp_g.max(mass_g.div(d_g));
    let term_g = sp_g.div(d_g).mul(mass_g);
    let mut acc = 0.0;
    let mut term = |n: u64| {
        let t = t0 + n as i64;
        let (sp, d) = (spacing_f64(v, t), v.dens(t).f64());
        acc += d * sp;
        sp / d * acc
    };
    let (_, thi) = v.t_window();
    let from = (thi + 1 - t0).max(0) as u64;
    let evidence = |term: &mut dyn FnMut(u64) -> f64, rule: &str| {
        let mut v = run(term, from, Growth::Opaque, None, &Budget { k_max: b.k_sum.max(1 << 10), ..*b });
        v.status = Status::Diverges;
        v.error_bound = f64::INFINITY;
        v.rule = rule.to_string();
        v
    };
    if sp_g.bounded_below() == Some(true) {
        return evidence(&mut term, "R1:spacing-bounded-below");
    }
    if vbar_g.bounded_below() == Some(true) {
        return evidence(&mut term, "R1:v-bounded-below");
    }
    let mut v = run(&mut term, from, term_g, None, b);
    if matches!(term_g, Growth::Class(_)) {
        v.rule = format!("R2:{}", v.rule);
    } else {
        v.rule = format!("R3:{}", v.rule);
    }
    v
}

/// `t` at which the double sums start for a given `n_0`.
pub fn feller_start(side: Side, n0: i64) -> i64 {
    match side {
        Side::Positive => n0,
        Side::Negative => n0 - 1,
    }
}

// ---------------------------------------------------------------- public checks

fn compiled<T: Scalar>(config: &SkewConfig<T>) -> Compiled<T> {
    config.compile().expect("classifier requires a validated configuration")
}

fn per_side<T: Scalar>(
    c: &Compiled<T>,
    f: impl Fn(&SideView<'_, T>) -> SeriesVerdict,
) -> (SeriesVerdict, SeriesVerdict) {
    (f(&c.view(Side::Negative)), f(&c.view(Side::Positive)))
}

pub fn check_s0<T: Scalar>(config: &SkewConfig<T>, b: &Budget) -> SeriesVerdict {
    let (n, p) = per_side(&compiled(config), |v| variation_side(v, false, b));
    sum_verdicts(&n, &p)
}

pub fn check_s1<T: Scalar>(config: &SkewConfig<T>, b: &Budget) -> SeriesVerdict {
    let (n, p) = per_side(&compiled(config), |v| variation_side(v, true, b));
    sum_verdicts(&n, &p)
}

pub fn check_lgloc<T: Scalar>(config: &SkewConfig<T>, b: &Budget) -> SeriesVerdict {
    let (n, p) = per_side(&compiled(config), |v| lgloc_side(v, b));
    sum_verdicts(&n, &p)
}

/// Sufficient-condition heuristic: both density limits exist and are positive.
pub fn check_h1<T: Scalar>(config: &SkewConfig<T>) -> Verdict {
    let v = Verdict { holds: Tri::Unknown, evidence: vec![], note: None };
    match config.limits() {
        Ok((Limit::Finite(g), Limit::Finite(gb))) if g > T::zero() && gb > T::zero() => {
            Verdict { holds: Tri::True, ..v }
        }
        Ok((Limit::Finite(g), Limit::Finite(gb))) if g == T::zero() || gb == T::zero() => v.note(
            "limits are zero; positivity of the capacity of {0} (for the Bessel fixtures, iff δ∈(0,2)) is not decided by this heuristic",
        ),
        Ok(_) => v.note("a density limit at 0 is infinite; not decided by this heuristic"),
        Err(e) => v.note(e.to_string()),
    }
}

fn require_scale<T: Scalar>(config: &SkewConfig<T>, b: &Budget) -> Result<(), ClassifyError> {
    let s0 = check_s0(config, b);
    let s1 = check_s1(config, b);
    if s0.converges() && s1.converges() {
        Ok(())
    } else {
        Err(ClassifyError::NotApplicable(format!("S0 {:?}, S1 {:?}", s0.status, s1.status)))
    }
}

fn conservative_sides<T: Scalar>(c: &Compiled<T>, opts: &ClassifyOptions) -> (SeriesVerdict, SeriesVerdict) {
    let left = feller_side(&c.view(Side::Negative), feller_start(Side::Negative, opts.n0), &opts.budget);
    let right = feller_side(&c.view(Side::Positive), feller_start(Side::Positive, opts.n0), &opts.budget);
    (right, left)
}

/// `(right, left)` verdicts; `Diverges` on a side means that boundary is inaccessible.
pub fn check_conservative<T: Scalar>(
    config: &SkewConfig<T>,
    opts: &ClassifyOptions,
) -> Result<(SeriesVerdict, SeriesVerdict), ClassifyError> {
    require_scale(config, &opts.budget)?;
    Ok(conservative_sides(&compiled(config), opts))
}

/// `(left, right)` series of `∫1/ρ`; `Diverges` on both sides means recurrent.
pub fn check_recurrent<T: Scalar>(
    config: &SkewConfig<T>,
    b: &Budget,
) -> Result<(SeriesVerdict, SeriesVerdict), ClassifyError> {
    require_scale(config, b)?;
    Ok(per_side(&compiled(config), |v| recurrence_side(v, b)))
}

/// Series of `∫ρ`; on `Converges` its value is the total mass.
pub fn check_positive_recurrent<T: Scalar>(config: &SkewConfig<T>, b: &Budget) -> Result<SeriesVerdict, ClassifyError> {
    let (l, r) = check_recurrent(config, b)?;
    if !(l.diverges() && r.diverges()) {
        return Err(ClassifyError::NotRecurrent(format!("left {:?}, right {:?}", l.status, r.status)));
    }
    let (n, p) = per_side(&compiled(config), |v| mass_side(v, b));
    Ok(sum_verdicts(&n, &p))
}

fn tri_converges(v: &SeriesVerdict) -> Tri {
    match v.status {
        Status::Converges => Tri::True,
        Status::Diverges => Tri::False,
        Status::Inconclusive => Tri::Unknown,
    }
}

/// Both sides must diverge for the property to hold.
fn tri_both_diverge(a: &SeriesVerdict, b: &SeriesVerdict) -> Tri {
    if a.converges() || b.converges() {
        Tri::False
    } else if a.diverges() && b.diverges() {
        Tri::True
    } else {
        Tri::Unknown
    }
}

fn sided(n: SeriesVerdict, p: SeriesVerdict) -> Vec<Evidence> {
    vec![Evidence { side: Some(Side::Negative), verdict: n }, Evidence { side: Some(Side::Positive), verdict: p }]
}

pub fn classify_all<T: Scalar>(config: &SkewConfig<T>, opts: &ClassifyOptions) -> ClassificationReport {
    let c = compiled(config);
    let b = &opts.budget;
    let verdict_sum = |(n, p): (SeriesVerdict, SeriesVerdict)| {
        let total = sum_verdicts(&n, &p);
        Verdict { holds: tri_converges(&total), evidence: sided(n, p), note: None }
    };
    let s0 = verdict_sum(per_side(&c, |v| variation_side(v, false, b)));
    let s1 = verdict_sum(per_side(&c, |v| variation_side(v, true, b)));
    let lgloc = verdict_sum(per_side(&c, |v| lgloc_side(v, b)));
    let h1 = check_h1(config);

    let standing = s0.holds.is_true() && s1.holds.is_true();
    let outside = "evaluated outside S0∧S1, where the criteria are not proved";

    let (right, left) = conservative_sides(&c, opts);
    let mut conservative = Verdict {
        holds: tri_both_diverge(&left, &right),
        evidence: sided(left, right),
        note: None,
    };
    let (l, r) = per_side(&c, |v| recurrence_side(v, b));
    let mut recurrent = Verdict { holds: tri_both_diverge(&l, &r), evidence: sided(l, r), note: None };
    let (n, p) = per_side(&c, |v| mass_side(v, b));
    let mass = sum_verdicts(&n, &p);
    let mut positive_recurrent = Verdict { holds: tri_converges(&mass), evidence: sided(n, p), note: None };

    match recurrent.holds {
        Tri::False => {
            positive_recurrent.holds = Tri::False;
            positive_recurrent = positive_recurrent.note("not recurrent");
        }
        Tri::Unknown if positive_recurrent.holds == Tri::True => {
            positive_recurrent.holds = Tri::Unknown;
            positive_recurrent = positive_recurrent.note("finite mass, recurrence undecided");
        }
        _ => {}
    }
    if recurrent.holds == Tri::True {
        match conservative.holds {
            Tri::Unknown => {
                conservative.holds = Tri::True;
                conservative = conservative.note("implied-by-recurrence");
            }
            Tri::False => {
                conservative.holds = Tri::Unknown;
                recurrent.holds = Tri::Unknown;
                conservative = conservative.note("contradicts the recurrence verdict");
            }
            Tri::True => {}
        }
    }
    if !standing {
        conservative = conservative.note(outside);
        recurrent = recurrent.note(outside);
        positive_recurrent = positive_recurrent.note(outside);
    }

    let limits = match config.limits() {
        Ok((Limit::Finite(g), Limit::Finite(gb))) => Some((g.f64(), gb.f64())),
        _ => None,
    };
    ClassificationReport {
        name: config.name.clone(),
        s0,
        s1,
        lgloc,
        h1,
        conservative,
        recurrent,
        positive_recurrent,
        effective_alpha: config.effective_alpha().ok().map(|a| a.f64()),
        limits,
        n0: opts.n0,
    }
}
