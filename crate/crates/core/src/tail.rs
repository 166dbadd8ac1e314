//! Closed-form tail families and their asymptotic growth classes.
//!
//! Every family is a special case of the product form
//! `c · a^n · (n+s)^p · H(n+s)^q` in the index magnitude `n = |k|`,
//! where `H` is the (real-extended) harmonic number. The growth class
//! `(a, p, q)` of a product form drives all symbolic series rules.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// `[value]`
    Constant,
    /// `[c, p]` or `[c, p, s]`: `c·(|k|+s)^p`
    Power,
    /// `[c, a]`: `c·a^|k|`
    Geometric,
    /// `[c]` or `[c, s]`: `c·H(|k|+s)`
    HarmonicPartialSum,
    /// `[c, a, p, q, s]`: `c·a^|k|·(|k|+s)^p·H(|k|+s)^q`
    Product,
}

impl TailKind {
    pub fn name(self) -> &'static str {
        match self {
            TailKind::Constant => "constant",
            TailKind::Power => "power",
            TailKind::Geometric => "geometric",
            TailKind::HarmonicPartialSum => "harmonic_partial_sum",
            TailKind::Product => "product",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TailFamily<T> {
    pub kind: TailKind,
    pub params: Vec<T>,
}

/// Canonical product form of a tail family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Form<T> {
    pub c: T,
    pub a: T,
    pub p: T,
    pub q: T,
    pub s: T,
}

impl<T: Scalar> TailFamily<T> {
    pub fn constant(v: T) -> Self {
        Self { kind: TailKind::Constant, params: vec![v] }
    }

    pub fn power(c: T, p: T) -> Self {
        Self { kind: TailKind::Power, params: vec![c, p] }
    }

    pub fn shifted_power(c: T, p: T, s: T) -> Self {
        Self { kind: TailKind::Power, params: vec![c, p, s] }
    }

    pub fn geometric(c: T, a: T) -> Self {
        Self { kind: TailKind::Geometric, params: vec![c, a] }
    }

    pub fn harmonic(c: T) -> Self {
        Self { kind: TailKind::HarmonicPartialSum, params: vec![c] }
    }

    pub fn product(f: Form<T>) -> Self {
        Self { kind: TailKind::Product, params: vec![f.c, f.a, f.p, f.q, f.s] }
    }

    fn bad(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::TailFamily { kind: self.kind.name().to_string(), msg: msg.into() }
    }

    /// Parses the parameters into the product form, checking the family invariants.
    pub fn form(&self) -> Result<Form<T>, ConfigError> {
        let z = T::zero();
        let one = T::one();
        let p = &self.params;
        let arity = |ok: &[usize]| {
            if ok.contains(&p.len()) {
                Ok(())
            } else {
                Err(self.bad(format!("expected {:?} parameters, got {}", ok, p.len())))
            }
        };
        let f = match self.kind {
            TailKind::Constant => {
                arity(&[1])?;
                Form { c: p[0], a: one, p: z, q: z, s: z }
            }
            TailKind::Power => {
                arity(&[2, 3])?;
                Form { c: p[0], a: one, p: p[1], q: z, s: p.get(2).copied().unwrap_or(z) }
            }
            TailKind::Geometric => {
                arity(&[2])?;
                Form { c: p[0], a: p[1], p: z, q: z, s: z }
            }
            TailKind::HarmonicPartialSum => {
                arity(&[1, 2])?;
                Form { c: p[0], a: one, p: z, q: one, s: p.get(1).copied().unwrap_or(z) }
            }
            TailKind::Product => {
                arity(&[5])?;
                Form { c: p[0], a: p[1], p: p[2], q: p[3], s: p[4] }
            }
        };
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(self.bad("non-finite parameter"));
        }
        if f.c <= z {
            return Err(self.bad("scale must be > 0"));
        }
        if f.a <= z {
            return Err(self.bad("ratio must be > 0"));
        }
        Ok(f)
    }

    /// Value at index magnitude `n`.
    pub fn eval(&self, n: u64) -> Result<T, ConfigError> {
        Ok(self.form()?.eval(n))
    }
}

impl<T: Scalar> Form<T> {
    pub fn eval(&self, n: u64) -> T {
        self.eval_real(T::from_u64(n).unwrap_or_else(T::infinity))
    }

    pub fn eval_real(&self, n: T) -> T {
        let z = T::zero();
        let m = n + self.s;
        let mut log = n * self.a.ln();
        if self.p != z {
            if m <= z {
                return T::nan();
            }
            log = log + self.p * m.ln();
        }
        if self.q != z {
            let h = harmonic(m);
            if !(h > z) {
                return T::nan();
            }
            log = log + self.q * h.ln();
        }
        self.c * log.exp()
    }

    pub fn is_constant(&self) -> bool {
        self.a == T::one() && self.p == T::zero() && self.q == T::zero()
    }

    pub fn class(&self) -> Asym {
        Asym { a: self.a.f64(), p: self.p.f64(), q: self.q.f64() }
    }

    pub fn recip(&self) -> Self {
        Form { c: self.c.recip(), a: self.a.recip(), p: -self.p, q: -self.q, s: self.s }
    }

    /// `k · f^e`
    pub fn pow_scaled(&self, k: T, e: T) -> Self {
        Form { c: k * self.c.powf(e), a: self.a.powf(e), p: self.p * e, q: self.q * e, s: self.s }
    }

    /// Re-expresses `n ↦ f(n + d)` in product form.
    pub fn shift(&self, d: i64) -> Self {
        let d = T::from_i64(d).unwrap();
        Form { c: self.c * self.a.powf(d), a: self.a, p: self.p, q: self.q, s: self.s + d }
    }

    /// Limit as `n → ∞`; `None` when infinite.
    pub fn limit(&self) -> Option<T> {
        match self.class().direction() {
            Ordering::Less => Some(T::zero()),
            Ordering::Equal => Some(self.c),
            Ordering::Greater => None,
        }
    }

    /// True when `n ↦ f(n)` is monotone for all `n ≥ 1 - s`.
    pub fn globally_monotone(&self) -> bool {
        let z = T::zero();
        let sgn = |v: T| if v > z { 1 } else if v < z { -1 } else { 0 };
        let signs = [sgn(self.a.ln()), sgn(self.p), sgn(self.q)];
        !(signs.contains(&1) && signs.contains(&-1))
    }
}

/// Real-extended harmonic number `H(x) = ψ(x+1) + γ_E`, exact at integers.
pub fn harmonic<T: Scalar>(x: T) -> T {
    let z = T::zero();
    let one = T::one();
    if x == z {
        return z;
    }
    if x < z && x <= -one {
        return T::nan();
    }
    if x.fract() == z && x <= T::lit(64.0) {
        let mut acc = z;
        let mut j = one;
        while j <= x {
            acc = acc + j.recip();
            j = j + one;
        }
        return acc;
    }
    let mut acc = z;
    let mut y = x;
    while y < T::lit(32.0) {
        y = y + one;
        acc = acc - y.recip();
    }
    let y2 = (y * y).recip();
    let series = y.ln() + T::lit(0.577_215_664_901_532_9) + (T::lit(2.0) * y).recip()
        - y2 * (T::lit(1.0 / 12.0) - y2 * (T::lit(1.0 / 120.0) - y2 * T::lit(1.0 / 252.0)));
    acc + series
}

/// Growth class `a^n · n^p · (ln n)^q` with a positive leading coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asym {
    pub a: f64,
    pub p: f64,
    pub q: f64,
}

/// Asymptotic description of a nonnegative term sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    /// Terms are eventually exactly zero.
    Zero,
    Class(Asym),
    /// Outside the closed class algebra; only numeric evidence applies.
    Opaque,
}

impl Asym {
    pub const ONE: Asym = Asym { a: 1.0, p: 0.0, q: 0.0 };

    /// Snaps rounding noise from class arithmetic onto the exact boundary cases.
    pub fn canon(self) -> Self {
        let snap = |v: f64, tol: f64| if (v - v.round()).abs() < tol { v.round() } else { v };
        Asym { a: if (self.a - 1.0).abs() < 1e-12 { 1.0 } else { self.a }, p: snap(self.p, 1e-9), q: snap(self.q, 1e-9) }
    }

    fn key(&self) -> (f64, f64, f64) {
        (self.a.ln(), self.p, self.q)
    }

    pub fn cmp_growth(&self, other: &Asym) -> Ordering {
        let (x, y) = (self.key(), other.key());
        x.0.partial_cmp(&y.0)
            .unwrap_or(Ordering::Equal)
            .then(x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal))
            .then(x.2.partial_cmp(&y.2).unwrap_or(Ordering::Equal))
    }

    /// Whether the class tends to 0, a positive constant, or ∞.
    pub fn direction(&self) -> Ordering {
        self.cmp_growth(&Asym::ONE)
    }

    pub fn summable(&self) -> bool {
        if self.a != 1.0 {
            return self.a < 1.0;
        }
        if self.p != -1.0 {
            return self.p < -1.0;
        }
        self.q < -1.0
    }

    pub fn rule_name(&self) -> &'static str {
        if self.a != 1.0 {
            "ratio-test"
        } else if self.p != -1.0 {
            "p-series"
        } else {
            "bertrand-series"
        }
    }
}

fn cls(a: Asym) -> Growth {
    Growth::Class(a.canon())
}

impl Growth {
    pub fn of(form_class: Asym) -> Self {
        cls(form_class)
    }

    /// Class of the forward differences of a product form.
    pub fn diff<T: Scalar>(f: &Form<T>) -> Self {
        let c = f.class().canon();
        if c.a != 1.0 {
            cls(c)
        } else if c.p != 0.0 {
            cls(Asym { a: 1.0, p: c.p - 1.0, q: c.q })
        } else if c.q != 0.0 {
            cls(Asym { a: 1.0, p: -1.0, q: c.q - 1.0 })
        } else {
            Growth::Zero
        }
    }

    pub fn mul(self, o: Growth) -> Growth {
        match (self, o) {
            (Growth::Zero, _) | (_, Growth::Zero) => Growth::Zero,
            (Growth::Opaque, _) | (_, Growth::Opaque) => Growth::Opaque,
            (Growth::Class(x), Growth::Class(y)) => {
                cls(Asym { a: x.a * y.a, p: x.p + y.p, q: x.q + y.q })
            }
        }
    }

    pub fn div(self, o: Growth) -> Growth {
        match (self, o) {
            (Growth::Zero, _) => Growth::Zero,
            (_, Growth::Zero) | (Growth::Opaque, _) | (_, Growth::Opaque) => Growth::Opaque,
            (Growth::Class(x), Growth::Class(y)) => {
                cls(Asym { a: x.a / y.a, p: x.p - y.p, q: x.q - y.q })
            }
        }
    }

    /// Class of a sum of two nonnegative sequences.
    pub fn max(self, o: Growth) -> Growth {
        match (self, o) {
            (Growth::Zero, g) | (g, Growth::Zero) => g,
            (Growth::Opaque, _) | (_, Growth::Opaque) => Growth::Opaque,
            (Growth::Class(x), Growth::Class(y)) => {
                if x.cmp_growth(&y) == Ordering::Less {
                    Growth::Class(y)
                } else {
                    Growth::Class(x)
                }
            }
        }
    }

    /// Class of the partial sums `∑_{j≤n} t_j` given a positive prefix.
    pub fn partial_sums(self) -> Growth {
        match self {
            Growth::Zero => Growth::Class(Asym::ONE),
            Growth::Opaque => Growth::Opaque,
            Growth::Class(c) => {
                if c.summable() {
                    Growth::Class(Asym::ONE)
                } else if c.a > 1.0 {
                    Growth::Class(c)
                } else if c.p > -1.0 {
                    cls(Asym { a: 1.0, p: c.p + 1.0, q: c.q })
                } else if c.q > -1.0 {
                    cls(Asym { a: 1.0, p: 0.0, q: c.q + 1.0 })
                } else {
                    Growth::Opaque
                }
            }
        }
    }

    /// `Some(true)` when the sequence stays above a positive constant eventually.
    pub fn bounded_below(self) -> Option<bool> {
        match self {
            Growth::Zero => Some(false),
            Growth::Opaque => None,
            Growth::Class(c) => Some(c.direction() != Ordering::Less),
        }
    }

    /// `Some(true)` when the series of these terms converges.
    pub fn summable(self) -> Option<bool> {
        match self {
            Growth::Zero => Some(true),
            Growth::Opaque => None,
            Growth::Class(c) => Some(c.summable()),
        }
    }

    /// Estimated ratio `(∑_{j>n} t_j) / t_n` for a summable class.
    pub fn remainder_factor(self, n: f64) -> f64 {
        match self {
            Growth::Zero => 0.0,
            Growth::Opaque => f64::INFINITY,
            Growth::Class(c) => {
                if c.a < 1.0 {
                    c.a / (1.0 - c.a)
                } else if c.p < -1.0 {
                    n / (-c.p - 1.0)
                } else if c.q < -1.0 {
                    n * n.ln().max(1.0) / (-c.q - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}
