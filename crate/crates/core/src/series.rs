//! Convergence verdicts for nonnegative series with symbolic tails.

use serde::{Deserialize, Serialize};

use crate::tail::Growth;

/// Tail remainder bound below which a numeric sum counts as converged.
pub const TOL_TAIL: f64 = 1e-10;
/// Partial-sum threshold for numeric divergence.
pub const S_DIV: f64 = 1e6;
pub const K_MIN_LOG2: u32 = 10;
pub const K_MAX_LOG2: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub status: Status,
    /// Partial sum, or the sum estimate when converging.
    pub value: f64,
    /// Tail error bound (infinite when diverging or unknown).
    pub error_bound: f64,
    pub k_max_used: u64,
    pub rule: String,
}

impl SeriesVerdict {
    pub fn converges(&self) -> bool {
        self.status == Status::Converges
    }

    pub fn diverges(&self) -> bool {
        self.status == Status::Diverges
    }

    pub fn conclusive(&self) -> bool {
        self.status != Status::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    /// Upper bound on terms used by numeric evidence.
    pub k_max: u64,
    /// Terms summed when a symbolic rule already decides the verdict.
    pub k_sum: u64,
    pub tol_tail: f64,
    pub s_div: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { k_max: 1 << K_MAX_LOG2, k_sum: 1 << 12, tol_tail: TOL_TAIL, s_div: S_DIV }
    }
}

impl Budget {
    pub fn with_k_max(k_max: u64) -> Self {
        let k_max = k_max.max(1 << K_MIN_LOG2);
        Self { k_max, k_sum: (1 << 12).min(k_max), ..Self::default() }
    }
}

/// A nonnegative series `∑_{n≥0} term(n)`.
pub struct Series<'a> {
    /// Called once per index, in increasing order from 0.
    pub term: &'a mut dyn FnMut(u64) -> f64,
    /// Index from which `tail` describes the terms.
    pub symbolic_from: u64,
    pub tail: Growth,
    /// Exact value of `∑_{n≥symbolic_from} term(n)` when known in closed form.
    pub tail_exact: Option<f64>,
}

struct Summer<'a, 'b> {
    s: &'b mut Series<'a>,
    n: u64,
    acc: f64,
    comp: f64,
    last: f64,
    /// First non-finite term, after which summation stops.
    broken: Option<f64>,
}

impl<'a, 'b> Summer<'a, 'b> {
    fn new(s: &'b mut Series<'a>) -> Self {
        Self { s, n: 0, acc: 0.0, comp: 0.0, last: 0.0, broken: None }
    }

    fn run_to(&mut self, n_end: u64) {
        while self.n < n_end && self.broken.is_none() {
            let t = (self.s.term)(self.n);
            if !t.is_finite() {
                // floating overflow in an intermediate quantity
                self.broken = Some(t);
                return;
            }
            self.last = t;
            // Kahan-Babuska
            let sum = self.acc + t;
            if self.acc.abs() >= t.abs() {
                self.comp += (self.acc - sum) + t;
            } else {
                self.comp += (t - sum) + self.acc;
            }
            self.acc = sum;
            self.n += 1;
        }
    }

    fn value(&self) -> f64 {
        if !self.acc.is_finite() {
            return self.acc;
        }
        self.acc + self.comp
    }
}

pub fn evaluate(series: &mut Series<'_>, budget: &Budget) -> SeriesVerdict {
    let start = series.symbolic_from;
    let tail = series.tail;
    let tail_exact = series.tail_exact;
    let mut sm = Summer::new(series);
    match tail {
        Growth::Zero => {
            sm.run_to(start);
            SeriesVerdict {
                status: Status::Converges,
                value: sm.value(),
                error_bound: 0.0,
                k_max_used: start,
                rule: "finite-support".into(),
            }
        }
        Growth::Class(c) if c.summable() => {
            if let Some(te) = tail_exact {
                sm.run_to(start);
                return SeriesVerdict {
                    status: Status::Converges,
                    value: sm.value() + te,
                    error_bound: 0.0,
                    k_max_used: start,
                    rule: format!("symbolic:{}+telescoping", c.rule_name()),
                };
            }
            let mut end = start + budget.k_sum;
            sm.run_to(end);
            let mut rem = sm.last * tail.remainder_factor(sm.n as f64);
            while rem > budget.tol_tail && end < start + budget.k_max && sm.broken.is_none() {
                end = (start + 2 * (end - start)).min(start + budget.k_max);
                sm.run_to(end);
                rem = sm.last * tail.remainder_factor(sm.n as f64);
            }
            let end = sm.n;
            SeriesVerdict {
                status: Status::Converges,
                value: sm.value() + rem,
                error_bound: rem,
                k_max_used: end,
                rule: format!("symbolic:{}", c.rule_name()),
            }
        }
        Growth::Class(c) => {
            sm.run_to(start + budget.k_sum);
            SeriesVerdict {
                status: Status::Diverges,
                value: sm.value(),
                error_bound: f64::INFINITY,
                k_max_used: start + budget.k_sum,
                rule: format!("symbolic:{}-divergent", c.rule_name()),
            }
        }
        Growth::Opaque => numeric(&mut sm, start, budget),
    }
}

fn numeric(sm: &mut Summer<'_, '_>, start: u64, budget: &Budget) -> SeriesVerdict {
    let mut partial = Vec::new();
    let mut k = 1u64 << K_MIN_LOG2;
    loop {
        sm.run_to(start + k);
        partial.push(sm.value());
        if k >= budget.k_max || sm.broken.is_some() {
            break;
        }
        k = (2 * k).min(budget.k_max);
    }
    let used = sm.n;
    match sm.broken {
        Some(t) if t == f64::INFINITY => {
            return SeriesVerdict {
                status: Status::Diverges,
                value: f64::INFINITY,
                error_bound: f64::INFINITY,
                k_max_used: used,
                rule: "numeric-heuristic".into(),
            }
        }
        Some(_) => {
            return SeriesVerdict {
                status: Status::Inconclusive,
                value: sm.value(),
                error_bound: f64::INFINITY,
                k_max_used: used,
                rule: "numeric-heuristic".into(),
            }
        }
        None => {}
    }
    let m = partial.len();
    let v = partial[m - 1];
    if m >= 3 && v > budget.s_div && partial[m - 1] > partial[m - 2] && partial[m - 2] > partial[m - 3] {
        return SeriesVerdict {
            status: Status::Diverges,
            value: v,
            error_bound: f64::INFINITY,
            k_max_used: used,
            rule: "numeric-heuristic".into(),
        };
    }
    if m >= 2 {
        let inc = partial[m - 1] - partial[m - 2];
        if inc < budget.tol_tail {
            return SeriesVerdict {
                status: Status::Converges,
                value: v,
                error_bound: inc.max(0.0),
                k_max_used: used,
                rule: "numeric-heuristic".into(),
            };
        }
    }
    SeriesVerdict { status: Status::Inconclusive, value: v, error_bound: f64::INFINITY, k_max_used: used, rule: "numeric-heuristic".into() }
}

/// Joins two series whose sum is the quantity of interest.
pub fn sum_verdicts(a: &SeriesVerdict, b: &SeriesVerdict) -> SeriesVerdict {
    let status = match (a.status, b.status) {
        (Status::Diverges, _) | (_, Status::Diverges) => Status::Diverges,
        (Status::Converges, Status::Converges) => Status::Converges,
        _ => Status::Inconclusive,
    };
    let rule = if a.rule == b.rule { a.rule.clone() } else { format!("{} | {}", a.rule, b.rule) };
    SeriesVerdict {
        status,
        value: a.value + b.value,
        error_bound: a.error_bound + b.error_bound,
        k_max_used: a.k_max_used.max(b.k_max_used),
        rule,
    }
}
