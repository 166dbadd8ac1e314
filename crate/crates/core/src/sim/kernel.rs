//! One-step transition kernels.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Scheme, StepStats};
use crate::config::Side;
use crate::error::SimError;
use crate::scale::ScaleFunction;

/// Interaction window in units of `√dt`.
pub const WINDOW: f64 = 5.0;
pub const MAX_HALVINGS: u32 = 10;
const BISECT_TOL: f64 = 1e-12;

fn norm_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * std::f64::consts::FRAC_1_SQRT_2)
}

fn norm_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Quantile of the skew Brownian transition from `m ≥ 0` (interface at 0) over time `s²`.
/// Newton on the CDF, kept inside a shrinking bracket.
fn skew_quantile(m: f64, beta: f64, s: f64, u: f64) -> f64 {
    let nm = norm_cdf(-m / s);
    let np = norm_cdf(m / s);
    let f0 = 2.0 * (1.0 - beta) * nm;
    let cdf = |y: f64| {
        if y < 0.0 {
            2.0 * (1.0 - beta) * norm_cdf((y - m) / s)
        } else {
            f0 + norm_cdf((y - m) / s) - nm + (2.0 * beta - 1.0) * (norm_cdf((y + m) / s) - np)
        }
    };
    let pdf = |y: f64| {
        if y < 0.0 {
            2.0 * (1.0 - beta) * norm_pdf((y - m) / s) / s
        } else {
            (norm_pdf((y - m) / s) + (2.0 * beta - 1.0) * norm_pdf((y + m) / s)) / s
        }
    };
    let (mut lo, mut hi) = (m.min(0.0) - 12.0 * s, m + 12.0 * s);
    // start on the correct side of the jump at 0
    let mut y = if u < f0 { -s.min(m + s) } else { m.max(s * 0.1) };
    for _ in 0..200 {
        let f = cdf(y) - u;
        if f.abs() < 1e-15 {
            return y;
        }
        if f < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        if hi - lo <= BISECT_TOL {
            break;
        }
        let d = pdf(y);
        let next = y - f / d;
        if d > 0.0 && next > lo && next < hi {
            if (next - y).abs() < BISECT_TOL {
                return next;
            }
            y = next;
        } else {
            y = 0.5 * (lo + hi);
        }
    }
    y
}

/// Exact transition of skew Brownian motion with parameter `beta` at interface `z`:
/// the position after time `dt` started from `x`.
pub fn exact_skew_step<R: Rng + ?Sized>(x: f64, z: f64, beta: f64, dt: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let s = dt.sqrt();
    let m = x - z;
    if m >= 0.0 {
        z + skew_quantile(m, beta, s, u)
    } else {
        z - skew_quantile(-m, 1.0 - beta, s, u)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Walker {
    pub x: f64,
    /// `h(x)`; only maintained by the Euler scheme.
    pub y: f64,
}

pub(crate) struct Kernel<'a> {
    _sf: std::marker::PhantomData<&'a ScaleFunction>,
    pub scheme: Scheme,
    xs: Vec<f64>,
    hs: Vec<f64>,
    slopes: Vec<f64>,
    /// `(z, β)` sorted by `z`
    pub interfaces: Vec<(f64, f64)>,
    pub eps_cluster: f64,
    /// Sum of `|Δρ|/(ρ⁺+ρ⁻)` over interfaces merged into the one at 0.
    pub cluster_bound: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl<'a> Kernel<'a> {
    pub fn new(sf: &'a ScaleFunction, scheme: Scheme, x_max: f64, eps_cluster: Option<f64>) -> Result<Self, SimError> {
        if !(x_max > 0.0) {
            return Err(SimError::Plan(format!("x_max must be positive, got {x_max}")));
        }
        let (t_lo, t_hi) = sf.x_range();
        let bound = |edge: f64, side: Side| -> Result<f64, SimError> {
            if edge.abs() >= x_max {
                Ok(x_max.copysign(edge))
            } else if sf.saturated(side) {
                Ok(edge)
            } else {
                Err(SimError::Plan(format!(
                    "scale table ends at {edge} inside x_max = {x_max}; rebuild the scale with reach ≥ x_max"
                )))
            }
        };
        let x_lo = bound(t_lo, Side::Negative)?;
        let x_hi = bound(t_hi, Side::Positive)?;
        let xs: Vec<f64> = sf.knots.iter().map(|k| k.x).collect();
        let hs: Vec<f64> = sf.knots.iter().map(|k| k.h).collect();
        let slopes: Vec<f64> = sf.segments.iter().map(|s| s.slope).collect();
        let inner = xs
            .iter()
            .filter(|&&x| x != 0.0)
            .fold(f64::INFINITY, |a, &x| a.min(x.abs()));
        let eps = eps_cluster.unwrap_or(0.5 * inner);
        if !(eps > 0.0 && eps < inner) {
            return Err(SimError::Plan(format!(
                "eps_cluster = {eps} must lie in (0, {inner}), the innermost breakpoint magnitude"
            )));
        }
        let mut interfaces = Vec::new();
        let mut cluster_bound = 0.0;
        for i in 1..xs.len() - 1 {
            let (dl, dr) = (sf.segments[i - 1].dens, sf.segments[i].dens);
            let jump = (dr - dl).abs() / (dr + dl);
            if jump <= 1e-14 {
                continue;
            }
            if xs[i] == 0.0 {
                continue;
            }
            if xs[i].abs() < eps {
                cluster_bound += jump;
            } else {
                interfaces.push((xs[i], dr / (dl + dr)));
            }
        }
        if (sf.alpha - 0.5).abs() > 1e-14 {
            interfaces.push((0.0, sf.alpha));
        }
        interfaces.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            y_lo: sf.h(x_lo),
            y_hi: sf.h(x_hi),
            _sf: std::marker::PhantomData,
            scheme,
            xs,
            hs,
            slopes,
            interfaces,
            eps_cluster: eps,
            cluster_bound,
            x_lo,
            x_hi,
        })
    }

    fn seg_of_y(&self, y: f64) -> usize {
        self.hs.partition_point(|&h| h <= y).saturating_sub(1).min(self.slopes.len() - 1)
    }

    fn seg_of_x(&self, x: f64) -> usize {
        self.xs.partition_point(|&v| v <= x).saturating_sub(1).min(self.slopes.len() - 1)
    }

    fn x_of_y(&self, y: f64) -> f64 {
        let i = self.seg_of_y(y);
        self.xs[i] + (y - self.hs[i]) / self.slopes[i]
    }

    pub fn h(&self, x: f64) -> f64 {
        let i = self.seg_of_x(x);
        self.hs[i] + self.slopes[i] * (x - self.xs[i])
    }

    pub fn start(&self, x0: f64) -> Walker {
        Walker { x: x0, y: self.h(x0) }
    }

    /// Local volatility of `h(X)` at level `y`.
    pub fn sigma_y(&self, y: f64) -> f64 {
        self.slopes[self.seg_of_y(y)]
    }

    /// Advances `w` by `dt`; returns `true` when the path left `(x_lo, x_hi)`.
    pub fn step<R: Rng + ?Sized>(&self, w: &mut Walker, dt: f64, rng: &mut R, stats: &mut StepStats) -> bool {
        match self.scheme {
            Scheme::EulerTransformed => {
                let xi: f64 = rng.sample(StandardNormal);
                let y = w.y + self.sigma_y(w.y) * dt.sqrt() * xi;
                self.set_y(w, y)
            }
            Scheme::ExactSkew => {
                let x = self.exact_advance(w.x, dt, 0, rng, stats);
                w.x = x;
                if x >= self.x_hi {
                    w.x = self.x_hi;
                    return true;
                }
                if x <= self.x_lo {
                    w.x = self.x_lo;
                    return true;
                }
                false
            }
        }
    }

    fn set_y(&self, w: &mut Walker, y: f64) -> bool {
        if y >= self.y_hi {
            w.y = self.y_hi;
            w.x = self.x_hi;
            return true;
        }
        if y <= self.y_lo {
            w.y = self.y_lo;
            w.x = self.x_lo;
            return true;
        }
        w.y = y;
        w.x = self.x_of_y(y);
        false
    }

    fn exact_advance<R: Rng + ?Sized>(&self, x: f64, dt: f64, depth: u32, rng: &mut R, stats: &mut StepStats) -> f64 {
        let w = WINDOW * dt.sqrt();
        let lo = self.interfaces.partition_point(|p| p.0 < x - w);
        let hi = self.interfaces.partition_point(|p| p.0 <= x + w);
        match hi - lo {
            0 => {
                let xi: f64 = rng.sample(StandardNormal);
                x + dt.sqrt() * xi
            }
            1 => {
                let (z, beta) = self.interfaces[lo];
                exact_skew_step(x, z, beta, dt, rng)
            }
            _ if depth < MAX_HALVINGS => {
                stats.halvings += 1;
                let mid = self.exact_advance(x, 0.5 * dt, depth + 1, rng, stats);
                if mid >= self.x_hi || mid <= self.x_lo {
                    return mid;
                }
                self.exact_advance(mid, 0.5 * dt, depth + 1, rng, stats)
            }
            _ => {
                stats.fallbacks += 1;
                let mut wk = self.start(x);
                let xi: f64 = rng.sample(StandardNormal);
                let y = wk.y + self.slopes[self.seg_of_x(x)] * dt.sqrt() * xi;
                self.set_y(&mut wk, y);
                wk.x
            }
        }
    }

    /// Probability that the continuous path crossed `barrier` during a step
    /// between two states on the same side of it.
    pub fn bridge_prob(&self, prev: &Walker, next: &Walker, barrier_x: f64, barrier_y: f64, dt: f64) -> f64 {
        let (p, n, b, sig) = match self.scheme {
            Scheme::EulerTransformed => (prev.y, next.y, barrier_y, self.sigma_y(prev.y)),
            Scheme::ExactSkew => (prev.x, next.x, barrier_x, 1.0),
        };
        let prod = (b - p) * (b - n);
        if prod <= 0.0 {
            return 1.0;
        }
        (-2.0 * prod / (sig * sig * dt)).exp()
    }
}
