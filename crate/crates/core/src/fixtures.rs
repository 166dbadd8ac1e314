//! Reference configurations used by tests, the acceptance harness and the CLI.

use rand::Rng;

use crate::config::{PartitionSpec, SequenceSpec, Side, SkewConfig};
use crate::scalar::Scalar;
use crate::tail::{Form, TailFamily};

const W: i64 = 4;

fn lit<T: Scalar>(x: f64) -> T {
    T::lit(x)
}

/// Breakpoints at the integers away from 0 and at `±2^{-n-1}` toward it.
pub fn unit_partition<T: Scalar>(side: Side) -> PartitionSpec<T> {
    let inner = TailFamily::geometric(lit(0.5), lit(0.5));
    let outer = TailFamily::power(T::one(), T::one());
    let split = match side {
        Side::Negative => 0,
        Side::Positive => 0,
    };
    PartitionSpec(SequenceSpec::from_tails(side, -W, W, split, inner, outer).expect("valid families"))
}

fn constant_density<T: Scalar>(v: T) -> SequenceSpec<T> {
    SequenceSpec::new(-W, vec![v; (2 * W + 1) as usize], TailFamily::constant(v), TailFamily::constant(v))
}

pub fn brownian<T: Scalar>() -> SkewConfig<T> {
    SkewConfig {
        name: "brownian".into(),
        neg_partition: unit_partition(Side::Negative),
        pos_partition: unit_partition(Side::Positive),
        neg_density: constant_density(T::one()),
        pos_density: constant_density(T::one()),
    }
}

/// `γ_k = (1-a)/a`, `γ̄_k = 1`: skew Brownian motion with parameter `a`.
pub fn skew_bm<T: Scalar>(a: f64) -> SkewConfig<T> {
    SkewConfig {
        name: format!("skewbm-{a}"),
        neg_density: constant_density(lit((1.0 - a) / a)),
        ..brownian()
    }
}

/// Step approximation of `|x|^{δ-1}` on the partition `1/k`, `|k|+2`.
pub fn bessel<T: Scalar>(delta: f64) -> SkewConfig<T> {
    let one = T::one();
    let e = lit::<T>(delta - 1.0);
    let bp_in = TailFamily::power(one, -one);
    let bp_out = TailFamily::shifted_power(one, one, lit(2.0));
    let d_in = TailFamily::power(one, -e);
    let d_out = TailFamily::shifted_power(one, e, lit(2.0));
    let mk = |side, split, i: &TailFamily<T>, o: &TailFamily<T>| {
        SequenceSpec::from_tails(side, -W, W, split, i.clone(), o.clone()).expect("valid families")
    };
    SkewConfig {
        name: format!("bessel-{delta}"),
        neg_partition: PartitionSpec(mk(Side::Negative, 1, &bp_in, &bp_out)),
        pos_partition: PartitionSpec(mk(Side::Positive, -1, &bp_in, &bp_out)),
        neg_density: mk(Side::Negative, 1, &d_in, &d_out),
        pos_density: mk(Side::Positive, -1, &d_in, &d_out),
    }
}

/// `r_l = H_l` for `l ≥ 1` and `γ̄_{k+1} = C^k (k+1)` for `k ≥ 1`; Brownian on the left.
pub fn counterexample<T: Scalar>(c: f64) -> SkewConfig<T> {
    let half = lit::<T>(0.5);
    let r = SequenceSpec::from_tails(
        Side::Positive,
        -3,
        6,
        0,
        TailFamily::geometric(half, half),
        TailFamily::harmonic(T::one()),
    )
    .expect("valid families");
    let g = SequenceSpec::from_tails(
        Side::Positive,
        -3,
        6,
        1,
        TailFamily::constant(T::one()),
        TailFamily::product(Form { c: lit(1.0 / c), a: lit(c), p: T::one(), q: T::zero(), s: T::zero() }),
    )
    .expect("valid families");
    SkewConfig {
        name: format!("counterexample-{c}"),
        pos_partition: PartitionSpec(r),
        pos_density: g,
        ..brownian()
    }
}

/// Unit spacing with densities halving on every outer segment: finite total mass 4.
pub fn geometric_decay<T: Scalar>() -> SkewConfig<T> {
    let one = T::one();
    let half = lit::<T>(0.5);
    let neg = SequenceSpec::from_tails(
        Side::Negative,
        -W,
        W,
        0,
        TailFamily::constant(one),
        TailFamily::geometric(one, half),
    )
    .expect("valid families");
    let pos = SequenceSpec::from_tails(
        Side::Positive,
        -W,
        W,
        1,
        TailFamily::constant(one),
        TailFamily::geometric(lit(2.0), half),
    )
    .expect("valid families");
    SkewConfig { name: "geometric-decay".into(), neg_density: neg, pos_density: pos, ..brownian() }
}

/// Densities growing like `2^k` to the right: transient toward `+∞`.
pub fn transient_right<T: Scalar>() -> SkewConfig<T> {
    let pos = SequenceSpec::from_tails(
        Side::Positive,
        -W,
        W,
        1,
        TailFamily::constant(T::one()),
        TailFamily::geometric(lit(0.5), lit(2.0)),
    )
    .expect("valid families");
    SkewConfig { name: "transient-right".into(), pos_density: pos, ..brownian() }
}

fn random_family<R: Rng + ?Sized>(rng: &mut R, allow_harmonic: bool) -> TailFamily<f64> {
    let c = rng.random_range(0.5..2.0);
    match rng.random_range(0..if allow_harmonic { 4 } else { 3 }) {
        0 => TailFamily::constant(c),
        1 => TailFamily::shifted_power(c, rng.random_range(-1.5..1.5), 1.0),
        2 => TailFamily::geometric(c, rng.random_range(0.6..1.2)),
        _ => TailFamily::product(Form { c, a: 1.0, p: 0.0, q: 1.0, s: 1.0 }),
    }
}

fn random_partition<R: Rng + ?Sized>(rng: &mut R, side: Side) -> PartitionSpec<f64> {
    let inner = match rng.random_range(0..4) {
        0 => TailFamily::shifted_power(rng.random_range(0.1..0.5), -rng.random_range(1.5..2.5), 1.0),
        _ => TailFamily::geometric(rng.random_range(0.1..0.5), rng.random_range(0.2..0.8)),
    };
    let outer = match rng.random_range(0..3) {
        0 => TailFamily::power(rng.random_range(1.0..2.0), rng.random_range(0.5..2.0)),
        1 => TailFamily::harmonic(rng.random_range(1.0..2.0)),
        _ => TailFamily::geometric(rng.random_range(1.0..2.0), rng.random_range(1.1..2.0)),
    };
    PartitionSpec(SequenceSpec::from_tails(side, -W, W, 0, inner, outer).expect("valid families"))
}

fn random_density<R: Rng + ?Sized>(rng: &mut R, side: Side, regular_inner: bool) -> SequenceSpec<f64> {
    let inner = if regular_inner {
        TailFamily::constant(rng.random_range(0.5..2.0))
    } else {
        random_family(rng, true)
    };
    let outer = random_family(rng, true);
    let split = match side {
        Side::Negative => 0,
        Side::Positive => 1,
    };
    let mut s = SequenceSpec::from_tails(side, -W, W, split, inner, outer).expect("valid families");
    let n = s.explicit_values.len();
    for v in &mut s.explicit_values[1..n - 1] {
        *v = rng.random_range(0.25..4.0);
    }
    s
}

/// Random tail-family configuration. With `regular_inner` the inner density
/// tails are constant so that a scale function exists.
pub fn random_config<R: Rng + ?Sized>(rng: &mut R, regular_inner: bool) -> SkewConfig<f64> {
    SkewConfig {
        name: "random".into(),
        neg_partition: random_partition(rng, Side::Negative),
        pos_partition: random_partition(rng, Side::Positive),
        neg_density: random_density(rng, Side::Negative, regular_inner),
        pos_density: random_density(rng, Side::Positive, regular_inner),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate;
    use rand::SeedableRng;

    #[test]
    fn fixtures_validate() {
        for c in [
            brownian::<f64>(),
            skew_bm(0.7),
            bessel(0.5),
            bessel(1.5),
            counterexample(2.0),
            geometric_decay(),
            transient_right(),
        ] {
            let rep = validate(&c);
            assert!(rep.is_valid(), "{}: {:?}", c.name, rep);
        }
    }

    #[test]
    fn random_configs_mostly_validate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ok = (0..100).filter(|_| validate(&random_config(&mut rng, false)).is_valid()).count();
        assert!(ok >= 90, "{ok}");
    }

    #[test]
    fn counterexample_matches_definition() {
        let c = counterexample::<f64>(2.0).compile().unwrap();
        let mut h = 0.0;
        for l in 1..40 {
            h += 1.0 / l as f64;
            assert!((c.pos_bp.at(l) - h).abs() < 1e-12);
            // γ̄_{k+1} = C^k (k+1)
            let k = l;
            assert!((c.pos_d.at(k + 1) / (2f64.powi(k as i32) * (k + 1) as f64) - 1.0).abs() < 1e-12);
        }
    }
}
