mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skewdiff::classifier::{classify_all, ClassifyOptions, Tri, N0_CHOICES};
use skewdiff::config::{alphas_from_gammas, gammas_from_alphas, AlphaSequence, Side};
use skewdiff::scale::{build_scale, phi_diverges, ScaleOptions};
use skewdiff::series::Status;
use skewdiff::sim::{simulate_path, Record, Scheme, SimPlan};
use skewdiff::{fixtures, validate, SkewConfig};

fn config(seed: u64, regular_inner: bool) -> Option<SkewConfig<f64>> {
    let c = fixtures::random_config(&mut ChaCha8Rng::seed_from_u64(seed), regular_inner);
    validate(&c).is_valid().then_some(c)
}

/// `(h(x) − h(a)) / (h(b) − h(a))` with `h(x) = ∫_0^x 1/ρ` by quadrature.
fn hitting_oracle(c: &SkewConfig<f64>, x: f64, a: f64, b: f64) -> f64 {
    let comp = c.compile().unwrap();
    let h = |x: f64| {
        let side = if x >= 0.0 { Side::Positive } else { Side::Negative };
        let v = comp.view(side);
        let u = x.abs();
        let s = common::piecewise(&|y| 1.0 / common::density(&v, y), &common::breaks(&v, u), 1e-13);
        if x >= 0.0 { s } else { -s }
    };
    (h(x) - h(a)) / (h(b) - h(a))
}

fn alpha_seq() -> impl Strategy<Value = AlphaSequence<f64>> {
    (-4i64..=0, prop::collection::vec(0.05f64..0.95, 1..7), 0.05f64..0.95, 0.05f64..0.95).prop_map(
        |(window_lo, values, lower_tail, upper_tail)| AlphaSequence { window_lo, values, lower_tail, upper_tail },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn lgloc_is_s0_and_s1(seed in any::<u64>()) {
        let c = config(seed, false);
        prop_assume!(c.is_some());
        let r = classify_all(&c.unwrap(), &ClassifyOptions::default());
        prop_assume!(![r.s0.holds, r.s1.holds, r.lgloc.holds].contains(&Tri::Unknown));
        prop_assert_eq!(r.lgloc.holds.is_true(), r.s0.holds.is_true() && r.s1.holds.is_true());
    }

    #[test]
    fn conservativeness_does_not_depend_on_n0(seed in any::<u64>()) {
        let c = config(seed, true);
        prop_assume!(c.is_some());
        let c = c.unwrap();
        let v: Vec<Tri> = N0_CHOICES
            .iter()
            .map(|&n0| classify_all(&c, &ClassifyOptions { n0, ..ClassifyOptions::default() }).conservative.holds)
            .filter(|t| *t != Tri::Unknown)
            .collect();
        prop_assert!(v.windows(2).all(|w| w[0] == w[1]), "{:?}", v);
    }

    #[test]
    fn phi_divergence_matches_feller_criteria(seed in any::<u64>()) {
        let c = config(seed, true);
        prop_assume!(c.is_some());
        let c = c.unwrap();
        let Ok(sf) = build_scale(&c, &ScaleOptions::default()) else { return Ok(()) };
        let r = classify_all(&c, &ClassifyOptions::default());
        let (pn, pp) = phi_diverges(&sf);
        for (phi, ev) in [(pn, &r.conservative.evidence[0].verdict), (pp, &r.conservative.evidence[1].verdict)] {
            if phi != Status::Inconclusive && ev.conclusive() {
                prop_assert_eq!(phi == Status::Diverges, ev.diverges());
            }
        }
    }

    #[test]
    fn phi_matches_nested_quadrature(seed in any::<u64>(), frac in 0.05f64..1.0) {
        let c = config(seed, true);
        prop_assume!(c.is_some());
        let c = c.unwrap();
        let Ok(sf) = build_scale(&c, &ScaleOptions::default()) else { return Ok(()) };
        let comp = c.compile().unwrap();
        for side in [Side::Negative, Side::Positive] {
            let v = comp.view(side);
            let u = v.bp(v.t_window().1) * frac;
            let x = if side == Side::Positive { u } else { -u };
            let q = common::phi_by_quadrature(&c, x);
            prop_assert!((sf.phi(x) - q).abs() < 1e-8 * (1.0 + q.abs()), "x={} {} vs {}", x, sf.phi(x), q);
        }
    }

    #[test]
    fn hitting_probabilities(seed in any::<u64>(), a in -3.0f64..-0.01, b in 0.01f64..3.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let c = config(seed, true);
        prop_assume!(c.is_some());
        let c = c.unwrap();
        let Ok(sf) = build_scale(&c, &ScaleOptions::default()) else { return Ok(()) };
        let (x, y) = (a + s.min(t) * (b - a), a + s.max(t) * (b - a));
        let lo = sf.hitting_prob(x, a, b).unwrap();
        let hi = sf.hitting_prob_complement(x, a, b).unwrap();
        prop_assert!((lo + hi - 1.0).abs() < 1e-12);
        prop_assert!(sf.hitting_prob_complement(y, a, b).unwrap() >= hi - 1e-12);
        prop_assert!(sf.hitting_prob_complement(a, a, b).unwrap().abs() < 1e-12);
        prop_assert!((sf.hitting_prob_complement(b, a, b).unwrap() - 1.0).abs() < 1e-12);
        let o = hitting_oracle(&c, x, a, b);
        prop_assert!((hi - o).abs() < 1e-9, "{} vs {}", hi, o);
    }

    #[test]
    fn alpha_gamma_round_trip(neg in alpha_seq(), pos in alpha_seq(), g0 in 0.1f64..10.0, gb0 in 0.1f64..10.0) {
        let (gn, gp) = gammas_from_alphas(&neg, &pos, g0, gb0).unwrap();
        let c = SkewConfig {
            name: "alphas".into(),
            neg_partition: fixtures::unit_partition(Side::Negative),
            pos_partition: fixtures::unit_partition(Side::Positive),
            neg_density: gn,
            pos_density: gp,
        };
        let back = alphas_from_gammas(&c).unwrap();
        for j in neg.window_lo - 3..=neg.window_hi() + 3 {
            prop_assert!((back.neg.at(j) - neg.at(j)).abs() < 1e-10, "neg j={}", j);
        }
        for j in pos.window_lo - 3..=pos.window_hi() + 3 {
            prop_assert!((back.pos.at(j) - pos.at(j)).abs() < 1e-10, "pos j={}", j);
        }
    }

    #[test]
    fn paths_do_not_depend_on_thread_count(seed in any::<u64>(), exact in any::<bool>(), x0 in -0.5f64..0.5) {
        let c = fixtures::geometric_decay::<f64>();
        let sf = build_scale(&c, &ScaleOptions::default()).unwrap();
        let scheme = if exact { Scheme::ExactSkew } else { Scheme::EulerTransformed };
        let mut plan = SimPlan::new(scheme, x0, 0.05, 1e-3, 12, seed);
        plan.record = Record::FullPath;
        let run = |threads| {
            let mut p = plan.clone();
            p.threads = Some(threads);
            let mut buf = Vec::new();
            simulate_path(&c, &sf, &p).unwrap().write_paths_csv(&mut buf).unwrap();
            buf
        };
        prop_assert_eq!(run(1), run(3));
    }
}
