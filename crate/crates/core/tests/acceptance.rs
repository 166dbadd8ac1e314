//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to see them.

mod common;

use std::time::Instant;

use common::{info, line, phi_by_quadrature};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skewdiff::classifier::{classify_all, ClassifyOptions, Tri};
use skewdiff::fixtures;
use skewdiff::layered::{build_layered, classify_layered, bounded_range_fixture, dispersion_stats, simulate_xy, Layered};
use skewdiff::scale::{build_scale, phi_diverges, ScaleFunction, ScaleOptions};
use skewdiff::series::{Budget, Status};
use skewdiff::sim::{mc_exit_time, mc_hitting, occupation_histogram, simulate_path, Bins, McSpec, Record, Scheme, SimPlan};
use skewdiff::{Side, SkewConfig};

const SCHEMES: [Scheme; 2] = [Scheme::EulerTransformed, Scheme::ExactSkew];

fn scale(c: &SkewConfig<f64>) -> ScaleFunction {
    build_scale(c, &ScaleOptions::default()).unwrap()
}

fn c1_fixture_verdicts() -> bool {
    let t = Instant::now();
    let o = ClassifyOptions::default();
    let skew = classify_all(&fixtures::skew_bm::<f64>(0.7), &o);
    let b05 = classify_all(&fixtures::bessel::<f64>(0.5), &o);
    let b15 = classify_all(&fixtures::bessel::<f64>(1.5), &o);
    let ce = classify_all(&fixtures::counterexample::<f64>(2.0), &o);
    let el = t.elapsed().as_secs_f64();
    let ok = skew.recurrent.holds == Tri::True
        && skew.conservative.holds == Tri::True
        && b05.s0.holds == Tri::False
        && b15.s0.holds == Tri::True
        && b15.s1.holds == Tri::False
        && b15.lgloc.holds == Tri::False
        && ce.conservative.holds == Tri::False;
    line(1, ok && el < 1.0, &format!("fixture verdicts match, {el:.3}s"))
}

/// Random configurations with fully conclusive reports.
fn random_suite(n: usize, regular_inner: bool, seed: u64) -> Vec<(SkewConfig<f64>, skewdiff::ClassificationReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..20 * n {
        let c = fixtures::random_config(&mut rng, regular_inner);
        if !skewdiff::validate(&c).is_valid() {
            continue;
        }
        let r = classify_all(&c, &ClassifyOptions::default());
        if [r.s0.holds, r.s1.holds, r.lgloc.holds].contains(&Tri::Unknown) {
            continue;
        }
        out.push((c, r));
        if out.len() == n {
            break;
        }
    }
    out
}

fn c2_equivalence() -> bool {
    let t = Instant::now();
    let suite = random_suite(200, false, 2);
    let bad = suite
        .iter()
        .filter(|(_, r)| r.lgloc.holds.is_true() != (r.s0.holds.is_true() && r.s1.holds.is_true()))
        .count();
    let el = t.elapsed().as_secs_f64();
    let mixed = suite.iter().filter(|(_, r)| r.lgloc.holds.is_true()).count();
    line(
        2,
        suite.len() >= 200 && bad == 0 && el < 10.0,
        &format!("{} configs ({mixed} with lgloc), {bad} violations, {el:.2}s", suite.len()),
    )
}

fn c3_phi_oracle() -> bool {
    let b = fixtures::brownian::<f64>();
    let sf = scale(&b);
    let bm = [-3.0, -0.4, 0.0, 0.25, 1.0, 3.7]
        .iter()
        .map(|&x: &f64| (sf.phi(x) - 0.5 * x * x).abs())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 50 {
        let c = fixtures::random_config(&mut rng, true);
        let Ok(sf) = build_scale(&c, &ScaleOptions::default()) else { continue };
        let comp = c.compile().unwrap();
        for side in [Side::Negative, Side::Positive] {
            let v = comp.view(side);
            let (_, thi) = v.t_window();
            let u = v.bp(thi) * rand::Rng::random_range(&mut rng, 0.05..1.0);
            let x = if side == Side::Positive { u } else { -u };
            worst = worst.max((sf.phi(x) - phi_by_quadrature(&c, x)).abs());
        }
        n += 1;
    }
    line(3, worst < 1e-8 && bm < 1e-10, &format!("max |Δ| = {worst:.2e} on {n} configs, Brownian {bm:.1e}"))
}

fn c4_feller_agreement() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut checked, mut bad) = (0, 0);
    for _ in 0..400 {
        let c = fixtures::random_config(&mut rng, true);
        if !skewdiff::validate(&c).is_valid() {
            continue;
        }
        let r = classify_all(&c, &ClassifyOptions::default());
        let Ok(sf) = build_scale(&c, &ScaleOptions::default()) else { continue };
        let (pn, pp) = phi_diverges(&sf);
        for (phi, ev) in [(pn, &r.conservative.evidence[0].verdict), (pp, &r.conservative.evidence[1].verdict)] {
            if phi == Status::Inconclusive || !ev.conclusive() {
                continue;
            }
            checked += 1;
            if (phi == Status::Diverges) != ev.diverges() {
                bad += 1;
            }
        }
    }
    line(4, checked >= 100 && bad == 0, &format!("{checked} conclusive sides, {bad} disagreements"))
}

fn c5_hitting() -> bool {
    let skew = scale(&fixtures::skew_bm::<f64>(0.7));
    let bm = scale(&fixtures::brownian::<f64>());
    let mut ok = true;
    for scheme in SCHEMES {
        let t = Instant::now();
        let spec = McSpec::new(scheme, 100_000, 5, 1e-3);
        let e = mc_hitting(&skew, &spec, 0.0, -1.0, 1.0).unwrap();
        let m = mc_hitting(&bm, &spec, 0.0, -1.0, 1.0).unwrap();
        let el = t.elapsed().as_secs_f64();
        let p = (e.estimate - 0.7).abs() <= 3.0 * e.std_error + 0.01
            && (e.target.unwrap() - 0.7).abs() < 1e-12
            && (m.estimate - 0.5).abs() <= 3.0 * m.std_error
            && el < 120.0;
        ok &= line(
            5,
            p,
            &format!(
                "{scheme:?}: skew {:.4} ± {:.4}, Brownian {:.4} ± {:.4}, {el:.1}s",
                e.estimate, e.std_error, m.estimate, m.std_error
            ),
        );
    }
    ok
}

fn c6_martingale() -> bool {
    let mut ok = true;
    let fx: Vec<SkewConfig<f64>> =
        vec![fixtures::brownian(), fixtures::skew_bm(0.7), fixtures::geometric_decay(), fixtures::transient_right()];
    for c in &fx {
        assert_eq!(classify_all(c, &ClassifyOptions::default()).conservative.holds, Tri::True, "{}", c.name);
        let sf = scale(c);
        for scheme in SCHEMES {
            let plan = SimPlan::new(scheme, 0.3, 1.0, 1e-3, 20_000, 6);
            let e = simulate_path(c, &sf, &plan).unwrap().martingale_check(&sf);
            let t = e.target.unwrap();
            ok &= line(
                6,
                (e.estimate - t).abs() <= 3.0 * e.std_error && e.excluded == 0,
                &format!("{} {scheme:?}: mean h(X_T) {:.4} vs h(x0) {t:.4}, SE {:.4}", c.name, e.estimate, e.std_error),
            );
        }
    }
    ok
}

fn c7_quadratic_variation() -> bool {
    let mut ok = true;
    for c in [fixtures::brownian::<f64>(), fixtures::skew_bm(0.7)] {
        let sf = scale(&c);
        for scheme in SCHEMES {
            let mut plan = SimPlan::new(scheme, 0.0, 1.0, 1e-4, 50, 7);
            plan.record = Record::Functionals;
            let ens = simulate_path(&c, &sf, &plan).unwrap();
            let qv = ens.paths.iter().map(|p| p.qv).sum::<f64>() / ens.paths.len() as f64;
            ok &= line(7, (qv - 1.0).abs() < 0.03, &format!("{} {scheme:?}: mean QV {qv:.4}", c.name));
        }
    }
    ok
}

fn c8_exit_time() -> bool {
    let mut ok = true;
    for c in [fixtures::brownian::<f64>(), fixtures::skew_bm(0.7)] {
        let sf = scale(&c);
        for scheme in SCHEMES {
            let e = mc_exit_time(&sf, &McSpec::new(scheme, 100_000, 8, 1e-3), 0.0, -1.0, 1.0).unwrap();
            let t = e.target.unwrap();
            let pass = (e.estimate - 1.0).abs() <= 3.0 * e.std_error && (t - 1.0).abs() < 1e-12;
            let detail = format!("{} {scheme:?}: {:.4} ± {:.4}", c.name, e.estimate, e.std_error);
            // the transformed Euler scheme carries an O(√dt) bias at the interface
            if scheme == Scheme::ExactSkew {
                ok &= line(8, pass, &detail);
            } else {
                info(8, &detail);
            }
        }
    }
    ok
}

fn c9_local_time() -> bool {
    let target = (2.0 / std::f64::consts::PI).sqrt();
    let mut ok = true;
    for c in [fixtures::brownian::<f64>(), fixtures::skew_bm(0.7)] {
        let sf = scale(&c);
        for scheme in SCHEMES {
            let mut plan = SimPlan::new(scheme, 0.0, 1.0, 1e-4, 10_000, 9);
            plan.record = Record::Functionals;
            plan.local_time = vec![(0.0, 0.02)];
            let ens = simulate_path(&c, &sf, &plan).unwrap();
            let m = ens.paths.iter().map(|p| p.local_times[0]).sum::<f64>() / ens.paths.len() as f64;
            let detail = format!("{} {scheme:?}: mean local time {m:.4} vs {target:.4}", c.name);
            if scheme == Scheme::ExactSkew {
                ok &= line(9, (m / target - 1.0).abs() < 0.05, &detail);
            } else {
                info(9, &detail);
            }
        }
    }
    ok
}

fn c10_invariant_law() -> bool {
    let c = fixtures::geometric_decay::<f64>();
    let sf = scale(&c);
    let t = Instant::now();
    let plan = SimPlan::new(Scheme::EulerTransformed, 0.0, 2000.0, 1e-3, 1, 10);
    let o = occupation_histogram(&c, &sf, &plan, Bins { lo: -10.0, hi: 10.0, n: 40 }).unwrap();
    let tv = o.tv.unwrap();
    let el = t.elapsed().as_secs_f64();
    line(10, tv < 0.05 && el < 300.0, &format!("TV {tv:.4}, {el:.1}s"))
}

fn c11_explosion() -> bool {
    let c = fixtures::counterexample::<f64>(2.0);
    let sf = scale(&c);
    let fr: Vec<f64> = [10.0, 25.0, 50.0]
        .iter()
        .map(|&t| {
            let mut plan = SimPlan::new(Scheme::EulerTransformed, 0.0, t, 1e-3, 1000, 11);
            plan.allow_explosive = true;
            plan.x_max = 1e3;
            simulate_path(&c, &sf, &plan).unwrap().censored_fraction()
        })
        .collect();
    line(11, fr[2] > 0.0 && fr[0] <= fr[1] && fr[1] <= fr[2], &format!("censored fractions {fr:?}"))
}

/// `h̄` from the layer data: slope `1/(c²D)` against `Ψ` with slope `c√D`.
fn hbar_oracle(lay: &Layered, x: f64) -> f64 {
    let cfg = &lay.layer;
    let (side, c, d) = if x >= 0.0 {
        (Side::Positive, lay.cbar_alpha, cfg.dbar.compile(Side::Positive).unwrap())
    } else {
        (Side::Negative, lay.c_alpha, cfg.d.compile(Side::Negative).unwrap())
    };
    let bp = |k: i64| match side {
        Side::Positive => cfg.partition.positive.0.compile(Side::Positive).unwrap().at(k),
        Side::Negative => cfg.partition.negative.0.compile(Side::Negative).unwrap().at(k),
    };
    // segment k: positive (r_k, r_{k+1}) with D̄_k; negative (l_{k-1}, l_k) with D_{k-1}, walked outward
    let seg = |j: i64| match side {
        Side::Positive => (bp(j), bp(j + 1), d.at(j)),
        Side::Negative => (bp(-j), bp(-j - 1), d.at(-j - 1)),
    };
    let mut j = -60;
    let (mut psi, mut h) = (0.0, 0.0);
    let (a0, _, d0) = seg(j);
    let s0 = c * d0.sqrt();
    psi += s0 * a0;
    h += s0 * a0 / (c * c * d0);
    let target = x.abs();
    if psi >= target {
        return x.signum() * target / (c * c * d0);
    }
    loop {
        let (a, b, dk) = seg(j);
        let s = c * dk.sqrt();
        let inc = s * (b - a);
        if psi + inc >= target {
            return x.signum() * (h + (target - psi) / (c * c * dk));
        }
        psi += inc;
        h += inc / (c * c * dk);
        j += 1;
    }
}

fn c12_layered() -> bool {
    let lay = build_layered(&bounded_range_fixture(0.5), &ScaleOptions::default()).unwrap();
    let r = classify_layered(&lay, &Budget::default());
    let class_ok = r.recurrent == Tri::True && r.positive_recurrent == Tri::True && r.bounded_range;
    let mut ok = line(12, class_ok, &format!("recurrent {:?}, positive {:?}, Ψ range {:?}", r.recurrent, r.positive_recurrent, r.psi_range));

    let (x, a, b) = (0.0, -0.6, 0.9);
    let oracle = {
        let (ha, hb, hx) = (hbar_oracle(&lay, a), hbar_oracle(&lay, b), hbar_oracle(&lay, x));
        (hx - ha) / (hb - ha)
    };
    let e = lay.mc_hitting(&McSpec::new(Scheme::EulerTransformed, 40_000, 12, 1e-3), x, a, b).unwrap();
    ok &= line(
        12,
        (e.estimate - oracle).abs() <= 3.0 * e.std_error && (e.target.unwrap() - oracle).abs() < 1e-9,
        &format!("layered hitting {:.4} ± {:.4} vs h̄ {oracle:.4}", e.estimate, e.std_error),
    );

    let mut plan = SimPlan::new(Scheme::EulerTransformed, 0.0, 2.0, 1e-3, 4000, 12);
    plan.record = Record::FullPath;
    plan.stride = 250;
    let ens = simulate_xy(&lay, &plan, 1.5).unwrap();
    let grid: Vec<f64> = (0..=8).map(|i| 0.25 * i as f64).collect();
    let rows = dispersion_stats(&ens, &grid);
    let flat = rows.iter().all(|r| (r.mean - 1.5).abs() <= 3.0 * r.se_mean);
    let worst = rows.iter().skip(1).map(|r| (r.mean - 1.5).abs() / r.se_mean).fold(0.0, f64::max);
    ok &= line(12, flat, &format!("β₂ ≡ 0: Y mean constant, max |Δ|/SE {worst:.2}"));
    ok
}

fn c13_determinism() -> bool {
    let c = fixtures::skew_bm::<f64>(0.7);
    let sf = scale(&c);
    let mut ok = true;
    for scheme in SCHEMES {
        let outs: Vec<Vec<u8>> = [1, 4, 8]
            .iter()
            .map(|&k| {
                let mut plan = SimPlan::new(scheme, 0.1, 0.5, 1e-3, 64, 13);
                plan.record = Record::FullPath;
                plan.stride = 10;
                plan.threads = Some(k);
                let mut buf = Vec::new();
                simulate_path(&c, &sf, &plan).unwrap().write_paths_csv(&mut buf).unwrap();
                let mut spec = McSpec::new(scheme, 2000, 13, 1e-3);
                spec.threads = Some(k);
                let e = mc_hitting(&sf, &spec, 0.0, -1.0, 1.0).unwrap();
                buf.extend_from_slice(format!("{:e},{:e}", e.estimate, e.std_error).as_bytes());
                buf
            })
            .collect();
        ok &= line(13, outs[0] == outs[1] && outs[1] == outs[2], &format!("{scheme:?}: threads 1/4/8 byte-identical"));
    }
    ok
}

// Runs without the test harness so the criterion lines are never captured.
fn main() {
    let results = [
        c1_fixture_verdicts(),
        c2_equivalence(),
        c3_phi_oracle(),
        c4_feller_agreement(),
        c5_hitting(),
        c6_martingale(),
        c7_quadratic_variation(),
        c8_exit_time(),
        c9_local_time(),
        c10_invariant_law(),
        c11_explosion(),
        c12_layered(),
        c13_determinism(),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
