use std::sync::Arc;

use approx::assert_abs_diff_eq;
use kickmap_core::atlas::{
    compute_a_set, default_schedule, ergodicity_thresholds, fit_c_hat, measure_report,
    scheduled_window,
};
use kickmap_core::{ArcSet, Error, MapParams, ParameterWindow, PsiSpec};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn sine() -> Arc<PsiSpec<f64>> {
    Arc::new(PsiSpec::sine())
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn nearly_everything_is_admissible_for_small_k_and_large_l() {
    let w = compute_a_set(sine(), 1e6, 1e-7, 1.0, 1.0).unwrap();
    assert!(w.measure > 0.999, "{}", w.measure);
}

#[test]
fn membership_matches_the_definition() {
    let (l, eps, k1, k2) = (500.0, 0.01, 4.0, 3.0);
    let w = compute_a_set(sine(), l, eps, k1, k2).unwrap();
    let p0 = MapParams::new(0.0, l, sine()).unwrap();
    let target = p0.non_expanding_set(k2).unwrap().dilate(eps);
    let source = p0.non_expanding_set(k1).unwrap();
    let excluded = w.set.complement();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..64 {
        let a_in = w.set.quantile(unit(&mut rng)).unwrap();
        let hit = p0.with_a(a_in).image(&source, 0.0).intersects(&target);
        assert!(!hit, "a = {a_in} is in A but the image meets the target");
        let a_out = excluded.quantile(unit(&mut rng)).unwrap();
        let hit = p0.with_a(a_out).image(&source, 0.0).intersects(&target);
        assert!(hit, "a = {a_out} is excluded but the image misses the target");
    }
}

#[test]
fn components_stay_below_n_squared() {
    for &l in &[200.0, 1e3, 1e4, 1e5] {
        for &eps in &[1e-4, 1e-3, 1e-2, 0.05] {
            let s = default_schedule(l).unwrap();
            match compute_a_set(sine(), l, eps, s.k1, s.k2) {
                Ok(w) => {
                    assert!(w.component_count <= 4, "L={l} eps={eps}: {}", w.component_count);
                    assert!(w.set.complement().component_count() <= 4);
                }
                Err(Error::EmptyAtlas) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn admissible_set_shrinks_as_eps_grows() {
    let (l, k1, k2) = (2000.0, 6.0, 3.0);
    let mut prev: Option<ArcSet<f64>> = None;
    for &eps in &[1e-4, 1e-3, 5e-3, 2e-2] {
        let w = compute_a_set(sine(), l, eps, k1, k2).unwrap();
        if let Some(p) = prev {
            assert!(w.set.is_subset_of(&p.dilate(1e-12)));
        }
        prev = Some(w.set);
    }
}

#[test]
fn empty_atlas_is_reported() {
    assert!(matches!(
        compute_a_set(sine(), 100.0, 0.3, 40.0, 40.0),
        Err(Error::EmptyAtlas)
    ));
    assert!(compute_a_set(sine(), 100.0, 0.01, 0.5, 2.0).is_err());
}

#[test]
fn scheduled_measure_grows_with_l() {
    let mut prev = 0.0;
    let mut reports = Vec::new();
    for &l in &[1e3, 1e4, 1e5, 1e6] {
        let w = scheduled_window(sine(), l).unwrap();
        assert!(w.measure > prev, "L={l}: {} <= {prev}", w.measure);
        prev = w.measure;
        let r = measure_report(&w);
        assert!(r.deficit <= r.c_hat * (r.k1_sq_over_l + r.k2_over_l) + r.two_eps0 + 1e-12);
        reports.push(r);
    }
    assert!(prev > 0.8);
    assert!(fit_c_hat(&reports) >= reports[0].c_hat);
}

#[test]
fn report_for_full_window_has_no_deficit() {
    let w = ParameterWindow {
        amplitude: 1e4,
        eps0: 0.0,
        k1: 1.0,
        k2: 1.0,
        set: ArcSet::full(),
        measure: 1.0,
        component_count: 1,
    };
    let r = measure_report(&w);
    assert_eq!(r.deficit, 0.0);
    assert_eq!(r.c_hat, 0.0);
}

#[test]
fn schedule_arithmetic() {
    let s = default_schedule(1e4f64).unwrap();
    let log_l = 1e4f64.ln();
    assert_abs_diff_eq!(s.k1 * s.k1 / 1e4, 1.0 / log_l, epsilon = 1e-14);
    assert_abs_diff_eq!(s.k2 / 1e4, 1e-2 / log_l, epsilon = 1e-16);
    assert_abs_diff_eq!(2.0 * s.eps0, 0.02, epsilon = 1e-16);
    assert_abs_diff_eq!(s.k2 / s.k1, log_l.powf(-0.5), epsilon = 1e-14);
    assert!((s.k2 / s.k1 - 0.33).abs() < 0.005);
    let mut prev = 0.0;
    for e in 2..=8 {
        let l = 10f64.powi(e);
        let s = default_schedule(l).unwrap();
        assert!(s.k1 >= 1.0 && s.k2 >= 1.0);
        let r = s.k2.ln() / l.ln();
        assert!(r > prev && r < 0.5);
        prev = r;
    }
    assert!(default_schedule(1e9f64).is_err());
}

#[test]
fn thresholds_shrink_like_one_over_l() {
    let (g4, b4) = ergodicity_thresholds(sine(), 1e4).unwrap();
    let (g5, b5) = ergodicity_thresholds(sine(), 1e5).unwrap();
    assert!((b5 / b4 - 0.1).abs() < 1e-3);
    assert!((g5 / g4 - 0.1).abs() < 1e-3);
    for &l in &[0.5, 3.0, 1e2, 1e6] {
        let (g, b) = ergodicity_thresholds(sine(), l).unwrap();
        assert!(g <= 0.5 && b <= 0.5 && g > 0.0 && b > 0.0);
        if l >= 1e2 {
            assert!(g < 0.5 && b < 0.5);
        }
    }
    assert_abs_diff_eq!(ergodicity_thresholds(sine(), 100.0).unwrap().1, 1.0 / (100.0 * std::f64::consts::PI), epsilon = 1e-5);
}

#[test]
fn window_json_layout() {
    let w = scheduled_window(sine(), 1e4).unwrap();
    let v: serde_json::Value = serde_json::from_str(&w.to_json()).unwrap();
    for key in ["L", "eps0", "K1", "K2", "arcs", "measure", "component_count"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["arcs"].as_array().unwrap().len(), w.component_count);
}
