use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swphase::angle::wrap_deg;
use swphase::dsp::{PreprocessConfig, Preprocessor};
use swphase::pipeline::{run_pipeline, PipelineConfig};
use swphase::trackers::{
    phase_trace, refractory_samples, triggers_from_phase_trace, Algorithm, PhaseTracker, TrackerConfig,
};

const FS: f64 = 250.0;

fn noisy_waves(seed: u64, n: usize, amp: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = rng.random_range(0.5..2.0);
    (0..n)
        .map(|i| amp * (std::f64::consts::TAU * f * i as f64 / FS).sin() + rng.random_range(-20.0..20.0))
        .collect()
}

fn triggers(tracker: &mut dyn PhaseTracker, xs: &[f64]) -> Vec<u64> {
    xs.iter()
        .filter_map(|&x| tracker.step(x).trigger.map(|t| t.sample_index))
        .collect()
}

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![Just(Algorithm::At), Just(Algorithm::Pll), Just(Algorithm::Pv)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn preprocessing_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x = noisy_waves(seed, 2000, 60.0);
        let y = noisy_waves(seed ^ 0x5a5a, 2000, 40.0);
        let cfg = PreprocessConfig::default();
        let run = |v: &[f64]| Preprocessor::new(FS, &cfg).unwrap().run(v).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (run(&x), run(&y), run(&mix));
        for i in 0..mix.len() {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn preprocessing_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..20_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = Preprocessor::new(FS, &PreprocessConfig::default()).unwrap().run(&x).unwrap();
        prop_assert!(y.iter().all(|v| v.is_finite() && v.abs() < 20.0));
    }

    #[test]
    fn refractory_respected(alg in algorithm(), seed in any::<u64>(), refr in 0.05f64..1.0) {
        let cfg = TrackerConfig { refractory: refr, at_threshold: 5.0, ..TrackerConfig::with_algorithm(alg) };
        let xs = noisy_waves(seed, 5000, 80.0);
        let t = triggers(cfg.build(FS).unwrap().as_mut(), &xs);
        let gap = refractory_samples(refr, FS);
        prop_assert!(t.windows(2).all(|w| w[1] - w[0] >= gap));
    }

    #[test]
    fn phase_estimates_stay_in_range(alg in prop_oneof![Just(Algorithm::Pll), Just(Algorithm::Pv)], seed in any::<u64>()) {
        let xs = noisy_waves(seed, 4000, 70.0);
        let trace = phase_trace(TrackerConfig::with_algorithm(alg).build(FS).unwrap().as_mut(), &xs);
        prop_assert!(trace.iter().all(|p| (0.0..360.0).contains(p)));
    }

    #[test]
    fn pll_step_is_bounded(f in 0.5f64..2.0, amp in 10.0f64..200.0) {
        let cfg = TrackerConfig::with_algorithm(Algorithm::Pll);
        let xs: Vec<f64> = (0..5000).map(|i| amp * (std::f64::consts::TAU * f * i as f64 / FS).sin()).collect();
        let trace = phase_trace(cfg.build(FS).unwrap().as_mut(), &xs);
        let bound = 360.0 / FS + (cfg.k_pll * amp).to_degrees() + 1e-9;
        for w in trace.windows(2) {
            let d = wrap_deg(w[1] - w[0] + 180.0) - 180.0;
            prop_assert!(d.abs() <= bound);
        }
    }

    #[test]
    fn trackers_are_deterministic(alg in algorithm(), seed in any::<u64>()) {
        let xs = noisy_waves(seed, 4000, 60.0);
        let cfg = PipelineConfig { tracker: TrackerConfig::with_algorithm(alg), ..PipelineConfig::default() };
        let a = run_pipeline(xs.iter().copied(), FS, &cfg).unwrap();
        let b = run_pipeline(xs.iter().copied(), FS, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn reset_restores_initial_behaviour(alg in algorithm(), seed in any::<u64>()) {
        let xs = noisy_waves(seed, 3000, 60.0);
        let mut t = TrackerConfig::with_algorithm(alg).build(FS).unwrap();
        let first = triggers(t.as_mut(), &xs);
        t.reset();
        prop_assert_eq!(first, triggers(t.as_mut(), &xs));
    }

    #[test]
    fn pll_depends_on_gain_amplitude_product(seed in any::<u64>(), k in 1e-4f64..1e-1, shift in -4i32..4) {
        let xs = noisy_waves(seed, 3000, 50.0);
        let s = 2f64.powi(shift);
        let base = TrackerConfig { k_pll: k, ..TrackerConfig::with_algorithm(Algorithm::Pll) };
        let scaled = TrackerConfig { k_pll: k * s, ..base.clone() };
        let ys: Vec<f64> = xs.iter().map(|x| x / s).collect();
        let a = phase_trace(base.build(FS).unwrap().as_mut(), &xs);
        let b = phase_trace(scaled.build(FS).unwrap().as_mut(), &ys);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn offline_replay_matches_online(alg in prop_oneof![Just(Algorithm::Pll), Just(Algorithm::Pv)], seed in any::<u64>(), phi in 0u32..24) {
        let cfg = TrackerConfig { phi_t: phi as f64 * 15.0, ..TrackerConfig::with_algorithm(alg) };
        let xs = noisy_waves(seed, 4000, 60.0);
        let online = triggers(cfg.build(FS).unwrap().as_mut(), &xs);
        let trace = phase_trace(cfg.build(FS).unwrap().as_mut(), &xs);
        prop_assert_eq!(online, triggers_from_phase_trace(&trace, cfg.phi_t, cfg.refractory, FS));
    }
}
