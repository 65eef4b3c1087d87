//! Cross-validated grid search over a reduced PV grid on a handful of
//! synthetic recordings.

use swphase::evaluation::{EvalConfig, PreparedRecording};
use swphase::optimizer::{grid_search_cv, ParamGrid, TrackerEvaluator};
use swphase::recording::{Hypnogram, Stage};
use swphase::synth::{generate, SynthSpec};
use swphase::trackers::Algorithm;

fn main() -> swphase::Result<()> {
    let recordings = (0..4)
        .map(|seed| {
            let spec = SynthSpec {
                hypnogram: Hypnogram::from_runs(&[(Stage::N2, 4.0), (Stage::N3, 14.0)]),
                seed: 40 + seed,
                ..SynthSpec::default()
            };
            let out = generate(&spec)?;
            PreparedRecording::prepare(&out.recording.with_hypnogram(out.hypnogram), &EvalConfig::default())
        })
        .collect::<swphase::Result<Vec<_>>>()?;

    let mut grid = ParamGrid::default_for(Algorithm::Pv);
    grid.phi_t = vec![0.0, 30.0, 60.0, 90.0, 330.0];
    grid.gain = vec![1e-3, 1e-2, 1e-1];
    grid.fs_span = vec![125, 250];
    let cv = grid_search_cv(
        &TrackerEvaluator {
            recordings: &recordings,
        },
        &grid.combos()?,
        4,
        1,
    )?;

    for i in cv.ranking().into_iter().take(5) {
        let o = &cv.outcomes[i];
        println!(
            "phi_t {:5.1}  k_pv {:.0e}  span {:3}  ed_error {:.4}{}",
            o.config.phi_t,
            o.config.k_pv,
            o.config.fs_span,
            o.ed_error,
            if o.selected { "  <- selected" } else { "" }
        );
    }
    Ok(())
}
