//! Grid search with k-fold cross-validation and Euclidean-distance-to-utopia
//! selection.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::evaluation::{Objectives, PreparedRecording, TriggerStats};
use crate::trackers::{
    phase_trace, triggers_from_phase_trace, triggers_from_threshold, Algorithm, AtTracker, TrackerConfig,
};

/// Distance of the objective vector to the utopia point (0, 0, 1).
pub fn euclidean_distance(cmae_norm: f64, pas_not_up_norm: f64, pas_in_up_norm: f64) -> Result<f64> {
    for (name, v) in [
        ("cmae_norm", cmae_norm),
        ("pas_not_up_norm", pas_not_up_norm),
        ("pas_in_up_norm", pas_in_up_norm),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(name, format!("{v} outside [0, 1]")));
        }
    }
    Ok(ed_unchecked(cmae_norm, pas_not_up_norm, pas_in_up_norm))
}

fn ed_unchecked(a: f64, b: f64, c: f64) -> f64 {
    (a * a + b * b + (1.0 - c) * (1.0 - c)).sqrt()
}

pub fn objective_distance(o: &Objectives) -> f64 {
    ed_unchecked(o.cmae_norm, o.pas_not_up_norm, o.pas_in_up_norm)
}

/// Shuffles `0..n` with a seeded generator and cuts it into `k` folds whose
/// sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(invalid("k", "need at least two folds"));
    }
    if n < k {
        return Err(invalid("k", format!("{n} recordings cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let len = base + usize::from(j < extra);
        let mut f = idx[start..start + len].to_vec();
        f.sort_unstable();
        folds.push(f);
        start += len;
    }
    Ok(folds)
}

/// Declared parameter axes of one algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    pub algorithm: Algorithm,
    pub phi_t: Vec<f64>,
    /// Loop gain: `k_pll` for PLL, `k_pv` for PV; unused by AT.
    pub gain: Vec<f64>,
    pub fs_span: Vec<usize>,
    pub at_threshold: Vec<f64>,
    /// Values for every parameter not on an axis.
    pub base: TrackerConfig,
}

impl ParamGrid {
    pub fn default_phi_t() -> Vec<f64> {
        (0..24).map(|j| 15.0 * j as f64).collect()
    }

    /// Nine log-spaced gains from 1e-5 to 1e-1.
    pub fn default_gains() -> Vec<f64> {
        (0..9).map(|j| 10f64.powf(-5.0 + 0.5 * j as f64)).collect()
    }

    pub fn default_for(algorithm: Algorithm) -> Self {
        let base = TrackerConfig::with_algorithm(algorithm);
        match algorithm {
            Algorithm::At => Self {
                algorithm,
                phi_t: vec![base.phi_t],
                gain: vec![],
                fs_span: vec![base.fs_span],
                at_threshold: vec![30.0, 40.0, 50.0, 60.0, 75.0],
                base,
            },
            Algorithm::Pll => Self {
                algorithm,
                phi_t: Self::default_phi_t(),
                gain: Self::default_gains(),
                fs_span: vec![base.fs_span],
                at_threshold: vec![base.at_threshold],
                base,
            },
            Algorithm::Pv => Self {
                algorithm,
                phi_t: Self::default_phi_t(),
                gain: Self::default_gains(),
                fs_span: vec![25, 50, 125, 250],
                at_threshold: vec![base.at_threshold],
                base,
            },
        }
    }

    /// Every combination, gain outermost, then span, threshold and target
    /// phase innermost. This is the declaration order used for tie-breaks.
    pub fn combos(&self) -> Result<Vec<TrackerConfig>> {
        let gains: Vec<Option<f64>> = match self.algorithm {
            Algorithm::At => vec![None],
            _ if self.gain.is_empty() => return Err(invalid("gain", "axis is empty")),
            _ => self.gain.iter().copied().map(Some).collect(),
        };
        let spans: Vec<usize> = match self.algorithm {
            Algorithm::Pv => self.fs_span.clone(),
            _ => vec![self.base.fs_span],
        };
        let thresholds: Vec<f64> = match self.algorithm {
            Algorithm::At => self.at_threshold.clone(),
            _ => vec![self.base.at_threshold],
        };
        let phis: Vec<f64> = match self.algorithm {
            Algorithm::At => vec![self.base.phi_t],
            _ => self.phi_t.clone(),
        };
        if spans.is_empty() || thresholds.is_empty() || phis.is_empty() {
            return Err(invalid("grid", "an axis is empty"));
        }
        let mut out = Vec::new();
        for g in &gains {
            for &span in &spans {
                for &thr in &thresholds {
                    for &phi in &phis {
                        let mut c = TrackerConfig {
                            algorithm: self.algorithm,
                            phi_t: phi,
                            fs_span: span,
                            at_threshold: thr,
                            ..self.base.clone()
                        };
                        match (self.algorithm, g) {
                            (Algorithm::Pll, Some(k)) => c.k_pll = *k,
                            (Algorithm::Pv, Some(k)) => c.k_pv = *k,
                            _ => {}
                        }
                        c.validate()?;
                        out.push(c);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Produces per-recording trigger statistics for a list of combos.
pub trait ComboEvaluator: Sync {
    fn recordings(&self) -> usize;
    /// Statistics of every combo on recording `r`, in combo order.
    fn evaluate(&self, combos: &[TrackerConfig], r: usize) -> Result<Vec<TriggerStats>>;
}

/// Runs the real trackers on prepared recordings. Combos that differ only
/// in target phase (or threshold, for AT) share one tracker run.
pub struct TrackerEvaluator<'a> {
    pub recordings: &'a [PreparedRecording],
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct DynamicKey {
    algorithm: Algorithm,
    gain: u64,
    fs_span: usize,
    refractory: u64,
    pre_lowpass: Option<u64>,
}

impl DynamicKey {
    fn of(c: &TrackerConfig) -> Self {
        let gain = match c.algorithm {
            Algorithm::At => 0,
            Algorithm::Pll => c.k_pll.to_bits(),
            Algorithm::Pv => c.k_pv.to_bits(),
        };
        Self {
            algorithm: c.algorithm,
            gain,
            fs_span: if c.algorithm == Algorithm::Pv { c.fs_span } else { 0 },
            refractory: c.refractory.to_bits(),
            pre_lowpass: c.pre_lowpass_hz.map(f64::to_bits),
        }
    }
}

impl ComboEvaluator for TrackerEvaluator<'_> {
    fn recordings(&self) -> usize {
        self.recordings.len()
    }

    fn evaluate(&self, combos: &[TrackerConfig], r: usize) -> Result<Vec<TriggerStats>> {
        let rec = &self.recordings[r];
        let mut groups: HashMap<DynamicKey, Vec<usize>> = HashMap::new();
        let mut order = Vec::new();
        for (i, c) in combos.iter().enumerate() {
            let key = DynamicKey::of(c);
            groups
                .entry(key)
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(i);
        }
        let mut out = vec![TriggerStats::default(); combos.len()];
        for key in order {
            let members = &groups[&key];
            let first = &combos[members[0]];
            match key.algorithm {
                Algorithm::At => {
                    let mut at = AtTracker::new(first, rec.fs)?;
                    let trace: Vec<f64> = rec.preprocessed.iter().map(|&x| at.filter(x)).collect();
                    for &i in members {
                        let c = &combos[i];
                        let trig = triggers_from_threshold(&trace, c.at_threshold, c.refractory, rec.fs);
                        out[i] = rec.stats(&trig);
                    }
                }
                _ => {
                    let mut tracker = first.build(rec.fs)?;
                    let trace = phase_trace(tracker.as_mut(), &rec.preprocessed);
                    for &i in members {
                        let c = &combos[i];
                        let trig = triggers_from_phase_trace(&trace, c.phi_t, c.refractory, rec.fs);
                        out[i] = rec.stats(&trig);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    pub config: TrackerConfig,
    /// ED of the pooled optimization recordings, per fold iteration.
    pub ed_opt: Vec<f64>,
    /// ED of the pooled validation recordings, per fold iteration.
    pub ed_val: Vec<f64>,
    pub mean_opt: f64,
    pub mean_val: f64,
    /// `mean_val + |mean_opt - mean_val|`.
    pub ed_error: f64,
    /// Validation objectives averaged over fold iterations.
    pub val_objectives: Objectives,
    /// Strictly beaten on all three mean validation objectives by another combo.
    pub dominated: bool,
    pub selected: bool,
}

#[derive(Clone, Debug)]
pub struct CvResult {
    pub outcomes: Vec<CvOutcome>,
    pub selected: usize,
    pub folds: Vec<Vec<usize>>,
}

impl CvResult {
    pub fn selected_config(&self) -> &TrackerConfig {
        &self.outcomes[self.selected].config
    }

    pub fn selected_outcome(&self) -> &CvOutcome {
        &self.outcomes[self.selected]
    }

    /// Combo indices ordered by the selection rule, ignoring dominance.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.outcomes.len()).collect();
        idx.sort_by(|&a, &b| rank_cmp(&self.outcomes[a], &self.outcomes[b]).then(a.cmp(&b)));
        idx
    }
}

const TIE_EPS: f64 = 1e-12;

fn cmp_eps(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= TIE_EPS {
        std::cmp::Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

fn rank_cmp(a: &CvOutcome, b: &CvOutcome) -> std::cmp::Ordering {
    cmp_eps(a.ed_error, b.ed_error).then(cmp_eps(a.mean_val, b.mean_val))
}

/// Per-recording statistics for every combo, computed once.
pub fn stats_matrix(eval: &dyn ComboEvaluator, combos: &[TrackerConfig]) -> Result<Vec<Vec<TriggerStats>>> {
    (0..eval.recordings())
        .into_par_iter()
        .map(|r| eval.evaluate(combos, r))
        .collect()
}

/// Cross-validated grid search.
///
/// For fold iteration `j`, fold `j` is the validation set and the remaining
/// folds the optimization set; trigger statistics are pooled over each set
/// before computing ED. The selected combo minimizes `ed_error` among combos
/// that are not strictly dominated on the mean validation objectives; ties
/// go to the smaller mean validation ED, then to grid order.
pub fn grid_search_cv(eval: &dyn ComboEvaluator, combos: &[TrackerConfig], k: usize, seed: u64) -> Result<CvResult> {
    if combos.is_empty() {
        return Err(invalid("grid", "no combinations"));
    }
    let folds = kfold_split(eval.recordings(), k, seed)?;
    let matrix = stats_matrix(eval, combos)?;
    Ok(select_from_stats(combos, &matrix, folds))
}

/// Selection from a precomputed `matrix[recording][combo]`.
pub fn select_from_stats(combos: &[TrackerConfig], matrix: &[Vec<TriggerStats>], folds: Vec<Vec<usize>>) -> CvResult {
    let k = folds.len();
    let mut outcomes: Vec<CvOutcome> = combos
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let mut ed_opt = Vec::with_capacity(k);
            let mut ed_val = Vec::with_capacity(k);
            let mut obj_sum = [0.0; 3];
            for (j, fold) in folds.iter().enumerate() {
                let mut val = TriggerStats::default();
                let mut opt = TriggerStats::default();
                for (o, other) in folds.iter().enumerate() {
                    for &r in other {
                        if o == j {
                            val += matrix[r][c];
                        } else {
                            opt += matrix[r][c];
                        }
                    }
                }
                debug_assert!(!fold.is_empty());
                let vo = val.objectives();
                ed_opt.push(objective_distance(&opt.objectives()));
                ed_val.push(objective_distance(&vo));
                obj_sum[0] += vo.cmae_norm;
                obj_sum[1] += vo.pas_not_up_norm;
                obj_sum[2] += vo.pas_in_up_norm;
            }
            let mean_opt = ed_opt.iter().sum::<f64>() / k as f64;
            let mean_val = ed_val.iter().sum::<f64>() / k as f64;
            CvOutcome {
                config: cfg.clone(),
                ed_opt,
                ed_val,
                mean_opt,
                mean_val,
                ed_error: mean_val + (mean_opt - mean_val).abs(),
                val_objectives: Objectives {
                    cmae_norm: obj_sum[0] / k as f64,
                    pas_not_up_norm: obj_sum[1] / k as f64,
                    pas_in_up_norm: obj_sum[2] / k as f64,
                },
                dominated: false,
                selected: false,
            }
        })
        .collect();
    let objs: Vec<Objectives> = outcomes.iter().map(|o| o.val_objectives).collect();
    for (c, o) in outcomes.iter_mut().enumerate() {
        o.dominated = objs
            .iter()
            .enumerate()
            .any(|(d, od)| d != c && od.strictly_dominates(&objs[c]));
    }
    let selected = (0..outcomes.len())
        .filter(|&c| !outcomes[c].dominated)
        .min_by(|&a, &b| rank_cmp(&outcomes[a], &outcomes[b]).then(a.cmp(&b)))
        .expect("a finite set always has a non-dominated member");
    outcomes[selected].selected = true;
    CvResult {
        outcomes,
        selected,
        folds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn ed_unit_values() {
        assert_eq!(euclidean_distance(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(euclidean_distance(1.0, 1.0, 0.0).unwrap(), 3f64.sqrt());
        assert_eq!(euclidean_distance(0.5, 0.0, 1.0).unwrap(), 0.5);
        assert!(euclidean_distance(1.5, 0.0, 1.0).is_err());
        assert_eq!(objective_distance(&Objectives::NO_TRIGGERS), 2f64.sqrt());
    }

    #[test]
    fn kfold_examples() {
        let f = kfold_split(40, 5, 7).unwrap();
        assert!(f.iter().all(|x| x.len() == 8));
        let f = kfold_split(5, 5, 7).unwrap();
        assert!(f.iter().all(|x| x.len() == 1));
        assert_eq!(kfold_split(23, 5, 3).unwrap(), kfold_split(23, 5, 3).unwrap());
        assert!(kfold_split(4, 5, 1).is_err());
        let mut all: Vec<usize> = kfold_split(23, 5, 3).unwrap().concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn default_grids() {
        let pv = ParamGrid::default_for(Algorithm::Pv).combos().unwrap();
        assert_eq!(pv.len(), 24 * 9 * 4);
        let pll = ParamGrid::default_for(Algorithm::Pll).combos().unwrap();
        assert_eq!(pll.len(), 24 * 9);
        let at = ParamGrid::default_for(Algorithm::At).combos().unwrap();
        assert_eq!(at.len(), 5);
        let g = ParamGrid::default_gains();
        assert!((g[0] - 1e-5).abs() < 1e-20 && (g[8] - 1e-1).abs() < 1e-15);
    }

    /// Evaluator backed by a fixed statistics table.
    pub(crate) struct TableEvaluator(pub Vec<Vec<TriggerStats>>);

    impl ComboEvaluator for TableEvaluator {
        fn recordings(&self) -> usize {
            self.0.len()
        }

        fn evaluate(&self, combos: &[TrackerConfig], r: usize) -> Result<Vec<TriggerStats>> {
            Ok(self.0[r][..combos.len()].to_vec())
        }
    }

    fn stats(up: usize, not_up: usize, mean_deg: f64, windows: usize) -> TriggerStats {
        let mut s = TriggerStats {
            windows,
            ..TriggerStats::default()
        };
        // in-up phases placed symmetrically about the requested mean
        for i in 0..up {
            s.push(if i % 2 == 0 { mean_deg - 1.0 } else { mean_deg + 1.0 });
        }
        for _ in 0..not_up {
            s.push(mean_deg + 180.0);
        }
        s
    }

    fn combos(n: usize) -> Vec<TrackerConfig> {
        (0..n)
            .map(|i| TrackerConfig {
                phi_t: i as f64,
                ..TrackerConfig::default()
            })
            .collect()
    }

    #[test]
    fn single_combo_selected() {
        let t = TableEvaluator(vec![vec![stats(10, 2, 50.0, 20)]; 5]);
        let r = grid_search_cv(&t, &combos(1), 5, 1).unwrap();
        assert_eq!(r.selected, 0);
        assert!(r.outcomes[0].ed_error > 0.0);
    }

    #[test]
    fn ties_go_to_grid_order() {
        let row = vec![stats(10, 2, 50.0, 20); 3];
        let t = TableEvaluator(vec![row; 5]);
        let r = grid_search_cv(&t, &combos(3), 5, 1).unwrap();
        assert_eq!(r.selected, 0);
    }

    #[test]
    fn ties_go_to_smaller_validation_ed() {
        // same ed_error, different split between performance and gap
        let mk = |v: f64, o: f64| CvOutcome {
            config: TrackerConfig::default(),
            ed_opt: vec![o],
            ed_val: vec![v],
            mean_opt: o,
            mean_val: v,
            ed_error: v + (o - v).abs(),
            val_objectives: Objectives::NO_TRIGGERS,
            dominated: false,
            selected: false,
        };
        let a = mk(0.3, 0.3);
        let b = mk(0.2, 0.3);
        assert_eq!(cmp_eps(a.ed_error, b.ed_error), std::cmp::Ordering::Equal);
        assert_eq!(rank_cmp(&b, &a), std::cmp::Ordering::Less);
    }

    #[test]
    fn zero_trigger_combo_scored_sqrt2() {
        let t = TableEvaluator(vec![vec![stats(0, 0, 0.0, 20), stats(5, 5, 45.0, 20)]; 5]);
        let r = grid_search_cv(&t, &combos(2), 5, 1).unwrap();
        assert!((r.outcomes[0].mean_val - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.selected, 1);
    }

    /// Independent re-implementation of the scoring used to cross-check.
    fn naive_select(table: &[Vec<TriggerStats>], folds: &[Vec<usize>], n: usize) -> usize {
        let mut scored: Vec<(f64, f64, usize, [f64; 3])> = Vec::new();
        for c in 0..n {
            let (mut so, mut sv, mut obj) = (0.0, 0.0, [0.0; 3]);
            for fold in folds {
                let pool = |inside: bool| {
                    let (mut cs, mut sn, mut all, mut up, mut w) = (0.0, 0.0, 0usize, 0usize, 0usize);
                    for (r, row) in table.iter().enumerate() {
                        if fold.contains(&r) == inside {
                            cs += row[c].sum_cos;
                            sn += row[c].sum_sin;
                            all += row[c].n_all;
                            up += row[c].n_in_up;
                            w += row[c].windows;
                        }
                    }
                    if all == 0 {
                        return [1.0, 0.0, 0.0];
                    }
                    let rlen = (cs * cs + sn * sn).sqrt() / all as f64;
                    let cm = if rlen < 1e-9 {
                        1.0
                    } else {
                        let m = sn.atan2(cs).to_degrees();
                        let d = ((m - 45.0).rem_euclid(360.0)).min((45.0 - m).rem_euclid(360.0));
                        d / 180.0
                    };
                    let denom = (w * 8) as f64;
                    [cm, (all - up) as f64 / denom, up as f64 / denom]
                };
                let ed = |o: [f64; 3]| (o[0].powi(2) + o[1].powi(2) + (1.0 - o[2]).powi(2)).sqrt();
                let v = pool(true);
                so += ed(pool(false));
                sv += ed(v);
                for q in 0..3 {
                    obj[q] += v[q];
                }
            }
            let k = folds.len() as f64;
            let (mo, mv) = (so / k, sv / k);
            scored.push((mv + (mo - mv).abs(), mv, c, obj.map(|x| x / k)));
        }
        let dominated = |c: usize| {
            scored
                .iter()
                .any(|o| o.2 != c && o.3[0] < scored[c].3[0] && o.3[1] < scored[c].3[1] && o.3[2] > scored[c].3[2])
        };
        let mut best: Option<usize> = None;
        for c in 0..n {
            if dominated(c) {
                continue;
            }
            best = match best {
                None => Some(c),
                Some(b) => {
                    let (eb, vb) = (scored[b].0, scored[b].1);
                    let (ec, vc) = (scored[c].0, scored[c].1);
                    let better = if (ec - eb).abs() > 1e-12 {
                        ec < eb
                    } else {
                        (vc - vb).abs() > 1e-12 && vc < vb
                    };
                    Some(if better { c } else { b })
                }
            };
        }
        best.unwrap()
    }

    fn random_table(rng: &mut ChaCha8Rng, recs: usize, n: usize) -> Vec<Vec<TriggerStats>> {
        (0..recs)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        stats(
                            rng.random_range(0..40),
                            rng.random_range(0..20),
                            rng.random_range(0.0..360.0),
                            rng.random_range(10..30),
                        )
                    })
                    .collect()
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn selection_matches_naive(seed in 0u64..10_000, n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let table = random_table(&mut rng, 7, n);
            let r = grid_search_cv(&TableEvaluator(table.clone()), &combos(n), 5, seed).unwrap();
            prop_assert_eq!(r.selected, naive_select(&table, &r.folds, n));
            // never strictly dominated
            let sel = r.outcomes[r.selected].val_objectives;
            prop_assert!(!r.outcomes.iter().any(|o| o.val_objectives.strictly_dominates(&sel)));
        }

        #[test]
        fn ed_monotone(a in 0.0f64..0.9, b in 0.0f64..0.9, c in 0.1f64..1.0, d in 0.0f64..0.1) {
            let base = euclidean_distance(a, b, c).unwrap();
            prop_assert!(euclidean_distance(a + d, b, c).unwrap() >= base);
            prop_assert!(euclidean_distance(a, b + d, c).unwrap() >= base);
            prop_assert!(euclidean_distance(a, b, c - d).unwrap() >= base);
        }

        #[test]
        fn selection_deterministic(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let table = random_table(&mut rng, 6, 5);
            let a = grid_search_cv(&TableEvaluator(table.clone()), &combos(5), 3, seed).unwrap();
            let b = grid_search_cv(&TableEvaluator(table), &combos(5), 3, seed).unwrap();
            prop_assert_eq!(a.selected, b.selected);
            prop_assert_eq!(a.folds, b.folds);
        }
    }
}
