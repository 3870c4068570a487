//! Evaluation: estimate-to-truth matching, RMSE metrics, the Monte Carlo
//! harness, the closed-form FLOP cost model, and beampattern generation.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{music2d_with_manifold, omp2d_with_dictionary, MusicManifold};
use crate::compression::{compress, CombinerBank};
use crate::geometry::{ArrayConfig, GridSpec};
use crate::share::{share_estimate, Dictionary, EstimateSet, ShareParams, Spectrum1D};
use crate::signal::{nearfield_steering, synthesize, Scenario, SourceTruth};
use crate::{Error, Result};

/// Far-away placeholder used when an estimator returns fewer entries than
/// sources; trials containing it are flagged as failures.
const SENTINEL: (f64, f64) = (0.0, 1.0e9);

/// Aggregated metrics for one (algorithm, scenario) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub algorithm: String,
    pub scenario: String,
    pub rmse_theta_deg: f64,
    pub rmse_range_m: f64,
    pub rmse_pos_m: f64,
    pub trials: usize,
    pub failures: usize,
}

/// One Monte Carlo trial result for one algorithm; maps 1:1 onto a
/// `metrics.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub algorithm: &'static str,
    pub snr_db: f64,
    pub l: usize,
    pub k: usize,
    pub theta_rmse_deg: f64,
    pub range_rmse_m: f64,
    pub pos_rmse_m: f64,
    pub failed: bool,
}

/// Closed-form FLOP estimate for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopEstimate {
    pub algorithm: &'static str,
    pub flops: f64,
}

fn entry_pairs(est: &EstimateSet, l: usize) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = est
        .entries
        .iter()
        .map(|e| (e.theta_deg, e.range_m))
        .collect();
    while pairs.len() < l {
        pairs.push(SENTINEL);
    }
    pairs
}

fn position(theta_deg: f64, r_m: f64) -> [f64; 3] {
    let th = theta_deg.to_radians();
    [r_m * th.cos(), r_m * th.sin(), 0.0]
}

fn pos_err_sq(a: (f64, f64), b: &SourceTruth) -> f64 {
    let pa = position(a.0, a.1);
    let pb = b.position();
    (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)
}

/// Assigns estimates to ground-truth sources: returns the permutation
/// `perm` minimizing the total squared position error, where
/// `est.entries[perm[l]]` pairs with `truth[l]`. Exhaustive over the `L!`
/// permutations; `L <= 6` enforced.
pub fn match_estimates(est: &EstimateSet, truth: &[SourceTruth]) -> Result<Vec<usize>> {
    let l = truth.len();
    if l == 0 {
        return Err(Error::InvalidArgument("no ground-truth sources".into()));
    }
    if l > 6 {
        return Err(Error::InvalidArgument(format!(
            "matching supports at most 6 sources (got {l})"
        )));
    }
    let pairs = entry_pairs(est, l);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..l).permutations(l) {
        let cost: f64 = perm
            .iter()
            .zip(truth.iter())
            .map(|(&ei, t)| pos_err_sq(pairs[ei], t))
            .sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    Ok(best.unwrap().1)
}

/// Single-trial RMSE contribution under a given matching: root mean square
/// over the `L` sources of the angle (degrees), range (meters) and 3D
/// position (meters) errors.
pub fn rmse(est: &EstimateSet, truth: &[SourceTruth], matching: &[usize]) -> MetricsRecord {
    let l = truth.len();
    let pairs = entry_pairs(est, l);
    let mut sq_theta = 0.0;
    let mut sq_range = 0.0;
    let mut sq_pos = 0.0;
    for (li, t) in truth.iter().enumerate() {
        let e = pairs[matching[li]];
        sq_theta += (e.0 - t.theta_deg).powi(2);
        sq_range += (e.1 - t.r_m).powi(2);
        sq_pos += pos_err_sq(e, t);
    }
    let norm = l as f64;
    MetricsRecord {
        algorithm: String::new(),
        scenario: String::new(),
        rmse_theta_deg: (sq_theta / norm).sqrt(),
        rmse_range_m: (sq_range / norm).sqrt(),
        rmse_pos_m: (sq_pos / norm).sqrt(),
        trials: 1,
        failures: 0,
    }
}

/// Which estimators a Monte Carlo run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Share,
    Omp2d,
    Music2d,
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::Share => "share",
            Algorithm::Omp2d => "omp2d",
            Algorithm::Music2d => "music2d",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "share" => Ok(Algorithm::Share),
            "omp2d" => Ok(Algorithm::Omp2d),
            "music2d" => Ok(Algorithm::Music2d),
            other => Err(Error::InvalidArgument(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// How each trial obtains its ground-truth sources.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioGen {
    /// The same sources every trial.
    Fixed(Vec<SourceTruth>),
    /// `l` sources drawn per trial, uniform over the given intervals.
    Random {
        l: usize,
        theta_min_deg: f64,
        theta_max_deg: f64,
        r_min_m: f64,
        r_max_m: f64,
    },
}

impl ScenarioGen {
    pub fn num_sources(&self) -> usize {
        match self {
            ScenarioGen::Fixed(s) => s.len(),
            ScenarioGen::Random { l, .. } => *l,
        }
    }

    /// Sources for trial seed `trial_seed`. Random draws use a dedicated
    /// ChaCha stream so they never overlap the waveform/noise stream built
    /// from the same seed.
    pub fn draw(&self, trial_seed: u64) -> Result<Vec<SourceTruth>> {
        match self {
            ScenarioGen::Fixed(s) => Ok(s.clone()),
            ScenarioGen::Random {
                l,
                theta_min_deg,
                theta_max_deg,
                r_min_m,
                r_max_m,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
                rng.set_stream(1);
                (0..*l)
                    .map(|_| {
                        let th = rng.random_range(*theta_min_deg..=*theta_max_deg);
                        let r = rng.random_range(*r_min_m..=*r_max_m);
                        SourceTruth::new(th, r)
                    })
                    .collect()
            }
        }
    }
}

/// Full description of a Monte Carlo run. Trial `t` uses seed
/// `base_seed + t`; every selected algorithm sees the same data within a
/// trial, and results are deterministic for a given run and build.
#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub cfg: ArrayConfig,
    pub bank: CombinerBank,
    pub scenario: ScenarioGen,
    pub n_snapshots: usize,
    pub snr_db: f64,
    pub share: ShareParams,
    pub global_grid: GridSpec,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub base_seed: u64,
}

fn failed_record(trial: usize, algorithm: &'static str, run: &MonteCarloRun, l: usize) -> TrialRecord {
    TrialRecord {
        trial,
        algorithm,
        snr_db: run.snr_db,
        l,
        k: run.bank.num_instants(),
        theta_rmse_deg: f64::NAN,
        range_rmse_m: f64::NAN,
        pos_rmse_m: f64::NAN,
        failed: true,
    }
}

/// Runs the Monte Carlo benchmark; trials execute in parallel and the
/// returned records are ordered by (trial, algorithm order in the run).
pub fn monte_carlo(run: &MonteCarloRun) -> Result<Vec<TrialRecord>> {
    if run.trials < 1 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if run.algorithms.is_empty() {
        return Err(Error::InvalidArgument("no algorithms selected".into()));
    }
    let l = run.scenario.num_sources();
    if l < 1 {
        return Err(Error::InvalidArgument("need at least one source".into()));
    }

    // grid-dependent artifacts are trial independent; build them once
    let global_dict = if run.algorithms.contains(&Algorithm::Omp2d) {
        Some(Dictionary::build(
            &run.bank,
            &run.cfg,
            &run.global_grid.theta_points_deg(),
            &run.global_grid.range_points_m(),
        )?)
    } else {
        None
    };
    let manifold = if run.algorithms.contains(&Algorithm::Music2d) {
        Some(MusicManifold::new(&run.cfg, &run.global_grid)?)
    } else {
        None
    };
    let mut share_params = run.share.clone();
    share_params.l = l;

    let records: Vec<Vec<TrialRecord>> = (0..run.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<TrialRecord>> {
            let trial_seed = run.base_seed + trial as u64;
            let sources = run.scenario.draw(trial_seed)?;
            let sc = Scenario {
                sources: sources.clone(),
                n_snapshots: run.n_snapshots,
                snr_db: run.snr_db,
                seed: trial_seed,
            };
            let (y, _) = synthesize(&run.cfg, &sc)?;
            let needs_compressed = run
                .algorithms
                .iter()
                .any(|a| matches!(a, Algorithm::Share | Algorithm::Omp2d));
            let ytil = if needs_compressed {
                Some(compress(&run.bank, &y)?)
            } else {
                None
            };

            let mut out = Vec::with_capacity(run.algorithms.len());
            for algo in &run.algorithms {
                let est = match algo {
                    Algorithm::Share => {
                        share_estimate(&run.bank, &run.cfg, ytil.as_ref().unwrap(), &share_params)
                    }
                    Algorithm::Omp2d => {
                        omp2d_with_dictionary(global_dict.as_ref().unwrap(), ytil.as_ref().unwrap(), l)
                    }
                    Algorithm::Music2d => {
                        music2d_with_manifold(&run.cfg, manifold.as_ref().unwrap(), &y, l)
                    }
                };
                let record = match est {
                    Ok(est) => {
                        let short = est.entries.len() < l;
                        let matching = match_estimates(&est, &sources)?;
                        let metrics = rmse(&est, &sources, &matching);
                        TrialRecord {
                            trial,
                            algorithm: algo.tag(),
                            snr_db: run.snr_db,
                            l,
                            k: run.bank.num_instants(),
                            theta_rmse_deg: metrics.rmse_theta_deg,
                            range_rmse_m: metrics.rmse_range_m,
                            pos_rmse_m: metrics.rmse_pos_m,
                            failed: short,
                        }
                    }
                    Err(err) => {
                        log::warn!("trial {trial}: {} failed: {err}", algo.tag());
                        failed_record(trial, algo.tag(), run, l)
                    }
                };
                out.push(record);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    Ok(records.into_iter().flatten().collect())
}

/// Mean-RMSE aggregate over the non-failed trials of one algorithm,
/// following the per-realization formula: mean of squared errors over
/// (trials x sources), then square root.
pub fn aggregate(records: &[TrialRecord], algorithm: Algorithm, scenario: &str) -> MetricsRecord {
    let tag = algorithm.tag();
    let mut n = 0usize;
    let mut failures = 0usize;
    let mut sq = [0.0f64; 3];
    for r in records.iter().filter(|r| r.algorithm == tag) {
        n += 1;
        if r.failed {
            failures += 1;
            continue;
        }
        sq[0] += r.theta_rmse_deg * r.theta_rmse_deg;
        sq[1] += r.range_rmse_m * r.range_rmse_m;
        sq[2] += r.pos_rmse_m * r.pos_rmse_m;
    }
    let ok = (n - failures).max(1) as f64;
    MetricsRecord {
        algorithm: tag.to_string(),
        scenario: scenario.to_string(),
        rmse_theta_deg: (sq[0] / ok).sqrt(),
        rmse_range_m: (sq[1] / ok).sqrt(),
        rmse_pos_m: (sq[2] / ok).sqrt(),
        trials: n,
        failures,
    }
}

/// Quantile (by linear interpolation) of the non-failed per-trial values
/// selected by `field` for one algorithm.
pub fn quantile_of(records: &[TrialRecord], algorithm: Algorithm, q: f64, field: fn(&TrialRecord) -> f64) -> Option<f64> {
    let mut values: Vec<f64> = records
        .iter()
        .filter(|r| r.algorithm == algorithm.tag() && !r.failed)
        .map(field)
        .collect();
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(values[lo] * (1.0 - frac) + values[hi] * frac)
}

/// Input sizes for the FLOP cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopParams {
    pub m: usize,
    pub p: usize,
    pub m0: usize,
    pub k: usize,
    pub n: usize,
    pub l: usize,
    pub g_theta: usize,
    pub g_r: usize,
    pub g_theta_c: usize,
    pub g_delta: usize,
}

/// Dominant-term FLOP counts with unit leading constants:
/// MUSIC `M^3 + G_theta*G_r*M^2`; OMP `L*P*K*N*G_theta*G_r`;
/// SHARE `P*N*K*G_theta_c + L*P*K*N*G_delta*G_r`.
pub fn flop_model(params: &FlopParams) -> Result<Vec<FlopEstimate>> {
    let p = *params;
    for (name, v) in [
        ("M", p.m),
        ("P", p.p),
        ("M0", p.m0),
        ("K", p.k),
        ("N", p.n),
        ("L", p.l),
        ("G_theta", p.g_theta),
        ("G_r", p.g_r),
        ("G_theta_c", p.g_theta_c),
        ("G_delta", p.g_delta),
    ] {
        if v < 1 {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
    }
    let (m, pp, k, n, l) = (p.m as f64, p.p as f64, p.k as f64, p.n as f64, p.l as f64);
    let (gt, gr, gtc, gd) = (
        p.g_theta as f64,
        p.g_r as f64,
        p.g_theta_c as f64,
        p.g_delta as f64,
    );
    Ok(vec![
        FlopEstimate {
            algorithm: "music2d",
            flops: m * m * m + gt * gr * m * m,
        },
        FlopEstimate {
            algorithm: "omp2d",
            flops: l * pp * k * n * gt * gr,
        },
        FlopEstimate {
            algorithm: "share",
            flops: pp * n * k * gtc + l * pp * k * n * gd * gr,
        },
    ])
}

/// Normalized cross-correlation beampattern: the response at `(theta,
/// at_range)` of a matched filter pointed at `target`, scanned over
/// `angles_deg`. Peaks at 1 when the scan hits the target cell.
pub fn beampattern(
    cfg: &ArrayConfig,
    target: &SourceTruth,
    angles_deg: &[f64],
    at_range_m: f64,
) -> Result<Spectrum1D> {
    if angles_deg.is_empty() {
        return Err(Error::InvalidArgument("empty beampattern grid".into()));
    }
    let a_t = nearfield_steering(cfg, target.theta_deg, target.r_m)?;
    let nt = a_t.norm_squared();
    let values: Vec<f64> = angles_deg
        .iter()
        .map(|&th| {
            let a = nearfield_steering(cfg, th, at_range_m)?;
            Ok(a_t.dotc(&a).norm_sqr() / (nt * a.norm_squared()))
        })
        .collect::<Result<_>>()?;
    Ok(Spectrum1D {
        angles_deg: angles_deg.to_vec(),
        values,
    })
}

/// Counts local maxima whose value exceeds `threshold` times the global
/// maximum (e.g. 0.5 for the -3 dB set).
pub fn count_peaks_above(spec: &Spectrum1D, threshold: f64) -> usize {
    let n = spec.values.len();
    if n == 0 {
        return 0;
    }
    let max = spec.values.iter().cloned().fold(f64::MIN, f64::max);
    let cut = threshold * max;
    (0..n)
        .filter(|&i| {
            let v = spec.values[i];
            let left_ok = i == 0 || v >= spec.values[i - 1];
            let right_ok = i == n - 1 || v >= spec.values[i + 1];
            left_ok && right_ok && v > cut
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{dft_combiner_bank, CombinerPolicy};
    use crate::geometry::linspace;
    use crate::share::SourceEstimate;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn reference_array() -> ArrayConfig {
        ArrayConfig::with_lambda_spacings(4, 16, 0.5, 16.0, 60.48e9).unwrap()
    }

    fn estimate_of(pairs: &[(f64, f64)]) -> EstimateSet {
        EstimateSet {
            entries: pairs
                .iter()
                .map(|&(theta_deg, range_m)| SourceEstimate { theta_deg, range_m })
                .collect(),
            waveforms: DMatrix::zeros(pairs.len(), 1),
            residual_norm: 0.0,
        }
    }

    #[test]
    fn match_single_source_is_identity() {
        let est = estimate_of(&[(10.0, 2.0)]);
        let truth = [SourceTruth::new(11.0, 2.1).unwrap()];
        assert_eq!(match_estimates(&est, &truth).unwrap(), vec![0]);
    }

    #[test]
    fn match_recovers_swap() {
        let est = estimate_of(&[(40.0, 5.0), (-10.0, 2.0)]);
        let truth = [
            SourceTruth::new(-10.1, 2.05).unwrap(),
            SourceTruth::new(40.2, 4.9).unwrap(),
        ];
        assert_eq!(match_estimates(&est, &truth).unwrap(), vec![1, 0]);
    }

    #[test]
    fn match_three_sources_equals_brute_force() {
        // independent re-implementation of the exhaustive search
        let truth = [
            SourceTruth::new(-30.0, 2.0).unwrap(),
            SourceTruth::new(5.0, 6.0).unwrap(),
            SourceTruth::new(44.0, 8.0).unwrap(),
        ];
        let est = estimate_of(&[(44.4, 7.9), (-29.5, 2.2), (5.2, 6.1)]);
        let perm = match_estimates(&est, &truth).unwrap();

        let cost = |p: &[usize]| -> f64 {
            p.iter()
                .zip(truth.iter())
                .map(|(&ei, t)| {
                    let e = est.entries[ei];
                    let a = position(e.theta_deg, e.range_m);
                    let b = t.position();
                    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
                })
                .sum()
        };
        let mut best_cost = f64::INFINITY;
        for p0 in 0..3 {
            for p1 in 0..3 {
                for p2 in 0..3 {
                    if p0 != p1 && p1 != p2 && p0 != p2 {
                        best_cost = best_cost.min(cost(&[p0, p1, p2]));
                    }
                }
            }
        }
        assert_relative_eq!(cost(&perm), best_cost, max_relative = 1e-15);
        assert_eq!(perm, vec![1, 2, 0]);
    }

    #[test]
    fn match_rejects_more_than_six() {
        let est = estimate_of(&[(0.0, 1.0); 7]);
        let truth: Vec<SourceTruth> = (0..7)
            .map(|i| SourceTruth::new(i as f64, 1.0 + i as f64).unwrap())
            .collect();
        assert!(match_estimates(&est, &truth).is_err());
    }

    #[test]
    fn rmse_zero_for_exact_estimates() {
        let truth = [SourceTruth::new(43.3, 4.8).unwrap()];
        let est = estimate_of(&[(43.3, 4.8)]);
        let rec = rmse(&est, &truth, &[0]);
        assert_eq!(rec.rmse_theta_deg, 0.0);
        assert_eq!(rec.rmse_range_m, 0.0);
        assert_eq!(rec.rmse_pos_m, 0.0);
    }

    #[test]
    fn rmse_pure_radial_error() {
        let truth = [SourceTruth::new(30.0, 4.0).unwrap()];
        let est = estimate_of(&[(30.0, 4.1)]);
        let rec = rmse(&est, &truth, &[0]);
        assert_relative_eq!(rec.rmse_range_m, 0.1, max_relative = 1e-12);
        assert_relative_eq!(rec.rmse_pos_m, 0.1, max_relative = 1e-9);
        assert_eq!(rec.rmse_theta_deg, 0.0);
    }

    #[test]
    fn rmse_chord_for_pure_angle_error() {
        // 1 degree at unit range: chord = 2*sin(0.5 deg)
        let truth = [SourceTruth::new(0.0, 1.0).unwrap()];
        let est = estimate_of(&[(1.0, 1.0)]);
        let rec = rmse(&est, &truth, &[0]);
        let chord = 2.0 * (0.5f64.to_radians()).sin();
        assert_relative_eq!(rec.rmse_pos_m, chord, max_relative = 1e-12);
        assert_relative_eq!(rec.rmse_pos_m, 0.017453, max_relative = 1e-4);
        assert_eq!(rec.rmse_theta_deg, 1.0);
    }

    #[test]
    fn rmse_triangle_bound() {
        let truth = [
            SourceTruth::new(12.0, 3.0).unwrap(),
            SourceTruth::new(-40.0, 7.5).unwrap(),
        ];
        let est = estimate_of(&[(12.4, 3.2), (-41.0, 7.0)]);
        let matching = match_estimates(&est, &truth).unwrap();
        let rec = rmse(&est, &truth, &matching);
        let r_max = 7.5;
        let bound = rec.rmse_range_m.powi(2)
            + (r_max * rec.rmse_theta_deg.to_radians()).powi(2);
        assert!(rec.rmse_pos_m.powi(2) <= bound + 1e-12);
    }

    #[test]
    fn flop_model_reference_values() {
        let params = FlopParams {
            m: 64,
            p: 4,
            m0: 16,
            k: 16,
            n: 32,
            l: 1,
            g_theta: 121,
            g_r: 64,
            g_theta_c: 41,
            g_delta: 14,
        };
        let est = flop_model(&params).unwrap();
        let by_tag = |t: &str| est.iter().find(|e| e.algorithm == t).unwrap().flops;
        assert_relative_eq!(by_tag("music2d"), 3.19e7, max_relative = 0.01);
        assert_relative_eq!(by_tag("omp2d"), 1.58e7, max_relative = 0.01);
        assert_relative_eq!(by_tag("share"), 1.91e6, max_relative = 0.01);
        assert_eq!(by_tag("music2d"), 31_981_568.0);
        assert_eq!(by_tag("omp2d"), 15_859_712.0);
        assert_eq!(by_tag("share"), 1_918_976.0);
        // the two-stage search is ~8x cheaper than the one-shot search
        assert_relative_eq!(by_tag("omp2d") / by_tag("share"), 8.3, max_relative = 0.01);

        // doubling L doubles the OMP term only
        let mut p2 = params;
        p2.l = 2;
        let est2 = flop_model(&p2).unwrap();
        let by_tag2 = |t: &str| est2.iter().find(|e| e.algorithm == t).unwrap().flops;
        assert_eq!(by_tag2("omp2d"), 2.0 * by_tag("omp2d"));
        assert_eq!(by_tag2("music2d"), by_tag("music2d"));
    }

    #[test]
    fn beampattern_peaks_at_target() {
        let cfg = reference_array();
        let target = SourceTruth::new(43.0, 4.8).unwrap();
        let angles = linspace(-60.0, 60.0, 241);
        let spec = beampattern(&cfg, &target, &angles, 4.8).unwrap();
        let at_target = spec
            .angles_deg
            .iter()
            .position(|&a| a == 43.0)
            .map(|i| spec.values[i])
            .unwrap();
        assert_relative_eq!(at_target, 1.0, max_relative = 1e-12);
        assert!(spec.values.iter().all(|&v| v <= 1.0 + 1e-12));
    }

    #[test]
    fn beampattern_grating_lobe_dichotomy() {
        let angles = linspace(-60.0, 60.0, 2401);
        let target = SourceTruth::new(43.0, 4.8).unwrap();

        let contiguous = ArrayConfig::with_lambda_spacings(4, 16, 0.5, 8.0, 60.48e9).unwrap();
        let spec = beampattern(&contiguous, &target, &angles, 4.8).unwrap();
        assert_eq!(count_peaks_above(&spec, 0.5), 1);

        let sparse = reference_array();
        let spec = beampattern(&sparse, &target, &angles, 4.8).unwrap();
        assert!(count_peaks_above(&spec, 0.5) >= 2);
    }

    #[test]
    fn monte_carlo_deterministic_and_exact_on_grid() {
        let cfg = reference_array();
        let bank = dft_combiner_bank(16, 16, 4, CombinerPolicy::FirstK).unwrap();
        let grid = GridSpec::new(-60.0, 60.0, 121, 1.0, 9.0, 64).unwrap();
        let ranges = grid.range_points_m();
        let mut share = ShareParams::standard(1);
        share.g_delta = 13; // keep coarse grid points on the refined grid
        let run = MonteCarloRun {
            cfg,
            bank,
            scenario: ScenarioGen::Fixed(vec![SourceTruth::new(-9.0, ranges[40]).unwrap()]),
            n_snapshots: 32,
            snr_db: f64::INFINITY,
            share,
            global_grid: grid,
            algorithms: vec![Algorithm::Share, Algorithm::Omp2d, Algorithm::Music2d],
            trials: 1,
            base_seed: 77,
        };
        let records = monte_carlo(&run).unwrap();
        assert_eq!(records.len(), 3);
        for r in &records {
            assert!(!r.failed, "{:?}", r);
            assert_eq!(r.pos_rmse_m, 0.0, "algorithm {} not exact", r.algorithm);
        }
        let again = monte_carlo(&run).unwrap();
        assert_eq!(records, again);
    }

    #[test]
    fn monte_carlo_random_sources_reproducible() {
        let cfg = reference_array();
        let bank = dft_combiner_bank(16, 4, 4, CombinerPolicy::FirstK).unwrap();
        let grid = GridSpec::new(-60.0, 60.0, 61, 1.0, 9.0, 16).unwrap();
        let run = MonteCarloRun {
            cfg,
            bank,
            scenario: ScenarioGen::Random {
                l: 1,
                theta_min_deg: -60.0,
                theta_max_deg: 60.0,
                r_min_m: 1.0,
                r_max_m: 10.0,
            },
            n_snapshots: 16,
            snr_db: 10.0,
            share: ShareParams {
                coarse_grid: GridSpec::new(-60.0, 60.0, 41, 1.0, 9.0, 16).unwrap(),
                guard_bins: 1,
                delta_theta_deg: 3.0,
                g_delta: 14,
                range_grid: GridSpec::new(-60.0, 60.0, 61, 1.0, 9.0, 16).unwrap(),
                l: 1,
            },
            global_grid: grid,
            algorithms: vec![Algorithm::Share],
            trials: 8,
            base_seed: 5,
        };
        let r1 = monte_carlo(&run).unwrap();
        let r2 = monte_carlo(&run).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.len(), 8);
        let agg = aggregate(&r1, Algorithm::Share, "random");
        assert_eq!(agg.trials, 8);
        assert!(agg.rmse_pos_m.is_finite());
    }

    #[test]
    fn quantile_interpolates() {
        let records: Vec<TrialRecord> = (0..5)
            .map(|i| TrialRecord {
                trial: i,
                algorithm: "share",
                snr_db: 0.0,
                l: 1,
                k: 16,
                theta_rmse_deg: 0.0,
                range_rmse_m: 0.0,
                pos_rmse_m: i as f64,
                failed: false,
            })
            .collect();
        let med = quantile_of(&records, Algorithm::Share, 0.5, |r| r.pos_rmse_m).unwrap();
        assert_eq!(med, 2.0);
    }
}
