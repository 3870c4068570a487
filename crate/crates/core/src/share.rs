//! SHARE: two-stage sparse hierarchical angle-range estimation.
//!
//! Stage 1 treats each dense subarray on its own. Its small aperture is free
//! of grating lobes and sees sources in its far field, so projecting the
//! per-subarray measurements onto far-field steering vectors gives an
//! unambiguous (if coarse) angular power spectrum. Summing the per-subarray
//! power spectra discards the inter-subarray phase that would re-introduce
//! the ambiguity and averages down noise.
//!
//! Stage 2 re-enables the full sparse aperture: around each coarse angle a
//! small refined window of compressed near-field atoms is built, the windows
//! are unioned over all coarse peaks, and an MMV-OMP solve over that
//! localized dictionary jointly refines angle and range for all sources.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashSet;

use crate::compression::{compress_vector, CombinerBank};
use crate::geometry::{linspace, ArrayConfig, GridSpec};
use crate::linalg::{lstsq, select_columns};
use crate::signal::{farfield_sub_steering, nearfield_steering, RowLayout, SnapshotMatrix};
use crate::{Error, Result};

/// A one-dimensional angular power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D {
    pub angles_deg: Vec<f64>,
    pub values: Vec<f64>,
}

/// A labeled matrix of compressed steering atoms over an (angle, range)
/// grid. Column `g` equals `Phi * a(theta_g, r_g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<Complex64>,
    labels: Vec<(f64, f64)>,
    norms: Vec<f64>,
}

impl Dictionary {
    /// Builds the dictionary over the Cartesian product of `angles_deg` and
    /// `ranges_m`, angle-major (all ranges of the first angle first).
    pub fn build(
        bank: &CombinerBank,
        cfg: &ArrayConfig,
        angles_deg: &[f64],
        ranges_m: &[f64],
    ) -> Result<Self> {
        if angles_deg.is_empty() || ranges_m.is_empty() {
            return Err(Error::InvalidArgument("dictionary grid must be non-empty".into()));
        }
        let mut labels = Vec::with_capacity(angles_deg.len() * ranges_m.len());
        for &th in angles_deg {
            for &r in ranges_m {
                labels.push((th, r));
            }
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for &(th, r) in &labels {
            if !seen.insert((th.to_bits(), r.to_bits())) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate dictionary label ({th} deg, {r} m)"
                )));
            }
        }
        let cols: Vec<DVector<Complex64>> = labels
            .par_iter()
            .map(|&(th, r)| compress_vector(bank, &nearfield_steering(cfg, th, r)?))
            .collect::<Result<_>>()?;
        let atoms = DMatrix::from_columns(&cols);
        let norms: Vec<f64> = (0..atoms.ncols()).map(|g| atoms.column(g).norm()).collect();
        if norms.iter().any(|&n| !(n > 0.0)) {
            return Err(Error::InvalidArgument("dictionary contains a zero atom".into()));
        }
        Ok(Self { atoms, labels, norms })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn atoms(&self) -> &DMatrix<Complex64> {
        &self.atoms
    }

    /// `(theta_deg, range_m)` of column `g`.
    pub fn label(&self, g: usize) -> (f64, f64) {
        self.labels[g]
    }

    pub fn labels(&self) -> &[(f64, f64)] {
        &self.labels
    }

    /// Cached 2-norm of column `g`.
    pub fn atom_norm(&self, g: usize) -> f64 {
        self.norms[g]
    }
}

/// One estimated source location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceEstimate {
    pub theta_deg: f64,
    pub range_m: f64,
}

/// Estimator output: `L` locations, the recovered waveform rows and the
/// final Frobenius residual.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub entries: Vec<SourceEstimate>,
    /// `L x N`, row `l` is the least-squares waveform of `entries[l]`.
    pub waveforms: DMatrix<Complex64>,
    pub residual_norm: f64,
}

/// Parameters of the two-stage estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareParams {
    /// Stage-1 coarse angular grid (only its angle part is used).
    pub coarse_grid: GridSpec,
    /// Exclusion half-width, in coarse bins, around each accepted peak.
    pub guard_bins: usize,
    /// Stage-2 window half-width around each coarse angle, degrees.
    pub delta_theta_deg: f64,
    /// Points per Stage-2 angle window.
    pub g_delta: usize,
    /// Grid supplying the Stage-2 range points; its angle interval also
    /// clips the refined windows.
    pub range_grid: GridSpec,
    /// Number of sources to recover.
    pub l: usize,
}

impl ShareParams {
    /// Standard benchmark configuration: coarse 41-point grid over
    /// [-60, 60] deg, +/-3 deg windows of 14 points, 64 range points over
    /// [1, 9] m.
    pub fn standard(l: usize) -> Self {
        Self {
            coarse_grid: GridSpec::new(-60.0, 60.0, 41, 1.0, 9.0, 64).unwrap(),
            guard_bins: 1,
            delta_theta_deg: 3.0,
            g_delta: 14,
            range_grid: GridSpec::new(-60.0, 60.0, 121, 1.0, 9.0, 64).unwrap(),
            l,
        }
    }
}

fn compressed_blocks(bank: &CombinerBank, ytil: &SnapshotMatrix) -> Result<Vec<DMatrix<Complex64>>> {
    let (p, k) = match ytil.layout {
        RowLayout::Compressed { p, k } => (p, k),
        RowLayout::Elements { .. } => {
            return Err(Error::DimensionMismatch(
                "expected a compressed snapshot matrix".into(),
            ))
        }
    };
    if p != bank.num_subarrays() || k != bank.num_instants() || ytil.data.nrows() != p * k {
        return Err(Error::DimensionMismatch(format!(
            "compressed matrix is (P={p}, K={k}) with {} rows, bank is (P={}, K={})",
            ytil.data.nrows(),
            bank.num_subarrays(),
            bank.num_instants()
        )));
    }
    let n = ytil.data.ncols();
    // block for subarray p: rows k*P + p over all k
    Ok((0..p)
        .map(|pi| {
            DMatrix::from_fn(k, n, |ki, ni| ytil.data[(ki * p + pi, ni)])
        })
        .collect())
}

/// Stage-1 combined non-coherent spectrum over the coarse angle grid:
/// `P_total(theta) = sum_p || a_sub(theta)^H Phi_p^H Ytil_p ||_F^2`,
/// where `Phi_p` stacks subarray `p`'s weight rows over the `K` instants
/// and `Ytil_p` is the matching `K x N` measurement block.
pub fn stage1_spectrum(
    bank: &CombinerBank,
    cfg: &ArrayConfig,
    ytil: &SnapshotMatrix,
    coarse_grid: &GridSpec,
) -> Result<Spectrum1D> {
    coarse_grid.validate()?;
    if bank.elements_per_subarray() != cfg.elements_per_subarray()
        || bank.num_subarrays() != cfg.num_subarrays()
    {
        return Err(Error::DimensionMismatch("bank does not match array".into()));
    }
    let blocks = compressed_blocks(bank, ytil)?;
    let angles = coarse_grid.theta_points_deg();
    let k = bank.num_instants();

    let values: Vec<f64> = angles
        .iter()
        .map(|&th| {
            let a_sub = farfield_sub_steering(cfg, th);
            let mut total = 0.0;
            for (pi, block) in blocks.iter().enumerate() {
                // u[k] = w_{k,p}^T a_sub, so a_sub^H Phi_p^H = u^H
                let u = DVector::from_fn(k, |ki, _| bank.weight(ki, pi).dot(&a_sub));
                total += u.ad_mul(block).norm_squared();
            }
            total
        })
        .collect();

    Ok(Spectrum1D {
        angles_deg: angles,
        values,
    })
}

/// Picks up to `l` peak angles from a spectrum.
///
/// Local maxima (value >= both neighbors, endpoints compare to their single
/// neighbor) are accepted greedily by descending value; each acceptance
/// excludes `+/- guard_bins` bins around it. If fewer than `l` local maxima
/// survive, remaining slots are filled by the largest values outside all
/// exclusion windows (which also widen as fillers are accepted), so the
/// result may be shorter than `l`. Ties break toward the lower grid index.
pub fn pick_peaks(spec: &Spectrum1D, l: usize, guard_bins: usize) -> Result<Vec<f64>> {
    let n = spec.values.len();
    if n == 0 || spec.angles_deg.len() != n {
        return Err(Error::InvalidArgument("empty or inconsistent spectrum".into()));
    }
    if l < 1 {
        return Err(Error::InvalidArgument("peak count must be >= 1".into()));
    }
    let v = &spec.values;
    let is_local_max = |i: usize| -> bool {
        let left_ok = i == 0 || v[i] >= v[i - 1];
        let right_ok = i == n - 1 || v[i] >= v[i + 1];
        left_ok && right_ok
    };

    let mut excluded = vec![false; n];
    let mut picked: Vec<usize> = Vec::with_capacity(l);
    let exclude_around = |idx: usize, excluded: &mut Vec<bool>| {
        let lo = idx.saturating_sub(guard_bins);
        let hi = (idx + guard_bins).min(n - 1);
        for e in excluded[lo..=hi].iter_mut() {
            *e = true;
        }
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then_with(|| i.cmp(&j)));

    for &i in order.iter().filter(|&&i| is_local_max(i)) {
        if picked.len() == l {
            break;
        }
        if !excluded[i] {
            picked.push(i);
            exclude_around(i, &mut excluded);
        }
    }
    for &i in &order {
        if picked.len() == l {
            break;
        }
        if !excluded[i] {
            picked.push(i);
            exclude_around(i, &mut excluded);
        }
    }

    Ok(picked.into_iter().map(|i| spec.angles_deg[i]).collect())
}

/// Builds the Stage-2 refined dictionary: the union of `g_delta`-point
/// angle windows spanning `+/- delta_theta_deg` around each coarse angle
/// (clipped to `range_grid`'s angle interval, deduplicated by exact value)
/// crossed with `range_grid`'s range points.
pub fn build_refined_dictionary(
    bank: &CombinerBank,
    cfg: &ArrayConfig,
    coarse_angles_deg: &[f64],
    delta_theta_deg: f64,
    g_delta: usize,
    range_grid: &GridSpec,
) -> Result<Dictionary> {
    if coarse_angles_deg.is_empty() {
        return Err(Error::InvalidArgument("no coarse angles to refine".into()));
    }
    if g_delta < 2 {
        return Err(Error::InvalidArgument("refined window needs G_delta >= 2".into()));
    }
    if !(delta_theta_deg > 0.0) {
        return Err(Error::InvalidArgument("window half-width must be > 0".into()));
    }
    range_grid.validate()?;

    let (clip_lo, clip_hi) = (range_grid.theta_min_deg, range_grid.theta_max_deg);
    let mut angles: Vec<f64> = coarse_angles_deg
        .iter()
        .flat_map(|&th| linspace(th - delta_theta_deg, th + delta_theta_deg, g_delta))
        .filter(|&th| th >= clip_lo && th <= clip_hi)
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    if angles.is_empty() {
        return Err(Error::InvalidArgument(
            "all refined window points fall outside the search interval".into(),
        ));
    }

    Dictionary::build(bank, cfg, &angles, &range_grid.range_points_m())
}

/// Result of an MMV-OMP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpSolution {
    /// Selected dictionary columns, in selection order.
    pub support: Vec<usize>,
    /// `L x N` joint least-squares rows over the selected atoms.
    pub coefficients: DMatrix<Complex64>,
    /// Frobenius norm of the final residual.
    pub residual_norm: f64,
}

/// Multiple-measurement-vector orthogonal matching pursuit with a fixed
/// iteration count `l`.
///
/// Each iteration scores every unselected column `g` by
/// `||psi_g^H R||_2 / ||psi_g||_2` against the current residual `R`,
/// selects the argmax (ties toward the lower index), re-solves the joint
/// least squares over all selected atoms, and updates `R`. An atom whose
/// addition makes the selected set rank deficient is skipped and the
/// next-best is taken.
pub fn mmv_omp(ytil: &SnapshotMatrix, dict: &Dictionary, l: usize) -> Result<OmpSolution> {
    let y = &ytil.data;
    let g = dict.len();
    if l < 1 {
        return Err(Error::InvalidArgument("OMP needs L >= 1".into()));
    }
    if l > g {
        return Err(Error::InvalidArgument(format!(
            "OMP with L={l} needs at least as many dictionary atoms (G={g})"
        )));
    }
    if y.nrows() != dict.atoms().nrows() {
        return Err(Error::DimensionMismatch(format!(
            "measurements have {} rows, atoms have {}",
            y.nrows(),
            dict.atoms().nrows()
        )));
    }

    let mut residual = y.clone();
    let mut support: Vec<usize> = Vec::with_capacity(l);
    let mut disabled = vec![false; g];
    let mut coefficients = DMatrix::<Complex64>::zeros(0, y.ncols());

    for _ in 0..l {
        let correlations = dict.atoms().ad_mul(&residual); // G x N
        let mut order: Vec<(f64, usize)> = (0..g)
            .filter(|gi| !disabled[*gi] && !support.contains(gi))
            .map(|gi| (correlations.row(gi).norm() / dict.atom_norm(gi), gi))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

        let mut accepted = false;
        for &(_, gi) in &order {
            let mut candidate = support.clone();
            candidate.push(gi);
            let a_sel = select_columns(dict.atoms(), &candidate);
            match lstsq(&a_sel, y) {
                Some(sol) => {
                    residual = y - &a_sel * &sol;
                    support = candidate;
                    coefficients = sol;
                    accepted = true;
                    break;
                }
                None => {
                    log::warn!("mmv_omp: skipping atom {gi}, selected set would be rank deficient");
                    disabled[gi] = true;
                }
            }
        }
        if !accepted {
            return Err(Error::Estimation(
                "no linearly independent dictionary atom left to select".into(),
            ));
        }
    }

    Ok(OmpSolution {
        support,
        coefficients,
        residual_norm: residual.norm(),
    })
}

pub(crate) fn estimate_from_solution(dict: &Dictionary, sol: OmpSolution) -> EstimateSet {
    let entries = sol
        .support
        .iter()
        .map(|&g| {
            let (theta_deg, range_m) = dict.label(g);
            SourceEstimate { theta_deg, range_m }
        })
        .collect();
    EstimateSet {
        entries,
        waveforms: sol.coefficients,
        residual_norm: sol.residual_norm,
    }
}

/// End-to-end SHARE estimate: Stage-1 spectrum, peak picking, refined
/// dictionary, MMV-OMP.
pub fn share_estimate(
    bank: &CombinerBank,
    cfg: &ArrayConfig,
    ytil: &SnapshotMatrix,
    params: &ShareParams,
) -> Result<EstimateSet> {
    let spectrum = stage1_spectrum(bank, cfg, ytil, &params.coarse_grid)?;
    let coarse = pick_peaks(&spectrum, params.l, params.guard_bins)?;
    let dict = build_refined_dictionary(
        bank,
        cfg,
        &coarse,
        params.delta_theta_deg,
        params.g_delta,
        &params.range_grid,
    )?;
    let sol = mmv_omp(ytil, &dict, params.l)?;
    Ok(estimate_from_solution(&dict, sol))
}
