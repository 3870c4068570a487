//! Reference estimators: one-shot 2D-OMP over the global compressed
//! dictionary, and fully-digital 2D-MUSIC.
//!
//! Both search the same global angle-range grid. 2D-OMP shares the MMV-OMP
//! core with the two-stage estimator; 2D-MUSIC assumes access to the full
//! `M`-element data and scans `1 / ||E_n^H a(theta, r)||^2` with `E_n` the
//! noise subspace of the sample covariance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::compression::CombinerBank;
use crate::geometry::{ArrayConfig, GridSpec};
use crate::linalg::{hermitian_eigen_sorted, lstsq, select_columns};
use crate::share::{estimate_from_solution, mmv_omp, Dictionary, EstimateSet, SourceEstimate};
use crate::signal::{nearfield_steering, RowLayout, SnapshotMatrix};
use crate::{Error, Result};

/// 2D-MUSIC pseudo-spectrum over an angle-range grid, stored angle-major
/// (`values[it * g_r + ir]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MusicSpectrum2D {
    pub theta_deg: Vec<f64>,
    pub range_m: Vec<f64>,
    pub values: Vec<f64>,
}

impl MusicSpectrum2D {
    pub fn value(&self, it: usize, ir: usize) -> f64 {
        self.values[it * self.range_m.len() + ir]
    }
}

/// Unit-normalized near-field steering vectors over a grid, built once and
/// shared across Monte Carlo trials.
#[derive(Debug, Clone)]
pub struct MusicManifold {
    atoms_unit: DMatrix<Complex64>, // M x (G_theta * G_r), angle-major
    theta_deg: Vec<f64>,
    range_m: Vec<f64>,
    num_elements: usize,
}

impl MusicManifold {
    pub fn new(cfg: &ArrayConfig, grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let theta_deg = grid.theta_points_deg();
        let range_m = grid.range_points_m();
        let labels: Vec<(f64, f64)> = theta_deg
            .iter()
            .flat_map(|&th| range_m.iter().map(move |&r| (th, r)))
            .collect();
        let cols: Vec<DVector<Complex64>> = labels
            .par_iter()
            .map(|&(th, r)| {
                let a = nearfield_steering(cfg, th, r)?;
                let norm = a.norm();
                Ok(a / Complex64::new(norm, 0.0))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            atoms_unit: DMatrix::from_columns(&cols),
            theta_deg,
            range_m,
            num_elements: cfg.num_elements(),
        })
    }
}

/// Sample covariance `R = Y*Y^H / N` of a fully-digital snapshot matrix.
pub fn sample_covariance(y: &SnapshotMatrix) -> Result<DMatrix<Complex64>> {
    match y.layout {
        RowLayout::Elements { .. } => {}
        RowLayout::Compressed { .. } => {
            return Err(Error::DimensionMismatch(
                "MUSIC needs the fully-digital element-space data".into(),
            ))
        }
    }
    let n = y.data.ncols();
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one snapshot".into()));
    }
    let scale = 1.0 / n as f64;
    Ok((&y.data * y.data.adjoint()).map(|z| z * scale))
}

/// Eigendecomposition split into signal and noise subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// `M x L`, eigenvectors of the `L` largest eigenvalues.
    pub signal: DMatrix<Complex64>,
    /// `M x (M-L)`, eigenvectors of the remaining eigenvalues.
    pub noise: DMatrix<Complex64>,
    /// All eigenvalues, ascending.
    pub eigenvalues: DVector<f64>,
}

pub fn subspace_split(cov: &DMatrix<Complex64>, l: usize) -> Result<SubspaceSplit> {
    let m = cov.nrows();
    if cov.ncols() != m {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    if l >= m {
        return Err(Error::InvalidArgument(format!(
            "need L < M to form a noise subspace (got L={l}, M={m})"
        )));
    }
    let (values, vectors) = hermitian_eigen_sorted(cov)?;
    let noise_cols: Vec<usize> = (0..m - l).collect();
    let signal_cols: Vec<usize> = (m - l..m).collect();
    Ok(SubspaceSplit {
        signal: select_columns(&vectors, &signal_cols),
        noise: select_columns(&vectors, &noise_cols),
        eigenvalues: values,
    })
}

/// Pseudo-spectrum `1 / ||E_n^H a_unit(theta, r)||^2` over the manifold's
/// grid. Cells where the projection vanishes map to `+inf`.
pub fn music_spectrum_from_noise_subspace(
    noise: &DMatrix<Complex64>,
    manifold: &MusicManifold,
) -> Result<MusicSpectrum2D> {
    if noise.nrows() != manifold.num_elements {
        return Err(Error::DimensionMismatch(format!(
            "noise subspace has {} rows, manifold expects {}",
            noise.nrows(),
            manifold.num_elements
        )));
    }
    let projected = noise.ad_mul(&manifold.atoms_unit); // (M-L) x G
    let values: Vec<f64> = (0..projected.ncols())
        .map(|g| {
            let denom = projected.column(g).norm_squared();
            if denom > 0.0 {
                1.0 / denom
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(MusicSpectrum2D {
        theta_deg: manifold.theta_deg.clone(),
        range_m: manifold.range_m.clone(),
        values,
    })
}

/// Full 2D-MUSIC pseudo-spectrum from the raw data.
pub fn music_spectrum(
    cfg: &ArrayConfig,
    y: &SnapshotMatrix,
    grid: &GridSpec,
    l: usize,
) -> Result<MusicSpectrum2D> {
    let manifold = MusicManifold::new(cfg, grid)?;
    let cov = sample_covariance(y)?;
    let split = subspace_split(&cov, l)?;
    music_spectrum_from_noise_subspace(&split.noise, &manifold)
}

/// Greedy 2D peak picking: local maxima over the 8-neighborhood, descending
/// value, one-cell exclusion window, ties toward the lower flat index. If
/// fewer than `l` local maxima survive, the largest remaining non-excluded
/// cells fill the rest.
pub fn peaks2d(spec: &MusicSpectrum2D, l: usize) -> Vec<(usize, usize)> {
    let (gt, gr) = (spec.theta_deg.len(), spec.range_m.len());
    let idx = |it: usize, ir: usize| it * gr + ir;
    let is_local_max = |it: usize, ir: usize| -> bool {
        let v = spec.values[idx(it, ir)];
        for dt in -1i64..=1 {
            for dr in -1i64..=1 {
                if dt == 0 && dr == 0 {
                    continue;
                }
                let (nt, nr) = (it as i64 + dt, ir as i64 + dr);
                if nt < 0 || nr < 0 || nt >= gt as i64 || nr >= gr as i64 {
                    continue;
                }
                if spec.values[idx(nt as usize, nr as usize)] > v {
                    return false;
                }
            }
        }
        true
    };

    let mut order: Vec<usize> = (0..gt * gr).collect();
    order.sort_by(|&a, &b| spec.values[b].total_cmp(&spec.values[a]).then_with(|| a.cmp(&b)));

    let mut excluded = vec![false; gt * gr];
    let mut picked: Vec<(usize, usize)> = Vec::with_capacity(l);
    let exclude_around = |it: usize, ir: usize, excluded: &mut Vec<bool>| {
        for dt in -1i64..=1 {
            for dr in -1i64..=1 {
                let (nt, nr) = (it as i64 + dt, ir as i64 + dr);
                if nt >= 0 && nr >= 0 && nt < gt as i64 && nr < gr as i64 {
                    excluded[idx(nt as usize, nr as usize)] = true;
                }
            }
        }
    };

    for &flat in &order {
        if picked.len() == l {
            break;
        }
        let (it, ir) = (flat / gr, flat % gr);
        if !excluded[flat] && is_local_max(it, ir) {
            picked.push((it, ir));
            exclude_around(it, ir, &mut excluded);
        }
    }
    for &flat in &order {
        if picked.len() == l {
            break;
        }
        let (it, ir) = (flat / gr, flat % gr);
        if !excluded[flat] {
            picked.push((it, ir));
            exclude_around(it, ir, &mut excluded);
        }
    }
    picked
}

/// One-shot 2D-OMP over the full global dictionary of compressed atoms.
pub fn omp2d_estimate(
    bank: &CombinerBank,
    cfg: &ArrayConfig,
    ytil: &SnapshotMatrix,
    global_grid: &GridSpec,
    l: usize,
) -> Result<EstimateSet> {
    global_grid.validate()?;
    let dict = Dictionary::build(
        bank,
        cfg,
        &global_grid.theta_points_deg(),
        &global_grid.range_points_m(),
    )?;
    omp2d_with_dictionary(&dict, ytil, l)
}

/// 2D-OMP against a prebuilt dictionary (the global dictionary does not
/// change across Monte Carlo trials, so callers may reuse it).
pub fn omp2d_with_dictionary(dict: &Dictionary, ytil: &SnapshotMatrix, l: usize) -> Result<EstimateSet> {
    let sol = mmv_omp(ytil, dict, l)?;
    Ok(estimate_from_solution(dict, sol))
}

/// Fully-digital 2D-MUSIC estimate on the global grid.
pub fn music2d_estimate(
    cfg: &ArrayConfig,
    y: &SnapshotMatrix,
    global_grid: &GridSpec,
    l: usize,
) -> Result<EstimateSet> {
    let manifold = MusicManifold::new(cfg, global_grid)?;
    music2d_with_manifold(cfg, &manifold, y, l)
}

/// 2D-MUSIC against a prebuilt steering manifold.
pub fn music2d_with_manifold(
    cfg: &ArrayConfig,
    manifold: &MusicManifold,
    y: &SnapshotMatrix,
    l: usize,
) -> Result<EstimateSet> {
    if l >= cfg.num_elements() {
        return Err(Error::InvalidArgument(format!(
            "MUSIC needs L < M (got L={l}, M={})",
            cfg.num_elements()
        )));
    }
    let cov = sample_covariance(y)?;
    let split = subspace_split(&cov, l)?;
    let spec = music_spectrum_from_noise_subspace(&split.noise, manifold)?;
    let peaks = peaks2d(&spec, l);
    if peaks.len() < l {
        return Err(Error::Estimation(format!(
            "found only {} spectrum cells for {} sources",
            peaks.len(),
            l
        )));
    }

    let entries: Vec<SourceEstimate> = peaks
        .iter()
        .map(|&(it, ir)| SourceEstimate {
            theta_deg: spec.theta_deg[it],
            range_m: spec.range_m[ir],
        })
        .collect();

    // waveforms by least squares against the selected steering vectors
    let cols: Vec<DVector<Complex64>> = entries
        .iter()
        .map(|e| nearfield_steering(cfg, e.theta_deg, e.range_m))
        .collect::<Result<_>>()?;
    let a_sel = DMatrix::from_columns(&cols);
    let waveforms = lstsq(&a_sel, &y.data)
        .ok_or_else(|| Error::Estimation("selected steering vectors are rank deficient".into()))?;
    let residual_norm = (&y.data - &a_sel * &waveforms).norm();

    Ok(EstimateSet {
        entries,
        waveforms,
        residual_norm,
    })
}
