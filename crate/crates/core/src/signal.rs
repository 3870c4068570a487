//! Fully-digital signal synthesis and steering vectors.
//!
//! The near-field steering vector carries both the spherical-wavefront phase
//! and the `r/r_pm` amplitude taper; the far-field subarray model is
//! unit-modulus and range independent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{deg_to_rad, ArrayConfig};
use crate::{Error, Result};

/// Ground-truth source location: azimuth in degrees, range in meters from
/// the reference element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTruth {
    pub theta_deg: f64,
    pub r_m: f64,
}

impl SourceTruth {
    pub fn new(theta_deg: f64, r_m: f64) -> Result<Self> {
        if !(r_m > 0.0) {
            return Err(Error::Domain(format!("source range must be > 0 m (got {r_m})")));
        }
        if !(theta_deg > -90.0 && theta_deg < 90.0) {
            return Err(Error::Domain(format!(
                "source azimuth must lie in (-90, 90) degrees (got {theta_deg})"
            )));
        }
        Ok(Self { theta_deg, r_m })
    }

    /// Cartesian position `[r*cos(theta), r*sin(theta), 0]` in meters.
    pub fn position(&self) -> [f64; 3] {
        let th = deg_to_rad(self.theta_deg);
        [self.r_m * th.cos(), self.r_m * th.sin(), 0.0]
    }
}

/// One simulated acquisition: sources, snapshot count, per-element SNR and
/// the RNG seed that makes it reproducible.
///
/// `snr_db = f64::INFINITY` disables noise entirely (the noise term is then
/// skipped, not just scaled to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sources: Vec<SourceTruth>,
    pub n_snapshots: usize,
    pub snr_db: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self, cfg: &ArrayConfig) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::InvalidArgument("scenario needs at least one source".into()));
        }
        if self.n_snapshots < 1 {
            return Err(Error::InvalidArgument("scenario needs N >= 1 snapshots".into()));
        }
        if self.sources.len() > cfg.num_elements() {
            return Err(Error::InvalidArgument(format!(
                "L={} sources exceed M={} elements",
                self.sources.len(),
                cfg.num_elements()
            )));
        }
        for s in &self.sources {
            SourceTruth::new(s.theta_deg, s.r_m)?;
        }
        Ok(())
    }

    /// Noise variance `sigma_v^2 = 10^(-snr_db/10)` for unit-power sources.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }
}

/// Row semantics of a snapshot matrix: one row per antenna element, or one
/// row per (measurement instant, subarray) pair after analog combining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLayout {
    /// `M` rows, flattened element order `i = (p-1)*M0 + m`.
    Elements { m: usize },
    /// `P*K` rows ordered instant-major: row `k*P + p` (0-based).
    Compressed { p: usize, k: usize },
}

/// Complex snapshot matrix plus the metadata saying what its rows are.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub data: DMatrix<Complex64>,
    pub layout: RowLayout,
}

impl SnapshotMatrix {
    pub fn num_snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// Near-field steering vector of length `M` for a source at `(theta, r)`.
///
/// Entry `(p, m)` is `(r / r_pm) * exp(-j*2*pi*fc*tau_pm)` with
/// `tau_pm = (||s_pm - s|| - r) / c`; the reference element `(1, 0)` is
/// exactly `1 + 0j`.
pub fn nearfield_steering(cfg: &ArrayConfig, theta_deg: f64, r_m: f64) -> Result<DVector<Complex64>> {
    if !(r_m > 0.0) {
        return Err(Error::Domain(format!("steering range must be > 0 m (got {r_m})")));
    }
    let th = deg_to_rad(theta_deg);
    let (sx, sy) = (r_m * th.cos(), r_m * th.sin());
    let lambda = cfg.wavelength_m();
    let xs = cfg.element_x_positions();
    let mut a = DVector::<Complex64>::zeros(cfg.num_elements());
    for (i, &x) in xs.iter().enumerate() {
        let dist = ((x - sx) * (x - sx) + sy * sy).sqrt();
        let phase = -2.0 * std::f64::consts::PI * (dist - r_m) / lambda;
        a[i] = Complex64::from_polar(r_m / dist, phase);
    }
    // the reference element has zero delay and unit amplitude by definition
    a[0] = Complex64::new(1.0, 0.0);
    Ok(a)
}

/// Range-independent far-field steering vector of a single subarray:
/// entry `m` is `exp(j*(2*pi/lambda)*m*d*cos(theta))`, length `M0`.
pub fn farfield_sub_steering(cfg: &ArrayConfig, theta_deg: f64) -> DVector<Complex64> {
    let cos_th = deg_to_rad(theta_deg).cos();
    let k_d = 2.0 * std::f64::consts::PI / cfg.wavelength_m() * cfg.intra_spacing_m();
    DVector::from_fn(cfg.elements_per_subarray(), |m, _| {
        Complex64::from_polar(1.0, k_d * m as f64 * cos_th)
    })
}

/// Array manifold matrix `A` (`M x L`) whose columns are the near-field
/// steering vectors of the given sources.
pub fn manifold(cfg: &ArrayConfig, sources: &[SourceTruth]) -> Result<DMatrix<Complex64>> {
    let cols: Vec<DVector<Complex64>> = sources
        .iter()
        .map(|s| nearfield_steering(cfg, s.theta_deg, s.r_m))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

fn draw_circular_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(scale * re, scale * im)
}

/// Synthesizes the fully-digital received data `Y = A*X + V` (`M x N`)
/// together with the drawn source waveforms `X` (`L x N`).
///
/// `X` entries are i.i.d. unit-power circular complex Gaussian; `V` entries
/// are i.i.d. circular complex Gaussian with variance `10^(-snr_db/10)`.
/// Waveforms are drawn first, then noise, both row-major, from a ChaCha8
/// stream seeded with `sc.seed`, so the output is a pure function of
/// `(cfg, sc)`.
pub fn synthesize(cfg: &ArrayConfig, sc: &Scenario) -> Result<(SnapshotMatrix, DMatrix<Complex64>)> {
    sc.validate(cfg)?;
    let l = sc.sources.len();
    let n = sc.n_snapshots;
    let m = cfg.num_elements();

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut x = DMatrix::<Complex64>::zeros(l, n);
    for li in 0..l {
        for ni in 0..n {
            x[(li, ni)] = draw_circular_gaussian(&mut rng, 1.0);
        }
    }

    let a = manifold(cfg, &sc.sources)?;
    let mut y = &a * &x;

    let sigma2 = sc.noise_variance();
    if sigma2 > 0.0 {
        for mi in 0..m {
            for ni in 0..n {
                y[(mi, ni)] += draw_circular_gaussian(&mut rng, sigma2);
            }
        }
    }

    Ok((
        SnapshotMatrix {
            data: y,
            layout: RowLayout::Elements { m },
        },
        x,
    ))
}

/// Fresnel regime diagnostics for a source range (never blocks estimation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FresnelCheck {
    /// `r >= 2*((M0-1)*d)^2 / lambda`: the subarray far-field model is valid.
    pub subarray_farfield: bool,
    /// `r <= Z_R`: the full aperture still resolves range.
    pub full_array_nearfield: bool,
}

pub fn fresnel_check(cfg: &ArrayConfig, r_m: f64) -> Result<FresnelCheck> {
    if !(r_m > 0.0) {
        return Err(Error::Domain(format!("range must be > 0 m (got {r_m})")));
    }
    let sub_aperture = (cfg.elements_per_subarray() as f64 - 1.0) * cfg.intra_spacing_m();
    let sub_boundary = 2.0 * sub_aperture * sub_aperture / cfg.wavelength_m();
    Ok(FresnelCheck {
        subarray_farfield: r_m >= sub_boundary,
        full_array_nearfield: r_m <= cfg.rayleigh_distance_m(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn reference_array() -> ArrayConfig {
        ArrayConfig::with_lambda_spacings(4, 16, 0.5, 16.0, 60.48e9).unwrap()
    }

    /// Independent oracle: evaluate the steering entry from the raw 3D
    /// Euclidean distance, without reusing the implementation's internals.
    fn steering_oracle(cfg: &ArrayConfig, theta_deg: f64, r_m: f64, p: usize, m: usize) -> Complex64 {
        let th = theta_deg.to_radians();
        let s = [r_m * th.cos(), r_m * th.sin(), 0.0];
        let e = cfg.element_position(p, m).unwrap();
        let dist = ((e[0] - s[0]).powi(2) + (e[1] - s[1]).powi(2) + (e[2] - s[2]).powi(2)).sqrt();
        let tau = (dist - r_m) / SPEED_OF_LIGHT_TEST;
        let phase = -2.0 * std::f64::consts::PI * cfg.carrier_hz() * tau;
        (r_m / dist) * Complex64::from_polar(1.0, phase)
    }

    const SPEED_OF_LIGHT_TEST: f64 = 299_792_458.0;

    #[test]
    fn reference_element_entry_is_one() {
        let cfg = reference_array();
        for (th, r) in [(0.1, 0.5), (43.3, 4.8), (-60.0, 9.0), (89.0, 100.0)] {
            let a = nearfield_steering(&cfg, th, r).unwrap();
            assert_eq!(a[0], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn broadside_magnitudes_never_exceed_one() {
        let cfg = ArrayConfig::with_lambda_spacings(1, 16, 0.5, 8.0, 60.48e9).unwrap();
        let a = nearfield_steering(&cfg, 90.0, 2.0).unwrap();
        for i in 0..a.len() {
            assert!(a[i].norm() <= 1.0 + 1e-15);
            assert!(a[i].norm() > 0.0);
        }
    }

    #[test]
    fn steering_matches_distance_oracle() {
        let cfg = reference_array();
        let a = nearfield_steering(&cfg, 43.3, 4.8).unwrap();
        for (p, m) in [(4, 15), (2, 3), (1, 15), (3, 0)] {
            let i = (p - 1) * cfg.elements_per_subarray() + m;
            let expect = steering_oracle(&cfg, 43.3, 4.8, p, m);
            assert_abs_diff_eq!(a[i].re, expect.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a[i].im, expect.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_rejects_nonpositive_range() {
        let cfg = reference_array();
        assert!(matches!(nearfield_steering(&cfg, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(nearfield_steering(&cfg, 0.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn farfield_sub_steering_broadside_is_all_ones() {
        let cfg = reference_array();
        let a = farfield_sub_steering(&cfg, 90.0);
        for m in 0..a.len() {
            assert_abs_diff_eq!(a[m].re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a[m].im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn farfield_sub_steering_endfire_alternates() {
        // theta = 0, d = lambda/2: entry m = exp(j*pi*m)
        let cfg = reference_array();
        let a = farfield_sub_steering(&cfg, 0.0);
        for m in 0..a.len() {
            let expect = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert_abs_diff_eq!(a[m].re, expect, epsilon = 1e-12);
            assert_abs_diff_eq!(a[m].im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn farfield_sub_steering_sixty_degrees() {
        // 2*pi/lambda * (lambda/2) * cos(60deg) = pi/2 -> entry 1 = j
        let cfg = reference_array();
        let a = farfield_sub_steering(&cfg, 60.0);
        assert_abs_diff_eq!(a[1].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1].im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nearfield_converges_to_subarray_farfield() {
        let cfg = reference_array();
        let theta = 37.0;
        let r = 1e6 * cfg.aperture_m();
        let near = nearfield_steering(&cfg, theta, r).unwrap();
        let far = farfield_sub_steering(&cfg, theta);
        // compare phase profiles on subarray 1 up to the common offset
        let offset = near[0].arg() - far[0].arg();
        for m in 0..cfg.elements_per_subarray() {
            let mut dphi = near[m].arg() - far[m].arg() - offset;
            while dphi > std::f64::consts::PI {
                dphi -= 2.0 * std::f64::consts::PI;
            }
            while dphi < -std::f64::consts::PI {
                dphi += 2.0 * std::f64::consts::PI;
            }
            assert!(dphi.abs() < 1e-3, "element {m}: phase deviation {dphi}");
        }
    }

    #[test]
    fn noiseless_synthesis_is_exact() {
        let cfg = reference_array();
        let sc = Scenario {
            sources: vec![SourceTruth::new(43.3, 4.8).unwrap(), SourceTruth::new(-10.0, 2.0).unwrap()],
            n_snapshots: 8,
            snr_db: f64::INFINITY,
            seed: 7,
        };
        let (y, x) = synthesize(&cfg, &sc).unwrap();
        let a = manifold(&cfg, &sc.sources).unwrap();
        let rec = &a * &x;
        assert_eq!(y.data, rec);
        assert_eq!(y.layout, RowLayout::Elements { m: 64 });
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = reference_array();
        let sc = Scenario {
            sources: vec![SourceTruth::new(10.0, 3.0).unwrap()],
            n_snapshots: 16,
            snr_db: 5.0,
            seed: 42,
        };
        let (y1, x1) = synthesize(&cfg, &sc).unwrap();
        let (y2, x2) = synthesize(&cfg, &sc).unwrap();
        assert_eq!(y1.data, y2.data);
        assert_eq!(x1, x2);
    }

    #[test]
    fn noise_power_matches_snr() {
        // N*M = 2048*64 > 1e5 samples: sample variance within 5%
        let cfg = reference_array();
        let sc = Scenario {
            sources: vec![SourceTruth::new(20.0, 5.0).unwrap()],
            n_snapshots: 2048,
            snr_db: 10.0,
            seed: 3,
        };
        let (y, x) = synthesize(&cfg, &sc).unwrap();
        let a = manifold(&cfg, &sc.sources).unwrap();
        let v = &y.data - &a * &x;
        let samples = (v.nrows() * v.ncols()) as f64;
        let power = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples;
        assert_relative_eq!(power, sc.noise_variance(), max_relative = 0.05);
    }

    #[test]
    fn fresnel_reference_thresholds() {
        let cfg = reference_array();
        // subarray boundary 2*(7.5*lambda)^2/lambda = 112.5*lambda ~ 0.5577 m
        let boundary = 112.5 * cfg.wavelength_m();
        assert_relative_eq!(boundary, 0.5577, max_relative = 1e-3);

        let c = fresnel_check(&cfg, 1.0).unwrap();
        assert_eq!((c.subarray_farfield, c.full_array_nearfield), (true, true));
        let c = fresnel_check(&cfg, 0.1).unwrap();
        assert_eq!((c.subarray_farfield, c.full_array_nearfield), (false, true));
        let c = fresnel_check(&cfg, 100.0).unwrap();
        assert_eq!((c.subarray_farfield, c.full_array_nearfield), (true, false));
    }

    #[test]
    fn scenario_validation() {
        let cfg = ArrayConfig::new(1, 2, 0.01, 0.02, 1e9).unwrap();
        let bad = Scenario {
            sources: vec![
                SourceTruth::new(0.0, 1.0).unwrap(),
                SourceTruth::new(1.0, 1.0).unwrap(),
                SourceTruth::new(2.0, 1.0).unwrap(),
            ],
            n_snapshots: 4,
            snr_db: 0.0,
            seed: 0,
        };
        // L=3 > M=2
        assert!(bad.validate(&cfg).is_err());
    }
}
