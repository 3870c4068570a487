//! Sparse modular array geometry: element positions, aperture, Rayleigh
//! distance, and search-grid specifications.
//!
//! The array lies on the x-axis and consists of `P` subarrays of `M0`
//! elements each. Element spacing is `d` inside a subarray and `dp` between
//! the first elements of adjacent subarrays; `dp > M0*d` leaves element-free
//! gaps (a sparse aperture), `dp == M0*d` degenerates to a uniform linear
//! array.

use crate::{Error, Result};

/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub(crate) fn deg_to_rad(deg: f64) -> f64 {
    deg * std::f64::consts::PI / 180.0
}

/// Physical description of the modular array plus derived quantities cached
/// at construction.
///
/// Index conventions: subarrays are 1-based (`p` in `1..=P`), elements inside
/// a subarray 0-based (`m` in `0..M0`), and the flattened global element
/// index is `i = (p-1)*M0 + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    p: usize,
    m0: usize,
    d_m: f64,
    dp_m: f64,
    fc_hz: f64,
    lambda_m: f64,
    m: usize,
    aperture_m: f64,
    rayleigh_m: f64,
}

impl ArrayConfig {
    /// Builds a configuration from subarray count `p`, elements per subarray
    /// `m0`, intra-subarray spacing `d_m`, inter-subarray spacing `dp_m`
    /// (both meters) and carrier frequency `fc_hz`.
    pub fn new(p: usize, m0: usize, d_m: f64, dp_m: f64, fc_hz: f64) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidArgument("P must be >= 1".into()));
        }
        if m0 < 1 {
            return Err(Error::InvalidArgument("M0 must be >= 1".into()));
        }
        if !(d_m > 0.0) {
            return Err(Error::InvalidArgument(format!("d must be > 0 m (got {d_m})")));
        }
        if !(fc_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("fc must be > 0 Hz (got {fc_hz})")));
        }
        if dp_m < m0 as f64 * d_m {
            return Err(Error::InvalidArgument(format!(
                "dp must be >= M0*d (got dp={dp_m} m, M0*d={} m)",
                m0 as f64 * d_m
            )));
        }
        let lambda_m = SPEED_OF_LIGHT / fc_hz;
        let aperture_m = (p as f64 - 1.0) * dp_m + (m0 as f64 - 1.0) * d_m;
        let rayleigh_m = 2.0 * aperture_m * aperture_m / lambda_m;
        Ok(Self {
            p,
            m0,
            d_m,
            dp_m,
            fc_hz,
            lambda_m,
            m: p * m0,
            aperture_m,
            rayleigh_m,
        })
    }

    /// Convenience constructor with spacings expressed in carrier wavelengths.
    pub fn with_lambda_spacings(
        p: usize,
        m0: usize,
        d_lambdas: f64,
        dp_lambdas: f64,
        fc_hz: f64,
    ) -> Result<Self> {
        if !(fc_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("fc must be > 0 Hz (got {fc_hz})")));
        }
        let lambda = SPEED_OF_LIGHT / fc_hz;
        Self::new(p, m0, d_lambdas * lambda, dp_lambdas * lambda, fc_hz)
    }

    pub fn num_subarrays(&self) -> usize {
        self.p
    }

    pub fn elements_per_subarray(&self) -> usize {
        self.m0
    }

    /// Total element count `M = P*M0`.
    pub fn num_elements(&self) -> usize {
        self.m
    }

    pub fn intra_spacing_m(&self) -> f64 {
        self.d_m
    }

    pub fn inter_spacing_m(&self) -> f64 {
        self.dp_m
    }

    pub fn carrier_hz(&self) -> f64 {
        self.fc_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        self.lambda_m
    }

    /// Overall aperture `D = (P-1)*dp + (M0-1)*d` in meters.
    pub fn aperture_m(&self) -> f64 {
        self.aperture_m
    }

    /// Rayleigh distance `Z_R = 2*D^2/lambda` in meters; sources closer than
    /// this are in the radiating near field of the full aperture.
    pub fn rayleigh_distance_m(&self) -> f64 {
        self.rayleigh_m
    }

    /// `(D, Z_R)` in meters.
    pub fn aperture_and_rayleigh(&self) -> (f64, f64) {
        (self.aperture_m, self.rayleigh_m)
    }

    /// Global position of element `m` of subarray `p` (1-based `p`, 0-based
    /// `m`): `[(p-1)*dp + m*d, 0, 0]` in meters.
    pub fn element_position(&self, p: usize, m: usize) -> Result<[f64; 3]> {
        if p < 1 || p > self.p {
            return Err(Error::IndexOutOfRange(format!(
                "subarray index p={p} outside 1..={}",
                self.p
            )));
        }
        if m >= self.m0 {
            return Err(Error::IndexOutOfRange(format!(
                "element index m={m} outside 0..{}",
                self.m0
            )));
        }
        Ok([(p as f64 - 1.0) * self.dp_m + m as f64 * self.d_m, 0.0, 0.0])
    }

    /// x-coordinates of all `M` elements in flattened order
    /// `i = (p-1)*M0 + m`.
    pub fn element_x_positions(&self) -> Vec<f64> {
        let mut xs = Vec::with_capacity(self.m);
        for p in 1..=self.p {
            for m in 0..self.m0 {
                xs.push((p as f64 - 1.0) * self.dp_m + m as f64 * self.d_m);
            }
        }
        xs
    }
}

/// Linearly spaced points including both endpoints; `count == 1` yields
/// `[min]`, otherwise the last point is set to `max` exactly.
pub fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![min];
    }
    let step = (max - min) / (count - 1) as f64;
    let mut pts: Vec<f64> = (0..count).map(|i| min + i as f64 * step).collect();
    pts[count - 1] = max;
    pts
}

/// Rectangular angle-range search grid. Angles in degrees, ranges in meters,
/// both linearly spaced inclusive of the endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub g_theta: usize,
    pub r_min_m: f64,
    pub r_max_m: f64,
    pub g_r: usize,
}

impl GridSpec {
    pub fn new(
        theta_min_deg: f64,
        theta_max_deg: f64,
        g_theta: usize,
        r_min_m: f64,
        r_max_m: f64,
        g_r: usize,
    ) -> Result<Self> {
        let grid = Self {
            theta_min_deg,
            theta_max_deg,
            g_theta,
            r_min_m,
            r_max_m,
            g_r,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min_deg < self.theta_max_deg) {
            return Err(Error::InvalidArgument(format!(
                "grid requires theta_min < theta_max (got {} >= {})",
                self.theta_min_deg, self.theta_max_deg
            )));
        }
        if self.g_theta < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid requires G_theta >= 2 (got {})",
                self.g_theta
            )));
        }
        if !(self.r_min_m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid requires r_min > 0 m (got {})",
                self.r_min_m
            )));
        }
        if !(self.r_min_m < self.r_max_m) {
            return Err(Error::InvalidArgument(format!(
                "grid requires r_min < r_max (got {} >= {})",
                self.r_min_m, self.r_max_m
            )));
        }
        if self.g_r < 1 {
            return Err(Error::InvalidArgument("grid requires G_r >= 1".into()));
        }
        Ok(())
    }

    pub fn theta_points_deg(&self) -> Vec<f64> {
        linspace(self.theta_min_deg, self.theta_max_deg, self.g_theta)
    }

    pub fn range_points_m(&self) -> Vec<f64> {
        linspace(self.r_min_m, self.r_max_m, self.g_r)
    }

    pub fn theta_step_deg(&self) -> f64 {
        (self.theta_max_deg - self.theta_min_deg) / (self.g_theta - 1) as f64
    }
}
