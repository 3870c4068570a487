//! Analog combining: constant-modulus weight banks, the stacked
//! block-diagonal measurement matrix `Phi`, and snapshot compression.
//!
//! At instant `k` the array applies one weight vector per subarray, so the
//! `M`-element snapshot collapses to `P` outputs; stacking `K` instants
//! gives the `PK x M` matrix `Phi = [Phi_1; ...; Phi_K]` with row
//! `k*P + p` holding `w_{k,p}` (transposed, no conjugation) on subarray
//! `p`'s columns.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::ArrayConfig;
use crate::signal::{RowLayout, SnapshotMatrix};
use crate::{Error, Result};

/// How the DFT rows for the weight vectors are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerPolicy {
    /// Rows `0..K` of the `M0 x M0` DFT matrix, identical across subarrays.
    FirstK,
    /// `K` distinct rows sampled without replacement, identical across
    /// subarrays; deterministic per seed.
    Random { seed: u64 },
}

/// The `K x P` set of constant-modulus analog weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerBank {
    k: usize,
    p: usize,
    m0: usize,
    policy: CombinerPolicy,
    /// DFT row index used at each instant (shared by all subarrays).
    rows_used: Vec<usize>,
    /// `weights[k][p]`, each of length `M0` with unit-modulus entries.
    weights: Vec<Vec<DVector<Complex64>>>,
}

impl CombinerBank {
    pub fn num_instants(&self) -> usize {
        self.k
    }

    pub fn num_subarrays(&self) -> usize {
        self.p
    }

    pub fn elements_per_subarray(&self) -> usize {
        self.m0
    }

    pub fn policy(&self) -> CombinerPolicy {
        self.policy
    }

    pub fn rows_used(&self) -> &[usize] {
        &self.rows_used
    }

    /// Weight vector applied to subarray `p` at instant `k` (both 0-based).
    pub fn weight(&self, k: usize, p: usize) -> &DVector<Complex64> {
        &self.weights[k][p]
    }

    /// True when, for every subarray, the `K` weight vectors are mutually
    /// orthogonal. Holds for both shipped policies (distinct DFT rows);
    /// downstream processing assumes it and skips noise whitening.
    pub fn is_orthogonal(&self) -> bool {
        let tol = 1e-10 * self.m0 as f64;
        for p in 0..self.p {
            for k1 in 0..self.k {
                for k2 in (k1 + 1)..self.k {
                    if self.weights[k1][p].dotc(&self.weights[k2][p]).norm() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn validate(&self) -> Result<()> {
        for kk in 0..self.k {
            for pp in 0..self.p {
                let w = &self.weights[kk][pp];
                if w.len() != self.m0 {
                    return Err(Error::DimensionMismatch(format!(
                        "weight ({kk},{pp}) has length {} instead of M0={}",
                        w.len(),
                        self.m0
                    )));
                }
                for m in 0..w.len() {
                    if (w[m].norm() - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidArgument(format!(
                            "weight ({kk},{pp})[{m}] violates |w|=1: |w|={}",
                            w[m].norm()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn dft_row(m0: usize, row: usize) -> DVector<Complex64> {
    // unnormalized DFT: entry m = exp(-j*2*pi*row*m/M0)
    let step = -2.0 * std::f64::consts::PI * row as f64 / m0 as f64;
    DVector::from_fn(m0, |m, _| Complex64::from_polar(1.0, step * m as f64))
}

/// Builds a combiner bank from rows of the `M0 x M0` unnormalized DFT
/// matrix. Requires `1 <= K <= M0` so the per-subarray rows stay mutually
/// orthogonal.
pub fn dft_combiner_bank(m0: usize, k: usize, p: usize, policy: CombinerPolicy) -> Result<CombinerBank> {
    if m0 < 1 || p < 1 {
        return Err(Error::InvalidArgument("bank requires M0 >= 1 and P >= 1".into()));
    }
    if k < 1 || k > m0 {
        return Err(Error::InvalidArgument(format!(
            "bank requires 1 <= K <= M0 (got K={k}, M0={m0})"
        )));
    }
    let rows_used: Vec<usize> = match policy {
        CombinerPolicy::FirstK => (0..k).collect(),
        CombinerPolicy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, m0, k).into_vec()
        }
    };
    let weights = rows_used
        .iter()
        .map(|&row| {
            let w = dft_row(m0, row);
            vec![w; p]
        })
        .collect();
    Ok(CombinerBank {
        k,
        p,
        m0,
        policy,
        rows_used,
        weights,
    })
}

fn check_bank_matches(bank: &CombinerBank, cfg: &ArrayConfig) -> Result<()> {
    if bank.p != cfg.num_subarrays() || bank.m0 != cfg.elements_per_subarray() {
        return Err(Error::DimensionMismatch(format!(
            "bank is (P={}, M0={}) but array is (P={}, M0={})",
            bank.p,
            bank.m0,
            cfg.num_subarrays(),
            cfg.elements_per_subarray()
        )));
    }
    Ok(())
}

/// Materializes the dense `PK x M` measurement matrix. Row `k*P + p`
/// carries `w_{k,p}` on columns `p*M0 .. (p+1)*M0` and zeros elsewhere.
pub fn phi_matrix(bank: &CombinerBank, cfg: &ArrayConfig) -> Result<DMatrix<Complex64>> {
    check_bank_matches(bank, cfg)?;
    let (p, k, m0) = (bank.p, bank.k, bank.m0);
    let mut phi = DMatrix::<Complex64>::zeros(p * k, cfg.num_elements());
    for ki in 0..k {
        for pi in 0..p {
            let w = bank.weight(ki, pi);
            for mi in 0..m0 {
                phi[(ki * p + pi, pi * m0 + mi)] = w[mi];
            }
        }
    }
    Ok(phi)
}

/// Applies the measurement matrix to an element-space snapshot matrix:
/// `Ytil = Phi * Y`, computed block-wise (`P*K` inner products of length
/// `M0` per snapshot) without materializing `Phi`.
pub fn compress(bank: &CombinerBank, y: &SnapshotMatrix) -> Result<SnapshotMatrix> {
    let m = match y.layout {
        RowLayout::Elements { m } => m,
        RowLayout::Compressed { .. } => {
            return Err(Error::DimensionMismatch(
                "compress expects an element-space snapshot matrix".into(),
            ))
        }
    };
    if m != bank.p * bank.m0 || y.data.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "snapshot matrix has {} rows, bank expects M={}",
            y.data.nrows(),
            bank.p * bank.m0
        )));
    }
    let n = y.data.ncols();
    let (p, k, m0) = (bank.p, bank.k, bank.m0);
    let mut out = DMatrix::<Complex64>::zeros(p * k, n);
    for ki in 0..k {
        for pi in 0..p {
            let w = bank.weight(ki, pi);
            let block = y.data.rows(pi * m0, m0);
            for ni in 0..n {
                let mut acc = Complex64::ZERO;
                for mi in 0..m0 {
                    acc += w[mi] * block[(mi, ni)];
                }
                out[(ki * p + pi, ni)] = acc;
            }
        }
    }
    Ok(SnapshotMatrix {
        data: out,
        layout: RowLayout::Compressed { p, k },
    })
}

/// Compresses a single element-space vector (e.g. a steering vector) into
/// the `PK`-dimensional measurement space.
pub fn compress_vector(bank: &CombinerBank, a: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if a.len() != bank.p * bank.m0 {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, bank expects M={}",
            a.len(),
            bank.p * bank.m0
        )));
    }
    let (p, k, m0) = (bank.p, bank.k, bank.m0);
    let mut out = DVector::<Complex64>::zeros(p * k);
    for ki in 0..k {
        for pi in 0..p {
            let w = bank.weight(ki, pi);
            let mut acc = Complex64::ZERO;
            for mi in 0..m0 {
                acc += w[mi] * a[pi * m0 + mi];
            }
            out[ki * p + pi] = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, Scenario, SourceTruth};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn reference_array() -> ArrayConfig {
        ArrayConfig::with_lambda_spacings(4, 16, 0.5, 16.0, 60.48e9).unwrap()
    }

    #[test]
    fn dft_row_zero_is_all_ones() {
        let bank = dft_combiner_bank(4, 1, 2, CombinerPolicy::FirstK).unwrap();
        let w = bank.weight(0, 0);
        for m in 0..4 {
            assert_abs_diff_eq!(w[m].re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(w[m].im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn dft_row_one_matches_hand_values() {
        // exp(-j*2*pi*m/4) = [1, -j, -1, j]
        let bank = dft_combiner_bank(4, 2, 2, CombinerPolicy::FirstK).unwrap();
        let w = bank.weight(1, 0);
        let expect = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        for m in 0..4 {
            assert_abs_diff_eq!(w[m].re, expect[m].re, epsilon = 1e-12);
            assert_abs_diff_eq!(w[m].im, expect[m].im, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_dft_bank_is_orthogonal() {
        let bank = dft_combiner_bank(16, 16, 4, CombinerPolicy::FirstK).unwrap();
        bank.validate().unwrap();
        assert!(bank.is_orthogonal());
        for k1 in 0..16 {
            for k2 in 0..16 {
                let g = bank.weight(k1, 0).dotc(bank.weight(k2, 0));
                let expect = if k1 == k2 { 16.0 } else { 0.0 };
                assert_abs_diff_eq!(g.norm(), expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn k_above_m0_rejected() {
        assert!(matches!(
            dft_combiner_bank(16, 17, 4, CombinerPolicy::FirstK),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn random_policy_is_deterministic_and_distinct() {
        let b1 = dft_combiner_bank(16, 8, 4, CombinerPolicy::Random { seed: 5 }).unwrap();
        let b2 = dft_combiner_bank(16, 8, 4, CombinerPolicy::Random { seed: 5 }).unwrap();
        assert_eq!(b1.rows_used(), b2.rows_used());
        let mut rows = b1.rows_used().to_vec();
        rows.sort_unstable();
        rows.dedup();
        assert_eq!(rows.len(), 8);
        assert!(b1.is_orthogonal());
        b1.validate().unwrap();
    }

    #[test]
    fn phi_layout_small_case() {
        // P=2, M0=2, K=1, w = [1,1]: Phi = [[1,1,0,0],[0,0,1,1]]
        let cfg = ArrayConfig::new(2, 2, 0.01, 0.02, 1e9).unwrap();
        let bank = dft_combiner_bank(2, 1, 2, CombinerPolicy::FirstK).unwrap();
        let phi = phi_matrix(&bank, &cfg).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::ZERO;
        let expect = DMatrix::from_row_slice(2, 4, &[one, one, zero, zero, zero, zero, one, one]);
        assert_eq!(phi, expect);
    }

    #[test]
    fn phi_zero_pattern_and_row_support() {
        let cfg = reference_array();
        let bank = dft_combiner_bank(16, 16, 4, CombinerPolicy::FirstK).unwrap();
        let phi = phi_matrix(&bank, &cfg).unwrap();
        for ki in 0..16 {
            for pi in 0..4 {
                let row = phi.row(ki * 4 + pi);
                let mut nonzeros = 0;
                for i in 0..row.ncols() {
                    if row[i].norm() > 0.0 {
                        nonzeros += 1;
                        assert!(i >= pi * 16 && i < (pi + 1) * 16, "support outside subarray block");
                    }
                }
                assert_eq!(nonzeros, 16);
            }
        }
    }

    #[test]
    fn phi_rows_orthogonal_scaled_identity() {
        for (p, m0, k) in [(4usize, 16usize, 16usize), (2, 8, 4), (3, 4, 1)] {
            let bank = dft_combiner_bank(m0, k, p, CombinerPolicy::FirstK).unwrap();
            let cfg = ArrayConfig::new(p, m0, 0.01, 0.01 * m0 as f64, 1e9).unwrap();
            let phi = phi_matrix(&bank, &cfg).unwrap();
            let gram = &phi * phi.adjoint();
            for i in 0..p * k {
                for j in 0..p * k {
                    let expect = if i == j { m0 as f64 } else { 0.0 };
                    assert_abs_diff_eq!(gram[(i, j)].norm(), expect, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn compress_zero_is_zero() {
        let bank = dft_combiner_bank(16, 16, 4, CombinerPolicy::FirstK).unwrap();
        let y = SnapshotMatrix {
            data: DMatrix::zeros(64, 5),
            layout: RowLayout::Elements { m: 64 },
        };
        let yt = compress(&bank, &y).unwrap();
        assert_eq!(yt.layout, RowLayout::Compressed { p: 4, k: 16 });
        assert!(yt.data.iter().all(|z| *z == Complex64::ZERO));
    }

    #[test]
    fn compress_matches_dense_phi() {
        let cfg = reference_array();
        let bank = dft_combiner_bank(16, 16, 4, CombinerPolicy::FirstK).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let y = SnapshotMatrix {
            data: DMatrix::from_fn(64, 6, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }),
            layout: RowLayout::Elements { m: 64 },
        };
        let fast = compress(&bank, &y).unwrap();
        let dense = phi_matrix(&bank, &cfg).unwrap() * &y.data;
        let err = (&fast.data - &dense).norm() / dense.norm();
        assert!(err < 1e-12, "relative error {err}");
    }

    #[test]
    fn compressed_single_source_is_rank_one() {
        let cfg = reference_array();
        let bank = dft_combiner_bank(16, 16, 4, CombinerPolicy::FirstK).unwrap();
        let sc = Scenario {
            sources: vec![SourceTruth::new(25.0, 3.0).unwrap()],
            n_snapshots: 8,
            snr_db: f64::INFINITY,
            seed: 2,
        };
        let (y, _) = synthesize(&cfg, &sc).unwrap();
        let yt = compress(&bank, &y).unwrap();
        // singular values via the Gram spectrum: only one may be non-negligible
        let gram = yt.data.ad_mul(&yt.data);
        let eig = gram.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(vals[0] > 0.0);
        assert!(vals[1].abs() / vals[0] < 1e-12);
    }

    #[test]
    fn dimension_mismatches_rejected() {
        let bank = dft_combiner_bank(16, 16, 4, CombinerPolicy::FirstK).unwrap();
        let y = SnapshotMatrix {
            data: DMatrix::zeros(32, 5),
            layout: RowLayout::Elements { m: 32 },
        };
        assert!(compress(&bank, &y).is_err());
        let cfg = ArrayConfig::new(2, 8, 0.01, 0.08, 1e9).unwrap();
        assert!(phi_matrix(&bank, &cfg).is_err());
    }
}
