//! Dense SPD linear algebra and seeded Gaussian sampling.
//!
//! Everything in this module is deterministic: factorizations are direct
//! algorithms and random draws are keyed by an explicit `(seed, stream_id)`
//! pair, so identical inputs yield identical outputs across runs and thread
//! layouts.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Maximum matrix dimension accepted by [`SpdMatrix`]. The pipeline works on
/// small flattened last-layer parameter blocks, so everything stays dense.
pub const MAX_DIM: usize = 256;

/// First rung of the jitter ladder used by the `*_escalating` variants.
pub const JITTER_START: f64 = 1e-8;
/// Multiplier between rungs of the jitter ladder.
pub const JITTER_GROWTH: f64 = 10.0;
/// Last rung of the jitter ladder; beyond this the matrix is rejected.
pub const JITTER_MAX: f64 = 1e-2;

/// Relative tolerance for the symmetry check at construction.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Dense symmetric matrix intended to be positive definite after jitter.
///
/// Construction validates squareness, finiteness, and symmetry (within
/// [`SYMMETRY_RTOL`] relative to the largest entry) and then stores an exactly
/// symmetrized copy, so `m[(i, j)] == m[(j, i)]` bitwise for every instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    data: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validate and wrap a dense matrix.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let (r, c) = data.shape();
        if r != c {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: c,
            });
        }
        if r == 0 || r > MAX_DIM {
            return Err(Error::invalid_param(
                "dim",
                format!("matrix dimension {r} outside 1..={MAX_DIM}"),
            ));
        }
        let mut amax = 0.0_f64;
        for v in data.iter() {
            if !v.is_finite() {
                return Err(Error::invalid_param("entries", "non-finite matrix entry"));
            }
            amax = amax.max(v.abs());
        }
        let tol = SYMMETRY_RTOL * amax.max(1.0);
        for i in 0..r {
            for j in (i + 1)..r {
                if (data[(i, j)] - data[(j, i)]).abs() > tol {
                    return Err(Error::invalid_param(
                        "entries",
                        format!(
                            "asymmetric at ({i},{j}): {} vs {}",
                            data[(i, j)],
                            data[(j, i)]
                        ),
                    ));
                }
            }
        }
        Ok(Self::symmetrized(data))
    }

    /// Wrap a matrix that is symmetric up to floating-point noise, averaging
    /// mirrored entries. For products like `A * A^T` where symmetry holds by
    /// algebra but not necessarily bitwise.
    pub fn symmetrized(mut data: DMatrix<f64>) -> Self {
        let n = data.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        SpdMatrix { data }
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &DVector<f64>) -> Self {
        SpdMatrix {
            data: DMatrix::from_diagonal(diag),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.data.diagonal()
    }

    /// Row-major flattening, the layout used in all file outputs.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// Rebuild from a row-major flattening.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let data = DMatrix::from_fn(dim, dim, |i, j| entries[i * dim + j]);
        Self::new(data)
    }

    /// Cholesky factor of `self + jitter*I`.
    ///
    /// The jitter is used exactly as given: a singular matrix with
    /// `jitter = 0` fails with [`Error::NotPositiveDefinite`]. Callers that
    /// want the escalation ladder use [`SpdMatrix::cholesky_escalating`].
    pub fn cholesky(&self, jitter: f64) -> Result<CholeskyFactor> {
        if !jitter.is_finite() || jitter < 0.0 {
            return Err(Error::invalid_param("jitter", "must be finite and >= 0"));
        }
        let mut m = self.data.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        match nalgebra::Cholesky::new(m) {
            Some(chol) => Ok(CholeskyFactor {
                lower: chol.unpack(),
            }),
            None => Err(Error::NotPositiveDefinite {
                dim: self.dim(),
                jitter,
            }),
        }
    }

    /// Cholesky with jitter escalation: tries `start_jitter`, then walks the
    /// ladder `JITTER_START * JITTER_GROWTH^k` up to [`JITTER_MAX`].
    /// Returns the factor together with the jitter that succeeded.
    pub fn cholesky_escalating(&self, start_jitter: f64) -> Result<(CholeskyFactor, f64)> {
        let mut jitter = start_jitter;
        loop {
            match self.cholesky(jitter) {
                Ok(f) => return Ok((f, jitter)),
                Err(Error::NotPositiveDefinite { .. }) => {
                    let next = if jitter < JITTER_START {
                        JITTER_START
                    } else {
                        jitter * JITTER_GROWTH
                    };
                    if next > JITTER_MAX {
                        return Err(Error::NotPositiveDefinite {
                            dim: self.dim(),
                            jitter,
                        });
                    }
                    jitter = next;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Inverse of `self + jitter*I` via Cholesky. Result is exactly symmetric.
    pub fn invert(&self, jitter: f64) -> Result<SpdMatrix> {
        let factor = self.cholesky(jitter)?;
        Ok(factor.inverse_of_original())
    }

    /// Inverse with jitter escalation; returns the jitter that succeeded.
    pub fn invert_escalating(&self, start_jitter: f64) -> Result<(SpdMatrix, f64)> {
        let (factor, used) = self.cholesky_escalating(start_jitter)?;
        Ok((factor.inverse_of_original(), used))
    }

    /// Eigenvalues of the symmetric matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .data
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
        ev
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }
}

/// Lower-triangular Cholesky factor `L` with `L * L^T` reproducing the
/// (jittered) source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    /// Wrap an explicit lower-triangular matrix (upper part must be zero).
    /// Permits degenerate factors such as the all-zero matrix, which encode
    /// zero-variance distributions.
    pub fn from_lower(lower: DMatrix<f64>) -> Result<Self> {
        let (r, c) = lower.shape();
        if r != c {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: c,
            });
        }
        for i in 0..r {
            for j in (i + 1)..c {
                if lower[(i, j)] != 0.0 {
                    return Err(Error::invalid_param(
                        "lower",
                        format!("entry ({i},{j}) above the diagonal is non-zero"),
                    ));
                }
            }
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_param("lower", "non-finite entry"));
        }
        Ok(CholeskyFactor { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// `L * L^T`, the matrix this factor represents.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    /// Inverse of `L * L^T`, exactly symmetrized.
    fn inverse_of_original(&self) -> SpdMatrix {
        let n = self.dim();
        let linv = self
            .lower
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("cholesky factor has positive diagonal");
        SpdMatrix::symmetrized(linv.transpose() * linv)
    }
}

/// Deterministic RNG keyed by `(seed, stream_id)`.
///
/// Identical keys yield identical draw sequences regardless of how work is
/// scheduled across threads, so every sampling site in the pipeline derives
/// its own stream instead of sharing a mutable generator.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        SeededRng {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// New generator with the same seed on a different stream.
    pub fn substream(&self, stream_id: u64) -> Self {
        SeededRng::new(self.seed, stream_id)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal_vector(&mut self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.standard_normal())
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. Modulo bias is negligible at these scales.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index bound must be positive");
        (self.rng.next_u64() % n as u64) as usize
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Mix structured indices (step, sample, modality, ...) into a stream id.
/// FNV-1a over the little-endian words; collisions are not a concern at the
/// index ranges this crate uses, only determinism is.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for part in parts {
        for byte in part.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Draw `mean + L * z` with `z` standard normal.
pub fn sample_gaussian(
    mean: &DVector<f64>,
    chol_factor: &CholeskyFactor,
    rng: &mut SeededRng,
) -> Result<DVector<f64>> {
    if mean.len() != chol_factor.dim() {
        return Err(Error::DimensionMismatch {
            expected: chol_factor.dim(),
            got: mean.len(),
        });
    }
    let z = rng.normal_vector(mean.len());
    Ok(mean + chol_factor.lower() * z)
}
