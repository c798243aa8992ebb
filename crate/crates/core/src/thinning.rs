//! Binomial thinning and the left/right matricial thinning operators.
//!
//! `A ∘_L Y` replaces every scalar product `a_ik * y_kj` of the matrix
//! product `A Y` by an independent binomial thinning `a_ik ∘ y_kj`, and
//! `Y ∘_R B` does the same for `Y B`. Hence `E[A ∘_L Y ∘_R Bᵀ] = A Y Bᵀ`.
//! Every call draws fresh counting series from the supplied stream.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MatinarError, Result};
use crate::linalg::RealMatrix;

/// Nonnegative integer matrix.
pub type CountMatrix = DMatrix<u64>;

/// Below this count a thinning is a plain sum of Bernoulli draws.
const BERNOULLI_LIMIT: u64 = 32;

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Identical `(seed, stream)` pairs produce identical draw sequences;
/// distinct stream ids give independent sequences from the same seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A new independent stream keyed by this stream's identity and `salt`.
    /// Does not consume draws from `self`.
    pub fn derive(&self, salt: u64) -> RngStream {
        let mixed = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x9E37_79B9)))
            ^ splitmix64(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
        RngStream::new(mixed, salt)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_probability(a: f64, context: &str) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(MatinarError::Probability {
            value: a,
            context: context.to_string(),
        })
    }
}

/// `a ∘ y`: the number of successes among `y` independent Bernoulli(`a`)
/// trials.
pub fn binomial_thin<R: Rng + ?Sized>(a: f64, y: u64, rng: &mut R) -> Result<u64> {
    check_probability(a, "binomial thinning")?;
    Ok(binomial(y, a, rng))
}

/// Binomial(`y`, `a`) draw; `a` must already be in `[0, 1]`.
pub(crate) fn binomial<R: Rng + ?Sized>(y: u64, a: f64, rng: &mut R) -> u64 {
    if y == 0 || a <= 0.0 {
        return 0;
    }
    if a >= 1.0 {
        return y;
    }
    if y < BERNOULLI_LIMIT {
        return (0..y).filter(|_| rng.random::<f64>() < a).count() as u64;
    }
    if a > 0.5 {
        return y - binomial_inverse_cdf(y, 1.0 - a, rng);
    }
    binomial_inverse_cdf(y, a, rng)
}

/// Inverse-CDF sampling for `a <= 0.5`. Large counts are split into chunks
/// small enough that `(1-a)^chunk` stays representable; a sum of
/// independent Binomial(chunk, a) draws is again binomial.
fn binomial_inverse_cdf<R: Rng + ?Sized>(y: u64, a: f64, rng: &mut R) -> u64 {
    let q = 1.0 - a;
    let chunk = ((690.0 / -q.ln()).floor() as u64).max(1);
    let ratio = a / q;
    let mut remaining = y;
    let mut total = 0;
    while remaining > 0 {
        let c = remaining.min(chunk);
        remaining -= c;
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut pmf = q.powi(c as i32);
        let mut cdf = pmf;
        while u > cdf && k < c {
            pmf *= (c - k) as f64 / (k + 1) as f64 * ratio;
            k += 1;
            cdf += pmf;
        }
        total += k;
    }
    total
}

fn check_unit_entries(m: &RealMatrix, name: &str) -> Result<()> {
    for &v in m.iter() {
        check_probability(v, name)?;
    }
    Ok(())
}

/// `A ∘_L Y`: entry `(i, j)` is `Σ_k a_ik ∘ y_kj`.
pub fn left_thin<R: Rng + ?Sized>(
    a: &RealMatrix,
    y: &CountMatrix,
    rng: &mut R,
) -> Result<CountMatrix> {
    if !a.is_square() || a.ncols() != y.nrows() {
        return Err(MatinarError::Dimension(format!(
            "left thinning needs a square {0}x{0} matrix, got {1}x{2}",
            y.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    check_unit_entries(a, "left thinning matrix")?;
    Ok(left_thin_unchecked(a, y, rng))
}

/// `Y ∘_R B`: entry `(i, j)` is `Σ_k b_kj ∘ y_ik`, so `E[Y ∘_R B] = Y B`.
pub fn right_thin<R: Rng + ?Sized>(
    y: &CountMatrix,
    b: &RealMatrix,
    rng: &mut R,
) -> Result<CountMatrix> {
    if !b.is_square() || b.nrows() != y.ncols() {
        return Err(MatinarError::Dimension(format!(
            "right thinning needs a square {0}x{0} matrix, got {1}x{2}",
            y.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    check_unit_entries(b, "right thinning matrix")?;
    Ok(right_thin_unchecked(y, b, rng))
}

/// `A ∘_L Y ∘_R Bᵀ`, the autoregressive term of the process.
pub fn sandwich_thin<R: Rng + ?Sized>(
    a: &RealMatrix,
    y: &CountMatrix,
    b: &RealMatrix,
    rng: &mut R,
) -> Result<CountMatrix> {
    let left = left_thin(a, y, rng)?;
    right_thin(&left, &b.transpose(), rng)
}

pub(crate) fn left_thin_unchecked<R: Rng + ?Sized>(
    a: &RealMatrix,
    y: &CountMatrix,
    rng: &mut R,
) -> CountMatrix {
    let (m, n) = y.shape();
    CountMatrix::from_fn(m, n, |i, j| {
        (0..m).map(|k| binomial(y[(k, j)], a[(i, k)], rng)).sum()
    })
}

pub(crate) fn right_thin_unchecked<R: Rng + ?Sized>(
    y: &CountMatrix,
    b: &RealMatrix,
    rng: &mut R,
) -> CountMatrix {
    let (m, n) = y.shape();
    CountMatrix::from_fn(m, n, |i, j| {
        (0..n).map(|k| binomial(y[(i, k)], b[(k, j)], rng)).sum()
    })
}

/// Adds `A ∘_L Y ∘_R Bᵀ` into `acc` without re-validating probabilities.
pub(crate) fn add_sandwich_unchecked<R: Rng + ?Sized>(
    acc: &mut CountMatrix,
    a: &RealMatrix,
    y: &CountMatrix,
    b: &RealMatrix,
    rng: &mut R,
) {
    let left = left_thin_unchecked(a, y, rng);
    let (m, n) = left.shape();
    for j in 0..n {
        for i in 0..m {
            // (Z ∘_R Bᵀ)_ij = Σ_k (Bᵀ)_kj ∘ z_ik = Σ_k b_jk ∘ z_ik
            acc[(i, j)] += (0..n)
                .map(|k| binomial(left[(i, k)], b[(j, k)], rng))
                .sum::<u64>();
        }
    }
}
