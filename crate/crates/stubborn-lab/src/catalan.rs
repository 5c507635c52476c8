//! Catalan combinatorics: exact Catalan numbers, their generating series,
//! and the two (p,q)-Catalan laws that govern the attacker's block count at
//! catch-up times.
//!
//! Everything here is deterministic given its inputs; sampling takes an
//! explicit random stream owned by the caller.

use num_bigint::BigUint;
use rand::Rng;
use thiserror::Error;

/// Exhaustive path enumeration is exponential; refuse anything larger.
pub const MAX_ORACLE_N: u32 = 14;

/// Inverse-CDF sampling walks at most this many support points before the
/// walk is declared broken. The tail is geometric with ratio 4pq < 1, so
/// reaching the cap has no representable probability.
const MAX_SAMPLE_WALK: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum CatalanError {
    #[error("generating series is only defined on [0, 1/4], got x = {0}")]
    SeriesDomain(f64),
    #[error("honest share p must satisfy 1/2 < p < 1, got p = {0}")]
    HonestShare(f64),
    #[error("path enumeration is exponential; n must be at most {MAX_ORACLE_N}, got {0}")]
    OracleSize(u32),
}

/// n-th Catalan number, exact.
///
/// Computed by the integer recurrence `C_{n+1} = C_n * 2(2n+1) / (n+2)`
/// rather than factorials, so intermediates never exceed the result.
pub fn catalan_number(n: u32) -> BigUint {
    let mut c = BigUint::from(1u32);
    for k in 0..u64::from(n) {
        c = c * (2 * (2 * k + 1)) / (k + 2);
    }
    c
}

/// Generating series C(x) = sum C_n x^n = 2 / (1 + sqrt(1 - 4x)).
///
/// The 2/(1+sqrt(..)) branch is finite at x = 0 and avoids the subtractive
/// cancellation of the (1-sqrt(..))/2x form.
pub fn catalan_series(x: f64) -> Result<f64, CatalanError> {
    if !(0.0..=0.25).contains(&x) {
        return Err(CatalanError::SeriesDomain(x));
    }
    Ok(2.0 / (1.0 + (1.0 - 4.0 * x).sqrt()))
}

/// Which of the two (p,q)-Catalan laws.
///
/// First type: P[X = n] = C_n p (pq)^n for n >= 0.
/// Second type: P[X = 0] = p and P[X = n] = C_{n-1} (pq)^n for n >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalanKind {
    FirstType,
    SecondType,
}

/// A (p,q)-Catalan distribution with q = 1 - p derived, never stored.
///
/// Integrability requires q < p, i.e. 1/2 < p < 1; this is enforced at
/// construction so downstream means can never diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalanDistribution {
    p: f64,
    kind: CatalanKind,
}

impl CatalanDistribution {
    pub fn new(kind: CatalanKind, p: f64) -> Result<Self, CatalanError> {
        if !(p > 0.5 && p < 1.0) {
            return Err(CatalanError::HonestShare(p));
        }
        Ok(Self { p, kind })
    }

    pub fn kind(&self) -> CatalanKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Attacker share, always 1 - p.
    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// Probability mass at n.
    ///
    /// Evaluated by the multiplicative recurrence on successive masses so no
    /// giant Catalan number or tiny power is ever formed on its own.
    pub fn pmf(&self, n: u64) -> f64 {
        let p = self.p;
        let pq = p * (1.0 - p);
        match self.kind {
            CatalanKind::FirstType => {
                // pmf(0) = p, pmf(n+1)/pmf(n) = 2(2n+1)/(n+2) * pq
                let mut mass = p;
                for k in 0..n {
                    mass *= ratio_first(k) * pq;
                }
                mass
            }
            CatalanKind::SecondType => {
                if n == 0 {
                    return p;
                }
                // pmf(1) = pq, pmf(n+1)/pmf(n) = 2(2n-1)/(n+1) * pq for n >= 1
                let mut mass = pq;
                for k in 1..n {
                    mass *= ratio_second(k) * pq;
                }
                mass
            }
        }
    }

    /// Expected value: q/(p-q) for the first type, pq/(p-q) for the second.
    pub fn mean(&self) -> f64 {
        let p = self.p;
        let q = 1.0 - p;
        match self.kind {
            CatalanKind::FirstType => q / (p - q),
            CatalanKind::SecondType => p * q / (p - q),
        }
    }

    /// Inverse-CDF draw from the law using one uniform from `rng`.
    ///
    /// # Panics
    /// Panics if the cumulative walk fails to terminate within
    /// `MAX_SAMPLE_WALK` support points, which indicates a broken uniform
    /// source rather than a reachable state of this distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let p = self.p;
        let pq = p * (1.0 - p);
        let mut n = 0u64;
        let mut mass = p; // both kinds start at P[X=0] = p
        let mut cum = mass;
        while u >= cum {
            // advance mass from n to n+1
            mass = match self.kind {
                CatalanKind::FirstType => mass * ratio_first(n) * pq,
                CatalanKind::SecondType => {
                    if n == 0 {
                        pq
                    } else {
                        mass * ratio_second(n) * pq
                    }
                }
            };
            n += 1;
            cum += mass;
            if n >= MAX_SAMPLE_WALK {
                panic!("catalan sample walk exceeded {MAX_SAMPLE_WALK} points; uniform source is broken");
            }
        }
        n
    }
}

/// C_{n+1}/C_n.
fn ratio_first(n: u64) -> f64 {
    2.0 * (2 * n + 1) as f64 / (n + 2) as f64
}

/// C_n/C_{n-1} for n >= 1.
fn ratio_second(n: u64) -> f64 {
    2.0 * (2 * n - 1) as f64 / (n + 1) as f64
}

/// Brute-force ground truth for `catalan_number`.
///
/// Exhaustively enumerates monotone lattice paths from (0,0) to (n+1,n+1)
/// whose interior points all stay strictly below the diagonal (x > y).
/// The count equals C_n; no Catalan identity is used in the enumeration.
pub fn count_strict_paths_oracle(n: u32) -> Result<u64, CatalanError> {
    if n > MAX_ORACLE_N {
        return Err(CatalanError::OracleSize(n));
    }
    let side = n + 1;
    Ok(count_paths_from(1, 0, side)) // first step must go right, or (0,1) touches y > x
}

fn count_paths_from(x: u32, y: u32, side: u32) -> u64 {
    if x == side && y == side {
        return 1;
    }
    // interior points must keep x > y
    if x <= y && !(x == side && y == side) {
        return 0;
    }
    let mut total = 0;
    if x < side {
        total += count_paths_from(x + 1, y, side);
    }
    if y < side {
        total += count_paths_from(x, y + 1, side);
    }
    total
}
