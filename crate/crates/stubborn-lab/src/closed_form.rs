//! Closed-form cycle expectations, revenue ratios, difficulty-adjustment
//! factors and apparent hashrates for honest, lead-stubborn and
//! equal-fork-stubborn mining.
//!
//! Each formula is evaluated in the algebraic shape of its source theorem,
//! not a rearrangement, so a disagreement with the Monte Carlo engine points
//! at the simulator rather than at algebra. Selfish mining has no closed
//! form here; it is covered by simulation only.

use crate::catalan::catalan_series;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("attacker hashrate share q must lie in (0, 0.5), got {0}")]
    AttackerShare(f64),
    #[error("honest-baseline hashrate share q must lie in [0, 0.5), got {0}")]
    BaselineShare(f64),
    #[error("gamma must lie in [0, 1], got {0}")]
    Gamma(f64),
    #[error("block reward must be positive and finite, got {0}")]
    BlockReward(f64),
    #[error("average inter-block time must be positive and finite, got {0}")]
    InterBlockTime(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ClosedFormError {
    #[error("gamma = 0 is a removable singularity here; request GammaZeroMode::Limit to evaluate the limit")]
    GammaZeroSingularity,
    #[error("gamma must lie in [0, 1], got {0}")]
    Gamma(f64),
    #[error("stopping time is integrable only for alpha > alpha_prime >= 0, got alpha = {alpha}, alpha_prime = {alpha_prime}")]
    NonIntegrableRace { alpha: f64, alpha_prime: f64 },
}

/// The attacker's environment: hashrate share q, connectivity gamma, block
/// reward b and network inter-block time tau0. The honest share p = 1 - q is
/// always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningParams {
    q: f64,
    gamma: f64,
    block_reward: f64,
    tau0: f64,
}

impl MiningParams {
    /// Parameters for attack-strategy analysis. Requires 0 < q < 1/2 so
    /// every cycle expectation stays finite, and fails here rather than at
    /// first use.
    pub fn new(q: f64, gamma: f64, block_reward: f64, tau0: f64) -> Result<Self, ParamsError> {
        if !(q > 0.0 && q < 0.5) {
            return Err(ParamsError::AttackerShare(q));
        }
        Self::with_any_share(q, gamma, block_reward, tau0)
    }

    /// Honest-only evaluation also makes sense at q = 0, which the strict
    /// constructor rejects; gamma is irrelevant for an honest miner.
    pub fn honest_baseline(q: f64, block_reward: f64, tau0: f64) -> Result<Self, ParamsError> {
        if !(0.0..0.5).contains(&q) {
            return Err(ParamsError::BaselineShare(q));
        }
        Self::with_any_share(q, 0.0, block_reward, tau0)
    }

    fn with_any_share(q: f64, gamma: f64, block_reward: f64, tau0: f64) -> Result<Self, ParamsError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(ParamsError::Gamma(gamma));
        }
        if !(block_reward > 0.0 && block_reward.is_finite()) {
            return Err(ParamsError::BlockReward(block_reward));
        }
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(ParamsError::InterBlockTime(tau0));
        }
        Ok(Self { q, gamma, block_reward, tau0 })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Honest share p = 1 - q.
    pub fn p(&self) -> f64 {
        1.0 - self.q
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn block_reward(&self) -> f64 {
        self.block_reward
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }
}

/// Per-strategy figures of merit over an attack cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyMetrics {
    /// Revenue ratio: expected revenue per unit expected time.
    pub revenue_ratio: f64,
    /// Difficulty-adjustment factor relating pre- and post-adjustment ratios.
    pub delta: f64,
    /// Long-run share of official blocks after a difficulty adjustment.
    pub apparent_hashrate: f64,
    /// Expected attack-cycle duration.
    pub expected_cycle_duration: f64,
    /// Expected attack-cycle revenue.
    pub expected_cycle_revenue: f64,
}

/// What to do when a formula with a removable 1/gamma singularity is asked
/// for at gamma = 0: refuse (`Strict`) or return the analytic gamma -> 0
/// limit (`Limit`). Strict is the default everywhere so a silent
/// extrapolation can never happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaZeroMode {
    Strict,
    Limit,
}

/// Honest baseline: one block per cycle, won with probability q.
pub fn revenue_ratio_hm(params: &MiningParams) -> StrategyMetrics {
    let q = params.q();
    let b = params.block_reward();
    let tau0 = params.tau0();
    StrategyMetrics {
        revenue_ratio: q * b / tau0,
        delta: 1.0,
        apparent_hashrate: q,
        expected_cycle_duration: tau0,
        expected_cycle_revenue: q * b,
    }
}

/// Expected duration of the lead-stubborn catch-up race tau alone,
/// p/(p-q) * tau0, without the final round.
pub fn expected_catchup_duration_lsm(params: &MiningParams) -> f64 {
    let (p, q) = (params.p(), params.q());
    p / (p - q) * params.tau0()
}

/// E[tau_LSM] = (p + pq - q^2)/(p - q) * tau0.
pub fn expected_cycle_duration_lsm(params: &MiningParams) -> f64 {
    let (p, q) = (params.p(), params.q());
    (p + p * q - q * q) / (p - q) * params.tau0()
}

/// E[tau_EFSM] = tau0 / (p - q).
pub fn expected_cycle_duration_efsm(params: &MiningParams) -> f64 {
    let (p, q) = (params.p(), params.q());
    params.tau0() / (p - q)
}

/// f(gamma) = (pq(1-gamma)/gamma) * (1 - p(1-gamma) C((1-gamma) pq)):
/// the expected reward lost by a lead-stubborn miner to fork blocks the
/// honest network never adopted. The gamma -> 0 limit is p^2 q/(p-q).
fn lsm_orphan_loss(p: f64, q: f64, gamma: f64, mode: GammaZeroMode) -> Result<f64, ClosedFormError> {
    if gamma == 0.0 {
        return match mode {
            GammaZeroMode::Strict => Err(ClosedFormError::GammaZeroSingularity),
            GammaZeroMode::Limit => Ok(p * p * q / (p - q)),
        };
    }
    let series = catalan_series((1.0 - gamma) * p * q).expect("(1-gamma)pq <= 1/4");
    Ok(p * q * (1.0 - gamma) / gamma * (1.0 - p * (1.0 - gamma) * series))
}

/// g(gamma) = ((1-gamma)/gamma) * (1 - p C((1-gamma) pq)): the analogous
/// loss for an equal-fork miner. The gamma -> 0 limit is q/(p-q).
fn efsm_orphan_loss(p: f64, q: f64, gamma: f64, mode: GammaZeroMode) -> Result<f64, ClosedFormError> {
    if gamma == 0.0 {
        return match mode {
            GammaZeroMode::Strict => Err(ClosedFormError::GammaZeroSingularity),
            GammaZeroMode::Limit => Ok(q / (p - q)),
        };
    }
    let series = catalan_series((1.0 - gamma) * p * q).expect("(1-gamma)pq <= 1/4");
    Ok((1.0 - gamma) / gamma * (1.0 - p * series))
}

/// E[R_LSM] = (p/(p-q) + q) q b - f(gamma) b.
pub fn expected_revenue_lsm(params: &MiningParams, mode: GammaZeroMode) -> Result<f64, ClosedFormError> {
    let (p, q, b) = (params.p(), params.q(), params.block_reward());
    let loss = lsm_orphan_loss(p, q, params.gamma(), mode)?;
    Ok((p / (p - q) + q) * q * b - loss * b)
}

/// E[R_EFSM] = q/(p-q) b - g(gamma) b.
pub fn expected_revenue_efsm(params: &MiningParams, mode: GammaZeroMode) -> Result<f64, ClosedFormError> {
    let (p, q, b) = (params.p(), params.q(), params.block_reward());
    let loss = efsm_orphan_loss(p, q, params.gamma(), mode)?;
    Ok(q / (p - q) * b - loss * b)
}

/// Full lead-stubborn metrics: revenue ratio, delta = (p+pq-q^2)/(p+pq-q),
/// and apparent hashrate after a difficulty adjustment.
pub fn revenue_ratio_lsm(params: &MiningParams, mode: GammaZeroMode) -> Result<StrategyMetrics, ClosedFormError> {
    let (p, q) = (params.p(), params.q());
    let (b, tau0) = (params.block_reward(), params.tau0());
    let loss = lsm_orphan_loss(p, q, params.gamma(), mode)?;
    let revenue_ratio = (q - loss * (p - q) / (p + q * (p - q))) * b / tau0;
    let delta = (p + p * q - q * q) / (p + p * q - q);
    let apparent_hashrate =
        q * (p + p * q - q * q) / (p + p * q - q) - loss * (p - q) / (p + p * q - q);
    Ok(StrategyMetrics {
        revenue_ratio,
        delta,
        apparent_hashrate,
        expected_cycle_duration: expected_cycle_duration_lsm(params),
        expected_cycle_revenue: expected_revenue_lsm(params, mode)?,
    })
}

/// Full equal-fork metrics: revenue ratio, delta = 1/p, and apparent
/// hashrate q/p - ((1-gamma)(p-q)/(gamma p)) (1 - p C((1-gamma) pq)).
pub fn revenue_ratio_efsm(params: &MiningParams, mode: GammaZeroMode) -> Result<StrategyMetrics, ClosedFormError> {
    let (p, q) = (params.p(), params.q());
    let (b, tau0) = (params.block_reward(), params.tau0());
    let loss = efsm_orphan_loss(p, q, params.gamma(), mode)?;
    let revenue_ratio = (q - (p - q) * loss) * b / tau0;
    let delta = 1.0 / p;
    let apparent_hashrate = q / p - (p - q) * loss / p;
    Ok(StrategyMetrics {
        revenue_ratio,
        delta,
        apparent_hashrate,
        expected_cycle_duration: expected_cycle_duration_efsm(params),
        expected_cycle_revenue: expected_revenue_efsm(params, mode)?,
    })
}

/// Expected value of Z = sup{ i <= n : coin i landed heads } (0 if none)
/// for n tosses of a heads-probability-gamma coin:
/// n + 1 - (1 - (1-gamma)^{n+1}) / gamma.
///
/// At gamma = 0 the supremum is 0 almost surely and the closed-form limit
/// is returned exactly.
pub fn biased_coin_expected_max_index(n: u32, gamma: f64) -> Result<f64, ClosedFormError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ClosedFormError::Gamma(gamma));
    }
    if gamma == 0.0 || n == 0 {
        // no heads, or no tosses at all: Z = 0 exactly, skip the formula's
        // floating-point cancellation
        return Ok(0.0);
    }
    // clamping the exponent is harmless: past i32::MAX the tail underflows anyway
    let exponent = n.saturating_add(1).min(i32::MAX as u32) as i32;
    let tail = (1.0 - gamma).powi(exponent);
    Ok(f64::from(n) + 1.0 - (1.0 - tail) / gamma)
}

/// Doob expectations for the race of two Poisson processes to a unit lead:
/// tau = inf{ t : N(t) = N'(t) + 1 } has E[tau] = 1/(alpha - alpha') and
/// E[N(tau)] = alpha/(alpha - alpha').
pub fn poisson_game_expectations(alpha: f64, alpha_prime: f64) -> Result<(f64, f64), ClosedFormError> {
    if !(alpha > alpha_prime && alpha_prime >= 0.0 && alpha.is_finite()) {
        return Err(ClosedFormError::NonIntegrableRace { alpha, alpha_prime });
    }
    Ok((1.0 / (alpha - alpha_prime), alpha / (alpha - alpha_prime)))
}
