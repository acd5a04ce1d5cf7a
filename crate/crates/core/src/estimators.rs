//! Cost estimators built from trigger samples.
//!
//! The event-triggered numerator `Q_ET` has two estimators: the Bessel form
//! `|E| / (2N(N+2)) · E[R(T)⁴]`, which needs only the end state of each run,
//! and the direct form `|E| · E[∫ v₁²]`, which needs a running integral. The
//! cost ratio against periodic triggering at the same mean rate,
//! `g₁ / (N(N+2) g₂²)`, no longer depends on the graph at all.
//!
//! Confidence intervals are large-sample normal intervals. The ratio interval
//! combines the two marginal intervals and holds with probability at least
//! the product of their levels when the two sample sets are independent.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("period must be nonnegative, got {0}")]
    NegativePeriod(f64),
    #[error("need at least one agent")]
    NoAgents,
    #[error("lower confidence bound of the mean inter-event time must be positive, got {0}")]
    NonPositiveTimeBound(f64),
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
}

/// Probability `p` quantile of the standard normal distribution.
///
/// Acklam's rational approximation (relative error below 1.15e-9) on the
/// central region and both tails.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Critical value `z` such that `mean ± z·se` has two-sided level `gamma`.
pub fn two_sided_z(gamma: f64) -> f64 {
    normal_quantile(0.5 + 0.5 * gamma)
}

fn check_level(gamma: f64) -> Result<(), EstimateError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(EstimateError::InvalidLevel(gamma))
    }
}

/// Sample mean with a two-sided normal confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub n: usize,
    /// Unbiased sample variance.
    pub var: f64,
    pub lo: f64,
    pub hi: f64,
    pub gamma: f64,
    /// Sample skewness; zero for degenerate samples.
    pub skewness: f64,
}

impl EstimateWithCI {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn std_error(&self) -> f64 {
        (self.var / self.n as f64).sqrt()
    }

    /// True when the sample is too skewed for its size to trust a normal
    /// interval (`|skew| / sqrt(n) > 0.5`).
    pub fn skew_warning(&self) -> bool {
        self.skewness.abs() / (self.n as f64).sqrt() > 0.5
    }

    /// Multiplies the estimate by a positive constant. Mean, bounds and
    /// standard deviation scale linearly.
    pub fn scaled(&self, c: f64) -> Self {
        debug_assert!(c >= 0.0);
        Self {
            mean: self.mean * c,
            var: self.var * c * c,
            lo: self.lo * c,
            hi: self.hi * c,
            ..*self
        }
    }

    /// Same mean and variance, interval recomputed at another level.
    pub fn at_level(&self, gamma: f64) -> Result<Self, EstimateError> {
        check_level(gamma)?;
        let half = two_sided_z(gamma) * self.std_error();
        Ok(Self {
            lo: self.mean - half,
            hi: self.mean + half,
            gamma,
            ..*self
        })
    }
}

pub fn mean_ci(samples: &[f64], gamma: f64) -> Result<EstimateWithCI, EstimateError> {
    check_level(gamma)?;
    let n = samples.len();
    if n < 2 {
        return Err(EstimateError::TooFewSamples(n));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (m2, m3) = samples.iter().fold((0.0, 0.0), |(m2, m3), &s| {
        let d = s - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let var = m2 / (nf - 1.0);
    let skewness = if m2 > 0.0 {
        (m3 / nf) / (m2 / nf).powf(1.5)
    } else {
        0.0
    };
    let half = two_sided_z(gamma) * (var / nf).sqrt();
    Ok(EstimateWithCI {
        mean,
        n,
        var,
        lo: mean - half,
        hi: mean + half,
        gamma,
        skewness,
    })
}

/// Closed-form cost of periodic triggering with period `t_period`.
pub fn j_ttc(edge_count: usize, t_period: f64) -> Result<f64, EstimateError> {
    if t_period < 0.0 || t_period.is_nan() {
        return Err(EstimateError::NegativePeriod(t_period));
    }
    Ok(edge_count as f64 * t_period / 2.0)
}

/// Scale factor turning `E[R(T)⁴]` into the interval cost `Q(T)`.
pub fn bessel_scale(n_agents: usize, edge_count: usize) -> f64 {
    let n = n_agents as f64;
    edge_count as f64 / (2.0 * n * (n + 2.0))
}

pub fn q_et_bessel(
    r4_samples: &[f64],
    n_agents: usize,
    edge_count: usize,
    gamma: f64,
) -> Result<EstimateWithCI, EstimateError> {
    if n_agents == 0 {
        return Err(EstimateError::NoAgents);
    }
    Ok(mean_ci(r4_samples, gamma)?.scaled(bessel_scale(n_agents, edge_count)))
}

pub fn q_et_direct(
    q1_samples: &[f64],
    edge_count: usize,
    gamma: f64,
) -> Result<EstimateWithCI, EstimateError> {
    Ok(mean_ci(q1_samples, gamma)?.scaled(edge_count as f64))
}

/// Cost ratio `J_ET / J_TT(E[T_ET])` with its combined interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioWithCI {
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
    /// Guaranteed joint coverage, the product of the two marginal levels.
    pub joint_level: f64,
}

/// Ratio from the `R(T_ET)⁴` estimate `g₁` and the exit-time estimate `g₂`:
/// `g₁ / (N(N+2) g₂²)`, bounded by `g₁ᴸ / (N(N+2) (g₂ᴿ)²)` and
/// `g₁ᴿ / (N(N+2) (g₂ᴸ)²)`.
pub fn cost_ratio(
    r4_est: &EstimateWithCI,
    t_est: &EstimateWithCI,
    n_agents: usize,
) -> Result<RatioWithCI, EstimateError> {
    if n_agents == 0 {
        return Err(EstimateError::NoAgents);
    }
    if t_est.lo <= 0.0 || t_est.lo.is_nan() {
        return Err(EstimateError::NonPositiveTimeBound(t_est.lo));
    }
    let n = n_agents as f64;
    let moment = n * (n + 2.0);
    Ok(RatioWithCI {
        ratio: r4_est.mean / (moment * t_est.mean * t_est.mean),
        lo: r4_est.lo / (moment * t_est.hi * t_est.hi),
        hi: r4_est.hi / (moment * t_est.lo * t_est.lo),
        joint_level: r4_est.gamma * t_est.gamma,
    })
}

/// Event-triggered quantities that transform under a threshold change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdMoments {
    pub q_et: f64,
    pub e_t: f64,
    pub var_t: f64,
}

impl ThresholdMoments {
    /// Long-run event-triggered cost `Q / E[T]`.
    pub fn j_et(&self) -> f64 {
        self.q_et / self.e_t
    }

    /// `J_ET / J_TT(E[T])` for a graph with `edge_count` ordered pairs.
    pub fn ratio(&self, edge_count: usize) -> f64 {
        self.j_et() / (edge_count as f64 * self.e_t / 2.0)
    }
}

/// Maps moments measured at threshold 1 to threshold `delta` using Brownian
/// scaling: `Q` by `delta⁴`, `E[T]` by `delta²`, `Var[T]` by `delta⁴`.
pub fn rescale_delta(base: &ThresholdMoments, delta: f64) -> Result<ThresholdMoments, EstimateError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(EstimateError::InvalidThreshold(delta));
    }
    let d2 = delta * delta;
    let d4 = d2 * d2;
    Ok(ThresholdMoments {
        q_et: base.q_et * d4,
        e_t: base.e_t * d2,
        var_t: base.var_t * d4,
    })
}
