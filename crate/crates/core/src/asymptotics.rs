//! Large-N behaviour of the level-trigger exit time.
//!
//! For `N` independent Brownian motions the first exit time from `[-1, 1]`
//! concentrates around `1 / (2 ln N)`, and after centering by `a_N` and
//! scaling by `2 (ln N)²` it is compared against a Gumbel law `G` with
//! `P(G >= r) = exp(-e^r)`.
//!
//! Formula evaluators take a real-valued `n` so that exact-log test points
//! such as `n = e²` can be used.
//!
//! The centering uses the tail constant `KAPPA = sqrt(2/π)` exactly as the
//! limit theorem states it. The small-time tail of the two-sided exit time is
//! actually `2 sqrt(2/π) · sqrt(w) · exp(-1/(2w))`, so with `KAPPA` the
//! normalised exit time tends to `G - ln 2` instead of `G`.
//! [`TWO_SIDED_KAPPA`] together with the `_with_kappa` variants gives the
//! centering for which the limit is `G` itself.

use std::f64::consts::PI;

use thiserror::Error;

/// Tail constant used in the published centering, `sqrt(2/π)`.
pub const KAPPA: f64 = 0.797_884_560_802_865_4;

/// Tail constant of the two-sided exit time, `2 sqrt(2/π)`.
pub const TWO_SIDED_KAPPA: f64 = 2.0 * KAPPA;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Error, PartialEq)]
pub enum AsymptoticError {
    #[error("asymptotic formulas need n >= 2, got {0}")]
    TooFewAgents(f64),
    #[error("no samples")]
    Empty,
}

fn check_n(n: f64) -> Result<f64, AsymptoticError> {
    if n >= 2.0 && n.is_finite() {
        Ok(n.ln())
    } else {
        Err(AsymptoticError::TooFewAgents(n))
    }
}

/// Centering constant `a_N = 1/(2 ln N) - ln(κ / sqrt(2 ln N)) / (2 (ln N)²)`
/// with `κ = KAPPA`.
pub fn centering_a_n(n: f64) -> Result<f64, AsymptoticError> {
    centering_a_n_with_kappa(n, KAPPA)
}

pub fn centering_a_n_with_kappa(n: f64, kappa: f64) -> Result<f64, AsymptoticError> {
    let ln_n = check_n(n)?;
    Ok(1.0 / (2.0 * ln_n) - (kappa / (2.0 * ln_n).sqrt()).ln() / (2.0 * ln_n * ln_n))
}

pub fn gumbel_survival(r: f64) -> f64 {
    (-r.exp()).exp()
}

pub fn gumbel_cdf(r: f64) -> f64 {
    -(-r.exp()).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

/// Moments of `G`. Since `P(G >= r) = exp(-e^r)`, `G` is the negative of a
/// standard Gumbel variable: mean `-γ_Euler`, variance `π²/6`.
pub fn gumbel_moments() -> GumbelMoments {
    let mean = -EULER_GAMMA;
    let variance = PI * PI / 6.0;
    GumbelMoments {
        mean,
        second_moment: variance + mean * mean,
        variance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitOrder {
    /// `1 / (2 ln N)`.
    Leading,
    /// `a_N + E[G] / (2 (ln N)²)`.
    Refined,
}

pub fn expected_exit_asymptote(n: f64, order: ExitOrder) -> Result<f64, AsymptoticError> {
    let ln_n = check_n(n)?;
    Ok(match order {
        ExitOrder::Leading => 1.0 / (2.0 * ln_n),
        ExitOrder::Refined => centering_a_n(n)? + gumbel_moments().mean / (2.0 * ln_n * ln_n),
    })
}

/// `(π²/24) / (ln N)⁴`.
pub fn variance_asymptote(n: f64) -> Result<f64, AsymptoticError> {
    let ln_n = check_n(n)?;
    Ok(PI * PI / 24.0 / ln_n.powi(4))
}

/// `|E| / (4 ln N)`.
pub fn cost_asymptote(n: f64, edge_count: f64) -> Result<f64, AsymptoticError> {
    let ln_n = check_n(n)?;
    Ok(edge_count / (4.0 * ln_n))
}

/// Maps exit times to `X = 2 (ln N)² (T - a_N)`.
pub fn normalize_exit_samples(samples: &[f64], n: f64) -> Result<Vec<f64>, AsymptoticError> {
    normalize_exit_samples_with_kappa(samples, n, KAPPA)
}

pub fn normalize_exit_samples_with_kappa(
    samples: &[f64],
    n: f64,
    kappa: f64,
) -> Result<Vec<f64>, AsymptoticError> {
    let ln_n = check_n(n)?;
    let a_n = centering_a_n_with_kappa(n, kappa)?;
    let scale = 2.0 * ln_n * ln_n;
    Ok(samples.iter().map(|t| scale * (t - a_n)).collect())
}

/// Smallest value the normalised exit time can take (at `T = 0`).
pub fn normalized_lower_bound(n: f64) -> Result<f64, AsymptoticError> {
    let ln_n = check_n(n)?;
    Ok(-ln_n + (KAPPA / (2.0 * ln_n).sqrt()).ln())
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`, evaluated on
/// both sides of every order statistic.
pub fn ks_distance<F>(samples: &[f64], cdf: F) -> Result<f64, AsymptoticError>
where
    F: Fn(f64) -> f64,
{
    if samples.is_empty() {
        return Err(AsymptoticError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, AsymptoticError> {
    if a.is_empty() || b.is_empty() {
        return Err(AsymptoticError::Empty);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS rejection threshold at significance `alpha`:
/// `c(α) sqrt((n + m) / (n m))` with `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticReport {
    pub n_agents: f64,
    pub a_n: f64,
    pub e_t_leading: f64,
    pub e_t_refined: f64,
    pub var_t_asymptote: f64,
    pub cost_asymptote: f64,
    pub ks_stat: Option<f64>,
}

impl AsymptoticReport {
    pub fn new(n: f64, edge_count: f64) -> Result<Self, AsymptoticError> {
        Ok(Self {
            n_agents: n,
            a_n: centering_a_n(n)?,
            e_t_leading: expected_exit_asymptote(n, ExitOrder::Leading)?,
            e_t_refined: expected_exit_asymptote(n, ExitOrder::Refined)?,
            var_t_asymptote: variance_asymptote(n)?,
            cost_asymptote: cost_asymptote(n, edge_count)?,
            ks_stat: None,
        })
    }

    /// Attaches the KS distance of `exit_samples`, normalised, to the Gumbel law.
    pub fn with_samples(mut self, exit_samples: &[f64]) -> Result<Self, AsymptoticError> {
        let x = normalize_exit_samples(exit_samples, self.n_agents)?;
        self.ks_stat = Some(ks_distance(&x, gumbel_cdf)?);
        Ok(self)
    }

    pub const CSV_HEADER: &'static str =
        "n_agents,a_n,e_t_leading,e_t_refined,var_t_asymptote,cost_asymptote,ks_stat";

    pub fn csv_line(&self) -> String {
        let ks = self.ks_stat.map(|k| format!("{k:.16e}")).unwrap_or_default();
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.n_agents,
            self.a_n,
            self.e_t_leading,
            self.e_t_refined,
            self.var_t_asymptote,
            self.cost_asymptote,
            ks
        )
    }
}
