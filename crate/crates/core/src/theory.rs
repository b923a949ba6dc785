//! Boltzmann policies over finite reward landscapes.
//!
//! A landscape is a multiset of rewards. The Boltzmann policy puts weight
//! `exp(r / alpha)` on each trajectory; truncating it to rewards strictly
//! above `k` gives the distribution that rejection sampling with threshold
//! `k` draws from. Everything is computed in log space.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the two KL computations to agree.
pub const KL_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("no reward exceeds the threshold {0}")]
    EmptyTruncation(f64),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("invalid landscape: {0}")]
    InvalidLandscape(String),
    #[error("KL by definition ({by_definition}) and by partition ratio ({by_identity}) disagree")]
    IdentityViolated { by_definition: f64, by_identity: f64 },
}

/// `(reward, multiplicity)` atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardLandscape {
    pub atoms: Vec<(f64, u64)>,
}

impl RewardLandscape {
    pub fn new(atoms: Vec<(f64, u64)>) -> Result<Self, TheoryError> {
        let l = RewardLandscape { atoms };
        l.validate()?;
        Ok(l)
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, TheoryError> {
        let l: RewardLandscape =
            serde_json::from_reader(reader).map_err(|e| TheoryError::InvalidLandscape(e.to_string()))?;
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.atoms.is_empty() {
            return Err(TheoryError::InvalidLandscape("no atoms".into()));
        }
        if let Some((r, m)) = self.atoms.iter().find(|(r, m)| !r.is_finite() || *m == 0) {
            return Err(TheoryError::InvalidLandscape(format!("bad atom ({r}, {m})")));
        }
        Ok(())
    }

    /// The highest reward.
    pub fn sup(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distinct rewards, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }
}

fn check_alpha(alpha: f64) -> Result<(), TheoryError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(TheoryError::NonPositiveAlpha(alpha))
    }
}

/// `log sum m * exp(r / alpha)` over atoms with `r > k`.
fn log_mass(l: &RewardLandscape, alpha: f64, k: f64) -> Option<f64> {
    let kept = || l.atoms.iter().filter(move |a| a.0 > k);
    let top = kept().map(|a| a.0 / alpha).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return None;
    }
    let sum: f64 = kept().map(|&(r, m)| m as f64 * (r / alpha - top).exp()).sum();
    Some(top + sum.ln())
}

/// `log Z(alpha)`.
pub fn partition(l: &RewardLandscape, alpha: f64) -> Result<f64, TheoryError> {
    check_alpha(alpha)?;
    Ok(log_mass(l, alpha, f64::NEG_INFINITY).expect("landscapes are non-empty"))
}

/// `log Z^{>k}(alpha)`, the partition restricted to rewards strictly above `k`.
pub fn truncated_partition(l: &RewardLandscape, alpha: f64, k: f64) -> Result<f64, TheoryError> {
    check_alpha(alpha)?;
    log_mass(l, alpha, k).ok_or(TheoryError::EmptyTruncation(k))
}

/// Per-atom probabilities `(reward, p)` of the truncated policy, where `p`
/// covers all `multiplicity` trajectories of the atom.
pub fn weights(l: &RewardLandscape, alpha: f64, k: f64) -> Result<Vec<(f64, f64)>, TheoryError> {
    let lz = truncated_partition(l, alpha, k)?;
    Ok(l.atoms
        .iter()
        .filter(|a| a.0 > k)
        .map(|&(r, m)| (r, m as f64 * (r / alpha - lz).exp()))
        .collect())
}

/// `sum_tau pi^{>k}(tau) log(pi^{>k}(tau) / pi*(tau))`, summed term by term.
pub fn kl_by_definition(l: &RewardLandscape, alpha: f64, k: f64) -> Result<f64, TheoryError> {
    let lz = partition(l, alpha)?;
    let lzk = truncated_partition(l, alpha, k)?;
    Ok(l.atoms
        .iter()
        .filter(|a| a.0 > k)
        .map(|&(r, m)| {
            let log_trunc = r / alpha - lzk;
            let log_full = r / alpha - lz;
            m as f64 * log_trunc.exp() * (log_trunc - log_full)
        })
        .sum())
}

/// `log Z - log Z^{>k}`.
pub fn kl_identity(l: &RewardLandscape, alpha: f64, k: f64) -> Result<f64, TheoryError> {
    Ok(partition(l, alpha)? - truncated_partition(l, alpha, k)?)
}

/// KL divergence of the truncated policy from the full one. Both routes are
/// evaluated; the partition-ratio value is returned once they agree.
pub fn kl_truncated(l: &RewardLandscape, alpha: f64, k: f64) -> Result<f64, TheoryError> {
    let by_definition = kl_by_definition(l, alpha, k)?;
    let by_identity = kl_identity(l, alpha, k)?;
    if (by_definition - by_identity).abs() >= KL_AGREEMENT {
        return Err(TheoryError::IdentityViolated {
            by_definition,
            by_identity,
        });
    }
    Ok(by_identity)
}

/// The largest threshold whose truncation stays within `delta` of the full
/// policy. Thresholds in `[r_{i-1}, r_i)` all keep the same atoms, so the
/// scan visits one representative per level: the float just below `r_i`.
/// Keeping every atom has KL 0, so a threshold always exists.
pub fn min_threshold_for_delta(l: &RewardLandscape, alpha: f64, delta: f64) -> Result<f64, TheoryError> {
    check_alpha(alpha)?;
    if delta.is_nan() || delta <= 0.0 {
        return Err(TheoryError::NonPositiveDelta(delta));
    }
    for r in l.levels().into_iter().rev() {
        let k = r.next_down();
        if kl_truncated(l, alpha, k)? < delta {
            return Ok(k);
        }
    }
    unreachable!("the lowest level keeps every atom and has KL 0")
}

/// Reward variance under the truncated policy.
pub fn variance_truncated(l: &RewardLandscape, alpha: f64, k: f64) -> Result<f64, TheoryError> {
    let w = weights(l, alpha, k)?;
    let mean: f64 = w.iter().map(|(r, p)| r * p).sum();
    Ok(w.iter().map(|(r, p)| p * (r - mean).powi(2)).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub alpha: f64,
    pub k: f64,
    pub log_z: f64,
    pub log_z_trunc: f64,
    pub kl: f64,
    pub variance: f64,
}

pub fn report(l: &RewardLandscape, alphas: &[f64], k: f64) -> Result<Vec<ReportRow>, TheoryError> {
    alphas
        .iter()
        .map(|&alpha| {
            Ok(ReportRow {
                alpha,
                k,
                log_z: partition(l, alpha)?,
                log_z_trunc: truncated_partition(l, alpha, k)?,
                kl: kl_truncated(l, alpha, k)?,
                variance: variance_truncated(l, alpha, k)?,
            })
        })
        .collect()
}

pub fn render_table(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:>8} {:>8} {:>14} {:>14} {:>14} {:>14}\n",
        "alpha", "k", "log Z", "log Z>k", "KL", "Var"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>8} {:>8} {:>14.6} {:>14.6} {:>14.6e} {:>14.6e}",
            r.alpha, r.k, r.log_z, r.log_z_trunc, r.kl, r.variance
        );
    }
    out
}
