//! SLO specifications and knee utility functions.
//!
//! A job's SLO carries a threshold (max latency in milliseconds, or minimum
//! juice) and a maximum utility that encodes its priority. The knee functions
//! plateau at max utility once the threshold is met; below it, throughput
//! utility falls linearly toward the origin while latency utility falls
//! hyperbolically as latency grows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Which performance metric the SLO constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SloKind {
    Latency,
    Throughput,
    Hybrid,
}

/// SLO threshold plus the utility function's maximum value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SloSpec<S: Scalar> {
    pub kind: SloKind,
    /// Maximum tolerable mean latency, milliseconds. Required for latency and
    /// hybrid SLOs.
    #[serde(rename = "latency_threshold_ms", default, skip_serializing_if = "Option::is_none")]
    pub latency_threshold: Option<S>,
    /// Minimum juice, in (0, 1]. Required for throughput and hybrid SLOs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub juice_threshold: Option<S>,
    /// Utility earned when the threshold is met. Encodes job priority.
    pub max_utility: S,
}

impl<S: Scalar> SloSpec<S> {
    /// Validates threshold presence and ranges; used by topology validation.
    pub fn check(&self) -> Result<(), String> {
        if self.max_utility <= S::zero() {
            return Err("max_utility must be positive".into());
        }
        let needs_latency = matches!(self.kind, SloKind::Latency | SloKind::Hybrid);
        let needs_juice = matches!(self.kind, SloKind::Throughput | SloKind::Hybrid);
        match self.latency_threshold {
            Some(t) if t <= S::zero() => return Err("latency_threshold_ms must be positive".into()),
            None if needs_latency => return Err("latency_threshold_ms is required".into()),
            _ => {}
        }
        match self.juice_threshold {
            Some(t) if t <= S::zero() || t > S::one() => {
                return Err("juice_threshold must be in (0, 1]".into())
            }
            None if needs_juice => return Err("juice_threshold is required".into()),
            _ => {}
        }
        Ok(())
    }
}

/// Absolute tolerance for the plateau comparison.
pub const SATISFIED_EPSILON: f64 = 1e-9;

/// A job's achieved utility this round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityValue<S: Scalar> {
    pub current: S,
    pub max: S,
    /// True when `current` sits on the plateau (within [`SATISFIED_EPSILON`]).
    pub satisfied: bool,
}

impl<S: Scalar> UtilityValue<S> {
    fn new(current: S, max: S) -> Self {
        Self {
            current,
            max,
            satisfied: current >= max - S::from_config(SATISFIED_EPSILON),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UtilityError {
    #[error("juice must be non-negative, got {0}")]
    NegativeJuice(f64),
    #[error("latency must be positive, got {0}")]
    NonPositiveLatency(f64),
    #[error("SLO is missing the {0} threshold")]
    MissingThreshold(&'static str),
    #[error("hybrid components have different max utilities ({0} vs {1})")]
    MismatchedMax(f64, f64),
}

/// Utility of a throughput-SLO job: `max * min(1, juice / threshold)`.
///
/// Linear below the knee, anchored at the origin.
pub fn throughput_utility<S: Scalar>(
    current_juice: S,
    slo: &SloSpec<S>,
) -> Result<UtilityValue<S>, UtilityError> {
    if current_juice < S::zero() {
        return Err(UtilityError::NegativeJuice(
            current_juice.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let threshold = slo
        .juice_threshold
        .ok_or(UtilityError::MissingThreshold("juice"))?;
    let ratio = (current_juice / threshold).min(S::one());
    Ok(UtilityValue::new(slo.max_utility * ratio, slo.max_utility))
}

/// Utility of a latency-SLO job: `max * min(1, threshold / latency)`.
///
/// Hyperbolic below the knee, so utility keeps shrinking as latency grows.
pub fn latency_utility<S: Scalar>(
    current_latency: S,
    slo: &SloSpec<S>,
) -> Result<UtilityValue<S>, UtilityError> {
    if current_latency <= S::zero() {
        return Err(UtilityError::NonPositiveLatency(
            current_latency.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let threshold = slo
        .latency_threshold
        .ok_or(UtilityError::MissingThreshold("latency"))?;
    let ratio = (threshold / current_latency).min(S::one());
    Ok(UtilityValue::new(slo.max_utility * ratio, slo.max_utility))
}

/// Utility of a hybrid-SLO job: the average of its two components, satisfied
/// only when both are. The components must share one max utility.
pub fn hybrid_utility<S: Scalar>(
    latency_u: &UtilityValue<S>,
    juice_u: &UtilityValue<S>,
) -> Result<UtilityValue<S>, UtilityError> {
    if (latency_u.max - juice_u.max).abs() > S::from_config(SATISFIED_EPSILON) {
        return Err(UtilityError::MismatchedMax(
            latency_u.max.to_f64().unwrap_or(f64::NAN),
            juice_u.max.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let two = S::from_config(2.0);
    Ok(UtilityValue {
        current: (latency_u.current + juice_u.current) / two,
        max: latency_u.max,
        satisfied: latency_u.satisfied && juice_u.satisfied,
    })
}

/// Sum of achieved utilities across jobs; the quantity the scheduler maximizes.
pub fn total_cluster_utility<'a, S, I>(per_topology: I) -> S
where
    S: Scalar + 'a,
    I: IntoIterator<Item = &'a UtilityValue<S>>,
{
    per_topology
        .into_iter()
        .fold(S::zero(), |acc, u| acc + u.current)
}

/// Single evaluation interface: maps measured latency and juice to utility
/// according to the SLO kind.
pub fn evaluate<S: Scalar>(
    slo: &SloSpec<S>,
    latency_ms: S,
    juice: S,
) -> Result<UtilityValue<S>, UtilityError> {
    match slo.kind {
        SloKind::Latency => latency_utility(latency_ms, slo),
        SloKind::Throughput => throughput_utility(juice, slo),
        SloKind::Hybrid => {
            let l = latency_utility(latency_ms, slo)?;
            let j = throughput_utility(juice, slo)?;
            hybrid_utility(&l, &j)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slo(kind: SloKind, latency: Option<f64>, juice: Option<f64>, max: f64) -> SloSpec<f64> {
        SloSpec {
            kind,
            latency_threshold: latency,
            juice_threshold: juice,
            max_utility: max,
        }
    }

    #[test]
    fn throughput_at_threshold_is_max() {
        let u = throughput_utility(1.0, &slo(SloKind::Throughput, None, Some(1.0), 5.0)).unwrap();
        assert_eq!(u.current, 5.0);
        assert!(u.satisfied);
    }

    #[test]
    fn throughput_below_threshold_is_linear() {
        let u = throughput_utility(0.5, &slo(SloKind::Throughput, None, Some(1.0), 35.0)).unwrap();
        assert_eq!(u.current, 17.5);
        assert!(!u.satisfied);
    }

    #[test]
    fn throughput_above_threshold_clamps() {
        let u = throughput_utility(1.2, &slo(SloKind::Throughput, None, Some(1.0), 10.0)).unwrap();
        assert_eq!(u.current, 10.0);
        assert!(u.satisfied);
    }

    #[test]
    fn negative_juice_is_an_error() {
        assert!(throughput_utility(-0.1, &slo(SloKind::Throughput, None, Some(1.0), 1.0)).is_err());
    }

    #[test]
    fn latency_at_threshold_is_max() {
        let u = latency_utility(60.0, &slo(SloKind::Latency, Some(60.0), None, 35.0)).unwrap();
        assert_eq!(u.current, 35.0);
        assert!(u.satisfied);
    }

    #[test]
    fn latency_above_threshold_is_hyperbolic() {
        let u = latency_utility(120.0, &slo(SloKind::Latency, Some(60.0), None, 35.0)).unwrap();
        assert_eq!(u.current, 17.5);
        assert!(!u.satisfied);
    }

    #[test]
    fn latency_below_threshold_plateaus() {
        let u = latency_utility(30.0, &slo(SloKind::Latency, Some(60.0), None, 20.0)).unwrap();
        assert_eq!(u.current, 20.0);
        assert!(u.satisfied);
    }

    #[test]
    fn non_positive_latency_is_an_error() {
        assert!(latency_utility(0.0, &slo(SloKind::Latency, Some(60.0), None, 1.0)).is_err());
    }

    #[test]
    fn hybrid_averages_components() {
        let l = latency_utility(60.0, &slo(SloKind::Hybrid, Some(60.0), Some(1.0), 35.0)).unwrap();
        let j = throughput_utility(0.5, &slo(SloKind::Hybrid, Some(60.0), Some(1.0), 35.0)).unwrap();
        let h = hybrid_utility(&l, &j).unwrap();
        assert_eq!(h.current, 26.25);
        assert!(!h.satisfied);

        let j_full =
            throughput_utility(1.0, &slo(SloKind::Hybrid, Some(60.0), Some(1.0), 35.0)).unwrap();
        let h_full = hybrid_utility(&l, &j_full).unwrap();
        assert_eq!(h_full.current, 35.0);
        assert!(h_full.satisfied);
    }

    #[test]
    fn hybrid_of_zeroes_is_zero() {
        let z = UtilityValue::new(0.0, 35.0);
        let h = hybrid_utility(&z, &z).unwrap();
        assert_eq!(h.current, 0.0);
    }

    #[test]
    fn hybrid_rejects_mismatched_max() {
        let a = UtilityValue::new(1.0, 35.0);
        let b = UtilityValue::new(1.0, 20.0);
        assert!(matches!(
            hybrid_utility(&a, &b),
            Err(UtilityError::MismatchedMax(_, _))
        ));
    }

    #[test]
    fn total_utility_sums_and_handles_empty() {
        let values: Vec<UtilityValue<f64>> = (1..=9)
            .map(|i| UtilityValue::new(10.0 * i as f64, 10.0 * i as f64))
            .collect();
        let total: f64 = total_cluster_utility(values.iter());
        assert_eq!(total, 450.0);

        let five: Vec<UtilityValue<f64>> = (0..5).map(|_| UtilityValue::new(35.0, 35.0)).collect();
        assert_eq!(total_cluster_utility(five.iter()), 175.0);

        let empty: Vec<UtilityValue<f64>> = vec![];
        assert_eq!(total_cluster_utility(empty.iter()), 0.0);
    }

    #[test]
    fn works_at_f32() {
        let u = latency_utility(120.0f32, &SloSpec {
            kind: SloKind::Latency,
            latency_threshold: Some(60.0f32),
            juice_threshold: None,
            max_utility: 35.0,
        })
        .unwrap();
        assert!((u.current - 17.5).abs() < 1e-5);
    }
}
