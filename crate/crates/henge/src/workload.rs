//! Time-varying input-rate profiles for topology spouts.
//!
//! Profiles are piecewise-constant and right-continuous: constant, a single
//! multiplicative spike over a half-open interval, or a trace of step
//! breakpoints (typically an hourly diurnal curve compressed onto the
//! simulation clock).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Default compression when loading hourly traces: one hour maps to 600 s.
pub const DEFAULT_SECONDS_PER_HOUR: f64 = 600.0;

/// Input-rate generator bound to one spout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateProfile<S: Scalar> {
    /// `base_rate` tuples per second, always.
    Constant { base_rate: S },
    /// `base_rate`, multiplied inside `[start_s, end_s)`.
    Spike {
        base_rate: S,
        start_s: u64,
        end_s: u64,
        multiplier: S,
    },
    /// `base_rate` times the multiplier of the latest breakpoint at or before
    /// `t`; 1.0 before the first breakpoint.
    Trace {
        base_rate: S,
        /// (offset seconds, multiplier), strictly increasing in offset.
        breakpoints: Vec<(u64, S)>,
    },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("failed to read trace {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("trace {path} has no data rows")]
    Empty { path: String },
    #[error("{path}:{line}: malformed row: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: offsets must be strictly increasing")]
    NonMonotonic { path: String, line: usize },
}

impl<S: Scalar> RateProfile<S> {
    pub fn constant(base_rate: S) -> Self {
        RateProfile::Constant { base_rate }
    }

    pub fn base_rate(&self) -> S {
        match self {
            RateProfile::Constant { base_rate }
            | RateProfile::Spike { base_rate, .. }
            | RateProfile::Trace { base_rate, .. } => *base_rate,
        }
    }
}

/// Tuples per second at simulation time `t`.
pub fn rate_at<S: Scalar>(profile: &RateProfile<S>, t: u64) -> S {
    match profile {
        RateProfile::Constant { base_rate } => *base_rate,
        RateProfile::Spike {
            base_rate,
            start_s,
            end_s,
            multiplier,
        } => {
            if t >= *start_s && t < *end_s {
                *base_rate * *multiplier
            } else {
                *base_rate
            }
        }
        RateProfile::Trace {
            base_rate,
            breakpoints,
        } => {
            let multiplier = breakpoints
                .iter()
                .take_while(|(offset, _)| *offset <= t)
                .last()
                .map(|(_, m)| *m)
                .unwrap_or_else(S::one);
            *base_rate * multiplier
        }
    }
}

/// Loads a trace file of `offset_hours,multiplier` rows (header required)
/// into a step profile, compressing each trace hour to `seconds_per_hour`
/// seconds of simulation time.
pub fn load_trace<S: Scalar>(
    path: impl AsRef<Path>,
    base_rate: S,
    seconds_per_hour: f64,
) -> Result<RateProfile<S>, TraceError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path_str.clone(),
        source,
    })?;
    parse_trace(&text, &path_str, base_rate, seconds_per_hour)
}

fn parse_trace<S: Scalar>(
    text: &str,
    path: &str,
    base_rate: S,
    seconds_per_hour: f64,
) -> Result<RateProfile<S>, TraceError> {
    let mut breakpoints: Vec<(u64, S)> = Vec::new();
    let mut lines = text.lines().enumerate();

    match lines.next() {
        Some((_, header)) if header.trim() == "offset_hours,multiplier" => {}
        Some((_, header)) => {
            return Err(TraceError::Malformed {
                path: path.into(),
                line: 1,
                reason: format!("expected header 'offset_hours,multiplier', got '{}'", header.trim()),
            })
        }
        None => {
            return Err(TraceError::Empty { path: path.into() });
        }
    }

    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let mut fields = row.split(',');
        let (hours, multiplier) = match (fields.next(), fields.next(), fields.next()) {
            (Some(h), Some(m), None) => (h.trim(), m.trim()),
            _ => {
                return Err(TraceError::Malformed {
                    path: path.into(),
                    line,
                    reason: "expected exactly two comma-separated fields".into(),
                })
            }
        };
        let hours: f64 = hours.parse().map_err(|_| TraceError::Malformed {
            path: path.into(),
            line,
            reason: format!("invalid offset_hours '{hours}'"),
        })?;
        let multiplier: f64 = multiplier.parse().map_err(|_| TraceError::Malformed {
            path: path.into(),
            line,
            reason: format!("invalid multiplier '{multiplier}'"),
        })?;
        if hours < 0.0 || !hours.is_finite() {
            return Err(TraceError::Malformed {
                path: path.into(),
                line,
                reason: "offset_hours must be non-negative".into(),
            });
        }
        if multiplier < 0.0 || !multiplier.is_finite() {
            return Err(TraceError::Malformed {
                path: path.into(),
                line,
                reason: "multiplier must be non-negative".into(),
            });
        }
        let offset_s = (hours * seconds_per_hour).round() as u64;
        if let Some((last, _)) = breakpoints.last() {
            if offset_s <= *last {
                return Err(TraceError::NonMonotonic {
                    path: path.into(),
                    line,
                });
            }
        }
        breakpoints.push((offset_s, S::from_config(multiplier)));
    }

    if breakpoints.is_empty() {
        return Err(TraceError::Empty { path: path.into() });
    }

    Ok(RateProfile::Trace {
        base_rate,
        breakpoints,
    })
}
