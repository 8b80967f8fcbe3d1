//! Nonnegative magnitudes carried as natural logarithms.
//!
//! Measures in this crate span from `1e-30` to `exp(1.4e13)`, so every
//! magnitude is stored as `ln(x)` with `-inf` standing for zero. Addition uses
//! the max-plus-`ln_1p` form and never exponentiates a large operand.

use std::cmp::Ordering;
use std::f64::consts::LN_10;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogWeightError {
    #[error("invalid magnitude {0}: must be finite and nonnegative")]
    InvalidMagnitude(f64),
    #[error("invalid logarithm {0}: must not be NaN or +inf")]
    InvalidLog(f64),
    #[error("ratio with zero denominator (numerator ln = {numerator})")]
    ZeroDenominator { numerator: f64 },
    #[error("no support: every weight is zero")]
    NoSupport,
}

/// A nonnegative magnitude stored as its natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogWeight(f64);

/// Binary operation selector for [`combine`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    Add,
    Mul,
    Ratio,
}

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn from_ln(ln_value: f64) -> Result<Self, LogWeightError> {
        if ln_value.is_nan() || ln_value == f64::INFINITY {
            return Err(LogWeightError::InvalidLog(ln_value));
        }
        Ok(LogWeight(ln_value))
    }

    pub fn from_log10(log10_value: f64) -> Result<Self, LogWeightError> {
        Self::from_ln(log10_value * LN_10)
    }

    pub fn from_value(value: f64) -> Result<Self, LogWeightError> {
        if !value.is_finite() || value < 0.0 {
            return Err(LogWeightError::InvalidMagnitude(value));
        }
        Ok(LogWeight(value.ln()))
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn log10(self) -> f64 {
        self.0 / LN_10
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Linear-scale value; overflows to `inf` or underflows to `0` outside f64 range.
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn add(self, other: LogWeight) -> LogWeight {
        let (hi, lo) = if self.0 >= other.0 {
            (self.0, other.0)
        } else {
            (other.0, self.0)
        };
        if hi == f64::NEG_INFINITY {
            return LogWeight::ZERO;
        }
        LogWeight(hi + (lo - hi).exp().ln_1p())
    }

    pub fn mul(self, other: LogWeight) -> LogWeight {
        if self.is_zero() || other.is_zero() {
            return LogWeight::ZERO;
        }
        LogWeight(self.0 + other.0)
    }

    pub fn ratio(self, denominator: LogWeight) -> Result<LogWeight, LogWeightError> {
        if denominator.is_zero() {
            return Err(LogWeightError::ZeroDenominator { numerator: self.0 });
        }
        if self.is_zero() {
            return Ok(LogWeight::ZERO);
        }
        Ok(LogWeight(self.0 - denominator.0))
    }

    /// `1 - self` for a probability, computed without cancellation.
    pub fn complement(self) -> Result<LogWeight, LogWeightError> {
        if self.0 > 0.0 {
            return Err(LogWeightError::InvalidMagnitude(self.value()));
        }
        // ln(1 - e^x); switch branches at ln 2 for accuracy.
        let x = self.0;
        let ln = if x > -std::f64::consts::LN_2 {
            (-x.exp_m1()).ln()
        } else {
            (-x.exp()).ln_1p()
        };
        Ok(LogWeight(ln))
    }

    /// Log-sum-exp anchored at the maximum term.
    pub fn sum<I: IntoIterator<Item = LogWeight>>(terms: I) -> LogWeight {
        let terms: Vec<f64> = terms.into_iter().map(|w| w.0).collect();
        LogWeight(log_sum_exp(&terms))
    }
}

impl Eq for LogWeight {}

impl PartialOrd for LogWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LogWeight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub fn combine(a: LogWeight, b: LogWeight, mode: Combine) -> Result<LogWeight, LogWeightError> {
    match mode {
        Combine::Add => Ok(a.add(b)),
        Combine::Mul => Ok(a.mul(b)),
        Combine::Ratio => a.ratio(b),
    }
}

/// Divides every weight by the log-sum-exp total. Zero weights stay zero.
pub fn normalize(weights: &[LogWeight]) -> Result<Vec<LogWeight>, LogWeightError> {
    let total = LogWeight::sum(weights.iter().copied());
    if total.is_zero() {
        return Err(LogWeightError::NoSupport);
    }
    weights.iter().map(|w| w.ratio(total)).collect()
}

/// `ln(sum(exp(x_i)))` over raw logarithms; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

impl fmt::Display for LogWeight {
    /// Scientific notation (`1e-30`) while `|log10| <= 300`, otherwise `10^<log10>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let log10 = self.log10();
        if log10.abs() <= 300.0 {
            let mantissa_form = format!("{:.9e}", self.value());
            write!(f, "{}", trim_mantissa(&mantissa_form))
        } else {
            write!(f, "10^{}", significant(log10, 6))
        }
    }
}

fn trim_mantissa(s: &str) -> String {
    match s.split_once('e') {
        Some((mantissa, exp)) if mantissa.contains('.') => {
            let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
            format!("{mantissa}e{exp}")
        }
        _ => s.to_string(),
    }
}

/// Renders `x` with `digits` significant digits, in plain form while that is short.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if magnitude >= digits as i32 || magnitude < -4 {
        return trim_mantissa(&format!("{:.*e}", digits.saturating_sub(1), x));
    }
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
