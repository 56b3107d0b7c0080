//! One-sample Wilcoxon signed-rank test and Likert survey summaries.

mod survey;

use num_traits::Float;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use survey::{format_summary_table, parse_ratings_csv, summarize_survey, QuestionSummary, SurveySummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum TestMethod {
    /// Normal approximation with tie-corrected variance and a 0.5
    /// continuity correction.
    NormalApproxTieCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TestResult<T> {
    /// Sample size after dropping zero differences.
    pub n_effective: usize,
    pub w_plus: T,
    pub z: T,
    pub p_two_sided: T,
    pub method: TestMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no samples")]
    EmptySample,
    #[error("every sample equals the hypothesised median")]
    AllZeroDifferences,
    #[error("question {0:?} has no ratings")]
    EmptyQuestion(String),
    #[error("rating {rating} for question {question:?} is outside 1..=5")]
    RatingOutOfRange { question: String, rating: i64 },
    #[error("ratings file: {0}")]
    Input(String),
}

/// Tests whether the median of `samples` differs from `mu`.
///
/// Zero differences are dropped, absolute differences get mid-ranks, and the
/// normal approximation uses the tie-corrected variance
/// `n(n+1)(2n+1)/24 - sum(t^3 - t)/48` with a continuity correction of 0.5
/// toward the mean.
pub fn wilcoxon_one_sample<T: Float>(samples: &[T], mu: T) -> Result<TestResult<T>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut diffs: Vec<T> = samples.iter().map(|&x| x - mu).filter(|d| !d.is_zero()).collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    diffs.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("samples must not be NaN"));

    let n = diffs.len();
    let mut w_plus = T::zero();
    let mut tie_term = T::zero();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && diffs[j].abs() == diffs[i].abs() {
            j += 1;
        }
        // ranks i+1..=j share the average (i + 1 + j) / 2
        let mid_rank = cast::<T>((i + 1 + j) as f64 / 2.0);
        let t = cast::<T>((j - i) as f64);
        tie_term = tie_term + t * t * t - t;
        for d in &diffs[i..j] {
            if d.is_sign_positive() {
                w_plus = w_plus + mid_rank;
            }
        }
        i = j;
    }

    let nf = cast::<T>(n as f64);
    let one = T::one();
    let two = cast::<T>(2.0);
    let mean = nf * (nf + one) / cast(4.0);
    let variance = nf * (nf + one) * (two * nf + one) / cast(24.0) - tie_term / cast(48.0);
    let centered = w_plus - mean;
    let correction = if centered > T::zero() {
        cast(0.5)
    } else if centered < T::zero() {
        cast(-0.5)
    } else {
        T::zero()
    };
    let z = if variance > T::zero() { (centered - correction) / variance.sqrt() } else { T::zero() };
    let p = two_sided_normal_p(z.to_f64().unwrap_or(f64::NAN));

    Ok(TestResult { n_effective: n, w_plus, z, p_two_sided: cast(p), method: TestMethod::NormalApproxTieCorrected })
}

fn two_sided_normal_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("float conversion")
}

/// Rounds to `digits` significant figures.
pub fn round_significant(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - magnitude);
    (x * scale).round() / scale
}

/// P value text at three significant figures.
pub fn format_p(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let magnitude = p.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, round_significant(p, 3))
}
