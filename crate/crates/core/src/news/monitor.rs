use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{compute_news, NewsResult, RiskBand};
use crate::domain::{CaseId, Instant, VitalSigns};

/// Raised when a patient's risk band rises between two observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MonitorAlert {
    pub case_id: CaseId,
    pub at: Instant,
    pub previous_band: RiskBand,
    pub new_band: RiskBand,
    pub news: NewsResult,
    pub recommendation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrendError {
    #[error("vitals series is empty")]
    EmptySeries,
    #[error("vitals series is not time-ordered at index {0}")]
    Unordered(usize),
}

/// Fixed escalation advice for each band.
pub fn recommendation(band: RiskBand) -> &'static str {
    match band {
        RiskBand::Low => "Continue routine observations at least every 12 hours.",
        RiskBand::LowMedium => {
            "A single parameter scores 3: request an urgent ward-based review and observe at least hourly."
        }
        RiskBand::Medium => {
            "NEWS2 5-6: urgent review by a clinician competent in acute illness; observe at least hourly and consider sepsis workup."
        }
        RiskBand::High => {
            "NEWS2 7 or more: emergency assessment by the critical care team; continuous vital-sign monitoring and consider transfer to a higher level of care."
        }
    }
}

/// Emits one alert for every strict band escalation between consecutive
/// observations. De-escalations and plateaus produce nothing.
pub fn evaluate_trend(case_id: &CaseId, series: &[VitalSigns]) -> Result<Vec<MonitorAlert>, TrendError> {
    if series.is_empty() {
        return Err(TrendError::EmptySeries);
    }
    if let Some(i) = series.windows(2).position(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(TrendError::Unordered(i + 1));
    }

    let mut alerts = Vec::new();
    let mut previous = compute_news(&series[0]).band;
    for v in &series[1..] {
        let news = compute_news(v);
        if news.band > previous {
            alerts.push(MonitorAlert {
                case_id: case_id.clone(),
                at: v.timestamp,
                previous_band: previous,
                new_band: news.band,
                news,
                recommendation: recommendation(news.band).to_string(),
            });
        }
        previous = news.band;
    }
    Ok(alerts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Consciousness, SpO2Scale, Temperature};
    use chrono::{Duration, TimeZone, Utc};

    fn obs(hour: i64, rr: u32, spo2: u32, sbp: u32, hr: u32, t: f64) -> VitalSigns {
        VitalSigns {
            timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + Duration::hours(hour),
            respiration_rate: rr,
            spo2,
            on_supplemental_oxygen: false,
            spo2_scale: SpO2Scale::Scale1,
            systolic_bp: sbp,
            heart_rate: hr,
            consciousness: Consciousness::Alert,
            temperature: Temperature::from_celsius(t).unwrap(),
        }
    }

    #[test]
    fn steady_normal_series_is_quiet() {
        let series: Vec<_> = (0..5).map(|h| obs(h, 16, 98, 125, 70, 36.8)).collect();
        assert!(evaluate_trend(&"c".into(), &series).unwrap().is_empty());
    }

    #[test]
    fn two_escalations() {
        // totals hand-checked against the chart:
        //   rr 22 (2) -> 2
        //   rr 22 (2), spo2 94 (1), hr 112 (2) -> 5
        //   rr 21 (2), spo2 95 (1), sbp 110 (1), hr 91 (1) -> 5
        //   rr 25 (3), spo2 93 (2), hr 111 (2), t 38.1 (1) -> 8
        let series = vec![
            obs(0, 22, 97, 120, 80, 37.0),
            obs(1, 22, 94, 120, 112, 37.0),
            obs(2, 21, 95, 110, 91, 37.0),
            obs(3, 25, 93, 120, 111, 38.1),
        ];
        let totals: Vec<u8> = series.iter().map(|v| compute_news(v).total).collect();
        assert_eq!(totals, [2, 5, 5, 8]);

        let alerts = evaluate_trend(&"c".into(), &series).unwrap();
        assert_eq!(alerts.len(), 2);
        assert_eq!((alerts[0].previous_band, alerts[0].new_band), (RiskBand::Low, RiskBand::Medium));
        assert_eq!(alerts[0].at, series[1].timestamp);
        assert_eq!((alerts[1].previous_band, alerts[1].new_band), (RiskBand::Medium, RiskBand::High));
        assert_eq!(alerts[1].recommendation, recommendation(RiskBand::High));
    }

    #[test]
    fn de_escalation_is_silent() {
        let series = vec![obs(0, 25, 93, 120, 111, 38.1), obs(1, 16, 98, 125, 70, 36.8)];
        assert!(evaluate_trend(&"c".into(), &series).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        assert_eq!(evaluate_trend(&"c".into(), &[]), Err(TrendError::EmptySeries));
        let series = vec![obs(1, 16, 98, 125, 70, 36.8), obs(0, 16, 98, 125, 70, 36.8)];
        assert_eq!(evaluate_trend(&"c".into(), &series), Err(TrendError::Unordered(1)));
    }
}
