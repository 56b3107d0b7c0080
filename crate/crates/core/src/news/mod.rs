//! NEWS2 early-warning scoring and band-escalation monitoring.

mod chart;
mod monitor;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{Consciousness, SpO2Scale, VitalSigns};

pub use chart::{Band, NewsChart, NEWS2};
pub use monitor::{evaluate_trend, recommendation, MonitorAlert, TrendError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub struct NewsSubscores {
    pub respiration: u8,
    pub spo2: u8,
    pub oxygen: u8,
    pub systolic_bp: u8,
    pub heart_rate: u8,
    pub consciousness: u8,
    pub temperature: u8,
}

impl NewsSubscores {
    pub fn as_array(&self) -> [u8; 7] {
        [
            self.respiration,
            self.spo2,
            self.oxygen,
            self.systolic_bp,
            self.heart_rate,
            self.consciousness,
            self.temperature,
        ]
    }

    pub fn total(&self) -> u8 {
        self.as_array().iter().sum()
    }
}

/// Clinical risk band, ordered by urgency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum RiskBand {
    Low,
    /// Total 0-4 with a single parameter scoring 3.
    LowMedium,
    Medium,
    High,
}

impl RiskBand {
    pub fn from_subscores(subscores: &NewsSubscores) -> RiskBand {
        match subscores.total() {
            t if t >= 7 => RiskBand::High,
            5 | 6 => RiskBand::Medium,
            _ if subscores.as_array().contains(&3) => RiskBand::LowMedium,
            _ => RiskBand::Low,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct NewsResult {
    pub subscores: NewsSubscores,
    pub total: u8,
    pub band: RiskBand,
    pub scale_used: SpO2Scale,
}

pub fn compute_news(v: &VitalSigns) -> NewsResult {
    compute_news_with(&NEWS2, v)
}

pub fn compute_news_with(chart: &NewsChart, v: &VitalSigns) -> NewsResult {
    let spo2 = clamp_i32(v.spo2);
    let spo2_points = match v.spo2_scale {
        SpO2Scale::Scale1 => chart::lookup(chart.spo2_scale1, spo2),
        SpO2Scale::Scale2 if v.on_supplemental_oxygen => chart::lookup(chart.spo2_scale2_on_oxygen, spo2),
        SpO2Scale::Scale2 => chart::lookup(chart.spo2_scale2_on_air, spo2),
    };
    let subscores = NewsSubscores {
        respiration: chart::lookup(chart.respiration, clamp_i32(v.respiration_rate)),
        spo2: spo2_points,
        oxygen: if v.on_supplemental_oxygen { chart.supplemental_oxygen_points } else { 0 },
        systolic_bp: chart::lookup(chart.systolic_bp, clamp_i32(v.systolic_bp)),
        heart_rate: chart::lookup(chart.heart_rate, clamp_i32(v.heart_rate)),
        consciousness: if v.consciousness == Consciousness::Alert { 0 } else { chart.not_alert_points },
        temperature: chart::lookup(chart.temperature_tenths, v.temperature.tenths()),
    };
    NewsResult {
        subscores,
        total: subscores.total(),
        band: RiskBand::from_subscores(&subscores),
        scale_used: v.spo2_scale,
    }
}

fn clamp_i32(x: u32) -> i32 {
    i32::try_from(x).unwrap_or(i32::MAX)
}
