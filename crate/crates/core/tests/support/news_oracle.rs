//! Hand-encoded NEWS2 chart, written from the published table as plain
//! comparisons so it shares nothing with the production band tables.

#![allow(dead_code)]

use chrono::{TimeZone, Utc};
use matec_core::domain::{Consciousness, SpO2Scale, Temperature, VitalSigns};
use matec_core::news::compute_news;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

pub fn respiration(rr: u32) -> u8 {
    if rr <= 8 {
        3
    } else if rr <= 11 {
        1
    } else if rr <= 20 {
        0
    } else if rr <= 24 {
        2
    } else {
        3
    }
}

pub fn spo2(sat: u32, scale: SpO2Scale, on_oxygen: bool) -> u8 {
    match scale {
        SpO2Scale::Scale1 => {
            if sat <= 91 {
                3
            } else if sat <= 93 {
                2
            } else if sat <= 95 {
                1
            } else {
                0
            }
        }
        SpO2Scale::Scale2 => {
            if sat <= 83 {
                3
            } else if sat <= 85 {
                2
            } else if sat <= 87 {
                1
            } else if sat <= 92 || !on_oxygen {
                0
            } else if sat <= 94 {
                1
            } else if sat <= 96 {
                2
            } else {
                3
            }
        }
    }
}

pub fn systolic(sbp: u32) -> u8 {
    if sbp <= 90 {
        3
    } else if sbp <= 100 {
        2
    } else if sbp <= 110 {
        1
    } else if sbp <= 219 {
        0
    } else {
        3
    }
}

pub fn pulse(hr: u32) -> u8 {
    if hr <= 40 {
        3
    } else if hr <= 50 {
        1
    } else if hr <= 90 {
        0
    } else if hr <= 110 {
        1
    } else if hr <= 130 {
        2
    } else {
        3
    }
}

/// Temperature in degrees Celsius, one decimal place.
pub fn temperature(t: f64) -> u8 {
    // Compare in tenths to dodge binary rounding of values like 35.1.
    let tenths = (t * 10.0).round() as i64;
    if tenths <= 350 {
        3
    } else if tenths <= 360 {
        1
    } else if tenths <= 380 {
        0
    } else if tenths <= 390 {
        1
    } else {
        2
    }
}

pub fn consciousness(c: Consciousness) -> u8 {
    if c == Consciousness::Alert {
        0
    } else {
        3
    }
}

/// `(total, any single parameter scoring 3)`.
pub fn score(v: &VitalSigns) -> (u8, bool) {
    let parts = [
        respiration(v.respiration_rate),
        spo2(v.spo2, v.spo2_scale, v.on_supplemental_oxygen),
        if v.on_supplemental_oxygen { 2 } else { 0 },
        systolic(v.systolic_bp),
        pulse(v.heart_rate),
        consciousness(v.consciousness),
        temperature(v.temperature.celsius()),
    ];
    (parts.iter().sum(), parts.contains(&3))
}

/// "Low", "LowMedium", "Medium" or "High".
pub fn band(v: &VitalSigns) -> &'static str {
    let (total, red) = score(v);
    if total >= 7 {
        "High"
    } else if total >= 5 {
        "Medium"
    } else if red {
        "LowMedium"
    } else {
        "Low"
    }
}

pub const LEVELS: [Consciousness; 5] = [
    Consciousness::Alert,
    Consciousness::Confusion,
    Consciousness::Voice,
    Consciousness::Pain,
    Consciousness::Unresponsive,
];

pub fn normal() -> VitalSigns {
    VitalSigns {
        timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        respiration_rate: 16,
        spo2: 97,
        on_supplemental_oxygen: false,
        spo2_scale: SpO2Scale::Scale1,
        systolic_bp: 120,
        heart_rate: 75,
        consciousness: Consciousness::Alert,
        temperature: Temperature::from_tenths(370),
    }
}

pub fn agree(v: &VitalSigns) -> Result<(), String> {
    let got = compute_news(v);
    let (total, _) = score(v);
    let got_band = format!("{:?}", got.band);
    if got.total != total || got_band != band(v) {
        return Err(format!("{v:?}: scorer {} {got_band}, oracle {total} {}", got.total, band(v)));
    }
    Ok(())
}

/// Every integer value of every parameter across (and past) its charted
/// range, which covers each band boundary from both sides, under every
/// SpO2 scale and oxygen combination.
pub fn boundary_sweep() -> Vec<VitalSigns> {
    let mut out = Vec::new();
    for scale in [SpO2Scale::Scale1, SpO2Scale::Scale2] {
        for oxygen in [false, true] {
            let base = VitalSigns { spo2_scale: scale, on_supplemental_oxygen: oxygen, ..normal() };
            for rr in 0..=70 {
                out.push(VitalSigns { respiration_rate: rr, ..base.clone() });
            }
            for spo2 in 0..=100 {
                out.push(VitalSigns { spo2, ..base.clone() });
            }
            for sbp in 0..=320 {
                out.push(VitalSigns { systolic_bp: sbp, ..base.clone() });
            }
            for hr in 0..=300 {
                out.push(VitalSigns { heart_rate: hr, ..base.clone() });
            }
            for tenths in 250..=450 {
                out.push(VitalSigns { temperature: Temperature::from_tenths(tenths), ..base.clone() });
            }
            for c in LEVELS {
                out.push(VitalSigns { consciousness: c, ..base.clone() });
            }
        }
    }
    out
}

pub fn random_vitals(rng: &mut ChaCha8Rng) -> VitalSigns {
    VitalSigns {
        respiration_rate: rng.random_range(0..=60),
        spo2: rng.random_range(50..=100),
        on_supplemental_oxygen: rng.random_bool(0.4),
        spo2_scale: if rng.random_bool(0.3) { SpO2Scale::Scale2 } else { SpO2Scale::Scale1 },
        systolic_bp: rng.random_range(50..=260),
        heart_rate: rng.random_range(20..=220),
        consciousness: LEVELS[rng.random_range(0..LEVELS.len())],
        temperature: Temperature::from_tenths(rng.random_range(300..=430)),
        ..normal()
    }
}
