/// A closed integer range mapped to a point value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub lo: i32,
    pub hi: i32,
    pub points: u8,
}

const fn band(lo: i32, hi: i32, points: u8) -> Band {
    Band { lo, hi, points }
}

const MIN: i32 = i32::MIN;
const MAX: i32 = i32::MAX;

/// A complete scoring chart. Swapping the chart swaps the scoring standard.
#[derive(Debug, Clone, Copy)]
pub struct NewsChart {
    pub respiration: &'static [Band],
    pub spo2_scale1: &'static [Band],
    pub spo2_scale2_on_air: &'static [Band],
    pub spo2_scale2_on_oxygen: &'static [Band],
    pub supplemental_oxygen_points: u8,
    pub systolic_bp: &'static [Band],
    pub heart_rate: &'static [Band],
    pub not_alert_points: u8,
    /// Temperature bands in tenths of a degree Celsius.
    pub temperature_tenths: &'static [Band],
}

/// The Royal College of Physicians NEWS2 chart.
pub const NEWS2: NewsChart = NewsChart {
    respiration: &[band(MIN, 8, 3), band(9, 11, 1), band(12, 20, 0), band(21, 24, 2), band(25, MAX, 3)],
    spo2_scale1: &[band(MIN, 91, 3), band(92, 93, 2), band(94, 95, 1), band(96, MAX, 0)],
    spo2_scale2_on_air: &[band(MIN, 83, 3), band(84, 85, 2), band(86, 87, 1), band(88, MAX, 0)],
    spo2_scale2_on_oxygen: &[
        band(MIN, 83, 3),
        band(84, 85, 2),
        band(86, 87, 1),
        band(88, 92, 0),
        band(93, 94, 1),
        band(95, 96, 2),
        band(97, MAX, 3),
    ],
    supplemental_oxygen_points: 2,
    systolic_bp: &[band(MIN, 90, 3), band(91, 100, 2), band(101, 110, 1), band(111, 219, 0), band(220, MAX, 3)],
    heart_rate: &[
        band(MIN, 40, 3),
        band(41, 50, 1),
        band(51, 90, 0),
        band(91, 110, 1),
        band(111, 130, 2),
        band(131, MAX, 3),
    ],
    not_alert_points: 3,
    temperature_tenths: &[
        band(MIN, 350, 3),
        band(351, 360, 1),
        band(361, 380, 0),
        band(381, 390, 1),
        band(391, MAX, 2),
    ],
};

pub(crate) fn lookup(bands: &[Band], value: i32) -> u8 {
    bands
        .iter()
        .find(|b| b.lo <= value && value <= b.hi)
        .map(|b| b.points)
        .expect("chart bands cover the full integer range")
}
