use serde::{Deserialize, Serialize};

/// Constant-power energy model used in place of hardware counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub watts: f64,
    /// Grid carbon intensity in grams of CO2 per joule.
    pub grams_per_joule: f64,
}

impl Default for PowerModel {
    /// 65 W draw at 475 gCO2/kWh.
    fn default() -> Self {
        Self {
            watts: 65.0,
            grams_per_joule: 475.0 / 3.6e6,
        }
    }
}

/// `(energy in J, CO2 in g)` for `seconds` of work.
pub fn track_resources(seconds: f64, power: &PowerModel) -> (f64, f64) {
    let energy = seconds * power.watts;
    (energy, energy * power.grams_per_joule)
}
