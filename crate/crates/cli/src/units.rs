//! Quantities written with an explicit unit suffix, such as `"1.2 MHz"` or
//! `"5 us"`. The original text is kept so configs serialize back unchanged.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;

// Decimal exponent of each unit. Dividing by a power of ten keeps
// "5 us" exactly equal to 5e-6.
const FREQUENCY_UNITS: &[(&str, i32)] = &[("GHz", 9), ("MHz", 6), ("kHz", 3), ("Hz", 0)];
const TIME_UNITS: &[(&str, i32)] = &[("ms", -3), ("us", -6), ("µs", -6), ("ns", -9), ("s", 0)];

fn parse_with_units(text: &str, units: &[(&str, i32)], kind: &str) -> Result<f64, String> {
    let trimmed = text.trim();
    for &(suffix, exponent) in units {
        if let Some(number) = trimmed.strip_suffix(suffix) {
            let number = number.trim_end();
            let value: f64 = number.parse().map_err(|_| format!("cannot parse {kind} `{text}`"))?;
            if !value.is_finite() {
                return Err(format!("{kind} `{text}` is not finite"));
            }
            let scale = 10f64.powi(exponent.abs());
            return Ok(if exponent < 0 { value / scale } else { value * scale });
        }
    }
    let names: Vec<&str> = units.iter().map(|u| u.0).collect();
    Err(format!("{kind} `{text}` needs a unit suffix ({})", names.join(", ")))
}

/// A frequency in Hz (not rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Frequency {
    text: String,
    hz: f64,
}

impl Frequency {
    pub fn hz(&self) -> f64 {
        self.hz
    }

    /// Angular frequency 2π·f.
    pub fn rad_per_s(&self) -> f64 {
        TAU * self.hz
    }
}

impl TryFrom<String> for Frequency {
    type Error = String;

    fn try_from(text: String) -> Result<Self, String> {
        let hz = parse_with_units(&text, FREQUENCY_UNITS, "frequency")?;
        Ok(Self { text, hz })
    }
}

impl From<Frequency> for String {
    fn from(f: Frequency) -> String {
        f.text
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// A duration in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Time {
    text: String,
    seconds: f64,
}

impl Time {
    pub fn seconds(&self) -> f64 {
        self.seconds
    }
}

impl TryFrom<String> for Time {
    type Error = String;

    fn try_from(text: String) -> Result<Self, String> {
        let seconds = parse_with_units(&text, TIME_UNITS, "time")?;
        Ok(Self { text, seconds })
    }
}

impl From<Time> for String {
    fn from(t: Time) -> String {
        t.text
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
