//! Environmental condition controls and their effect on synthetic
//! observations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("{field} = {value} is outside [0, 1]")]
    DensityOutOfRange { field: &'static str, value: f64 },
    #[error("degradation table has no entry for {0}")]
    MissingTableEntry(String),
    #[error("unknown {kind} '{value}'")]
    UnknownValue { kind: &'static str, value: String },
    #[error("line {line}: {message}")]
    TableParse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, ConditionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Weather {
    #[default]
    Clear,
    Rain,
    Snow,
}

impl Weather {
    pub const ALL: [Weather; 3] = [Weather::Clear, Weather::Rain, Weather::Snow];

    pub fn as_str(&self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Rain => "rain",
            Weather::Snow => "snow",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self> {
        Weather::ALL
            .into_iter()
            .find(|w| w.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConditionError::UnknownValue { kind: "weather", value: s.to_string() })
    }
}

/// The two clock presets: noon and 23:00.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum TimeOfDay {
    #[default]
    Day,
    Night,
}

impl TimeOfDay {
    pub const ALL: [TimeOfDay; 2] = [TimeOfDay::Day, TimeOfDay::Night];

    pub fn as_str(&self) -> &'static str {
        match self {
            TimeOfDay::Day => "day",
            TimeOfDay::Night => "night",
        }
    }

    /// Wall-clock hour of the preset.
    pub fn hour(&self) -> u32 {
        match self {
            TimeOfDay::Day => 12,
            TimeOfDay::Night => 23,
        }
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeOfDay {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self> {
        TimeOfDay::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConditionError::UnknownValue { kind: "time of day", value: s.to_string() })
    }
}

/// Weather, time of day and traffic densities for one capture session.
///
/// The default is clear weather at noon with empty streets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConditionSet {
    pub weather: Weather,
    pub time_of_day: TimeOfDay,
    pub vehicle_density: f64,
    pub pedestrian_density: f64,
}

impl ConditionSet {
    pub fn validate(self) -> Result<Self> {
        validate(self)
    }
}

/// Returns `c` unchanged when both densities lie in `[0, 1]`.
pub fn validate(c: ConditionSet) -> Result<ConditionSet> {
    for (field, value) in [
        ("vehicle_density", c.vehicle_density),
        ("pedestrian_density", c.pedestrian_density),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(ConditionError::DensityOutOfRange { field, value });
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationProfile {
    pub pixel_noise_multiplier: f64,
    pub dropout_rate: f64,
}

/// Lookup table mapping conditions to a [`DegradationProfile`].
///
/// Text form, one `key value` pair per line, `#` starts a comment:
///
/// ```text
/// weather.clear 1.0
/// weather.rain 1.5
/// weather.snow 2.0
/// time.day 0.0
/// time.night 0.3
/// density_coefficient 0.2
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationTable {
    pub weather_multiplier: BTreeMap<Weather, f64>,
    pub time_dropout: BTreeMap<TimeOfDay, f64>,
    pub density_coefficient: f64,
}

impl Default for DegradationTable {
    fn default() -> Self {
        Self {
            weather_multiplier: [(Weather::Clear, 1.0), (Weather::Rain, 1.5), (Weather::Snow, 2.0)].into(),
            time_dropout: [(TimeOfDay::Day, 0.0), (TimeOfDay::Night, 0.3)].into(),
            density_coefficient: 0.2,
        }
    }
}

impl DegradationTable {
    /// An empty table with the default density coefficient.
    pub fn empty() -> Self {
        Self {
            weather_multiplier: BTreeMap::new(),
            time_dropout: BTreeMap::new(),
            density_coefficient: 0.2,
        }
    }

    /// Parses the text form. Keys not present are simply absent from the
    /// returned table; start from [`DegradationTable::parse_over`] to layer
    /// overrides on the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_over(Self::empty(), text)
    }

    /// Applies the entries in `text` on top of `base`.
    pub fn parse_over(mut base: Self, text: &str) -> Result<Self> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let (Some(key), Some(value), None) = (tokens.next(), tokens.next(), tokens.next()) else {
                return Err(ConditionError::TableParse {
                    line: line_no,
                    message: "expected 'key value'".into(),
                });
            };
            let value: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| ConditionError::TableParse {
                    line: line_no,
                    message: format!("'{value}' is not a non-negative number"),
                })?;
            let parse_err = |e: ConditionError| ConditionError::TableParse { line: line_no, message: e.to_string() };
            if let Some(w) = key.strip_prefix("weather.") {
                base.weather_multiplier.insert(w.parse().map_err(parse_err)?, value);
            } else if let Some(t) = key.strip_prefix("time.") {
                base.time_dropout.insert(t.parse().map_err(parse_err)?, value);
            } else if key == "density_coefficient" {
                base.density_coefficient = value;
            } else {
                return Err(ConditionError::TableParse {
                    line: line_no,
                    message: format!("unknown key '{key}'"),
                });
            }
        }
        Ok(base)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, m) in &self.weather_multiplier {
            out.push_str(&format!("weather.{w} {m}\n"));
        }
        for (t, d) in &self.time_dropout {
            out.push_str(&format!("time.{t} {d}\n"));
        }
        out.push_str(&format!("density_coefficient {}\n", self.density_coefficient));
        out
    }
}

/// Maps a condition set through `table`.
///
/// `dropout_rate = clamp(time dropout + coefficient * max(densities), 0, 1)`.
pub fn degradation(c: &ConditionSet, table: &DegradationTable) -> Result<DegradationProfile> {
    let c = validate(*c)?;
    let multiplier = *table
        .weather_multiplier
        .get(&c.weather)
        .ok_or_else(|| ConditionError::MissingTableEntry(format!("weather.{}", c.weather)))?;
    let base_dropout = *table
        .time_dropout
        .get(&c.time_of_day)
        .ok_or_else(|| ConditionError::MissingTableEntry(format!("time.{}", c.time_of_day)))?;
    let density = c.vehicle_density.max(c.pedestrian_density);
    Ok(DegradationProfile {
        pixel_noise_multiplier: multiplier,
        dropout_rate: (base_dropout + table.density_coefficient * density).clamp(0.0, 1.0),
    })
}
