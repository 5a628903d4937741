use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::{AgeGroup, ExclusionReason, Modality, StudyError};
use crate::site::BodySite;

pub const MEASUREMENT_CSV_HEADER: &str = "participant_id,age_group,site,modality,value,unit,excluded,exclusion_reason";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredValue {
    Value(f64),
    /// Every smartphone trial at the site saturated.
    NaN,
    /// No filament in the set was felt.
    NoneFelt,
}

impl MeasuredValue {
    pub fn from_f64(v: f64) -> Self {
        if v.is_nan() {
            Self::NaN
        } else {
            Self::Value(v)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            Self::NaN | Self::NoneFelt => None,
        }
    }

    fn parse(text: &str) -> Result<Self, String> {
        match text {
            "NaN" => Ok(Self::NaN),
            "none_felt" => Ok(Self::NoneFelt),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Self::Value(v)),
                _ => Err(format!("value `{other}` is not a number, `NaN`, or `none_felt`")),
            },
        }
    }
}

/// Shortest round-trip formatting, so re-reading gives back the same bits.
impl fmt::Display for MeasuredValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Value(v) => write!(f, "{v}"),
            Self::NaN => f.write_str("NaN"),
            Self::NoneFelt => f.write_str("none_felt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMeasurement {
    pub participant_id: String,
    pub age_group: AgeGroup,
    pub site: BodySite,
    pub modality: Modality,
    pub value: MeasuredValue,
    pub exclusion: Option<ExclusionReason>,
}

impl SiteMeasurement {
    pub fn is_excluded(&self) -> bool {
        self.exclusion.is_some()
    }
}

pub fn write_measurements(rows: &[SiteMeasurement], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{MEASUREMENT_CSV_HEADER}")?;
    for m in rows {
        let reason = m.exclusion.as_ref().map(ToString::to_string).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            m.participant_id,
            m.age_group,
            m.site,
            m.modality,
            m.value,
            m.modality.unit(),
            u8::from(m.exclusion.is_some()),
            reason
        )?;
    }
    Ok(())
}

pub fn read_measurements(input: impl Read) -> Result<Vec<SiteMeasurement>, StudyError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header_err = |message: String| StudyError::Csv { line: 1, message };
    let headers = reader.headers().map_err(|e| header_err(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != MEASUREMENT_CSV_HEADER {
        return Err(header_err(format!("expected header `{MEASUREMENT_CSV_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let err = |message: String| StudyError::Csv { line, message };
        let record = record.map_err(|e| err(e.to_string()))?;
        if record.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", record.len())));
        }
        let modality: Modality = record[3].parse().map_err(err)?;
        if record[5] != *modality.unit() {
            return Err(err(format!("unit `{}` does not match modality {modality}", &record[5])));
        }
        let value = MeasuredValue::parse(&record[4]).map_err(err)?;
        if value == MeasuredValue::NoneFelt && modality != Modality::Monofilament {
            return Err(err("`none_felt` is only valid for monofilament rows".into()));
        }
        let exclusion = match (&record[6], &record[7]) {
            ("0", "") => None,
            ("1", reason) => Some(reason.parse().map_err(err)?),
            (flag, reason) => return Err(err(format!("inconsistent exclusion fields `{flag}`, `{reason}`"))),
        };
        rows.push(SiteMeasurement {
            participant_id: record[0].to_string(),
            age_group: record[1].parse().map_err(err)?,
            site: record[2].parse().map_err(|e: crate::site::UnknownSite| err(e.to_string()))?,
            modality,
            value,
            exclusion,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_formatting() {
        assert_eq!(MeasuredValue::Value(0.07).to_string(), "0.07");
        assert_eq!(MeasuredValue::Value(4.2).to_string(), "4.2");
        assert_eq!(MeasuredValue::Value(5.0).to_string(), "5");
        assert_eq!(MeasuredValue::from_f64(f64::NAN).to_string(), "NaN");
        assert_eq!(MeasuredValue::parse("none_felt"), Ok(MeasuredValue::NoneFelt));
        assert!(MeasuredValue::parse("inf").is_err());
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text =
            format!("{MEASUREMENT_CSV_HEADER}\nP001,younger,H1,smartphone,0.2,haptic_intensity,0,\nP001,younger,H1,smartphone,0.2,s,0,\n");
        match read_measurements(text.as_bytes()) {
            Err(StudyError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
