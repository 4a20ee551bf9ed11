//! Panel ingestion: delimiter-separated observation files, positivity
//! filtering and matched cross-period pairs.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One assessed value for one entity in one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub entity_id: String,
    pub period: i32,
    pub value: f64,
}

/// Matched (x1, x2) pairs of one entity across two periods, both positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedPanel {
    pub period_1: i32,
    pub period_2: i32,
    pub pairs: Vec<(f64, f64)>,
}

impl PairedPanel {
    pub fn count(&self) -> usize {
        self.pairs.len()
    }
}

/// Column names and delimiter for observation files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMap {
    pub entity: String,
    pub period: String,
    pub value: String,
    /// Single-byte delimiter; defaults to a tab.
    pub delimiter: char,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            entity: "entity".into(),
            period: "period".into(),
            value: "value".into(),
            delimiter: '\t',
        }
    }
}

/// Result of loading a panel file: valid observations plus rejection counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadReport {
    pub observations: Vec<Observation>,
    /// Rows whose value parsed but was <= 0.
    pub rejected_nonpositive: usize,
    /// Rows with unparsable period or value fields.
    pub rejected_malformed: usize,
}

impl LoadReport {
    pub fn rejected(&self) -> usize {
        self.rejected_nonpositive + self.rejected_malformed
    }
}

/// Load observations from a delimiter-separated file with a header row.
///
/// Rows with non-positive or unparsable values are counted and dropped;
/// duplicate (entity, period) keys are a hard error.
pub fn load_panel(path: &Path, cols: &ColumnMap) -> Result<LoadReport> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(cols.delimiter as u8)
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;

    let headers = rdr.headers()?.clone();
    let col_idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedHeader(format!("column '{name}' not found in {headers:?}")))
    };
    let i_entity = col_idx(&cols.entity)?;
    let i_period = col_idx(&cols.period)?;
    let i_value = col_idx(&cols.value)?;

    let mut seen: HashSet<(String, i32)> = HashSet::new();
    let mut observations = Vec::new();
    let mut rejected_nonpositive = 0usize;
    let mut rejected_malformed = 0usize;

    for record in rdr.records() {
        let record = record?;
        let entity = match record.get(i_entity) {
            Some(e) if !e.is_empty() => e.to_string(),
            _ => {
                rejected_malformed += 1;
                continue;
            }
        };
        let period: i32 = match record.get(i_period).and_then(|s| s.trim().parse().ok()) {
            Some(p) => p,
            None => {
                rejected_malformed += 1;
                continue;
            }
        };
        let value: f64 = match record.get(i_value).and_then(|s| s.trim().parse().ok()) {
            Some(v) => v,
            None => {
                rejected_malformed += 1;
                continue;
            }
        };
        if !value.is_finite() || value <= 0.0 {
            rejected_nonpositive += 1;
            continue;
        }
        if !seen.insert((entity.clone(), period)) {
            return Err(Error::DuplicateKey { entity, period });
        }
        observations.push(Observation { entity_id: entity, period, value });
    }

    if observations.is_empty() {
        return Err(Error::NoValidRows { rejected: rejected_nonpositive + rejected_malformed });
    }
    Ok(LoadReport { observations, rejected_nonpositive, rejected_malformed })
}

/// Write observations in the same format `load_panel` reads.
pub fn write_panel(path: &Path, obs: &[Observation], cols: &ColumnMap) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(cols.delimiter as u8)
        .from_path(path)?;
    wtr.write_record([cols.entity.as_str(), cols.period.as_str(), cols.value.as_str()])?;
    for o in obs {
        // `{}` prints the shortest representation that round-trips exactly.
        wtr.write_record([o.entity_id.as_str(), &o.period.to_string(), &format!("{}", o.value)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Build matched (x1, x2) pairs for entities positive in both periods,
/// sorted by entity id.
pub fn pair_periods(obs: &[Observation], p1: i32, p2: i32) -> Result<PairedPanel> {
    if p1 >= p2 {
        return Err(Error::BadPeriodOrder { p1, p2 });
    }
    let mut first: HashMap<&str, f64> = HashMap::new();
    let mut second: HashMap<&str, f64> = HashMap::new();
    for o in obs {
        if o.value > 0.0 {
            if o.period == p1 {
                first.insert(o.entity_id.as_str(), o.value);
            } else if o.period == p2 {
                second.insert(o.entity_id.as_str(), o.value);
            }
        }
    }
    let mut matched: Vec<(&str, f64, f64)> = first
        .iter()
        .filter_map(|(id, &x1)| second.get(id).map(|&x2| (*id, x1, x2)))
        .collect();
    if matched.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    matched.sort_unstable_by(|a, b| a.0.cmp(b.0));
    Ok(PairedPanel {
        period_1: p1,
        period_2: p2,
        pairs: matched.into_iter().map(|(_, x1, x2)| (x1, x2)).collect(),
    })
}
