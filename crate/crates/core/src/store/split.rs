use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabelSet;
use crate::rng::{prng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Record positions on each side of a split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Record-level split stratified by case. Each case with `n >= 2` records
/// sends `round(n·fraction)` of them to test, clamped to `[1, n-1]`; a case
/// with a single record stays in train.
pub fn split_records(labels: &[LabelSet], cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    let mut strata: BTreeMap<_, (String, Vec<usize>)> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        strata
            .entry(l.sort_key())
            .or_insert_with(|| (l.case_name(), Vec::new()))
            .1
            .push(i);
    }
    let mut rng = prng(cfg.seed, Stream::Split);
    let (mut train, mut test, mut warnings) = (Vec::new(), Vec::new(), Vec::new());
    for (_, (name, mut members)) in strata {
        let n = members.len();
        if n == 1 {
            warnings.push(format!("case {name} has a single record; kept in train"));
            train.extend(members);
            continue;
        }
        members.shuffle(&mut rng);
        let k = ((n as f64 * cfg.test_fraction).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        warnings,
    })
}
