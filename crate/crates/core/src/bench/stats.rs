use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ErrorSample, UNCONVERGED_ERROR_PCT};
use crate::error::{Error, Result};
use crate::scenario::percentile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Method,
    FaultType,
    /// Decile of total farm penetration, `D1` (lowest) to `D10`.
    PenetrationBin,
    SegmentClass,
}

impl FromStr for GroupKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "method" => Ok(GroupKey::Method),
            "fault_type" | "type" => Ok(GroupKey::FaultType),
            "penetration_bin" | "penetration" | "decile" => Ok(GroupKey::PenetrationBin),
            "segment_class" | "segment" => Ok(GroupKey::SegmentClass),
            other => Err(Error::Config(format!("unknown group key '{other}'"))),
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKey::Method => "method",
            GroupKey::FaultType => "fault_type",
            GroupKey::PenetrationBin => "penetration_bin",
            GroupKey::SegmentClass => "segment_class",
        })
    }
}

/// Definitions behind the numbers, carried with every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub error_definition: String,
    pub unconverged_rule: String,
    pub quartiles: String,
    pub whiskers: String,
    pub penetration_bins: String,
    pub group_by: Vec<GroupKey>,
}

impl ReportHeader {
    fn new(group_by: &[GroupKey]) -> Self {
        Self {
            error_definition: "|clamp(d_hat, 0, 1) - d| * 100, percent of monitored line length".into(),
            unconverged_rule: format!("unconverged or singular estimates score {UNCONVERGED_ERROR_PCT}"),
            quartiles: "linear interpolation between closest ranks".into(),
            whiskers: "Tukey, most extreme samples within 1.5 IQR of the quartiles".into(),
            penetration_bins: "deciles D1..D10 of total farm penetration over distinct scenarios".into(),
            group_by: group_by.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: BTreeMap<GroupKey, String>,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub header: ReportHeader,
    pub groups: Vec<GroupStats>,
}

impl ErrorTable {
    /// The group whose key matches every given `(key, value)` pair.
    pub fn find(&self, pairs: &[(GroupKey, &str)]) -> Option<&GroupStats> {
        self.groups.iter().find(|g| pairs.iter().all(|(k, v)| g.key.get(k).is_some_and(|x| x == v)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize")
    }
}

/// Upper edges of deciles 1..9 over the distinct scenarios' totals.
fn decile_edges(samples: &[ErrorSample]) -> Result<Vec<f64>> {
    let mut seen = BTreeMap::new();
    for s in samples {
        seen.entry(s.scenario_id).or_insert(s.penetration_total);
    }
    let mut totals: Vec<f64> = seen.into_values().collect();
    totals.sort_by(f64::total_cmp);
    (1..10).map(|k| percentile(&totals, 10.0 * k as f64)).collect()
}

fn bin_label(total: f64, edges: &[f64]) -> String {
    format!("D{}", 1 + edges.iter().filter(|e| total > **e).count())
}

fn key_value(k: GroupKey, s: &ErrorSample, edges: &[f64]) -> String {
    match k {
        GroupKey::Method => s.method.as_str().to_owned(),
        GroupKey::FaultType => s.fault_type.as_str().to_owned(),
        GroupKey::PenetrationBin => bin_label(s.penetration_total, edges),
        GroupKey::SegmentClass => s.segment_class.as_str().to_owned(),
    }
}

/// Sort key keeping D10 after D9.
fn natural(v: &str) -> (String, u32) {
    match v.strip_prefix('D').and_then(|n| n.parse().ok()) {
        Some(n) => (String::new(), n),
        None => (v.to_owned(), 0),
    }
}

fn summarize(key: BTreeMap<GroupKey, String>, mut v: Vec<f64>) -> Result<GroupStats> {
    v.sort_by(f64::total_cmp);
    let q1 = percentile(&v, 25.0)?;
    let median = percentile(&v, 50.0)?;
    let q3 = percentile(&v, 75.0)?;
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let whisker_low = v.iter().copied().find(|x| *x >= lo_fence).unwrap_or(v[0]);
    let whisker_high = v.iter().rev().copied().find(|x| *x <= hi_fence).unwrap_or(v[v.len() - 1]);
    // Summing in sorted order keeps the mean independent of sample order.
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Ok(GroupStats {
        key,
        count: v.len(),
        mean: mean.clamp(v[0], v[v.len() - 1]),
        min: v[0],
        max: v[v.len() - 1],
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
    })
}

/// Grouped error statistics. Groups are ordered by key values; an empty
/// `group_by` is rejected.
pub fn aggregate(samples: &[ErrorSample], group_by: &[GroupKey]) -> Result<ErrorTable> {
    type SortKey = Vec<(String, u32)>;
    type GroupLabels = BTreeMap<GroupKey, String>;
    if samples.is_empty() {
        return Err(Error::InsufficientData("no error samples".into()));
    }
    let keys: Vec<GroupKey> = group_by.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if keys.is_empty() {
        return Err(Error::Config("empty group-by set".into()));
    }
    let edges = if keys.contains(&GroupKey::PenetrationBin) { decile_edges(samples)? } else { Vec::new() };
    let mut groups: BTreeMap<SortKey, (GroupLabels, Vec<f64>)> = BTreeMap::new();
    for s in samples {
        let key: BTreeMap<GroupKey, String> = keys.iter().map(|k| (*k, key_value(*k, s, &edges))).collect();
        let order: Vec<(String, u32)> = key.values().map(|v| natural(v)).collect();
        groups.entry(order).or_insert_with(|| (key, Vec::new())).1.push(s.error_pct);
    }
    let groups = groups.into_values().map(|(k, v)| summarize(k, v)).collect::<Result<_>>()?;
    Ok(ErrorTable { header: ReportHeader::new(&keys), groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locators::Method;
    use crate::oracle::{FaultType, SegmentClass};
    use proptest::prelude::*;

    fn sample(id: u64, m: Method, e: f64, pen: f64) -> ErrorSample {
        ErrorSample {
            scenario_id: id,
            method: m,
            fault_type: FaultType::AG,
            distance: 0.5,
            d_hat: 0.5,
            error_pct: e,
            penetration_total: pen,
            segment_class: SegmentClass::Primary,
            converged: true,
        }
    }

    #[test]
    fn single_sample_group() {
        let t = aggregate(&[sample(0, Method::Takz, 3.0, 1.0)], &[GroupKey::Method]).unwrap();
        let g = &t.groups[0];
        assert_eq!((g.mean, g.max, g.median, g.count), (3.0, 3.0, 3.0, 1));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(aggregate(&[], &[GroupKey::Method]).is_err());
        assert!(matches!(aggregate(&[sample(0, Method::Takz, 1.0, 1.0)], &[]), Err(Error::Config(_))));
    }

    #[test]
    fn tukey_whiskers_exclude_outliers() {
        let mut s: Vec<_> = (0..9).map(|i| sample(i, Method::Takz, i as f64, 1.0)).collect();
        s.push(sample(9, Method::Takz, 100.0, 1.0));
        let g = &aggregate(&s, &[GroupKey::Method]).unwrap().groups[0];
        assert_eq!(g.max, 100.0);
        assert_eq!(g.whisker_high, 8.0);
        assert_eq!(g.whisker_low, 0.0);
    }

    #[test]
    fn deciles_cover_ten_bins_in_order() {
        let s: Vec<_> = (0..100).map(|i| sample(i, Method::Proposed, 0.0, i as f64)).collect();
        let t = aggregate(&s, &[GroupKey::PenetrationBin]).unwrap();
        let labels: Vec<_> = t.groups.iter().map(|g| g.key[&GroupKey::PenetrationBin].clone()).collect();
        assert_eq!(labels, (1..=10).map(|i| format!("D{i}")).collect::<Vec<_>>());
        assert!(t.groups.iter().all(|g| g.count == 10));
    }

    #[test]
    fn quartiles_match_sort_oracle() {
        let mut rng = crate::scenario::scenario_rng(4, 4);
        use rand::Rng;
        let s: Vec<_> = (0..1000).map(|i| sample(i, Method::Takn, rng.random_range(0.0..100.0), 1.0)).collect();
        let g = &aggregate(&s, &[GroupKey::Method]).unwrap().groups[0];
        let mut v: Vec<f64> = s.iter().map(|x| x.error_pct).collect();
        v.sort_by(f64::total_cmp);
        // Closest-rank interpolation at (n-1)p.
        let q = |p: f64| {
            let r = p * 999.0;
            let (i, f) = (r.floor() as usize, r - r.floor());
            v[i] * (1.0 - f) + v[(i + 1).min(999)] * f
        };
        for (got, want) in [(g.q1, q(0.25)), (g.median, q(0.5)), (g.q3, q(0.75))] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn ordering_and_permutation_invariance(
            errs in prop::collection::vec(0.0f64..100.0, 1..80),
            seed in any::<u64>(),
        ) {
            let methods = [Method::Takz, Method::Proposed];
            let s: Vec<_> = errs.iter().enumerate()
                .map(|(i, e)| sample(i as u64, methods[i % 2], *e, (i % 7) as f64))
                .collect();
            let keys = [GroupKey::Method, GroupKey::PenetrationBin];
            let a = aggregate(&s, &keys).unwrap();
            for g in &a.groups {
                prop_assert!(g.min <= g.q1 && g.q1 <= g.median && g.median <= g.q3 && g.q3 <= g.max);
                prop_assert!(g.min <= g.mean && g.mean <= g.max);
                prop_assert!(g.count > 0);
            }
            let mut shuffled = s.clone();
            use rand::Rng;
            let mut rng = crate::scenario::scenario_rng(seed, 0);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            prop_assert_eq!(a, aggregate(&shuffled, &keys).unwrap());
        }
    }
}
