//! Weighted min-max composite vulnerability scores, rankings and
//! descriptive statistics.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::attributes::{csv_field, AttributeTable};
use crate::error::{Error, Result};
use crate::numfmt::format_sig6;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsWorse,
    LowerIsWorse,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::HigherIsWorse => "HIGHER_IS_WORSE",
            Direction::LowerIsWorse => "LOWER_IS_WORSE",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HIGHER_IS_WORSE" => Ok(Direction::HigherIsWorse),
            "LOWER_IS_WORSE" => Ok(Direction::LowerIsWorse),
            other => Err(Error::Config(format!("unknown direction \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub feature: String,
    pub weight: f64,
    pub direction: Direction,
}

impl ScoreEntry {
    pub fn new(feature: impl Into<String>, weight: f64, direction: Direction) -> Self {
        ScoreEntry {
            feature: feature.into(),
            weight,
            direction,
        }
    }
}

/// Feature weights for the composite score. Weights are non-negative and
/// sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeScoreConfig {
    entries: Vec<ScoreEntry>,
}

impl CompositeScoreConfig {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut names = HashSet::new();
        for e in &entries {
            if !names.insert(e.feature.as_str()) {
                return Err(Error::DuplicateFeature(e.feature.clone()));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::InvalidWeight {
                    feature: e.feature.clone(),
                    weight: e.weight,
                });
            }
        }
        let sum: f64 = entries.iter().map(|e| e.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::WeightSumViolation(sum));
        }
        Ok(CompositeScoreConfig { entries })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    /// Parses `feature,weight,direction` rows. Blank lines and `#` comments
    /// are ignored; a `weights_sum=<value>` line, when present, must agree
    /// with the actual sum.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut declared_sum = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("weights_sum=") {
                declared_sum = Some(v.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!("line {}: bad weights_sum", lineno + 1))
                })?);
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let [feature, weight, direction] = parts.as_slice() else {
                return Err(Error::Config(format!(
                    "line {}: expected feature,weight,direction",
                    lineno + 1
                )));
            };
            let weight: f64 = weight.parse().map_err(|_| Error::InvalidWeight {
                feature: feature.to_string(),
                weight: f64::NAN,
            })?;
            entries.push(ScoreEntry::new(*feature, weight, direction.parse()?));
        }
        let config = Self::new(entries)?;
        if let Some(declared) = declared_sum {
            if (declared - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::WeightSumViolation(declared));
            }
        }
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(out, "{},{:?},{}", e.feature, e.weight, e.direction.label()).unwrap();
        }
        out.push_str("weights_sum=1.0\n");
        out
    }

    /// Weighting scheme used when no configuration file is supplied.
    ///
    /// Hazard and outage features share 0.70: the hazard behind the cold
    /// spot gets 0.25 on top of an equal split of the remaining 0.45 across
    /// all hazard and outage features. Building and agriculture value share
    /// 0.15, social vulnerability and community resilience share 0.15, with
    /// community resilience scored as LOWER_IS_WORSE. This is a placeholder
    /// scheme, not a calibrated one.
    pub fn default_for(
        hazards: &[&str],
        outages: &[&str],
        primary_hazard: &str,
        physical: [&str; 2],
        social_vulnerability: &str,
        community_resilience: &str,
    ) -> Result<Self> {
        if !hazards.contains(&primary_hazard) {
            return Err(Error::MissingFeature(primary_hazard.to_string()));
        }
        let shared = 0.45 / (hazards.len() + outages.len()) as f64;
        let mut entries: Vec<ScoreEntry> = hazards
            .iter()
            .chain(outages)
            .map(|&f| {
                let bonus = if f == primary_hazard { 0.25 } else { 0.0 };
                ScoreEntry::new(f, shared + bonus, Direction::HigherIsWorse)
            })
            .collect();
        entries.push(ScoreEntry::new(physical[0], 0.075, Direction::HigherIsWorse));
        entries.push(ScoreEntry::new(physical[1], 0.075, Direction::HigherIsWorse));
        entries.push(ScoreEntry::new(social_vulnerability, 0.075, Direction::HigherIsWorse));
        entries.push(ScoreEntry::new(community_resilience, 0.075, Direction::LowerIsWorse));
        Self::new(entries)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Set when max == min; all values are then 0.
    pub degenerate: bool,
}

/// `(x − min) / (max − min)`.
pub fn minmax_normalize(values: &[f64]) -> Normalized {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if values.is_empty() || range <= 0.0 {
        return Normalized {
            values: vec![0.0; values.len()],
            degenerate: !values.is_empty(),
        };
    }
    Normalized {
        values: values
            .iter()
            .map(|v| ((v - min) / range).clamp(0.0, 1.0))
            .collect(),
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRegion {
    pub index: usize,
    pub region_id: String,
    pub score: f64,
    /// 1 is least vulnerable.
    pub rank: usize,
    /// `ω_f · norm_f` per configured feature, in config order.
    pub contributions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub features: Vec<String>,
    /// Scored regions in rank order.
    pub regions: Vec<ScoredRegion>,
    /// Features constant over the subset.
    pub degenerate_features: Vec<String>,
}

/// Scores the regions selected by `subset`; min and max are taken over the
/// subset only.
pub fn composite_score(
    table: &AttributeTable,
    config: &CompositeScoreConfig,
    subset: &[bool],
) -> Result<ScoreReport> {
    if subset.len() != table.len() {
        return Err(Error::DimensionMismatch {
            expected: table.len(),
            actual: subset.len(),
        });
    }
    let members: Vec<usize> = (0..table.len()).filter(|&i| subset[i]).collect();
    if members.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut contributions = vec![Vec::with_capacity(config.entries.len()); members.len()];
    let mut degenerate_features = Vec::new();
    for entry in &config.entries {
        let column = table.feature(&entry.feature)?;
        let values: Vec<f64> = members
            .iter()
            .map(|&i| column[i].ok_or(Error::MissingValue(i)))
            .collect::<Result<_>>()
            .map_err(|e| e.context(format!("feature \"{}\"", entry.feature)))?;
        let norm = minmax_normalize(&values);
        if norm.degenerate {
            degenerate_features.push(entry.feature.clone());
        }
        for (k, v) in norm.values.into_iter().enumerate() {
            let oriented = match entry.direction {
                Direction::LowerIsWorse if !norm.degenerate => 1.0 - v,
                _ => v,
            };
            contributions[k].push(entry.weight * oriented);
        }
    }
    let mut regions: Vec<ScoredRegion> = members
        .iter()
        .zip(contributions)
        .map(|(&i, contributions)| ScoredRegion {
            index: i,
            region_id: table.region_ids()[i].clone(),
            score: contributions.iter().sum::<f64>().clamp(0.0, 1.0),
            rank: 0,
            contributions,
        })
        .collect();
    regions.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.region_id.cmp(&b.region_id)));
    for (k, r) in regions.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    Ok(ScoreReport {
        features: config.entries.iter().map(|e| e.feature.clone()).collect(),
        regions,
        degenerate_features,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking<'a> {
    pub regions: Vec<&'a ScoredRegion>,
    /// Set when `k` exceeded the number of scored regions.
    pub truncated: bool,
}

/// The `k` least vulnerable regions, ascending by score then region id.
pub fn rank_regions(report: &ScoreReport, k: usize) -> Result<Ranking<'_>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let mut sorted: Vec<&ScoredRegion> = report.regions.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.region_id.cmp(&b.region_id)));
    let truncated = k > sorted.len();
    sorted.truncate(k);
    Ok(Ranking {
        regions: sorted,
        truncated,
    })
}

/// One row of the ranked report, with raw columns for display.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub region: String,
    pub score: f64,
    pub event_counts: Vec<Option<f64>>,
    pub outages: Option<f64>,
    pub facilities: usize,
    pub cluster_label: String,
}

/// Ranked report CSV: region, score, one column per event count, outage
/// count, facility count, cold-spot cluster label. The first line is a
/// `#` comment noting that weights come from configuration.
pub fn report_csv(event_columns: &[String], outage_column: &str, rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "# scores depend on configured feature weights and are not comparable across weight schemes\n",
    );
    out.push_str("region,score");
    for c in event_columns {
        out.push(',');
        out.push_str(&csv_field(c));
    }
    writeln!(out, ",{},facility_count,cluster", csv_field(outage_column)).unwrap();
    let opt = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
    for r in rows {
        out.push_str(&csv_field(&r.region));
        out.push(',');
        out.push_str(&format_sig6(r.score));
        for v in &r.event_counts {
            out.push(',');
            out.push_str(&opt(*v));
        }
        writeln!(
            out,
            ",{},{},{}",
            opt(r.outages),
            r.facilities,
            csv_field(&r.cluster_label)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Description {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn describe(values: &[f64]) -> Result<Description> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingValue(i));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Description {
        count: values.len(),
        mean,
        std,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

/// Linear interpolation between order statistics at `h = (n − 1)·q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(columns: &[(&str, &[f64])]) -> AttributeTable {
        let n = columns[0].1.len();
        let mut t = AttributeTable::new((0..n).map(|i| format!("r{i}")).collect());
        for (name, values) in columns {
            t.insert(*name, values.iter().map(|&v| Some(v)).collect()).unwrap();
        }
        t
    }

    #[test]
    fn minmax_endpoints_and_linearity() {
        assert_eq!(minmax_normalize(&[2.0, 5.0, 8.0]).values, vec![0.0, 0.5, 1.0]);
        let c = minmax_normalize(&[3.0, 3.0]);
        assert_eq!(c.values, vec![0.0, 0.0]);
        assert!(c.degenerate);
    }

    #[test]
    fn single_feature_midpoint() {
        let t = table(&[("a", &[0.0, 5.0, 10.0])]);
        let cfg = CompositeScoreConfig::new(vec![ScoreEntry::new("a", 1.0, Direction::HigherIsWorse)])
            .unwrap();
        let r = composite_score(&t, &cfg, &[true; 3]).unwrap();
        let mid = r.regions.iter().find(|s| s.region_id == "r1").unwrap();
        assert_eq!(mid.score, 0.5);
    }

    #[test]
    fn best_region_scores_zero() {
        let t = table(&[("hazard", &[1.0, 9.0, 4.0]), ("resilience", &[80.0, 10.0, 40.0])]);
        let cfg = CompositeScoreConfig::new(vec![
            ScoreEntry::new("hazard", 0.6, Direction::HigherIsWorse),
            ScoreEntry::new("resilience", 0.4, Direction::LowerIsWorse),
        ])
        .unwrap();
        let r = composite_score(&t, &cfg, &[true; 3]).unwrap();
        assert_eq!(r.regions[0].region_id, "r0");
        assert_eq!(r.regions[0].score, 0.0);
        assert_eq!(r.regions[0].rank, 1);
        assert_eq!(r.regions[2].score, 1.0);
    }

    #[test]
    fn three_feature_dot_product() {
        // Region r1 normalizes to (1.0, 0.0, 0.5): 0.5·1 + 0.3·0 + 0.2·0.5 = 0.6
        let t3 = table(&[
            ("a", &[0.0, 4.0, 2.0]),
            ("b", &[7.0, 2.0, 3.0]),
            ("c", &[0.0, 5.0, 10.0]),
        ]);
        let cfg = CompositeScoreConfig::new(vec![
            ScoreEntry::new("a", 0.5, Direction::HigherIsWorse),
            ScoreEntry::new("b", 0.3, Direction::HigherIsWorse),
            ScoreEntry::new("c", 0.2, Direction::HigherIsWorse),
        ])
        .unwrap();
        let r = composite_score(&t3, &cfg, &[true; 3]).unwrap();
        let r1 = r.regions.iter().find(|s| s.region_id == "r1").unwrap();
        assert!((r1.score - 0.6).abs() < 1e-12);
        assert!((r1.contributions.iter().sum::<f64>() - r1.score).abs() < 1e-12);
    }

    #[test]
    fn subset_relative_normalization() {
        let t = table(&[("a", &[0.0, 5.0, 10.0, 100.0])]);
        let cfg = CompositeScoreConfig::new(vec![ScoreEntry::new("a", 1.0, Direction::HigherIsWorse)])
            .unwrap();
        let full = composite_score(&t, &cfg, &[true; 4]).unwrap();
        let sub = composite_score(&t, &cfg, &[true, true, true, false]).unwrap();
        let score = |r: &ScoreReport, id: &str| r.regions.iter().find(|s| s.region_id == id).unwrap().score;
        assert_eq!(score(&sub, "r1"), 0.5);
        assert_eq!(score(&full, "r1"), 0.05);
    }

    #[test]
    fn score_errors() {
        let t = table(&[("a", &[0.0, 1.0])]);
        let cfg = CompositeScoreConfig::new(vec![ScoreEntry::new("b", 1.0, Direction::HigherIsWorse)])
            .unwrap();
        assert!(matches!(composite_score(&t, &cfg, &[true, true]), Err(Error::MissingFeature(_))));
        assert!(matches!(composite_score(&t, &cfg, &[false, false]), Err(Error::EmptySubset)));
        assert!(matches!(
            CompositeScoreConfig::new(vec![ScoreEntry::new("a", 0.9, Direction::HigherIsWorse)]),
            Err(Error::WeightSumViolation(_))
        ));
    }

    #[test]
    fn degenerate_feature_warns() {
        let t = table(&[("a", &[0.0, 1.0]), ("flat", &[3.0, 3.0])]);
        let cfg = CompositeScoreConfig::new(vec![
            ScoreEntry::new("a", 0.5, Direction::HigherIsWorse),
            ScoreEntry::new("flat", 0.5, Direction::LowerIsWorse),
        ])
        .unwrap();
        let r = composite_score(&t, &cfg, &[true, true]).unwrap();
        assert_eq!(r.degenerate_features, vec!["flat"]);
        assert_eq!(r.regions[1].score, 0.5);
    }

    fn report(scores: &[(&str, f64)]) -> ScoreReport {
        ScoreReport {
            features: vec![],
            regions: scores
                .iter()
                .enumerate()
                .map(|(i, (id, s))| ScoredRegion {
                    index: i,
                    region_id: id.to_string(),
                    score: *s,
                    rank: 0,
                    contributions: vec![],
                })
                .collect(),
            degenerate_features: vec![],
        }
    }

    #[test]
    fn rank_sorts_and_breaks_ties_by_id() {
        let r = report(&[("B", 0.2), ("A", 0.1), ("C", 0.3)]);
        let top = rank_regions(&r, 2).unwrap();
        let ids: Vec<_> = top.regions.iter().map(|s| s.region_id.as_str()).collect();
        assert_eq!(ids, vec!["A", "B"]);
        let tie = report(&[("X", 0.1), ("A", 0.1)]);
        assert_eq!(rank_regions(&tie, 1).unwrap().regions[0].region_id, "A");
        let all = rank_regions(&r, 10).unwrap();
        assert!(all.truncated && all.regions.len() == 3);
        assert!(matches!(rank_regions(&r, 0), Err(Error::InvalidK)));
    }

    #[test]
    fn report_row_schema() {
        let events: Vec<String> = [
            "Earthquake Events",
            "Hurricane Events",
            "Tornado Events",
            "Wild Fire Events",
            "Coastal Flooding Events",
            "Riverine Flooding events",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let row = ReportRow {
            region: "Koochiching, Minnesota".into(),
            score: 0.091,
            event_counts: vec![Some(0.0), Some(0.0), Some(1.0), Some(0.0), Some(0.0), Some(0.0)],
            outages: Some(538.0),
            facilities: 0,
            cluster_label: "EPO".into(),
        };
        let csv = report_csv(&events, "Total Power outages", &[row]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with('#'));
        assert_eq!(lines[1].split(',').count(), 11);
        assert_eq!(lines[2], "\"Koochiching, Minnesota\",0.091,0,0,1,0,0,0,538,0,EPO");
    }

    #[test]
    fn config_text_round_trip() {
        let text = "# weights\nhurricane_risk,0.6,HIGHER_IS_WORSE\ncommunity_resilience,0.4,LOWER_IS_WORSE\nweights_sum=1.0\n";
        let cfg = CompositeScoreConfig::parse(text).unwrap();
        assert_eq!(cfg.entries()[1].direction, Direction::LowerIsWorse);
        assert_eq!(CompositeScoreConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(matches!(
            CompositeScoreConfig::parse("a,0.5,HIGHER_IS_WORSE\n"),
            Err(Error::WeightSumViolation(_))
        ));
        assert!(CompositeScoreConfig::parse("a,1.0,SIDEWAYS\n").is_err());
    }

    #[test]
    fn default_weights_sum_to_one() {
        let cfg = CompositeScoreConfig::default_for(
            &["earthquake", "hurricane", "tornado"],
            &["total_outages", "duration"],
            "earthquake",
            ["building_value", "agriculture_value"],
            "social_vulnerability",
            "community_resilience",
        )
        .unwrap();
        let eq = cfg.entries().iter().find(|e| e.feature == "earthquake").unwrap();
        assert!((eq.weight - (0.25 + 0.09)).abs() < 1e-12);
        let cr = cfg.entries().last().unwrap();
        assert_eq!(cr.direction, Direction::LowerIsWorse);
    }

    #[test]
    fn describe_examples() {
        let d = describe(&[5.0]).unwrap();
        assert_eq!((d.mean, d.std, d.min, d.max), (5.0, 0.0, 5.0, 5.0));
        let d = describe(&[0.0, 100.0]).unwrap();
        assert_eq!((d.mean, d.std), (50.0, 50.0));
        // h = 3q: 0.75 → 1.75, 1.5 → 2.5, 2.25 → 3.25
        let d = describe(&[4.0, 2.0, 3.0, 1.0]).unwrap();
        assert_eq!((d.q1, d.median, d.q3), (1.75, 2.5, 3.25));
        assert!(matches!(describe(&[]), Err(Error::EmptyInput)));
    }
}
