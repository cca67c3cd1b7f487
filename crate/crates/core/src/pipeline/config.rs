use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autocorr::{ClusterClass, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS, MIN_PERMUTATIONS};
use crate::error::{Error, Result};
use crate::lattice::DEFAULT_ID_PROPERTY;
use crate::weights::{Contiguity, DEFAULT_SNAP_TOLERANCE};

/// A declarative run, normally read from TOML. Relative paths resolve
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: PathBuf,
    #[serde(default = "default_id_property")]
    pub id_property: String,
    #[serde(default)]
    pub attributes: Vec<AttributeSource>,
    #[serde(default)]
    pub points: Option<PathBuf>,
    #[serde(default)]
    pub contiguity: ContiguityRule,
    #[serde(default = "default_snap")]
    pub snap_tolerance: f64,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub fdr: bool,
    /// Attribute values read as MISSING, e.g. `-999`.
    #[serde(default)]
    pub missing_sentinels: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, rename = "analysis")]
    pub analyses: Vec<AnalysisSpec>,
    #[serde(default)]
    pub score: Option<ScoreSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSource {
    pub path: PathBuf,
    /// `region_id,group_id` CSV; when set, `path` is keyed by group and
    /// each group's row is copied to its regions.
    #[serde(default)]
    pub broadcast: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContiguityRule {
    #[default]
    Queen,
    Rook,
}

impl From<ContiguityRule> for Contiguity {
    fn from(rule: ContiguityRule) -> Self {
        match rule {
            ContiguityRule::Queen => Contiguity::Queen,
            ContiguityRule::Rook => Contiguity::Rook,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    /// Global Moran's I; with two features, the bivariate form.
    Global,
    Lisa,
    Bilisa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub name: String,
    pub kind: AnalysisKind,
    /// Focal feature first; for `bilisa` the second is the neighbor feature.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    /// `feature,weight,direction` file.
    #[serde(default)]
    pub weights: Option<PathBuf>,
    /// Used when `weights` is not given.
    #[serde(default)]
    pub default_weights: Option<DefaultWeights>,
    /// Analysis whose clusters select the scored regions.
    pub analysis: String,
    #[serde(default = "default_cluster")]
    pub cluster: String,
    #[serde(default)]
    pub event_columns: Vec<String>,
    pub outage_column: String,
    #[serde(default)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultWeights {
    pub hazards: Vec<String>,
    pub outages: Vec<String>,
    pub primary_hazard: String,
    pub building_value: String,
    pub agriculture_value: String,
    pub social_vulnerability: String,
    pub community_resilience: String,
}

fn default_id_property() -> String {
    DEFAULT_ID_PROPERTY.to_string()
}

fn default_snap() -> f64 {
    DEFAULT_SNAP_TOLERANCE
}

fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_cluster() -> String {
    "LL".to_string()
}

impl RunConfig {
    /// Defaults for everything but the lattice; no attributes or analyses.
    pub fn new(lattice: impl Into<PathBuf>) -> Self {
        let mut config: RunConfig = toml::from_str("lattice = \"\"").expect("defaults parse");
        config.lattice = lattice.into();
        config
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, returning it with the directory its relative
    /// paths resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.permutations < MIN_PERMUTATIONS {
            return Err(Error::InvalidPermutations(self.permutations));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if !(self.snap_tolerance >= 0.0 && self.snap_tolerance.is_finite()) {
            return bad(format!("invalid snap_tolerance {}", self.snap_tolerance));
        }
        let mut names = HashSet::new();
        for a in &self.analyses {
            if a.name.is_empty() || a.name.contains(['/', '\\']) {
                return bad(format!("invalid analysis name \"{}\"", a.name));
            }
            if !names.insert(a.name.as_str()) {
                return bad(format!("duplicate analysis name \"{}\"", a.name));
            }
            let arity_ok = match a.kind {
                AnalysisKind::Global => matches!(a.features.len(), 1 | 2),
                AnalysisKind::Lisa => a.features.len() == 1,
                AnalysisKind::Bilisa => a.features.len() == 2,
            };
            if !arity_ok {
                return bad(format!(
                    "analysis \"{}\" has {} features; global takes 1 or 2, lisa 1, bilisa 2",
                    a.name,
                    a.features.len()
                ));
            }
        }
        if let Some(score) = &self.score {
            let Some(target) = self.analyses.iter().find(|a| a.name == score.analysis) else {
                return bad(format!("score references unknown analysis \"{}\"", score.analysis));
            };
            if target.kind == AnalysisKind::Global {
                return bad(format!(
                    "score analysis \"{}\" must be lisa or bilisa",
                    score.analysis
                ));
            }
            score.cluster_class()?;
            if score.weights.is_none() == score.default_weights.is_none() {
                return bad("score needs exactly one of weights or default_weights".into());
            }
            if score.top_k == Some(0) {
                return Err(Error::InvalidK);
            }
        }
        Ok(())
    }

    /// Every feature the run reads from the attribute table, in first-use order.
    pub fn required_features(&self) -> Vec<String> {
        let mut seen = Vec::new();
        let mut push = |f: &str| {
            if !seen.iter().any(|s: &String| s == f) {
                seen.push(f.to_string());
            }
        };
        for a in &self.analyses {
            a.features.iter().for_each(|f| push(f));
        }
        if let Some(s) = &self.score {
            if let Some(d) = &s.default_weights {
                d.hazards.iter().chain(&d.outages).for_each(|f| push(f));
                for f in [
                    &d.building_value,
                    &d.agriculture_value,
                    &d.social_vulnerability,
                    &d.community_resilience,
                ] {
                    push(f);
                }
            }
            s.event_columns.iter().for_each(|f| push(f));
            push(&s.outage_column);
        }
        seen
    }

    /// Canonical serialization used for the config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

impl ScoreSection {
    pub fn cluster_class(&self) -> Result<ClusterClass> {
        self.cluster.parse()
    }
}
