//! Declarative end-to-end runs: ingest, weights, imputation, global and
//! local statistics, facility tallies, scoring, and artifact emission.
//!
//! Everything is computed in memory first; files are written only once
//! every analysis has succeeded, and files already written are removed if
//! a later write fails.

mod config;
mod emit;
mod tally;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attributes::{parse_attributes, parse_broadcast_attributes, AttributeOptions, AttributeTable};
use crate::autocorr::{
    bivariate_local_moran, global_bivariate_moran_inference, global_moran_inference, local_moran,
    ClusterClass, Inference, LisaOptions, LisaResult, MoranResult,
};
use crate::error::{Error, Result, ResultExt};
use crate::impute::{impute_missing, ImputedValue};
use crate::lattice::{parse_lattice, RegionLattice};
use crate::points::{parse_points, spatial_join, JoinAssignment, PointSet};
use crate::scoring::{
    composite_score, rank_regions, report_csv, CompositeScoreConfig, ReportRow, ScoreReport,
};
use crate::weights::{build_contiguity, SpatialWeights};

pub use config::{
    AnalysisKind, AnalysisSpec, AttributeSource, ContiguityRule, DefaultWeights, RunConfig,
    ScoreSection,
};
pub use emit::{emit_geojson, global_csv, imputation_audit_csv, lisa_csv};
pub use tally::{facilities_per_region, tally_points_by_class, TallyTable};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const AUDIT_FILE: &str = "imputation_audit.csv";
pub const SCORE_FILE: &str = "score_report.csv";

/// Imputed entries of one feature.
pub type FeatureAudit = (String, Vec<ImputedValue>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub engine_version: String,
    /// SHA-256 over the canonical config and every input file.
    pub config_hash: String,
    pub seed: u64,
    pub permutations: usize,
    pub alpha: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Parsed inputs of a run, before any statistics.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub lattice: RegionLattice,
    /// Attributes as read, MISSING preserved.
    pub table: AttributeTable,
    pub points: Option<PointSet>,
    pub assignment: Option<JoinAssignment>,
    /// Row-standardized contiguity weights.
    pub weights: SpatialWeights,
    pub score_config: Option<CompositeScoreConfig>,
    pub inputs: Vec<FileDigest>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub spec: AnalysisSpec,
    pub global: MoranResult,
    pub lisa: Option<LisaResult>,
    pub tally: Option<TallyTable>,
}

#[derive(Debug, Clone)]
pub struct ScoreOutput {
    pub report: ScoreReport,
    pub csv: String,
}

#[derive(Debug, Clone)]
pub struct Computed {
    /// Attributes after imputation of every analysed or scored feature.
    pub table: AttributeTable,
    pub imputations: Vec<FeatureAudit>,
    pub analyses: Vec<AnalysisOutput>,
    pub score: Option<ScoreOutput>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    /// Written file names, manifest last.
    pub files: Vec<String>,
    pub manifest: Manifest,
    pub computed: Computed,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_input(base: &Path, rel: &Path, inputs: &mut Vec<FileDigest>) -> Result<Vec<u8>> {
    let path = base.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    inputs.push(FileDigest {
        path: rel.display().to_string(),
        sha256: sha256_hex(&bytes),
    });
    Ok(bytes)
}

/// Reads and validates every input named by `config`.
pub fn prepare(config: RunConfig, base_dir: &Path) -> Result<Prepared> {
    config.validate()?;
    let mut inputs = Vec::new();
    let ctx = |p: &Path| p.display().to_string();

    let bytes = read_input(base_dir, &config.lattice, &mut inputs)?;
    let lattice = parse_lattice(&bytes, &config.id_property).context(|| ctx(&config.lattice))?;
    let universe = lattice.ids();

    let options = AttributeOptions {
        missing_sentinels: config.missing_sentinels.clone(),
    };
    let mut table = AttributeTable::new(universe.clone());
    for source in &config.attributes {
        let bytes = read_input(base_dir, &source.path, &mut inputs)?;
        let part = match &source.broadcast {
            None => parse_attributes(&bytes, &universe, &options),
            Some(map) => {
                let mapping = read_input(base_dir, map, &mut inputs)?;
                parse_broadcast_attributes(&bytes, &mapping, &universe, &options)
                    .context(|| format!("broadcast via {}", ctx(map)))
            }
        }
        .context(|| ctx(&source.path))?;
        table.merge(part).context(|| ctx(&source.path))?;
    }
    for feature in config.required_features() {
        table.feature(&feature)?;
    }

    let (points, assignment) = match &config.points {
        None => (None, None),
        Some(path) => {
            let bytes = read_input(base_dir, path, &mut inputs)?;
            let points = parse_points(&bytes).context(|| ctx(path))?;
            let assignment = spatial_join(&points, &lattice);
            (Some(points), Some(assignment))
        }
    };

    let weights = build_contiguity(&lattice, config.contiguity.into(), config.snap_tolerance)?
        .row_standardize();

    let score_config = match &config.score {
        None => None,
        Some(section) => Some(match (&section.weights, &section.default_weights) {
            (Some(path), _) => {
                let bytes = read_input(base_dir, path, &mut inputs)?;
                let text = String::from_utf8(bytes)
                    .map_err(|e| Error::Config(e.to_string()))
                    .context(|| ctx(path))?;
                CompositeScoreConfig::parse(&text).context(|| ctx(path))?
            }
            (None, Some(d)) => {
                let hazards: Vec<&str> = d.hazards.iter().map(String::as_str).collect();
                let outages: Vec<&str> = d.outages.iter().map(String::as_str).collect();
                CompositeScoreConfig::default_for(
                    &hazards,
                    &outages,
                    &d.primary_hazard,
                    [&d.building_value, &d.agriculture_value],
                    &d.social_vulnerability,
                    &d.community_resilience,
                )?
            }
            (None, None) => unreachable!("validated"),
        }),
    };
    if let Some(sc) = &score_config {
        for entry in sc.entries() {
            table.feature(&entry.feature).context(|| "score weights".to_string())?;
        }
    }

    Ok(Prepared {
        config,
        base_dir: base_dir.to_path_buf(),
        lattice,
        table,
        points,
        assignment,
        weights,
        score_config,
        inputs,
    })
}

impl Prepared {
    pub fn load(config_path: &Path) -> Result<Self> {
        let (config, base) = RunConfig::load(config_path)?;
        prepare(config, &base)
    }

    pub fn lisa_options(&self) -> LisaOptions {
        LisaOptions {
            inference: self.inference(),
            alpha: self.config.alpha,
            fdr: self.config.fdr,
        }
    }

    pub fn inference(&self) -> Inference {
        Inference::monte_carlo(self.config.permutations, self.config.seed)
    }

    /// SHA-256 over the canonical config followed by each input's path and digest.
    pub fn config_hash(&self) -> String {
        let mut text = self.config.canonical_json();
        for input in &self.inputs {
            text.push('\n');
            text.push_str(&input.path);
            text.push('\t');
            text.push_str(&input.sha256);
        }
        sha256_hex(text.as_bytes())
    }

    /// Features that must be complete: analysed features and scored features.
    pub fn features_to_impute(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let from_score = self
            .score_config
            .iter()
            .flat_map(|c| c.entries().iter().map(|e| &e.feature));
        for f in self.config.analyses.iter().flat_map(|a| &a.features).chain(from_score) {
            if !out.contains(f) {
                out.push(f.clone());
            }
        }
        out
    }

    /// Copy of the attribute table with `features` imputed from neighbors.
    pub fn impute(&self, features: &[String]) -> Result<(AttributeTable, Vec<FeatureAudit>)> {
        let mut table = self.table.clone();
        let mut audit = Vec::new();
        for feature in features {
            let result = impute_missing(self.table.feature(feature)?, &self.weights)
                .context(|| format!("imputing \"{feature}\""))?;
            table.insert(feature.clone(), result.values.into_iter().map(Some).collect())?;
            audit.push((feature.clone(), result.imputed));
        }
        Ok((table, audit))
    }

    pub fn analyze(&self, table: &AttributeTable, spec: &AnalysisSpec) -> Result<AnalysisOutput> {
        let run = || -> Result<AnalysisOutput> {
            let x = table.complete_feature(&spec.features[0])?;
            let y = match spec.features.get(1) {
                Some(f) => Some(table.complete_feature(f)?),
                None => None,
            };
            let global = match &y {
                None => global_moran_inference(&x, &self.weights, self.inference())?,
                Some(y) => global_bivariate_moran_inference(&x, y, &self.weights, self.inference())?,
            };
            let lisa = match (spec.kind, &y) {
                (AnalysisKind::Global, _) => None,
                (AnalysisKind::Lisa, _) => Some(local_moran(&x, &self.weights, self.lisa_options())?),
                (AnalysisKind::Bilisa, Some(y)) => {
                    Some(bivariate_local_moran(&x, y, &self.weights, self.lisa_options())?)
                }
                (AnalysisKind::Bilisa, None) => unreachable!("validated"),
            };
            let tally = match (&lisa, &self.assignment) {
                (Some(l), Some(a)) => Some(tally_points_by_class(a, l)?),
                _ => None,
            };
            Ok(AnalysisOutput {
                spec: spec.clone(),
                global,
                lisa,
                tally,
            })
        };
        run().context(|| format!("analysis \"{}\"", spec.name))
    }

    /// Scores the regions in `class` of the local analysis `analysis`.
    pub fn score(
        &self,
        table: &AttributeTable,
        analysis: &AnalysisOutput,
        class: ClusterClass,
    ) -> Result<ScoreOutput> {
        let (Some(section), Some(config)) = (&self.config.score, &self.score_config) else {
            return Err(Error::Config("no [score] section".into()));
        };
        let lisa = analysis.lisa.as_ref().ok_or_else(|| {
            Error::Config(format!("analysis \"{}\" has no local clusters", analysis.spec.name))
        })?;
        let subset: Vec<bool> = lisa.clusters.iter().map(|&c| c == class).collect();
        let report = composite_score(table, config, &subset)
            .context(|| format!("scoring {}:{}", analysis.spec.name, class))?;
        let k = section.top_k.unwrap_or(report.regions.len().max(1));
        let ranking = rank_regions(&report, k)?;
        let facilities = self
            .assignment
            .as_ref()
            .map(|a| facilities_per_region(a, self.lattice.len()))
            .unwrap_or_else(|| vec![0; self.lattice.len()]);
        let events: Vec<&[Option<f64>]> = section
            .event_columns
            .iter()
            .map(|c| table.feature(c))
            .collect::<Result<_>>()?;
        let outages = table.feature(&section.outage_column)?;
        let rows: Vec<ReportRow> = ranking
            .regions
            .iter()
            .map(|r| ReportRow {
                region: r.region_id.clone(),
                score: r.score,
                event_counts: events.iter().map(|col| col[r.index]).collect(),
                outages: outages[r.index],
                facilities: facilities[r.index],
                cluster_label: analysis.spec.name.clone(),
            })
            .collect();
        let csv = report_csv(&section.event_columns, &section.outage_column, &rows);
        Ok(ScoreOutput { report, csv })
    }

    /// Imputes, runs every analysis and the score, without touching disk.
    pub fn compute(&self) -> Result<Computed> {
        let (table, imputations) = self.impute(&self.features_to_impute())?;
        let analyses: Vec<AnalysisOutput> = self
            .config
            .analyses
            .par_iter()
            .map(|spec| self.analyze(&table, spec))
            .collect::<Result<_>>()?;
        let score = match &self.config.score {
            None => None,
            Some(section) => {
                let target = analyses
                    .iter()
                    .find(|a| a.spec.name == section.analysis)
                    .expect("validated");
                Some(self.score(&table, target, section.cluster_class()?)?)
            }
        };
        Ok(Computed {
            table,
            imputations,
            analyses,
            score,
        })
    }

    /// Output files in write order, excluding the manifest.
    pub fn render(&self, computed: &Computed) -> Result<Vec<(String, Vec<u8>)>> {
        let ids = self.lattice.ids();
        let mut files = Vec::new();
        for a in &computed.analyses {
            let name = &a.spec.name;
            files.push((
                format!("{name}_global.csv"),
                global_csv(name, &a.spec.features, &a.global).into_bytes(),
            ));
            if let Some(lisa) = &a.lisa {
                files.push((format!("{name}_lisa.csv"), lisa_csv(&ids, lisa).into_bytes()));
                files.push((
                    format!("{name}_clusters.geojson"),
                    emit_geojson(&self.lattice, lisa)?.into_bytes(),
                ));
            }
            if let Some(tally) = &a.tally {
                files.push((format!("{name}_tally.csv"), tally.to_csv().into_bytes()));
            }
        }
        files.push((
            AUDIT_FILE.to_string(),
            imputation_audit_csv(&computed.imputations, &ids).into_bytes(),
        ));
        if let Some(score) = &computed.score {
            files.push((SCORE_FILE.to_string(), score.csv.clone().into_bytes()));
        }
        Ok(files)
    }

    pub fn manifest(&self, files: &[(String, Vec<u8>)]) -> Manifest {
        Manifest {
            engine_version: ENGINE_VERSION.to_string(),
            config_hash: self.config_hash(),
            seed: self.config.seed,
            permutations: self.config.permutations,
            alpha: self.config.alpha,
            inputs: self.inputs.clone(),
            outputs: files
                .iter()
                .map(|(name, bytes)| FileDigest {
                    path: name.clone(),
                    sha256: sha256_hex(bytes),
                })
                .collect(),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.output_dir)
    }
}

/// Writes `files` into `dir`. On failure, files written by this call are removed.
pub fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, bytes) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(())
}

/// Full run: prepare, compute, write every artifact plus the manifest.
pub fn run(config: RunConfig, base_dir: &Path) -> Result<RunSummary> {
    let prepared = prepare(config, base_dir)?;
    run_prepared(&prepared)
}

pub fn run_file(config_path: &Path) -> Result<RunSummary> {
    run_prepared(&Prepared::load(config_path)?)
}

pub fn run_prepared(prepared: &Prepared) -> Result<RunSummary> {
    let computed = prepared.compute()?;
    let mut files = prepared.render(&computed)?;
    let manifest = prepared.manifest(&files);
    let mut manifest_text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json(e.to_string()))?;
    manifest_text.push('\n');
    files.push((MANIFEST_FILE.to_string(), manifest_text.into_bytes()));
    let output_dir = prepared.output_dir();
    write_outputs(&output_dir, &files)?;
    Ok(RunSummary {
        output_dir,
        files: files.into_iter().map(|(name, _)| name).collect(),
        manifest,
        computed,
    })
}
