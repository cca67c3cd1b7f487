use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use esda_core::numfmt::format_sig6;
use esda_core::pipeline::{
    emit_geojson, global_csv, lisa_csv, run_prepared, AnalysisKind, AnalysisSpec, AttributeSource,
    ContiguityRule, RunConfig,
};
use esda_core::scoring::describe;
use esda_core::{build_contiguity, ClusterClass, Error, Result};

/// Exploratory spatial data analysis over polygon lattices.
///
/// Every flag can also be set through an `ENGINE_*` environment variable,
/// e.g. `ENGINE_SEED=7`.
#[derive(Parser)]
#[command(name = "engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis in a config file and write all artifacts.
    Run(RunArgs),
    /// Build contiguity weights for a lattice.
    Weights(WeightsArgs),
    /// Local (or bivariate local) Moran's I for one feature.
    Lisa(LisaArgs),
    /// Composite score over one cluster class of a local analysis.
    Score(ScoreArgs),
    /// Descriptive statistics of a feature.
    Describe(DescribeArgs),
    /// Write the synthetic demo fixture.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "ENGINE_CONFIG")]
    config: PathBuf,
    #[arg(long, env = "ENGINE_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "ENGINE_PERMUTATIONS")]
    permutations: Option<usize>,
    #[arg(long, env = "ENGINE_ALPHA")]
    alpha: Option<f64>,
    /// Relative to the working directory, unlike paths inside the config.
    #[arg(long, env = "ENGINE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Queen,
    Rook,
}

impl From<Rule> for ContiguityRule {
    fn from(rule: Rule) -> Self {
        match rule {
            Rule::Queen => ContiguityRule::Queen,
            Rule::Rook => ContiguityRule::Rook,
        }
    }
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long, env = "ENGINE_LATTICE")]
    lattice: PathBuf,
    #[arg(long, env = "ENGINE_ID_PROPERTY", default_value = esda_core::lattice::DEFAULT_ID_PROPERTY)]
    id_property: String,
    #[arg(long, env = "ENGINE_RULE", value_enum, default_value_t = Rule::Queen)]
    rule: Rule,
    #[arg(long, env = "ENGINE_SNAP_TOLERANCE", default_value_t = esda_core::weights::DEFAULT_SNAP_TOLERANCE)]
    snap_tolerance: f64,
    /// Keep binary weights instead of row-standardizing.
    #[arg(long, env = "ENGINE_BINARY")]
    binary: bool,
    #[arg(long, env = "ENGINE_OUT")]
    out: PathBuf,
}

/// Inputs either from a run config or given directly.
#[derive(Args)]
struct InputArgs {
    /// Take lattice, attributes and inference settings from a run config.
    #[arg(long, env = "ENGINE_CONFIG", conflicts_with_all = ["lattice", "attributes"])]
    config: Option<PathBuf>,
    #[arg(long, env = "ENGINE_LATTICE", required_unless_present = "config")]
    lattice: Option<PathBuf>,
    /// Attribute CSV keyed by region id; repeatable.
    #[arg(long, env = "ENGINE_ATTRIBUTES", value_delimiter = ',')]
    attributes: Vec<PathBuf>,
    #[arg(long, env = "ENGINE_ID_PROPERTY")]
    id_property: Option<String>,
    #[arg(long, env = "ENGINE_RULE", value_enum)]
    rule: Option<Rule>,
    #[arg(long, env = "ENGINE_MISSING_SENTINEL", value_delimiter = ',', allow_negative_numbers = true)]
    missing_sentinel: Vec<f64>,
    #[arg(long, env = "ENGINE_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "ENGINE_PERMUTATIONS")]
    permutations: Option<usize>,
    #[arg(long, env = "ENGINE_ALPHA")]
    alpha: Option<f64>,
    /// Benjamini–Hochberg false discovery rate control.
    #[arg(long, env = "ENGINE_FDR")]
    fdr: bool,
}

#[derive(Args)]
struct LisaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, env = "ENGINE_FEATURE")]
    feature: String,
    /// Neighbor feature for the bivariate statistic.
    #[arg(long = "with", env = "ENGINE_WITH")]
    with: Option<String>,
    /// CSV destination; stdout when omitted.
    #[arg(long, env = "ENGINE_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "ENGINE_GEOJSON")]
    geojson: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, env = "ENGINE_CONFIG")]
    config: PathBuf,
    /// `<analysis>:<class>`, e.g. `EPO:LL`.
    #[arg(long, env = "ENGINE_SUBSET")]
    subset: Option<String>,
    #[arg(long, env = "ENGINE_TOP_K")]
    top_k: Option<usize>,
    #[arg(long, env = "ENGINE_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "ENGINE_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DescribeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Repeatable.
    #[arg(long, env = "ENGINE_FEATURE", value_delimiter = ',', required = true)]
    feature: Vec<String>,
    /// Restrict to `<analysis>:<class>` of an analysis in the config.
    #[arg(long, env = "ENGINE_SUBSET", requires = "config")]
    subset: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, env = "ENGINE_OUT_DIR")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Weights(a) => cmd_weights(a),
        Command::Lisa(a) => cmd_lisa(a),
        Command::Score(a) => cmd_score(a),
        Command::Describe(a) => cmd_describe(a),
        Command::Synth(a) => esda_core::synthetic::write_demo_fixture(&a.out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (mut config, base) = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(m) = args.permutations {
        config.permutations = m;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if let Some(dir) = args.output_dir {
        config.output_dir = absolute(&dir)?;
    }
    let prepared = esda_core::pipeline::prepare(config, &base)?;
    let summary = run_prepared(&prepared)?;
    for a in &summary.computed.analyses {
        eprintln!(
            "{}: I = {} (p = {}, n_eff = {})",
            a.spec.name,
            format_sig6(a.global.statistic),
            format_sig6(a.global.pseudo_p),
            a.global.n_eff
        );
    }
    println!("{}", summary.output_dir.display());
    for f in &summary.files {
        println!("  {f}");
    }
    Ok(())
}

fn absolute(path: &Path) -> Result<PathBuf> {
    if path.is_absolute() {
        return Ok(path.to_path_buf());
    }
    let cwd = std::env::current_dir().map_err(|e| Error::Io {
        path: ".".into(),
        source: e,
    })?;
    Ok(cwd.join(path))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            }),
    }
}

fn cmd_weights(args: WeightsArgs) -> Result<()> {
    let bytes = std::fs::read(&args.lattice).map_err(|e| Error::Io {
        path: args.lattice.clone(),
        source: e,
    })?;
    let lattice = esda_core::parse_lattice(&bytes, &args.id_property)
        .map_err(|e| e.context(args.lattice.display().to_string()))?;
    let rule = ContiguityRule::from(args.rule).into();
    let mut weights = build_contiguity(&lattice, rule, args.snap_tolerance)?;
    if !args.binary {
        weights = weights.row_standardize();
    }
    let islands = weights.islands();
    if !islands.is_empty() {
        eprintln!("{} island(s) with no neighbors", islands.len());
    }
    write_file(&args.out, &weights.to_csv())
}

/// Config for an ad hoc command, with the directory its paths resolve against.
fn input_config(input: &InputArgs, analyses: Vec<AnalysisSpec>) -> Result<(RunConfig, PathBuf)> {
    let (mut config, base) = match &input.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let lattice = input.lattice.clone().expect("required by clap");
            let mut config = RunConfig::new(lattice);
            config.attributes = input
                .attributes
                .iter()
                .map(|p| AttributeSource {
                    path: p.clone(),
                    broadcast: None,
                })
                .collect();
            (config, PathBuf::from("."))
        }
    };
    if let Some(p) = &input.id_property {
        config.id_property = p.clone();
    }
    if let Some(rule) = input.rule {
        config.contiguity = rule.into();
    }
    if !input.missing_sentinel.is_empty() {
        config.missing_sentinels = input.missing_sentinel.clone();
    }
    if let Some(seed) = input.seed {
        config.seed = seed;
    }
    if let Some(m) = input.permutations {
        config.permutations = m;
    }
    if let Some(alpha) = input.alpha {
        config.alpha = alpha;
    }
    config.fdr |= input.fdr;
    config.analyses = analyses;
    config.score = None;
    Ok((config, base))
}

fn cmd_lisa(args: LisaArgs) -> Result<()> {
    let (kind, features, name) = match &args.with {
        None => (AnalysisKind::Lisa, vec![args.feature.clone()], args.feature.clone()),
        Some(w) => (
            AnalysisKind::Bilisa,
            vec![args.feature.clone(), w.clone()],
            format!("{}_x_{}", args.feature, w),
        ),
    };
    let spec = AnalysisSpec {
        name,
        kind,
        features,
    };
    let (config, base) = input_config(&args.input, vec![spec.clone()])?;
    let prepared = esda_core::pipeline::prepare(config, &base)?;
    let (table, _) = prepared.impute(&spec.features)?;
    let output = prepared.analyze(&table, &spec)?;
    let lisa = output.lisa.as_ref().expect("local analysis");
    eprint!("{}", global_csv(&spec.name, &spec.features, &output.global));
    for class in ClusterClass::ALL {
        eprintln!("{class}: {}", lisa.count(class));
    }
    if let Some(path) = &args.geojson {
        write_file(path, &emit_geojson(&prepared.lattice, lisa)?)?;
    }
    emit(args.out.as_deref(), &lisa_csv(&prepared.lattice.ids(), lisa))
}

fn parse_subset(text: &str) -> Result<(String, ClusterClass)> {
    let (analysis, class) = text
        .rsplit_once(':')
        .ok_or_else(|| Error::Config(format!("subset \"{text}\" is not <analysis>:<class>")))?;
    Ok((analysis.to_string(), class.parse()?))
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let (mut config, base) = RunConfig::load(&args.config)?;
    let Some(section) = config.score.as_mut() else {
        return Err(Error::Config("config has no [score] section".into()));
    };
    if let Some(subset) = &args.subset {
        let (analysis, class) = parse_subset(subset)?;
        section.analysis = analysis;
        section.cluster = class.label().to_string();
    }
    if args.top_k.is_some() {
        section.top_k = args.top_k;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let target = section.analysis.clone();
    config.analyses.retain(|a| a.name == target);
    let prepared = esda_core::pipeline::prepare(config, &base)?;
    let computed = prepared.compute()?;
    let score = computed.score.expect("score section present");
    emit(args.out.as_deref(), &score.csv)
}

fn cmd_describe(args: DescribeArgs) -> Result<()> {
    let subset = args.subset.as_deref().map(parse_subset).transpose()?;
    let analyses = match (&subset, &args.input.config) {
        (Some((name, _)), Some(path)) => {
            let (config, _) = RunConfig::load(path)?;
            config.analyses.into_iter().filter(|a| &a.name == name).collect()
        }
        _ => Vec::new(),
    };
    if let Some((name, _)) = &subset {
        if analyses.is_empty() {
            return Err(Error::Config(format!("unknown analysis \"{name}\"")));
        }
    }
    let (config, base) = input_config(&args.input, analyses)?;
    let prepared = esda_core::pipeline::prepare(config, &base)?;
    let mask: Option<Vec<bool>> = match &subset {
        None => None,
        Some((_, class)) => {
            let computed = prepared.compute()?;
            let lisa = computed.analyses[0]
                .lisa
                .as_ref()
                .ok_or_else(|| Error::Config("subset analysis must be lisa or bilisa".into()))?;
            Some(lisa.clusters.iter().map(|c| c == class).collect())
        }
    };
    let mut out = String::from("feature,count,missing,mean,std,min,q1,median,q3,max\n");
    for feature in &args.feature {
        let column = prepared.table.feature(feature)?;
        let selected: Vec<Option<f64>> = column
            .iter()
            .enumerate()
            .filter(|(i, _)| mask.as_ref().is_none_or(|m| m[*i]))
            .map(|(_, v)| *v)
            .collect();
        let values: Vec<f64> = selected.iter().flatten().copied().collect();
        let missing = selected.len() - values.len();
        let d = describe(&values).map_err(|e| e.context(format!("feature \"{feature}\"")))?;
        out.push_str(&format!(
            "{feature},{},{missing},{},{},{},{},{},{},{}\n",
            d.count,
            format_sig6(d.mean),
            format_sig6(d.std),
            format_sig6(d.min),
            format_sig6(d.q1),
            format_sig6(d.median),
            format_sig6(d.q3),
            format_sig6(d.max)
        ));
    }
    emit(None, &out)
}
