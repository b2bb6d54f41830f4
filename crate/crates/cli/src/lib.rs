//! Command-line front end: constellation dumps, error-rate curves and
//! semantic payload experiments, all written to files.
//!
//! Every output is a pure function of the command line (including `--seed`);
//! `--workers` only changes how fast it is produced.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ibpqam::channel::{snr_to_sigma2, ChannelParams};
use ibpqam::constellation::analytic_energy;
use ibpqam::montecarlo::{sweep, SweepGrid, SweepRecord};
use ibpqam::semantic::{
    heatmap_distance, synth_payload, transmit_payload, HeatmapCounts, LinkOutcome, MaskStrategy,
    SemanticRecord, DEFAULT_TAU,
};
use ibpqam::{Constellation, ConstellationSpec, Normalization, Scheme};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const CONSTELLATION_SCHEMA: &str = "# ibpqam constellation v1";
const CURVES_SCHEMA: &str = "# ibpqam curves v1";
const HEATMAP_SCHEMA: &str = "# ibpqam heatmap v1";

#[derive(Debug)]
pub enum CliError {
    /// Bad argument values; nothing was written.
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "invalid arguments: {msg}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "ibpqam",
    version,
    about = "Important-bit-prefixed QAM link toolkit"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores). Does not affect outputs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump a constellation with labels and point classes.
    Constellation(ConstellationArgs),
    /// Monte Carlo, closed-form and exact SER/ISER/USER over a parameter grid.
    Curves(CurvesArgs),
    /// Send a semantic payload over both schemes and compare.
    Semantic(SemanticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Ibp,
    Mqam,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Ibp => Scheme::Ibp,
            SchemeArg::Mqam => Scheme::Mqam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    /// Index fields important.
    Index,
    /// Dominant entry important.
    Topic,
}

impl From<MaskArg> for MaskStrategy {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::Index => MaskStrategy::IndexImportant,
            MaskArg::Topic => MaskStrategy::TopicBranch,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConstellationArgs {
    #[arg(long, value_enum, default_value = "ibp")]
    pub scheme: SchemeArg,
    #[arg(short = 'M', default_value_t = 64)]
    pub order: u32,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ibp,mqam")]
    pub schemes: Vec<SchemeArg>,
    #[arg(short = 'M', value_delimiter = ',', default_value = "64")]
    pub orders: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub alphas: Vec<f64>,
    /// SNR grid in dB as `start:stop:step` (endpoints inclusive) or a single value.
    #[arg(long = "snr-db", default_value = "0:30:2")]
    pub snr_db: String,
    #[arg(long, default_value_t = 100_000)]
    pub symbols: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SemanticArgs {
    /// JSON payload: `[{"entries": [[index, weight], ...]}, ...]`.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub payload: Option<PathBuf>,
    /// Generate this many synthetic records instead of reading a payload.
    #[arg(long)]
    pub synth: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub concentration: f64,
    #[arg(short = 'M', default_value_t = 64)]
    pub order: u32,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Use `inf` for a noiseless link.
    #[arg(long = "snr-db", default_value_t = 12.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "index")]
    pub mask: MaskArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "out-prefix")]
    pub out_prefix: PathBuf,
}

/// Parse `start:stop:step` (inclusive within half a step) or a single value.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad SNR value '{p}': {e}"))
    };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, c] => {
            let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
            if !(start.is_finite() && stop.is_finite() && step.is_finite())
                || step <= 0.0
                || stop < start
            {
                return Err(format!(
                    "SNR grid '{s}' needs finite start <= stop and step > 0"
                ));
            }
            let count = ((stop - start) / step + 0.5).floor() as usize + 1;
            Ok((0..count).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(format!("SNR grid '{s}' is not start:stop:step")),
    }
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(usage("--workers must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.into()))?;
            Ok(pool.install(f))
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let workers = cli.workers;
    match cli.command {
        Command::Constellation(args) => cmd_constellation(&args),
        Command::Curves(args) => with_workers(workers, || cmd_curves(&args))?,
        Command::Semantic(args) => with_workers(workers, || cmd_semantic(&args))?,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn csv_bytes(schema: &str, header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut out = format!("{schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(out)
}

pub fn render_constellation(c: &Constellation) -> anyhow::Result<Vec<u8>> {
    let classes = if c.alpha() == 1.0 {
        Some(c.classify_points()?)
    } else {
        None
    };
    let rows = c
        .points()
        .iter()
        .map(|p| {
            vec![
                c.label_bits(p.label),
                p.i.to_string(),
                p.q.to_string(),
                format!("{:02b}", c.prefix_of(p.label)),
                classes
                    .as_ref()
                    .map(|k| k.per_point[p.label as usize].as_str().to_string())
                    .unwrap_or_default(),
            ]
        })
        .collect();
    csv_bytes(
        CONSTELLATION_SCHEMA,
        &["label_bits", "i", "q", "prefix_bits", "point_class"],
        rows,
    )
}

pub fn cmd_constellation(args: &ConstellationArgs) -> Result<(), CliError> {
    let spec = ConstellationSpec::new(
        args.scheme.into(),
        args.order,
        args.alpha,
        Normalization::UnitEnergy,
    )
    .map_err(usage)?;
    let c = Constellation::build(spec).map_err(usage)?;
    write_file(&args.out, &render_constellation(&c)?)?;
    Ok(())
}

pub const CURVES_HEADER: [&str; 18] = [
    "scheme",
    "M",
    "alpha",
    "snr_db",
    "ser_mc",
    "iser_mc",
    "user_mc",
    "ser_se",
    "iser_se",
    "user_se",
    "ser_analytic",
    "iser_analytic",
    "user_analytic",
    "ser_exact",
    "iser_exact",
    "user_exact",
    "ber_imp",
    "ber_unimp",
];

pub fn render_curves(records: &[SweepRecord]) -> anyhow::Result<Vec<u8>> {
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.scheme.to_string(),
                r.order.to_string(),
                r.alpha.to_string(),
                r.snr_db.to_string(),
            ];
            for set in [r.mc.rates, r.mc.std_err, r.analytic, r.exact] {
                row.extend(set.as_array().iter().map(f64::to_string));
            }
            row.push(r.mc.ber_important.to_string());
            row.push(r.mc.ber_unimportant.to_string());
            row
        })
        .collect();
    csv_bytes(CURVES_SCHEMA, &CURVES_HEADER, rows)
}

/// Validated curves grid.
pub fn curves_grid(args: &CurvesArgs) -> Result<SweepGrid, CliError> {
    let snr_db = parse_snr_grid(&args.snr_db).map_err(usage)?;
    if args.schemes.is_empty() || args.orders.is_empty() || args.alphas.is_empty() {
        return Err(usage("empty parameter list"));
    }
    if args.symbols == 0 {
        return Err(usage("--symbols must be at least 1"));
    }
    let schemes: Vec<Scheme> = args.schemes.iter().map(|&s| s.into()).collect();
    for &scheme in &schemes {
        for &order in &args.orders {
            for &alpha in &args.alphas {
                let spec = ConstellationSpec::new(scheme, order, alpha, Normalization::UnitEnergy)
                    .map_err(usage)?;
                if spec.effective_alpha() == 0.0 {
                    return Err(usage("alpha = 0 leaves suffix bits undecodable"));
                }
            }
        }
    }
    Ok(SweepGrid {
        schemes,
        orders: args.orders.clone(),
        alphas: args.alphas.clone(),
        snr_db,
    })
}

pub fn cmd_curves(args: &CurvesArgs) -> Result<(), CliError> {
    let grid = curves_grid(args)?;
    let records = sweep(&grid, args.symbols, args.seed).context("running sweep")?;
    write_file(&args.out, &render_curves(&records)?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SchemeMetrics {
    pub scheme: Scheme,
    pub alpha: f64,
    pub mean_cos_sim: f64,
    pub task_accuracy: f64,
    pub ber_important: f64,
    pub ber_unimportant: f64,
    pub symbols: usize,
    pub sanitized_weights: usize,
}

#[derive(Debug, Serialize)]
pub struct SemanticConfig {
    pub order: u32,
    pub alpha: f64,
    /// `None` for a noiseless link.
    pub snr_db: Option<f64>,
    pub tau: f64,
    pub seed: u64,
    pub mask: MaskStrategy,
    pub records: usize,
    pub source: String,
}

#[derive(Debug, Serialize)]
pub struct SemanticReport {
    pub version: u32,
    pub config: SemanticConfig,
    pub schemes: Vec<SchemeMetrics>,
    /// Total-variation distance between the two usage heatmaps over the
    /// shared alpha = 1 grid; absent when the geometries differ.
    pub heatmap_tv_distance: Option<f64>,
}

fn load_payload(path: &Path) -> anyhow::Result<Vec<SemanticRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let records: Vec<SemanticRecord> = serde_json::from_str(&text)
        .with_context(|| format!("parsing payload {}", path.display()))?;
    for (k, r) in records.iter().enumerate() {
        r.validate()
            .with_context(|| format!("payload record {k}"))?;
    }
    Ok(records)
}

pub fn render_heatmap(h: &HeatmapCounts, c: &Constellation) -> anyhow::Result<Vec<u8>> {
    let rows = c
        .points()
        .iter()
        .map(|p| {
            vec![
                c.label_bits(p.label),
                p.i.to_string(),
                p.q.to_string(),
                h.counts[p.label as usize].to_string(),
            ]
        })
        .collect();
    csv_bytes(HEATMAP_SCHEMA, &["label_bits", "i", "q", "count"], rows)
}

/// Output paths of the semantic command for a prefix.
pub fn semantic_outputs(prefix: &Path) -> [PathBuf; 3] {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    [
        with(".metrics.json"),
        with(".ibp.heatmap.csv"),
        with(".mqam.heatmap.csv"),
    ]
}

pub fn cmd_semantic(args: &SemanticArgs) -> Result<(), CliError> {
    let ibp_spec = ConstellationSpec::new(
        Scheme::Ibp,
        args.order,
        args.alpha,
        Normalization::UnitEnergy,
    )
    .map_err(usage)?;
    let qam_spec = ConstellationSpec::mqam(args.order).map_err(usage)?;
    if args.snr_db.is_nan() || args.snr_db == f64::NEG_INFINITY {
        return Err(usage("--snr-db must be a number or inf"));
    }
    if !(args.tau.is_finite() && args.tau >= 0.0) {
        return Err(usage("--tau must be a non-negative number"));
    }
    let (records, source) = match (&args.payload, args.synth) {
        (Some(path), _) => (load_payload(path)?, path.display().to_string()),
        (None, Some(n)) => (
            synth_payload(n, args.concentration, args.seed).map_err(usage)?,
            format!("synthetic(n={n}, concentration={})", args.concentration),
        ),
        (None, None) => return Err(usage("either --payload or --synth is required")),
    };
    let strategy: MaskStrategy = args.mask.into();

    let mut outcomes: Vec<(Constellation, LinkOutcome)> = Vec::new();
    for spec in [ibp_spec, qam_spec] {
        let c = Constellation::build(spec).map_err(usage)?;
        let sigma2 = snr_to_sigma2(args.snr_db, analytic_energy(c.order(), c.alpha(), c.d()));
        let channel = if sigma2 > 0.0 {
            Some(ChannelParams::new(sigma2, args.seed).map_err(|e| CliError::Runtime(e.into()))?)
        } else {
            None
        };
        let outcome = transmit_payload(&records, strategy, &c, channel.as_ref())
            .with_context(|| format!("transmitting over {}", c.scheme()))?;
        outcomes.push((c, outcome));
    }

    let schemes = outcomes
        .iter()
        .map(|(c, o)| SchemeMetrics {
            scheme: c.scheme(),
            alpha: c.alpha(),
            mean_cos_sim: o.mean_cos_sim(),
            task_accuracy: o.task_accuracy(args.tau),
            ber_important: o.ber_important,
            ber_unimportant: o.ber_unimportant,
            symbols: o.symbols,
            sanitized_weights: o.sanitized_weights(),
        })
        .collect();
    let (ci, oi) = &outcomes[0];
    let (cq, oq) = &outcomes[1];
    let heatmap_tv_distance = if ci.alpha() == 1.0 {
        Some(
            heatmap_distance(&oi.heatmap, ci, &oq.heatmap, cq)
                .map_err(|e| CliError::Runtime(e.into()))?,
        )
    } else {
        None
    };
    let report = SemanticReport {
        version: 1,
        config: SemanticConfig {
            order: args.order,
            alpha: args.alpha,
            snr_db: args.snr_db.is_finite().then_some(args.snr_db),
            tau: args.tau,
            seed: args.seed,
            mask: strategy,
            records: records.len(),
            source,
        },
        schemes,
        heatmap_tv_distance,
    };

    let [metrics, ibp_heat, qam_heat] = semantic_outputs(&args.out_prefix);
    let mut json = serde_json::to_vec_pretty(&report).context("encoding metrics")?;
    json.push(b'\n');
    write_file(&metrics, &json)?;
    write_file(&ibp_heat, &render_heatmap(&oi.heatmap, ci)?)?;
    write_file(&qam_heat, &render_heatmap(&oq.heatmap, cq)?)?;
    Ok(())
}
