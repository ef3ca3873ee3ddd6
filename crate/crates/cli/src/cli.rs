//! Argument parsing and subcommand execution.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use paci_core::aggregator::{
    classify, reference_profiles_check, run_series, IndicatorSeries, ModelConfig, StateScale,
};
use paci_core::counterfactual::{CounterfactualComparison, CounterfactualSpec};
use paci_core::dcm::{
    build_interval_scale, build_weights, check_consistency, fill_pairwise_table, PairwiseTable,
    ScaleJudgements, SwingRanking,
};
use paci_core::epicriteria::{compute_performances, CriteriaMatrix, CRITERIA};
use paci_core::numfmt::sig6;
use paci_core::sensitivity::{envelope_from_matrix, MonteCarlo, PerturbationSpec, SamplingMode};
use paci_core::valuemodel::{from_dcm, DEFAULT_CAP};
use serde::Serialize;
use serde_json::json;

use crate::data::{load_config, load_matrix, load_raw};
use crate::error::{AppError, AppResult};
use crate::manifest::RunManifest;
use crate::server;
use crate::svg::{self, Band, Chart, Series};

pub const CRITERIA_COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b"];

#[derive(Debug, Parser)]
#[command(name = "paci", version, about = "Pandemic impact composite indicator")]
pub struct Cli {
    /// Model configuration (JSON). Defaults to the built-in model.
    #[arg(long, global = true, env = "PACI_CONFIG")]
    pub config: Option<PathBuf>,

    /// Write artifacts and a run manifest here instead of stdout.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Daily counts or criteria CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub from: Option<NaiveDate>,
    #[arg(long)]
    pub to: Option<NaiveDate>,
}

#[derive(Debug, Clone, Args)]
pub struct DeltaArgs {
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub delta_perf: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub delta_value: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub delta_weight: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulationArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Mode::AroundNominal)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    FullSimplex,
    AroundNominal,
}

impl From<Mode> for SamplingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::FullSimplex => SamplingMode::FullSimplex,
            Mode::AroundNominal => SamplingMode::AroundNominal,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct PivotArgs {
    /// Row index of the pivot within the selected range.
    #[arg(long)]
    pub pivot_day: Option<usize>,
    #[arg(long)]
    pub pivot_date: Option<NaiveDate>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate daily counts and derive the criteria matrix.
    Ingest(InputArgs),
    /// Indicator value and state per day.
    Compute(InputArgs),
    /// Weighted contribution of each criterion per day.
    Contributions(InputArgs),
    /// State label of indicator values.
    Classify {
        #[arg(required = true)]
        values: Vec<f64>,
        /// State of the previous day, for hysteresis.
        #[arg(long)]
        previous: Option<String>,
        /// Overrides the configured hysteresis half-width.
        #[arg(long)]
        hysteresis: Option<f64>,
    },
    #[command(subcommand)]
    Sensitivity(SensitivityCommand),
    /// No-vaccination estimate with severity frozen at pre-pivot ratios.
    Counterfactual {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        pivot: PivotArgs,
    },
    /// Indicator value of the reference profiles against their cut-offs.
    ProfilesCheck,
    #[command(subcommand)]
    Elicit(ElicitCommand),
    /// SVG figure plus the CSV it was drawn from.
    Plot {
        #[arg(value_enum)]
        kind: PlotKind,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        deltas: DeltaArgs,
        #[arg(long)]
        pivot_day: Option<usize>,
        #[arg(long)]
        pivot_date: Option<NaiveDate>,
    },
    /// HTTP/JSON API for the elicitation front end.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Series served by GET /series and GET /envelope.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SensitivityCommand {
    /// Exact daily min/max over the weight box with perturbed inputs.
    Envelope {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        deltas: DeltaArgs,
    },
    /// Monte-Carlo weight trajectories, long format.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        deltas: DeltaArgs,
        #[command(flatten)]
        sim: SimulationArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum ElicitCommand {
    /// Interval scale and value function from deck-of-cards judgements.
    BuildScale {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: f64,
    },
    /// Normalised weights from a swing ranking.
    BuildWeights {
        #[arg(long)]
        input: PathBuf,
    },
    /// Consistency of a pairwise card table.
    Check {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Evolution,
    Contributions,
    Envelope,
    Counterfactual,
}

/// Named output of a command.
pub struct Artifact {
    pub name: String,
    pub content: String,
}

impl Artifact {
    fn new(name: &str, content: String) -> Self {
        Self {
            name: name.to_string(),
            content,
        }
    }
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> paci_core::Result<()>) -> AppResult<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| AppError::new("utf8", e.to_string()))
}

fn json_string<T: Serialize>(value: &T) -> AppResult<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::new("io", format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn spec_from(deltas: &DeltaArgs, seed: u64, samples: usize) -> PerturbationSpec {
    PerturbationSpec {
        perf_delta: deltas.delta_perf,
        value_delta: deltas.delta_value,
        weight_delta: deltas.delta_weight,
        rng_seed: seed,
        sample_count: samples,
    }
}

fn pivot_index(
    matrix: &CriteriaMatrix,
    day: Option<usize>,
    date: Option<NaiveDate>,
) -> AppResult<usize> {
    match (day, date) {
        (Some(d), _) => Ok(d),
        (None, Some(date)) => matrix
            .rows()
            .iter()
            .position(|r| r.date == date)
            .ok_or_else(|| {
                AppError::new("pivot-out-of-range", format!("{date} is not in the series"))
            }),
        (None, None) => Err(AppError::usage("give --pivot-day or --pivot-date")),
    }
}

fn contributions_csv(series: &IndicatorSeries) -> AppResult<String> {
    let mut out = String::from("date,overall");
    for c in CRITERIA {
        out.push_str(",c_");
        out.push_str(c);
    }
    out.push('\n');
    for p in &series.points {
        out.push_str(&p.date.to_string());
        out.push(',');
        out.push_str(&sig6(p.overall));
        for c in p.contributions {
            out.push(',');
            out.push_str(&sig6(c));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Executes everything except `serve` and returns the produced artifacts.
pub fn execute(cli: &Cli) -> AppResult<Vec<Artifact>> {
    let cfg = || load_config(cli.config.as_deref());
    let json = cli.format == Format::Json;
    let artifacts = match &cli.command {
        Command::Ingest(input) => {
            let raw = load_raw(&input.input)?;
            let matrix = compute_performances(&raw)?.slice_dates(input.from, input.to);
            if json {
                vec![Artifact::new(
                    "criteria.json",
                    json_string(&json!({
                        "rows": matrix.rows(),
                        "flags": matrix.flags(),
                    }))?,
                )]
            } else {
                vec![Artifact::new(
                    "criteria.csv",
                    csv_string(|b| matrix.write_csv(b))?,
                )]
            }
        }
        Command::Compute(input) => {
            let series = run_series(&load_matrix(&input.input, input.from, input.to)?, &cfg()?);
            if json {
                vec![Artifact::new("series.json", json_string(&series)?)]
            } else {
                vec![Artifact::new(
                    "series.csv",
                    csv_string(|b| series.write_csv(b))?,
                )]
            }
        }
        Command::Contributions(input) => {
            let series = run_series(&load_matrix(&input.input, input.from, input.to)?, &cfg()?);
            if json {
                let rows: Vec<_> = series
                    .points
                    .iter()
                    .map(|p| json!({"date": p.date, "overall": p.overall, "contributions": p.contributions}))
                    .collect();
                vec![Artifact::new("contributions.json", json_string(&rows)?)]
            } else {
                vec![Artifact::new(
                    "contributions.csv",
                    contributions_csv(&series)?,
                )]
            }
        }
        Command::Classify {
            values,
            previous,
            hysteresis,
        } => {
            let mut scale: StateScale = cfg()?.state_scale;
            if let Some(h) = hysteresis {
                scale.hysteresis = *h;
            }
            let errs = scale.violations();
            if !errs.is_empty() {
                return Err(paci_core::PaciError::Config(errs).into());
            }
            // Each value sees the state of the one before it.
            let mut prev = previous.clone();
            let mut labels = Vec::with_capacity(values.len());
            for v in values {
                let label = classify(*v, &scale, prev.as_deref()).to_string();
                prev = Some(label.clone());
                labels.push((*v, label));
            }
            if json {
                let rows: Vec<_> = labels
                    .iter()
                    .map(|(v, s)| json!({"value": v, "state": s}))
                    .collect();
                vec![Artifact::new("states.json", json_string(&rows)?)]
            } else {
                let mut out = String::from("value,state\n");
                for (v, s) in &labels {
                    out.push_str(&format!("{v},{s}\n"));
                }
                vec![Artifact::new("states.csv", out)]
            }
        }
        Command::Sensitivity(SensitivityCommand::Envelope { input, deltas }) => {
            let matrix = load_matrix(&input.input, input.from, input.to)?;
            let env = envelope_from_matrix(&matrix, &cfg()?, &spec_from(deltas, 0, 1))?;
            if json {
                vec![Artifact::new(
                    "envelope.json",
                    json_string(&json!({
                        "days": env.days,
                        "summary": env.summary(),
                    }))?,
                )]
            } else {
                vec![
                    Artifact::new("envelope.csv", csv_string(|b| env.write_csv(b))?),
                    Artifact::new("envelope-summary.json", json_string(&env.summary())?),
                ]
            }
        }
        Command::Sensitivity(SensitivityCommand::Simulate { input, deltas, sim }) => {
            let matrix = load_matrix(&input.input, input.from, input.to)?;
            let spec = spec_from(deltas, sim.seed, sim.samples);
            let mc = MonteCarlo::new(&matrix, &cfg()?, &spec, sim.mode.into())?;
            if json {
                vec![Artifact::new(
                    "simulation.json",
                    json_string(&json!({
                        "dates": mc.dates(),
                        "trajectories": mc.run()?,
                    }))?,
                )]
            } else {
                vec![Artifact::new(
                    "simulation.csv",
                    csv_string(|b| mc.write_csv(b))?,
                )]
            }
        }
        Command::Counterfactual { input, pivot } => {
            let matrix = load_matrix(&input.input, input.from, input.to)?;
            let spec = CounterfactualSpec {
                pivot_day: pivot_index(&matrix, pivot.pivot_day, pivot.pivot_date)?,
            };
            let cmp = CounterfactualComparison::compute(&matrix, &cfg()?, &spec)?;
            if json {
                vec![Artifact::new("counterfactual.json", json_string(&cmp)?)]
            } else {
                vec![Artifact::new(
                    "counterfactual.csv",
                    csv_string(|b| cmp.write_csv(b))?,
                )]
            }
        }
        Command::ProfilesCheck => {
            let rows = reference_profiles_check(&cfg()?);
            if json {
                vec![Artifact::new("profiles.json", json_string(&rows)?)]
            } else {
                let mut out = String::from("profile,expected,computed,deviation\n");
                for r in &rows {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        r.profile,
                        r.expected,
                        sig6(r.computed),
                        sig6(r.deviation())
                    ));
                }
                vec![Artifact::new("profiles.csv", out)]
            }
        }
        Command::Elicit(cmd) => elicit(cmd)?,
        Command::Plot {
            kind,
            input,
            deltas,
            pivot_day,
            pivot_date,
        } => plot(*kind, input, deltas, *pivot_day, *pivot_date, &cfg()?)?,
        Command::Serve { .. } => return Err(AppError::usage("serve is not a batch command")),
    };
    Ok(artifacts)
}

/// Scale preview: the elicited scale, its value function and the implied
/// pairwise card table.
pub fn scale_preview(judgements: ScaleJudgements, cap: f64) -> AppResult<serde_json::Value> {
    let (seq, cards) = judgements.into_parts()?;
    let scale = build_interval_scale(&seq, &cards)?;
    let function = from_dcm(&scale, cap, &seq)?;
    Ok(json!({
        "scale": scale,
        "value_function": function,
        "table": fill_pairwise_table(&cards),
    }))
}

fn elicit(cmd: &ElicitCommand) -> AppResult<Vec<Artifact>> {
    Ok(match cmd {
        ElicitCommand::BuildScale { input, cap } => {
            let doc = scale_preview(read_json(input)?, *cap)?;
            vec![Artifact::new("scale.json", json_string(&doc)?)]
        }
        ElicitCommand::BuildWeights { input } => {
            let ranking: SwingRanking = read_json(input)?;
            let weights = build_weights(&ranking)?;
            vec![Artifact::new(
                "weights.json",
                json_string(&json!({ "weights": weights }))?,
            )]
        }
        ElicitCommand::Check { input } => {
            let table: PairwiseTable = read_json(input)?;
            let report = check_consistency(&table);
            if !report.is_consistent() {
                return Err(AppError::new(
                    "inconsistent-judgements",
                    format!("{} violated triple(s)", report.violations.len()),
                )
                .with_details(json!({
                    "violations": report.violations,
                    "suspect_entries": report.suspect_entries(),
                })));
            }
            vec![Artifact::new(
                "consistency.json",
                json_string(&json!({
                    "consistent": true,
                    "violations": report.violations,
                }))?,
            )]
        }
    })
}

fn plot(
    kind: PlotKind,
    input: &InputArgs,
    deltas: &DeltaArgs,
    pivot_day: Option<usize>,
    pivot_date: Option<NaiveDate>,
    cfg: &ModelConfig,
) -> AppResult<Vec<Artifact>> {
    let matrix = load_matrix(&input.input, input.from, input.to)?;
    let series = run_series(&matrix, cfg);
    let dates = series.dates();
    let indicator = Series::new("PACI", "#000000", series.overall());
    let (name, chart, data) = match kind {
        PlotKind::Evolution => (
            "evolution",
            Chart {
                title: "Indicator evolution".into(),
                y_label: "value".into(),
                dates,
                lines: vec![indicator],
                states: Some(cfg.state_scale.clone()),
                ..Chart::default()
            },
            csv_string(|b| series.write_csv(b))?,
        ),
        PlotKind::Contributions => (
            "contributions",
            Chart {
                title: "Contributions by criterion".into(),
                y_label: "value".into(),
                dates,
                lines: (0..5)
                    .map(|j| {
                        Series::new(
                            CRITERIA[j],
                            CRITERIA_COLORS[j],
                            series.points.iter().map(|p| p.contributions[j]).collect(),
                        )
                    })
                    .collect(),
                stacked: true,
                ..Chart::default()
            },
            contributions_csv(&series)?,
        ),
        PlotKind::Envelope => {
            let env = envelope_from_matrix(&matrix, cfg, &spec_from(deltas, 0, 1))?;
            (
                "envelope",
                Chart {
                    title: "Sensitivity envelope".into(),
                    y_label: "value".into(),
                    dates,
                    lines: vec![indicator],
                    bands: vec![Band {
                        name: "min/max".into(),
                        color: "#6baed6".into(),
                        lower: env.days.iter().map(|d| d.v_minus).collect(),
                        upper: env.days.iter().map(|d| d.v_plus).collect(),
                    }],
                    states: Some(cfg.state_scale.clone()),
                    ..Chart::default()
                },
                csv_string(|b| env.write_csv(b))?,
            )
        }
        PlotKind::Counterfactual => {
            let spec = CounterfactualSpec {
                pivot_day: pivot_index(&matrix, pivot_day, pivot_date)?,
            };
            let cmp = CounterfactualComparison::compute(&matrix, cfg, &spec)?;
            (
                "counterfactual",
                Chart {
                    title: "Actual and no-vaccination estimate".into(),
                    y_label: "value".into(),
                    dates,
                    lines: vec![
                        indicator,
                        Series::new("no vaccination", "#d62728", cmp.counterfactual.overall()),
                    ],
                    states: Some(cfg.state_scale.clone()),
                    ..Chart::default()
                },
                csv_string(|b| cmp.write_csv(b))?,
            )
        }
    };
    Ok(vec![
        Artifact::new(&format!("{name}.svg"), svg::render(&chart)),
        Artifact::new(&format!("{name}.csv"), data),
    ])
}

fn input_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Ingest(i) | Command::Compute(i) | Command::Contributions(i) => Some(&i.input),
        Command::Sensitivity(SensitivityCommand::Envelope { input, .. })
        | Command::Sensitivity(SensitivityCommand::Simulate { input, .. })
        | Command::Counterfactual { input, .. }
        | Command::Plot { input, .. } => Some(&input.input),
        Command::Elicit(ElicitCommand::BuildScale { input, .. })
        | Command::Elicit(ElicitCommand::BuildWeights { input })
        | Command::Elicit(ElicitCommand::Check { input }) => Some(input),
        Command::Serve { input, .. } => input.as_deref(),
        Command::Classify { .. } | Command::ProfilesCheck => None,
    }
}

fn seed(command: &Command) -> Option<u64> {
    match command {
        Command::Sensitivity(SensitivityCommand::Simulate { sim, .. }) => Some(sim.seed),
        _ => None,
    }
}

/// Parses `argv`, runs the command and emits its artifacts.
pub fn run(argv: Vec<String>, stdout: &mut impl Write) -> AppResult<()> {
    let cli = Cli::try_parse_from(&argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            AppError::new("help", e.to_string())
        }
        _ => AppError::usage(e.to_string()),
    })?;

    if let Command::Serve { addr, input } = &cli.command {
        let state = server::AppState::load(cli.config.clone(), input.as_deref())?;
        let runtime = tokio::runtime::Runtime::new()?;
        return runtime.block_on(server::serve(*addr, state));
    }

    let artifacts = execute(&cli)?;
    match &cli.out_dir {
        None => {
            for a in &artifacts {
                stdout.write_all(a.content.as_bytes())?;
            }
        }
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut outputs = Vec::new();
            for a in &artifacts {
                let path = dir.join(&a.name);
                fs::write(&path, &a.content)?;
                outputs.push(path);
            }
            let manifest = RunManifest::new(
                argv.clone(),
                input_path(&cli.command).map(Path::to_path_buf),
                cli.config.clone(),
                outputs,
                seed(&cli.command),
            );
            fs::write(dir.join("manifest.json"), json_string(&manifest)?)?;
        }
    }
    Ok(())
}
