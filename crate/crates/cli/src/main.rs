mod artifacts;
mod config;
mod pipeline;
mod summarize;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use painnet::bands::BandName;
use painnet::datagen::{generate, EffectSpec, SynthConfig};
use painnet::evaluation::{EvalReport, SelectionConfig};
use painnet::labeling::{save_histograms, LabelStrategy, PainClass, StrategyId, Task};
use painnet::network::{export_network, read_edge_csv, PainNetwork};
use painnet::pipeline::{prepare, preprocess};
use painnet::selection::ElectrodeSelection;
use painnet::signal::io::{load_flag_list, load_recording, save_container};
use painnet::Scalar;

use artifacts::ArtifactDir;
use config::{Precision, ProtocolOverrides, RunConfig};
use summarize::{load_entries, Table, TableFormat};

#[derive(Parser)]
#[command(
    name = "painnet",
    version,
    about = "Pain-state classification from intracranial recordings"
)]
struct Cli {
    /// Sample precision for signals and features.
    #[arg(long, global = true, value_enum, env = "PAINNET_PRECISION")]
    precision: Option<Precision>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording with pain reports.
    Synth {
        /// Generator config (JSON); replaces the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        channels: usize,
        #[arg(long, default_value_t = 30)]
        trials_per_class: usize,
        #[arg(long, default_value = "binary", value_parser = ["binary", "ternary"])]
        task: String,
        #[arg(long, default_value_t = 0, env = "PAINNET_SEED")]
        seed: u64,
        /// Pure background activity, no injected effects.
        #[arg(long)]
        no_effects: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop unusable channels and apply the notch and low-pass filters.
    Preprocess {
        #[arg(long)]
        recording: PathBuf,
        /// Channels to reject, one name per line.
        #[arg(long)]
        flagged: Option<PathBuf>,
        #[arg(long, env = "PAINNET_CONFIG")]
        config: Option<PathBuf>,
        /// Output container.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment trials and write band-power (and optionally coherence) features.
    Features {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        reports: PathBuf,
        #[arg(long, default_value = "s1", value_parser = ["s1", "s2", "s3"])]
        strategy: String,
        #[arg(long, default_value = "binary", value_parser = ["binary", "ternary"])]
        task: String,
        /// Also write coherence for the electrodes in this selection file.
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long, env = "PAINNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank electrodes by mutual information with the labels over all windows.
    Select {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        reports: PathBuf,
        #[arg(long, default_value = "s1", value_parser = ["s1", "s2", "s3"])]
        strategy: String,
        #[arg(long, default_value = "binary", value_parser = ["binary", "ternary"])]
        task: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, env = "PAINNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the repeated-holdout protocol on a preprocessed recording.
    Evaluate {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        reports: PathBuf,
        #[arg(long, env = "PAINNET_CONFIG")]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: ProtocolOverrides,
        /// Report JSON; fold accuracies go next to it as `<stem>.folds.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the electrode network from a report or an edge list.
    Network {
        #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
        from: Option<PathBuf>,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, default_value_t = painnet::network::DEFAULT_DEGREE_QUANTILE)]
        degree_quantile: f64,
        /// Export `edges.csv`, `network.json` and `network.svg` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate grand-mean accuracies of several reports.
    Summarize {
        /// `name=report.json`, or a path named after its directory.
        #[arg(required = true)]
        reports: Vec<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every stage end to end, with a manifest of the outputs.
    Run {
        #[arg(long, env = "PAINNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        recording: Option<PathBuf>,
        #[arg(long)]
        reports: Option<PathBuf>,
        #[command(flatten)]
        overrides: ProtocolOverrides,
        #[arg(long, env = "PAINNET_OUT")]
        out: Option<PathBuf>,
    },
}

macro_rules! with_precision {
    ($p:expr, $f:ident ( $($arg:expr),* )) => {
        match $p {
            Precision::F32 => $f::<f32>($($arg),*),
            Precision::F64 => $f::<f64>($($arg),*),
        }
    };
}

fn strategy(id: &str, task: &str) -> Result<LabelStrategy> {
    Ok(LabelStrategy::new(id.parse::<StrategyId>()?, task.parse::<Task>()?)?)
}

fn demo_synth(channels: usize, trials: usize, task: &str, seed: u64, effects: bool) -> Result<SynthConfig> {
    let mut cfg = match task {
        "ternary" => SynthConfig::ternary(channels, trials, seed),
        _ => SynthConfig::binary(channels, trials, seed),
    };
    if effects {
        if channels < 7 {
            bail!("the built-in effects need at least 7 channels (use --no-effects or --config)");
        }
        for ch in 4..7 {
            cfg = cfg.with_effect(EffectSpec::band_power(ch, BandName::Alpha, 4.0, PainClass::Pain));
        }
        cfg = cfg
            .with_effect(EffectSpec::coherence(0, 1, BandName::Gamma, 0.8, PainClass::Pain))
            .with_effect(EffectSpec::coherence(2, 3, BandName::Gamma, 0.8, PainClass::Pain));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth<T: Scalar>(cfg: &SynthConfig, out: &Path) -> Result<()> {
    let data = generate::<T>(cfg)?;
    data.save(out)?;
    std::fs::write(out.join("synth.json"), serde_json::to_string_pretty(cfg)?)?;
    println!(
        "{} trials, {} channels -> {}",
        data.reports.len(),
        data.recording.n_channels(),
        out.display()
    );
    Ok(())
}

fn preprocess_cmd<T: Scalar>(cfg: &RunConfig, recording: &Path, flagged: Option<&Path>, out: &Path) -> Result<()> {
    let rec = load_recording::<T>(recording).with_context(|| format!("loading recording {}", recording.display()))?;
    let mut pre = cfg.preprocess.clone();
    if let Some(f) = flagged {
        pre.flagged_channels.extend(load_flag_list(f)?);
    }
    let (rec, summary) = preprocess(rec, &pre)?;
    save_container(&rec, out)?;
    println!("kept {} channels, dropped {:?}", summary.kept.len(), summary.dropped);
    Ok(())
}

fn features_cmd<T: Scalar>(
    cfg: &RunConfig,
    recording: &Path,
    reports: &Path,
    strategy: LabelStrategy,
    selection: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let (rec, reports) = pipeline::load_inputs::<T>(recording, reports)?;
    let prep = prepare(rec, &reports, &cfg.features)?;
    for w in &prep.warnings {
        log::warn!("report {} at {} s skipped: {}", w.report_index, w.timestamp_s, w.reason);
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ds = prep.dataset(strategy)?;
    let labels = ds.row_label_names();
    prep.pib_for(&ds)?
        .write_csv(&out.join("pib.csv"), &out.join("pib.rows.json"), Some(&labels))?;
    let vas: Vec<u8> = prep.trials.iter().map(|t| t.vas).collect();
    save_histograms(
        &vas,
        strategy,
        &out.join("class_histogram.csv"),
        &out.join("vas_histogram.csv"),
    )?;
    if let Some(path) = selection {
        let sel = ElectrodeSelection::load(path)?;
        prep.msc_matrix(&ds, &sel.channels)?.write_csv(
            &out.join("msc.csv"),
            &out.join("msc.rows.json"),
            Some(&labels),
        )?;
    }
    println!(
        "{} trials, {} labeled windows -> {}",
        prep.trials.len(),
        ds.rows.len(),
        out.display()
    );
    Ok(())
}

fn select_cmd<T: Scalar>(
    cfg: &RunConfig,
    recording: &Path,
    reports: &Path,
    strategy: LabelStrategy,
    selection: SelectionConfig,
    out: &Path,
) -> Result<()> {
    let (rec, reports) = pipeline::load_inputs::<T>(recording, reports)?;
    let prep = prepare(rec, &reports, &cfg.features)?;
    let sel = prep.select_electrodes(&prep.dataset(strategy)?, &selection)?;
    sel.save(out)?;
    for (name, mi) in sel.channels.iter().zip(&sel.aggregate_mi) {
        println!("{name}\t{mi:.4}");
    }
    Ok(())
}

fn evaluate_cmd<T: Scalar>(cfg: &RunConfig, recording: &Path, reports: &Path, out: &Path) -> Result<()> {
    let (rec, reports) = pipeline::load_inputs::<T>(recording, reports)?;
    let prep = prepare(rec, &reports, &cfg.features)?;
    let ds = prep.dataset(cfg.protocol.strategy)?;
    let report = pipeline::evaluate(&prep, &ds, &cfg.protocol)?;
    report.save(out)?;
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.write_fold_csv(&out.with_file_name(format!("{stem}.folds.csv")))?;
    print_report(&report);
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!(
        "accuracy {:.3} +/- {:.3} (trial vote {:.3}, chance {:.3}); {} leakage violations",
        r.grand_mean, r.std, r.trial_grand_mean, r.chance_level, r.leakage_violations
    );
}

fn print_ranking(net: &PainNetwork, k: usize) {
    println!("rank\telectrode\tstrength\tdegree");
    for (i, r) in net.ranking().into_iter().take(k).enumerate() {
        println!("{}\t{}\t{:.4}\t{}", i + 1, r.name, r.strength, r.degree);
    }
}

fn run_cmd<T: Scalar>(cfg: &RunConfig) -> Result<()> {
    let hash = cfg.hash()?;
    let mut dir = ArtifactDir::create(&cfg.output_dir)?;
    let result = dir
        .write("config.json", serde_json::to_string_pretty(cfg)?)
        .and_then(|_| pipeline::run_pipeline::<T>(cfg, &mut dir));
    match result {
        Ok(outcome) => {
            let manifest = dir.finish(hash)?;
            print_report(&outcome.report);
            if let Some(net) = &outcome.network {
                print_ranking(net, cfg.network.top_k);
            }
            println!("{} files -> {}", manifest.files.len(), cfg.output_dir.display());
            Ok(())
        }
        Err(e) => {
            let failed = dir.quarantine()?;
            Err(e.context(format!("partial outputs moved to {}", failed.display())))
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let precision = |cfg: &RunConfig| cli.precision.unwrap_or(cfg.precision);
    match &cli.command {
        Command::Synth {
            config,
            channels,
            trials_per_class,
            task,
            seed,
            no_effects,
            out,
        } => {
            let cfg = match config {
                Some(p) => {
                    let c = SynthConfig::load(p)?;
                    c.validate()?;
                    c
                }
                None => demo_synth(*channels, *trials_per_class, task, *seed, !no_effects)?,
            };
            with_precision!(cli.precision.unwrap_or_default(), synth(&cfg, out))
        }
        Command::Preprocess {
            recording,
            flagged,
            config,
            out,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            with_precision!(
                precision(&cfg),
                preprocess_cmd(&cfg, recording, flagged.as_deref(), out)
            )
        }
        Command::Features {
            recording,
            reports,
            strategy: id,
            task,
            selection,
            config,
            out,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let s = strategy(id, task)?;
            with_precision!(
                precision(&cfg),
                features_cmd(&cfg, recording, reports, s, selection.as_deref(), out)
            )
        }
        Command::Select {
            recording,
            reports,
            strategy: id,
            task,
            k,
            config,
            out,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let s = strategy(id, task)?;
            let mut sel = cfg.protocol.selection;
            if let Some(k) = k {
                sel.k = *k;
            }
            with_precision!(precision(&cfg), select_cmd(&cfg, recording, reports, s, sel, out))
        }
        Command::Evaluate {
            recording,
            reports,
            config,
            overrides,
            out,
        } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            overrides.apply(&mut cfg)?;
            cfg.protocol.seed = cfg.seed;
            cfg.protocol.validate()?;
            with_precision!(precision(&cfg), evaluate_cmd(&cfg, recording, reports, out))
        }
        Command::Network {
            from,
            edges,
            top_k,
            degree_quantile,
            out,
        } => {
            let net = match (from, edges) {
                (Some(report), _) => {
                    let r = EvalReport::load(report)?;
                    pipeline::network_from_report(&r, *degree_quantile)?.with_context(|| {
                        format!(
                            "{} has no coherence importances (needs a random forest on msc or both)",
                            report.display()
                        )
                    })?
                }
                (None, Some(e)) => read_edge_csv(e, *degree_quantile)?,
                (None, None) => bail!("pass --from or --edges"),
            };
            print_ranking(&net, *top_k);
            if let Some(dir) = out {
                export_network(&net, dir)?;
                pipeline::write_top_electrodes(&net, *top_k, &dir.join("top_electrodes.csv"))?;
            }
            Ok(())
        }
        Command::Summarize { reports, format, out } => {
            let table = Table::build(&load_entries(reports)?)?.render(*format)?;
            match out {
                Some(p) => std::fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Run {
            config,
            recording,
            reports,
            overrides,
            out,
        } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(r) = recording {
                cfg.recording = Some(r.clone());
                cfg.synth = None;
            }
            if let Some(r) = reports {
                cfg.reports = Some(r.clone());
            }
            if let Some(o) = out {
                cfg.output_dir = o.clone();
            }
            if let Some(p) = cli.precision {
                cfg.precision = p;
            }
            overrides.apply(&mut cfg)?;
            let cfg = cfg.finalize()?;
            with_precision!(cfg.precision, run_cmd(&cfg))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
