use std::path::Path;

use anyhow::{Context, Result};
use painnet::datagen::generate;
use painnet::evaluation::{run_protocol, EvalReport, FeatureSet, ProtocolConfig};
use painnet::labeling::{save_histograms, LabeledDataset};
use painnet::network::{build_network_with_quantile, export_network, PainNetwork};
use painnet::pipeline::{prepare, preprocess, Prepared};
use painnet::signal::io::{load_flag_list, load_recording, load_reports};
use painnet::signal::{PainReport, Recording};
use painnet::Scalar;
use serde::Serialize;

use crate::artifacts::ArtifactDir;
use crate::config::RunConfig;

pub fn load_inputs<T: Scalar>(recording: &Path, reports: &Path) -> Result<(Recording<T>, Vec<PainReport>)> {
    let rec = load_recording(recording).with_context(|| format!("loading recording {}", recording.display()))?;
    let reports = load_reports(reports).with_context(|| format!("loading pain reports {}", reports.display()))?;
    Ok((rec, reports))
}

pub fn evaluate<T: Scalar>(prep: &Prepared<T>, ds: &LabeledDataset, protocol: &ProtocolConfig) -> Result<EvalReport> {
    let src = prep.feature_source(ds, protocol.feature_set, &protocol.selection)?;
    Ok(run_protocol(protocol, ds, src.as_ref())?)
}

/// Network from a report's coherence importances, if it has any.
pub fn network_from_report(report: &EvalReport, degree_quantile: f64) -> Result<Option<PainNetwork>> {
    let Some(imp) = &report.importances else {
        return Ok(None);
    };
    if !imp.keys().any(|k| k.starts_with("MSC:")) {
        return Ok(None);
    }
    Ok(Some(build_network_with_quantile(
        imp.iter().map(|(k, v)| (k.as_str(), *v)),
        degree_quantile,
    )?))
}

pub fn write_top_electrodes(net: &PainNetwork, k: usize, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["rank", "electrode", "strength", "degree"])?;
    for (i, r) in net.ranking().into_iter().take(k).enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.name,
            r.strength.to_string(),
            r.degree.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Segments<'a> {
    trials: &'a [painnet::labeling::TrialInfo],
    warnings: &'a [painnet::signal::SegmentWarning],
}

pub struct RunOutcome {
    pub report: EvalReport,
    pub network: Option<PainNetwork>,
}

/// Every stage from raw input to network export, writing into `dir`.
pub fn run_pipeline<T: Scalar>(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<RunOutcome> {
    let (rec, reports) = dir.stage("input", |d| {
        if let Some(synth) = &cfg.synth {
            let out = generate::<T>(synth)?;
            out.save(&d.root().join("synth"))?;
            d.adopt_dir("synth")?;
            Ok((out.recording, out.reports))
        } else {
            let rec = cfg.recording.as_deref().context("no recording path")?;
            let rep = cfg.reports.as_deref().context("no reports path")?;
            load_inputs::<T>(rec, rep)
        }
    })?;

    let rec = dir.stage("preprocess", |d| {
        let mut pre = cfg.preprocess.clone();
        if let Some(path) = &cfg.flagged_channels_file {
            pre.flagged_channels.extend(load_flag_list(path)?);
        }
        let (rec, summary) = preprocess(rec, &pre)?;
        d.write("preprocess.json", serde_json::to_string_pretty(&summary)?)?;
        Ok(rec)
    })?;

    let strategy = cfg.protocol.strategy;
    let (prep, ds) = dir.stage("segment", |d| {
        let prep = prepare(rec, &reports, &cfg.features)?;
        d.write(
            "segments.json",
            serde_json::to_string_pretty(&Segments {
                trials: &prep.trials,
                warnings: &prep.warnings,
            })?,
        )?;
        let vas: Vec<u8> = prep.trials.iter().map(|t| t.vas).collect();
        let class_path = d.path("labels/class_histogram.csv")?;
        let vas_path = d.path("labels/vas_histogram.csv")?;
        save_histograms(&vas, strategy, &class_path, &vas_path)?;
        let ds = prep.dataset(strategy)?;
        Ok((prep, ds))
    })?;

    dir.stage("features", |d| {
        let csv = d.path("features/pib.csv")?;
        let rows = d.path("features/pib.rows.json")?;
        prep.pib_for(&ds)?.write_csv(&csv, &rows, Some(&ds.row_label_names()))?;
        Ok(())
    })?;

    dir.stage("select", |d| {
        let sel = prep.select_electrodes(&ds, &cfg.protocol.selection)?;
        sel.save(&d.path("selection.json")?)?;
        if cfg.protocol.feature_set != FeatureSet::Pib {
            let csv = d.path("features/msc.csv")?;
            let rows = d.path("features/msc.rows.json")?;
            prep.msc_matrix(&ds, &sel.channels)?
                .write_csv(&csv, &rows, Some(&ds.row_label_names()))?;
        }
        Ok(())
    })?;

    let report = dir.stage("evaluate", |d| {
        let report = evaluate(&prep, &ds, &cfg.protocol)?;
        report.save(&d.path("report.json")?)?;
        report.write_fold_csv(&d.path("folds.csv")?)?;
        Ok(report)
    })?;

    let network = dir.stage("network", |d| {
        let Some(net) = network_from_report(&report, cfg.network.degree_quantile)? else {
            log::info!("no coherence importances in the report; network skipped");
            return Ok(None);
        };
        export_network(&net, &d.root().join("network"))?;
        d.adopt_dir("network")?;
        write_top_electrodes(&net, cfg.network.top_k, &d.path("network/top_electrodes.csv")?)?;
        Ok(Some(net))
    })?;

    Ok(RunOutcome { report, network })
}
