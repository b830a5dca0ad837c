//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 1 4`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use painnet::bands::{BandName, BandSpec};
use painnet::classifiers::*;
use painnet::datagen::{generate, EffectSpec, SynthConfig};
use painnet::evaluation::*;
use painnet::labeling::{label_dataset, LabelStrategy, LabeledDataset, PainClass, StrategyId, Task};
use painnet::network::{build_network, top_electrodes};
use painnet::pipeline::{prepare, preprocess, FeatureConfig, PreprocessConfig};
use painnet::selection::mutual_information;
use painnet::signal::{segment_trials, window_trial, PainReport, Recording, SosFilter, Window};
use painnet::spectral::{extract_msc_matrix, msc, pib, MscParams, PibOptions};
use painnet::Prepared32;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FS: f64 = 500.0;

type Outcome = Result<String, String>;

/// Step timings on stderr when `ACCEPTANCE_VERBOSE` is set.
macro_rules! progress {
    ($($arg:tt)+) => {
        if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
            eprintln!($($arg)+);
        }
    };
}

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn db(p: f64) -> f64 {
    10.0 * p.log10()
}

// 1 ------------------------------------------------------------------------

fn filters() -> Outcome {
    let probes: Vec<f64> = (0..20).map(|i| 2.0 + i as f64 * 12.4).collect();
    let tan = |f: f64| (PI * f / FS).tan();
    let lp = SosFilter::butter_lowpass(5, 200.0, FS).map_err(|e| e.to_string())?;
    let at_cutoff = lp.gain_db(200.0);
    check!(
        (at_cutoff + 3.0).abs() <= 0.5,
        "low-pass gain at 200 Hz is {at_cutoff:.3} dB"
    );
    let mut worst: f64 = 0.0;
    for &f in &probes {
        let want = -db(1.0 + (tan(f) / tan(200.0)).powi(10));
        worst = worst.max((lp.gain_db(f) - want).abs());
    }

    let notch = SosFilter::notches(&[60.0, 120.0, 180.0], 30.0, FS).map_err(|e| e.to_string())?;
    let mut notch_depth = f64::INFINITY;
    for f0 in [60.0, 120.0, 180.0] {
        notch_depth = notch_depth.min(-notch.gain_db(f0));
    }
    check!(notch_depth >= 20.0, "notch attenuation only {notch_depth:.1} dB");
    let single = SosFilter::notch(60.0, 30.0, FS).map_err(|e| e.to_string())?;
    for &f in &probes {
        let (w, w0) = (2.0 * PI * f / FS, 2.0 * PI * 60.0 / FS);
        let beta = (w0 / 60.0).tan();
        let num = (w.cos() - w0.cos()).powi(2);
        let want = db(num / (num + beta * beta * w.sin().powi(2)));
        worst = worst.max((single.gain_db(f) - want).abs());
    }

    let mut stop = f64::INFINITY;
    for band in BandSpec::canonical() {
        let bp = SosFilter::butter_bandpass(2, band.low_hz, band.high_hz, FS).map_err(|e| e.to_string())?;
        let w = |f: f64| 2.0 * FS * tan(f);
        for &f in &probes {
            let (om, wl, wh) = (w(f), w(band.low_hz), w(band.high_hz));
            let x = (om * om - wl * wh) / (om * (wh - wl));
            let want = -db(1.0 + x.powi(4));
            let got = bp.gain_db(f);
            if want > -120.0 {
                worst = worst.max((got - want).abs());
            }
        }
        stop = stop.min(-bp.gain_db(band.low_hz / 2.0));
        if band.high_hz * 2.0 < FS / 2.0 {
            stop = stop.min(-bp.gain_db(band.high_hz * 2.0));
        }
    }
    check!(stop >= 10.0, "band-pass stopband only {stop:.1} dB");
    check!(worst <= 0.5, "transfer function deviates by {worst:.3} dB");
    Ok(format!(
        "LP {at_cutoff:.2} dB at cutoff, notch >= {notch_depth:.1} dB, stopband >= {stop:.1} dB, max probe error {worst:.1e} dB"
    ))
}

// 2 ------------------------------------------------------------------------

fn pib_oracle() -> Outcome {
    let opts = PibOptions::default();
    let x: Vec<f64> = (0..5000).map(|i| (2.0 * PI * 10.0 * i as f64 / FS).cos()).collect();
    let value = pib(&x, &BandSpec::ALPHA, FS, &opts).map_err(|e| e.to_string())?;
    let retained = 5000.0 - opts.discard_s * FS;
    let rel = (value / retained - 1.0).abs();
    check!(rel <= 0.05, "PIB {value:.1} vs {retained} retained samples");
    let mut worst: f64 = 0.0;
    for (seed, c) in [(1u64, 3.0), (2, 0.01), (3, -250.0)] {
        let y = noise(seed, 5000);
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        for band in BandSpec::canonical() {
            let base = pib(&y, &band, FS, &opts).map_err(|e| e.to_string())?;
            let scaled = pib(&ys, &band, FS, &opts).map_err(|e| e.to_string())?;
            worst = worst.max((scaled - c * c * base).abs() / (c * c * base));
        }
    }
    check!(worst <= 1e-9, "homogeneity error {worst:.2e}");
    Ok(format!(
        "PIB/N = {:.4}, homogeneity error {worst:.1e}",
        value / retained
    ))
}

// 3 ------------------------------------------------------------------------

fn msc_properties() -> Outcome {
    let params = MscParams::default();
    let n = 5000;
    let k = ((n - 500) / 250 + 1) as f64;
    let x = noise(0, n);
    for band in BandSpec::canonical() {
        let v = msc(&x, &x, &band, FS, &params).map_err(|e| e.to_string())?.value;
        check!((v - 1.0).abs() <= 1e-9, "MSC(x, x) = {v} in {}", band.name);
    }
    let bands = BandSpec::canonical();
    for s in 0..1000u64 {
        let mix = (s % 11) as f64 / 10.0;
        let common = noise(10_000 + s, n);
        let a: Vec<f64> = noise(20_000 + s, n)
            .iter()
            .zip(&common)
            .map(|(p, c)| p * (1.0 - mix) + c * mix)
            .collect();
        let b: Vec<f64> = noise(30_000 + s, n)
            .iter()
            .zip(&common)
            .map(|(p, c)| p * (1.0 - mix) + c * mix)
            .collect();
        let band = &bands[s as usize % 6];
        let v = msc(&a, &b, band, FS, &params).map_err(|e| e.to_string())?.value;
        check!((0.0..=1.0).contains(&v), "MSC {v} out of range for pair {s}");
    }
    let mut summary = Vec::new();
    for band in &bands {
        let mean: f64 = (0..100u64)
            .map(|s| msc(&noise(40_000 + 2 * s, n), &noise(40_001 + 2 * s, n), band, FS, &params).map(|v| v.value))
            .sum::<painnet::Result<f64>>()
            .map_err(|e| e.to_string())?
            / 100.0;
        let ratio = mean * k;
        check!(
            (ratio - 1.0).abs() <= 0.5,
            "{}: white-noise MSC {mean:.4} vs 1/K = {:.4}",
            band.name,
            1.0 / k
        );
        summary.push(format!("{}={ratio:.2}", band.name));
    }
    Ok(format!("K = {k}, mean MSC * K: {}", summary.join(" ")))
}

// 4 ------------------------------------------------------------------------

fn mi_estimator() -> Outcome {
    for c in [2usize, 3] {
        let labels: Vec<usize> = (0..300 * c).map(|i| i % c).collect();
        let values: Vec<f64> = labels.iter().map(|&l| l as f64 * 1.5).collect();
        let bits = mutual_information(&values, &labels, 8).map_err(|e| e.to_string())?.bits;
        check!((bits - (c as f64).log2()).abs() <= 1e-6, "{c} classes: {bits} bits");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 10_000;
    let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let null = mutual_information(&values, &labels, 8).map_err(|e| e.to_string())?.bits;
    check!(null < 0.01, "null MI {null}");
    let informative: Vec<usize> = values
        .iter()
        .map(|&v| usize::from(v + 0.3 * rng.random::<f64>() > 0.6))
        .collect();
    let a = mutual_information(&values, &informative, 8)
        .map_err(|e| e.to_string())?
        .bits;
    let t: Vec<f64> = values.iter().map(|v| 2.0 * v + 1.0).collect();
    let b = mutual_information(&t, &informative, 8).map_err(|e| e.to_string())?.bits;
    check!(a == b, "2x+1 changed MI from {a} to {b}");
    Ok(format!("null {null:.5} bits, monotone invariance exact at {a:.4} bits"))
}

// 5 ------------------------------------------------------------------------

fn classifier_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((20, 5), |_| rng.sample::<f64, _>(StandardNormal));
    let mut worst: f64 = 0.0;
    for n_classes in [2usize, 3] {
        let y: Vec<usize> = (0..20).map(|i| (i * 7 + 1) % n_classes).collect();
        let theta: Vec<f64> = (0..n_params(5, n_classes))
            .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (_, grad) = loss_and_gradient(x.view(), &y, n_classes, 0.05, &theta);
        for j in 0..theta.len() {
            let h = 1e-5;
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[j] += h;
            tm[j] -= h;
            let fd = (loss_and_gradient(x.view(), &y, n_classes, 0.05, &tp).0
                - loss_and_gradient(x.view(), &y, n_classes, 0.05, &tm).0)
                / (2.0 * h);
            worst = worst.max((fd - grad[j]).abs() / grad[j].abs().max(1e-3));
        }
    }
    check!(worst <= 1e-5, "gradient relative error {worst:.2e}");

    let y: Vec<usize> = (0..20)
        .map(|i| usize::from(x[[i, 0]] + 0.5 * x[[i, 1]] > 0.0))
        .collect();
    let (_, trace) =
        LogisticModel::fit_traced(x.view(), &y, 2, &LogisticParams::default()).map_err(|e| e.to_string())?;
    check!(trace.losses.windows(2).all(|w| w[1] <= w[0]), "logistic loss increased");

    let p = ndarray::array![0.3, -1.2, 4.0];
    let q = ndarray::array![1.3, -1.2, 4.0];
    let self_k = rbf_kernel(p.view(), p.view(), 0.7);
    let unit = rbf_kernel(p.view(), q.view(), 1.0);
    check!(self_k == 1.0, "K(x, x) = {self_k}");
    check!((unit - (-1.0f64).exp()).abs() < 1e-15, "K at unit distance = {unit}");

    let xr = Array2::from_shape_fn((150, 6), |_| rng.random::<f64>());
    let yr: Vec<usize> = (0..150)
        .map(|i| usize::from(xr[[i, 2]] > 0.5) + usize::from(xr[[i, 4]] > 0.7))
        .collect();
    let spec = ModelSpec::default_for(ModelKind::Rf);
    let a = spec.fit(xr.view(), &yr, 3, 42).map_err(|e| e.to_string())?;
    let b = spec.fit(xr.view(), &yr, 3, 42).map_err(|e| e.to_string())?;
    let sum: f64 = a.importances().map_err(|e| e.to_string())?.iter().sum();
    check!((sum - 1.0).abs() <= 1e-9, "importances sum to {sum}");
    let (ja, jb) = (
        a.to_json().map_err(|e| e.to_string())?,
        b.to_json().map_err(|e| e.to_string())?,
    );
    check!(ja == jb, "fixed-seed forests differ");
    Ok(format!(
        "gradient error {worst:.1e}, {} monotone LR steps, importance sum {sum:.12}",
        trace.losses.len()
    ))
}

// Shared synthetic data -------------------------------------------------------

fn effect_config(cfg: SynthConfig) -> SynthConfig {
    let mut cfg = cfg;
    for ch in 4..7 {
        cfg = cfg.with_effect(EffectSpec::band_power(ch, BandName::Alpha, 4.0, PainClass::Pain));
    }
    cfg.with_effect(EffectSpec::coherence(0, 1, BandName::Gamma, 0.8, PainClass::Pain))
        .with_effect(EffectSpec::coherence(2, 3, BandName::Gamma, 0.8, PainClass::Pain))
}

fn prepared(cfg: &SynthConfig) -> Result<Prepared32, String> {
    let out = generate::<f32>(cfg).map_err(|e| e.to_string())?;
    let (rec, _) = preprocess(out.recording, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
    prepare(rec, &out.reports, &FeatureConfig::default()).map_err(|e| e.to_string())
}

fn s1(task: Task) -> LabelStrategy {
    LabelStrategy::new(StrategyId::S1, task).expect("S1 supports both tasks")
}

fn evaluate(prep: &Prepared32, ds: &LabeledDataset, cfg: &ProtocolConfig) -> Result<EvalReport, String> {
    let src = prep
        .feature_source(ds, cfg.feature_set, &cfg.selection)
        .map_err(|e| e.to_string())?;
    run_protocol(cfg, ds, src.as_ref()).map_err(|e| e.to_string())
}

// 6 ------------------------------------------------------------------------

type FoldCall = (Vec<usize>, Vec<usize>, Vec<usize>);

struct Audited<'a> {
    inner: &'a dyn FeatureSource<f32>,
    calls: Mutex<Vec<FoldCall>>,
}

impl FeatureSource<f32> for Audited<'_> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    fn fold_features(
        &self,
        fit: &[usize],
        train: &[usize],
        test: &[usize],
        labels: &[usize],
    ) -> painnet::Result<FoldFeatures<f32>> {
        self.calls
            .lock()
            .expect("audit lock")
            .push((fit.to_vec(), train.to_vec(), test.to_vec()));
        self.inner.fold_features(fit, train, test, labels)
    }
}

fn protocol_integrity() -> Outcome {
    let prep = prepared(&effect_config(SynthConfig::binary(8, 12, 6)))?;
    let ds = prep.dataset(s1(Task::Binary)).map_err(|e| e.to_string())?;
    let cfg = ProtocolConfig {
        feature_set: FeatureSet::Both,
        selection: SelectionConfig {
            k: 4,
            ..Default::default()
        },
        ..Default::default()
    };
    let inner = prep
        .feature_source(&ds, cfg.feature_set, &cfg.selection)
        .map_err(|e| e.to_string())?;
    let audited = Audited {
        inner: inner.as_ref(),
        calls: Mutex::new(Vec::new()),
    };
    let first = run_protocol(&cfg, &ds, &audited).map_err(|e| e.to_string())?;
    let calls = audited.calls.into_inner().expect("audit lock");
    check!(calls.len() == 15 * 20, "{} folds audited", calls.len());
    let mut touched = 0usize;
    for (fit, train, test) in &calls {
        let held: BTreeSet<usize> = test.iter().map(|&r| ds.rows[r].trial_id).collect();
        for r in fit.iter().chain(train) {
            touched += 1;
            check!(
                !held.contains(&ds.rows[*r].trial_id),
                "row {r} of a held-out trial was used for fitting"
            );
        }
    }
    check!(
        first.leakage_violations == 0,
        "report counts {} leakage violations",
        first.leakage_violations
    );
    for it in &first.iterations {
        for f in &it.folds {
            check!(
                f.train_class_counts.iter().all(|&c| c == f.train_class_counts[0]),
                "unbalanced fold {:?}",
                f.train_class_counts
            );
        }
    }
    let second = evaluate(&prep, &ds, &cfg)?;
    let (a, b) = (
        first.to_json().map_err(|e| e.to_string())?,
        second.to_json().map_err(|e| e.to_string())?,
    );
    check!(a == b, "reports with identical seeds differ");
    Ok(format!(
        "300 folds, {touched} fitted rows audited, 0 leaks, balanced, {} byte report reproduced",
        a.len()
    ))
}

// 7 ------------------------------------------------------------------------

const RECOVERY_SEEDS: u64 = 20;

fn recovery() -> Outcome {
    let coherent: BTreeSet<&str> = ["E01", "E02", "E03", "E04"].into();
    let mut hits = 0;
    let mut pib_acc = 0.0;
    let mut msc_acc = 0.0;
    let mut misses = Vec::new();
    for seed in 0..RECOVERY_SEEDS {
        let t0 = Instant::now();
        let prep = prepared(&effect_config(SynthConfig::binary(10, 30, 700 + seed)))?;
        progress!("seed {seed}: data {:.1} s", t0.elapsed().as_secs_f64());
        let ds = prep.dataset(s1(Task::Binary)).map_err(|e| e.to_string())?;
        let mut msc_cfg = ProtocolConfig {
            seed,
            feature_set: FeatureSet::Msc,
            ..Default::default()
        };
        if seed == 0 {
            let pib_cfg = ProtocolConfig {
                seed,
                feature_set: FeatureSet::Pib,
                ..Default::default()
            };
            pib_acc = evaluate(&prep, &ds, &pib_cfg)?.grand_mean;
            progress!(
                "seed {seed}: RF/PIB {pib_acc:.3} at {:.1} s",
                t0.elapsed().as_secs_f64()
            );
        } else {
            msc_cfg.num_iterations = 1;
            msc_cfg.num_folds = 5;
        }
        let report = evaluate(&prep, &ds, &msc_cfg)?;
        progress!(
            "seed {seed}: RF/MSC {:.3} at {:.1} s",
            report.grand_mean,
            t0.elapsed().as_secs_f64()
        );
        if seed == 0 {
            msc_acc = report.grand_mean;
        }
        let imp = report.importances.ok_or("forest run produced no importances")?;
        let net = build_network(imp.iter().map(|(k, v)| (k.as_str(), *v))).map_err(|e| e.to_string())?;
        let top = top_electrodes(&net, 3);
        if top.len() == 3 && top.iter().all(|e| coherent.contains(e.as_str())) {
            hits += 1;
        } else {
            misses.push(format!("seed {seed}: {top:?}"));
        }
    }
    check!(pib_acc >= 0.90, "RF/PIB grand mean {pib_acc:.3}");
    check!(msc_acc >= 0.85, "RF/MSC grand mean {msc_acc:.3}");
    check!(
        hits >= 18,
        "coherence electrodes in top 3 for {hits}/{RECOVERY_SEEDS} seeds; misses {misses:?}"
    );
    Ok(format!(
        "RF/PIB {pib_acc:.3}, RF/MSC {msc_acc:.3}, coherence electrodes fill the top 3 in {hits}/{RECOVERY_SEEDS} seeds"
    ))
}

// 8 ------------------------------------------------------------------------

fn null_calibration() -> Outcome {
    let mut parts = Vec::new();
    for (task, cfg) in [
        (Task::Binary, SynthConfig::binary(8, 40, 801)),
        (Task::Ternary, SynthConfig::ternary(8, 27, 802)),
    ] {
        let prep = prepared(&cfg)?;
        let strategy = s1(task);
        let ds = label_dataset(
            &prep.with_shuffled_scores(803),
            painnet::signal::WINDOWS_PER_TRIAL,
            strategy,
        )
        .map_err(|e| e.to_string())?;
        let pc = ProtocolConfig {
            strategy,
            ..Default::default()
        };
        let report = evaluate(&prep, &ds, &pc)?;
        let chance = chance_level(task);
        check!(
            (report.grand_mean - chance).abs() <= 0.10,
            "{task:?} grand mean {:.3} vs chance {chance:.3}",
            report.grand_mean
        );
        parts.push(format!("{task:?} {:.3} (chance {chance:.2})", report.grand_mean));
    }
    Ok(parts.join(", "))
}

// 9 ------------------------------------------------------------------------

fn dimensions() -> Outcome {
    let names: Vec<String> = (0..20).map(|i| format!("E{:02}", i + 1)).collect();
    let windows: Vec<Window<f32>> = (0..2)
        .map(|w| Window {
            trial_id: 0,
            window_index: w,
            samples: Array2::from_shape_fn((20, 1000), |(c, t)| {
                ((c * 7919 + t * 104_729 + w) % 1000) as f32 / 1000.0
            }),
        })
        .collect();
    let m = extract_msc_matrix(
        &windows,
        &names,
        &BandSpec::canonical(),
        &names,
        FS,
        &MscParams::default(),
    )
    .map_err(|e| e.to_string())?;
    check!(m.n_cols() == 1140, "MSC matrix has {} columns", m.n_cols());

    let n = 600 * 500;
    let rec = Recording::new(Array2::<f32>::zeros((1, n)), FS, vec!["A".into()]).map_err(|e| e.to_string())?;
    let (trials, _) = segment_trials(
        &rec,
        &[PainReport {
            timestamp_s: 300.0,
            vas: 5,
        }],
    )
    .map_err(|e| e.to_string())?;
    check!(trials.len() == 1, "{} trials", trials.len());
    let ws = window_trial(&trials[0], false).map_err(|e| e.to_string())?;
    check!(ws.len() == 30, "{} windows", ws.len());
    check!(
        ws.iter().all(|w| w.samples.len_of(Axis(1)) == 5000),
        "window length mismatch"
    );
    Ok("190 pairs x 6 bands = 1140 columns; 30 windows x 5000 samples".into())
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "filter correctness",
            budget: Duration::from_secs(10),
            run: filters,
        },
        Criterion {
            id: 2,
            name: "PIB oracle",
            budget: Duration::from_secs(5),
            run: pib_oracle,
        },
        Criterion {
            id: 3,
            name: "MSC properties",
            budget: Duration::from_secs(60),
            run: msc_properties,
        },
        Criterion {
            id: 4,
            name: "MI estimator",
            budget: Duration::from_secs(30),
            run: mi_estimator,
        },
        Criterion {
            id: 5,
            name: "classifier numerics",
            budget: Duration::from_secs(60),
            run: classifier_numerics,
        },
        Criterion {
            id: 6,
            name: "protocol integrity",
            budget: Duration::from_secs(300),
            run: protocol_integrity,
        },
        Criterion {
            id: 7,
            name: "discriminative recovery",
            budget: Duration::from_secs(900),
            run: recovery,
        },
        Criterion {
            id: 8,
            name: "null calibration",
            budget: Duration::from_secs(900),
            run: null_calibration,
        },
        Criterion {
            id: 9,
            name: "dimensional contracts",
            budget: Duration::from_secs(5),
            run: dimensions,
        },
    ];
    let wanted: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; exceeded {:?} budget", c.budget)),
            other => other,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {}: {} [{:.1} s] {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
