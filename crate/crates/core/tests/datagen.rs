use painnet::bands::{BandName, BandSpec};
use painnet::datagen::*;
use painnet::labeling::{label, LabelStrategy, PainClass, StrategyId, Task};
use painnet::signal::{segment_trials, window_trial};
use painnet::spectral::{msc, pib, MscParams, PibOptions};

fn class_means(
    out: &SynthOutput<f64>,
    ch: usize,
    band: BandName,
    windows_per_trial: usize,
) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let (trials, _) = segment_trials(&out.recording, &out.reports).unwrap();
    let spec = BandSpec::by_name(band);
    let (mut pain, mut calm) = (Vec::new(), Vec::new());
    for (trial, class) in trials.iter().zip(&out.classes) {
        for w in window_trial(trial, false).unwrap().iter().take(windows_per_trial) {
            let x: Vec<f64> = w.samples.row(ch).to_vec();
            let v = pib(&x, &spec, 500.0, &PibOptions::default()).unwrap();
            if *class == PainClass::NoPain {
                calm.push(v);
            } else {
                pain.push(v);
            }
        }
    }
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (m(&pain), m(&calm), pain, calm)
}

#[test]
fn alpha_power_ratio_is_recovered() {
    let cfg =
        SynthConfig::binary(2, 4, 3).with_effect(EffectSpec::band_power(0, BandName::Alpha, 4.0, PainClass::Pain));
    let out = generate::<f64>(&cfg).unwrap();
    let (p, c, _, _) = class_means(&out, 0, BandName::Alpha, 30);
    let ratio = p / c;
    assert!((3.0..=5.0).contains(&ratio), "alpha ratio {ratio}");
    let (p1, c1, _, _) = class_means(&out, 1, BandName::Alpha, 30);
    assert!((p1 / c1 - 1.0).abs() < 0.3);
}

#[test]
fn coherence_target_is_recovered() {
    let cfg =
        SynthConfig::binary(3, 1, 5).with_effect(EffectSpec::coherence(0, 1, BandName::Gamma, 0.8, PainClass::Pain));
    let out = generate::<f64>(&cfg).unwrap();
    let (trials, _) = segment_trials(&out.recording, &out.reports).unwrap();
    let gamma = BandSpec::by_name(BandName::Gamma);
    for (trial, class) in trials.iter().zip(&out.classes) {
        let windows = window_trial(trial, false).unwrap();
        let mean = |a: usize, b: usize| {
            windows
                .iter()
                .map(|w| {
                    let x = w.samples.row(a).to_vec();
                    let y = w.samples.row(b).to_vec();
                    msc(&x, &y, &gamma, 500.0, &MscParams::default()).unwrap().value
                })
                .sum::<f64>()
                / windows.len() as f64
        };
        if *class == PainClass::Pain {
            let c = mean(0, 1);
            assert!((0.7..=0.9).contains(&c), "coherence {c}");
        } else {
            assert!(mean(0, 1) < 0.2);
        }
        assert!(mean(0, 2) < 0.2);
    }
}

#[test]
fn unit_effects_leave_classes_indistinguishable() {
    let mut close = 0;
    for seed in 0..50u64 {
        let cfg = SynthConfig::binary(1, 2, seed).with_effect(EffectSpec::band_power(
            0,
            BandName::Alpha,
            1.0,
            PainClass::Pain,
        ));
        let out = generate::<f32>(&cfg).unwrap();
        let rec = out.recording.samples().mapv(|v| v as f64);
        let rec = painnet::signal::Recording::new(rec, 500.0, out.recording.channel_names().to_vec()).unwrap();
        let out = SynthOutput {
            recording: rec,
            reports: out.reports,
            classes: out.classes,
        };
        let (p, c, pv, cv) = class_means(&out, 0, BandName::Alpha, 5);
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        let pooled = ((var(&pv, p) + var(&cv, c)) / 2.0).sqrt();
        close += ((p - c).abs() < pooled) as usize;
    }
    assert!(close >= 45, "{close}/50 seeds within one pooled SD");
}

#[test]
fn generation_is_deterministic_and_labels_match() {
    let cfg =
        SynthConfig::ternary(2, 2, 77).with_effect(EffectSpec::band_power(1, BandName::Beta, 2.0, PainClass::HighPain));
    let a = generate::<f32>(&cfg).unwrap();
    let b = generate::<f32>(&cfg).unwrap();
    assert_eq!(a.recording.samples(), b.recording.samples());
    assert_eq!(a.reports, b.reports);
    let s = LabelStrategy::new(StrategyId::S1, Task::Ternary).unwrap();
    for (r, c) in a.reports.iter().zip(&a.classes) {
        assert_eq!(label(r.vas, s).unwrap(), *c);
    }
    let bin = SynthConfig::binary(1, 3, 1);
    let out = generate::<f32>(&bin).unwrap();
    for strategy in [StrategyId::S1, StrategyId::S2, StrategyId::S3] {
        let s = LabelStrategy::new(strategy, Task::Binary).unwrap();
        for (r, c) in out.reports.iter().zip(&out.classes) {
            assert_eq!(label(r.vas, s).unwrap(), *c);
        }
    }
    assert_eq!(out.recording.n_samples(), 6 * 150_000);
    let (trials, warnings) = segment_trials(&out.recording, &out.reports).unwrap();
    assert_eq!(trials.len(), 6);
    assert!(warnings.is_empty());
}

#[test]
fn impossible_configs_are_rejected() {
    let base = SynthConfig::binary(3, 1, 0);
    let bad = [
        base.clone()
            .with_effect(EffectSpec::coherence(0, 1, BandName::Gamma, 1.2, PainClass::Pain)),
        base.clone()
            .with_effect(EffectSpec::coherence(0, 0, BandName::Gamma, 0.5, PainClass::Pain)),
        base.clone()
            .with_effect(EffectSpec::coherence(0, 1, BandName::Gamma, 0.8, PainClass::Pain))
            .with_effect(EffectSpec::coherence(0, 2, BandName::Gamma, 0.8, PainClass::Pain)),
        base.clone()
            .with_effect(EffectSpec::band_power(5, BandName::Alpha, 2.0, PainClass::Pain)),
        base.clone()
            .with_effect(EffectSpec::band_power(0, BandName::Alpha, 0.0, PainClass::Pain)),
    ];
    for cfg in bad {
        assert!(
            matches!(generate::<f32>(&cfg), Err(painnet::Error::Config(_))),
            "{cfg:?}"
        );
    }
    let ok = base
        .with_effect(EffectSpec::coherence(0, 1, BandName::Gamma, 0.2, PainClass::Pain))
        .with_effect(EffectSpec::coherence(0, 2, BandName::Gamma, 0.2, PainClass::Pain));
    assert!(ok.validate().is_ok());
}

#[test]
fn config_round_trips_through_json() {
    let cfg = SynthConfig::binary(4, 2, 9).with_effect(EffectSpec::coherence(
        0,
        1,
        BandName::HighGamma,
        0.5,
        PainClass::Pain,
    ));
    let text = serde_json::to_string(&cfg).unwrap();
    let back: SynthConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let minimal: SynthConfig =
        serde_json::from_str(r#"{"channels":2,"trials_per_class":{"no_pain":1,"pain":1}}"#).unwrap();
    assert_eq!(minimal.sample_rate_hz, 500.0);
    assert_eq!(minimal.names(), vec!["E01", "E02"]);
}

// Trial-level permutation test on the mean band power of a channel that
// carries no effect.
#[test]
fn background_channels_pass_permutation_test() {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let runs = 100;
    let mut passed = 0;
    for seed in 0..runs {
        let band = BandName::ALL[seed as usize % 6];
        let cfg = SynthConfig::binary(2, 10, 1000 + seed).with_effect(EffectSpec::band_power(
            0,
            BandName::Alpha,
            4.0,
            PainClass::Pain,
        ));
        let out = generate::<f32>(&cfg).unwrap();
        let (trials, _) = segment_trials(&out.recording, &out.reports).unwrap();
        let spec = BandSpec::by_name(band);
        let values: Vec<f64> = trials
            .iter()
            .map(|t| {
                let windows = window_trial(t, false).unwrap();
                windows
                    .iter()
                    .map(|w| pib(&w.samples.row(1).to_vec(), &spec, 500.0, &PibOptions::default()).unwrap() as f64)
                    .sum::<f64>()
                    / windows.len() as f64
            })
            .collect();
        let mut labels: Vec<bool> = out.classes.iter().map(|c| *c == PainClass::Pain).collect();
        let stat = |labels: &[bool]| {
            let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
            for (v, &l) in values.iter().zip(labels) {
                if l {
                    s1 += v;
                    n1 += 1.0;
                } else {
                    s0 += v;
                    n0 += 1.0;
                }
            }
            (s1 / n1 - s0 / n0).abs()
        };
        let observed = stat(&labels);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let perms = 999;
        let extreme = (0..perms)
            .filter(|_| {
                labels.shuffle(&mut rng);
                stat(&labels) >= observed
            })
            .count();
        let p = (1 + extreme) as f64 / (1 + perms) as f64;
        if p > 0.01 {
            passed += 1;
        }
    }
    assert!(passed >= 97, "{passed}/{runs} runs passed");
}
