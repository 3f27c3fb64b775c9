use statrs::distribution::{Binomial, DiscreteCDF};

use srsad_core::datagen::label::fill_gaps;
use srsad_core::datagen::{
    apply_augmentations, build_test_set, sample_at, stream_rng, AugInput, AugmentationConfig, Corpus, MixPolicy,
    SampleClass, Split, SynthCorpusSpec, TestSetSpec,
};
use srsad_core::dsp::MultiChannel;

/// Two-sided 99% acceptance interval for a Binomial(n, p) count.
fn binomial_99(n: u64, p: f64) -> (u64, u64) {
    let b = Binomial::new(p, n).unwrap();
    (b.inverse_cdf(0.005), b.inverse_cdf(0.995))
}

fn small_corpus(seed: u64) -> Corpus {
    let spec = SynthCorpusSpec {
        speakers: [2, 1, 2],
        clips_per_speaker: 1,
        speech_clip_s: 4.0,
        songs: [2, 1, 2],
        song_s: 5.0,
        noises: [1, 1, 2],
        noise_s: 5.0,
    };
    Corpus::synthetic(&spec, seed).unwrap()
}

#[test]
fn speech_fraction_follows_p_speech() {
    let c = small_corpus(1);
    let policy = MixPolicy {
        p_speech: 0.8,
        chunk_len_s: 0.05,
        augmentations: AugmentationConfig::disabled(),
        seed: 17,
        ..MixPolicy::default()
    };
    let n = 10_000;
    let speech = (0..n)
        .filter(|&i| sample_at(&c, &policy, Split::Train, i).unwrap().provenance.class == SampleClass::Speech)
        .count() as u64;
    let (lo, hi) = binomial_99(n, 0.8);
    assert!((lo..=hi).contains(&speech), "{speech} outside [{lo}, {hi}]");
}

#[test]
fn augmentation_counts_match_their_probabilities() {
    let cfg = AugmentationConfig::default();
    let tone = |f: f64| -> Vec<f64> { (0..800).map(|i| (i as f64 * f).sin() * 0.3).collect() };
    let input = AugInput {
        target: MultiChannel::new(vec![tone(0.05), tone(0.07)]).unwrap(),
        background: Some(MultiChannel::new(vec![tone(0.9)]).unwrap()),
    };
    let n = 10_000u64;
    let mut counts = std::collections::BTreeMap::<&str, u64>::new();
    let mut joint = 0u64;
    for i in 0..n {
        let mut rng = stream_rng(99, 7, i);
        let out = apply_augmentations(input.clone(), &cfg, &mut rng).unwrap();
        let names: Vec<&str> = out.applied.iter().map(|a| a.name()).collect();
        for name in &names {
            *counts.entry(name).or_default() += 1;
        }
        if names.contains(&"clipping") && names.contains(&"lowpass") {
            joint += 1;
        }
    }
    let expected = [
        ("snr_jitter", cfg.snr_jitter.probability),
        ("band_reject", cfg.band_reject.probability),
        ("highpass", cfg.highpass.probability),
        ("lowpass", cfg.lowpass.probability),
        ("clipping", cfg.clipping.probability),
        ("amplitude_scale", cfg.amplitude_scale.probability),
        ("white_noise", cfg.white_noise.probability),
        ("stereo_to_mono", cfg.stereo_to_mono),
    ];
    for (name, p) in expected {
        let got = counts.get(name).copied().unwrap_or(0);
        let (lo, hi) = binomial_99(n, p);
        assert!((lo..=hi).contains(&got), "{name}: {got} outside [{lo}, {hi}]");
    }
    let (lo, hi) = binomial_99(n, 0.01);
    assert!((lo..=hi).contains(&joint), "clipping and lowpass together: {joint}");
}

#[test]
fn gap_filling_is_exact_for_every_gap_length() {
    for gap in 1..=40 {
        let mut v = vec![true];
        v.extend(std::iter::repeat_n(false, gap));
        v.push(true);
        fill_gaps(&mut v, 18);
        assert_eq!(v.iter().all(|&a| a), gap <= 18, "gap {gap}");
    }
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(lo, hi).
fn ks_uniform(mut x: Vec<f64>, lo: f64, hi: f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn realized_test_snrs_are_uniform() {
    let c = small_corpus(2);
    let spec = TestSetSpec {
        n_samples: 1000,
        duration_s: 3.0,
        speech_excerpt_s: 2.0,
        p_speech: 1.0,
        split: Split::Test,
        seed: 5,
        ..TestSetSpec::default()
    };
    let set = build_test_set(&c, &spec).unwrap();
    let snrs: Vec<f64> = set.iter().filter_map(|s| s.provenance.realized_snr_db).collect();
    assert!(snrs.len() >= 990);
    let d = ks_uniform(snrs.clone(), -5.0, 10.0);
    let critical = 1.628 / (snrs.len() as f64).sqrt();
    assert!(d < critical, "KS D = {d}, critical {critical}");
}
