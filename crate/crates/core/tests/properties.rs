use ktts_core::alignment::{durations_from_alignment, expand_by_durations, mas};
use ktts_core::audio::{multi_res_stft_loss, stft, StftLossConfig, StftResolution, Waveform};
use ktts_core::evalbench::{aggregate_mos, ci95_halfwidth, BenchError};
use ktts_core::latent::{aligned_log_likelihood, kl_to_standard_normal, log_prob, DiagGaussianSeq, LatentSeq};
use ktts_core::phonemizer::{normalize_text, phonemize, PhonemeTable, LONG_U};
use ktts_tensor::Tensor;
use proptest::prelude::*;

fn graphemes() -> Vec<String> {
    PhonemeTable::sorani().entries().iter().map(|e| e.grapheme.clone()).collect()
}

/// Words of table graphemes separated by single spaces.
fn table_text() -> impl Strategy<Value = String> {
    let g = graphemes();
    let n = g.len();
    prop::collection::vec(prop::collection::vec(0..n, 1..6), 1..5).prop_map(move |words| {
        words
            .iter()
            .map(|w| w.iter().map(|&i| g[i].as_str()).collect::<String>())
            .collect::<Vec<_>>()
            .join(" ")
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn table_alphabet_always_phonemizes(text in table_text()) {
        let table = PhonemeTable::sorani();
        let normalized = normalize_text(&text).unwrap();
        let a = phonemize(&normalized, &table).unwrap();
        let b = phonemize(&normalize_text(&text).unwrap(), &table).unwrap();
        prop_assert_eq!(&a, &b);
        let spaces = text.matches(' ').count();
        prop_assert!(a.len() <= text.chars().count() + spaces);
        prop_assert!(a.len() >= 1);
    }

    #[test]
    fn long_vowel_digraph_wins(text in table_text()) {
        let table = PhonemeTable::sorani();
        let u = table.entry(LONG_U).map(|e| match e.reading {
            ktts_core::phonemizer::Reading::Fixed(id) => id,
            _ => unreachable!("the digraph has one reading"),
        }).unwrap();
        let seq = phonemize(&normalize_text(&text).unwrap(), &table).unwrap();
        let found = seq.ids().iter().filter(|&&id| id == u).count();
        prop_assert_eq!(found, text.matches(LONG_U).count());
    }

    #[test]
    fn stft_magnitude_scales_with_gain(
        samples in prop::collection::vec(-0.5f64..0.5, 300..700),
        gain in 0.1f64..2.0,
    ) {
        let x = Waveform::new(samples.clone()).unwrap();
        let gx = Waveform::new(samples.iter().map(|s| s * gain).collect()).unwrap();
        let a = stft(&x, 128, 32, 96).unwrap();
        let b = stft(&gx, 128, 32, 96).unwrap();
        prop_assert_eq!(a.magnitudes.shape(), &[65, (samples.len() - 96) / 32 + 1]);
        for (p, q) in a.magnitudes.data().iter().zip(b.magnitudes.data()) {
            prop_assert!((q - gain * p).abs() <= 1e-6 * (gain * p).abs().max(1e-9));
        }
    }

    #[test]
    fn stft_losses_are_non_negative_and_vanish_on_equality(
        a in prop::collection::vec(-0.9f64..0.9, 400),
        b in prop::collection::vec(-0.9f64..0.9, 400),
    ) {
        let cfg = StftLossConfig {
            resolutions: vec![StftResolution::new(128, 32, 96), StftResolution::new(64, 16, 48)],
        };
        let (x, y) = (Waveform::new(a).unwrap(), Waveform::new(b).unwrap());
        let (sc, mag) = multi_res_stft_loss(&x, &y, &cfg).unwrap();
        prop_assert!(sc >= 0.0 && mag >= 0.0);
        prop_assert!(sc > 0.0 && mag > 0.0);
        prop_assert_eq!(multi_res_stft_loss(&x, &x, &cfg).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn kl_is_non_negative(
        (c, t, mean, log_std) in (1usize..5, 1usize..5).prop_flat_map(|(c, t)| {
            (Just(c), Just(t), matrix(c, t), matrix(c, t))
        })
    ) {
        let g = DiagGaussianSeq::from_log_std(Tensor::new(vec![c, t], mean), &Tensor::new(vec![c, t], log_std)).unwrap();
        prop_assert!(kl_to_standard_normal(&g) >= 0.0);
    }

    #[test]
    fn aligned_likelihood_is_a_sum_over_frames(
        (tokens, frames, mean, log_std, z, scores, rotate) in (1usize..5, 0usize..6).prop_flat_map(|(tokens, extra)| {
            let frames = tokens + extra;
            (
                Just(tokens),
                Just(frames),
                matrix(3, tokens),
                matrix(3, tokens),
                matrix(3, frames),
                prop::collection::vec(-5.0f64..0.0, tokens * frames),
                0..frames,
            )
        })
    ) {
        let prior = DiagGaussianSeq::from_log_std(Tensor::new(vec![3, tokens], mean), &Tensor::new(vec![3, tokens], log_std)).unwrap();
        let z = LatentSeq::new(Tensor::new(vec![3, frames], z)).unwrap();
        let path = mas(&Tensor::new(vec![tokens, frames], scores)).unwrap();
        let total = aligned_log_likelihood(&z, &prior, &path).unwrap();

        let expanded = expand_by_durations(&prior, &durations_from_alignment(&path)).unwrap();
        let per_frame = log_prob(&z, &expanded).unwrap();
        prop_assert!((per_frame.iter().sum::<f64>() - total).abs() <= 1e-9 * total.abs().max(1.0));

        // Moving frames together with the prior columns they are scored
        // against leaves the total unchanged.
        let order: Vec<usize> = (0..frames).map(|j| (j + rotate) % frames).collect();
        let zr = LatentSeq::new(Tensor::from_fn2(3, frames, |r, j| z.values().at2(r, order[j]))).unwrap();
        let er = DiagGaussianSeq::new(
            Tensor::from_fn2(3, frames, |r, j| expanded.mean().at2(r, order[j])),
            Tensor::from_fn2(3, frames, |r, j| expanded.std().at2(r, order[j])),
        ).unwrap();
        let rotated: f64 = log_prob(&zr, &er).unwrap().iter().sum();
        prop_assert!((rotated - total).abs() <= 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn mas_path_ignores_a_constant_shift(
        (tokens, frames, eighths, shift) in (1usize..6, 0usize..10).prop_flat_map(|(tokens, extra)| {
            let frames = tokens + extra;
            (Just(tokens), Just(frames), prop::collection::vec(-48i32..=0, tokens * frames), -20i32..20)
        })
    ) {
        // Multiples of 1/8 keep every partial sum exact, so ties are real.
        let scores = Tensor::new(vec![tokens, frames], eighths.iter().map(|&k| k as f64 / 8.0).collect());
        let shifted = scores.map(|v| v + shift as f64);
        let path = mas(&scores).unwrap();
        prop_assert_eq!(&path, &mas(&shifted).unwrap());
        let d = durations_from_alignment(&path);
        prop_assert_eq!(d.as_slice().iter().sum::<usize>(), frames);
        prop_assert!(d.as_slice().iter().all(|&x| x >= 1));
    }

    #[test]
    fn ci_narrows_with_more_samples(
        base in prop::collection::vec(-1.0f64..1.0, 2..40),
        extra in prop::collection::vec(-1.0f64..1.0, 1..40),
        spread in 0.01f64..5.0,
    ) {
        let standardize = |v: &[f64]| -> Option<Vec<f64>> {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            (sd > 1e-6).then(|| v.iter().map(|x| 3.0 + spread * (x - mean) / sd).collect())
        };
        let more: Vec<f64> = base.iter().chain(&extra).copied().collect();
        if let (Some(small), Some(large)) = (standardize(&base), standardize(&more)) {
            let (a, b) = (ci95_halfwidth(&small).unwrap(), ci95_halfwidth(&large).unwrap());
            prop_assert!(b <= a * (1.0 + 1e-12), "{} samples: {}, {} samples: {}", small.len(), a, large.len(), b);
        }
    }

    #[test]
    fn mos_accounts_for_every_rating(scores in prop::collection::vec(1i64..=5, 1..60)) {
        let ratings: Vec<(String, i64)> = scores.iter().enumerate().map(|(i, &s)| (format!("s{}", i % 4), s)).collect();
        let used: Vec<f64> = scores.iter().filter(|&&s| s > 1).map(|&s| s as f64).collect();
        match aggregate_mos(&ratings) {
            Ok(r) => {
                prop_assert_eq!(r.n_used + r.n_excluded, scores.len());
                prop_assert_eq!(r.n_used, used.len());
                prop_assert!((r.mos - used.iter().sum::<f64>() / used.len() as f64).abs() < 1e-12);
                prop_assert!(r.mos >= 2.0 && r.mos <= 5.0);
            }
            Err(BenchError::NoUsableRatings(n)) => {
                prop_assert!(used.is_empty());
                prop_assert_eq!(n, scores.len());
            }
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
