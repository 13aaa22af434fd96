mod common;

use std::collections::BTreeSet;
use std::path::Path;

use ktts_core::audio::{encode_wav, write_wav};
use ktts_core::corpus::*;
use proptest::prelude::*;

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn two_row_manifest_measures_audio() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    write(&csv, "id,transcript,category\na,سڵاو,News\nb,باران,Sport\n");
    write_wav(&dir.path().join("a.wav"), &vec![0.1; 22050]).unwrap();
    write_wav(&dir.path().join("b.wav"), &vec![0.0; 11025]).unwrap();
    let utts = load_manifest(&csv, dir.path()).unwrap();
    assert_eq!(utts.len(), 2);
    assert_eq!(utts[0].id, "a");
    assert_eq!(utts[0].duration_s, 1.0);
    assert_eq!(utts[1].duration_s, 0.5);
    assert_eq!(utts[1].category, "Sport");
}

#[test]
fn duplicate_id_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    write(&csv, "id,transcript,category\nx,با,News\ny,دا,News\nx,ما,News\n");
    match read_manifest(&csv) {
        Err(CorpusError::DuplicateId { id, line, first }) => {
            assert_eq!(id, "x");
            assert_eq!((line, first), (4, 2));
        }
        other => panic!("expected duplicate id, got {other:?}"),
    }
}

#[test]
fn stereo_audio_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    write(&csv, "id,transcript,category\ns,با,News\n");
    let mut bytes = encode_wav(&[0.0; 100]);
    bytes[22] = 2; // channel count
    std::fs::write(dir.path().join("s.wav"), bytes).unwrap();
    let err = load_manifest(&csv, dir.path()).unwrap_err();
    assert!(matches!(err, CorpusError::InvalidAudio { ref id, line: 2, .. } if id == "s"), "{err}");
    assert!(err.to_string().contains("channels"), "{err}");
}

#[test]
fn missing_audio_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    write(&csv, "id,transcript,category\nq,با,News\n");
    assert!(matches!(
        load_manifest(&csv, dir.path()),
        Err(CorpusError::MissingAudio { line: 2, .. })
    ));
}

#[test]
fn header_and_empty_fields() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    write(&csv, "name,transcript,category\na,b,c\n");
    assert!(matches!(read_manifest(&csv), Err(CorpusError::Header { .. })));
    write(&csv, "id,transcript,category\na,,News\n");
    assert!(matches!(read_manifest(&csv), Err(CorpusError::EmptyField { line: 2, .. })));
    write(&csv, "id,transcript,category,duration_s\na,با,News,-1\n");
    assert!(matches!(read_manifest(&csv), Err(CorpusError::BadDuration { .. })));
}

#[test]
fn manifest_round_trip_keeps_durations() {
    let dir = tempfile::tempdir().unwrap();
    let rows = common::metadata_rows(&[1.5, 2.25, 3.0]);
    let path = dir.path().join("out.csv");
    write_manifest(&path, &rows).unwrap();
    let back = read_manifest(&path).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!((&a.id, &a.transcript, &a.category, a.duration_s), (&b.id, &b.transcript, &b.category, b.duration_s));
    }
}

#[test]
fn six_thousand_row_split() {
    let ids: Vec<usize> = (0..6078).collect();
    let s = split_corpus(&ids, &SplitSpec::new(42)).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (4255, 608, 1215));
    let again = split_corpus(&ids, &SplitSpec::new(42)).unwrap();
    assert_eq!(s, again);
    let other = split_corpus(&ids, &SplitSpec::new(43)).unwrap();
    assert_ne!(s.train, other.train);
}

#[test]
fn split_needs_three_items() {
    assert!(matches!(split_corpus(&[1, 2], &SplitSpec::new(0)), Err(CorpusError::TooFew(2))));
    let bad = SplitSpec {
        ratios: [0.5, 0.5, 0.0],
        seed: 0,
    };
    assert!(matches!(split_corpus(&[1, 2, 3], &bad), Err(CorpusError::BadRatios(_))));
}

#[test]
fn stats_on_small_fixtures() {
    let s = corpus_stats([(1.0, "News"), (3.0, "Sport")], 4).unwrap();
    assert_eq!(s.mean_s, 2.0);
    assert_eq!(s.total_hours, 4.0 / 3600.0);
    assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 2);
    let one = corpus_stats([(2.5, "News")], 3).unwrap();
    assert_eq!((one.min_s, one.max_s, one.mean_s), (2.5, 2.5, 2.5));
    assert!(matches!(corpus_stats(std::iter::empty(), 3), Err(CorpusError::Empty)));
}

#[test]
fn metadata_fixture_echoes_aggregates() {
    let d = common::durations_with(6078, 0.502, 16.781, 8.076);
    let rows = common::metadata_rows(&d);
    let s = corpus_stats(rows.iter().map(|r| (r.duration_s.unwrap(), r.category.as_str())), 20).unwrap();
    assert_eq!(s.count, 6078);
    assert_eq!(format!("{:.3}", s.min_s), "0.502");
    assert_eq!(format!("{:.3}", s.max_s), "16.781");
    assert_eq!(format!("{:.3}", s.mean_s), "8.076");
    assert_eq!(format!("{:.2}", s.total_hours), "13.63");
    assert_eq!(s.per_category.len(), 12);
    assert_eq!(s.histogram.len(), 20);
}

#[test]
fn toy_corpus_files_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let rows = write_toy_corpus(dir.path(), 4, 9).unwrap();
    let utts = load_manifest(&dir.path().join("manifest.csv"), &dir.path().join("wavs")).unwrap();
    assert_eq!(utts.len(), 4);
    for (r, u) in rows.iter().zip(&utts) {
        assert_eq!(r.id, u.id);
        assert!((r.duration_s.unwrap() - u.duration_s).abs() < 1e-12);
        assert!(u.duration_s >= 2200.0 / 22050.0);
    }
    assert_eq!(toy_corpus(4, 9), toy_corpus(4, 9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_an_exact_partition(n in 3usize..=10_000, seed in any::<u64>()) {
        let ids: Vec<usize> = (0..n).collect();
        let s = split_corpus(&ids, &SplitSpec::new(seed)).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        prop_assert_eq!(all.len(), n);
        all.sort_unstable();
        prop_assert_eq!(all, ids);
        let (tr, va, te) = split_counts(n, &SplitSpec::new(seed));
        prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), (tr, va, te));
    }

    #[test]
    fn split_counts_follow_rounding(n in 3usize..=10_000) {
        let (tr, va, te) = split_counts(n, &SplitSpec::new(0));
        prop_assert_eq!(tr, (0.7 * n as f64).round() as usize);
        prop_assert_eq!(va, (0.1 * n as f64).round() as usize);
        prop_assert_eq!(tr + va + te, n);
    }

    #[test]
    fn stats_ignore_order(
        items in prop::collection::vec((0.01f64..30.0, 0usize..12), 1..200),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let named: Vec<(f64, &str)> = items.iter().map(|&(d, c)| (d, DEFAULT_CATEGORIES[c])).collect();
        let mut shuffled = named.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = corpus_stats(named.iter().copied(), 7).unwrap();
        let b = corpus_stats(shuffled.iter().copied(), 7).unwrap();
        let cats: BTreeSet<&str> = named.iter().map(|p| p.1).collect();
        prop_assert_eq!(a.per_category.len(), cats.len());
        prop_assert_eq!(a, b);
    }
}
