#![allow(dead_code)]

use ktts_core::corpus::{ManifestRow, DEFAULT_CATEGORIES};

/// `count` durations with exactly the given minimum and maximum whose mean
/// is `mean`: the extremes plus symmetric pairs around the mean of the rest.
pub fn durations_with(count: usize, min: f64, max: f64, mean: f64) -> Vec<f64> {
    assert!(count >= 4 && count % 2 == 0);
    let rest_mean = (mean * count as f64 - min - max) / (count - 2) as f64;
    let reach = (rest_mean - min).min(max - rest_mean) * 0.99;
    let pairs = (count - 2) / 2;
    let mut out = vec![min, max];
    for k in 0..pairs {
        let delta = reach * (k as f64 + 0.5) / pairs as f64;
        out.push(rest_mean - delta);
        out.push(rest_mean + delta);
    }
    out
}

/// Metadata-only manifest rows with the given durations, categories cycling
/// through the default list.
pub fn metadata_rows(durations: &[f64]) -> Vec<ManifestRow> {
    durations
        .iter()
        .enumerate()
        .map(|(i, &d)| ManifestRow {
            id: format!("utt{i:05}"),
            transcript: "سڵاو".into(),
            category: DEFAULT_CATEGORIES[i % DEFAULT_CATEGORIES.len()].into(),
            duration_s: Some(d),
            line: 0,
        })
        .collect()
}
