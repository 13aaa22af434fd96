//! Latency, real-time-factor and MOS aggregation with Student-t 95%
//! confidence intervals.

use std::fmt::{self, Write};
use std::path::Path;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("need at least 2 measurements, got {0}")]
    TooFewSamples(usize),
    #[error("repeats must be at least 2, got {0}")]
    TooFewRepeats(usize),
    #[error("no texts to benchmark")]
    NoTexts,
    #[error("synthesis failed for {text:?}: {message}")]
    Synth { text: String, message: String },
    #[error("synthesis of {0:?} produced no audio")]
    EmptyOutput(String),
    #[error("no usable ratings (all {0} were 1 or below)")]
    NoUsableRatings(usize),
    #[error("rating {score} for `{sample}` is outside 1..=5")]
    BadScore { sample: String, score: i64 },
    #[error("{path}: {message}")]
    Ratings { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Seconds,
    Ratio,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Seconds => "s",
            Unit::Ratio => "x",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchResult {
    pub mean: f64,
    pub ci95_halfwidth: f64,
    pub n: usize,
    pub unit: Unit,
}

/// Two-sided 95% Student-t half-width `t_{0.975, n-1} * s / sqrt(n)`.
pub fn ci95_halfwidth(samples: &[f64]) -> Result<f64, BenchError> {
    let n = samples.len();
    if n < 2 {
        return Err(BenchError::TooFewSamples(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Ok(t * var.sqrt() / (n as f64).sqrt())
}

pub fn summarize(samples: &[f64], unit: Unit) -> Result<BenchResult, BenchError> {
    let ci95_halfwidth = ci95_halfwidth(samples)?;
    Ok(BenchResult {
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        ci95_halfwidth,
        n: samples.len(),
        unit,
    })
}

/// Time saved relative to our own time: `(baseline - ours) / ours * 100`.
pub fn speedup_percent(baseline: f64, ours: f64) -> f64 {
    (baseline - ours) / ours * 100.0
}

/// Times `repeats` passes over `texts` after one untimed warm-up call.
/// `synth` returns the duration in seconds of the audio it produced.
fn timed_runs<E: fmt::Display>(
    mut synth: impl FnMut(&str) -> Result<f64, E>,
    texts: &[&str],
    repeats: usize,
) -> Result<Vec<(f64, f64)>, BenchError> {
    if texts.is_empty() {
        return Err(BenchError::NoTexts);
    }
    if repeats < 2 {
        return Err(BenchError::TooFewRepeats(repeats));
    }
    let fail = |text: &str, e: E| BenchError::Synth {
        text: text.to_string(),
        message: e.to_string(),
    };
    synth(texts[0]).map_err(|e| fail(texts[0], e))?;
    let mut out = Vec::with_capacity(repeats * texts.len());
    for _ in 0..repeats {
        for &text in texts {
            let start = Instant::now();
            let audio_s = synth(text).map_err(|e| fail(text, e))?;
            out.push((start.elapsed().as_secs_f64(), audio_s));
        }
    }
    Ok(out)
}

/// Wall-clock seconds per synthesis call.
pub fn bench_latency<E: fmt::Display>(
    synth: impl FnMut(&str) -> Result<f64, E>,
    texts: &[&str],
    repeats: usize,
) -> Result<BenchResult, BenchError> {
    let runs = timed_runs(synth, texts, repeats)?;
    let wall: Vec<f64> = runs.iter().map(|r| r.0).collect();
    summarize(&wall, Unit::Seconds)
}

/// Synthesis seconds per second of produced audio.
pub fn bench_rtf<E: fmt::Display>(
    synth: impl FnMut(&str) -> Result<f64, E>,
    texts: &[&str],
    repeats: usize,
) -> Result<BenchResult, BenchError> {
    let runs = timed_runs(synth, texts, repeats)?;
    let per_text = texts.iter().cycle();
    let ratios = runs
        .iter()
        .zip(per_text)
        .map(|(&(wall, audio), text)| {
            if audio > 0.0 {
                Ok(wall / audio)
            } else {
                Err(BenchError::EmptyOutput(text.to_string()))
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;
    summarize(&ratios, Unit::Ratio)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosReport {
    pub mos: f64,
    /// Infinite when only one rating is usable.
    pub ci95_halfwidth: f64,
    pub n_used: usize,
    pub n_excluded: usize,
}

/// Mean opinion score over ratings above 1; ratings of 1 are excluded and
/// counted. Ratings are pooled across samples.
pub fn aggregate_mos(ratings: &[(String, i64)]) -> Result<MosReport, BenchError> {
    if let Some((sample, score)) = ratings.iter().find(|(_, s)| !(1..=5).contains(s)) {
        return Err(BenchError::BadScore {
            sample: sample.clone(),
            score: *score,
        });
    }
    let used: Vec<f64> = ratings.iter().filter(|(_, s)| *s > 1).map(|(_, s)| *s as f64).collect();
    let n_excluded = ratings.len() - used.len();
    if used.is_empty() {
        return Err(BenchError::NoUsableRatings(n_excluded));
    }
    let ci95_halfwidth = if used.len() < 2 {
        f64::INFINITY
    } else {
        ci95_halfwidth(&used)?
    };
    Ok(MosReport {
        mos: used.iter().sum::<f64>() / used.len() as f64,
        ci95_halfwidth,
        n_used: used.len(),
        n_excluded,
    })
}

/// Reads `sample_id,score` rows.
pub fn read_ratings(path: &Path) -> Result<Vec<(String, i64)>, BenchError> {
    let err = |message: String| BenchError::Ratings {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["sample_id", "score"] {
        return Err(err(format!("expected header sample_id,score, found {:?}", headers)));
    }
    reader
        .deserialize::<(String, i64)>()
        .map(|r| r.map_err(|e| err(e.to_string())))
        .collect()
}

impl BenchResult {
    pub fn to_text(&self, label: &str) -> String {
        format!(
            "{label:<10} {:>10.4} ± {:<8.4} {} (n = {})\n",
            self.mean, self.ci95_halfwidth, self.unit, self.n
        )
    }

    pub fn to_key_values(&self, label: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{label}.mean={}", self.mean);
        let _ = writeln!(s, "{label}.ci95={}", self.ci95_halfwidth);
        let _ = writeln!(s, "{label}.n={}", self.n);
        s
    }
}

impl MosReport {
    pub fn to_text(&self) -> String {
        format!(
            "MOS {:.2} ± {:.2} ({} ratings used, {} excluded)\n",
            self.mos, self.ci95_halfwidth, self.n_used, self.n_excluded
        )
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "mos={}\nci95={}\nn_used={}\nn_excluded={}\n",
            self.mos, self.ci95_halfwidth, self.n_used, self.n_excluded
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(scores: &[i64]) -> Vec<(String, i64)> {
        scores.iter().enumerate().map(|(i, &s)| (format!("s{i}"), s)).collect()
    }

    #[test]
    fn mos_exclusion() {
        let m = aggregate_mos(&r(&[5, 5, 5])).unwrap();
        assert_eq!((m.mos, m.ci95_halfwidth), (5.0, 0.0));
        let m = aggregate_mos(&r(&[1, 4, 4])).unwrap();
        assert_eq!((m.mos, m.n_used, m.n_excluded), (4.0, 2, 1));
        assert_eq!(aggregate_mos(&r(&[1, 1])), Err(BenchError::NoUsableRatings(2)));
        assert!(aggregate_mos(&r(&[6])).is_err());
    }

    #[test]
    fn t_quantile_small_n() {
        // Two samples 0 and 2: s = sqrt(2), t_{0.975,1} = 12.7062.
        let hw = ci95_halfwidth(&[0.0, 2.0]).unwrap();
        assert!((hw - 12.706_204_736 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn speedup() {
        assert_eq!(format!("{:.2}", speedup_percent(0.560, 0.517)), "8.32");
    }
}
