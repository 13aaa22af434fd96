use std::collections::BTreeMap;
use std::fmt::Write;

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub count: usize,
    pub total_hours: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub mean_s: f64,
    pub per_category: BTreeMap<String, usize>,
    pub histogram: Vec<HistogramBin>,
}

/// Aggregates `(duration_s, category)` pairs. Durations are summed in
/// sorted order so the result does not depend on input order.
pub fn corpus_stats<'a>(
    items: impl IntoIterator<Item = (f64, &'a str)>,
    hist_bins: usize,
) -> Result<CorpusStats, CorpusError> {
    let mut durations = Vec::new();
    let mut per_category = BTreeMap::new();
    for (d, cat) in items {
        durations.push(d);
        *per_category.entry(cat.to_string()).or_insert(0) += 1;
    }
    if durations.is_empty() {
        return Err(CorpusError::Empty);
    }
    durations.sort_by(f64::total_cmp);
    let count = durations.len();
    let total: f64 = durations.iter().sum();
    let (min_s, max_s) = (durations[0], durations[count - 1]);

    let bins = hist_bins.max(1);
    let width = (max_s - min_s) / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: min_s + width * b as f64,
            hi: if b + 1 == bins { max_s } else { min_s + width * (b + 1) as f64 },
            count: 0,
        })
        .collect();
    for &d in &durations {
        let b = if width > 0.0 {
            (((d - min_s) / width) as usize).min(bins - 1)
        } else {
            0
        };
        histogram[b].count += 1;
    }

    Ok(CorpusStats {
        count,
        total_hours: total / 3600.0,
        min_s,
        max_s,
        mean_s: total / count as f64,
        per_category,
        histogram,
    })
}

impl CorpusStats {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "utterances   {}", self.count);
        let _ = writeln!(s, "total hours  {:.2}", self.total_hours);
        let _ = writeln!(s, "min length   {:.3} s", self.min_s);
        let _ = writeln!(s, "max length   {:.3} s", self.max_s);
        let _ = writeln!(s, "mean length  {:.3} s", self.mean_s);
        let _ = writeln!(s, "\ncategory                   count");
        for (cat, n) in &self.per_category {
            let _ = writeln!(s, "{cat:<26} {n:>5}");
        }
        let _ = writeln!(s, "\nduration histogram");
        let peak = self.histogram.iter().map(|b| b.count).max().unwrap_or(1).max(1);
        for b in &self.histogram {
            let bar = "#".repeat(b.count * 40 / peak);
            let _ = writeln!(s, "{:>7.3}-{:<7.3} {:>6} {bar}", b.lo, b.hi, b.count);
        }
        s
    }

    /// `key=value` lines for scripts.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "count={}", self.count);
        let _ = writeln!(s, "total_hours={}", self.total_hours);
        let _ = writeln!(s, "min_s={}", self.min_s);
        let _ = writeln!(s, "max_s={}", self.max_s);
        let _ = writeln!(s, "mean_s={}", self.mean_s);
        for (cat, n) in &self.per_category {
            let _ = writeln!(s, "category.{}={n}", cat.replace(' ', "_"));
        }
        for (i, b) in self.histogram.iter().enumerate() {
            let _ = writeln!(s, "hist.{i}={},{},{}", b.lo, b.hi, b.count);
        }
        s
    }
}
