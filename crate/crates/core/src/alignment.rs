//! Monotonic alignment search between text tokens and latent frames, and
//! the duration bookkeeping derived from alignments.

use ktts_tensor::Tensor;

use crate::latent::{DiagGaussianSeq, LatentError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("{frames} frames cannot cover {tokens} tokens")]
    TooFewFrames { tokens: usize, frames: usize },
    #[error("score table has a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("invalid alignment path: {0}")]
    InvalidPath(String),
    #[error("invalid durations: {0}")]
    InvalidDurations(String),
    #[error("durations cover {durations} tokens but the sequence has {tokens}")]
    LengthMismatch { durations: usize, tokens: usize },
}

/// Monotone, surjective map from frames to tokens.
///
/// Starts at token 0, ends at the last token, and advances by at most one
/// token per frame, so every token owns at least one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath {
    token_of_frame: Vec<usize>,
    tokens: usize,
}

impl AlignmentPath {
    pub fn new(token_of_frame: Vec<usize>, tokens: usize) -> Result<Self, AlignError> {
        let bad = |m: String| Err(AlignError::InvalidPath(m));
        if tokens == 0 || token_of_frame.is_empty() {
            return bad("empty".into());
        }
        if token_of_frame[0] != 0 {
            return bad(format!("first frame maps to token {}", token_of_frame[0]));
        }
        if let Some(j) = token_of_frame.windows(2).position(|w| w[1] < w[0] || w[1] > w[0] + 1) {
            return bad(format!("step {} -> {} at frame {}", token_of_frame[j], token_of_frame[j + 1], j + 1));
        }
        let last = *token_of_frame.last().expect("non-empty");
        if last != tokens - 1 {
            return bad(format!("last frame maps to token {last}, expected {}", tokens - 1));
        }
        Ok(Self { token_of_frame, tokens })
    }

    pub fn token_of_frame(&self) -> &[usize] {
        &self.token_of_frame
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.token_of_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of_frame.is_empty()
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    /// `sum_j scores[A(j), j]`.
    pub fn score(&self, scores: &Tensor) -> f64 {
        self.token_of_frame
            .iter()
            .enumerate()
            .map(|(j, &i)| scores.at2(i, j))
            .sum()
    }
}

/// Frames per token; every entry at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Durations {
    d: Vec<usize>,
}

impl Durations {
    pub fn new(d: Vec<usize>) -> Result<Self, AlignError> {
        if d.is_empty() {
            return Err(AlignError::InvalidDurations("no tokens".into()));
        }
        if let Some(i) = d.iter().position(|&x| x == 0) {
            return Err(AlignError::InvalidDurations(format!("token {i} has zero frames")));
        }
        Ok(Self { d })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.d
    }

    pub fn total(&self) -> usize {
        self.d.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// The path that gives token `i` its `d_i` consecutive frames.
    pub fn to_path(&self) -> AlignmentPath {
        let frames = self
            .d
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(i, n))
            .collect();
        AlignmentPath {
            token_of_frame: frames,
            tokens: self.d.len(),
        }
    }
}

/// Maximum-score monotone surjective path through a `[tokens, frames]`
/// score table.
///
/// `Q[i][j] = scores[i][j] + max(Q[i-1][j-1], Q[i][j-1])`, `Q[0][0] =
/// scores[0][0]`, backtracked from the last token at the last frame. Ties
/// keep the current token.
pub fn mas(scores: &Tensor) -> Result<AlignmentPath, AlignError> {
    let (tokens, frames) = (scores.rows(), scores.cols());
    if tokens == 0 || frames < tokens {
        return Err(AlignError::TooFewFrames { tokens, frames });
    }
    for i in 0..tokens {
        for j in 0..frames {
            if !scores.at2(i, j).is_finite() {
                return Err(AlignError::NonFinite(i, j));
            }
        }
    }

    let neg = f64::NEG_INFINITY;
    let mut q = vec![neg; tokens * frames];
    q[0] = scores.at2(0, 0);
    for j in 1..frames {
        // Token i is reachable at frame j only if i <= j, and can still reach
        // the end only if tokens - i <= frames - j.
        let lo = (tokens + j).saturating_sub(frames);
        let hi = j.min(tokens - 1);
        for i in lo..=hi {
            let stay = q[i * frames + j - 1];
            let advance = if i > 0 { q[(i - 1) * frames + j - 1] } else { neg };
            q[i * frames + j] = scores.at2(i, j) + stay.max(advance);
        }
    }

    let mut path = vec![0; frames];
    let mut i = tokens - 1;
    for j in (0..frames).rev() {
        path[j] = i;
        if j == 0 {
            break;
        }
        if i > 0 && q[(i - 1) * frames + j - 1] > q[i * frames + j - 1] {
            i -= 1;
        }
    }
    AlignmentPath::new(path, tokens)
}

/// `d_i` = number of frames aligned to token `i`.
pub fn durations_from_alignment(path: &AlignmentPath) -> Durations {
    let mut d = vec![0; path.tokens()];
    for &i in path.token_of_frame() {
        d[i] += 1;
    }
    Durations { d }
}

/// Repeats token `i`'s Gaussian `d_i` times along the frame axis.
pub fn expand_by_durations(tokens: &DiagGaussianSeq, d: &Durations) -> Result<DiagGaussianSeq, AlignError> {
    if tokens.frames() != d.len() {
        return Err(AlignError::LengthMismatch {
            durations: d.len(),
            tokens: tokens.frames(),
        });
    }
    let idx = d.to_path().token_of_frame;
    let c = tokens.channels();
    let mean = Tensor::from_fn2(c, idx.len(), |r, k| tokens.mean().at2(r, idx[k]));
    let std = Tensor::from_fn2(c, idx.len(), |r, k| tokens.std().at2(r, idx[k]));
    DiagGaussianSeq::new(mean, std).map_err(|e: LatentError| AlignError::InvalidDurations(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> Tensor {
        Tensor::from_fn2(rows.len(), rows[0].len(), |r, c| rows[r][c])
    }

    #[test]
    fn single_token_path_is_all_zero() {
        let s = table(&[&[-1.0, 2.0, 0.5, -3.0]]);
        let p = mas(&s).unwrap();
        assert_eq!(p.token_of_frame(), &[0, 0, 0, 0]);
        assert_eq!(p.score(&s), -1.5);
    }

    #[test]
    fn two_token_hand_example() {
        let s = table(&[&[0.0, -10.0, -10.0], &[-10.0, 0.0, 0.0]]);
        let p = mas(&s).unwrap();
        assert_eq!(p.token_of_frame(), &[0, 1, 1]);
        assert_eq!(p.score(&s), 0.0);
    }

    #[test]
    fn ties_stay_on_current_token() {
        let s = table(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        // Both [0,0,1] and [0,1,1] score 0; backtracking stays on token 1.
        assert_eq!(mas(&s).unwrap().token_of_frame(), &[0, 1, 1]);
    }

    #[test]
    fn square_table_is_diagonal() {
        let s = table(&[&[-5.0, 9.0, 9.0], &[9.0, -5.0, 9.0], &[9.0, 9.0, -5.0]]);
        assert_eq!(mas(&s).unwrap().token_of_frame(), &[0, 1, 2]);
    }

    #[test]
    fn too_few_frames() {
        let s = Tensor::zeros(&[3, 2]);
        assert_eq!(mas(&s), Err(AlignError::TooFewFrames { tokens: 3, frames: 2 }));
        let mut s = Tensor::zeros(&[1, 2]);
        s.set2(0, 1, f64::NAN);
        assert_eq!(mas(&s), Err(AlignError::NonFinite(0, 1)));
    }

    #[test]
    fn path_invariants_enforced() {
        assert!(AlignmentPath::new(vec![0, 0, 1, 1, 1, 2], 3).is_ok());
        assert!(AlignmentPath::new(vec![1, 1], 2).is_err());
        assert!(AlignmentPath::new(vec![0, 2], 3).is_err());
        assert!(AlignmentPath::new(vec![0, 1, 0], 2).is_err());
        assert!(AlignmentPath::new(vec![0, 1], 3).is_err());
    }

    #[test]
    fn durations_count_frames() {
        let p = AlignmentPath::new(vec![0, 0, 1, 1, 1, 2], 3).unwrap();
        assert_eq!(durations_from_alignment(&p).as_slice(), &[2, 3, 1]);
        let p = AlignmentPath::new(vec![0], 1).unwrap();
        assert_eq!(durations_from_alignment(&p).as_slice(), &[1]);
        assert!(Durations::new(vec![1, 0]).is_err());
    }

    #[test]
    fn expansion_repeats_columns() {
        let g = DiagGaussianSeq::new(
            Tensor::new(vec![1, 2], vec![3.0, 7.0]),
            Tensor::new(vec![1, 2], vec![1.0, 2.0]),
        )
        .unwrap();
        let d = Durations::new(vec![2, 1]).unwrap();
        let e = expand_by_durations(&g, &d).unwrap();
        assert_eq!(e.mean().data(), &[3.0, 3.0, 7.0]);
        assert_eq!(e.std().data(), &[1.0, 1.0, 2.0]);
        let ones = Durations::new(vec![1, 1]).unwrap();
        assert_eq!(expand_by_durations(&g, &ones).unwrap(), g);
        assert!(expand_by_durations(&g, &Durations::new(vec![1]).unwrap()).is_err());
        assert_eq!(durations_from_alignment(&d.to_path()), d);
    }
}
