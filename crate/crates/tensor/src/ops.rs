//! Differentiable operations on [`Var`].
//!
//! Shape mismatches are programming errors and panic with the offending
//! shapes; data-dependent failures are reported by the callers one level up.

use std::ops;
use std::rc::Rc;

use crate::graph::Var;
use crate::tensor::Tensor;

fn assert_same_shape(op: &str, a: &Tensor, b: &Tensor) {
    assert_eq!(
        a.shape(),
        b.shape(),
        "{op}: shape mismatch {:?} vs {:?}",
        a.shape(),
        b.shape()
    );
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

impl<'g> Var<'g> {
    /// Elementwise map with derivative expressed through input and output.
    fn unary(
        self,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var<'g> {
        let x = self.value();
        let y = Rc::new(x.map(f));
        let y_saved = Rc::clone(&y);
        self.graph.push(
            (*y).clone(),
            &[self],
            Box::new(move |g, _| {
                let data = g
                    .data()
                    .iter()
                    .zip(x.data().iter().zip(y_saved.data()))
                    .map(|(&g, (&x, &y))| g * df(x, y))
                    .collect();
                vec![Some(Tensor::new(g.shape().to_vec(), data))]
            }),
        )
    }

    pub fn neg(self) -> Var<'g> {
        self.scale(-1.0)
    }

    pub fn scale(self, c: f64) -> Var<'g> {
        self.unary(move |x| c * x, move |_, _| c)
    }

    pub fn add_scalar(self, c: f64) -> Var<'g> {
        self.unary(move |x| x + c, |_, _| 1.0)
    }

    pub fn exp(self) -> Var<'g> {
        self.unary(f64::exp, |_, y| y)
    }

    pub fn log(self) -> Var<'g> {
        self.unary(f64::ln, |x, _| 1.0 / x)
    }

    pub fn tanh(self) -> Var<'g> {
        self.unary(f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn sigmoid(self) -> Var<'g> {
        self.unary(|x| 1.0 / (1.0 + (-x).exp()), |_, y| y * (1.0 - y))
    }

    pub fn relu(self) -> Var<'g> {
        self.leaky_relu(0.0)
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'g> {
        self.unary(
            move |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn square(self) -> Var<'g> {
        self.unary(|x| x * x, |x, _| 2.0 * x)
    }

    /// Square root; the derivative at exactly zero is taken as zero.
    pub fn sqrt(self) -> Var<'g> {
        self.unary(f64::sqrt, |_, y| if y > 0.0 { 0.5 / y } else { 0.0 })
    }

    pub fn abs(self) -> Var<'g> {
        self.unary(f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// Clamp into `[lo, hi]`; the gradient passes only strictly inside.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'g> {
        self.unary(
            move |x| x.clamp(lo, hi),
            move |x, _| if x > lo && x < hi { 1.0 } else { 0.0 },
        )
    }

    /// `max(x, floor)` elementwise.
    pub fn floor_at(self, floor: f64) -> Var<'g> {
        self.clamp(floor, f64::INFINITY)
    }

    fn binary(
        self,
        other: Var<'g>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        dfa: impl Fn(f64, f64) -> f64 + 'static,
        dfb: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var<'g> {
        let a = self.value();
        let b = other.value();
        assert_same_shape(name, &a, &b);
        let y = zip_map(&a, &b, f);
        self.graph.push(
            y,
            &[self, other],
            Box::new(move |g, need| {
                let grad = |df: &dyn Fn(f64, f64) -> f64| {
                    let data = g
                        .data()
                        .iter()
                        .zip(a.data().iter().zip(b.data()))
                        .map(|(&g, (&x, &y))| g * df(x, y))
                        .collect();
                    Tensor::new(g.shape().to_vec(), data)
                };
                vec![
                    need[0].then(|| grad(&dfa)),
                    need[1].then(|| grad(&dfb)),
                ]
            }),
        )
    }

    pub fn add(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, "add", |x, y| x + y, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, "sub", |x, y| x - y, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, "mul", |x, y| x * y, |_, y| y, |x, _| x)
    }

    pub fn div(self, other: Var<'g>) -> Var<'g> {
        self.binary(
            other,
            "div",
            |x, y| x / y,
            |_, y| 1.0 / y,
            |x, y| -x / (y * y),
        )
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(self) -> Var<'g> {
        let x = self.value();
        let shape = x.shape().to_vec();
        self.graph.push(
            Tensor::scalar(x.sum()),
            &[self],
            Box::new(move |g, _| vec![Some(Tensor::full(&shape, g.item()))]),
        )
    }

    pub fn mean(self) -> Var<'g> {
        let n = self.value().numel() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Mean squared difference of two same-shaped tensors.
    pub fn mse(self, other: Var<'g>) -> Var<'g> {
        self.sub(other).square().mean()
    }

    /// Per-column sums of a `[rows, cols]` matrix, as a `[1, cols]` row.
    pub fn sum_rows(self) -> Var<'g> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        let mut out = vec![0.0; cols];
        for r in 0..rows {
            for (o, v) in out.iter_mut().zip(&x.data()[r * cols..(r + 1) * cols]) {
                *o += v;
            }
        }
        self.graph.push(
            Tensor::new(vec![1, cols], out),
            &[self],
            Box::new(move |g, _| {
                let row = g.data();
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    data.extend_from_slice(row);
                }
                vec![Some(Tensor::new(vec![rows, cols], data))]
            }),
        )
    }

    /// Adds a per-row value (`[rows]`) to every column of a `[rows, cols]`
    /// matrix; the bias layout of a channel-major sequence.
    pub fn add_col(self, bias: Var<'g>) -> Var<'g> {
        let x = self.value();
        let b = bias.value();
        let (rows, cols) = (x.rows(), x.cols());
        assert_eq!(b.numel(), rows, "add_col: bias {:?} for matrix {:?}", b.shape(), x.shape());
        let mut y = (*x).clone();
        for r in 0..rows {
            let br = b.data()[r];
            for v in &mut y.data_mut()[r * cols..(r + 1) * cols] {
                *v += br;
            }
        }
        let bias_shape = b.shape().to_vec();
        self.graph.push(
            y,
            &[self, bias],
            Box::new(move |g, need| {
                let db = need[1].then(|| {
                    let data = g.data().chunks(cols).map(|row| row.iter().sum()).collect();
                    Tensor::new(bias_shape.clone(), data)
                });
                vec![need[0].then(|| g.clone()), db]
            }),
        )
    }

    /// Multiplies every column of a `[rows, cols]` matrix by a per-row gain.
    pub fn mul_col(self, gain: Var<'g>) -> Var<'g> {
        let x = self.value();
        let s = gain.value();
        let (rows, cols) = (x.rows(), x.cols());
        assert_eq!(s.numel(), rows, "mul_col: gain {:?} for matrix {:?}", s.shape(), x.shape());
        let mut y = (*x).clone();
        for r in 0..rows {
            let sr = s.data()[r];
            for v in &mut y.data_mut()[r * cols..(r + 1) * cols] {
                *v *= sr;
            }
        }
        let gain_shape = s.shape().to_vec();
        self.graph.push(
            y,
            &[self, gain],
            Box::new(move |g, need| {
                let dx = need[0].then(|| {
                    let mut d = g.clone();
                    for r in 0..rows {
                        let sr = s.data()[r];
                        for v in &mut d.data_mut()[r * cols..(r + 1) * cols] {
                            *v *= sr;
                        }
                    }
                    d
                });
                let ds = need[1].then(|| {
                    let data = (0..rows)
                        .map(|r| {
                            let span = r * cols..(r + 1) * cols;
                            g.data()[span.clone()]
                                .iter()
                                .zip(&x.data()[span])
                                .map(|(g, x)| g * x)
                                .sum()
                        })
                        .collect();
                    Tensor::new(gain_shape.clone(), data)
                });
                vec![dx, ds]
            }),
        )
    }

    /// Parametric rectifier with one learned slope shared by all elements.
    pub fn prelu(self, alpha: Var<'g>) -> Var<'g> {
        let x = self.value();
        let a = alpha.value();
        assert_eq!(a.numel(), 1, "prelu: slope must be a single value, got {:?}", a.shape());
        let slope = a.data()[0];
        let y = x.map(|v| if v > 0.0 { v } else { slope * v });
        let alpha_shape = a.shape().to_vec();
        self.graph.push(
            y,
            &[self, alpha],
            Box::new(move |g, need| {
                let dx = need[0].then(|| {
                    let data = g
                        .data()
                        .iter()
                        .zip(x.data())
                        .map(|(&g, &v)| if v > 0.0 { g } else { slope * g })
                        .collect();
                    Tensor::new(g.shape().to_vec(), data)
                });
                let da = need[1].then(|| {
                    let s: f64 = g
                        .data()
                        .iter()
                        .zip(x.data())
                        .filter(|(_, &v)| v <= 0.0)
                        .map(|(g, v)| g * v)
                        .sum();
                    Tensor::new(alpha_shape.clone(), vec![s])
                });
                vec![dx, da]
            }),
        )
    }

    /// Matrix product `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(self, other: Var<'g>) -> Var<'g> {
        let a = self.value();
        let b = other.value();
        assert!(
            a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(),
            "matmul: incompatible shapes {:?} x {:?}",
            a.shape(),
            b.shape()
        );
        let y = matmul_raw(&a, &b);
        self.graph.push(
            y,
            &[self, other],
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| matmul_raw(g, &b.transposed())),
                    need[1].then(|| matmul_raw(&a.transposed(), g)),
                ]
            }),
        )
    }

    pub fn transpose(self) -> Var<'g> {
        let x = self.value();
        self.graph.push(
            x.transposed(),
            &[self],
            Box::new(|g, _| vec![Some(g.transposed())]),
        )
    }

    pub fn reshape(self, shape: &[usize]) -> Var<'g> {
        let x = self.value();
        let old = x.shape().to_vec();
        self.graph.push(
            (*x).clone().reshaped(shape),
            &[self],
            Box::new(move |g, _| vec![Some(g.clone().reshaped(&old))]),
        )
    }

    /// Softmax along each row of a matrix.
    pub fn softmax_rows(self) -> Var<'g> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        let mut y = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &x.data()[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = &mut y[r * cols..(r + 1) * cols];
            let mut total = 0.0;
            for (o, &v) in out.iter_mut().zip(row) {
                *o = (v - max).exp();
                total += *o;
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
        let y = Tensor::new(vec![rows, cols], y);
        let y_saved = y.clone();
        self.graph.push(
            y,
            &[self],
            Box::new(move |g, _| {
                let mut d = vec![0.0; rows * cols];
                for r in 0..rows {
                    let span = r * cols..(r + 1) * cols;
                    let yr = &y_saved.data()[span.clone()];
                    let gr = &g.data()[span.clone()];
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for ((d, &y), &g) in d[span].iter_mut().zip(yr).zip(gr) {
                        *d = y * (g - dot);
                    }
                }
                vec![Some(Tensor::new(vec![rows, cols], d))]
            }),
        )
    }

    /// Normalizes every column to zero mean and unit variance (no affine).
    pub fn normalize_cols(self, eps: f64) -> Var<'g> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        let mut y = vec![0.0; rows * cols];
        let mut inv_std = vec![0.0; cols];
        for c in 0..cols {
            let mean = (0..rows).map(|r| x.at2(r, c)).sum::<f64>() / rows as f64;
            let var = (0..rows).map(|r| (x.at2(r, c) - mean).powi(2)).sum::<f64>() / rows as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[c] = is;
            for r in 0..rows {
                y[r * cols + c] = (x.at2(r, c) - mean) * is;
            }
        }
        let y = Tensor::new(vec![rows, cols], y);
        let y_saved = y.clone();
        self.graph.push(
            y,
            &[self],
            Box::new(move |g, _| {
                let mut d = vec![0.0; rows * cols];
                let n = rows as f64;
                for c in 0..cols {
                    let mut g_mean = 0.0;
                    let mut gy_mean = 0.0;
                    for r in 0..rows {
                        let gv = g.at2(r, c);
                        g_mean += gv;
                        gy_mean += gv * y_saved.at2(r, c);
                    }
                    g_mean /= n;
                    gy_mean /= n;
                    for r in 0..rows {
                        d[r * cols + c] =
                            inv_std[c] * (g.at2(r, c) - g_mean - y_saved.at2(r, c) * gy_mean);
                    }
                }
                vec![Some(Tensor::new(vec![rows, cols], d))]
            }),
        )
    }

    /// Column gather: output column `k` is input column `indices[k]`.
    /// Repeated indices accumulate their gradients.
    pub fn gather_cols(self, indices: &[usize]) -> Var<'g> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        let indices = indices.to_vec();
        let n = indices.len();
        let mut y = vec![0.0; rows * n];
        for r in 0..rows {
            for (k, &c) in indices.iter().enumerate() {
                assert!(c < cols, "gather_cols: index {c} out of range for {cols} columns");
                y[r * n + k] = x.at2(r, c);
            }
        }
        self.graph.push(
            Tensor::new(vec![rows, n], y),
            &[self],
            Box::new(move |g, _| {
                let mut d = Tensor::zeros(&[rows, cols]);
                for r in 0..rows {
                    for (k, &c) in indices.iter().enumerate() {
                        let cur = d.at2(r, c);
                        d.set2(r, c, cur + g.at2(r, k));
                    }
                }
                vec![Some(d)]
            }),
        )
    }

    /// Columns `[start, end)` of a matrix.
    pub fn slice_cols(self, start: usize, end: usize) -> Var<'g> {
        let cols = self.value().cols();
        assert!(start <= end && end <= cols, "slice_cols: {start}..{end} of {cols}");
        let idx: Vec<usize> = (start..end).collect();
        self.gather_cols(&idx)
    }

    /// Rows `[start, end)` of a matrix.
    pub fn slice_rows(self, start: usize, end: usize) -> Var<'g> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        assert!(start <= end && end <= rows, "slice_rows: {start}..{end} of {rows}");
        let y = Tensor::new(
            vec![end - start, cols],
            x.data()[start * cols..end * cols].to_vec(),
        );
        self.graph.push(
            y,
            &[self],
            Box::new(move |g, _| {
                let mut d = vec![0.0; rows * cols];
                d[start * cols..end * cols].copy_from_slice(g.data());
                vec![Some(Tensor::new(vec![rows, cols], d))]
            }),
        )
    }
}

/// Stacks matrices with equal column counts on top of each other.
pub fn concat_rows<'g>(parts: &[Var<'g>]) -> Var<'g> {
    assert!(!parts.is_empty(), "concat_rows of nothing");
    let values: Vec<Rc<Tensor>> = parts.iter().map(Var::value).collect();
    let cols = values[0].cols();
    let mut data = Vec::new();
    let mut bounds = Vec::with_capacity(parts.len());
    for v in &values {
        assert_eq!(v.cols(), cols, "concat_rows: column mismatch {:?}", v.shape());
        let start = data.len();
        data.extend_from_slice(v.data());
        bounds.push((start, data.len(), v.shape().to_vec()));
    }
    let rows = data.len() / cols;
    parts[0].graph.push(
        Tensor::new(vec![rows, cols], data),
        parts,
        Box::new(move |g, need| {
            bounds
                .iter()
                .zip(need)
                .map(|((s, e, shape), &n)| {
                    n.then(|| Tensor::new(shape.clone(), g.data()[*s..*e].to_vec()))
                })
                .collect()
        }),
    )
}

/// Joins matrices with equal row counts side by side.
pub fn concat_cols<'g>(parts: &[Var<'g>]) -> Var<'g> {
    let transposed: Vec<Var<'g>> = parts.iter().map(|p| p.transpose()).collect();
    concat_rows(&transposed).transpose()
}

pub(crate) fn matmul_raw(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

impl<'g> ops::Add for Var<'g> {
    type Output = Var<'g>;
    fn add(self, rhs: Var<'g>) -> Var<'g> {
        Var::add(self, rhs)
    }
}

impl<'g> ops::Sub for Var<'g> {
    type Output = Var<'g>;
    fn sub(self, rhs: Var<'g>) -> Var<'g> {
        Var::sub(self, rhs)
    }
}

impl<'g> ops::Mul for Var<'g> {
    type Output = Var<'g>;
    fn mul(self, rhs: Var<'g>) -> Var<'g> {
        Var::mul(self, rhs)
    }
}

impl<'g> ops::Neg for Var<'g> {
    type Output = Var<'g>;
    fn neg(self) -> Var<'g> {
        Var::neg(self)
    }
}
