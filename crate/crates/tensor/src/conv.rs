//! One-dimensional convolutions over `[channels, time]` matrices.

use crate::graph::Var;
use crate::tensor::Tensor;

/// Geometry of a 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub stride: usize,
    pub dilation: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub groups: usize,
}

impl Conv1dSpec {
    /// Unpadded, undilated, ungrouped convolution with the given stride.
    pub fn valid(stride: usize) -> Self {
        Self {
            stride,
            dilation: 1,
            pad_left: 0,
            pad_right: 0,
            groups: 1,
        }
    }

    /// Stride-1 convolution whose output length equals its input length.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        let total = dilation * (kernel - 1);
        Self {
            stride: 1,
            dilation,
            pad_left: total / 2,
            pad_right: total - total / 2,
            groups: 1,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    /// Output length for an input of `len` samples, or `None` when the input
    /// is shorter than one kernel span.
    pub fn output_len(&self, len: usize, kernel: usize) -> Option<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = len + self.pad_left + self.pad_right;
        (padded >= span).then(|| (padded - span) / self.stride + 1)
    }
}

/// Output positions `t` in `[0, out_len)` with `0 <= t*stride + offset < len`.
fn valid_range(offset: isize, stride: usize, len: usize, out_len: usize) -> std::ops::Range<usize> {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { ((-offset) + s - 1) / s };
    let last = len as isize - 1 - offset;
    let hi = if last < 0 { 0 } else { last / s + 1 };
    let lo = (lo as usize).min(out_len);
    let hi = (hi as usize).min(out_len);
    lo..hi.max(lo)
}

impl<'g> Var<'g> {
    /// Convolution of `self` (`[c_in, time]`) with `weight`
    /// (`[c_out, c_in / groups, kernel]`).
    pub fn conv1d(self, weight: Var<'g>, spec: Conv1dSpec) -> Var<'g> {
        let x = self.value();
        let w = weight.value();
        assert_eq!(w.rank(), 3, "conv1d: weight must be rank 3, got {:?}", w.shape());
        let (c_in, len) = (x.rows(), x.cols());
        let (c_out, cin_g, kernel) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        let groups = spec.groups;
        assert!(
            c_in % groups == 0 && c_out % groups == 0 && cin_g * groups == c_in,
            "conv1d: weight {:?} incompatible with {} input channels and {} groups",
            w.shape(),
            c_in,
            groups
        );
        let out_len = spec.output_len(len, kernel).unwrap_or_else(|| {
            panic!("conv1d: input length {len} shorter than kernel span")
        });
        let cout_g = c_out / groups;

        // Shared index walk: calls f(o, i, k, in_pos, out_pos) for every tap.
        let walk = move |f: &mut dyn FnMut(usize, usize, usize, std::ops::Range<usize>, isize)| {
            for o in 0..c_out {
                let grp = o / cout_g;
                for ig in 0..cin_g {
                    let i = grp * cin_g + ig;
                    for k in 0..kernel {
                        let offset = (k * spec.dilation) as isize - spec.pad_left as isize;
                        let range = valid_range(offset, spec.stride, len, out_len);
                        f(o, i, ig * kernel + k, range, offset);
                    }
                }
            }
        };

        let mut y = vec![0.0; c_out * out_len];
        {
            let (xd, wd) = (x.data(), w.data());
            walk(&mut |o, i, wk, range, offset| {
                let wv = wd[o * cin_g * kernel + wk];
                let xrow = &xd[i * len..(i + 1) * len];
                let yrow = &mut y[o * out_len..(o + 1) * out_len];
                for t in range {
                    let pos = (t * spec.stride) as isize + offset;
                    yrow[t] += wv * xrow[pos as usize];
                }
            });
        }

        let w_shape = w.shape().to_vec();
        self.graph.push(
            Tensor::new(vec![c_out, out_len], y),
            &[self, weight],
            Box::new(move |g, need| {
                let gd = g.data();
                let mut dx = need[0].then(|| vec![0.0; c_in * len]);
                let mut dw = need[1].then(|| vec![0.0; w.numel()]);
                let (xd, wd) = (x.data(), w.data());
                walk(&mut |o, i, wk, range, offset| {
                    let grow = &gd[o * out_len..(o + 1) * out_len];
                    let widx = o * cin_g * kernel + wk;
                    if let Some(dx) = dx.as_mut() {
                        let wv = wd[widx];
                        let drow = &mut dx[i * len..(i + 1) * len];
                        for t in range.clone() {
                            let pos = (t * spec.stride) as isize + offset;
                            drow[pos as usize] += wv * grow[t];
                        }
                    }
                    if let Some(dw) = dw.as_mut() {
                        let xrow = &xd[i * len..(i + 1) * len];
                        let mut acc = 0.0;
                        for t in range {
                            let pos = (t * spec.stride) as isize + offset;
                            acc += grow[t] * xrow[pos as usize];
                        }
                        dw[widx] += acc;
                    }
                });
                vec![
                    dx.map(|d| Tensor::new(vec![c_in, len], d)),
                    dw.map(|d| Tensor::new(w_shape.clone(), d)),
                ]
            }),
        )
    }

    /// Transposed convolution of `self` (`[c_in, time]`) with `weight`
    /// (`[c_in, c_out, kernel]`), producing exactly `time * stride` columns.
    ///
    /// The full transposed output has `(time - 1) * stride + kernel` columns;
    /// `(kernel - stride) / 2` are cropped from the left and the rest from
    /// the right. Requires `kernel >= stride`.
    pub fn conv_transpose1d(self, weight: Var<'g>, stride: usize) -> Var<'g> {
        let x = self.value();
        let w = weight.value();
        assert_eq!(w.rank(), 3, "conv_transpose1d: weight must be rank 3, got {:?}", w.shape());
        let (c_in, len) = (x.rows(), x.cols());
        let (wc_in, c_out, kernel) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        assert_eq!(wc_in, c_in, "conv_transpose1d: weight {:?} for {} channels", w.shape(), c_in);
        assert!(kernel >= stride, "conv_transpose1d: kernel {kernel} < stride {stride}");
        let crop = (kernel - stride) / 2;
        let out_len = len * stride;

        let walk = move |f: &mut dyn FnMut(usize, usize, usize, usize, usize)| {
            for i in 0..c_in {
                for o in 0..c_out {
                    for k in 0..kernel {
                        for t in 0..len {
                            let full = t * stride + k;
                            if full < crop || full - crop >= out_len {
                                continue;
                            }
                            f(i, o, k, t, full - crop);
                        }
                    }
                }
            }
        };

        let mut y = vec![0.0; c_out * out_len];
        {
            let (xd, wd) = (x.data(), w.data());
            walk(&mut |i, o, k, t, u| {
                y[o * out_len + u] += wd[(i * c_out + o) * kernel + k] * xd[i * len + t];
            });
        }

        let w_shape = w.shape().to_vec();
        self.graph.push(
            Tensor::new(vec![c_out, out_len], y),
            &[self, weight],
            Box::new(move |g, need| {
                let gd = g.data();
                let (xd, wd) = (x.data(), w.data());
                let mut dx = need[0].then(|| vec![0.0; c_in * len]);
                let mut dw = need[1].then(|| vec![0.0; w.numel()]);
                walk(&mut |i, o, k, t, u| {
                    let gv = gd[o * out_len + u];
                    let widx = (i * c_out + o) * kernel + k;
                    if let Some(dx) = dx.as_mut() {
                        dx[i * len + t] += wd[widx] * gv;
                    }
                    if let Some(dw) = dw.as_mut() {
                        dw[widx] += xd[i * len + t] * gv;
                    }
                });
                vec![
                    dx.map(|d| Tensor::new(vec![c_in, len], d)),
                    dw.map(|d| Tensor::new(w_shape.clone(), d)),
                ]
            }),
        )
    }
}
