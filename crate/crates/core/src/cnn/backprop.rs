//! Single-path backpropagation: the gradient of one chosen unit's activation
//! with respect to a lower layer or the input image.
//!
//! Gradients flow through the ReLU signs and mask recorded in the trace and
//! through the max-pool winners. The gradient returned for a conv tap is the
//! gradient at that tap's gated pre-activation, so masked or inactive cells
//! read as zero. Internally the gradient is carried as a window covering
//! only the source unit's receptive field.

use super::network::ActivationTrace;
use super::spec::LayerKind;
use super::tensor::{argmax_first, Tensor3};
use crate::error::{Error, Result};

/// One unit of a tapped conv layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UnitRef {
    pub tap: String,
    pub filter: usize,
    pub row: usize,
    pub col: usize,
}

impl UnitRef {
    pub fn new(tap: &str, filter: usize, row: usize, col: usize) -> Self {
        Self {
            tap: tap.to_string(),
            filter,
            row,
            col,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GradTarget {
    Image,
    Tap(String),
}

/// A gradient that is zero outside the window `[row0, row0+rows) x [col0, col0+cols)`
/// of a `channels x height x width` layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GradPatch {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl GradPatch {
    fn new(channels: usize, height: usize, width: usize, rows: (usize, usize), cols: (usize, usize)) -> Self {
        let (r0, r1) = rows;
        let (c0, c1) = cols;
        let (nr, nc) = (r1.saturating_sub(r0), c1.saturating_sub(c0));
        Self {
            channels,
            height,
            width,
            row0: r0,
            col0: c0,
            rows: nr,
            cols: nc,
            data: vec![0.0; channels * nr * nc],
        }
    }

    fn empty(channels: usize, height: usize, width: usize) -> Self {
        Self::new(channels, height, width, (0, 0), (0, 0))
    }

    #[inline]
    fn local(&self, c: usize, r: usize, col: usize) -> usize {
        (c * self.rows + r) * self.cols + col
    }

    /// Value at full-layer coordinates.
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        if y < self.row0 || x < self.col0 || y >= self.row0 + self.rows || x >= self.col0 + self.cols {
            return 0.0;
        }
        self.data[self.local(c, y - self.row0, x - self.col0)]
    }

    /// Window values of one channel, row-major.
    pub fn channel_window(&self, c: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[c * n..(c + 1) * n]
    }

    /// Largest entry of channel `c` as `(row, col, value)` in layer
    /// coordinates; ties go to the lowest flat index. `None` when the
    /// window is empty.
    pub fn argmax_in_channel(&self, c: usize) -> Option<(usize, usize, f64)> {
        if self.rows == 0 || self.cols == 0 {
            return None;
        }
        let (i, v) = argmax_first(self.channel_window(c));
        Some((self.row0 + i / self.cols, self.col0 + i % self.cols, v))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Per-pixel `sum_c |g_c|` over the window, row-major.
    pub fn magnitude_window(&self) -> Vec<f64> {
        let n = self.rows * self.cols;
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.channel_window(c)) {
                *o += v.abs();
            }
        }
        out
    }

    pub fn to_tensor(&self) -> Tensor3 {
        let mut t = Tensor3::zeros(self.channels, self.height, self.width);
        for c in 0..self.channels {
            for r in 0..self.rows {
                for col in 0..self.cols {
                    t.set(c, self.row0 + r, self.col0 + col, self.data[self.local(c, r, col)]);
                }
            }
        }
        t
    }
}

/// Gradient of `source`'s activation with respect to `target`, as a full tensor.
pub fn backward_single_path(trace: &ActivationTrace, source: &UnitRef, target: &GradTarget) -> Result<Tensor3> {
    let net = trace.network();
    let src_layer = net.tap_layer(&source.tap)?;
    let target_layer = match target {
        GradTarget::Image => None,
        GradTarget::Tap(t) => Some(net.tap_layer(t)?),
    };
    Ok(backward_patch(trace, src_layer, source.filter, source.row, source.col, target_layer)?.to_tensor())
}

/// Window form of [`backward_single_path`] on raw layer indices; `target`
/// `None` means the input image.
pub(crate) fn backward_patch(
    trace: &ActivationTrace,
    source_layer: usize,
    filter: usize,
    row: usize,
    col: usize,
    target: Option<usize>,
) -> Result<GradPatch> {
    let net = trace.network();
    let layers = &net.spec().layers;
    if source_layer >= layers.len() || layers[source_layer].as_conv().is_none() {
        return Err(Error::Config(format!("source layer {source_layer} is not a conv layer")));
    }
    if let Some(t) = target {
        if t >= source_layer {
            return Err(Error::Config(format!(
                "target layer {t} is not below source layer {source_layer}"
            )));
        }
        if layers[t].as_conv().is_none() {
            return Err(Error::Config(format!("target layer {t} is not a conv layer")));
        }
    }
    let src = &trace.layer(source_layer).output;
    if filter >= src.channels() || row >= src.height() || col >= src.width() {
        return Err(Error::Config(format!(
            "unit ({filter}, {row}, {col}) outside layer of shape {:?}",
            src.shape()
        )));
    }

    let (tc, th, tw) = match target {
        Some(t) => trace.layer(t).output.shape(),
        None => trace.input().shape(),
    };
    if !trace.layer(source_layer).passes(src.index(filter, row, col)) {
        return Ok(GradPatch::empty(tc, th, tw));
    }

    let mut layer = source_layer;
    let mut grad = GradPatch::new(src.channels(), src.height(), src.width(), (row, row + 1), (col, col + 1));
    let l = grad.local(filter, 0, 0);
    grad.data[l] = 1.0;

    loop {
        let below = if layer == 0 {
            trace.input()
        } else {
            &trace.layer(layer - 1).output
        };
        let (bc, bh, bw) = below.shape();
        let mut next = match &layers[layer].kind {
            LayerKind::ConvRelu(spec) => {
                let w = net.conv_weights(layer).expect("conv weights");
                let (k, s, p) = (spec.kernel as isize, spec.stride as isize, spec.pad as isize);
                let span = |lo: usize, n: usize, lim: usize| {
                    let a = (lo as isize * s - p).max(0) as usize;
                    let b = (((lo + n) as isize - 1) * s - p + k).clamp(0, lim as isize) as usize;
                    (a, b.max(a))
                };
                let mut next = GradPatch::new(bc, bh, bw, span(grad.row0, grad.rows, bh), span(grad.col0, grad.cols, bw));
                for o in 0..grad.channels {
                    for r in 0..grad.rows {
                        for c in 0..grad.cols {
                            let g = grad.data[grad.local(o, r, c)];
                            if g == 0.0 {
                                continue;
                            }
                            let y = (grad.row0 + r) as isize * s - p;
                            let x = (grad.col0 + c) as isize * s - p;
                            for i in 0..bc {
                                for ky in 0..k {
                                    let iy = y + ky;
                                    if iy < 0 || iy >= bh as isize {
                                        continue;
                                    }
                                    for kx in 0..k {
                                        let ix = x + kx;
                                        if ix < 0 || ix >= bw as isize {
                                            continue;
                                        }
                                        let wv = w.get(o, i, ky as usize, kx as usize);
                                        let li = next.local(i, iy as usize - next.row0, ix as usize - next.col0);
                                        next.data[li] += wv * g;
                                    }
                                }
                            }
                        }
                    }
                }
                next
            }
            LayerKind::MaxPool(spec) => {
                let argmax = trace.layer(layer).argmax.as_ref().expect("pool argmax");
                let (s, win) = (spec.stride, spec.window);
                let span = |lo: usize, n: usize, lim: usize| (lo * s, ((lo + n - 1) * s + win).min(lim));
                let mut next = GradPatch::new(bc, bh, bw, span(grad.row0, grad.rows, bh), span(grad.col0, grad.cols, bw));
                let out = &trace.layer(layer).output;
                for ch in 0..grad.channels {
                    for r in 0..grad.rows {
                        for c in 0..grad.cols {
                            let g = grad.data[grad.local(ch, r, c)];
                            if g == 0.0 {
                                continue;
                            }
                            let src_idx = argmax[out.index(ch, grad.row0 + r, grad.col0 + c)];
                            let (ic, iy, ix) = below.coords(src_idx);
                            let li = next.local(ic, iy - next.row0, ix - next.col0);
                            next.data[li] += g;
                        }
                    }
                }
                next
            }
            LayerKind::Lrn(_) => return Err(Error::Unsupported("local response normalisation".into())),
        };

        if layer == 0 {
            return Ok(next);
        }
        let m = layer - 1;
        if layers[m].as_conv().is_some() {
            let rec = trace.layer(m);
            let plane = bh * bw;
            for ch in 0..next.channels {
                for r in 0..next.rows {
                    for c in 0..next.cols {
                        let flat = ch * plane + (next.row0 + r) * bw + next.col0 + c;
                        if !rec.passes(flat) {
                            let li = next.local(ch, r, c);
                            next.data[li] = 0.0;
                        }
                    }
                }
            }
            if Some(m) == target {
                return Ok(next);
            }
        }
        grad = next;
        layer = m;
    }
}
