//! Layer and network descriptions plus the derived spatial geometry
//! (output sizes, strides and receptive fields in input-pixel units).

use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_channels: usize,
    pub bias: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

/// Local response normalisation parameters. Parsed so that manifests
/// describing such networks can be read, but rejected by [`NetworkSpec::validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrnSpec {
    pub size: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerKind {
    /// Convolution with a fused ReLU.
    ConvRelu(ConvSpec),
    MaxPool(PoolSpec),
    Lrn(LrnSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn conv(name: &str, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::ConvRelu(ConvSpec {
                kernel,
                stride,
                pad,
                out_channels,
                bias: true,
            }),
        }
    }

    pub fn maxpool(name: &str, window: usize, stride: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::MaxPool(PoolSpec { window, stride }),
        }
    }

    pub fn as_conv(&self) -> Option<&ConvSpec> {
        match &self.kind {
            LayerKind::ConvRelu(c) => Some(c),
            _ => None,
        }
    }
}

/// `floor((input + 2*pad - kernel) / stride) + 1`, rejecting empty outputs.
pub fn output_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 || kernel == 0 {
        return Err(Error::Config(format!(
            "kernel ({kernel}) and stride ({stride}) must be at least 1"
        )));
    }
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::Config(format!(
            "window {kernel} larger than padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

impl ConvSpec {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            output_dim(h, self.kernel, self.stride, self.pad)?,
            output_dim(w, self.kernel, self.stride, self.pad)?,
        ))
    }
}

impl PoolSpec {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            output_dim(h, self.window, self.stride, 0)?,
            output_dim(w, self.window, self.stride, 0)?,
        ))
    }
}

/// Where a layer's output cells sit in input-pixel coordinates.
///
/// Cell `i` of the layer has receptive field `[start + i*jump, start + i*jump + rf - 1]`
/// (identical along rows and columns).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub jump: usize,
    pub start: isize,
    pub rf: usize,
}

impl LayerGeometry {
    /// Inclusive receptive-field bounds of cell `i` along one axis.
    pub fn rf_span(&self, i: usize) -> (isize, isize) {
        let lo = self.start + (i * self.jump) as isize;
        (lo, lo + self.rf as isize - 1)
    }

    /// Pixel at the centre of cell `i`'s receptive field (rounded down).
    pub fn center(&self, i: usize) -> isize {
        let (lo, hi) = self.rf_span(i);
        (lo + hi).div_euclid(2)
    }

    /// Half-open pixel span `[lo, hi)` the cell covers for mask downsampling:
    /// one stride-sized footprint centred on the receptive field.
    pub fn footprint(&self, i: usize) -> (isize, isize) {
        let c = self.center(i);
        let half = (self.jump / 2) as isize;
        (c - half, c - half + self.jump as isize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    /// Input `(channels, height, width)`.
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    /// Semantic tap names (`conv-1` ... `conv-5`) paired with layer indices.
    pub taps: Vec<(String, usize)>,
}

impl NetworkSpec {
    /// Checks structural invariants and returns per-layer geometry.
    pub fn validate(&self) -> Result<Vec<LayerGeometry>> {
        let (c0, h0, w0) = self.input;
        if c0 == 0 || h0 == 0 || w0 == 0 {
            return Err(Error::Config("network input dims must be positive".into()));
        }
        let mut geoms = Vec::with_capacity(self.layers.len());
        let mut prev = LayerGeometry {
            channels: c0,
            height: h0,
            width: w0,
            jump: 1,
            start: 0,
            rf: 1,
        };
        for layer in &self.layers {
            let g = match &layer.kind {
                LayerKind::ConvRelu(c) => {
                    if c.out_channels == 0 {
                        return Err(Error::Config(format!("{}: zero output channels", layer.name)));
                    }
                    let (h, w) = c
                        .output_hw(prev.height, prev.width)
                        .map_err(|e| Error::Config(format!("{}: {e}", layer.name)))?;
                    LayerGeometry {
                        channels: c.out_channels,
                        height: h,
                        width: w,
                        jump: prev.jump * c.stride,
                        start: prev.start - (c.pad * prev.jump) as isize,
                        rf: prev.rf + (c.kernel - 1) * prev.jump,
                    }
                }
                LayerKind::MaxPool(p) => {
                    let (h, w) = p
                        .output_hw(prev.height, prev.width)
                        .map_err(|e| Error::Config(format!("{}: {e}", layer.name)))?;
                    LayerGeometry {
                        channels: prev.channels,
                        height: h,
                        width: w,
                        jump: prev.jump * p.stride,
                        start: prev.start,
                        rf: prev.rf + (p.window - 1) * prev.jump,
                    }
                }
                LayerKind::Lrn(_) => {
                    return Err(Error::Unsupported(format!(
                        "{}: local response normalisation layers are not supported",
                        layer.name
                    )))
                }
            };
            geoms.push(g);
            prev = g;
        }

        let mut seen = HashSet::new();
        for (name, idx) in &self.taps {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("duplicate tap name {name}")));
            }
            match self.layers.get(*idx) {
                Some(l) if l.as_conv().is_some() => {}
                Some(l) => {
                    return Err(Error::Config(format!(
                        "tap {name} refers to non-conv layer {}",
                        l.name
                    )))
                }
                None => return Err(Error::Config(format!("tap {name} refers to missing layer {idx}"))),
            }
        }
        if self.taps.len() < 3 {
            return Err(Error::Config(format!(
                "need at least three conv taps, found {}",
                self.taps.len()
            )));
        }
        let mut order: Vec<usize> = self.taps.iter().map(|(_, i)| *i).collect();
        order.sort_unstable();
        order.dedup();
        if order.len() != self.taps.len() {
            return Err(Error::Config("two taps name the same layer".into()));
        }
        Ok(geoms)
    }

    pub fn tap_layer(&self, name: &str) -> Option<usize> {
        self.taps.iter().find(|(n, _)| n == name).map(|(_, i)| *i)
    }

    /// Taps sorted by depth, shallowest first.
    pub fn taps_by_depth(&self) -> Vec<(String, usize)> {
        let mut t = self.taps.clone();
        t.sort_by_key(|(_, i)| *i);
        t
    }

    /// Five-tap desk-scale network used by the tests and the synthetic pipeline:
    /// widths 8/16/16/24/24, kernels 5/3/3/3/3, max-pooling after the first two taps.
    pub fn desk_scale(input_hw: usize) -> Self {
        let layers = vec![
            LayerSpec::conv("conv1", 8, 5, 2, 2),
            LayerSpec::maxpool("pool1", 2, 2),
            LayerSpec::conv("conv2", 16, 3, 1, 1),
            LayerSpec::maxpool("pool2", 2, 2),
            LayerSpec::conv("conv3", 16, 3, 1, 1),
            LayerSpec::conv("conv4", 24, 3, 1, 1),
            LayerSpec::conv("conv5", 24, 3, 1, 1),
        ];
        let taps = [(0, "conv-1"), (2, "conv-2"), (4, "conv-3"), (5, "conv-4"), (6, "conv-5")]
            .iter()
            .map(|(i, n)| (n.to_string(), *i))
            .collect();
        Self {
            input: (3, input_hw, input_hw),
            layers,
            taps,
        }
    }
}
