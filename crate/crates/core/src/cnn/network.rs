use std::sync::Arc;

use super::ops::{conv_forward, maxpool_forward};
use super::spec::{LayerGeometry, LayerKind, NetworkSpec};
use super::tensor::Tensor3;
use super::weights::WeightSet;
use crate::error::{Error, Result};
use crate::mask::Mask;

/// A validated network description bound to matching weights.
#[derive(Debug)]
pub struct Network {
    spec: NetworkSpec,
    weights: WeightSet,
    geometry: Vec<LayerGeometry>,
    /// conv-layer ordinal per layer index (None for pools)
    conv_slot: Vec<Option<usize>>,
}

impl Network {
    pub fn new(spec: NetworkSpec, weights: WeightSet) -> Result<Arc<Self>> {
        let geometry = spec.validate()?;
        weights.check_against(&spec)?;
        let mut next = 0;
        let conv_slot = spec
            .layers
            .iter()
            .map(|l| {
                l.as_conv().map(|_| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Ok(Arc::new(Self {
            spec,
            weights,
            geometry,
            conv_slot,
        }))
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn geometry(&self) -> &[LayerGeometry] {
        &self.geometry
    }

    pub fn tap_layer(&self, tap: &str) -> Result<usize> {
        self.spec
            .tap_layer(tap)
            .ok_or_else(|| Error::Config(format!("unknown tap {tap:?}")))
    }

    pub fn tap_geometry(&self, tap: &str) -> Result<LayerGeometry> {
        Ok(self.geometry[self.tap_layer(tap)?])
    }

    pub(crate) fn conv_weights(&self, layer: usize) -> Option<&super::weights::ConvWeights> {
        self.conv_slot[layer].map(|i| &self.weights.layers[i])
    }

    /// Downsamples an image-resolution mask to the cells of `layer`: a cell is
    /// inside when any image pixel of its footprint is inside.
    pub fn downsample_mask(&self, mask: &Mask, layer: usize) -> Mask {
        let g = self.geometry[layer];
        let integral = mask.integral();
        let (h, w) = (mask.height() as isize, mask.width() as isize);
        let w1 = mask.width() + 1;
        let clip = |lo: isize, hi: isize, n: isize| (lo.clamp(0, n) as usize, hi.clamp(0, n) as usize);
        Mask::from_fn(g.height, g.width, |r, c| {
            let (y0, y1) = g.footprint(r);
            let (x0, x1) = g.footprint(c);
            let (y0, y1) = clip(y0, y1, h);
            let (x0, x1) = clip(x0, x1, w);
            if y0 >= y1 || x0 >= x1 {
                return false;
            }
            let s = integral[y1 * w1 + x1] + integral[y0 * w1 + x0]
                - integral[y0 * w1 + x1]
                - integral[y1 * w1 + x0];
            s > 0
        })
    }
}

/// Everything recorded for one layer during a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    /// Layer output (post-ReLU and post-mask for conv layers).
    pub output: Tensor3,
    /// Conv only: sign of the pre-activation, recorded before masking.
    pub relu_gate: Option<Vec<bool>>,
    /// Conv only: mask applied at this layer's resolution.
    pub cell_mask: Option<Mask>,
    /// Pool only: flat input index of each output's winner.
    pub argmax: Option<Vec<usize>>,
}

impl LayerTrace {
    /// Whether gradient may pass through conv cell `flat` (`c*h*w` index).
    #[inline]
    pub(crate) fn passes(&self, flat: usize) -> bool {
        let open = self.relu_gate.as_ref().is_none_or(|g| g[flat]);
        open && match &self.cell_mask {
            Some(m) => {
                let plane = m.height() * m.width();
                m.data()[flat % plane]
            }
            None => true,
        }
    }
}

/// Activations of every layer from one (optionally masked) forward pass.
#[derive(Clone, Debug)]
pub struct ActivationTrace {
    net: Arc<Network>,
    input: Tensor3,
    image_mask: Option<Mask>,
    layers: Vec<LayerTrace>,
}

impl PartialEq for ActivationTrace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.net, &other.net)
            && self.input == other.input
            && self.image_mask == other.image_mask
            && self.layers == other.layers
    }
}

impl ActivationTrace {
    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn input(&self) -> &Tensor3 {
        &self.input
    }

    pub fn image_mask(&self) -> Option<&Mask> {
        self.image_mask.as_ref()
    }

    pub fn layers(&self) -> &[LayerTrace] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &LayerTrace {
        &self.layers[i]
    }

    pub fn tap_output(&self, tap: &str) -> Result<&Tensor3> {
        Ok(&self.layers[self.net.tap_layer(tap)?].output)
    }

    /// Re-runs the forward pass from the stored input and mask.
    pub fn replay(&self) -> Result<ActivationTrace> {
        forward_pass(&self.net, &self.input, self.image_mask.as_ref())
    }
}

/// Forward pass recording every layer. When a mask is supplied it is
/// downsampled to each conv layer and out-of-mask activations are zeroed
/// after the ReLU.
pub fn forward_pass(net: &Arc<Network>, image: &Tensor3, mask: Option<&Mask>) -> Result<ActivationTrace> {
    let (c, h, w) = net.spec.input;
    if image.shape() != (c, h, w) {
        return Err(Error::Shape(format!(
            "image is {:?}, network expects {:?}",
            image.shape(),
            (c, h, w)
        )));
    }
    if let Some(m) = mask {
        if (m.height(), m.width()) != (h, w) {
            return Err(Error::Shape(format!(
                "mask is {}x{}, image is {h}x{w}",
                m.height(),
                m.width()
            )));
        }
    }
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(net.spec.layers.len());
    for (i, layer) in net.spec.layers.iter().enumerate() {
        let prev = layers.last().map(|l| &l.output).unwrap_or(image);
        let rec = match &layer.kind {
            LayerKind::ConvRelu(spec) => {
                let weights = net.conv_weights(i).expect("conv layer has weights");
                let mut output = conv_forward(prev, weights, spec)?;
                let relu_gate: Vec<bool> = output.data().iter().map(|&v| v > 0.0).collect();
                let cell_mask = mask.map(|m| net.downsample_mask(m, i));
                if let Some(cm) = &cell_mask {
                    let plane = output.height() * output.width();
                    for (k, v) in output.data_mut().iter_mut().enumerate() {
                        if !cm.data()[k % plane] {
                            *v = 0.0;
                        }
                    }
                }
                LayerTrace {
                    output,
                    relu_gate: Some(relu_gate),
                    cell_mask,
                    argmax: None,
                }
            }
            LayerKind::MaxPool(spec) => {
                let (output, argmax) = maxpool_forward(prev, spec)?;
                LayerTrace {
                    output,
                    relu_gate: None,
                    cell_mask: None,
                    argmax: Some(argmax),
                }
            }
            LayerKind::Lrn(_) => return Err(Error::Unsupported("local response normalisation".into())),
        };
        layers.push(rec);
    }
    Ok(ActivationTrace {
        net: Arc::clone(net),
        input: image.clone(),
        image_mask: mask.cloned(),
        layers,
    })
}
