use super::spec::{ConvSpec, PoolSpec};
use super::tensor::Tensor3;
use super::weights::ConvWeights;
use crate::error::{Error, Result};

/// Convolution followed by ReLU.
pub fn conv_forward(input: &Tensor3, weights: &ConvWeights, spec: &ConvSpec) -> Result<Tensor3> {
    if input.channels() != weights.in_channels {
        return Err(Error::Shape(format!(
            "conv input has {} channels, kernel expects {}",
            input.channels(),
            weights.in_channels
        )));
    }
    if weights.out_channels != spec.out_channels || weights.kernel != spec.kernel {
        return Err(Error::Shape(format!(
            "kernel {}x{}x{k}x{k} does not match layer spec ({} filters, kernel {})",
            weights.out_channels,
            weights.in_channels,
            spec.out_channels,
            spec.kernel,
            k = weights.kernel
        )));
    }
    if weights.bias.len() != spec.out_channels {
        return Err(Error::Shape("bias length differs from filter count".into()));
    }
    let (oh, ow) = spec.output_hw(input.height(), input.width())?;
    let (ih, iw) = (input.height() as isize, input.width() as isize);
    let (k, s, p) = (spec.kernel, spec.stride as isize, spec.pad as isize);
    let mut out = Tensor3::zeros(spec.out_channels, oh, ow);

    for o in 0..spec.out_channels {
        let plane = out.channel_mut(o);
        plane.fill(weights.bias[o]);
        for i in 0..weights.in_channels {
            let src = input.channel(i);
            for ky in 0..k {
                for kx in 0..k {
                    let w = weights.get(o, i, ky, kx);
                    if w == 0.0 {
                        continue;
                    }
                    // output columns whose tap lands inside the input row
                    let x_lo = ceil_div((p - kx as isize).max(0), s);
                    let x_hi = (iw - 1 - kx as isize + p).div_euclid(s).min(ow as isize - 1);
                    if x_hi < x_lo {
                        continue;
                    }
                    for y in 0..oh {
                        let iy = y as isize * s - p + ky as isize;
                        if iy < 0 || iy >= ih {
                            continue;
                        }
                        let row = &src[iy as usize * iw as usize..(iy as usize + 1) * iw as usize];
                        let orow = &mut plane[y * ow..(y + 1) * ow];
                        for x in x_lo..=x_hi {
                            let ix = x * s - p + kx as isize;
                            orow[x as usize] += w * row[ix as usize];
                        }
                    }
                }
            }
        }
        for v in plane.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

fn ceil_div(a: isize, b: isize) -> isize {
    (a + b - 1).div_euclid(b)
}

/// Max-pooling; returns the pooled tensor and, per output cell, the flat
/// input index of the winning element (ties go to the lowest index).
pub fn maxpool_forward(input: &Tensor3, spec: &PoolSpec) -> Result<(Tensor3, Vec<usize>)> {
    if spec.window > input.height() || spec.window > input.width() {
        return Err(Error::Config(format!(
            "pool window {} larger than input {}x{}",
            spec.window,
            input.height(),
            input.width()
        )));
    }
    let (oh, ow) = spec.output_hw(input.height(), input.width())?;
    let c = input.channels();
    let mut out = Tensor3::zeros(c, oh, ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let (y0, x0) = (y * spec.stride, x * spec.stride);
                let mut best = input.index(ch, y0, x0);
                let mut best_v = input.data()[best];
                for wy in 0..spec.window {
                    for wx in 0..spec.window {
                        let idx = input.index(ch, y0 + wy, x0 + wx);
                        let v = input.data()[idx];
                        if v > best_v {
                            best = idx;
                            best_v = v;
                        }
                    }
                }
                out.set(ch, y, x, best_v);
                argmax.push(best);
            }
        }
    }
    Ok((out, argmax))
}
