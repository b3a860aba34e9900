//! Test-only oracles. Nothing here calls into the code paths it checks
//! beyond building inputs.
#![allow(dead_code)]

use std::sync::Arc;

use hiergrasp::cnn::{backward_single_path, forward_pass, ActivationTrace, GradTarget, UnitRef, ConvSpec, ConvWeights, LayerKind, LayerSpec, Network, NetworkSpec, PoolSpec, Tensor3, WeightSet};
use hiergrasp::mask::Mask;
use hiergrasp::segmentation::{OrganizedPointCloud, PlaneModel};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> Tensor3 {
    Tensor3::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
}

/// Direct six-nested-loop convolution with ReLU.
pub fn naive_conv(input: &Tensor3, w: &ConvWeights, spec: &ConvSpec) -> Tensor3 {
    let oh = (input.height() + 2 * spec.pad - spec.kernel) / spec.stride + 1;
    let ow = (input.width() + 2 * spec.pad - spec.kernel) / spec.stride + 1;
    let mut out = Tensor3::zeros(spec.out_channels, oh, ow);
    for o in 0..spec.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = w.bias[o];
                for i in 0..input.channels() {
                    for ky in 0..spec.kernel {
                        for kx in 0..spec.kernel {
                            let iy = (y * spec.stride + ky) as isize - spec.pad as isize;
                            let ix = (x * spec.stride + kx) as isize - spec.pad as isize;
                            if iy < 0 || ix < 0 || iy >= input.height() as isize || ix >= input.width() as isize {
                                continue;
                            }
                            acc += w.get(o, i, ky, kx) * input.get(i, iy as usize, ix as usize);
                        }
                    }
                }
                out.set(o, y, x, acc.max(0.0));
            }
        }
    }
    out
}

/// Brute-force window scan; returns pooled values and `(c, y, x)` winners
/// found by strictly-greater comparison in row-major window order.
pub fn window_scan_pool(input: &Tensor3, window: usize, stride: usize) -> (Tensor3, Vec<(usize, usize, usize)>) {
    let oh = (input.height() - window) / stride + 1;
    let ow = (input.width() - window) / stride + 1;
    let mut out = Tensor3::zeros(input.channels(), oh, ow);
    let mut winners = Vec::new();
    for c in 0..input.channels() {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = (c, y * stride, x * stride);
                for wy in 0..window {
                    for wx in 0..window {
                        let p = (c, y * stride + wy, x * stride + wx);
                        if input.get(p.0, p.1, p.2) > input.get(best.0, best.1, best.2) {
                            best = p;
                        }
                    }
                }
                out.set(c, y, x, input.get(best.0, best.1, best.2));
                winners.push(best);
            }
        }
    }
    (out, winners)
}

/// Receptive-field interval of a cell, found by mapping `[i, i]` back through
/// every layer below it. Returns inclusive image coordinates (may extend
/// past the border) and the cumulative stride.
pub fn receptive_interval(net: &NetworkSpec, layer: usize, i: usize) -> (isize, isize, usize) {
    let (mut lo, mut hi) = (i as isize, i as isize);
    let mut jump = 1;
    for l in (0..=layer).rev() {
        let (k, s, p) = match net.layers[l].kind {
            LayerKind::ConvRelu(c) => (c.kernel, c.stride, c.pad),
            LayerKind::MaxPool(pl) => (pl.window, pl.stride, 0),
            LayerKind::Lrn(_) => (1, 1, 0),
        };
        lo = lo * s as isize - p as isize;
        hi = hi * s as isize - p as isize + k as isize - 1;
        jump *= s;
    }
    (lo, hi, jump)
}

/// Image rows (or cols) that a cell's mask footprint covers: one stride-wide
/// span centred on the receptive field.
pub fn footprint(net: &NetworkSpec, layer: usize, i: usize) -> (isize, isize) {
    let (lo, hi, jump) = receptive_interval(net, layer, i);
    let center = (lo + hi).div_euclid(2);
    let start = center - (jump / 2) as isize;
    (start, start + jump as isize)
}

/// Small random network of `convs` conv layers (3x3, pad 1) with an optional
/// max-pool after the first, for finite-difference checks.
pub fn small_net(rng: &mut impl Rng, in_ch: usize, size: usize, convs: usize, pool: bool) -> Arc<Network> {
    let mut layers = Vec::new();
    let mut taps = Vec::new();
    for i in 0..convs {
        let stride = if i == 0 && !pool && rng.random_bool(0.5) { 2 } else { 1 };
        let spec = LayerSpec::conv(&format!("c{i}"), rng.random_range(2..5), 3, stride, 1);
        taps.push((format!("conv-{}", i + 1), layers.len()));
        layers.push(spec);
        if i == 0 && pool {
            layers.push(LayerSpec {
                name: "p".into(),
                kind: LayerKind::MaxPool(PoolSpec { window: 2, stride: 2 }),
            });
        }
    }
    let spec = NetworkSpec {
        input: (in_ch, size, size),
        layers,
        taps,
    };
    let mut weights = WeightSet::random(&spec, rng.random(), 1.6);
    // positive biases keep a healthy fraction of units alive
    for l in weights.layers.iter_mut() {
        for b in l.bias.iter_mut() {
            *b = rng.random_range(0.0..0.3);
        }
    }
    Network::new(spec, weights).unwrap()
}

pub fn trace(net: &Arc<Network>, image: &Tensor3, mask: Option<&Mask>) -> ActivationTrace {
    forward_pass(net, image, mask).unwrap()
}

/// True when two traces share every ReLU sign and pooling winner.
pub fn same_activation_pattern(a: &ActivationTrace, b: &ActivationTrace) -> bool {
    a.layers()
        .iter()
        .zip(b.layers())
        .all(|(x, y)| x.relu_gate == y.relu_gate && x.argmax == y.argmax)
}

pub fn random_mask(rng: &mut impl Rng, h: usize, w: usize) -> Mask {
    // union of a few random rectangles
    let mut m = Mask::new(h, w, false);
    for _ in 0..rng.random_range(1..4) {
        let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
        let (y1, x1) = (rng.random_range(y0..h), rng.random_range(x0..w));
        for y in y0..=y1 {
            for x in x0..=x1 {
                m.set(y, x, true);
            }
        }
    }
    m
}

/// Checks one random unit against central differences; returns the number
/// of pixels compared (pixels where the perturbation flips a ReLU sign or a
/// pooling winner are skipped, the network being piecewise linear).
pub fn finite_difference_case(seed: u64) -> Result<(usize, usize), String> {
    let mut r = rng(seed);
    let pool = r.random_bool(0.5);
    let size = r.random_range(8..13);
    let in_ch = r.random_range(1..3);
    let net = small_net(&mut r, in_ch, size, 3, pool);
    let img = random_tensor(&mut r, in_ch, size, size);
    let t = trace(&net, &img, None);
    let tap = ["conv-2", "conv-3"][r.random_range(0..2)];
    let layer = net.tap_layer(tap).unwrap();
    let out = &t.layer(layer).output;
    // prefer a live unit
    let mut unit = None;
    for _ in 0..50 {
        let (c, y, x) = (r.random_range(0..out.channels()), r.random_range(0..out.height()), r.random_range(0..out.width()));
        if out.get(c, y, x) > 0.0 {
            unit = Some((c, y, x));
            break;
        }
    }
    let Some((c, y, x)) = unit else { return Ok((0, 0)) };
    let grad = backward_single_path(&t, &UnitRef::new(tap, c, y, x), &GradTarget::Image).map_err(|e| e.to_string())?;
    let (rlo, rhi, _) = receptive_interval(net.spec(), layer, y);
    let (clo, chi, _) = receptive_interval(net.spec(), layer, x);
    let eps = 1e-3;
    let (mut checked, mut skipped) = (0, 0);
    for ch in 0..in_ch {
        for py in 0..size {
            for px in 0..size {
                let inside = (py as isize) >= rlo && (py as isize) <= rhi && (px as isize) >= clo && (px as isize) <= chi;
                let g = grad.get(ch, py, px);
                if !inside {
                    if g != 0.0 {
                        return Err(format!("seed {seed}: nonzero gradient outside receptive field"));
                    }
                    continue;
                }
                let mut plus = img.clone();
                plus.set(ch, py, px, img.get(ch, py, px) + eps);
                let mut minus = img.clone();
                minus.set(ch, py, px, img.get(ch, py, px) - eps);
                let tp = trace(&net, &plus, None);
                let tm = trace(&net, &minus, None);
                if !same_activation_pattern(&tp, &t) || !same_activation_pattern(&tm, &t) {
                    skipped += 1;
                    continue;
                }
                let fd = (tp.layer(layer).output.get(c, y, x) - tm.layer(layer).output.get(c, y, x)) / (2.0 * eps);
                let scale = fd.abs().max(g.abs());
                if scale > 1e-9 && (fd - g).abs() / scale > 1e-3 {
                    return Err(format!("seed {seed}: fd {fd} vs analytic {g} at ({ch},{py},{px})"));
                }
                checked += 1;
            }
        }
    }
    Ok((checked, skipped))
}

/// Camera-frame cloud of a tilted plane seen from the origin; each pixel is the
/// ray hit of a simple pinhole grid.
pub fn plane_cloud(h: usize, w: usize, plane: &PlaneModel) -> OrganizedPointCloud {
    OrganizedPointCloud::from_fn(h, w, |y, x| {
        let ray = Vector3::new((x as f64 - w as f64 / 2.0) / 300.0, (y as f64 - h as f64 / 2.0) / 300.0, 1.0);
        let t = -plane.offset / plane.normal.dot(&ray);
        (t > 0.0).then(|| ray * t)
    })
}

/// Replaces a fraction of points with uniform outliers; returns the cloud and
/// the ground-truth inlier labels.
pub fn with_outliers(seed: u64, fraction: f64, noise: f64) -> (OrganizedPointCloud, Vec<bool>) {
    let mut rng = rng(seed);
    let plane = PlaneModel::through(&Vector3::new(0.0, 0.0, 0.7), &Vector3::new(0.0, -0.6, 0.8)).unwrap();
    let mut cloud = plane_cloud(60, 80, &plane);
    let mut labels = vec![false; 60 * 80];
    for y in 0..60 {
        for x in 0..80 {
            let p = cloud.get(y, x).unwrap();
            if rng.random_bool(fraction) {
                let q = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.3..1.1));
                // keep outliers clear of the inlier band so labels stay exact
                if plane.signed_distance(&q).abs() > 0.02 {
                    cloud.set(y, x, Some(q));
                    continue;
                }
            }
            labels[y * 80 + x] = true;
            cloud.set(y, x, Some(p + plane.normal * rng.random_range(-noise..noise)));
        }
    }
    (cloud, labels)
}

pub mod scenes;
