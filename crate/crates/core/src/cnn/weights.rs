//! Convolution weights and the manifest + raw-blob weight format.
//!
//! A manifest is a `key = value` text file. Layer entries are
//! `layer.<i> = <kind> key=value ...`; each conv layer points at a blob
//! holding `out*in*k*k` little-endian `f32` kernel values in
//! `[out][in][ky][kx]` order followed by `out` bias values when `bias=1`.
//! Keys the loader does not understand are kept verbatim in
//! [`WeightManifest::extra`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::spec::{ConvSpec, LayerKind, LayerSpec, LrnSpec, NetworkSpec, PoolSpec};
use crate::error::{Error, Result};

/// Kernel and bias for one conv layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvWeights {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    /// `[out][in][ky][kx]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvWeights {
    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel,
            weights: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    pub fn index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[self.index(o, i, ky, kx)]
    }

    #[inline]
    pub fn set(&mut self, o: usize, i: usize, ky: usize, kx: usize, v: f64) {
        let idx = self.index(o, i, ky, kx);
        self.weights[idx] = v;
    }

    /// The `in x k x k` kernel of one output filter.
    pub fn filter(&self, o: usize) -> &[f64] {
        let n = self.in_channels * self.kernel * self.kernel;
        &self.weights[o * n..(o + 1) * n]
    }

    fn check(&self, spec: &ConvSpec, in_channels: usize, name: &str) -> Result<()> {
        let expect = (spec.out_channels, in_channels, spec.kernel);
        let got = (self.out_channels, self.in_channels, self.kernel);
        if expect != got {
            return Err(Error::Shape(format!(
                "{name}: weights are {}x{}x{}x{}, network expects {}x{}x{}x{}",
                got.0, got.1, got.2, got.2, expect.0, expect.1, expect.2, expect.2
            )));
        }
        if self.weights.len() != got.0 * got.1 * got.2 * got.2 {
            return Err(Error::Shape(format!("{name}: kernel buffer has wrong length")));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::Shape(format!(
                "{name}: bias has {} entries, expected {}",
                self.bias.len(),
                self.out_channels
            )));
        }
        Ok(())
    }
}

/// Weights for every conv layer of a network, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    pub layers: Vec<ConvWeights>,
}

impl WeightSet {
    /// Checks that the weights match `net` exactly.
    pub fn check_against(&self, net: &NetworkSpec) -> Result<()> {
        let convs: Vec<(&LayerSpec, &ConvSpec)> = net
            .layers
            .iter()
            .filter_map(|l| l.as_conv().map(|c| (l, c)))
            .collect();
        if convs.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "network has {} conv layers, weight set has {}",
                convs.len(),
                self.layers.len()
            )));
        }
        let mut channels = net.input.0;
        let mut ci = 0;
        for layer in &net.layers {
            if let LayerKind::ConvRelu(spec) = &layer.kind {
                let w = &self.layers[ci];
                w.check(spec, channels, &layer.name)?;
                if !spec.bias && w.bias.iter().any(|&b| b != 0.0) {
                    return Err(Error::Shape(format!("{}: bias disabled but nonzero", layer.name)));
                }
                channels = spec.out_channels;
                ci += 1;
            }
        }
        Ok(())
    }

    /// Seeded Gaussian weights scaled by `gain / sqrt(fan_in)`; values are
    /// rounded to `f32` so that they survive the blob format unchanged.
    pub fn random(net: &NetworkSpec, seed: u64, gain: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut channels = net.input.0;
        let mut layers = Vec::new();
        for layer in &net.layers {
            if let LayerKind::ConvRelu(spec) = &layer.kind {
                let mut w = ConvWeights::zeros(spec.out_channels, channels, spec.kernel);
                let scale = gain / ((channels * spec.kernel * spec.kernel) as f64).sqrt();
                for v in w.weights.iter_mut() {
                    *v = f64::from((Distribution::<f64>::sample(&StandardNormal, &mut rng) * scale) as f32);
                }
                if spec.bias {
                    for b in w.bias.iter_mut() {
                        *b = f64::from((Distribution::<f64>::sample(&StandardNormal, &mut rng) * 0.1 * scale) as f32);
                    }
                }
                channels = spec.out_channels;
                layers.push(w);
            }
        }
        Self { layers }
    }
}

/// Parsed manifest: network description, weights and any extra keys.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightManifest {
    pub network: NetworkSpec,
    pub weights: WeightSet,
    pub extra: BTreeMap<String, String>,
}

const FORMAT_TAG: &str = "hiergrasp-weights";

impl WeightManifest {
    /// Writes `manifest.txt` style text to `path` and one blob per conv layer
    /// next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.weights.check_against(&self.network)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let mut text = String::new();
        text.push_str(&format!("format = {FORMAT_TAG}\nversion = 1\n"));
        let (c, h, w) = self.network.input;
        text.push_str(&format!("input = {c} {h} {w}\n"));
        text.push_str(&format!("layers = {}\n", self.network.layers.len()));
        let mut ci = 0;
        for (i, layer) in self.network.layers.iter().enumerate() {
            let line = match &layer.kind {
                LayerKind::ConvRelu(spec) => {
                    let tap = self
                        .network
                        .taps
                        .iter()
                        .find(|(_, idx)| *idx == i)
                        .map(|(n, _)| format!(" tap={n}"))
                        .unwrap_or_default();
                    let blob = format!("{}.f32", layer.name);
                    let wts = &self.weights.layers[ci];
                    ci += 1;
                    write_blob(&dir.join(&blob), wts, spec.bias)?;
                    format!(
                        "conv name={}{tap} out={} in={} kernel={} stride={} pad={} bias={} blob={blob}",
                        layer.name,
                        spec.out_channels,
                        wts.in_channels,
                        spec.kernel,
                        spec.stride,
                        spec.pad,
                        u8::from(spec.bias)
                    )
                }
                LayerKind::MaxPool(p) => {
                    format!("maxpool name={} window={} stride={}", layer.name, p.window, p.stride)
                }
                LayerKind::Lrn(l) => format!(
                    "lrn name={} size={} alpha={} beta={}",
                    layer.name, l.size, l.alpha, l.beta
                ),
            };
            text.push_str(&format!("layer.{i} = {line}\n"));
        }
        for (k, v) in &self.extra {
            text.push_str(&format!("{k} = {v}\n"));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads and shape-checks a manifest and its blobs.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let ctx = path.display().to_string();
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&ctx, format!("line {}: expected key = value", lineno + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        match kv.remove("format").as_deref() {
            Some(FORMAT_TAG) => {}
            other => return Err(Error::parse(&ctx, format!("unknown format tag {other:?}"))),
        }
        match kv.remove("version").as_deref() {
            Some("1") => {}
            other => return Err(Error::parse(&ctx, format!("unsupported version {other:?}"))),
        }
        let input: Vec<usize> = kv
            .remove("input")
            .ok_or_else(|| Error::parse(&ctx, "missing input"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::parse(&ctx, format!("input: {e}"))))
            .collect::<Result<_>>()?;
        if input.len() != 3 {
            return Err(Error::parse(&ctx, "input needs three dims"));
        }
        let n_layers: usize = kv
            .remove("layers")
            .ok_or_else(|| Error::parse(&ctx, "missing layers"))?
            .parse()
            .map_err(|e| Error::parse(&ctx, format!("layers: {e}")))?;

        let mut layers = Vec::with_capacity(n_layers);
        let mut taps = Vec::new();
        let mut blobs: Vec<(usize, PathBuf)> = Vec::new();
        for i in 0..n_layers {
            let key = format!("layer.{i}");
            let entry = kv
                .remove(&key)
                .ok_or_else(|| Error::parse(&ctx, format!("missing {key}")))?;
            let mut parts = entry.split_whitespace();
            let kind = parts.next().unwrap_or_default().to_string();
            let fields: BTreeMap<&str, &str> = parts.filter_map(|p| p.split_once('=')).collect();
            let name = fields.get("name").copied().unwrap_or(&key).to_string();
            let get = |f: &str| -> Result<&str> {
                fields
                    .get(f)
                    .copied()
                    .ok_or_else(|| Error::parse(&ctx, format!("{key}: missing {f}")))
            };
            let num = |f: &str| -> Result<usize> {
                get(f)?
                    .parse()
                    .map_err(|e| Error::parse(&ctx, format!("{key}.{f}: {e}")))
            };
            let real = |f: &str| -> Result<f64> {
                get(f)?
                    .parse()
                    .map_err(|e| Error::parse(&ctx, format!("{key}.{f}: {e}")))
            };
            let kind = match kind.as_str() {
                "conv" => {
                    let spec = ConvSpec {
                        kernel: num("kernel")?,
                        stride: num("stride")?,
                        pad: num("pad")?,
                        out_channels: num("out")?,
                        bias: num("bias")? != 0,
                    };
                    if let Some(tap) = fields.get("tap") {
                        taps.push((tap.to_string(), i));
                    }
                    blobs.push((num("in")?, dir.join(get("blob")?)));
                    LayerKind::ConvRelu(spec)
                }
                "maxpool" => LayerKind::MaxPool(PoolSpec {
                    window: num("window")?,
                    stride: num("stride")?,
                }),
                "lrn" => LayerKind::Lrn(LrnSpec {
                    size: num("size")?,
                    alpha: real("alpha")?,
                    beta: real("beta")?,
                }),
                other => return Err(Error::parse(&ctx, format!("{key}: unknown layer kind {other:?}"))),
            };
            layers.push(LayerSpec { name, kind });
        }
        let network = NetworkSpec {
            input: (input[0], input[1], input[2]),
            layers,
            taps,
        };

        let mut weight_layers = Vec::new();
        let mut bi = 0;
        for layer in &network.layers {
            if let LayerKind::ConvRelu(spec) = &layer.kind {
                let (in_channels, blob) = &blobs[bi];
                bi += 1;
                weight_layers.push(read_blob(blob, spec, *in_channels)?);
            }
        }
        let weights = WeightSet {
            layers: weight_layers,
        };
        weights.check_against(&network)?;
        Ok(Self {
            network,
            weights,
            extra: kv,
        })
    }
}

fn write_blob(path: &Path, w: &ConvWeights, bias: bool) -> Result<()> {
    let mut bytes = Vec::with_capacity(4 * (w.weights.len() + w.bias.len()));
    for &v in &w.weights {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if bias {
        for &v in &w.bias {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_blob(path: &Path, spec: &ConvSpec, in_channels: usize) -> Result<ConvWeights> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut w = ConvWeights::zeros(spec.out_channels, in_channels, spec.kernel);
    let n_bias = if spec.bias { spec.out_channels } else { 0 };
    let expected = 4 * (w.weights.len() + n_bias);
    if bytes.len() != expected {
        return Err(Error::Shape(format!(
            "{}: blob has {} bytes, shape {}x{}x{}x{} (+{} bias) needs {}",
            path.display(),
            bytes.len(),
            spec.out_channels,
            in_channels,
            spec.kernel,
            spec.kernel,
            n_bias,
            expected
        )));
    }
    let mut vals = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    for v in w.weights.iter_mut() {
        *v = vals.next().unwrap_or_default();
    }
    for b in w.bias.iter_mut().take(n_bias) {
        *b = vals.next().unwrap_or_default();
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_is_bit_exact() {
        let net = NetworkSpec::desk_scale(32);
        let weights = WeightSet::random(&net, 7, 1.0);
        let mut extra = BTreeMap::new();
        extra.insert("preprocess.channel_order".to_string(), "rgb".to_string());
        let m = WeightManifest {
            network: net,
            weights,
            extra,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        m.save(&path).unwrap();
        let back = WeightManifest::load(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_blob_is_a_shape_error() {
        let net = NetworkSpec::desk_scale(32);
        let m = WeightManifest {
            weights: WeightSet::random(&net, 1, 1.0),
            network: net,
            extra: BTreeMap::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        m.save(&path).unwrap();
        let blob = dir.path().join("conv3.f32");
        let mut bytes = fs::read(&blob).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&blob, bytes).unwrap();
        let err = WeightManifest::load(&path).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
    }

    #[test]
    fn declared_shape_mismatch_is_rejected() {
        let net = NetworkSpec::desk_scale(32);
        let m = WeightManifest {
            weights: WeightSet::random(&net, 1, 1.0),
            network: net,
            extra: BTreeMap::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        m.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("out=16 in=16", "out=16 in=8");
        fs::write(&path, text).unwrap();
        let err = WeightManifest::load(&path).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
    }
}
