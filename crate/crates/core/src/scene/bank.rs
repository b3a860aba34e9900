//! Hand-built weights for the desk-scale network.
//!
//! conv1 finds luminance edges in eight directions, conv2 splits them into
//! strong edges, weak edges, flat patches and the gentle shading ramps that
//! only curved surfaces produce, conv3 turns those into corners and
//! boundaries, conv4 groups neighbouring landmarks, and conv5 gates the
//! groups by object type.

use std::sync::Arc;

use crate::cnn::{ConvWeights, Network, NetworkSpec, WeightSet};
use crate::error::Result;

/// Unit step per direction `k` (angle `45 k` degrees, rows grow downward): `(dy, dx)`.
const DIRS: [(isize, isize); 8] = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)];
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Image side the bank is built for.
pub const DESK_INPUT: usize = 227;

// conv2 channels
const E: usize = 0; // strong edge, direction k at E + k
const RAMP_R: usize = 8; // moderate gradient pointing right
const RAMP_L: usize = 9; // moderate gradient pointing left
const INSIDE2: usize = 10;
const W: [usize; 4] = [11, 12, 13, 14]; // weak edge, directions 0, 2, 4, 6
const FLAT2: usize = 15; // no gradient anywhere nearby

// conv3 channels
pub(crate) mod c3 {
    pub const TL: usize = 0;
    pub const TR: usize = 1;
    pub const BR: usize = 2;
    pub const BL: usize = 3;
    pub const TOP: usize = 4;
    pub const RIGHT: usize = 5;
    pub const BOTTOM: usize = 6;
    pub const LEFT: usize = 7;
    pub const FOLD: usize = 8;
    pub const RAMP: usize = 9;
    pub const FLAT: usize = 10;
    pub const INSIDE: usize = 11;
    /// Diagonal boundaries, object toward directions 1, 3, 5, 7.
    pub const DIAG: [usize; 4] = [12, 13, 14, 15];
}

fn tangent(k: usize) -> [(isize, isize); 2] {
    let (dy, dx) = DIRS[(k + 2) % 8];
    [(dy, dx), (-dy, -dx)]
}

/// 3x3 kernel writer with `(dy, dx)` offsets from the output cell.
struct K3<'a>(&'a mut ConvWeights);

impl K3<'_> {
    fn add(&mut self, o: usize, i: usize, (dy, dx): (isize, isize), v: f64) {
        let (ky, kx) = ((dy + 1) as usize, (dx + 1) as usize);
        let cur = self.0.get(o, i, ky, kx);
        self.0.set(o, i, ky, kx, cur + v);
    }

    fn all(&mut self, o: usize, i: usize, v: f64) {
        for dy in -1..=1 {
            for dx in -1..=1 {
                self.add(o, i, (dy, dx), v);
            }
        }
    }

    fn bias(&mut self, o: usize, v: f64) {
        self.0.bias[o] = v;
    }
}

/// Derivative-of-Gaussian on luminance, scaled so that an ideal step of
/// height `d` through the centre gives `d`.
fn conv1() -> ConvWeights {
    let mut w = ConvWeights::zeros(8, 3, 5);
    let sigma: f64 = 1.1;
    for k in 0..8 {
        let a = (k as f64 * 45.0).to_radians();
        let (s, c) = a.sin_cos();
        let mut kern = [[0.0; 5]; 5];
        let mut step = 0.0;
        for (y, row) in kern.iter_mut().enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                let (fy, fx) = (y as f64 - 2.0, x as f64 - 2.0);
                let proj = fx * c + fy * s;
                *v = proj * (-(fx * fx + fy * fy) / (2.0 * sigma * sigma)).exp();
                if proj > 1e-9 {
                    step += *v;
                }
            }
        }
        for (y, row) in kern.iter().enumerate() {
            for (x, v) in row.iter().enumerate() {
                for (ch, l) in LUMA.iter().enumerate() {
                    w.set(k, ch, y, x, l * v / step);
                }
            }
        }
        w.bias[k] = -0.5;
    }
    w
}

fn conv2() -> ConvWeights {
    let mut w = ConvWeights::zeros(16, 8, 3);
    let mut k3 = K3(&mut w);
    for k in 0..8 {
        k3.add(E + k, k, (0, 0), 1.0);
        for t in tangent(k) {
            k3.add(E + k, k, t, 0.5);
        }
        k3.bias(E + k, -25.0);
    }
    for (o, k) in [(RAMP_R, 0), (RAMP_L, 4)] {
        k3.all(o, k, 1.0 / 3.0);
        k3.bias(o, -2.0);
    }
    for k in 0..8 {
        k3.all(FLAT2, k, -20.0);
    }
    k3.bias(FLAT2, 20.0);
    k3.bias(INSIDE2, 20.0);
    // weak edges: a peak across the edge, so a steady ramp stays silent
    for (j, k) in [0usize, 2, 4, 6].into_iter().enumerate() {
        let (dy, dx) = DIRS[k];
        k3.add(W[j], k, (0, 0), 1.0);
        for t in tangent(k) {
            k3.add(W[j], k, t, 0.5);
        }
        k3.add(W[j], k, (dy, dx), -1.0);
        k3.add(W[j], k, (-dy, -dx), -1.0);
        k3.bias(W[j], -3.0);
    }
    w
}

fn conv3() -> ConvWeights {
    use c3::*;
    let mut w = ConvWeights::zeros(16, 16, 3);
    let mut k3 = K3(&mut w);
    // boundaries: the object lies toward direction k of the edge
    for (o, k) in [(TOP, 2usize), (RIGHT, 4), (BOTTOM, 6), (LEFT, 0)] {
        k3.add(o, E + k, (0, 0), 1.0);
        for t in tangent(k) {
            k3.add(o, E + k, t, 0.6);
        }
    }
    for (j, k) in [1usize, 3, 5, 7].into_iter().enumerate() {
        let o = DIAG[j];
        k3.add(o, E + k, (0, 0), 1.0);
        for t in tangent(k) {
            k3.add(o, E + k, t, 0.6);
        }
    }
    // convex corners: diagonal edge at the centre, the two boundaries running away from it
    for (o, diag, a, b) in [(TL, 1usize, 2usize, 0usize), (TR, 3, 2, 4), (BR, 5, 6, 4), (BL, 7, 6, 0)] {
        k3.add(o, E + diag, (0, 0), 1.0);
        for (edge, across) in [(a, b), (b, a)] {
            // boundary `edge` continues toward the object side of `across`
            let (dy, dx) = DIRS[across];
            k3.add(o, E + edge, (0, 0), 0.5);
            k3.add(o, E + edge, (dy, dx), 0.8);
            k3.add(o, E + edge, (-dy, -dx), -0.8);
        }
    }
    // face fold: weak edge, brighter face above, object on both sides
    k3.add(FOLD, W[3], (0, 0), 1.0);
    k3.add(FOLD, W[3], (0, -1), 0.5);
    k3.add(FOLD, W[3], (0, 1), 0.5);
    k3.add(FOLD, INSIDE2, (-1, 0), 0.2);
    k3.add(FOLD, INSIDE2, (1, 0), 0.2);
    k3.add(FOLD, E + 6, (0, 0), -1.0);
    k3.add(FOLD, E + 2, (0, 0), -1.0);
    k3.bias(FOLD, -8.0);
    // shading ramp across a curved surface: a run of moderate gradients, away
    // from flat regions and from edges
    // RAMP, FLAT and INSIDE only feed the gates, so they come out already
    // amplified to gate scale
    for dx in -1..=1 {
        k3.add(RAMP, RAMP_L, (0, dx), GAIN);
    }
    k3.all(RAMP, FLAT2, -10.0 * GAIN);
    for e in 0..8 {
        k3.all(RAMP, E + e, if e == 4 { -0.7 * GAIN } else { -0.1 * GAIN });
    }
    k3.bias(RAMP, -20.0 * GAIN);
    // inside, one cell up
    k3.add(INSIDE, INSIDE2, (-1, 0), GATE / 20.0);
    k3.all(FLAT, FLAT2, GAIN);
    k3.bias(FLAT, -120.0 * GAIN);
    w
}

/// Landmarks in clockwise order around a silhouette, starting top left.
const RING: [usize; 12] = [c3::TL, c3::DIAG[0], c3::TOP, c3::TR, c3::DIAG[1], c3::RIGHT, c3::BR, c3::DIAG[2], c3::BOTTOM, c3::BL, c3::DIAG[3], c3::LEFT];

// conv4 channels: 0..12 landmark triples along RING, then the gates
const FLAT_BELOW: usize = 13; // flat surface in this row or the next, saturating
const FLAT_BELOW_CAP: usize = 14;
const INSIDE_ABOVE: usize = 15; // object two cells up
const RAMP_NEAR: usize = 16; // shading ramp within one cell, saturating
const RAMP_NEAR_CAP: usize = 17;
const FLAT_NEAR: usize = 18; // any flat surface within one cell

/// Level of a saturated gate.
const GATE: f64 = 1.0e7;
/// Input gain that saturates a gate on any non-negligible response.
const GAIN: f64 = 1.0e9;
const GATE_W: f64 = 0.5;

fn conv4() -> ConvWeights {
    use c3::*;
    let mut w = ConvWeights::zeros(24, 16, 3);
    let mut k3 = K3(&mut w);
    let spread = |k3: &mut K3, o: usize, i: usize| {
        k3.all(o, i, 2.0);
        k3.add(o, i, (0, 0), 0.2);
    };
    for k in 0..12 {
        for j in [11, 0, 1] {
            spread(&mut k3, k, RING[(k + j) % 12]);
        }
    }
    for o in [FLAT_BELOW, FLAT_BELOW_CAP] {
        for dy in 0..=1 {
            for dx in -1..=1 {
                k3.add(o, FLAT, (dy, dx), 1.0);
            }
        }
    }
    k3.bias(FLAT_BELOW_CAP, -GATE);
    k3.add(INSIDE_ABOVE, INSIDE, (-1, 0), 1.0);
    for o in [RAMP_NEAR, RAMP_NEAR_CAP] {
        k3.all(o, RAMP, 1.0);
    }
    k3.bias(RAMP_NEAR_CAP, -GATE);
    k3.all(FLAT_NEAR, FLAT, 1.0);
    w
}

/// conv5: twelve box parents, then twelve cylinder parents. Each reads five
/// neighbouring landmark triples at its own cell.
///
/// A box parent only passes on a flat face with the object reaching at least
/// four cells higher, the front face of a box. A cylinder parent needs a
/// shading ramp next to it and no flat surface within two cells.
fn conv5() -> ConvWeights {
    let mut w = ConvWeights::zeros(24, 24, 3);
    let mut k3 = K3(&mut w);
    for k in 0..12 {
        for o in [k, 12 + k] {
            for j in [0, 1] {
                k3.add(o, (k + j) % 12, (0, 0), 2.0);
            }
        }
        let b = k;
        k3.add(b, FLAT_BELOW, (1, 0), GATE_W);
        k3.add(b, FLAT_BELOW_CAP, (1, 0), -GATE_W);
        k3.add(b, INSIDE_ABOVE, (-1, 0), GATE_W);
        k3.bias(b, -2.0 * GATE_W * GATE);
        let c = 12 + k;
        k3.add(c, RAMP_NEAR, (0, 0), GATE_W);
        k3.add(c, RAMP_NEAR_CAP, (0, 0), -GATE_W);
        k3.all(c, FLAT_NEAR, -GATE_W);
        k3.bias(c, -GATE_W * GATE);
    }
    w
}

fn round_f32(mut w: ConvWeights) -> ConvWeights {
    for v in w.weights.iter_mut().chain(w.bias.iter_mut()) {
        *v = f64::from(*v as f32);
    }
    w
}

/// The hand-built bank for [`NetworkSpec::desk_scale`]`(227)`. Values are
/// representable in `f32`, so they survive the blob format unchanged.
pub fn desk_weights() -> WeightSet {
    WeightSet {
        layers: [conv1(), conv2(), conv3(), conv4(), conv5()].into_iter().map(round_f32).collect(),
    }
}

pub fn desk_network() -> Result<Arc<Network>> {
    Network::new(NetworkSpec::desk_scale(DESK_INPUT), desk_weights())
}
