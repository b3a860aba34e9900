use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Image-aligned grid of camera-frame points in meters. Missing points are
/// stored as all-NaN.
#[derive(Clone, Debug)]
pub struct OrganizedPointCloud {
    height: usize,
    width: usize,
    points: Vec<[f64; 3]>,
}

/// Missing points compare equal to each other.
impl PartialEq for OrganizedPointCloud {
    fn eq(&self, other: &Self) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.points.iter().zip(&other.points).all(|(a, b)| a == b || (a[0].is_nan() && b[0].is_nan()))
    }
}

const MISSING: [f64; 3] = [f64::NAN; 3];
const BINARY_MAGIC: &[u8; 4] = b"PCLB";

impl OrganizedPointCloud {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            points: vec![MISSING; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Option<Vector3<f64>>) -> Self {
        let mut c = Self::empty(height, width);
        for y in 0..height {
            for x in 0..width {
                c.set(y, x, f(y, x));
            }
        }
        c
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> Option<Vector3<f64>> {
        let p = self.points[y * self.width + x];
        if p[0].is_finite() && p[1].is_finite() && p[2].is_finite() {
            Some(Vector3::new(p[0], p[1], p[2]))
        } else {
            None
        }
    }

    /// Stores a point; anything not fully finite is stored as missing.
    pub fn set(&mut self, y: usize, x: usize, p: Option<Vector3<f64>>) {
        self.points[y * self.width + x] = match p {
            Some(v) if v.iter().all(|c| c.is_finite()) => [v.x, v.y, v.z],
            _ => MISSING,
        };
    }

    pub fn valid_count(&self) -> usize {
        self.points.iter().filter(|p| p[0].is_finite()).count()
    }

    /// All valid points with their pixel coordinates.
    pub fn valid_points(&self) -> impl Iterator<Item = ((usize, usize), Vector3<f64>)> + '_ {
        (0..self.height * self.width).filter_map(move |i| {
            let (y, x) = (i / self.width, i % self.width);
            self.get(y, x).map(|p| ((y, x), p))
        })
    }

    /// Nearest valid pixel to `(y, x)` within `radius` pixels (Euclidean),
    /// scanning rings outward; ties go to row-major order.
    pub fn nearest_valid(&self, y: usize, x: usize, radius: usize) -> Option<((usize, usize), Vector3<f64>)> {
        let r = radius as isize;
        let mut best: Option<(isize, (usize, usize), Vector3<f64>)> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = dy * dy + dx * dx;
                if d2 > r * r {
                    continue;
                }
                let (yy, xx) = (y as isize + dy, x as isize + dx);
                if yy < 0 || xx < 0 || yy >= self.height as isize || xx >= self.width as isize {
                    continue;
                }
                if let Some(p) = self.get(yy as usize, xx as usize) {
                    if best.as_ref().is_none_or(|(bd, _, _)| d2 < *bd) {
                        best = Some((d2, (yy as usize, xx as usize), p));
                    }
                }
            }
        }
        best.map(|(_, px, p)| (px, p))
    }

    /// Text form: `pcloud h w` then one `x y z` line per pixel, `nan nan nan` for missing.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 30 + 32);
        let _ = writeln!(s, "pcloud {} {}", self.height, self.width);
        for p in &self.points {
            if p[0].is_finite() {
                let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
            } else {
                s.push_str("nan nan nan\n");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ctx = "point cloud";
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(ctx, "empty file"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some("pcloud") {
            return Err(Error::parse(ctx, "missing pcloud header"));
        }
        let mut dim = || -> Result<usize> {
            h.next()
                .ok_or_else(|| Error::parse(ctx, "header needs h w"))?
                .parse()
                .map_err(|e| Error::parse(ctx, format!("bad dim: {e}")))
        };
        let (height, width) = (dim()?, dim()?);
        let mut cloud = Self::empty(height, width);
        let mut n = 0;
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            if i >= height * width {
                return Err(Error::parse(ctx, "more points than h*w"));
            }
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(ctx, format!("line {}: {e}", i + 2))))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::parse(ctx, format!("line {}: expected 3 values", i + 2)));
            }
            let p = Vector3::new(v[0], v[1], v[2]);
            let all = v.iter().all(|c| c.is_finite());
            let none = v.iter().all(|c| c.is_nan());
            if !all && !none {
                return Err(Error::parse(ctx, format!("line {}: partially missing point", i + 2)));
            }
            cloud.set(i / width, i % width, all.then_some(p));
            n += 1;
        }
        if n != height * width {
            return Err(Error::parse(ctx, format!("expected {} points, found {n}", height * width)));
        }
        Ok(cloud)
    }

    /// Binary form: `PCLB`, little-endian u32 height and width, then
    /// `h*w*3` little-endian f32 values (NaN for missing).
    pub fn to_binary(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(12 + self.points.len() * 12);
        b.extend_from_slice(BINARY_MAGIC);
        b.extend_from_slice(&(self.height as u32).to_le_bytes());
        b.extend_from_slice(&(self.width as u32).to_le_bytes());
        for p in &self.points {
            for c in p {
                b.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        b
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let ctx = "binary point cloud";
        if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
            return Err(Error::parse(ctx, "bad magic"));
        }
        let u = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize;
        let (height, width) = (u(4), u(8));
        if bytes.len() != 12 + height * width * 12 {
            return Err(Error::parse(ctx, "length does not match header"));
        }
        let mut cloud = Self::empty(height, width);
        for (i, chunk) in bytes[12..].chunks_exact(12).enumerate() {
            let f = |o: usize| f64::from(f32::from_le_bytes([chunk[o], chunk[o + 1], chunk[o + 2], chunk[o + 3]]));
            cloud.set(i / width, i % width, Some(Vector3::new(f(0), f(4), f(8))));
        }
        Ok(cloud)
    }

    /// Loads either format, chosen by the leading bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
            Self::from_text(&text)
        }
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_binary()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> OrganizedPointCloud {
        OrganizedPointCloud::from_fn(3, 4, |y, x| {
            ((y + x) % 3 != 0).then(|| Vector3::new(x as f64 * 0.01, y as f64 * -0.02, 0.7 + 0.001 * x as f64))
        })
    }

    #[test]
    fn text_round_trip() {
        let c = sample();
        assert_eq!(OrganizedPointCloud::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn binary_round_trip_keeps_missing() {
        let c = sample();
        let back = OrganizedPointCloud::from_binary(&c.to_binary()).unwrap();
        assert_eq!(back.valid_count(), c.valid_count());
        assert!(back.get(0, 0).is_none());
        let (a, b) = (c.get(0, 1).unwrap(), back.get(0, 1).unwrap());
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn partially_missing_point_is_rejected() {
        assert!(OrganizedPointCloud::from_text("pcloud 1 1\n0.1 nan 0.3\n").is_err());
        assert!(OrganizedPointCloud::from_text("pcloud 1 2\n0.1 0.2 0.3\n").is_err());
    }

    #[test]
    fn nearest_valid_search() {
        let mut c = OrganizedPointCloud::empty(11, 11);
        c.set(5, 8, Some(Vector3::new(1.0, 2.0, 3.0)));
        c.set(0, 0, Some(Vector3::new(9.0, 9.0, 9.0)));
        let (px, p) = c.nearest_valid(5, 5, 5).unwrap();
        assert_eq!(px, (5, 8));
        assert_eq!(p, Vector3::new(1.0, 2.0, 3.0));
        assert!(c.nearest_valid(5, 5, 2).is_none());
    }
}
