//! 8-bit RGB images and PPM (P6) I/O.

use std::fs;
use std::path::Path;

use crate::cnn::Tensor3;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&fill);
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Sets the pixel only when `(y, x)` is inside the image.
    pub fn put(&mut self, y: isize, x: isize, rgb: [u8; 3]) {
        if y >= 0 && x >= 0 && (y as usize) < self.height && (x as usize) < self.width {
            self.set(y as usize, x as usize, rgb);
        }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Network input: three channels (R, G, B) holding the raw 0..255 values.
    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3::from_fn(3, self.height, self.width, |c, y, x| f64::from(self.data[(y * self.width + x) * 3 + c]))
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let ctx = "ppm image";
        // header: magic, width, height, maxval, each separated by whitespace
        // with optional comments
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(Error::parse(ctx, "truncated header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
        }
        if fields[0] != "P6" {
            return Err(Error::parse(ctx, format!("unsupported magic {}", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(ctx, format!("{s}: {e}")));
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(Error::parse(ctx, "only maxval 255 is supported"));
        }
        let body = &bytes[(i + 1).min(bytes.len())..];
        if body.len() != width * height * 3 {
            return Err(Error::parse(ctx, format!("expected {} pixel bytes, found {}", width * height * 3, body.len())));
        }
        Ok(Self {
            height,
            width,
            data: body.to_vec(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_ppm(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let mut im = RgbImage::new(3, 5, [10, 20, 30]);
        im.set(2, 4, [255, 0, 7]);
        let back = RgbImage::from_ppm(&im.to_ppm()).unwrap();
        assert_eq!(back, im);
    }

    #[test]
    fn ppm_comment_and_truncation() {
        let mut bytes = b"P6\n# note\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert_eq!(RgbImage::from_ppm(&bytes).unwrap().get(0, 0), [1, 2, 3]);
        bytes.pop();
        assert!(RgbImage::from_ppm(&bytes).is_err());
    }

    #[test]
    fn tensor_layout() {
        let mut im = RgbImage::new(2, 2, [0, 0, 0]);
        im.set(1, 0, [4, 5, 6]);
        let t = im.to_tensor();
        assert_eq!(t.shape(), (3, 2, 2));
        assert_eq!((t.get(0, 1, 0), t.get(1, 1, 0), t.get(2, 1, 0)), (4.0, 5.0, 6.0));
    }
}
