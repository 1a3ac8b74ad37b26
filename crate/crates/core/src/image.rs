//! Instance and depth rasters plus their PGM/PFM encodings.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::Scene;

/// Per-pixel person index, row-major, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMap {
    width: usize,
    height: usize,
    data: Vec<u32>,
}

impl InstanceMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, id: u32) {
        self.data[y * self.width + x] = id;
    }

    /// Pixel count per nonzero id.
    pub fn counts(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for &v in self.data.iter().filter(|&&v| v != 0) {
            *out.entry(v).or_insert(0) += 1;
        }
        out
    }

    pub fn foreground_pixels(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Checks dimensions against the camera and every nonzero id against
    /// the scene's bodies.
    pub fn check_against(&self, scene: &Scene) -> Result<()> {
        let expected = scene.camera.dims();
        if self.dims() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dims(),
            });
        }
        for &id in self.counts().keys() {
            if scene.body(id).is_none() {
                return Err(Error::UnknownId(id));
            }
        }
        Ok(())
    }

    /// Binary PGM (P5), maxval 65535, big-endian samples.
    pub fn encode_pgm(&self) -> Result<Vec<u8>> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        out.reserve(self.data.len() * 2);
        for &v in &self.data {
            let v = u16::try_from(v)
                .map_err(|_| Error::MalformedImage(format!("id {v} does not fit in 16 bits")))?;
            out.extend_from_slice(&v.to_be_bytes());
        }
        Ok(out)
    }

    pub fn decode_pgm(bytes: &[u8]) -> Result<Self> {
        let (fields, body) = parse_header(bytes, 4)?;
        if fields[0] != "P5" {
            return Err(Error::MalformedImage(format!(
                "expected P5, found {:?}",
                fields[0]
            )));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::MalformedImage(format!("bad header number {s:?}")))
        };
        let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval == 0 || maxval > 65535 {
            return Err(Error::MalformedImage(format!(
                "maxval {maxval} out of range"
            )));
        }
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let need = w * h * bytes_per;
        if body.len() < need {
            return Err(Error::MalformedImage(format!(
                "expected {need} bytes of samples, found {}",
                body.len()
            )));
        }
        let data = if bytes_per == 1 {
            body[..need].iter().map(|&b| b as u32).collect()
        } else {
            body[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                .collect()
        };
        Self::from_vec(w, h, data)
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_pgm()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode_pgm(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Reads a 16-bit PGM mask and validates it against `scene`.
pub fn load_instance_mask(path: impl AsRef<Path>, scene: &Scene) -> Result<InstanceMap> {
    let map = InstanceMap::load_pgm(path)?;
    map.check_against(scene)?;
    Ok(map)
}

/// Per-pixel camera-frame depth, row-major; uncovered pixels hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![f64::INFINITY; width * height],
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Depth at a covered pixel, `None` elsewhere.
    #[inline]
    pub fn depth(&self, x: usize, y: usize) -> Option<f64> {
        self.depth_at(y * self.width + x)
    }

    #[inline]
    pub fn depth_at(&self, index: usize) -> Option<f64> {
        let d = self.data[index];
        d.is_finite().then_some(d)
    }

    #[inline]
    pub fn covered(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x].is_finite()
    }

    pub fn coverage_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite()).count()
    }

    /// Raw buffer including the `+inf` sentinel.
    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Little-endian grayscale PFM, rows stored bottom-up per the format.
    pub fn encode_pfm(&self) -> Vec<u8> {
        let mut out = format!("Pf\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        out.reserve(self.data.len() * 4);
        for row in (0..self.height).rev() {
            for &d in &self.data[row * self.width..(row + 1) * self.width] {
                out.extend_from_slice(&(d as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode_pfm(bytes: &[u8]) -> Result<Self> {
        let (fields, body) = parse_header(bytes, 4)?;
        if fields[0] != "Pf" {
            return Err(Error::MalformedImage(format!(
                "expected Pf, found {:?}",
                fields[0]
            )));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::MalformedImage(format!("bad header number {s:?}")))
        };
        let (w, h) = (num(&fields[1])?, num(&fields[2])?);
        let scale: f64 = fields[3]
            .parse()
            .map_err(|_| Error::MalformedImage("bad PFM scale".into()))?;
        let little = scale < 0.0;
        if body.len() < w * h * 4 {
            return Err(Error::MalformedImage("truncated PFM samples".into()));
        }
        let mut data = vec![0.0; w * h];
        for (i, c) in body[..w * h * 4].chunks_exact(4).enumerate() {
            let raw = [c[0], c[1], c[2], c[3]];
            let v = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            let (row, col) = (h - 1 - i / w, i % w);
            data[row * w + col] = if v.is_finite() {
                v as f64
            } else {
                f64::INFINITY
            };
        }
        Ok(Self::from_raw(w, h, data))
    }

    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.encode_pfm())
            .map_err(|e| Error::io(path, e))
    }
}

/// Splits a netpbm-style header into `count` whitespace-separated fields
/// (skipping `#` comments) and returns the remaining bytes after the single
/// whitespace byte that ends the last field.
fn parse_header(bytes: &[u8], count: usize) -> Result<(Vec<String>, &[u8])> {
    let mut fields = Vec::with_capacity(count);
    let mut i = 0;
    while fields.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::MalformedImage("truncated header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() {
        return Err(Error::MalformedImage("missing sample data".into()));
    }
    Ok((fields, &bytes[i + 1..]))
}
