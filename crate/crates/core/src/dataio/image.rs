//! Grayscale images and the Netpbm formats used on disk (PGM in, PGM/PPM out).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{EsrError, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(EsrError::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if width * height != pixels.len() {
            return Err(EsrError::InvalidParameter(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    /// Panics on zero dimensions.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Image {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Nearest pixel to `(x, y)`, clamped to the image border.
    #[inline]
    pub fn get_nearest_clamped(&self, x: f64, y: f64) -> u8 {
        let xi = x.round().clamp(0.0, (self.width - 1) as f64) as usize;
        let yi = y.round().clamp(0.0, (self.height - 1) as f64) as usize;
        self.get(xi, yi)
    }
}

/// 8-bit RGB image, used only for visualization output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn from_gray(img: &Image) -> Self {
        RgbImage {
            width: img.width,
            height: img.height,
            pixels: img.pixels.iter().map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn put(&mut self, x: usize, y: usize, color: [u8; 3]) {
        self.pixels[y * self.width + x] = color;
    }

    /// Fills every pixel within `radius` of `(cx, cy)`; parts outside the image are dropped.
    pub fn fill_disk(&mut self, cx: f64, cy: f64, radius: f64, color: [u8; 3]) {
        let (cx, cy) = (cx.round(), cy.round());
        let r = radius.max(0.0).floor() as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                if (dx * dx + dy * dy) as f64 > radius * radius {
                    continue;
                }
                let (x, y) = (cx as i64 + dx, cy as i64 + dy);
                if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
                    self.put(x as usize, y as usize, color);
                }
            }
        }
    }
}

/// Reads a PGM image, binary (P5) or ASCII (P2), with `maxval <= 255`.
/// Intensities are kept as stored, without rescaling to 255.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| EsrError::io(path, e))?;
    decode_pgm(&bytes).map_err(|msg| EsrError::format(path, msg))
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token().ok_or("missing magic number")?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(format!(
                "unsupported magic {:?}, expected P2 or P5",
                String::from_utf8_lossy(other)
            ))
        }
    };
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    if width == 0 || height == 0 {
        return Err(format!("invalid dimensions {width}x{height}"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| format!("dimensions {width}x{height} overflow"))?;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = cursor.pos + 1;
        let raster = bytes
            .get(start..start + count)
            .ok_or_else(|| format!("truncated raster: need {count} bytes"))?;
        pixels.extend_from_slice(raster);
    } else {
        for k in 0..count {
            let v = cursor
                .number("pixel")
                .map_err(|_| format!("truncated or malformed raster at pixel {k}"))?;
            pixels.push(u8::try_from(v).map_err(|_| format!("pixel value {v} exceeds 255"))?);
        }
    }
    if pixels.iter().any(|&v| usize::from(v) > maxval) {
        return Err(format!("pixel value exceeds maxval {maxval}"));
    }
    Image::new(width, height, pixels).map_err(|e| e.to_string())
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self.token().ok_or_else(|| format!("missing {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("malformed {what}: {:?}", String::from_utf8_lossy(tok)))
    }
}

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// ASCII PGM, mostly useful for tests and hand inspection.
pub fn encode_pgm_ascii(img: &Image) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn save_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| EsrError::io(path, e))
}

/// Writes a binary PPM (P6).
pub fn save_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in &img.pixels {
        out.write_all(px).expect("writing to a Vec cannot fail");
    }
    fs::write(path, out).map_err(|e| EsrError::io(path, e))
}
