//! Raster containers, PNG/JPEG decoding, bilinear resizing, luma conversion and
//! sRGB to CIELAB colorimetry.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, ImageReader};

use crate::error::{arg_err, Error, Result};

/// 8-bit sRGB raster, row-major `R,G,B` triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return arg_err(format!(
                "rgb buffer has {} bytes, expected {}x{}x3",
                data.len(),
                width,
                height
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        buf.save_with_format(path, ImageFormat::Png)
            .map_err(|e| Error::Decode {
                path: path.to_path_buf(),
                format: "png".into(),
                reason: e.to_string(),
            })
    }
}

/// Real-valued single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return arg_err(format!(
                "gray buffer has {} values, expected {}x{}",
                data.len(),
                width,
                height
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// CIELAB planes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageLab {
    pub width: usize,
    pub height: usize,
    pub l_star: Vec<f64>,
    pub a_star: Vec<f64>,
    pub b_star: Vec<f64>,
}

pub fn decode_image(path: &Path) -> Result<ImageRgb> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bytes(&bytes, path)
}

pub(crate) fn decode_bytes(bytes: &[u8], path: &Path) -> Result<ImageRgb> {
    let format = image::guess_format(bytes)
        .ok()
        .or_else(|| ImageFormat::from_path(path).ok());
    let format_name = match format {
        Some(ImageFormat::Png) => "png",
        Some(ImageFormat::Jpeg) => "jpeg",
        Some(_) => "unsupported",
        None => "unknown",
    };
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        format: format_name.to_string(),
        reason,
    };
    let format = match format {
        Some(f @ (ImageFormat::Png | ImageFormat::Jpeg)) => f,
        _ => return Err(decode_err("not a PNG or JPEG byte stream".into())),
    };
    let mut reader = ImageReader::new(Cursor::new(bytes));
    reader.set_format(format);
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageRgb::new(w as usize, h as usize, rgb.into_raw())
}

/// Bilinear sample of channel `c` at continuous pixel-center coordinates,
/// clamping to the edge pixels.
pub(crate) fn sample_bilinear(img: &ImageRgb, sx: f64, sy: f64, c: usize) -> f64 {
    let maxx = (img.width - 1) as f64;
    let maxy = (img.height - 1) as f64;
    let sx = sx.clamp(0.0, maxx);
    let sy = sy.clamp(0.0, maxy);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let p = |x: usize, y: usize| f64::from(img.data[(y * img.width + x) * 3 + c]);
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Resizes with bilinear interpolation. Output pixel centers map to source
/// coordinates `(x + 0.5) * in / out - 0.5`; samples beyond the border clamp to
/// the edge pixels.
pub fn resize_bilinear(img: &ImageRgb, w: usize, h: usize) -> Result<ImageRgb> {
    if w == 0 || h == 0 {
        return arg_err(format!("resize target must be positive, got {w}x{h}"));
    }
    if img.width == 0 || img.height == 0 {
        return arg_err("cannot resize an empty image");
    }
    if w == img.width && h == img.height {
        return Ok(img.clone());
    }
    let sx = img.width as f64 / w as f64;
    let sy = img.height as f64 / h as f64;
    Ok(ImageRgb::from_fn(w, h, |x, y| {
        let fx = (x as f64 + 0.5) * sx - 0.5;
        let fy = (y as f64 + 0.5) * sy - 0.5;
        [0, 1, 2].map(|c| to_u8(sample_bilinear(img, fx, fy, c)))
    }))
}

/// BT.601 luma, unrounded, in [0, 255].
pub fn to_gray(img: &ImageRgb) -> ImageGray {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect();
    ImageGray {
        width: img.width,
        height: img.height,
        data,
    }
}

// sRGB (D65) linear RGB -> XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// Reference white: XYZ of linear (1,1,1) under the matrix above.
fn white() -> [f64; 3] {
    RGB_TO_XYZ.map(|row| row.iter().sum())
}

fn srgb_to_linear(c: u8) -> f64 {
    let v = f64::from(c) / 255.0;
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one sRGB pixel to `(L*, a*, b*)`.
pub fn srgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let wp = white();
    let xyz: Vec<f64> = RGB_TO_XYZ
        .iter()
        .zip(wp)
        .map(|(row, n)| (row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]) / n)
        .collect();
    let (fx, fy, fz) = (lab_f(xyz[0]), lab_f(xyz[1]), lab_f(xyz[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn rgb_to_lab(img: &ImageRgb) -> ImageLab {
    let n = img.width * img.height;
    let mut lab = ImageLab {
        width: img.width,
        height: img.height,
        l_star: Vec::with_capacity(n),
        a_star: Vec::with_capacity(n),
        b_star: Vec::with_capacity(n),
    };
    for p in img.data.chunks_exact(3) {
        let [l, a, b] = srgb_pixel_to_lab([p[0], p[1], p[2]]);
        lab.l_star.push(l);
        lab.a_star.push(a);
        lab.b_star.push(b);
    }
    lab
}
