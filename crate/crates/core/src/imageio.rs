//! Pixel buffers, PNG/JPEG decoding and color-space conversion.
//!
//! RGB input is treated as sRGB with a D65 white point. HSV is stored as
//! H in degrees `[0, 360)` and S, V in `[0, 1]`; the hue of achromatic pixels
//! is 0. All non-RGB8 buffers hold `f64` samples.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{ImageFormat, ImageReader};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Rgb8,
    Hsv,
    Lab,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Rgb8 => "RGB8",
            ColorSpace::Hsv => "HSV",
            ColorSpace::Lab => "LAB",
            ColorSpace::Gray => "GRAY",
        }
    }

    /// Nominal `[lo, hi)` range of each channel, used for uniform quantization.
    pub fn channel_range(self, channel: usize) -> (f64, f64) {
        match (self, channel) {
            (ColorSpace::Rgb8, _) | (ColorSpace::Gray, _) => (0.0, 256.0),
            (ColorSpace::Hsv, 0) => (0.0, 360.0),
            (ColorSpace::Hsv, _) => (0.0, 1.0),
            (ColorSpace::Lab, 0) => (0.0, 100.0),
            (ColorSpace::Lab, _) => (-128.0, 128.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    U8(Vec<u8>),
    F64(Vec<f64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        match self {
            Samples::U8(v) => f64::from(v[idx]),
            Samples::F64(v) => v[idx],
        }
    }
}

/// A row-major, channel-interleaved image buffer tagged with its color space.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    colorspace: ColorSpace,
    samples: Samples,
}

impl RasterImage {
    pub fn from_rgb8(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, 3, data.len())?;
        Ok(Self { width, height, colorspace: ColorSpace::Rgb8, samples: Samples::U8(data) })
    }

    /// Real-valued buffer; `colorspace` must not be `Rgb8`.
    pub fn from_real(
        width: usize,
        height: usize,
        colorspace: ColorSpace,
        data: Vec<f64>,
    ) -> Result<Self> {
        if colorspace == ColorSpace::Rgb8 {
            return Err(Error::InvalidImage("RGB8 images hold 8-bit samples".into()));
        }
        check_dims(width, height, colorspace.channels(), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite sample".into()));
        }
        Ok(Self { width, height, colorspace, samples: Samples::F64(data) })
    }

    /// Builds an RGB8 image by evaluating `f(row, col)` for every pixel.
    pub fn rgb8_from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        Self::from_rgb8(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn as_rgb8(&self) -> Option<&[u8]> {
        match &self.samples {
            Samples::U8(v) => Some(v),
            Samples::F64(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.samples {
            Samples::F64(v) => Some(v),
            Samples::U8(_) => None,
        }
    }

    #[inline]
    pub fn sample(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.samples.get((row * self.width + col) * self.channels() + channel)
    }

    pub(crate) fn require(&self, expected: ColorSpace) -> Result<()> {
        if self.colorspace != expected {
            return Err(Error::WrongColorSpace {
                expected: expected.name(),
                actual: self.colorspace.name(),
            });
        }
        Ok(())
    }

    /// Writes an RGB8 image as PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.require(ColorSpace::Rgb8)?;
        let data = self.as_rgb8().expect("rgb8 samples");
        write_png(path.as_ref(), self.width, self.height, png::ColorType::Rgb, png::BitDepth::Eight, data)
    }
}

fn check_dims(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
    }
    let expected = width * height * channels;
    if len != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("{expected} samples"),
            actual: format!("{len} samples"),
        });
    }
    Ok(())
}

/// A single real-valued channel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlane {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ChannelPlane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, 1, values.len())?;
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self { width, height, values }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Writes the plane as an 8-bit grayscale PNG, linearly rescaled from
    /// `[min, max]` to `[0, 255]`.
    pub fn save_png_rescaled(&self, path: impl AsRef<Path>) -> Result<()> {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        let data: Vec<u8> = self
            .values
            .iter()
            .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
            .collect();
        write_png(path.as_ref(), self.width, self.height, png::ColorType::Grayscale, png::BitDepth::Eight, &data)
    }
}

/// Per-pixel boolean selection, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, 1, bits.len())?;
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self { width, height, bits }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub(crate) fn check_matches(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height} mask"),
                actual: format!("{}x{}", self.width, self.height),
            });
        }
        Ok(())
    }

    /// Writes a 1-bit grayscale PNG (white = selected).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let stride = self.width.div_ceil(8);
        let mut data = vec![0u8; stride * self.height];
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(row, col) {
                    data[row * stride + col / 8] |= 0x80 >> (col % 8);
                }
            }
        }
        write_png(path.as_ref(), self.width, self.height, png::ColorType::Grayscale, png::BitDepth::One, &data)
    }

    /// Reads any PNG/JPEG; pixels with non-zero luma are selected.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let luma = decode(path)?.into_luma8();
        let (w, h) = luma.dimensions();
        Mask::new(w as usize, h as usize, luma.as_raw().iter().map(|&v| v > 0).collect())
    }
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(depth);
    let to_io = |e: png::EncodingError| std::io::Error::other(e.to_string());
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(data).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}

fn decode(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)?.with_guessed_format()?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    reader.decode().map_err(|e| Error::CorruptImage { path: path.to_path_buf(), reason: e.to_string() })
}

/// Decodes a PNG or JPEG file into an RGB8 raster.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let rgb = decode(path.as_ref())?.into_rgb8();
    let (w, h) = rgb.dimensions();
    RasterImage::from_rgb8(w as usize, h as usize, rgb.into_raw())
}

// sRGB (D65) to XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

#[inline]
fn srgb_to_linear(v: u8) -> f64 {
    let c = f64::from(v) / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one sRGB pixel to CIE L\*a\*b\* (D65).
pub fn rgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let mut f = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(xyz / WHITE_D65[i]);
    }
    let l = 116.0 * f[1] - 16.0;
    [l.clamp(0.0, 100.0), 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// Converts one RGB pixel to hexcone HSV (H in degrees, S and V in `[0, 1]`).
pub fn rgb_pixel_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = f64::from(max) / 255.0;
    if max == 0 {
        return [0.0, 0.0, v];
    }
    let delta = f64::from(max - min);
    let s = delta / f64::from(max);
    if max == min {
        return [0.0, s, v];
    }
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let sector = if max == rgb[0] {
        (g - b) / delta
    } else if max == rgb[1] {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    [h, s, v]
}

fn map_rgb(img: &RasterImage, target: ColorSpace, f: fn([u8; 3]) -> [f64; 3]) -> Result<RasterImage> {
    img.require(ColorSpace::Rgb8)?;
    let data = img.as_rgb8().expect("rgb8 samples");
    let out: Vec<f64> = data.chunks_exact(3).flat_map(|p| f([p[0], p[1], p[2]])).collect();
    RasterImage::from_real(img.width, img.height, target, out)
}

pub fn rgb_to_lab(img: &RasterImage) -> Result<RasterImage> {
    map_rgb(img, ColorSpace::Lab, rgb_pixel_to_lab)
}

pub fn rgb_to_hsv(img: &RasterImage) -> Result<RasterImage> {
    map_rgb(img, ColorSpace::Hsv, rgb_pixel_to_hsv)
}

/// One plane per channel, in channel order.
pub fn split_channels(img: &RasterImage) -> Vec<ChannelPlane> {
    let k = img.channels();
    (0..k)
        .map(|c| ChannelPlane {
            width: img.width,
            height: img.height,
            values: (0..img.pixel_count()).map(|i| img.samples.get(i * k + c)).collect(),
        })
        .collect()
}

/// Interleaves planes back into an image. RGB8 planes must hold integral
/// values in `[0, 255]`.
pub fn merge_channels(planes: &[ChannelPlane], colorspace: ColorSpace) -> Result<RasterImage> {
    let k = colorspace.channels();
    if planes.len() != k {
        return Err(Error::LengthMismatch { expected: k, actual: planes.len() });
    }
    let (w, h) = (planes[0].width, planes[0].height);
    if planes.iter().any(|p| p.width != w || p.height != h) {
        return Err(Error::DimensionMismatch {
            expected: format!("{w}x{h} planes"),
            actual: "planes of differing sizes".into(),
        });
    }
    let interleaved = (0..w * h).flat_map(|i| planes.iter().map(move |p| p.values[i]));
    if colorspace == ColorSpace::Rgb8 {
        let data = interleaved
            .map(|v| {
                if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                    Ok(v as u8)
                } else {
                    Err(Error::InvalidImage(format!("sample {v} is not an 8-bit value")))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        RasterImage::from_rgb8(w, h, data)
    } else {
        RasterImage::from_real(w, h, colorspace, interleaved.collect())
    }
}
