//! Row-major 2D containers shared by every stage: the grayscale input image,
//! real-valued curvature maps and boolean masks.

use crate::error::{Error, Result};

/// Generic row-major plane. `data[y * width + x]` holds the sample at column `x`, row `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type RealMap = Plane<f64>;
pub type BoolMap = Plane<bool>;

impl<T: Copy> Plane<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "plane of {width}x{height} needs {} samples, got {}",
                width.saturating_mul(height),
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
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

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Plane::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }
}

impl BoolMap {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Grayscale image with real intensities, conventionally in `[0, 255]`.
///
/// Both dimensions are at least 3 so the 3-tap curvature kernels have full
/// support, and every sample is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage(RealMap);

impl GrayImage {
    pub const MIN_SIDE: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < Self::MIN_SIDE || height < Self::MIN_SIDE {
            return Err(Error::invalid(format!(
                "image is {width}x{height}; both sides must be at least {}",
                Self::MIN_SIDE
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite intensity at index {i}")));
        }
        Plane::from_vec(width, height, data).map(GrayImage)
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let plane = Plane::from_fn(width, height, f);
        Self::new(width, height, plane.into_vec())
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_luma8(img: &image::GrayImage) -> Result<Self> {
        let data = img.as_raw().iter().map(|&v| f64::from(v)).collect();
        Self::new(img.width() as usize, img.height() as usize, data)
    }

    /// Rounds to the nearest 8-bit level and clamps to `[0, 255]`.
    pub fn to_luma8(&self) -> image::GrayImage {
        let raw = self.0.as_slice().iter().map(|&v| quantize(v)).collect();
        image::GrayImage::from_raw(self.width() as u32, self.height() as u32, raw)
            .expect("buffer length matches dimensions")
    }

    /// The image an 8-bit file round trip would produce.
    pub fn quantized(&self) -> Self {
        GrayImage(self.0.map(|v| f64::from(quantize(v))))
    }

    pub fn plane(&self) -> &RealMap {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn pixel_count(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn transpose(&self) -> Self {
        GrayImage(self.0.transpose())
    }

    /// Adds `k` to every pixel.
    pub fn offset(&self, k: f64) -> Result<Self> {
        Self::new(
            self.width(),
            self.height(),
            self.as_slice().iter().map(|v| v + k).collect(),
        )
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
