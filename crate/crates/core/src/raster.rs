//! Dense row-major multi-channel rasters shared by every pass and map.

use serde::{Deserialize, Serialize};

/// Row-major `height × width × channels` buffer, origin at the top-left pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

pub type ScalarMap = Raster<f32>;
pub type RgbImage = Raster<u8>;
pub type IndexMap = Raster<u16>;
pub type Mask = Raster<bool>;

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        assert!(channels >= 1, "raster needs at least one channel");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }
}

impl<T> Raster<T> {
    /// Wraps an existing buffer; `None` if its length does not match the dimensions.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Option<Self> {
        let expected = width.checked_mul(height)?.checked_mul(channels)?;
        (channels >= 1 && data.len() == expected).then_some(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn same_size<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let o = self.offset(x, y);
        let c = self.channels;
        &mut self.data[o..o + c]
    }

    /// Iterates rows as slices of `width * channels` elements.
    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.width * self.channels)
    }

    pub fn rows_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.data.chunks_mut(self.width * self.channels)
    }
}

impl<T: Copy> Raster<T> {
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[self.offset(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: T) {
        let o = self.offset(x, y) + c;
        self.data[o] = value;
    }

    pub fn map<U, F: FnMut(T) -> U>(&self, f: F) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().copied().map(f).collect(),
        }
    }
}

/// The four bilinear taps around a continuous position, with pixel centers at
/// half-integer coordinates. Positions are clamped to the outermost centers.
pub fn bilinear_taps(width: usize, height: usize, x: f64, y: f64) -> [(usize, usize, f64); 4] {
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    let gx = (x - 0.5).clamp(0.0, max_x);
    let gy = (y - 0.5).clamp(0.0, max_y);
    let x0 = gx.floor() as usize;
    let y0 = gy.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = gx - x0 as f64;
    let fy = gy - y0 as f64;
    [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ]
}

impl Raster<f32> {
    /// Bilinear sample of channel `c`; NaN if any tap with non-zero weight is NaN.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        bilinear_taps(self.width, self.height, x, y)
            .iter()
            .filter(|(_, _, w)| *w > 0.0)
            .map(|&(tx, ty, w)| w * self.get(tx, ty, c) as f64)
            .sum()
    }

    /// True when the position lies inside the image rectangle `[0, W) × [0, H)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }
}
