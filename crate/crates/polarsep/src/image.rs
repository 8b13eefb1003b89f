//! Planar floating-point raster, the pixel container used everywhere in the crate.

use crate::error::{Error, Result};

/// H×W×C raster of linear radiance values.
///
/// Data is stored planar: one row-major plane per channel, so
/// `data[c * h * w + y * w + x]` addresses pixel `(x, y)` of channel `c`.
/// Values are nominally in `[0, 1]` but are not clipped; they must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// All-zero image. Channels must be 1 or 3.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::constant(height, width, channels, 0.0)
    }

    /// Constant-valued image.
    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        check_dims(height, width, channels)?;
        if !value.is_finite() {
            return Err(Error::InvalidArgument("image values must be finite".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        })
    }

    /// Wraps an existing planar buffer, validating length and finiteness.
    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, channels)?;
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "image data length {} != {}x{}x{} = {}",
                data.len(),
                height,
                width,
                channels,
                expected
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "image data contains NaN or infinite values".into(),
            ));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Pixels per channel plane.
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// One channel plane, row-major.
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.pixel_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[c * self.pixel_count() + y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        let idx = c * self.pixel_count() + y * self.width + x;
        self.data[idx] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Mean of channels; identity for single-channel images.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.pixel_count();
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            let plane = self.channel(c);
            for (o, v) in out.iter_mut().zip(plane) {
                *o += v;
            }
        }
        let scale = 1.0 / self.channels as f64;
        for o in &mut out {
            *o *= scale;
        }
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data: out,
        }
    }

    /// Element-wise map onto a new image with the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(
            "image dimensions must be positive".into(),
        ));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidArgument(format!(
            "channel count must be 1 or 3, got {channels}"
        )));
    }
    Ok(())
}
