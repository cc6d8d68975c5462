use crate::imaging::{Image, Plane};
use crate::{Error, Result};

/// A `channels x height x width` activation, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "feature map {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn at(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    pub fn channel_slice(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Image intensities shifted to be centred on zero.
    pub fn from_image(image: &Image) -> Self {
        let (h, w, ch) = (image.height(), image.width(), image.channels());
        let mut data = vec![0.0; ch * h * w];
        for c in 0..ch {
            for i in 0..h {
                for j in 0..w {
                    data[(c * h + i) * w + j] = image.get(i, j, c) - 0.5;
                }
            }
        }
        Self {
            channels: ch,
            height: h,
            width: w,
            data,
        }
    }

    pub fn to_plane(&self, c: usize) -> Plane {
        Plane::new(self.height, self.width, self.channel_slice(c).to_vec()).expect("channel size")
    }

    /// Channel-wise concatenation.
    pub fn concat(&self, other: &FeatureMap) -> Result<FeatureMap> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::Dimension(format!(
                "cannot concatenate {:?} with {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FeatureMap {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Splits after `first` channels.
    pub fn split(&self, first: usize) -> (FeatureMap, FeatureMap) {
        let n = self.height * self.width;
        let (a, b) = self.data.split_at(first * n);
        (
            FeatureMap {
                channels: first,
                height: self.height,
                width: self.width,
                data: a.to_vec(),
            },
            FeatureMap {
                channels: self.channels - first,
                height: self.height,
                width: self.width,
                data: b.to_vec(),
            },
        )
    }

    pub fn dot(&self, other: &FeatureMap) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add_assign(&mut self, other: &FeatureMap) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
