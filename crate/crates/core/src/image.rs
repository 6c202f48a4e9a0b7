use serde::{Deserialize, Serialize};

/// Planar (CHW) single-precision image buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

impl Image {
    /// Returns `None` if `data` does not hold exactly `c*h*w` values.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Option<Self> {
        (data.len() == channels * height * width).then_some(Self { channels, height, width, data })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self { channels, height, width, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn dims(&self) -> Dims {
        Dims { channels: self.channels, height: self.height, width: self.width }
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        &self.data[c * self.height * self.width..(c + 1) * self.height * self.width]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self { channels: self.channels, height: self.height, width: self.width, data }
    }

    pub fn zip_map(&self, other: &Image, f: impl Fn(f32, f32) -> f32) -> Self {
        assert_eq!(self.dims(), other.dims(), "zip_map on mismatched images");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { channels: self.channels, height: self.height, width: self.width, data }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Stacks images with equal spatial size along the channel axis.
    pub fn concat_channels(parts: &[&Image]) -> Option<Image> {
        let first = parts.first()?;
        if parts.iter().any(|p| p.height != first.height || p.width != first.width) {
            return None;
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * first.height * first.width);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Some(Image { channels, height: first.height, width: first.width, data })
    }

    /// Channels `[start, start + count)`.
    pub fn channel_range(&self, start: usize, count: usize) -> Image {
        let hw = self.height * self.width;
        Image {
            channels: count,
            height: self.height,
            width: self.width,
            data: self.data[start * hw..(start + count) * hw].to_vec(),
        }
    }

    /// Area-averaging resample: each output pixel is the overlap-weighted
    /// mean of the input pixels its footprint covers.
    pub fn resize_area(&self, height: usize, width: usize) -> Image {
        let wy = area_weights(self.height, height);
        let wx = area_weights(self.width, width);
        let mut tmp = vec![0f64; self.channels * self.height * width];
        for c in 0..self.channels {
            for y in 0..self.height {
                let row = &self.data[(c * self.height + y) * self.width..][..self.width];
                for (ox, taps) in wx.iter().enumerate() {
                    tmp[(c * self.height + y) * width + ox] =
                        taps.iter().map(|&(i, w)| w * row[i] as f64).sum();
                }
            }
        }
        let mut data = vec![0f32; self.channels * height * width];
        for c in 0..self.channels {
            for (oy, taps) in wy.iter().enumerate() {
                for ox in 0..width {
                    let v: f64 = taps.iter().map(|&(i, w)| w * tmp[(c * self.height + i) * width + ox]).sum();
                    data[(c * height + oy) * width + ox] = v as f32;
                }
            }
        }
        Image { channels: self.channels, height, width, data }
    }
}

/// For each output cell, the input indices it overlaps and normalized weights.
fn area_weights(input: usize, output: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = lo + scale;
            let mut taps = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < input {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((i, overlap / scale));
                }
                i += 1;
            }
            taps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_resize_preserves_constant_and_mean() {
        let img = Image::from_fn(2, 6, 10, |c, y, x| (c + y * 3 + x) as f32);
        for (h, w) in [(3, 5), (4, 7), (12, 20), (224, 224)] {
            let r = img.resize_area(h, w);
            assert!((r.mean() - img.mean()).abs() < 1e-4, "{h}x{w}");
        }
        let flat = Image::filled(1, 5, 5, 0.3);
        assert!(flat.resize_area(224, 224).data().iter().all(|&v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn halving_averages_blocks() {
        let img = Image::new(1, 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(img.resize_area(1, 1).data(), &[1.5]);
    }
}
