//! Planar multi-channel float image buffer shared by the renderer, the
//! resampler and the file readers.

/// Image with 1..K channels stored band-sequentially (all of channel 0, then
/// all of channel 1, ...). Pixel (col, row) of channel c lives at
/// `(c * height + row) * width + col`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuf {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl ImageBuf {
    pub fn zeros(width: u32, height: u32, channels: u32) -> Self {
        ImageBuf {
            width,
            height,
            channels,
            data: vec![0.0; (width * height * channels) as usize],
        }
    }

    #[inline]
    pub fn index(&self, col: u32, row: u32, channel: u32) -> usize {
        ((channel * self.height + row) * self.width + col) as usize
    }

    #[inline]
    pub fn get(&self, col: u32, row: u32, channel: u32) -> f32 {
        self.data[self.index(col, row, channel)]
    }

    #[inline]
    pub fn set(&mut self, col: u32, row: u32, channel: u32, value: f32) {
        let i = self.index(col, row, channel);
        self.data[i] = value;
    }

    /// Bilinear sample of one channel at a continuous pixel coordinate, with
    /// pixel centers at (i + 0.5, j + 0.5). Coordinates are clamped to the
    /// image border.
    pub fn sample_bilinear(&self, u: f64, v: f64, channel: u32) -> f32 {
        let x = u - 0.5;
        let y = v - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let clamp_col = |c: f64| (c.max(0.0) as u32).min(self.width - 1);
        let clamp_row = |r: f64| (r.max(0.0) as u32).min(self.height - 1);
        let c0 = clamp_col(x0);
        let c1 = clamp_col(x0 + 1.0);
        let r0 = clamp_row(y0);
        let r1 = clamp_row(y0 + 1.0);
        let v00 = self.get(c0, r0, channel) as f64;
        let v10 = self.get(c1, r0, channel) as f64;
        let v01 = self.get(c0, r1, channel) as f64;
        let v11 = self.get(c1, r1, channel) as f64;
        let top = v00 * (1.0 - fx) + v10 * fx;
        let bot = v01 * (1.0 - fx) + v11 * fx;
        (top * (1.0 - fy) + bot * fy) as f32
    }

    /// Nearest-neighbor sample of one channel; for label-valued images.
    pub fn sample_nearest(&self, u: f64, v: f64, channel: u32) -> f32 {
        let col = ((u - 0.5).round().max(0.0) as u32).min(self.width - 1);
        let row = ((v - 0.5).round().max(0.0) as u32).min(self.height - 1);
        self.get(col, row, channel)
    }
}
