//! Frame descriptors: area-downsampling to a fixed grid followed by
//! per-patch normalization, and the L1 distance used to fill difference
//! matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grayscale intensity raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl RawFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.is_empty() {
            return Err(Error::Empty("frame"));
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::Input("frame contains non-finite pixels".into()));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds a frame from interleaved 8-bit RGB using BT.601 luma weights.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::LengthMismatch {
                expected: width * height * 3,
                actual: rgb.len(),
            });
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|c| luma(c[0], c[1], c[2]))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn from_gray8(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        Self::new(width, height, gray.iter().map(|&g| f64::from(g)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)
}

/// Fixed-length feature vector with every element finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Descriptor(Vec<f64>);

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("descriptor"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("descriptor element {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub patch: usize,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            grid_width: 32,
            grid_height: 24,
            patch: 8,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_width == 0 || self.grid_height == 0 || self.patch == 0 {
            return Err(Error::Config("descriptor grid and patch must be positive".into()));
        }
        if !self.grid_width.is_multiple_of(self.patch) || !self.grid_height.is_multiple_of(self.patch) {
            return Err(Error::Config(format!(
                "patch {} does not divide grid {}x{}",
                self.patch, self.grid_width, self.grid_height
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid_width * self.grid_height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Downsamples `frame` to the configured grid by area averaging, then
/// rescales every `patch`×`patch` block to span [0, 1]. Constant blocks map
/// to 0.5.
pub fn preprocess(frame: &RawFrame, cfg: &DescriptorConfig) -> Result<Descriptor> {
    cfg.validate()?;
    if frame.width < cfg.grid_width || frame.height < cfg.grid_height {
        return Err(Error::Input(format!(
            "frame {}x{} is smaller than descriptor grid {}x{}",
            frame.width, frame.height, cfg.grid_width, cfg.grid_height
        )));
    }
    let mut grid = area_resample(frame, cfg.grid_width, cfg.grid_height);
    normalize_patches(&mut grid, cfg.grid_width, cfg.grid_height, cfg.patch);
    Ok(Descriptor(grid))
}

/// Sum of absolute element differences.
///
/// Panics if the descriptors differ in length.
pub fn distance(a: &Descriptor, b: &Descriptor) -> f64 {
    assert_eq!(a.len(), b.len(), "descriptor length mismatch");
    l1(&a.0, &b.0)
}

#[inline]
pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Per-output-cell source weights for one axis of an area resample.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * ratio;
            let hi = (o + 1) as f64 * ratio;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|i| {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (overlap > 0.0).then(|| (i, overlap / ratio))
                })
                .collect()
        })
        .collect()
}

fn area_resample(frame: &RawFrame, out_w: usize, out_h: usize) -> Vec<f64> {
    let wx = axis_weights(frame.width, out_w);
    let wy = axis_weights(frame.height, out_h);

    let mut rows = vec![0.0; frame.height * out_w];
    for y in 0..frame.height {
        let src = &frame.pixels[y * frame.width..(y + 1) * frame.width];
        for (ox, taps) in wx.iter().enumerate() {
            rows[y * out_w + ox] = taps.iter().map(|&(i, w)| src[i] * w).sum();
        }
    }

    let mut out = vec![0.0; out_w * out_h];
    for (oy, taps) in wy.iter().enumerate() {
        for ox in 0..out_w {
            out[oy * out_w + ox] = taps.iter().map(|&(y, w)| rows[y * out_w + ox] * w).sum();
        }
    }
    out
}

fn normalize_patches(grid: &mut [f64], width: usize, height: usize, patch: usize) {
    for py in (0..height).step_by(patch) {
        for px in (0..width).step_by(patch) {
            let cells = || {
                (py..py + patch).flat_map(move |y| (px..px + patch).map(move |x| y * width + x))
            };
            let (lo, hi) = cells().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                (lo.min(grid[i]), hi.max(grid[i]))
            });
            let range = hi - lo;
            // relative guard: area averaging leaves rounding noise on flat patches
            let flat = range <= 1e-12 * hi.abs().max(lo.abs()).max(1.0);
            for i in cells() {
                grid[i] = if flat { 0.5 } else { (grid[i] - lo) / range };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_cfg() -> DescriptorConfig {
        DescriptorConfig {
            grid_width: 4,
            grid_height: 4,
            patch: 2,
        }
    }

    #[test]
    fn uniform_frame_is_midpoint() {
        let frame = RawFrame::new(64, 48, vec![128.0; 64 * 48]).unwrap();
        let d = preprocess(&frame, &DescriptorConfig::default()).unwrap();
        assert_eq!(d.len(), 768);
        assert!(d.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn gain_is_removed() {
        let pixels: Vec<f64> = (0..64 * 48).map(|i| ((i * 37) % 101) as f64).collect();
        let frame = RawFrame::new(64, 48, pixels).unwrap();
        let doubled = frame.map(|p| p * 2.0);
        let cfg = DescriptorConfig::default();
        let a = preprocess(&frame, &cfg).unwrap();
        let b = preprocess(&doubled, &cfg).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn checkerboard_patch_hits_extremes() {
        // 2x2 patch [10 30; 30 10]: min 10, range 20 -> [0 1; 1 0]
        let cfg = DescriptorConfig {
            grid_width: 2,
            grid_height: 2,
            patch: 2,
        };
        let frame = RawFrame::new(2, 2, vec![10.0, 30.0, 30.0, 10.0]).unwrap();
        let d = preprocess(&frame, &cfg).unwrap();
        assert_eq!(d.values(), &[0.0, 1.0, 1.0, 0.0]);

        let cfg = DescriptorConfig::default();
        let pixels = (0..24)
            .flat_map(|y| (0..32).map(move |x| if (x + y) % 2 == 0 { 0.0 } else { 255.0 }))
            .collect();
        let d = preprocess(&RawFrame::new(32, 24, pixels).unwrap(), &cfg).unwrap();
        for y in 0..24 {
            for x in 0..32 {
                let expect = if (x + y) % 2 == 0 { 0.0 } else { 1.0 };
                assert_eq!(d.values()[y * 32 + x], expect);
            }
        }
    }

    #[test]
    fn area_average_of_integer_block() {
        let frame = RawFrame::new(4, 2, vec![0.0, 2.0, 4.0, 6.0, 2.0, 4.0, 6.0, 8.0]).unwrap();
        // 2x1 output: left block mean 2, right block mean 6
        assert_eq!(area_resample(&frame, 2, 1), vec![2.0, 6.0]);
        // non-integer ratio: 3 -> 2 keeps total mass
        let frame = RawFrame::new(3, 1, vec![3.0, 6.0, 9.0]).unwrap();
        let out = area_resample(&frame, 2, 1);
        assert!((out[0] - 4.0).abs() < 1e-12);
        assert!((out[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn configuration_errors() {
        let frame = RawFrame::new(8, 8, vec![1.0; 64]).unwrap();
        let bad = DescriptorConfig {
            grid_width: 6,
            grid_height: 4,
            patch: 4,
        };
        assert!(matches!(preprocess(&frame, &bad), Err(Error::Config(_))));
        let too_big = DescriptorConfig::default();
        assert!(matches!(preprocess(&frame, &too_big), Err(Error::Input(_))));
        assert!(matches!(RawFrame::new(0, 0, vec![]), Err(Error::Empty(_))));
    }

    #[test]
    fn rgb_uses_luma() {
        let f = RawFrame::from_rgb8(1, 1, &[255, 0, 0]).unwrap();
        assert!((f.pixels()[0] - 0.299 * 255.0).abs() < 1e-12);
    }

    #[test]
    fn distance_basics() {
        let zeros = Descriptor::new(vec![0.0; 768]).unwrap();
        let ones = Descriptor::new(vec![1.0; 768]).unwrap();
        assert_eq!(distance(&zeros, &zeros), 0.0);
        assert_eq!(distance(&zeros, &ones), 768.0);
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn distance_rejects_mismatch() {
        let a = Descriptor::new(vec![0.0; 3]).unwrap();
        let b = Descriptor::new(vec![0.0; 4]).unwrap();
        distance(&a, &b);
    }

    fn descriptor(len: usize) -> impl Strategy<Value = Descriptor> {
        proptest::collection::vec(0.0f64..1.0, len).prop_map(|v| Descriptor::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn distance_matches_loop_oracle(a in descriptor(48), b in descriptor(48)) {
            let mut expect = 0.0;
            for i in 0..48 {
                let d = a.values()[i] - b.values()[i];
                expect += if d < 0.0 { -d } else { d };
            }
            prop_assert!((distance(&a, &b) - expect).abs() < 1e-12);
            prop_assert_eq!(distance(&a, &b), distance(&b, &a));
        }

        #[test]
        fn distance_triangle_inequality(a in descriptor(32), b in descriptor(32), c in descriptor(32)) {
            prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-12);
        }

        #[test]
        fn preprocess_is_idempotent_at_grid_size(pixels in proptest::collection::vec(0.0f64..255.0, 16)) {
            let cfg = small_cfg();
            let once = preprocess(&RawFrame::new(4, 4, pixels).unwrap(), &cfg).unwrap();
            let again = preprocess(&RawFrame::new(4, 4, once.values().to_vec()).unwrap(), &cfg).unwrap();
            for (x, y) in once.values().iter().zip(again.values()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn affine_intensity_invariance(
            pixels in proptest::collection::vec(10.0f64..100.0, 64),
            gain in 0.5f64..2.0,
            offset in 0.0f64..50.0,
        ) {
            let cfg = small_cfg();
            let frame = RawFrame::new(8, 8, pixels).unwrap();
            let a = preprocess(&frame, &cfg).unwrap();
            let b = preprocess(&frame.map(|p| gain * p + offset), &cfg).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
            prop_assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
