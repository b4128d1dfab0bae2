//! Reference-coin detection and pixel/millimeter calibration.
//!
//! The coin is located by thresholding in HSV space, extracting 8-connected
//! components of the resulting mask and keeping the component that passes the
//! area and fill-ratio screens. Its axis-aligned bounding box gives one
//! millimeter-per-pixel ratio per image axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Diameter of the one-rupee reference coin in millimeters.
pub const COIN_DIAMETER_MM: f64 = 21.93;

/// Two passing candidates whose areas are within this fraction of each other
/// make the detection ambiguous.
const AMBIGUITY_MARGIN: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("no reference coin found in the image")]
    NoReferenceFound,
    #[error("ambiguous reference: candidates of {first} px and {second} px are too similar, re-shoot the plate")]
    AmbiguousReference { first: usize, second: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid reference spec: {0}")]
    InvalidSpec(String),
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ReferenceError> {
        if width == 0 || height == 0 {
            return Err(ReferenceError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(ReferenceError::InvalidImage(format!(
                "pixel buffer holds {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, ReferenceError> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone RGB to HSV conversion. Achromatic pixels get hue 0.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> Hsv {
    let r = f64::from(rgb[0]) / 255.0;
    let g = f64::from(rgb[1]) / 255.0;
    let b = f64::from(rgb[2]) / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    Hsv {
        h: if h >= 360.0 { h - 360.0 } else { h },
        s,
        v: max,
    }
}

/// Inclusive HSV box. A hue range with `h_min > h_max` wraps through 0°;
/// `h_min = 0, h_max = 360` accepts every hue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub h_min: f64,
    pub h_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for HsvRange {
    /// Low-saturation metallic band, any hue.
    fn default() -> Self {
        Self {
            h_min: 0.0,
            h_max: 360.0,
            s_min: 0.0,
            s_max: 0.25,
            v_min: 0.35,
            v_max: 0.95,
        }
    }
}

impl HsvRange {
    pub fn validate(&self) -> Result<(), ReferenceError> {
        let bad = |msg: &str| Err(ReferenceError::InvalidSpec(msg.to_string()));
        if !(0.0..360.0).contains(&self.h_min) || !(0.0..=360.0).contains(&self.h_max) {
            return bad("hue bounds must lie in [0, 360]");
        }
        for (lo, hi, name) in [
            (self.s_min, self.s_max, "saturation"),
            (self.v_min, self.v_max, "value"),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return bad(&format!("{name} bounds must satisfy 0 <= min <= max <= 1"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, hsv: Hsv) -> bool {
        let hue_ok = if self.h_min <= self.h_max {
            hsv.h >= self.h_min && hsv.h <= self.h_max
        } else {
            hsv.h >= self.h_min || hsv.h <= self.h_max
        };
        hue_ok
            && hsv.s >= self.s_min
            && hsv.s <= self.s_max
            && hsv.v >= self.v_min
            && hsv.v <= self.v_max
    }
}

/// Coin description and candidate screens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceSpec {
    pub real_diameter_mm: f64,
    pub color: HsvRange,
    pub min_area_px: f64,
    pub max_area_px: f64,
    pub min_fill_ratio: f64,
    /// Half-width of the square window used to open the colour mask before
    /// labelling; 0 disables it.
    pub opening_radius: u32,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            real_diameter_mm: COIN_DIAMETER_MM,
            color: HsvRange::default(),
            min_area_px: std::f64::consts::PI * 10.0 * 10.0,
            max_area_px: std::f64::consts::PI * 150.0 * 150.0,
            min_fill_ratio: 0.70,
            opening_radius: 1,
        }
    }
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<(), ReferenceError> {
        if !(self.real_diameter_mm > 0.0) {
            return Err(ReferenceError::InvalidSpec(
                "real_diameter_mm must be positive".into(),
            ));
        }
        if !(self.min_fill_ratio > 0.0 && self.min_fill_ratio <= 1.0) {
            return Err(ReferenceError::InvalidSpec(
                "min_fill_ratio must lie in (0, 1]".into(),
            ));
        }
        if !(self.min_area_px >= 0.0 && self.min_area_px <= self.max_area_px) {
            return Err(ReferenceError::InvalidSpec(
                "area gates must satisfy 0 <= min_area_px <= max_area_px".into(),
            ));
        }
        self.color.validate()
    }
}

/// Axis-aligned pixel rectangle; `x`, `y` is the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }
}

/// Calibration derived from the selected coin component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeasurement {
    pub bbox_x: u32,
    pub bbox_y: u32,
    pub bbox_w: u32,
    pub bbox_h: u32,
    pub area_px: u64,
    pub ratio_x_mm_per_px: f64,
    pub ratio_y_mm_per_px: f64,
}

impl ReferenceMeasurement {
    /// Builds the per-axis ratios for a coin spanning `bbox_w` x `bbox_h`
    /// pixels. Box sizes may be fractional when calibrations are supplied by
    /// hand rather than measured.
    pub fn from_pixel_diameter(diameter_mm: f64, bbox_w: f64, bbox_h: f64) -> Calibration {
        Calibration {
            ratio_x_mm_per_px: diameter_mm / bbox_w,
            ratio_y_mm_per_px: diameter_mm / bbox_h,
        }
    }

    pub fn calibration(&self) -> Calibration {
        Calibration {
            ratio_x_mm_per_px: self.ratio_x_mm_per_px,
            ratio_y_mm_per_px: self.ratio_y_mm_per_px,
        }
    }
}

/// The pair of millimeter-per-pixel ratios used for quantification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ratio_x_mm_per_px: f64,
    pub ratio_y_mm_per_px: f64,
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut mask = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                mask.set(x, y, f(x, y));
            }
        }
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Erosion followed by dilation with a `(2r+1)`-square window. Removes
    /// specks and one-pixel spurs thinner than the window; shapes that
    /// contain the window everywhere along their border are unchanged.
    pub fn opened(&self, radius: u32) -> Self {
        if radius == 0 {
            return self.clone();
        }
        self.sweep(radius, true).sweep(radius, false)
    }

    /// Separable min (`erode`) or max filter; pixels outside the image count
    /// as unset.
    fn sweep(&self, radius: u32, erode: bool) -> Self {
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        let pass = |src: &[bool], len: usize, stride: usize, lines: usize, line_stride: usize| {
            let mut out = vec![false; src.len()];
            for line in 0..lines {
                let base = line * line_stride;
                let at = |i: usize| src[base + i * stride];
                // Prefix counts of set pixels along the line.
                let mut prefix = vec![0usize; len + 1];
                for i in 0..len {
                    prefix[i + 1] = prefix[i] + usize::from(at(i));
                }
                for i in 0..len {
                    let lo = i.saturating_sub(r);
                    let hi = (i + r + 1).min(len);
                    let set = prefix[hi] - prefix[lo];
                    out[base + i * stride] = if erode {
                        i >= r && i + r < len && set == 2 * r + 1
                    } else {
                        set > 0
                    };
                }
            }
            out
        };
        let rows = pass(&self.bits, w, 1, h, w);
        let bits = pass(&rows, h, w, w, 1);
        Self {
            width: self.width,
            height: self.height,
            bits,
        }
    }
}

/// One 8-connected region of a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectedComponent {
    /// Linear pixel indices (`y * width + x`), in discovery order.
    pub pixels: Vec<usize>,
    pub area: usize,
    pub bbox: PixelRect,
}

impl ConnectedComponent {
    pub fn fill_ratio(&self) -> f64 {
        self.area as f64 / self.bbox.area() as f64
    }
}

pub fn mask_by_color(img: &RgbImage, range: &HsvRange) -> BitMask {
    BitMask {
        width: img.width,
        height: img.height,
        bits: img.pixels().map(|p| range.contains(rgb_to_hsv(p))).collect(),
    }
}

/// 8-connected components, largest first. Equal areas are ordered by the
/// top-left corner of their boxes (row, then column).
pub fn find_components(mask: &BitMask) -> Vec<ConnectedComponent> {
    let w = mask.width as usize;
    let h = mask.height as usize;
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut components = Vec::new();

    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);

        while let Some(idx) = stack.pop() {
            pixels.push(idx);
            let (x, y) = (idx % w, idx / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);

            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let n = ny * w + nx;
                    if mask.bits[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }

        let area = pixels.len();
        components.push(ConnectedComponent {
            pixels,
            area,
            bbox: PixelRect {
                x: x0 as u32,
                y: y0 as u32,
                w: (x1 - x0 + 1) as u32,
                h: (y1 - y0 + 1) as u32,
            },
        });
    }

    components.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.bbox.y.cmp(&b.bbox.y))
            .then(a.bbox.x.cmp(&b.bbox.x))
    });
    components
}

/// Locates the reference coin and derives the per-axis calibration.
pub fn detect_reference(
    img: &RgbImage,
    spec: &ReferenceSpec,
) -> Result<ReferenceMeasurement, ReferenceError> {
    spec.validate()?;
    let mask = mask_by_color(img, &spec.color).opened(spec.opening_radius);
    let passers: Vec<ConnectedComponent> = find_components(&mask)
        .into_iter()
        .filter(|c| {
            let area = c.area as f64;
            area >= spec.min_area_px && area <= spec.max_area_px && c.fill_ratio() >= spec.min_fill_ratio
        })
        .collect();

    let coin = match passers.as_slice() {
        [] => return Err(ReferenceError::NoReferenceFound),
        [only] => only,
        [first, second, ..] => {
            // sorted by area, so only the runner-up can be within the margin
            if ((first.area - second.area) as f64) < AMBIGUITY_MARGIN * first.area as f64 {
                return Err(ReferenceError::AmbiguousReference {
                    first: first.area,
                    second: second.area,
                });
            }
            first
        }
    };

    let bbox = coin.bbox;
    let cal = ReferenceMeasurement::from_pixel_diameter(
        spec.real_diameter_mm,
        f64::from(bbox.w),
        f64::from(bbox.h),
    );
    Ok(ReferenceMeasurement {
        bbox_x: bbox.x,
        bbox_y: bbox.y,
        bbox_w: bbox.w,
        bbox_h: bbox.h,
        area_px: coin.area as u64,
        ratio_x_mm_per_px: cal.ratio_x_mm_per_px,
        ratio_y_mm_per_px: cal.ratio_y_mm_per_px,
    })
}

/// Synthetic scene rendering shared by tests, benchmarks and fixtures.
pub mod synth {
    use super::RgbImage;

    pub const COIN_GRAY: [u8; 3] = [128, 128, 128];
    pub const TABLE_GREEN: [u8; 3] = [20, 140, 40];

    /// Whether pixel `(x, y)` belongs to a disc centred at `(cx, cy)` with
    /// radius `r`, sampling at the pixel centre.
    pub fn in_disc(x: u32, y: u32, cx: f64, cy: f64, r: f64) -> bool {
        let dx = f64::from(x) + 0.5 - cx;
        let dy = f64::from(y) + 0.5 - cy;
        dx * dx + dy * dy <= r * r
    }

    pub fn paint_disc(img: &mut RgbImage, cx: f64, cy: f64, r: f64, rgb: [u8; 3]) {
        let x0 = (cx - r).floor().max(0.0) as u32;
        let y0 = (cy - r).floor().max(0.0) as u32;
        let x1 = ((cx + r).ceil() as u32).min(img.width() - 1);
        let y1 = ((cy + r).ceil() as u32).min(img.height() - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if in_disc(x, y, cx, cy, r) {
                    img.put(x, y, rgb);
                }
            }
        }
    }

    pub fn paint_rect(img: &mut RgbImage, x: u32, y: u32, w: u32, h: u32, rgb: [u8; 3]) {
        for yy in y..(y + h).min(img.height()) {
            for xx in x..(x + w).min(img.width()) {
                img.put(xx, yy, rgb);
            }
        }
    }

    /// Green table with a gray coin disc.
    pub fn coin_scene(width: u32, height: u32, cx: f64, cy: f64, r: f64) -> RgbImage {
        let mut img = RgbImage::filled(width, height, TABLE_GREEN).expect("positive dimensions");
        paint_disc(&mut img, cx, cy, r, COIN_GRAY);
        img
    }
}
