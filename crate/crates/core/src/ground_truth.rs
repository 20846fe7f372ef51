//! Pixel-accurate ground-truth instances and dataset statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rect::PixelRect;

/// Objects narrower or shorter than this (in pixels) are tiny.
pub const TINY_MIN_SIDE: i64 = 10;
/// Objects with fewer pixels than this are tiny.
pub const TINY_MIN_PIXELS: u64 = 100;

/// Dense bitmask over a rectangular window of the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMask {
    origin: (i64, i64),
    width: usize,
    height: usize,
    words: Vec<u64>,
    pixel_count: u64,
}

impl SegmentMask {
    /// Builds a mask from row-major bits covering `width × height` pixels at `origin`.
    pub fn from_bits(origin: (i64, i64), width: usize, height: usize, bits: &[bool]) -> Result<Self, Error> {
        if bits.len() != width * height {
            return Err(Error::MaskSizeMismatch { expected: width * height, found: bits.len() });
        }
        let mut mask = Self::empty(origin, width, height);
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            mask.set_index(i);
        }
        Ok(mask)
    }

    /// Builds a mask containing exactly the given absolute pixels (duplicates ignored).
    pub fn from_pixels(pixels: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let pixels: Vec<(i64, i64)> = pixels.into_iter().collect();
        let Some(rect) = bounding_rect(pixels.iter().copied()) else {
            return Self::empty((0, 0), 0, 0);
        };
        let mut mask = Self::empty((rect.x_min, rect.y_min), rect.width() as usize, rect.height() as usize);
        for (x, y) in pixels {
            let i = mask.index(x, y);
            if !mask.bit(i) {
                mask.set_index(i);
            }
        }
        mask
    }

    /// A mask with every pixel of `rect` set.
    pub fn filled(rect: &PixelRect) -> Self {
        let (w, h) = (rect.width() as usize, rect.height() as usize);
        let mut mask = Self::empty((rect.x_min, rect.y_min), w, h);
        for i in 0..w * h {
            mask.set_index(i);
        }
        mask
    }

    fn empty(origin: (i64, i64), width: usize, height: usize) -> Self {
        Self { origin, width, height, words: vec![0; (width * height).div_ceil(64)], pixel_count: 0 }
    }

    #[inline]
    fn index(&self, x: i64, y: i64) -> usize {
        (y - self.origin.1) as usize * self.width + (x - self.origin.0) as usize
    }

    #[inline]
    fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn set_index(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
        self.pixel_count += 1;
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of set pixels.
    pub fn pixel_count(&self) -> u64 {
        self.pixel_count
    }

    /// Stored window (not necessarily tight).
    pub fn window(&self) -> PixelRect {
        PixelRect::new(
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.width as i64 - 1,
            self.origin.1 + self.height as i64 - 1,
        )
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.window().contains(x, y) && self.bit(self.index(x, y))
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let w = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
            .map(move |i| (self.origin.0 + (i % w) as i64, self.origin.1 + (i / w) as i64))
        })
    }

    /// Calls `f(y, x_start, run_len)` for each run of set pixels inside `rect`,
    /// row by row. Runs are clipped to `rect`.
    pub(crate) fn for_each_run_in(&self, rect: &PixelRect, mut f: impl FnMut(i64, i64, usize)) {
        let r = rect.intersect(&self.window());
        if r.is_empty() {
            return;
        }
        for y in r.y_min..=r.y_max {
            let mut x = r.x_min;
            while x <= r.x_max {
                if self.bit(self.index(x, y)) {
                    let start = x;
                    while x <= r.x_max && self.bit(self.index(x, y)) {
                        x += 1;
                    }
                    f(y, start, (x - start) as usize);
                } else {
                    x += 1;
                }
            }
        }
    }

    /// Copy without pixel `(x, y)`.
    pub fn without_pixel(&self, x: i64, y: i64) -> Self {
        let mut m = self.clone();
        if m.contains(x, y) {
            let i = m.index(x, y);
            m.words[i / 64] &= !(1 << (i % 64));
            m.pixel_count -= 1;
        }
        m
    }

    /// Copy cropped to `rect`, which must lie inside the window.
    fn crop(&self, rect: &PixelRect) -> Self {
        let mut out = Self::empty((rect.x_min, rect.y_min), rect.width() as usize, rect.height() as usize);
        for (x, y) in self.pixels().filter(|(x, y)| rect.contains(*x, *y)) {
            let i = out.index(x, y);
            out.set_index(i);
        }
        out
    }
}

fn bounding_rect(pixels: impl Iterator<Item = (i64, i64)>) -> Option<PixelRect> {
    pixels.fold(None, |acc, (x, y)| {
        Some(match acc {
            None => PixelRect::new(x, y, x, y),
            Some(r) => PixelRect::new(r.x_min.min(x), r.y_min.min(y), r.x_max.max(x), r.y_max.max(y)),
        })
    })
}

/// Smallest rectangle containing every set pixel.
pub fn tight_bbox(mask: &SegmentMask) -> Result<PixelRect, Error> {
    if mask.pixel_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let w = mask.width();
    let mut x_min = usize::MAX;
    let mut x_max = 0;
    let mut y_min = usize::MAX;
    let mut y_max = 0;
    for (wi, &word) in mask.words.iter().enumerate().filter(|(_, w)| **w != 0) {
        let lo = wi * 64 + word.trailing_zeros() as usize;
        let hi = wi * 64 + 63 - word.leading_zeros() as usize;
        y_min = y_min.min(lo / w);
        y_max = y_max.max(hi / w);
        // A word may wrap rows; scan its bits for the column extremes.
        let mut rest = word;
        while rest != 0 {
            let i = wi * 64 + rest.trailing_zeros() as usize;
            rest &= rest - 1;
            x_min = x_min.min(i % w);
            x_max = x_max.max(i % w);
        }
    }
    let (ox, oy) = mask.origin();
    Ok(PixelRect::new(ox + x_min as i64, oy + y_min as i64, ox + x_max as i64, oy + y_max as i64))
}

/// One annotated object instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub class_id: usize,
    pub instance_id: u64,
    segment: SegmentMask,
    bbox: PixelRect,
    pub frame_index: u64,
}

impl GroundTruthObject {
    /// Stores the segment cropped to its tight bounding box.
    pub fn new(class_id: usize, instance_id: u64, segment: SegmentMask, frame_index: u64) -> Result<Self, Error> {
        let bbox = tight_bbox(&segment)?;
        let segment = if segment.window() == bbox { segment } else { segment.crop(&bbox) };
        Ok(Self { class_id, instance_id, segment, bbox, frame_index })
    }

    pub fn segment(&self) -> &SegmentMask {
        &self.segment
    }

    /// Tight bounding box of the segment.
    pub fn bbox(&self) -> PixelRect {
        self.bbox
    }

    pub fn pixel_count(&self) -> u64 {
        self.segment.pixel_count()
    }
}

/// Objects under 10 px in either bounding-box side or under 100 pixels.
pub fn is_tiny(gt: &GroundTruthObject) -> bool {
    let b = gt.bbox();
    b.width() < TINY_MIN_SIDE || b.height() < TINY_MIN_SIDE || gt.pixel_count() < TINY_MIN_PIXELS
}

/// All annotations of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub frame_index: u64,
    pub sequence: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<GroundTruthObject>,
}

impl GroundTruthFrame {
    pub fn image_rect(&self) -> PixelRect {
        PixelRect::image(self.width, self.height)
    }
}

/// Dataset-level annotation statistics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_images: u64,
    pub num_objects: u64,
    pub empty_images: u64,
    pub avg_objects_per_image: f64,
    pub avg_pixels_per_object: f64,
    pub per_class_counts: BTreeMap<usize, u64>,
}

/// Row labels of the statistics table, in display order.
pub const STATS_ROW_LABELS: [&str; 5] = [
    "number of images",
    "ground truth objects",
    "avg objects per image",
    "avg pixels per object",
    "empty images",
];

/// Statistics over raw annotations.
pub fn compute_stats(frames: &[GroundTruthFrame]) -> DatasetStats {
    stats_over(frames, |_| true)
}

/// Statistics after dropping tiny objects.
pub fn compute_stats_filtered(frames: &[GroundTruthFrame]) -> DatasetStats {
    stats_over(frames, |o| !is_tiny(o))
}

fn stats_over(frames: &[GroundTruthFrame], keep: impl Fn(&GroundTruthObject) -> bool) -> DatasetStats {
    let mut stats = DatasetStats::default();
    let mut total_pixels = 0u64;
    for frame in frames {
        stats.num_images += 1;
        let mut count = 0;
        for obj in frame.objects.iter().filter(|o| keep(o)) {
            count += 1;
            total_pixels += obj.pixel_count();
            *stats.per_class_counts.entry(obj.class_id).or_default() += 1;
        }
        if count == 0 {
            stats.empty_images += 1;
        }
        stats.num_objects += count;
    }
    if stats.num_images > 0 {
        stats.avg_objects_per_image = stats.num_objects as f64 / stats.num_images as f64;
    }
    if stats.num_objects > 0 {
        stats.avg_pixels_per_object = total_pixels as f64 / stats.num_objects as f64;
    }
    stats
}

impl DatasetStats {
    /// Two-column text table using the standard row labels, followed by
    /// per-class counts when `class_names` is given.
    pub fn render_table(&self, class_names: Option<&[String]>) -> String {
        let values = [
            self.num_images.to_string(),
            self.num_objects.to_string(),
            format!("{:.2}", self.avg_objects_per_image),
            format!("{:.1}", self.avg_pixels_per_object),
            self.empty_images.to_string(),
        ];
        let label_w = STATS_ROW_LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
        let value_w = values.iter().map(|v| v.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (label, value) in STATS_ROW_LABELS.iter().zip(&values) {
            let _ = writeln!(out, "{label:<label_w$}  {value:>value_w$}");
        }
        if let Some(names) = class_names {
            if !self.per_class_counts.is_empty() {
                out.push('\n');
                for (class, n) in &self.per_class_counts {
                    let name = names.get(*class).map(String::as_str).unwrap_or("?");
                    let _ = writeln!(out, "{name:<label_w$}  {n:>value_w$}");
                }
            }
        }
        out
    }
}
