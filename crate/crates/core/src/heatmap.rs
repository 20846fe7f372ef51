use crate::error::Error;
use crate::normal::univariate_cdf;
use crate::pbox::{check_threshold, pixel_center, pixel_inclusion_probability, support_region, PBox};
use crate::rect::PixelRect;
use crate::scalar::Scalar;

/// Dense per-pixel inclusion probabilities over a rectangular window.
///
/// Cells below the support threshold hold exactly zero; pixels outside the
/// window are zero by definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap<T> {
    origin: (i64, i64),
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> Heatmap<T> {
    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major cell values.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Window covered by this heatmap, in image pixel indices.
    pub fn rect(&self) -> PixelRect {
        PixelRect::new(
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.width as i64 - 1,
            self.origin.1 + self.height as i64 - 1,
        )
    }

    /// Probability at absolute pixel `(x, y)`; zero outside the window.
    pub fn get(&self, x: i64, y: i64) -> T {
        if self.rect().contains(x, y) {
            let (cx, cy) = ((x - self.origin.0) as usize, (y - self.origin.1) as usize);
            self.values[cy * self.width + cx]
        } else {
            T::zero()
        }
    }

    /// Row `y` (absolute) as a slice, if inside the window.
    pub fn row(&self, y: i64) -> Option<&[T]> {
        if y < self.origin.1 || y >= self.origin.1 + self.height as i64 {
            return None;
        }
        let start = (y - self.origin.1) as usize * self.width;
        Some(&self.values[start..start + self.width])
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(*v))
    }

    /// Overwrites the cell at absolute `(x, y)`; returns false outside the window.
    pub fn set(&mut self, x: i64, y: i64, value: T) -> bool {
        if !self.rect().contains(x, y) {
            return false;
        }
        let (cx, cy) = ((x - self.origin.0) as usize, (y - self.origin.1) as usize);
        self.values[cy * self.width + cx] = value;
        true
    }

    /// Applies `f` to every cell, keeping the window.
    pub(crate) fn map<U>(&self, f: impl Fn(T) -> U) -> Vec<U> {
        self.values.iter().map(|v| f(*v)).collect()
    }
}

/// Rasterizes `pbox` over its support region.
pub fn rasterize<T: Scalar>(pbox: &PBox<T>, threshold: T) -> Result<Heatmap<T>, Error> {
    let region = support_region(pbox, threshold)?;
    Ok(rasterize_region(pbox, threshold, region))
}

/// Rasterizes `pbox` over its support region intersected with `clip`
/// (usually the image). The window may be empty.
pub fn rasterize_within<T: Scalar>(pbox: &PBox<T>, threshold: T, clip: &PixelRect) -> Result<Heatmap<T>, Error> {
    let region = support_region(pbox, threshold)?.intersect(clip);
    Ok(rasterize_region(pbox, threshold, region))
}

/// Evaluates inclusion probabilities at every pixel center of `region`,
/// zeroing values below `threshold`.
pub(crate) fn rasterize_region<T: Scalar>(pbox: &PBox<T>, threshold: T, region: PixelRect) -> Heatmap<T> {
    debug_assert!(check_threshold(threshold).is_ok());
    let width = region.width() as usize;
    let height = region.height() as usize;
    let origin = (region.x_min, region.y_min);
    let mut values = Vec::with_capacity(width * height);
    let cut = |p: T| if p < threshold { T::zero() } else { p };

    if pbox.is_axis_separable() {
        // Per-axis factors; the products below follow the same order as
        // `pixel_inclusion_probability` so cells match point evaluations bit for bit.
        let tl = pbox.top_left();
        let br = pbox.bottom_right();
        let (tl_m, tl_c) = (tl.mean(), tl.covariance());
        let (br_m, br_c) = (br.mean(), br.covariance());
        let xs: Vec<(T, T)> = (0..width as i64)
            .map(|i| {
                let x = pixel_center::<T>(origin.0 + i);
                (univariate_cdf(x, tl_m[0], tl_c.xx), univariate_cdf(-x, -br_m[0], br_c.xx))
            })
            .collect();
        for j in 0..height as i64 {
            let y = pixel_center::<T>(origin.1 + j);
            let tl_y = univariate_cdf(y, tl_m[1], tl_c.yy);
            let br_y = univariate_cdf(-y, -br_m[1], br_c.yy);
            values.extend(xs.iter().map(|&(tl_x, br_x)| {
                let p = (tl_x * tl_y) * (br_x * br_y);
                cut(p.max(T::zero()).min(T::one()))
            }));
        }
    } else {
        for j in 0..height as i64 {
            let y = pixel_center::<T>(origin.1 + j);
            for i in 0..width as i64 {
                let x = pixel_center::<T>(origin.0 + i);
                values.push(cut(pixel_inclusion_probability([x, y], pbox)));
            }
        }
    }
    Heatmap { origin, width, height, values }
}
