use serde::{Deserialize, Serialize};

/// Inclusive integer pixel rectangle `[x_min, x_max] × [y_min, y_max]`.
///
/// Pixel `(x, y)` covers the continuous square `[x, x+1) × [y, y+1)` and has
/// its center at `(x + 0.5, y + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl PixelRect {
    pub const fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    /// Rectangle covering an image of the given size, origin at (0, 0).
    pub fn image(width: u32, height: u32) -> Self {
        Self::new(0, 0, i64::from(width) - 1, i64::from(height) - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.x_max < self.x_min || self.y_max < self.y_min
    }

    pub fn width(&self) -> i64 {
        (self.x_max - self.x_min + 1).max(0)
    }

    pub fn height(&self) -> i64 {
        (self.y_max - self.y_min + 1).max(0)
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Intersection; may be empty.
    pub fn intersect(&self, other: &Self) -> Self {
        Self::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Self {
        Self::new(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)
    }
}
