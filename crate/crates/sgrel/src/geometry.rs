//! Axis-aligned box primitives in image pixel coordinates.
//!
//! The coordinate frame follows detector output conventions: the origin is
//! the top-left corner of the image and `y` grows downward. A box is stored
//! as `(x, y, w, h)` with a top-left anchor; sub-pixel (fractional)
//! coordinates are allowed and all extents are strictly positive, enforced
//! at construction so the rest of the crate never sees a degenerate box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned bounding box with a top-left anchor.
///
/// `w` and `h` are strictly positive and `x`, `y` are non-negative; use
/// [`BoundingBox::new`] to construct one. Coordinates are finite `f64`
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Unvalidated mirror of [`BoundingBox`] used to re-check invariants when
/// deserializing.
#[derive(Deserialize)]
struct RawBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoundingBox::new(raw.x, raw.y, raw.w, raw.h)
    }
}

impl BoundingBox {
    /// Validates and constructs a box.
    ///
    /// Errors when any coordinate is non-finite, when `x` or `y` is
    /// negative, or when `w` or `h` is not strictly positive.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y), ("w", w), ("h", h)] {
            if !v.is_finite() {
                return Err(Error::validation(format!(
                    "box field {name} must be finite (got {v})"
                )));
            }
        }
        if x < 0.0 || y < 0.0 {
            return Err(Error::validation(format!(
                "box anchor must be non-negative (got x={x}, y={y})"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::validation(format!(
                "box extent must be strictly positive (got w={w}, h={h})"
            )));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Right edge, `x + w`.
    pub fn x2(&self) -> f64 {
        self.x + self.w
    }

    /// Bottom edge, `y + h` (y grows downward).
    pub fn y2(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Center point `(x + w/2, y + h/2)`.
    pub fn centroid(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Intersection-over-union with `other`.
    ///
    /// Always in `[0, 1]`: the intersection area of two boxes divided by the
    /// area of their union. Disjoint boxes give exactly `0.0`, identical
    /// boxes exactly `1.0`.
    ///
    /// # Example
    ///
    /// ```
    /// use sgrel::geometry::BoundingBox;
    ///
    /// let a = BoundingBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
    /// let b = BoundingBox::new(1.0, 0.0, 2.0, 2.0).unwrap();
    /// // Overlap is 1x2 = 2, union is 4 + 4 - 2 = 6.
    /// assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-15);
    /// ```
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        // Areas are recomputed from the rounded edge coordinates rather than
        // taken as w * h so that identical boxes give intersection == union
        // and therefore exactly 1.0.
        let (ax2, ay2) = (self.x2(), self.y2());
        let (bx2, by2) = (other.x2(), other.y2());
        let ix = (ax2.min(bx2) - self.x.max(other.x)).max(0.0);
        let iy = (ay2.min(by2) - self.y.max(other.y)).max(0.0);
        let inter = ix * iy;
        let area_a = (ax2 - self.x) * (ay2 - self.y);
        let area_b = (bx2 - other.x) * (by2 - other.y);
        let union = area_a + area_b - inter;
        if union <= 0.0 {
            // Only reachable when an extent underflows at this offset.
            return if self == other { 1.0 } else { 0.0 };
        }
        inter / union
    }

    /// Tightest axis-aligned box enclosing both `self` and `other`.
    pub fn union_box(&self, other: &BoundingBox) -> BoundingBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        BoundingBox {
            x,
            y,
            w: self.x2().max(other.x2()) - x,
            h: self.y2().max(other.y2()) - y,
        }
    }

    /// Euclidean distance between the two box centroids.
    pub fn centroid_distance(&self, other: &BoundingBox) -> f64 {
        let (ax, ay) = self.centroid();
        let (bx, by) = other.centroid();
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }

    /// True when `other` lies entirely inside `self` (edges may touch).
    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && self.x2() >= other.x2()
            && self.y2() >= other.y2()
    }
}

/// Image identity and extent; the denominator for every normalized
/// coordinate in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawImageMeta")]
pub struct ImageMeta {
    id: String,
    width: f64,
    height: f64,
}

#[derive(Deserialize)]
struct RawImageMeta {
    id: String,
    width: f64,
    height: f64,
}

impl TryFrom<RawImageMeta> for ImageMeta {
    type Error = Error;

    fn try_from(raw: RawImageMeta) -> Result<Self> {
        ImageMeta::new(raw.id, raw.width, raw.height)
    }
}

impl ImageMeta {
    pub fn new(id: impl Into<String>, width: f64, height: f64) -> Result<Self> {
        let id = id.into();
        if !(width.is_finite() && height.is_finite()) || width <= 0.0 || height <= 0.0 {
            return Err(Error::validation(format!(
                "image {id:?} extent must be strictly positive and finite (got {width} x {height})"
            )));
        }
        Ok(ImageMeta { id, width, height })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Image diagonal length, the normalizer for centroid distances.
    pub fn diagonal(&self) -> f64 {
        (self.width * self.width + self.height * self.height).sqrt()
    }

    /// True when `b` lies entirely inside the image.
    pub fn contains(&self, b: &BoundingBox) -> bool {
        b.x() >= 0.0 && b.y() >= 0.0 && b.x2() <= self.width && b.y2() <= self.height
    }
}
