//! Pairwise spatial feature construction.
//!
//! A subject/object box pair is encoded as a 22-dimensional vector built
//! from three box-delta blocks and two normalized single-box blocks:
//!
//! | entries | block                                  |
//! |---------|----------------------------------------|
//! | 0..4    | delta(subject, union)                  |
//! | 4..8    | delta(union, object)                   |
//! | 8..12   | delta(subject, object)                 |
//! | 12..17  | normalized subject box                 |
//! | 17..22  | normalized object box                  |
//!
//! where `union` is the tightest box enclosing subject and object. The
//! delta blocks are invariant to translating both boxes together; the whole
//! feature is invariant to uniformly rescaling boxes and image.

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundingBox, ImageMeta};

/// Length of [`SpatialFeature`]: three 4-entry delta blocks plus two
/// 5-entry normalized-box blocks.
pub const SPATIAL_FEATURE_LEN: usize = 22;

/// The 22-dimensional pairwise layout encoding. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFeature {
    values: Vec<f64>,
}

impl SpatialFeature {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Relative offset and log-scale of `b1` with respect to `b2`:
/// `((x1-x2)/w2, (y1-y2)/h2, ln(w1/w2), ln(h1/h2))`.
///
/// Anchors are compared at the top-left corner; logs are natural. The
/// first two entries of `delta_box(b1, b2)` and `delta_box(b2, b1)` do not
/// simply negate each other because the denominators differ.
///
/// # Example
///
/// ```
/// use sgrel::geometry::BoundingBox;
/// use sgrel::spatial::delta_box;
///
/// let b1 = BoundingBox::new(2.0, 2.0, 4.0, 4.0).unwrap();
/// let b2 = BoundingBox::new(0.0, 0.0, 8.0, 8.0).unwrap();
/// let d = delta_box(&b1, &b2);
/// assert_eq!(d[0], 0.25);
/// assert_eq!(d[1], 0.25);
/// assert!((d[2] + 2.0f64.ln()).abs() < 1e-15);
/// assert!((d[3] + 2.0f64.ln()).abs() < 1e-15);
/// ```
pub fn delta_box(b1: &BoundingBox, b2: &BoundingBox) -> [f64; 4] {
    [
        (b1.x() - b2.x()) / b2.w(),
        (b1.y() - b2.y()) / b2.h(),
        (b1.w() / b2.w()).ln(),
        (b1.h() / b2.h()).ln(),
    ]
}

/// Box coordinates normalized by the image extent:
/// `(x/W, y/H, (x+w)/W, (y+h)/H, wh/(WH))`.
///
/// For a box inside the image every entry lies in `[0, 1]`.
pub fn normalized_box(b: &BoundingBox, img: &ImageMeta) -> [f64; 5] {
    let (iw, ih) = (img.width(), img.height());
    [
        b.x() / iw,
        b.y() / ih,
        b.x2() / iw,
        b.y2() / ih,
        b.area() / (iw * ih),
    ]
}

/// Builds the full 22-dimensional feature for a subject/object pair.
///
/// The middle box is the union of the two inputs, standing in for the
/// region the relationship occupies.
pub fn spatial_feature(b_s: &BoundingBox, b_o: &BoundingBox, img: &ImageMeta) -> SpatialFeature {
    let b_pred = b_s.union_box(b_o);
    let mut values = Vec::with_capacity(SPATIAL_FEATURE_LEN);
    values.extend_from_slice(&delta_box(b_s, &b_pred));
    values.extend_from_slice(&delta_box(&b_pred, b_o));
    values.extend_from_slice(&delta_box(b_s, b_o));
    values.extend_from_slice(&normalized_box(b_s, img));
    values.extend_from_slice(&normalized_box(b_o, img));
    debug_assert_eq!(values.len(), SPATIAL_FEATURE_LEN);
    SpatialFeature { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn img(w: f64, h: f64) -> ImageMeta {
        ImageMeta::new("test", w, h).unwrap()
    }

    #[test]
    fn delta_box_of_identical_boxes_is_zero() {
        let b = bx(3.0, 7.0, 2.5, 4.0);
        assert_eq!(delta_box(&b, &b), [0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn delta_box_hand_value_nested() {
        let b1 = bx(2.0, 2.0, 4.0, 4.0);
        let b2 = bx(0.0, 0.0, 8.0, 8.0);
        let d = delta_box(&b1, &b2);
        assert_eq!(d[0], 0.25);
        assert_eq!(d[1], 0.25);
        assert!((d[2] - (-(2.0f64.ln()))).abs() < 1e-15);
        assert!((d[3] - (-(2.0f64.ln()))).abs() < 1e-15);
    }

    #[test]
    fn normalized_box_hand_value() {
        let b = bx(2.0, 2.0, 4.0, 4.0);
        let n = normalized_box(&b, &img(8.0, 8.0));
        assert_eq!(n, [0.25, 0.25, 0.75, 0.75, 0.25]);
    }

    #[test]
    fn normalized_box_of_full_image_is_all_ones_and_corners() {
        let n = normalized_box(&bx(0.0, 0.0, 8.0, 8.0), &img(8.0, 8.0));
        assert_eq!(n, [0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn feature_has_twenty_two_entries_and_finite_values() {
        let f = spatial_feature(&bx(0.0, 0.0, 2.0, 2.0), &bx(3.0, 4.0, 2.0, 2.0), &img(10.0, 10.0));
        assert_eq!(f.len(), SPATIAL_FEATURE_LEN);
        assert!(f.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn subject_object_delta_block_hand_value() {
        // Third delta block is delta(subject, object) directly.
        let f = spatial_feature(&bx(0.0, 0.0, 2.0, 2.0), &bx(3.0, 4.0, 2.0, 2.0), &img(10.0, 10.0));
        let block = &f.values()[8..12];
        assert_eq!(block, &[-1.5, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_pair_zeroes_all_delta_blocks() {
        let b = bx(1.0, 2.0, 3.0, 4.0);
        let f = spatial_feature(&b, &b, &img(10.0, 10.0));
        // Union of a box with itself is the box, so all three delta blocks vanish.
        assert!(f.values()[..12].iter().all(|&v| v == 0.0));
    }

    prop_compose! {
        fn arb_box_in(side: f64)(x in 0.0..0.6f64, y in 0.0..0.6f64,
                                 w in 0.05..0.4f64, h in 0.05..0.4f64) -> BoundingBox {
            bx(x * side, y * side, w * side, h * side)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn normalized_entries_stay_in_unit_interval(b in arb_box_in(100.0)) {
            let n = normalized_box(&b, &img(100.0, 100.0));
            for (i, v) in n.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(v), "entry {} = {} out of range", i, v);
            }
        }

        #[test]
        fn delta_blocks_are_translation_invariant(
            b_s in arb_box_in(100.0), b_o in arb_box_in(100.0),
            dx in 0.0..200.0f64, dy in 0.0..200.0f64,
        ) {
            let image = img(1000.0, 1000.0);
            let f = spatial_feature(&b_s, &b_o, &image);
            let shifted_s = bx(b_s.x() + dx, b_s.y() + dy, b_s.w(), b_s.h());
            let shifted_o = bx(b_o.x() + dx, b_o.y() + dy, b_o.w(), b_o.h());
            let g = spatial_feature(&shifted_s, &shifted_o, &image);
            for i in 0..12 {
                prop_assert!(
                    (f.values()[i] - g.values()[i]).abs() < 1e-9,
                    "delta entry {} changed under translation: {} vs {}",
                    i, f.values()[i], g.values()[i]
                );
            }
        }

        #[test]
        fn feature_is_invariant_under_uniform_rescaling(
            b_s in arb_box_in(100.0), b_o in arb_box_in(100.0),
            scale in 0.1..50.0f64,
        ) {
            let f = spatial_feature(&b_s, &b_o, &img(100.0, 100.0));
            let rescale = |b: &BoundingBox| {
                bx(b.x() * scale, b.y() * scale, b.w() * scale, b.h() * scale)
            };
            let g = spatial_feature(
                &rescale(&b_s),
                &rescale(&b_o),
                &img(100.0 * scale, 100.0 * scale),
            );
            for i in 0..SPATIAL_FEATURE_LEN {
                prop_assert!(
                    (f.values()[i] - g.values()[i]).abs() < 1e-9,
                    "entry {} changed under rescaling: {} vs {}",
                    i, f.values()[i], g.values()[i]
                );
            }
        }

        #[test]
        fn delta_box_matches_direct_formula(b1 in arb_box_in(100.0), b2 in arb_box_in(100.0)) {
            // Independent recomputation, written out rather than shared.
            let d = delta_box(&b1, &b2);
            let expect = [
                (b1.x() - b2.x()) / b2.w(),
                (b1.y() - b2.y()) / b2.h(),
                (b1.w() / b2.w()).ln(),
                (b1.h() / b2.h()).ln(),
            ];
            prop_assert_eq!(d, expect);
        }
    }
}
