//! Free label generation for the auxiliary self-supervision tasks.
//!
//! Every ordered pair of boxes yields supervision targets that cost nothing
//! to annotate because they are pure functions of geometry: a pair of
//! relative-position bits, a normalized centroid distance, and the pairwise
//! IoU. These drive the four auxiliary heads during training.

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundingBox, ImageMeta};

/// Per-pair self-supervision targets.
///
/// `relpos` holds `(bit_h, bit_v)`; `distance` is the centroid distance
/// normalized by the image diagonal; `iou` is plain intersection-over-union.
/// Both scalars lie in `[0, 1]` whenever the boxes lie inside the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSupLabels {
    pub relpos: (u8, u8),
    pub distance: f64,
    pub iou: f64,
}

/// Relative-position bits of the object with respect to the subject.
///
/// `bit_h = 1` iff the object's centroid is strictly right of the
/// subject's (larger x); `bit_v = 1` iff it is strictly below (larger y,
/// since y grows downward). Exact ties give 0, so swapping a tied axis
/// leaves its bit at 0 on both orderings.
///
/// # Example
///
/// ```
/// use sgrel::geometry::BoundingBox;
/// use sgrel::labels::relpos_label;
///
/// let s = BoundingBox::new(0.0, 0.0, 2.0, 2.0).unwrap(); // centroid (1, 1)
/// let o = BoundingBox::new(3.0, 4.0, 2.0, 2.0).unwrap(); // centroid (4, 5)
/// assert_eq!(relpos_label(&s, &o), (1, 1));
/// assert_eq!(relpos_label(&o, &s), (0, 0));
/// assert_eq!(relpos_label(&s, &s), (0, 0));
/// ```
pub fn relpos_label(b_s: &BoundingBox, b_o: &BoundingBox) -> (u8, u8) {
    let (sx, sy) = b_s.centroid();
    let (ox, oy) = b_o.centroid();
    ((ox > sx) as u8, (oy > sy) as u8)
}

/// Centroid distance normalized by the image diagonal.
///
/// Boxes inside the image can never be further apart than the diagonal, so
/// the value lies in `[0, 1]`.
pub fn distance_label(b_s: &BoundingBox, b_o: &BoundingBox, img: &ImageMeta) -> f64 {
    b_s.centroid_distance(b_o) / img.diagonal()
}

/// IoU regression target; identical to the geometric IoU.
pub fn iou_label(b_s: &BoundingBox, b_o: &BoundingBox) -> f64 {
    b_s.iou(b_o)
}

/// All targets for one ordered subject/object pair.
pub fn labels_for_pair(b_s: &BoundingBox, b_o: &BoundingBox, img: &ImageMeta) -> SelfSupLabels {
    SelfSupLabels {
        relpos: relpos_label(b_s, b_o),
        distance: distance_label(b_s, b_o, img),
        iou: iou_label(b_s, b_o),
    }
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
    fn relpos_hand_values() {
        let s = bx(0.0, 0.0, 2.0, 2.0);
        let o = bx(3.0, 4.0, 2.0, 2.0);
        assert_eq!(relpos_label(&s, &o), (1, 1));
        assert_eq!(relpos_label(&o, &s), (0, 0));
    }

    #[test]
    fn relpos_ties_are_zero_on_both_orderings() {
        // Same centroid x, object lower.
        let s = bx(0.0, 0.0, 2.0, 2.0);
        let o = bx(0.0, 4.0, 2.0, 2.0);
        assert_eq!(relpos_label(&s, &o), (0, 1));
        assert_eq!(relpos_label(&o, &s), (0, 0));
        assert_eq!(relpos_label(&s, &s), (0, 0));
    }

    #[test]
    fn distance_hand_value() {
        // Centroids (1,1) and (4,5): distance 5, diagonal sqrt(200).
        let s = bx(0.0, 0.0, 2.0, 2.0);
        let o = bx(3.0, 4.0, 2.0, 2.0);
        let d = distance_label(&s, &o, &img(10.0, 10.0));
        assert!((d - 5.0 / 200.0f64.sqrt()).abs() < 1e-15);
        assert!((d - 0.3535533905932738).abs() < 1e-12);
    }

    #[test]
    fn distance_of_identical_boxes_is_zero() {
        let b = bx(2.0, 3.0, 4.0, 5.0);
        assert_eq!(distance_label(&b, &b, &img(20.0, 20.0)), 0.0);
    }

    #[test]
    fn iou_label_nested_is_area_ratio() {
        let outer = bx(0.0, 0.0, 8.0, 8.0);
        let inner = bx(2.0, 2.0, 4.0, 4.0);
        assert!((iou_label(&outer, &inner) - 0.25).abs() < 1e-15);
    }

    prop_compose! {
        fn arb_box()(x in 0.0..80.0f64, y in 0.0..80.0f64,
                     w in 0.5..20.0f64, h in 0.5..20.0f64) -> BoundingBox {
            bx(x, y, w, h)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn swapping_strict_pairs_flips_both_bits(a in arb_box(), b in arb_box()) {
            let (acx, acy) = a.centroid();
            let (bcx, bcy) = b.centroid();
            prop_assume!(acx != bcx && acy != bcy);
            let (h1, v1) = relpos_label(&a, &b);
            let (h2, v2) = relpos_label(&b, &a);
            prop_assert_eq!(h1 + h2, 1, "bit_h must flip");
            prop_assert_eq!(v1 + v2, 1, "bit_v must flip");
        }

        #[test]
        fn scalar_labels_are_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let image = img(100.0, 100.0);
            let d_ab = distance_label(&a, &b, &image);
            let d_ba = distance_label(&b, &a, &image);
            prop_assert_eq!(d_ab, d_ba);
            prop_assert!((0.0..=1.0).contains(&d_ab), "distance {} out of range", d_ab);
            let i_ab = iou_label(&a, &b);
            prop_assert_eq!(i_ab, iou_label(&b, &a));
            prop_assert!((0.0..=1.0).contains(&i_ab));
        }

        #[test]
        fn labels_for_pair_bundles_the_three_targets(a in arb_box(), b in arb_box()) {
            let image = img(100.0, 100.0);
            let l = labels_for_pair(&a, &b, &image);
            prop_assert_eq!(l.relpos, relpos_label(&a, &b));
            prop_assert_eq!(l.distance, distance_label(&a, &b, &image));
            prop_assert_eq!(l.iou, iou_label(&a, &b));
        }
    }
}
