//! Voxel overlap metrics: Dice similarity coefficient and volume similarity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::{BinaryMask, LabelVolume, TissueLabel};

/// Voxelwise agreement counts between a prediction and a ground-truth mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCounts {
    /// Voxels foreground in both masks.
    pub tp: u64,
    /// Voxels foreground only in the prediction.
    pub fp: u64,
    /// Voxels foreground only in the ground truth.
    pub fn_: u64,
}

impl OverlapCounts {
    pub fn prediction_size(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn ground_truth_size(&self) -> u64 {
        self.tp + self.fn_
    }
}

/// Exact voxelwise counts; the masks must share dimensions.
pub fn overlap_counts<F: Scalar>(
    pred: &BinaryMask<F>,
    gt: &BinaryMask<F>,
) -> Result<OverlapCounts> {
    if pred.dims() != gt.dims() {
        return Err(Error::Shape(format!(
            "mask dims differ: {:?} vs {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let mut counts = OverlapCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(counts)
}

/// Dice similarity coefficient `2·tp / (2·tp + fp + fn)`. Two empty masks
/// agree vacuously and score 1.
pub fn dice<F: Scalar>(counts: &OverlapCounts) -> F {
    let denom = 2 * counts.tp + counts.fp + counts.fn_;
    if denom == 0 {
        return F::one();
    }
    F::of_f64(2.0 * counts.tp as f64) / F::of_f64(denom as f64)
}

/// Volume similarity `1 - |fp - fn| / (2·tp + fp + fn)`; depends only on the
/// two mask cardinalities. Two empty masks score 1.
pub fn volume_similarity<F: Scalar>(counts: &OverlapCounts) -> F {
    let denom = 2 * counts.tp + counts.fp + counts.fn_;
    if denom == 0 {
        return F::one();
    }
    let diff = counts.fp.abs_diff(counts.fn_);
    F::one() - F::of_f64(diff as f64) / F::of_f64(denom as f64)
}

/// Full 8x8 label confusion matrix (`[gt_code][pred_code]`), computed in one
/// pass so per-tissue overlap counts come for free.
pub fn label_confusion<F: Scalar>(
    pred: &LabelVolume<F>,
    gt: &LabelVolume<F>,
) -> Result<[[u64; 8]; 8]> {
    if pred.dims() != gt.dims() {
        return Err(Error::Shape(format!(
            "volume dims differ: {:?} vs {:?} (cases {:?} vs {:?})",
            pred.dims(),
            gt.dims(),
            pred.case_id(),
            gt.case_id()
        )));
    }
    let mut matrix = [[0u64; 8]; 8];
    for (&p, &g) in pred.voxels().iter().zip(gt.voxels()) {
        matrix[g as usize][p as usize] += 1;
    }
    Ok(matrix)
}

/// Overlap counts for one tissue, derived from the confusion matrix.
pub fn counts_for_label(confusion: &[[u64; 8]; 8], label: TissueLabel) -> OverlapCounts {
    let c = label.code() as usize;
    let tp = confusion[c][c];
    let mut fp = 0;
    let mut fn_ = 0;
    for (other, row) in confusion.iter().enumerate() {
        if other != c {
            fp += row[c];
            fn_ += confusion[c][other];
        }
    }
    OverlapCounts { tp, fp, fn_ }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(dims: (usize, usize, usize), fg: &[usize]) -> BinaryMask {
        let mut data = vec![false; dims.0 * dims.1 * dims.2];
        for &i in fg {
            data[i] = true;
        }
        BinaryMask::new(dims, (1.0, 1.0, 1.0), data).unwrap()
    }

    #[test]
    fn identical_masks_count_all_tp() {
        let fg: Vec<usize> = (0..10).collect();
        let a = mask((4, 4, 4), &fg);
        let c = overlap_counts(&a, &a).unwrap();
        assert_eq!(c, OverlapCounts { tp: 10, fp: 0, fn_: 0 });
        assert_eq!(dice::<f64>(&c), 1.0);
        assert_eq!(volume_similarity::<f64>(&c), 1.0);
    }

    #[test]
    fn disjoint_masks() {
        let a = mask((4, 4, 4), &[0, 1, 2, 3, 4]);
        let b = mask((4, 4, 4), &[10, 11, 12, 13, 14, 15, 16]);
        let c = overlap_counts(&a, &b).unwrap();
        assert_eq!(c, OverlapCounts { tp: 0, fp: 5, fn_: 7 });
        assert_eq!(dice::<f64>(&c), 0.0);
    }

    #[test]
    fn dims_mismatch_is_shape_error() {
        let a = mask((2, 2, 2), &[]);
        let b = mask((2, 2, 1), &[]);
        assert!(matches!(overlap_counts(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn dice_half_for_overlapping_cubes() {
        // Two 2x2x2 cubes overlapping in a 1x2x2 slab.
        let dims = (3, 2, 2);
        let cube = |x0: usize| -> Vec<usize> {
            let mut v = Vec::new();
            for z in 0..2 {
                for y in 0..2 {
                    for x in x0..x0 + 2 {
                        v.push(x + dims.0 * (y + dims.1 * z));
                    }
                }
            }
            v
        };
        let pred = mask(dims, &cube(0));
        let gt = mask(dims, &cube(1));
        let c = overlap_counts(&pred, &gt).unwrap();
        assert_eq!(c, OverlapCounts { tp: 4, fp: 4, fn_: 4 });
        assert_eq!(dice::<f64>(&c), 0.5);
    }

    #[test]
    fn missing_prediction_scores_zero() {
        let gt = mask((2, 2, 2), &[0, 1, 2]);
        let pred = mask((2, 2, 2), &[]);
        let c = overlap_counts(&pred, &gt).unwrap();
        assert_eq!(dice::<f64>(&c), 0.0);
        assert_eq!(volume_similarity::<f64>(&c), 0.0);
    }

    #[test]
    fn vs_depends_only_on_cardinalities() {
        // |gt| = 10 disjoint from |pred| = 30: VS = 1 - 20/40.
        let c = OverlapCounts { tp: 0, fp: 30, fn_: 10 };
        assert_eq!(volume_similarity::<f64>(&c), 0.5);
        // Same cardinalities with overlap: 1 - |20 - 0|/(20 + 20 + 0)
        let c2 = OverlapCounts { tp: 10, fp: 20, fn_: 0 };
        assert_eq!(volume_similarity::<f64>(&c2), 0.5);
    }

    #[test]
    fn equal_volumes_score_one() {
        let c = OverlapCounts { tp: 3, fp: 4, fn_: 4 };
        assert_eq!(volume_similarity::<f64>(&c), 1.0);
    }

    #[test]
    fn both_empty_is_vacuous_agreement() {
        let c = OverlapCounts::default();
        assert_eq!(dice::<f64>(&c), 1.0);
        assert_eq!(volume_similarity::<f64>(&c), 1.0);
    }

    #[test]
    fn kernels_are_scalar_generic() {
        let c = OverlapCounts { tp: 4, fp: 4, fn_: 4 };
        assert_eq!(dice::<f32>(&c), 0.5f32);
        assert_eq!(volume_similarity::<f32>(&c), 1.0f32);
    }

    #[test]
    fn random_counts_match_brute_force() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..50 {
            let a_bits: Vec<bool> = (0..512).map(|_| next() % 3 == 0).collect();
            let b_bits: Vec<bool> = (0..512).map(|_| next() % 3 == 0).collect();
            let a = BinaryMask::new((8, 8, 8), (1.0, 1.0, 1.0), a_bits.clone()).unwrap();
            let b = BinaryMask::new((8, 8, 8), (1.0, 1.0, 1.0), b_bits.clone()).unwrap();
            let c = overlap_counts(&a, &b).unwrap();
            let mut brute = OverlapCounts::default();
            for i in 0..512 {
                match (a_bits[i], b_bits[i]) {
                    (true, true) => brute.tp += 1,
                    (true, false) => brute.fp += 1,
                    (false, true) => brute.fn_ += 1,
                    _ => {}
                }
            }
            assert_eq!(c, brute);
        }
    }

    #[test]
    fn exhaustive_small_grid_matches_set_oracle() {
        // every pair of masks on a 2x2x1 grid
        for a_bits in 0u32..16 {
            for b_bits in 0u32..16 {
                let a = mask((2, 2, 1), &(0..4).filter(|i| a_bits & (1 << i) != 0).collect::<Vec<_>>());
                let b = mask((2, 2, 1), &(0..4).filter(|i| b_bits & (1 << i) != 0).collect::<Vec<_>>());
                let c = overlap_counts(&a, &b).unwrap();
                let tp = (a_bits & b_bits).count_ones() as u64;
                let fp = (a_bits & !b_bits).count_ones() as u64;
                let fn_ = (!a_bits & b_bits & 0xF).count_ones() as u64;
                assert_eq!(c, OverlapCounts { tp, fp, fn_ });
                let denom = 2 * tp + fp + fn_;
                let d_oracle = if denom == 0 { 1.0 } else { (2 * tp) as f64 / denom as f64 };
                let v_oracle =
                    if denom == 0 { 1.0 } else { 1.0 - fp.abs_diff(fn_) as f64 / denom as f64 };
                assert_eq!(dice::<f64>(&c), d_oracle);
                assert_eq!(volume_similarity::<f64>(&c), v_oracle);
            }
        }
    }

    proptest! {
        #[test]
        fn dice_vs_bounds_and_symmetry(tp in 0u64..100, fp in 0u64..100, fn_ in 0u64..100) {
            let c = OverlapCounts { tp, fp, fn_ };
            let swapped = OverlapCounts { tp, fp: fn_, fn_: fp };
            let d: f64 = dice(&c);
            let v: f64 = volume_similarity(&c);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((0.0..=1.0).contains(&v));
            // VS >= DSC since |fp - fn| <= fp + fn
            prop_assert!(v >= d - 1e-12);
            prop_assert_eq!(d, dice::<f64>(&swapped));
            prop_assert_eq!(v, volume_similarity::<f64>(&swapped));
        }
    }
}
