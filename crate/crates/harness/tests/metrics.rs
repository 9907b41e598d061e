use ndarray::{s, Array3, Array4};
use proptest::prelude::*;
use trajspace_harness::metrics::{ade_fde, best_of_s};
use trajspace_oracles::metrics as oracle;

fn to_nested(pred: &Array4<f64>) -> Vec<Vec<Vec<[f64; 2]>>> {
    let (n, s, t, _) = pred.dim();
    (0..n)
        .map(|i| {
            (0..s)
                .map(|j| {
                    (0..t)
                        .map(|k| [pred[[i, j, k, 0]], pred[[i, j, k, 1]]])
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn gt_nested(gt: &Array3<f64>) -> Vec<Vec<[f64; 2]>> {
    let (n, t, _) = gt.dim();
    (0..n)
        .map(|i| (0..t).map(|k| [gt[[i, k, 0]], gt[[i, k, 1]]]).collect())
        .collect()
}

fn batch() -> impl Strategy<Value = (Array4<f64>, Array3<f64>)> {
    (1usize..5, 1usize..7, 1usize..13).prop_flat_map(|(n, s, t)| {
        (
            prop::collection::vec(-20.0f64..20.0, n * s * t * 2),
            prop::collection::vec(-20.0f64..20.0, n * t * 2),
        )
            .prop_map(move |(p, g)| {
                (
                    Array4::from_shape_vec((n, s, t, 2), p).unwrap(),
                    Array3::from_shape_vec((n, t, 2), g).unwrap(),
                )
            })
    })
}

#[test]
fn handcrafted_offsets_match_enumeration() {
    // two agents on a straight line, three samples shifted sideways
    let t = 12;
    let gt = Array3::from_shape_fn((2, t, 2), |(i, k, d)| {
        if d == 0 {
            k as f64 * (i + 1) as f64
        } else {
            0.0
        }
    });
    let offsets = [[0.5, 2.0, 1.0], [3.0, 0.25, 1.5]];
    let pred = Array4::from_shape_fn((2, 3, t, 2), |(i, j, k, d)| {
        gt[[i, k, d]] + if d == 1 { offsets[i][j] } else { 0.0 }
    });
    let m = ade_fde(pred.view(), gt.view()).unwrap();
    let (ade, fde) = oracle::best_of_s(&to_nested(&pred), &gt_nested(&gt));
    assert_eq!((m.ade, m.fde), (ade, fde));
    assert!((m.ade - 0.375).abs() < 1e-12);
}

#[test]
fn perpendicular_offset_scores_its_size() {
    let gt = Array3::from_shape_fn((1, 12, 2), |(_, k, d)| if d == 0 { k as f64 } else { 0.0 });
    let pred = Array4::from_shape_fn(
        (1, 1, 12, 2),
        |(_, _, k, d)| if d == 0 { k as f64 } else { 1.0 },
    );
    let m = ade_fde(pred.view(), gt.view()).unwrap();
    assert!((m.ade - 1.0).abs() < 1e-12 && (m.fde - 1.0).abs() < 1e-12);
}

#[test]
fn shape_mismatch_is_refused() {
    let gt = Array3::<f64>::zeros((2, 12, 2));
    let pred = Array4::<f64>::zeros((2, 3, 11, 2));
    assert!(ade_fde(pred.view(), gt.view()).is_err());
}

proptest! {
    #[test]
    fn equals_the_enumeration_oracle((pred, gt) in batch()) {
        let m = ade_fde(pred.view(), gt.view()).unwrap();
        let (ade, fde) = oracle::best_of_s(&to_nested(&pred), &gt_nested(&gt));
        prop_assert!((m.ade - ade).abs() <= 1e-12 * ade.max(1.0));
        prop_assert!((m.fde - fde).abs() <= 1e-12 * fde.max(1.0));
        prop_assert!(m.ade >= 0.0 && m.fde >= 0.0);
    }

    #[test]
    fn more_samples_never_hurt((pred, gt) in batch()) {
        let s_count = pred.dim().1;
        let mut prev = ade_fde(pred.slice(s![.., ..1, .., ..]), gt.view()).unwrap();
        for s_used in 2..=s_count {
            let m = ade_fde(pred.slice(s![.., ..s_used, .., ..]), gt.view()).unwrap();
            prop_assert!(m.ade <= prev.ade && m.fde <= prev.fde);
            prev = m;
        }
    }

    #[test]
    fn single_sample_is_the_plain_error((pred, gt) in batch()) {
        let one = pred.slice(s![.., ..1, .., ..]);
        let per = best_of_s(one, gt.view()).unwrap();
        let t = gt.dim().1;
        for (i, m) in per.iter().enumerate() {
            let d: Vec<f64> = (0..t)
                .map(|k| {
                    ((one[[i, 0, k, 0]] - gt[[i, k, 0]]).powi(2)
                        + (one[[i, 0, k, 1]] - gt[[i, k, 1]]).powi(2))
                    .sqrt()
                })
                .collect();
            prop_assert!((m.ade - d.iter().sum::<f64>() / t as f64).abs() < 1e-12);
            prop_assert_eq!(m.fde, d[t - 1]);
        }
    }
}
