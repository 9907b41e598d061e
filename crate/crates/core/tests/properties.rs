use ndarray::Array2;
use proptest::prelude::*;
use trajspace::anchor::{build_vector_field, cluster_prototypes, TraversabilityMap};
use trajspace::dataset::{subsample_windows, TrajectoryWindow};
use trajspace::diffusion::{ddim_step, forward_diffuse, make_schedule};
use trajspace::singular_space::{build_gists, channel_block, GistFrame};
use trajspace_oracles::{fixtures, grid};

fn small_grid() -> impl Strategy<Value = Array2<bool>> {
    (1usize..=10, 1usize..=10)
        .prop_flat_map(|(h, w)| {
            (
                Just((h, w)),
                proptest::collection::vec(any::<bool>(), h * w),
                0..h * w,
            )
        })
        .prop_map(|((h, w), cells, force)| {
            let mut g = Array2::from_shape_vec((h, w), cells).unwrap();
            g.as_slice_mut().unwrap()[force] = true;
            g
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_equals_exhaustive_search(g in small_grid()) {
        let map = TraversabilityMap::<f64>::new(g.clone(), TraversabilityMap::identity_homography()).unwrap();
        let field = build_vector_field(&map).unwrap();
        prop_assert_eq!(&field.nearest, &grid::brute_nearest(&g));
        for ((r, c), &t) in g.indexed_iter() {
            let f = field.at_cell(r, c);
            prop_assert_eq!(f == [0.0, 0.0], t);
        }
    }

    #[test]
    fn field_lands_on_walkable_cells(g in small_grid()) {
        let h = TraversabilityMap::scaled_homography(0.25, [2.0, -1.0]);
        let map = TraversabilityMap::new(g, h).unwrap();
        let field = build_vector_field(&map).unwrap();
        for r in 0..map.height() {
            for c in 0..map.width() {
                let p = map.cell_world(r, c);
                let f = field.at_cell(r, c);
                prop_assert!(map.is_traversable([p[0] + f[0], p[1] + f[1]]));
            }
        }
    }

    #[test]
    fn resampling_rows_are_a_partition_of_unity(target in 2usize..40, t_win in 2usize..20) {
        let b = channel_block::<f64>(target, t_win).unwrap();
        for row in b.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projecting_a_reconstruction_recovers_coordinates(
        c in proptest::collection::vec(-5.0f64..5.0, 4),
        len in 4usize..30,
    ) {
        let space = fixtures::space(4);
        let coords = Array2::from_shape_vec((1, 4), c.clone()).unwrap();
        let path = space.reconstruct(coords.view(), len).unwrap();
        let back = space.project(path.view(), len).unwrap();
        for (a, b) in back.iter().zip(&c) {
            prop_assert!((a - b).abs() < 1e-7, "{a} vs {b} at length {len}");
        }
    }

    #[test]
    fn gists_ignore_where_the_track_is(dx in -50.0f64..50.0, dy in -50.0f64..50.0, seed in 0u64..1000) {
        let tracks = fixtures::tracks(seed, 3, 16);
        let shifted: Vec<_> = tracks
            .iter()
            .map(|t| t.iter().map(|p| [p[0] + dx, p[1] + dy]).collect::<Vec<_>>())
            .collect();
        for frame in [GistFrame::FirstPoint, GistFrame::PrecedingPoint] {
            let a = build_gists(&tracks, 12, frame, 1).unwrap();
            let b = build_gists(&shifted, 12, frame, 1).unwrap();
            for (x, y) in a.rows.iter().zip(b.rows.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn clustering_keeps_shape_and_is_seeded(n in 3usize..30, s in 1usize..4, seed in 0u64..50) {
        let pts = Array2::from_shape_fn((n, 4), |(i, j)| ((i * 13 + j * 7 + seed as usize) % 17) as f64 * 0.3);
        let a = cluster_prototypes(pts.view(), s.min(n), seed).unwrap();
        let b = cluster_prototypes(pts.view(), s.min(n), seed).unwrap();
        prop_assert_eq!(a.prototypes.dim(), (s.min(n), 4));
        prop_assert_eq!(a.prototypes, b.prototypes);
    }

    #[test]
    fn reverse_step_undoes_forward_step(
        y0 in proptest::collection::vec(-10.0f64..10.0, 6),
        eps in proptest::collection::vec(-3.0f64..3.0, 6),
        total in 1usize..30,
        pick in 0usize..30,
    ) {
        let sched = make_schedule(total).unwrap();
        let m = 1 + pick % total;
        let y0 = Array2::from_shape_vec((2, 3), y0).unwrap();
        let eps = Array2::from_shape_vec((2, 3), eps).unwrap();
        let ym = forward_diffuse(y0.view(), m, eps.view(), &sched).unwrap();
        let back = ddim_step(ym.view(), eps.view(), m, &sched).unwrap();
        let want = if m == 1 { y0.clone() } else { forward_diffuse(y0.view(), m - 1, eps.view(), &sched).unwrap() };
        for (a, b) in back.iter().zip(want.iter()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn few_shot_keeps_floor_of_fraction(n in 0usize..400, frac in 0.01f64..1.0, seed in 0u64..100) {
        let windows: Vec<TrajectoryWindow<f64>> = (0..n)
            .map(|i| TrajectoryWindow {
                scene_id: "s".into(),
                ped_id: i as i64,
                start_frame: 0,
                hist: vec![[0.0, 0.0]; 2],
                fut: vec![[0.0, 0.0]; 2],
                neighbors: vec![],
            })
            .collect();
        let kept = subsample_windows(windows, frac, seed);
        prop_assert_eq!(kept.len(), (frac * n as f64).floor() as usize);
    }
}

#[test]
fn stationary_agent_is_the_zero_coordinate() {
    let space = fixtures::space(4);
    let c = space.project_path(&vec![[0.0, 0.0]; 12]).unwrap();
    assert!(c.iter().all(|v| v.abs() < 1e-15), "{c}");
}
