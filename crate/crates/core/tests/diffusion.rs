use ndarray::{array, Array2, ArrayView2, ShapeBuilder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajspace::anchor::cluster_prototypes;
use trajspace::diffusion::{
    coords_to_world, fit, gaussian, make_schedule, sample, sample_with_noise, train_step, AdamW,
    Checkpoint, Conditions, DenoiserNet, DenoisingMode, NetConfig, NoisePredictor, NoiseSchedule,
    TrainConfig, TrainSet,
};
use trajspace::singular_space::to_ego;
use trajspace::Error;
use trajspace_oracles::checks::TrueNoise;
use trajspace_oracles::fixtures;

struct ZeroNet(usize);

impl NoisePredictor<f64> for ZeroNet {
    fn latent(&self) -> usize {
        self.0
    }

    fn predict_noise(
        &self,
        _: &Conditions<f64>,
        y: ArrayView2<'_, f64>,
        _: &[usize],
    ) -> trajspace::Result<Array2<f64>> {
        Ok(Array2::zeros(y.dim()))
    }
}

#[test]
fn zero_net_on_a_flat_schedule_returns_anchor_plus_noise() {
    let sched = NoiseSchedule::from_betas(vec![0.0; 10]).unwrap();
    let x = Array2::ones((3, 4));
    let anchors = Array2::from_shape_fn((3, 8), |(i, j)| (i * 8 + j) as f64);
    let noise = Array2::from_shape_fn((3, 8), |(i, j)| 0.1 * (i as f64 - j as f64));
    let groups = vec![0..2, 2..3];
    let out = sample_with_noise(
        &ZeroNet(8),
        x.view(),
        anchors.view(),
        &groups,
        noise.view(),
        &sched,
        DenoisingMode::Residual,
    )
    .unwrap();
    assert_eq!(out, &anchors + &noise);
}

#[test]
fn true_noise_recovers_the_ground_truth() {
    let sched = make_schedule(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let anchors = gaussian::<f64, _>(4, 8, &mut rng);
    let truth = gaussian::<f64, _>(4, 8, &mut rng);
    let oracle = TrueNoise {
        y0: &truth - &anchors,
        schedule: sched.clone(),
    };
    let noise = gaussian::<f64, _>(4, 8, &mut rng);
    let groups = vec![0..4];
    let out = sample_with_noise(
        &oracle,
        Array2::zeros((4, 4)).view(),
        anchors.view(),
        &groups,
        noise.view(),
        &sched,
        DenoisingMode::Residual,
    )
    .unwrap();
    let worst = (&out - &truth).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn untrained_net_is_refused() {
    let net = DenoiserNet::<f64>::new(NetConfig::new(4, 2).with_width(8, 2), 0).unwrap();
    let sched = make_schedule(10).unwrap();
    let err = sample_with_noise(
        &net,
        Array2::zeros((1, 4)).view(),
        Array2::zeros((1, 8)).view(),
        &[0..1],
        Array2::zeros((1, 8)).view(),
        &sched,
        DenoisingMode::Residual,
    );
    assert!(matches!(err, Err(Error::Untrained(_))));
}

fn trained_toy() -> DenoiserNet<f64> {
    let mut net = DenoiserNet::<f64>::new(NetConfig::new(4, 3).with_width(8, 2), 1).unwrap();
    net.trained = true;
    net
}

#[test]
fn sampling_shapes_and_determinism() {
    let space = fixtures::space(4);
    let net = trained_toy();
    let sched = make_schedule(10).unwrap();
    for n in [1usize, 3] {
        let x = Array2::from_elem((n, 4), 0.5);
        let anchors = Array2::from_elem((n, 12), 0.2);
        let groups = vec![0..n];
        let origins = vec![[1.0, 2.0]; n];
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(
                &net,
                x.view(),
                anchors.view(),
                &groups,
                &origins,
                &space,
                &sched,
                DenoisingMode::Residual,
                12,
                &mut rng,
            )
            .unwrap()
        };
        let a = run(9);
        assert_eq!(a.dim(), (n, 3, 12, 2));
        assert_eq!(a, run(9));
        assert_ne!(a, run(10));
    }
}

#[test]
fn independent_coupling_runs_each_anchor() {
    let mut net = DenoiserNet::<f64>::new(
        NetConfig::new(4, 3)
            .with_width(8, 2)
            .with_coupling(trajspace::diffusion::Coupling::Independent),
        1,
    )
    .unwrap();
    net.trained = true;
    let sched = make_schedule(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = gaussian::<f64, _>(2, 12, &mut rng);
    let out = sample_with_noise(
        &net,
        Array2::zeros((2, 4)).view(),
        Array2::zeros((2, 12)).view(),
        &[0..2],
        noise.view(),
        &sched,
        DenoisingMode::Residual,
    )
    .unwrap();
    assert_eq!(out.dim(), (2, 12));
}

#[test]
fn loss_of_zero_output_is_the_noise_second_moment() {
    // a net with all-zero parameters outputs zero
    let mut net = DenoiserNet::<f64>::new(NetConfig::new(4, 2).with_width(8, 2), 0).unwrap();
    for p in net.params.iter_mut() {
        p.fill(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = gaussian::<f64, _>(2000, 8, &mut rng);
    let cond = Conditions::singletons(Array2::zeros((2000, 4)), Array2::zeros((2000, 8)));
    let loss = net
        .loss(
            &cond,
            Array2::zeros((2000, 8)).view(),
            &vec![3; 2000],
            eps.view(),
        )
        .unwrap();
    let second: f64 = eps.iter().map(|e| e * e).sum::<f64>() / eps.len() as f64;
    assert!((loss - second).abs() < 1e-12);
    assert!((loss - 1.0).abs() < 0.05);
}

#[test]
fn non_finite_loss_aborts_training() {
    let mut net = DenoiserNet::<f64>::new(NetConfig::new(4, 1).with_width(8, 2), 0).unwrap();
    let mut opt = AdamW::new(1e-3, 0.0, &net.config.shapes());
    let set = TrainSet {
        x: array![[f64::NAN, 0.0, 0.0, 0.0]],
        anchors: Array2::zeros((1, 4)),
        y: Array2::zeros((1, 4)),
        groups: vec![0..1],
    };
    let sched = make_schedule(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err = train_step(
        &mut net,
        &mut opt,
        &sched,
        &set,
        DenoisingMode::Residual,
        &mut rng,
    );
    assert!(matches!(err, Err(Error::Training(_))));
}

/// One walker at constant velocity: history, future and the motion-space
/// coordinates of both.
fn constant_velocity_agent(
    space: &trajspace::singular_space::SingularSpace<f64>,
) -> (Array2<f64>, Array2<f64>, Vec<[f64; 2]>, [f64; 2]) {
    let pts: Vec<[f64; 2]> = (0..20)
        .map(|t| [1.0 + 0.4 * t as f64, -2.0 + 0.1 * t as f64])
        .collect();
    let origin = pts[7];
    let x = space.project_path(&to_ego(&pts[..8], origin)).unwrap();
    let y = space.project_path(&to_ego(&pts[8..], origin)).unwrap();
    (
        x.insert_axis(ndarray::Axis(0)),
        y.insert_axis(ndarray::Axis(0)),
        pts[8..].to_vec(),
        origin,
    )
}

#[test]
fn overfits_a_single_constant_velocity_agent() {
    let space = fixtures::space(4);
    let (x, y, truth, origin) = constant_velocity_agent(&space);
    // the S=1 prototype of a one-agent training set is that agent's future;
    // shift it so there is still a residual to learn
    let mut anchor = cluster_prototypes(y.view(), 1, 0).unwrap();
    anchor.prototypes += &array![[0.6, -0.4, 0.3, 0.2]];
    // copies of the one agent so each update averages over many noise draws
    let copies = 128;
    let tile =
        |a: &Array2<f64>| ndarray::concatenate(ndarray::Axis(0), &vec![a.view(); copies]).unwrap();
    let set = TrainSet {
        x: tile(&x),
        anchors: tile(&anchor.prototypes),
        y: tile(&y),
        groups: (0..copies).map(|i| i..i + 1).collect(),
    };
    let sched = make_schedule(10).unwrap();
    let mut net = DenoiserNet::<f64>::new(NetConfig::new(4, 1).with_width(64, 4), 3).unwrap();
    // a fast stage then a slow one to settle
    let mut first = f64::NAN;
    let mut last = f64::NAN;
    for (lr, epochs, seed) in [(3e-3, 1500, 1), (3e-4, 1500, 2)] {
        let cfg = TrainConfig {
            lr,
            epochs,
            weight_decay: 0.0,
            seed,
            ..TrainConfig::default()
        };
        let report = fit(&mut net, &set, &sched, &cfg).unwrap();
        if first.is_nan() {
            first = report.epoch_loss[0];
        }
        last = *report.epoch_loss.last().unwrap();
    }
    assert!(last < first);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let out = sample(
            &net,
            x.view(),
            anchor.prototypes.view(),
            &[0..1],
            &[origin],
            &space,
            &sched,
            DenoisingMode::Residual,
            12,
            &mut rng,
        )
        .unwrap();
        let ade = (0..12)
            .map(|t| {
                ((out[[0, 0, t, 0]] - truth[t][0]).powi(2)
                    + (out[[0, 0, t, 1]] - truth[t][1]).powi(2))
                .sqrt()
            })
            .sum::<f64>()
            / 12.0;
        worst = worst.max(ade);
    }
    // the basis itself limits how exactly a path can be represented
    let coords = space.project_path(&to_ego(&truth, origin)).unwrap();
    let floor = coords_to_world(
        coords.insert_axis(ndarray::Axis(0)).view(),
        &space,
        &[origin],
        12,
    )
    .unwrap();
    let floor_ade = (0..12)
        .map(|t| {
            ((floor[[0, 0, t, 0]] - truth[t][0]).powi(2)
                + (floor[[0, 0, t, 1]] - truth[t][1]).powi(2))
            .sqrt()
        })
        .sum::<f64>()
        / 12.0;
    assert!(worst < 0.05, "ADE {worst} (basis floor {floor_ade})");
}

#[test]
fn checkpoint_round_trip() {
    let mut net = trained_toy();
    net.feature_scale = 2.5;
    let ck = Checkpoint::new(
        net,
        make_schedule(10).unwrap(),
        DenoisingMode::Residual,
        TrainConfig::default(),
        "space.json".into(),
        "abc".into(),
    );
    let dir = std::env::temp_dir().join(format!("trajspace-ck-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ck.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::<f64>::load(&path).unwrap();
    assert_eq!(back.net.params, ck.net.params);
    assert_eq!(back.net.feature_scale, 2.5);
    assert!(back.net.trained);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn world_paths_do_not_depend_on_memory_order() {
    let space = fixtures::space(4);
    let coords = fixtures::future_coords(&space, 3, 6)
        .into_shape_with_order((3, 8))
        .unwrap();
    let origins = [[1.0, 2.0], [-3.0, 0.5], [0.0, 0.0]];
    let c_order = coords_to_world(coords.view(), &space, &origins, 12).unwrap();
    let mut f_order = Array2::zeros((3, 8).f());
    f_order.assign(&coords);
    let from_f = coords_to_world(f_order.view(), &space, &origins, 12).unwrap();
    assert_eq!(c_order, from_f);
    let transposed = coords.t().to_owned();
    let from_view = coords_to_world(transposed.t(), &space, &origins, 12).unwrap();
    assert_eq!(c_order, from_view);
}
