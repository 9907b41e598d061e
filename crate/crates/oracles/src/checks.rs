//! Library-versus-oracle comparisons. Each returns a [`Check`] so the same
//! code backs the unit-level tests and the acceptance gate.

use std::fmt::Write as _;

use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trajspace::anchor::{
    adapt_anchors, anchor_paths, build_vector_field, cluster_prototypes, AdaptConfig,
    TraversabilityMap,
};
use trajspace::diffusion::{
    ddim_step, denoise, forward_diffuse, make_schedule, Conditions, DenoiserNet, NetConfig,
    NoisePredictor, NoiseSchedule,
};
use trajspace::linalg::{orthonormality_error, svd};
use trajspace::singular_space::{bspline_matrix, channel_block};

use crate::{clustering, fixtures, grid, numerics, spline};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Singular values against eigenvalues of AᵀA, the Eckart–Young residual
/// for every truncation, and orthonormality of the right factor.
pub fn svd_against_eigen() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = vec![
        gaussian(40, 24, &mut rng),
        gaussian(9, 24, &mut rng),
        gaussian(24, 6, &mut rng),
    ];
    cases.push(gaussian(30, 3, &mut rng).dot(&gaussian(3, 8, &mut rng)));
    let gists = trajspace::singular_space::build_gists(
        &fixtures::tracks(3, 40, 24),
        12,
        trajspace::singular_space::GistFrame::PrecedingPoint,
        1,
    )
    .expect("gists");
    cases.push(gists.rows);
    let mut worst_sigma: f64 = 0.0;
    let mut worst_ey: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    for a in &cases {
        let n = a.ncols();
        let ata = numerics::naive_matmul(&numerics::naive_transpose(a), a);
        let (lambda, _) = numerics::jacobi_eigen(&ata);
        let dec = svd(a.view());
        let top = lambda[0].max(1.0);
        for i in 0..n {
            worst_sigma = worst_sigma.max((dec.sigma[i].powi(2) - lambda[i].max(0.0)).abs() / top);
        }
        let fro2: f64 = a.iter().map(|x| x * x).sum::<f64>().max(1.0);
        for k in 1..n {
            let vk = dec.v.slice(s![.., ..k]).to_owned();
            let approx = numerics::naive_matmul(
                &numerics::naive_matmul(a, &vk),
                &numerics::naive_transpose(&vk),
            );
            let resid: f64 = (a - &approx).iter().map(|x| x * x).sum();
            let tail: f64 = lambda[k..].iter().map(|l| l.max(0.0)).sum();
            worst_ey = worst_ey.max((resid - tail).abs() / fro2);
        }
        worst_orth = worst_orth.max(orthonormality_error(dec.v.view()));
    }
    let space = fixtures::space(4);
    worst_orth = worst_orth.max(orthonormality_error(space.basis().view()));
    let passed = worst_sigma < 1e-8 && worst_ey < 1e-8 && worst_orth < 1e-8;
    Check::new(
        "svd_eckart_young",
        passed,
        format!("sigma² vs eigen {worst_sigma:.2e}, truncation residual {worst_ey:.2e}, orthonormality {worst_orth:.2e} (tol 1e-8)"),
    )
}

/// Resampling matrix against interpolate-then-evaluate with de Boor, plus
/// partition of unity and the identity at the window length.
pub fn bspline_against_de_boor() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_curve: f64 = 0.0;
    let mut worst_unity: f64 = 0.0;
    for t_win in [3, 4, 6, 8, 12] {
        for target in [2, 3, 5, 8, 12, 17, 30] {
            let block = channel_block::<f64>(target, t_win).expect("block");
            for row in block.rows() {
                worst_unity = worst_unity.max((row.sum() - 1.0).abs());
            }
            for _ in 0..3 {
                let values: Vec<f64> = (0..t_win).map(|_| rng.random_range(-5.0..5.0)).collect();
                let ours = block.dot(&ndarray::Array1::from(values.clone()));
                let theirs = spline::resample(&values, target);
                for (a, b) in ours.iter().zip(&theirs) {
                    worst_curve = worst_curve.max((a - b).abs());
                }
            }
        }
    }
    let c = bspline_matrix::<f64>(12, 12).expect("identity case");
    let id = max_abs_diff(&c, &Array2::eye(24));
    let passed = worst_curve < 1e-9 && worst_unity < 1e-9 && id < 1e-6;
    Check::new(
        "bspline_resampling",
        passed,
        format!("de Boor {worst_curve:.2e}, row sums {worst_unity:.2e} (tol 1e-9), identity at 12 {id:.2e} (tol 1e-6)"),
    )
}

/// Projection and reconstruction against naive products at the window
/// length and against normal equations at length 8.
pub fn projection_against_naive() -> Check {
    let space = fixtures::space(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch = gaussian(16, 24, &mut rng);
    let v = space.basis().clone();
    let proj = space.project(batch.view(), 12).expect("project");
    let d_proj = max_abs_diff(&proj, &numerics::naive_matmul(&batch, &v));
    let coords = gaussian(16, 4, &mut rng);
    let recon = space.reconstruct(coords.view(), 12).expect("reconstruct");
    let d_recon = max_abs_diff(
        &recon,
        &numerics::naive_matmul(&coords, &numerics::naive_transpose(&v)),
    );

    // length 8: basis resampled channel by channel through the spline oracle
    let t = 8;
    let mut b = Array2::zeros((2 * t, 4));
    for j in 0..4 {
        for ch in 0..2 {
            let vals: Vec<f64> = (0..12).map(|i| v[[2 * i + ch, j]]).collect();
            for (i, x) in spline::resample(&vals, t).into_iter().enumerate() {
                b[[2 * i + ch, j]] = x;
            }
        }
    }
    let batch8 = gaussian(6, 2 * t, &mut rng);
    let ours = space.project(batch8.view(), t).expect("project 8");
    let bt = numerics::naive_transpose(&b);
    let normal = numerics::naive_matmul(&bt, &b);
    let mut d_ls: f64 = 0.0;
    for (r, row) in batch8.rows().into_iter().enumerate() {
        let rhs: Vec<f64> = (0..4)
            .map(|j| (0..2 * t).map(|i| b[[i, j]] * row[i]).sum())
            .collect();
        let c = numerics::gauss_solve(&normal, &rhs);
        for j in 0..4 {
            d_ls = d_ls.max((c[j] - ours[[r, j]]).abs());
        }
    }
    let passed = d_proj < 1e-10 && d_recon < 1e-10 && d_ls < 1e-8;
    Check::new(
        "projection",
        passed,
        format!("project {d_proj:.2e}, reconstruct {d_recon:.2e} (tol 1e-10), length-8 least squares {d_ls:.2e} (tol 1e-8)"),
    )
}

/// Two clusters against exhaustive enumeration of all 2-partitions.
pub fn kmeans_against_enumeration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for trial in 0..3 {
        let mut pts = gaussian(20, 4, &mut rng);
        for i in 0..10 {
            pts[[i, 0]] += 6.0 + trial as f64;
        }
        let anchors = cluster_prototypes(pts.view(), 2, 99 + trial).expect("kmeans");
        let mut ours: Vec<Vec<f64>> = anchors
            .prototypes
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        ours.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (theirs, _) = clustering::exhaustive_two_means(&pts);
        for (a, b) in ours.iter().zip(&theirs) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    Check::new(
        "kmeans_two_means",
        worst < 1e-6,
        format!("centroid deviation {worst:.2e} (tol 1e-6)"),
    )
}

fn field_matches(grid_: &Array2<bool>) -> bool {
    let map = TraversabilityMap::new(
        grid_.clone(),
        TraversabilityMap::scaled_homography(0.5, [1.0, -2.0]),
    )
    .expect("map");
    let field = build_vector_field(&map).expect("field");
    let truth = grid::brute_nearest(grid_);
    if field.nearest != truth {
        return false;
    }
    truth.indexed_iter().all(|((r, c), &(r2, c2))| {
        let a = map.cell_world(r, c);
        let b = map.cell_world(r2, c2);
        let expect = if (r, c) == (r2, c2) {
            [0.0, 0.0]
        } else {
            [b[0] - a[0], b[1] - a[1]]
        };
        field.at_cell(r, c) == expect && ((r, c) == (r2, c2)) == grid_[[r, c]]
    })
}

/// Vector field equals the exhaustive search: every grid with at most 12
/// cells, seeded random grids of every shape up to 10×10, and a square hole.
pub fn field_against_brute_force() -> Check {
    let mut checked = 0usize;
    let mut failed = Vec::new();
    for h in 1..=10usize {
        for w in 1..=10usize {
            if h * w > 12 {
                continue;
            }
            for bits in 1u32..(1 << (h * w)) {
                let g = Array2::from_shape_fn((h, w), |(r, c)| bits & (1 << (r * w + c)) != 0);
                checked += 1;
                if !field_matches(&g) {
                    failed.push(format!("{h}x{w}#{bits}"));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for h in 1..=10usize {
        for w in 1..=10usize {
            for trial in 0..12 {
                let density = [0.05, 0.2, 0.5, 0.8][trial % 4];
                let mut g = Array2::from_shape_simple_fn((h, w), || rng.random::<f64>() < density);
                if !g.iter().any(|&v| v) {
                    g[[rng.random_range(0..h), rng.random_range(0..w)]] = true;
                }
                checked += 1;
                if !field_matches(&g) {
                    failed.push(format!("random {h}x{w}"));
                }
            }
        }
    }
    let mut hole = Array2::from_elem((7, 7), true);
    hole.slice_mut(s![2..5, 2..5]).fill(false);
    checked += 1;
    if !field_matches(&hole) {
        failed.push("7x7 hole".into());
    }
    let mut detail = format!("{checked} grids, {} mismatches", failed.len());
    if !failed.is_empty() {
        let _ = write!(detail, " (first: {})", failed[0]);
    }
    Check::new("vector_field_exact", failed.is_empty(), detail)
}

/// Adaptation: identity on an open map, idempotent at equilibrium,
/// equivariant under translating map and origin together, shape-preserving.
pub fn adaptation_properties() -> Check {
    let space = fixtures::space(4);
    let coords = fixtures::future_coords(&space, 21, 120);
    let anchors = cluster_prototypes(coords.view(), 20, 3).expect("anchors");
    let map = fixtures::obstacle_map();
    let field = build_vector_field(&map).expect("field");
    let cfg = AdaptConfig::default();

    let open = TraversabilityMap::new(
        Array2::from_elem((50, 50), true),
        TraversabilityMap::scaled_homography(1.0, [-25.0, -25.0]),
    )
    .expect("open map");
    let open_field = build_vector_field(&open).expect("open field");
    let same = adapt_anchors(&anchors, &open_field, &space, [0.3, -0.2], &cfg).expect("adapt");
    let identity = same.prototypes == anchors.prototypes;

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst_idem: f64 = 0.0;
    let mut worst_equiv: f64 = 0.0;
    let mut converged = 0;
    let mut trials = 0;
    let mut shapes = true;
    let offset = [3.25, -1.5];
    let moved = map.translated(offset);
    let moved_field = build_vector_field(&moved).expect("moved field");
    for _ in 0..12 {
        let origin = [rng.random_range(-1.0..4.0), rng.random_range(-3.0..3.0)];
        let once = adapt_anchors(&anchors, &field, &space, origin, &cfg).expect("adapt");
        shapes &= once.prototypes.dim() == anchors.prototypes.dim();
        let settled: Vec<usize> = (0..anchors.s())
            .filter(|i| !once.stalled.contains(i))
            .collect();
        converged += settled.len();
        trials += anchors.s();
        if !settled.is_empty() {
            let twice = adapt_anchors(&once, &field, &space, origin, &cfg).expect("adapt twice");
            let a = anchor_paths(&once, &space, origin, 12)
                .expect("paths")
                .select(Axis(0), &settled);
            let b = anchor_paths(&twice, &space, origin, 12)
                .expect("paths")
                .select(Axis(0), &settled);
            worst_idem = worst_idem.max(max_abs_diff(&a, &b));
        }
        let shifted = adapt_anchors(
            &anchors,
            &moved_field,
            &space,
            [origin[0] + offset[0], origin[1] + offset[1]],
            &cfg,
        )
        .expect("adapt shifted");
        worst_equiv = worst_equiv.max(max_abs_diff(&once.prototypes, &shifted.prototypes));
    }
    let passed = identity && shapes && converged > 0 && worst_idem <= 1e-3 && worst_equiv < 1e-9;
    Check::new(
        "anchor_adaptation",
        passed,
        format!(
            "open-map identity {identity}, idempotence {worst_idem:.2e} m over {converged}/{trials} settled anchors (tol 1e-3), translation {worst_equiv:.2e}"
        ),
    )
}

/// Noise predictor that knows the true noise.
pub struct TrueNoise {
    pub y0: Array2<f64>,
    pub schedule: NoiseSchedule,
}

impl NoisePredictor<f64> for TrueNoise {
    fn latent(&self) -> usize {
        self.y0.ncols()
    }

    fn predict_noise(
        &self,
        _: &Conditions<f64>,
        y: ndarray::ArrayView2<'_, f64>,
        steps: &[usize],
    ) -> trajspace::Result<Array2<f64>> {
        let mut out = Array2::zeros(y.dim());
        for (i, &m) in steps.iter().enumerate() {
            let ab = self.schedule.alpha_bar(m);
            for j in 0..y.ncols() {
                out[[i, j]] = (y[[i, j]] - ab.sqrt() * self.y0[[i, j]]) / (1.0 - ab).sqrt();
            }
        }
        Ok(out)
    }
}

/// Forward corruption then the deterministic reverse step with the same
/// noise returns the previous state; a predictor that knows the noise
/// walks the whole chain back to y0.
pub fn ddim_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let y0 = gaussian(5, 8, &mut rng).mapv(|v| 3.0 * v);
    let eps = gaussian(5, 8, &mut rng);
    let mut worst_step: f64 = 0.0;
    let mut worst_chain: f64 = 0.0;
    for m_total in [1, 2, 5, 10, 25] {
        let sched = make_schedule(m_total).expect("schedule");
        for m in 1..=m_total {
            let ym = forward_diffuse(y0.view(), m, eps.view(), &sched).expect("forward");
            let back = ddim_step(ym.view(), eps.view(), m, &sched).expect("reverse");
            let want = if m == 1 {
                y0.clone()
            } else {
                forward_diffuse(y0.view(), m - 1, eps.view(), &sched).expect("forward")
            };
            worst_step = worst_step.max(max_abs_diff(&back, &want));
        }
        let oracle = TrueNoise {
            y0: y0.clone(),
            schedule: sched.clone(),
        };
        let cond = Conditions::singletons(Array2::zeros((5, 1)), Array2::zeros((5, 8)));
        let start = gaussian(5, 8, &mut rng);
        let out = denoise(&oracle, &cond, start, &sched).expect("chain");
        worst_chain = worst_chain.max(max_abs_diff(&out, &y0));
    }
    let passed = worst_step < 1e-6 && worst_chain < 1e-6;
    Check::new(
        "ddim_round_trip",
        passed,
        format!(
            "per-step {worst_step:.2e}, full chain with true noise {worst_chain:.2e} (tol 1e-6)"
        ),
    )
}

/// Cumulative products against a direct loop; sample variance of the
/// corrupted latent against 1 − ᾱ_m.
pub fn schedule_statistics() -> Check {
    let sched = make_schedule(10).expect("schedule");
    let mut worst: f64 = 0.0;
    for m in 1..=10 {
        let mut prod = 1.0;
        for i in 0..m {
            prod *= 1.0 - (1e-4 + (0.05 - 1e-4) * i as f64 / 9.0);
        }
        worst = worst.max((prod - sched.alpha_bar(m)).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 100_000;
    let y0 = Array2::zeros((n, 1));
    let noise = gaussian(n, 1, &mut rng);
    let mut z_worst: f64 = 0.0;
    for m in [1, 5, 10] {
        let ym = forward_diffuse(y0.view(), m, noise.view(), &sched).expect("forward");
        let mean = ym.mean().unwrap();
        let var = ym.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = 1.0 - sched.alpha_bar(m);
        // standard error of a Gaussian sample variance
        let se = target * (2.0 / (n - 1) as f64).sqrt();
        z_worst = z_worst.max((var - target).abs() / se);
    }
    let passed = worst < 1e-12 && z_worst < 3.0;
    Check::new(
        "noise_schedule",
        passed,
        format!("product {worst:.2e} (tol 1e-12), variance deviation {z_worst:.2} sigma (tol 3)"),
    )
}

/// Tiny net plus a two-group batch for gradient tests.
pub fn toy_problem(
    seed: u64,
) -> (
    DenoiserNet<f64>,
    Conditions<f64>,
    Array2<f64>,
    Vec<usize>,
    Array2<f64>,
) {
    let mut net = DenoiserNet::new(
        NetConfig {
            time_dim: 4,
            ..NetConfig::new(3, 2).with_width(8, 2)
        },
        seed,
    )
    .expect("net");
    net.feature_scale = 1.7;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    // perturb biases away from zero so every path carries gradient
    for p in net.params.iter_mut() {
        p.mapv_inplace(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal));
    }
    let cond = Conditions {
        x: gaussian(5, 3, &mut rng),
        p: gaussian(5, 6, &mut rng),
        groups: vec![0..3, 3..5],
    };
    let y = gaussian(5, 6, &mut rng);
    let steps = vec![1, 4, 2, 10, 7];
    let target = gaussian(5, 6, &mut rng);
    (net, cond, y, steps, target)
}

/// Worst relative error over gradients above 1e-6 and worst absolute error
/// below it, plus how many entries were checked.
fn finite_difference_errors(
    net: &mut DenoiserNet<f64>,
    cond: &Conditions<f64>,
    y: &Array2<f64>,
    steps: &[usize],
    target: &Array2<f64>,
) -> (f64, f64, usize) {
    let (_, grads) = net
        .loss_and_grad(cond, y.view(), steps, target.view())
        .expect("grad");
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;
    let mut worst_abs_small: f64 = 0.0;
    let mut count = 0;
    for pi in 0..net.params.len() {
        for idx in 0..net.params[pi].len() {
            let (r, c) = (idx / net.params[pi].ncols(), idx % net.params[pi].ncols());
            let orig = net.params[pi][[r, c]];
            net.params[pi][[r, c]] = orig + h;
            let up = net
                .loss(cond, y.view(), steps, target.view())
                .expect("loss");
            net.params[pi][[r, c]] = orig - h;
            let down = net
                .loss(cond, y.view(), steps, target.view())
                .expect("loss");
            net.params[pi][[r, c]] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[pi][[r, c]];
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-6 {
                worst_rel = worst_rel.max((analytic - numeric).abs() / scale);
            } else {
                worst_abs_small = worst_abs_small.max((analytic - numeric).abs());
            }
            count += 1;
        }
    }
    (worst_rel, worst_abs_small, count)
}

/// Analytic gradients against central finite differences on every
/// parameter of a width-8 net, with the raw head and with the
/// step-normalised head.
pub fn gradient_check() -> Check {
    let (mut net, cond, y, steps, target) = toy_problem(41);
    let (rel_raw, abs_raw, count) = finite_difference_errors(&mut net, &cond, &y, &steps, &target);
    let mut net = net.with_schedule(&make_schedule(10).expect("schedule"));
    net.data_sd = 0.4;
    let (rel_pre, abs_pre, _) = finite_difference_errors(&mut net, &cond, &y, &steps, &target);
    let worst_rel = rel_raw.max(rel_pre);
    let worst_abs_small = abs_raw.max(abs_pre);
    let passed = worst_rel < 1e-4 && worst_abs_small < 1e-9;
    Check::new(
        "gradient_finite_difference",
        passed,
        format!(
            "{count} parameters twice, worst relative error {rel_raw:.2e} raw / {rel_pre:.2e} normalised (tol 1e-4), tiny-gradient abs {worst_abs_small:.1e}"
        ),
    )
}

/// A small step against the gradient lowers the loss on a frozen replay.
pub fn descent_step() -> Check {
    let (mut net, cond, y, steps, target) = toy_problem(43);
    let (before, grads) = net
        .loss_and_grad(&cond, y.view(), &steps, target.view())
        .expect("grad");
    let norm2: f64 = grads.iter().flat_map(|g| g.iter()).map(|g| g * g).sum();
    let lr = 1e-3;
    for (p, g) in net.params.iter_mut().zip(&grads) {
        p.scaled_add(-lr, g);
    }
    let after = net
        .loss(&cond, y.view(), &steps, target.view())
        .expect("loss");
    // first-order prediction of the decrease
    let predicted = lr * norm2;
    let actual = before - after;
    let passed = after < before && (actual - predicted).abs() < 0.1 * predicted;
    Check::new(
        "descent_step",
        passed,
        format!(
            "loss {before:.6} → {after:.6}, decrease {actual:.3e} vs first-order {predicted:.3e}"
        ),
    )
}

/// Reordering agents (within and across groups) reorders outputs the same way.
pub fn permutation_equivariance() -> Check {
    let (net, cond, y, steps, _) = toy_problem(47);
    let out = net.forward(&cond, y.view(), &steps).expect("forward");
    // new row order: second group first, each group internally shuffled
    let order = [4usize, 3, 2, 0, 1];
    let permuted = Conditions {
        x: cond.x.select(Axis(0), &order),
        p: cond.p.select(Axis(0), &order),
        groups: vec![0..2, 2..5],
    };
    let steps_p: Vec<usize> = order.iter().map(|&i| steps[i]).collect();
    let out_p = net
        .forward(&permuted, y.select(Axis(0), &order).view(), &steps_p)
        .expect("forward");
    let worst = max_abs_diff(&out_p, &out.select(Axis(0), &order));
    Check::new(
        "permutation_equivariance",
        worst < 1e-12,
        format!("max deviation {worst:.2e}"),
    )
}

/// Everything above, in a fixed order.
pub fn property_suite() -> Vec<Check> {
    vec![
        svd_against_eigen(),
        bspline_against_de_boor(),
        projection_against_naive(),
        kmeans_against_enumeration(),
        field_against_brute_force(),
        adaptation_properties(),
        schedule_statistics(),
        ddim_round_trip(),
        gradient_check(),
        descent_step(),
        permutation_equivariance(),
    ]
}
