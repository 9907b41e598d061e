//! Best-of-S displacement errors by explicit enumeration.

/// `pred[agent][sample][t]`, `gt[agent][t]`. ADE and FDE each pick their
/// own best sample.
pub fn best_of_s(pred: &[Vec<Vec<[f64; 2]>>], gt: &[Vec<[f64; 2]>]) -> (f64, f64) {
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut ade_sum = 0.0;
    let mut fde_sum = 0.0;
    for (samples, truth) in pred.iter().zip(gt) {
        let mut best_ade = f64::INFINITY;
        let mut best_fde = f64::INFINITY;
        for path in samples {
            let mut total = 0.0;
            for t in 0..truth.len() {
                total += dist(path[t], truth[t]);
            }
            let ade = total / truth.len() as f64;
            let fde = dist(path[truth.len() - 1], truth[truth.len() - 1]);
            if ade < best_ade {
                best_ade = ade;
            }
            if fde < best_fde {
                best_fde = fde;
            }
        }
        ade_sum += best_ade;
        fde_sum += best_fde;
    }
    (ade_sum / gt.len() as f64, fde_sum / gt.len() as f64)
}
