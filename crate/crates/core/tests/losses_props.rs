use graspkit::assignment::{hungarian, l1_cost_matrix};
use graspkit::geometry::PoseVector;
use graspkit::losses::{focal_loss, focal_loss_grad, l1_regression_grad, l1_regression_loss_vectors, masked_token_ce};
use proptest::prelude::*;

const H: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn focal_gradient_matches_central_differences(
        p in prop::collection::vec(0.02..0.98f64, 1..8),
        labels_seed in prop::collection::vec(0u8..2, 8),
        alpha in 0.05..0.95f64,
        gamma in 0.0..4.0f64,
    ) {
        let labels = &labels_seed[..p.len()];
        let grad = focal_loss_grad(&p, labels, alpha, gamma).unwrap();
        for i in 0..p.len() {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[i] += H;
            lo[i] -= H;
            let fd = (focal_loss(&hi, labels, alpha, gamma).unwrap() - focal_loss(&lo, labels, alpha, gamma).unwrap()) / (2.0 * H);
            prop_assert!(rel_err(grad[i], fd) < 1e-4, "i={i} analytic={} fd={fd}", grad[i]);
        }
    }

    #[test]
    fn focal_with_gamma_zero_is_weighted_ce(p in prop::collection::vec(0.01..0.99f64, 1..10), labels_seed in prop::collection::vec(0u8..2, 10)) {
        let labels = &labels_seed[..p.len()];
        let ce: f64 = p.iter().zip(labels).map(|(&q, &l)| -(if l == 1 { q } else { 1.0 - q }).ln()).sum::<f64>() / p.len() as f64;
        prop_assert!((focal_loss(&p, labels, 0.5, 0.0).unwrap() - 0.5 * ce).abs() < 1e-12);
    }

    #[test]
    fn l1_gradient_matches_central_differences(
        raw_p in prop::collection::vec(prop::array::uniform7(-0.9..0.9f64), 1..6),
        raw_g in prop::collection::vec(prop::array::uniform7(-0.9..0.9f64), 1..6),
    ) {
        let p: Vec<PoseVector> = raw_p.into_iter().map(PoseVector::from).collect();
        let g: Vec<PoseVector> = raw_g.into_iter().map(PoseVector::from).collect();
        let a = hungarian(&l1_cost_matrix(&p, &g));
        // keep away from the kinks of |x|
        for &(i, j) in &a.pairs {
            let (pa, ga) = (p[i].to_array(), g[j].to_array());
            prop_assume!(pa.iter().zip(ga).all(|(x, y)| (x - y).abs() > 1e-3));
        }
        let grad = l1_regression_grad(&p, &g, &a).unwrap();
        for i in 0..p.len() {
            for k in 0..7 {
                let shift = |d: f64| {
                    let mut q = p.clone();
                    let mut arr = q[i].to_array();
                    arr[k] += d;
                    q[i] = PoseVector::from(arr);
                    l1_regression_loss_vectors(&q, &g, &a).unwrap()
                };
                let fd = (shift(H) - shift(-H)) / (2.0 * H);
                prop_assert!((grad[i][k] - fd).abs() <= 1e-4 * grad[i][k].abs().max(fd.abs()).max(1e-8) + 1e-9);
            }
        }
    }

    #[test]
    fn masked_ce_ignores_zero_weight_tokens(
        logits in prop::collection::vec(prop::array::uniform4(0.05..1.0f64), 2..8),
        targets_seed in prop::collection::vec(0usize..4, 8),
    ) {
        let dists: Vec<Vec<f64>> = logits
            .iter()
            .map(|l| {
                let s: f64 = l.iter().sum();
                l.iter().map(|x| x / s).collect()
            })
            .collect();
        let targets = &targets_seed[..dists.len()];
        let mut weights = vec![1.0; dists.len()];
        weights[0] = 0.0;
        let full = masked_token_ce(&dists, targets, &weights).unwrap();
        let mut other = dists.clone();
        other[0] = vec![0.97, 0.01, 0.01, 0.01];
        prop_assert!((masked_token_ce(&other, targets, &weights).unwrap() - full).abs() < 1e-12);
    }
}
