use graspkit::assignment::{hungarian, CostMatrix};
use graspkit::transport::{transport_plan, uniform_transport_cost};
use proptest::prelude::*;

/// Minimum over every injective map from the smaller side into the larger one.
fn brute_force(c: &CostMatrix) -> f64 {
    let (n, m) = (c.rows(), c.cols());
    let (small, large) = (n.min(m), n.max(m));
    let at = |i: usize, j: usize| if n <= m { c.get(i, j) } else { c.get(j, i) };
    let mut best = f64::INFINITY;
    let mut used = vec![false; large];
    fn rec(i: usize, small: usize, acc: f64, used: &mut [bool], best: &mut f64, at: &dyn Fn(usize, usize) -> f64) {
        if i == small {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                rec(i + 1, small, acc + at(i, j), used, best, at);
                used[j] = false;
            }
        }
    }
    rec(0, small, 0.0, &mut used, &mut best, &at);
    best
}

fn matrix(max: usize) -> impl Strategy<Value = CostMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(n, m)| {
        prop::collection::vec(0u32..20, n * m)
            .prop_map(move |v| CostMatrix::new(n, m, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn hungarian_is_optimal_and_valid(c in matrix(6)) {
        let a = hungarian(&c);
        prop_assert_eq!(a.pairs.len(), c.rows().min(c.cols()));
        let mut rows: Vec<usize> = a.pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), a.pairs.len());
        prop_assert_eq!(cols.len(), a.pairs.len());
        prop_assert_eq!(a.pairs.len() + a.unmatched_preds.len(), c.rows());
        prop_assert_eq!(a.total_cost(&c), brute_force(&c));
    }

    #[test]
    fn hungarian_is_deterministic(c in matrix(6)) {
        prop_assert_eq!(hungarian(&c), hungarian(&c));
    }

    #[test]
    fn transport_plan_is_balanced(c in matrix(6)) {
        let (n, m) = (c.rows(), c.cols());
        let plan = transport_plan(&c);
        let row_sums: Vec<u64> = (0..n).map(|i| plan[i * m..(i + 1) * m].iter().sum()).collect();
        let col_sums: Vec<u64> = (0..m).map(|j| (0..n).map(|i| plan[i * m + j]).sum()).collect();
        prop_assert!(row_sums.windows(2).all(|w| w[0] == w[1]));
        prop_assert!(col_sums.windows(2).all(|w| w[0] == w[1]));
        prop_assert!(uniform_transport_cost(&c) >= 0.0);
    }

    #[test]
    fn square_transport_equals_mean_assignment(n in 1usize..6, v in prop::collection::vec(0u32..50, 36)) {
        let c = CostMatrix::new(n, n, v[..n * n].iter().map(|&x| f64::from(x)).collect()).unwrap();
        let expect = brute_force(&c) / n as f64;
        prop_assert!((uniform_transport_cost(&c) - expect).abs() < 1e-9);
    }
}
