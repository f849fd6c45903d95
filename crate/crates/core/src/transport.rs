//! Exact optimal transport between two uniform discrete distributions.
//!
//! Equal-size sets reduce to an assignment problem. For unequal sizes every
//! source carries `cols / g` units and every sink `rows / g` units
//! (`g = gcd(rows, cols)`), which represents the uniform masses exactly in
//! integers; the resulting transportation problem is solved with the
//! transportation simplex, falling back to successive shortest paths.

use crate::assignment::{hungarian, CostMatrix};

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Minimum expected cost of moving uniform mass over the rows onto uniform
/// mass over the columns. Returns 0 for an empty matrix.
///
/// Terms are summed in ascending order so that the transposed problem gives
/// the bit-identical value.
pub fn uniform_transport_cost(cost: &CostMatrix) -> f64 {
    let (n, m) = (cost.rows(), cost.cols());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let (terms, units) = if n == m {
        let assignment = hungarian(cost);
        let terms: Vec<f64> = assignment.pairs.iter().map(|&(i, j)| cost.get(i, j)).collect();
        (terms, n as f64)
    } else {
        let plan = transport_plan(cost);
        let terms: Vec<f64> = plan
            .iter()
            .enumerate()
            .filter(|(_, f)| **f > 0)
            .map(|(k, &f)| f as f64 * cost.get(k / m, k % m))
            .collect();
        (terms, (n / gcd(n, m) * m) as f64)
    };
    sorted_sum(terms) / units
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Residual network state shared by the shortest-path and blocking-flow steps.
struct Network<'a> {
    cost: &'a CostMatrix,
    n: usize,
    m: usize,
    supply: Vec<u64>,
    demand: Vec<u64>,
    flow: Vec<u64>,
    pot_src: Vec<f64>,
    pot_snk: Vec<f64>,
}

impl Network<'_> {
    fn reduced(&self, i: usize, j: usize) -> f64 {
        self.cost.get(i, j) + self.pot_src[i] - self.pot_snk[j]
    }

    /// Dijkstra over the whole residual graph from every source with supply.
    /// Returns distances, parents and the nearest sink with unmet demand.
    fn shortest_paths(&self) -> (Vec<f64>, Vec<usize>, Option<usize>) {
        let (n, m) = (self.n, self.m);
        let total = n + m;
        let mut dist = vec![f64::INFINITY; total];
        let mut parent = vec![usize::MAX; total];
        let mut done = vec![false; total];
        for i in 0..n {
            if self.supply[i] > 0 {
                dist[i] = 0.0;
            }
        }
        let mut target: Option<usize> = None;
        loop {
            let mut best = f64::INFINITY;
            let mut u = usize::MAX;
            for v in 0..total {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n {
                let j = u - n;
                if self.demand[j] > 0 && target.is_none() {
                    target = Some(u);
                }
                // residual backward edges j -> i carry existing flow
                for i in 0..n {
                    if done[i] || self.flow[i * m + j] == 0 {
                        continue;
                    }
                    let nd = dist[u] + (-self.reduced(i, j)).max(0.0);
                    if nd < dist[i] {
                        dist[i] = nd;
                        parent[i] = u;
                    }
                }
            } else {
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let nd = dist[u] + self.reduced(u, j).max(0.0);
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = u;
                    }
                }
            }
        }
        (dist, parent, target)
    }

    /// Pushes flow along the parent chain ending at sink node `t`.
    fn augment_path(&mut self, parent: &[usize], t: usize) {
        let (n, m) = (self.n, self.m);
        let mut bottleneck = self.demand[t - n];
        let mut v = t;
        let start = loop {
            let u = parent[v];
            if u == usize::MAX {
                break v;
            }
            if u >= n {
                // backward edge sink u -> source v cancels flow on (v, u)
                bottleneck = bottleneck.min(self.flow[v * m + (u - n)]);
            }
            v = u;
        };
        bottleneck = bottleneck.min(self.supply[start]);
        let mut v = t;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u < n {
                self.flow[u * m + (v - n)] += bottleneck;
            } else {
                self.flow[v * m + (u - n)] -= bottleneck;
            }
            v = u;
        }
        self.supply[start] -= bottleneck;
        self.demand[t - n] -= bottleneck;
    }
}

/// Successive shortest paths: exact and simple, but the number of
/// augmentations grows quickly with coprime set sizes.
fn shortest_path_plan(cost: &CostMatrix) -> Vec<u64> {
    let (n, m) = (cost.rows(), cost.cols());
    let g = gcd(n, m);
    let mut net = Network {
        cost,
        n,
        m,
        supply: vec![(m / g) as u64; n],
        demand: vec![(n / g) as u64; m],
        flow: vec![0; n * m],
        pot_src: vec![0.0; n],
        pot_snk: vec![0.0; m],
    };
    while net.supply.iter().any(|&s| s > 0) {
        let (dist, parent, target) = net.shortest_paths();
        let Some(t) = target else {
            // unreachable for complete bipartite graphs with balanced totals
            break;
        };
        let dt = dist[t];
        for i in 0..n {
            net.pot_src[i] += dist[i].min(dt);
        }
        for j in 0..m {
            net.pot_snk[j] += dist[n + j].min(dt);
        }
        net.augment_path(&parent, t);
    }
    net.flow
}

/// Spanning-tree basis of the transportation simplex. Nodes `0..n` are rows,
/// `n..n + m` are columns; every basic edge joins a row and a column.
struct Basis {
    n: usize,
    m: usize,
    edges: Vec<(usize, usize)>,
    flow: Vec<i64>,
    adjacency: Vec<Vec<usize>>,
    is_basic: Vec<bool>,
    parent_edge: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
}

impl Basis {
    fn other_end(&self, e: usize, node: usize) -> usize {
        let (i, j) = self.edges[e];
        if node == i {
            self.n + j
        } else {
            i
        }
    }

    /// Parent pointers, depths and duals (`u_i + v_j = c_ij` on the tree).
    fn refresh(&mut self, cost: &CostMatrix) {
        let total = self.n + self.m;
        self.parent_edge.iter_mut().for_each(|p| *p = usize::MAX);
        let mut seen = vec![false; total];
        let mut stack = vec![0usize];
        seen[0] = true;
        self.depth[0] = 0;
        self.potential[0] = 0.0;
        while let Some(u) = stack.pop() {
            for k in 0..self.adjacency[u].len() {
                let e = self.adjacency[u][k];
                let v = self.other_end(e, u);
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                self.parent_edge[v] = e;
                self.depth[v] = self.depth[u] + 1;
                let (i, j) = self.edges[e];
                let c = cost.get(i, j);
                self.potential[v] = c - self.potential[u];
                stack.push(v);
            }
        }
    }

    /// Tree edges from `a` to `b`, in walking order.
    fn path(&self, mut a: usize, mut b: usize) -> Vec<usize> {
        let mut front = Vec::new();
        let mut back = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                let e = self.parent_edge[a];
                front.push(e);
                a = self.other_end(e, a);
            } else {
                let e = self.parent_edge[b];
                back.push(e);
                b = self.other_end(e, b);
            }
        }
        front.extend(back.into_iter().rev());
        front
    }
}

/// Transportation simplex on integer masses `supply` / `demand`. Returns the
/// optimal basis edges, or `None` if the iteration budget runs out.
fn simplex_basis(cost: &CostMatrix, supply: &[i64], demand: &[i64]) -> Option<Vec<(usize, usize)>> {
    let (n, m) = (cost.rows(), cost.cols());
    // Orden's perturbation: +1 on every supply and +n on the last demand, with
    // the real masses scaled by n + 1, keeps every basis nondegenerate
    let k = n as i64 + 1;
    let mut s: Vec<i64> = supply.iter().map(|a| a * k + 1).collect();
    let mut d: Vec<i64> = demand.iter().map(|b| b * k).collect();
    d[m - 1] += n as i64;

    // northwest corner start
    let mut basis = Basis {
        n,
        m,
        edges: Vec::with_capacity(n + m - 1),
        flow: Vec::with_capacity(n + m - 1),
        adjacency: vec![Vec::new(); n + m],
        is_basic: vec![false; n * m],
        parent_edge: vec![usize::MAX; n + m],
        depth: vec![0; n + m],
        potential: vec![0.0; n + m],
    };
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]);
        let e = basis.edges.len();
        basis.edges.push((i, j));
        basis.flow.push(x);
        basis.adjacency[i].push(e);
        basis.adjacency[n + j].push(e);
        basis.is_basic[i * m + j] = true;
        s[i] -= x;
        d[j] -= x;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if s[i] == 0 && i + 1 < n {
            i += 1;
        } else {
            j += 1;
        }
    }
    if basis.edges.len() != n + m - 1 {
        return None;
    }
    basis.refresh(cost);

    let tol = 1e-12 * cost.values_max().max(1.0);
    let cells = n * m;
    let block = ((cells as f64).sqrt() as usize).max(16).min(cells);
    let budget = 50 * (n + m) * (n + m) + 1000;
    let mut cursor = 0;
    for _ in 0..budget {
        // block pricing: best candidate in the next block with a negative
        // reduced cost, scanning at most one full sweep
        let mut entering = None;
        let mut best = -tol;
        let mut scanned = 0;
        while scanned < cells {
            let end = (scanned + block).min(cells);
            for _ in scanned..end {
                let c = cursor;
                cursor = if cursor + 1 == cells { 0 } else { cursor + 1 };
                if basis.is_basic[c] {
                    continue;
                }
                let (r, q) = (c / m, c % m);
                let reduced = cost.get(r, q) - basis.potential[r] - basis.potential[n + q];
                if reduced < best {
                    best = reduced;
                    entering = Some((r, q));
                }
            }
            scanned = end;
            if entering.is_some() {
                break;
            }
        }
        let Some((p, q)) = entering else {
            return Some(basis.edges);
        };

        // cycle: entering edge (+), then the tree path from column q back to
        // row p with alternating signs starting at (-)
        let path = basis.path(n + q, p);
        let mut theta = i64::MAX;
        let mut leave = usize::MAX;
        for (step, &e) in path.iter().enumerate() {
            if step % 2 == 0 && basis.flow[e] < theta {
                theta = basis.flow[e];
                leave = e;
            }
        }
        if leave == usize::MAX {
            return None;
        }
        for (step, &e) in path.iter().enumerate() {
            if step % 2 == 0 {
                basis.flow[e] -= theta;
            } else {
                basis.flow[e] += theta;
            }
        }

        // reuse the leaving edge's slot for the entering edge
        let (li, lj) = basis.edges[leave];
        basis.is_basic[li * m + lj] = false;
        basis.adjacency[li].retain(|&x| x != leave);
        basis.adjacency[n + lj].retain(|&x| x != leave);
        basis.edges[leave] = (p, q);
        basis.flow[leave] = theta;
        basis.is_basic[p * m + q] = true;
        basis.adjacency[p].push(leave);
        basis.adjacency[n + q].push(leave);
        basis.refresh(cost);
    }
    None
}

/// Flows on a spanning tree that meet the given masses exactly, found by
/// peeling leaves. `None` if some flow would be negative.
fn tree_flows(n: usize, m: usize, edges: &[(usize, usize)], supply: &[i64], demand: &[i64]) -> Option<Vec<u64>> {
    let total = n + m;
    let mut remaining: Vec<i64> = supply.iter().chain(demand.iter()).copied().collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (e, &(i, j)) in edges.iter().enumerate() {
        incident[i].push(e);
        incident[n + j].push(e);
    }
    let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
    let mut used = vec![false; edges.len()];
    let mut flow = vec![0u64; n * m];
    let mut leaves: Vec<usize> = (0..total).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = leaves.pop() {
        let Some(&e) = incident[v].iter().find(|&&e| !used[e]) else {
            continue;
        };
        used[e] = true;
        let (i, j) = edges[e];
        let other = if v == i { n + j } else { i };
        let x = remaining[v];
        if x < 0 {
            return None;
        }
        flow[i * m + j] = x as u64;
        remaining[v] = 0;
        remaining[other] -= x;
        degree[v] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    if remaining.iter().any(|&r| r != 0) {
        return None;
    }
    Some(flow)
}

/// Integer flow on every `(row, col)` edge of an optimal plan, row-major.
///
/// Rows carry `cols / g` units each and columns `rows / g` units each.
pub fn transport_plan(cost: &CostMatrix) -> Vec<u64> {
    let (n, m) = (cost.rows(), cost.cols());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let g = gcd(n, m);
    let supply = vec![(m / g) as i64; n];
    let demand = vec![(n / g) as i64; m];
    simplex_basis(cost, &supply, &demand)
        .and_then(|edges| tree_flows(n, m, &edges, &supply, &demand))
        .unwrap_or_else(|| shortest_path_plan(cost))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_sets() {
        let c = CostMatrix::from_rows(&[vec![0.5]]).unwrap();
        assert_eq!(uniform_transport_cost(&c), 0.5);
    }

    #[test]
    fn one_to_many_is_the_mean() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!((uniform_transport_cost(&c) - 2.0).abs() < 1e-15);
        let plan = transport_plan(&c);
        assert_eq!(plan, vec![1, 1, 1]);
    }

    #[test]
    fn two_to_four_splits_mass() {
        // each row carries two units, each column one
        let c = CostMatrix::from_rows(&[vec![0.0, 0.0, 5.0, 5.0], vec![5.0, 5.0, 0.0, 1.0]]).unwrap();
        let plan = transport_plan(&c);
        assert_eq!(plan, vec![1, 1, 0, 0, 0, 0, 1, 1]);
        assert!((uniform_transport_cost(&c) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plan_marginals_are_exact() {
        let mut state = 11u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for (n, m) in [(3, 5), (6, 4), (7, 7), (10, 15), (1, 9)] {
            let values: Vec<f64> = (0..n * m).map(|_| next()).collect();
            let c = CostMatrix::new(n, m, values).unwrap();
            let plan = transport_plan(&c);
            let g = gcd(n, m);
            for i in 0..n {
                assert_eq!(plan[i * m..(i + 1) * m].iter().sum::<u64>(), (m / g) as u64);
            }
            for j in 0..m {
                assert_eq!((0..n).map(|i| plan[i * m + j]).sum::<u64>(), (n / g) as u64);
            }
        }
    }

    #[test]
    fn simplex_agrees_with_shortest_paths() {
        let mut state = 5u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for (n, m) in [(2, 3), (5, 3), (7, 11), (12, 8), (20, 30), (31, 17), (1, 4), (4, 1)] {
            let values: Vec<f64> = (0..n * m).map(|_| (next() * 8.0).floor()).collect();
            let c = CostMatrix::new(n, m, values).unwrap();
            let cost = |plan: &[u64]| -> f64 {
                plan.iter().enumerate().map(|(k, &f)| f as f64 * c.get(k / m, k % m)).sum()
            };
            let g = gcd(n, m);
            let supply = vec![(m / g) as i64; n];
            let demand = vec![(n / g) as i64; m];
            let edges = simplex_basis(&c, &supply, &demand).expect("simplex converges");
            let a = tree_flows(n, m, &edges, &supply, &demand).expect("basis is feasible");
            let b = shortest_path_plan(&c);
            assert_eq!(cost(&a), cost(&b), "{n}x{m}");
        }
    }

    #[test]
    fn tree_flows_rejects_infeasible_masses() {
        // a path row0-col0-row1 cannot send 2 units out of row1 into col0 alone
        let edges = [(0, 0), (1, 0)];
        assert!(tree_flows(2, 1, &edges, &[1, 1], &[2]).is_some());
        assert!(tree_flows(2, 1, &edges, &[1, 1], &[3]).is_none());
    }
}
