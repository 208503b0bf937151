//! Primal network simplex on the bipartite transportation graph.
//!
//! Nodes `0..n` are supply rows, nodes `n..n+m` are demand columns. A basis
//! is a spanning tree of `n + m - 1` cells. Entering cells are picked by the
//! most negative reduced cost (ties: lowest row-major index). After a run of
//! degenerate pivots the solver switches to Bland's rule (first eligible
//! cell) until the objective strictly decreases again, which rules out
//! cycling. Leaving cells are always the lowest-index blocking cell.

use std::collections::VecDeque;

/// Basic cells of a spanning-tree basis, reusable as a warm start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    rows: usize,
    cols: usize,
    cells: Vec<(usize, usize)>,
}

impl Basis {
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

pub(crate) struct Solution {
    pub flows: Vec<(usize, usize, f64)>,
    pub basis: Basis,
    pub pivots: usize,
}

const NONE: usize = usize::MAX;

struct Tree {
    n: usize,
    m: usize,
    /// (row, col, flow) per basic slot.
    cells: Vec<(usize, usize, f64)>,
    /// Slot index per cell, NONE for non-basic.
    slot_of: Vec<usize>,
    /// Basic slots incident to each node.
    adjacent: Vec<Vec<usize>>,
    // Scratch filled by `refresh`.
    potential: Vec<f64>,
    parent_slot: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
}

impl Tree {
    fn new(n: usize, m: usize, cells: Vec<(usize, usize, f64)>) -> Self {
        let mut slot_of = vec![NONE; n * m];
        let mut adjacent = vec![Vec::new(); n + m];
        for (s, &(i, j, _)) in cells.iter().enumerate() {
            slot_of[i * m + j] = s;
            adjacent[i].push(s);
            adjacent[n + j].push(s);
        }
        Tree {
            n,
            m,
            cells,
            slot_of,
            adjacent,
            potential: vec![0.0; n + m],
            parent_slot: vec![NONE; n + m],
            parent: vec![NONE; n + m],
            depth: vec![0; n + m],
        }
    }

    fn other_end(&self, slot: usize, node: usize) -> usize {
        let (i, j, _) = self.cells[slot];
        if node == i {
            self.n + j
        } else {
            i
        }
    }

    /// Recomputes potentials (`u_i + v_j = c_ij` on basic cells) and the
    /// rooted tree structure. Returns false if the basis is not spanning.
    fn refresh(&mut self, cost: &[f64]) -> bool {
        let total = self.n + self.m;
        self.parent.iter_mut().for_each(|p| *p = NONE);
        self.parent_slot.iter_mut().for_each(|p| *p = NONE);
        let mut seen = vec![false; total];
        let mut queue = VecDeque::with_capacity(total);
        seen[0] = true;
        self.potential[0] = 0.0;
        self.depth[0] = 0;
        queue.push_back(0);
        let mut visited = 1;
        while let Some(node) = queue.pop_front() {
            for k in 0..self.adjacent[node].len() {
                let slot = self.adjacent[node][k];
                let next = self.other_end(slot, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                visited += 1;
                let (i, j, _) = self.cells[slot];
                let c = cost[i * self.m + j];
                self.potential[next] = c - self.potential[node];
                self.parent[next] = node;
                self.parent_slot[next] = slot;
                self.depth[next] = self.depth[node] + 1;
                queue.push_back(next);
            }
        }
        visited == total
    }

    /// Tree path from column node of `j` to row node `i`, as slots.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let mut a = self.n + j;
        let mut b = i;
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while self.depth[a] > self.depth[b] {
            from_a.push(self.parent_slot[a]);
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            from_b.push(self.parent_slot[b]);
            b = self.parent[b];
        }
        while a != b {
            from_a.push(self.parent_slot[a]);
            a = self.parent[a];
            from_b.push(self.parent_slot[b]);
            b = self.parent[b];
        }
        from_a.extend(from_b.into_iter().rev());
        from_a
    }

    fn replace(&mut self, slot: usize, cell: (usize, usize, f64)) {
        let (oi, oj, _) = self.cells[slot];
        self.slot_of[oi * self.m + oj] = NONE;
        self.adjacent[oi].retain(|&s| s != slot);
        self.adjacent[self.n + oj].retain(|&s| s != slot);
        let (i, j, _) = cell;
        self.cells[slot] = cell;
        self.slot_of[i * self.m + j] = slot;
        self.adjacent[i].push(slot);
        self.adjacent[self.n + j].push(slot);
    }
}

/// Flows on a spanning tree basis for the given supplies, by repeatedly
/// peeling leaves. `None` if the cells do not form a spanning tree.
fn tree_flows(
    n: usize,
    m: usize,
    cells: &[(usize, usize)],
    supply: &[f64],
    demand: &[f64],
) -> Option<Vec<(usize, usize, f64)>> {
    if cells.len() != n + m - 1 {
        return None;
    }
    let total = n + m;
    let mut residual: Vec<f64> = supply.iter().chain(demand.iter()).copied().collect();
    let mut degree = vec![0usize; total];
    let mut adjacent = vec![Vec::new(); total];
    for (s, &(i, j)) in cells.iter().enumerate() {
        if i >= n || j >= m {
            return None;
        }
        degree[i] += 1;
        degree[n + j] += 1;
        adjacent[i].push(s);
        adjacent[n + j].push(s);
    }
    let mut flows = vec![0.0; cells.len()];
    let mut done = vec![false; cells.len()];
    let mut leaves: Vec<usize> = (0..total).filter(|&v| degree[v] == 1).collect();
    let mut assigned = 0;
    while let Some(v) = leaves.pop() {
        if degree[v] != 1 {
            continue;
        }
        let Some(&slot) = adjacent[v].iter().find(|&&s| !done[s]) else {
            continue;
        };
        let (i, j) = cells[slot];
        let other = if v == i { n + j } else { i };
        let x = residual[v];
        flows[slot] = x;
        done[slot] = true;
        assigned += 1;
        residual[v] = 0.0;
        residual[other] -= x;
        degree[v] = 0;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    if assigned != cells.len() {
        return None;
    }
    Some(
        cells
            .iter()
            .zip(flows)
            .map(|(&(i, j), x)| (i, j, x))
            .collect(),
    )
}

/// Greedy cheapest-cell start. Each assignment exhausts one line (the row on
/// ties unless it is the last active row), which yields a spanning tree.
fn initial_basis(cost: &[f64], supply: &[f64], demand: &[f64]) -> Vec<(usize, usize, f64)> {
    let (n, m) = (supply.len(), demand.len());
    let mut order: Vec<usize> = (0..n * m).collect();
    order.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut row_active = vec![true; n];
    let mut col_active = vec![true; m];
    let (mut rows_left, mut cols_left) = (n, m);
    let mut cells = Vec::with_capacity(n + m - 1);
    for idx in order {
        let (i, j) = (idx / m, idx % m);
        if !row_active[i] || !col_active[j] {
            continue;
        }
        if rows_left == 1 && cols_left == 1 {
            cells.push((i, j, a[i].min(b[j]).max(0.0)));
            break;
        }
        let close_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            a[i] <= b[j]
        };
        if close_row {
            let x = a[i];
            cells.push((i, j, x));
            b[j] = (b[j] - x).max(0.0);
            a[i] = 0.0;
            row_active[i] = false;
            rows_left -= 1;
        } else {
            let x = b[j];
            cells.push((i, j, x));
            a[i] = (a[i] - x).max(0.0);
            b[j] = 0.0;
            col_active[j] = false;
            cols_left -= 1;
        }
    }
    cells
}

/// Solves `min <cost, x>` over the transportation polytope. `supply` and
/// `demand` must carry equal mass; `cost` is row-major `n x m`.
pub(crate) fn solve(
    cost: &[f64],
    supply: &[f64],
    demand: &[f64],
    warm: Option<&Basis>,
) -> Solution {
    let (n, m) = (supply.len(), demand.len());
    debug_assert_eq!(cost.len(), n * m);

    let scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-12 * scale;
    let flow_eps = 1e-14;

    let start = warm
        .filter(|b| b.shape() == (n, m))
        .and_then(|b| tree_flows(n, m, &b.cells, supply, demand))
        .filter(|flows| flows.iter().all(|&(_, _, x)| x >= -flow_eps))
        .map(|flows| {
            flows
                .into_iter()
                .map(|(i, j, x)| (i, j, x.max(0.0)))
                .collect()
        })
        .unwrap_or_else(|| initial_basis(cost, supply, demand));

    let mut tree = Tree::new(n, m, start);
    let degenerate_limit = n + m;
    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;

    loop {
        let spanning = tree.refresh(cost);
        debug_assert!(spanning, "basis lost the spanning property");
        let bland = degenerate_run >= degenerate_limit;

        let mut entering = NONE;
        let mut best = -eps;
        'scan: for i in 0..n {
            let u = tree.potential[i];
            let row = &cost[i * m..(i + 1) * m];
            for (j, &c) in row.iter().enumerate() {
                let reduced = c - u - tree.potential[n + j];
                if reduced < best {
                    if tree.slot_of[i * m + j] != NONE {
                        continue;
                    }
                    entering = i * m + j;
                    if bland {
                        break 'scan;
                    }
                    best = reduced;
                }
            }
        }
        if entering == NONE {
            break;
        }
        let (ei, ej) = (entering / m, entering % m);

        // Signs alternate along the path starting with a decrease at the
        // entering column.
        let path = tree.path(ei, ej);
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        let mut leaving_index = usize::MAX;
        for &slot in path.iter().step_by(2) {
            let (i, j, x) = tree.cells[slot];
            let index = i * m + j;
            if x < theta || (x == theta && index < leaving_index) {
                theta = x;
                leaving = slot;
                leaving_index = index;
            }
        }
        for (k, &slot) in path.iter().enumerate() {
            if k % 2 == 0 {
                tree.cells[slot].2 -= theta;
            } else {
                tree.cells[slot].2 += theta;
            }
        }
        tree.replace(leaving, (ei, ej, theta));

        pivots += 1;
        if theta > flow_eps {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
    }

    let basis = Basis {
        rows: n,
        cols: m,
        cells: tree.cells.iter().map(|&(i, j, _)| (i, j)).collect(),
    };
    let flows = tree
        .cells
        .into_iter()
        .map(|(i, j, x)| (i, j, x.max(0.0)))
        .collect();
    Solution {
        flows,
        basis,
        pivots,
    }
}
