//! Network simplex specialized to the dense, uncapacitated, balanced
//! transportation problem with float costs.
//!
//! The basis is kept as a spanning tree rooted at an artificial node, using
//! the classic thread/reverse-thread index structure. Arcs are implicit:
//! arc `e` connects supply atom `e / m` to demand atom `e % m`, so nothing
//! per-arc is stored except an optional precomputed cost table. Because arcs
//! have no upper bounds, a non-basic arc always carries zero flow; flow is
//! therefore keyed by tree node (the flow on its predecessor arc).
//!
//! Entering arcs are found by block search with a relative epsilon test, the
//! standard guard against float round-off cycling.

use super::TransportError;

/// Relative reduced-cost threshold below which an arc counts as improving.
const EPS_REL: f64 = 1e-12;
/// Residual flow on artificial arcs that still counts as balanced.
const FEAS_TOL: f64 = 1e-7;
/// Sentinel for "no node".
const NONE: usize = usize::MAX;

/// Strictly positive flows of an optimal plan, as (i, j, mass) triples.
pub(crate) type FlowTriples = Vec<(usize, usize, f64)>;

/// Solves min sum f_ij * d(a_i, b_j) subject to row sums `aw`, column sums
/// `bw` (which must balance exactly), f >= 0. Returns the optimal cost and
/// the strictly positive flows as (i, j, mass) triples.
pub(crate) fn solve_transport(
    ax: &[f64],
    ay: &[f64],
    aw: &[f64],
    bx: &[f64],
    by: &[f64],
    bw: &[f64],
) -> Result<(f64, FlowTriples), TransportError> {
    let mut s = Simplex::new(ax, ay, aw, bx, by, bw);
    s.run()?;
    Ok(s.extract())
}

struct Simplex<'a> {
    n: usize,
    m: usize,
    node_num: usize,
    arc_num: usize,
    root: usize,
    ax: &'a [f64],
    ay: &'a [f64],
    bx: &'a [f64],
    by: &'a [f64],
    /// cost table for all real arcs; empty when the instance is too large
    cost: Vec<f64>,
    /// whether each node entered with non-negative supply (fixes the cost
    /// and orientation of its artificial arc)
    supply_nonneg: Vec<bool>,
    art_cost: f64,

    parent: Vec<usize>,
    pred_arc: Vec<usize>,
    /// +1 when the predecessor arc points node -> parent, -1 otherwise
    pred_dir: Vec<i8>,
    /// flow on the predecessor arc, keyed by node
    flow: Vec<f64>,
    pi: Vec<f64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,
    in_arc: usize,
    in_arc_flow: f64,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> Simplex<'a> {
    fn new(
        ax: &'a [f64],
        ay: &'a [f64],
        aw: &'a [f64],
        bx: &'a [f64],
        by: &'a [f64],
        bw: &'a [f64],
    ) -> Self {
        let n = ax.len();
        let m = bx.len();
        let node_num = n + m;
        let arc_num = n * m;
        let root = node_num;

        // cost of the most expensive possible move, padded; any artificial
        // path then costs more than any real one
        let span = |vals: &[f64], vals2: &[f64]| -> f64 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in vals.iter().chain(vals2) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        };
        let diam = span(ax, bx).hypot(span(ay, by));
        let art_cost = (diam + 1.0) * (node_num as f64 + 1.0);

        let cost = if arc_num <= 4_000_000 {
            let mut c = Vec::with_capacity(arc_num);
            for i in 0..n {
                for j in 0..m {
                    c.push((ax[i] - bx[j]).hypot(ay[i] - by[j]));
                }
            }
            c
        } else {
            Vec::new()
        };

        let all = node_num + 1;
        let mut s = Simplex {
            n,
            m,
            node_num,
            arc_num,
            root,
            ax,
            ay,
            bx,
            by,
            cost,
            supply_nonneg: vec![true; node_num],
            art_cost,
            parent: vec![NONE; all],
            pred_arc: vec![NONE; all],
            pred_dir: vec![0; all],
            flow: vec![0.0; all],
            pi: vec![0.0; all],
            thread: vec![0; all],
            rev_thread: vec![0; all],
            succ_num: vec![0; all],
            last_succ: vec![0; all],
            dirty_revs: Vec::new(),
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
            next_arc: 0,
            in_arc: NONE,
            in_arc_flow: 0.0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };
        s.init(aw, bw);
        s
    }

    fn init(&mut self, aw: &[f64], bw: &[f64]) {
        let root = self.root;
        self.parent[root] = NONE;
        self.pred_arc[root] = NONE;
        self.thread[root] = 0;
        self.rev_thread[0] = root;
        self.succ_num[root] = self.node_num + 1;
        self.last_succ[root] = self.node_num - 1;
        self.pi[root] = 0.0;

        for u in 0..self.node_num {
            let supply = if u < self.n { aw[u] } else { -bw[u - self.n] };
            self.parent[u] = root;
            self.pred_arc[u] = self.arc_num + u;
            self.thread[u] = u + 1; // wraps onto root for the last node
            self.rev_thread[u + 1] = u;
            self.succ_num[u] = 1;
            self.last_succ[u] = u;
            if supply >= 0.0 {
                self.supply_nonneg[u] = true;
                self.pred_dir[u] = 1; // u -> root, cost 0
                self.pi[u] = 0.0;
                self.flow[u] = supply;
            } else {
                self.supply_nonneg[u] = false;
                self.pred_dir[u] = -1; // root -> u, cost art_cost
                self.pi[u] = self.art_cost;
                self.flow[u] = -supply;
            }
        }
    }

    #[inline]
    fn arc_src(&self, e: usize) -> usize {
        e / self.m
    }

    #[inline]
    fn arc_tgt(&self, e: usize) -> usize {
        self.n + e % self.m
    }

    #[inline]
    fn real_cost(&self, e: usize) -> f64 {
        if !self.cost.is_empty() {
            self.cost[e]
        } else {
            let i = e / self.m;
            let j = e % self.m;
            (self.ax[i] - self.bx[j]).hypot(self.ay[i] - self.by[j])
        }
    }

    /// Cost of any arc, artificial ones included.
    fn any_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.real_cost(e)
        } else if self.supply_nonneg[e - self.arc_num] {
            0.0
        } else {
            self.art_cost
        }
    }

    /// Block search over the real arcs; artificial arcs never re-enter.
    fn find_entering_arc(&mut self) -> bool {
        let mut min_c = 0.0;
        let mut min_e = NONE;
        let mut countdown = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..self.arc_num {
            let c = self.real_cost(e) + self.pi[self.arc_src(e)] - self.pi[self.arc_tgt(e)];
            if c < min_c {
                min_c = c;
                min_e = e;
            }
            countdown -= 1;
            if countdown == 0 {
                if min_e != NONE && self.clearly_negative(min_e, min_c) {
                    self.in_arc = min_e;
                    self.next_arc = if e + 1 >= self.arc_num { 0 } else { e + 1 };
                    return true;
                }
                countdown = self.block_size;
            }
            e += 1;
            if e >= self.arc_num {
                e = 0;
            }
        }
        if min_e != NONE && self.clearly_negative(min_e, min_c) {
            self.in_arc = min_e;
            self.next_arc = if min_e + 1 >= self.arc_num { 0 } else { min_e + 1 };
            return true;
        }
        false
    }

    /// Reduced cost must be negative relative to the magnitudes involved,
    /// otherwise it is float noise and the solution is optimal.
    fn clearly_negative(&self, e: usize, reduced: f64) -> bool {
        let a = self.pi[self.arc_src(e)]
            .abs()
            .max(self.pi[self.arc_tgt(e)].abs())
            .max(self.real_cost(e).abs())
            .max(1.0);
        reduced < -a * EPS_REL
    }

    /// Deepest common ancestor of the entering arc's endpoints.
    fn find_join_node(&mut self) {
        let mut u = self.arc_src(self.in_arc);
        let mut v = self.arc_tgt(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Finds the bottleneck arc on the cycle. Pushing flow source -> target
    /// drains arcs pointing up on the source branch and arcs pointing down
    /// on the target branch.
    fn find_leaving_arc(&mut self) -> bool {
        let first = self.arc_src(self.in_arc);
        let second = self.arc_tgt(self.in_arc);
        self.delta = f64::INFINITY;
        let mut found = false;
        let mut on_first_branch = true;

        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == 1 && self.flow[u] < self.delta {
                self.delta = self.flow[u];
                self.u_out = u;
                found = true;
                on_first_branch = true;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == -1 && self.flow[u] <= self.delta {
                self.delta = self.flow[u];
                self.u_out = u;
                found = true;
                on_first_branch = false;
            }
            u = self.parent[u];
        }
        if on_first_branch {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        found
    }

    fn change_flow(&mut self) {
        let delta = self.delta;
        if delta > 0.0 {
            let mut u = self.arc_src(self.in_arc);
            while u != self.join {
                self.flow[u] -= self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
            let mut u = self.arc_tgt(self.in_arc);
            while u != self.join {
                self.flow[u] += self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
        }
        self.in_arc_flow = delta;
    }

    fn update_tree_structure(&mut self) {
        let u_out = self.u_out;
        let u_in = self.u_in;
        let v_in = self.v_in;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        // captured before the stem reversal rewrites parent[u_out]
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred_arc[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.arc_src(self.in_arc) { 1 } else { -1 };
            self.flow[u_in] = self.in_arc_flow;
            if self.thread[v_in] != u_out {
                // move the unchanged subtree next to v_in in the thread list
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // re-root the stem u_in..u_out so u_in hangs below v_in
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                // unlink the subtree of stem from the thread list
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                self.rev_thread[self.thread[u]] = u;
            }

            // shift predecessor data down the reversed stem; each node takes
            // over the arc (and its flow) that used to belong to the next
            // node toward u_in
            let mut temp_succ = 0usize;
            let temp_last = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred_arc[u] = self.pred_arc[p];
                self.flow[u] = self.flow[p];
                self.pred_dir[u] = -self.pred_dir[p];
                temp_succ += self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = temp_succ;
                self.last_succ[p] = temp_last;
                u = p;
                p = self.parent[u];
            }
            self.pred_arc[u_in] = self.in_arc;
            self.flow[u_in] = self.in_arc_flow;
            self.pred_dir[u_in] = if u_in == self.arc_src(self.in_arc) { 1 } else { -1 };
            self.succ_num[u_in] = old_succ_num;
        }

        // repair last_succ on the two paths toward the join node
        let up_limit_out = if self.last_succ[self.join] == v_in {
            self.join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if self.join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != NONE && u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != NONE && u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        // successor counts gain the moved subtree on one side, lose it on
        // the other
        let mut u = v_in;
        while u != self.join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != self.join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.any_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<(), TransportError> {
        let pivot_limit = 100 * (self.node_num + 1) + 10_000;
        let mut pivots = 0usize;
        while self.find_entering_arc() {
            pivots += 1;
            if pivots > pivot_limit {
                return Err(TransportError::PivotLimit);
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(TransportError::Unbounded);
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
        }
        // all artificial arcs must have been drained
        for u in 0..self.node_num {
            if self.pred_arc[u] >= self.arc_num && self.flow[u] > FEAS_TOL {
                return Err(TransportError::Infeasible(self.flow[u]));
            }
        }
        Ok(())
    }

    /// Optimal cost and the strictly positive flows on real arcs.
    fn extract(&self) -> (f64, FlowTriples) {
        let mut total = 0.0;
        let mut flows = Vec::new();
        for u in 0..self.node_num {
            let e = self.pred_arc[u];
            let f = self.flow[u];
            if e < self.arc_num && f > 0.0 {
                total += f * self.real_cost(e);
                flows.push((e / self.m, e % self.m, f));
            }
        }
        flows.sort_unstable_by_key(|f| (f.0, f.1));
        (total, flows)
    }
}
