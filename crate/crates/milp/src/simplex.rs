//! Bounded-variable primal simplex with a dual phase for warm starts.
//!
//! Every row `i` gets a logical variable `r_i = a_i x` whose bounds encode
//! the relation, so the working system is `[A | -I] (x, r) = 0` with bounds
//! on all `n + m` columns. Phase 1 minimises the sum of bound violations of
//! basic variables and phase 2 the true objective; both share one pricing and
//! ratio-test loop. Pricing is Dantzig with a Harris two-pass ratio test;
//! after a run of degenerate pivots the engine falls back to Bland's rule
//! until the objective moves again. A primal infeasible start whose basis
//! is dual feasible (typical after a bound change) goes through the dual
//! simplex first.

use std::sync::Arc;

use crate::error::SolverError;
use crate::lu::{ColRef, LuFactors};
use crate::problem::{LpSolution, LpStatus, Problem, Relation};

const PERTURBATION: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub pivot_tol: f64,
    pub max_iterations: usize,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 200_000,
            refactor_interval: 100,
            degenerate_limit: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable sitting at zero.
    Zero,
}

/// Variable states of a basis over structurals followed by row logicals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub(crate) state: Vec<VarState>,
}

impl Basis {
    pub fn num_basic(&self) -> usize {
        self.state.iter().filter(|s| **s == VarState::Basic).count()
    }
}

/// Column-compressed copy of a problem, shareable between engines.
#[derive(Debug)]
pub(crate) struct LpData {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    /// logical columns are `-e_i`
    neg_one: [f64; 1],
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpData {
    pub(crate) fn new(problem: &Problem) -> LpData {
        let n = problem.variables.len();
        let m = problem.constraints.len();
        let mut counts = vec![0usize; n];
        for c in &problem.constraints {
            for &(j, _) in &c.coeffs {
                counts[j] += 1;
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut row_idx = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, c) in problem.constraints.iter().enumerate() {
            // merge duplicate entries of one row
            let mut coeffs = c.coeffs.clone();
            coeffs.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < coeffs.len() {
                let j = coeffs[k].0;
                let mut a = 0.0;
                while k < coeffs.len() && coeffs[k].0 == j {
                    a += coeffs[k].1;
                    k += 1;
                }
                let p = fill[j];
                row_idx[p] = i;
                vals[p] = a;
                fill[j] += 1;
            }
        }
        // compact columns that shrank because of merged duplicates
        let mut new_start = vec![0usize; n + 1];
        let mut w = 0;
        for j in 0..n {
            new_start[j] = w;
            for p in col_start[j]..fill[j] {
                if vals[p] != 0.0 {
                    row_idx[w] = row_idx[p];
                    vals[w] = vals[p];
                    w += 1;
                }
            }
        }
        new_start[n] = w;
        row_idx.truncate(w);
        vals.truncate(w);

        let mut cost = problem.cost_vector();
        cost.resize(n + m, 0.0);
        let mut lower: Vec<f64> = problem.variables.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = problem.variables.iter().map(|v| v.upper).collect();
        for c in &problem.constraints {
            let (lo, up) = match c.relation {
                Relation::Le => (f64::NEG_INFINITY, c.rhs),
                Relation::Ge => (c.rhs, f64::INFINITY),
                Relation::Eq => (c.rhs, c.rhs),
            };
            lower.push(lo);
            upper.push(up);
        }
        LpData {
            n,
            m,
            col_start: new_start,
            row_idx,
            vals,
            neg_one: [-1.0],
            cost,
            lower,
            upper,
        }
    }

    fn column(&self, j: usize) -> ColRef<'_> {
        let r = self.col_start[j]..self.col_start[j + 1];
        ColRef {
            idx: &self.row_idx[r.clone()],
            val: &self.vals[r],
        }
    }
}

struct Eta {
    slot: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

pub struct LpEngine {
    data: Arc<LpData>,
    opts: SimplexOptions,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    head: Vec<usize>,
    x: Vec<f64>,
    lu: Option<LuFactors>,
    etas: Vec<Eta>,
    iterations: usize,
    logical_idx: Vec<usize>,
    /// The basis came from an earlier solve, so a dual phase is worth trying.
    warm: bool,
}

enum Step {
    Optimal,
    Infeasible,
    Unbounded,
    Continue,
}

impl LpEngine {
    pub fn new(problem: &Problem, opts: SimplexOptions) -> LpEngine {
        LpEngine::from_data(Arc::new(LpData::new(problem)), opts)
    }

    pub(crate) fn from_data(data: Arc<LpData>, opts: SimplexOptions) -> LpEngine {
        let n = data.n;
        let m = data.m;
        let mut engine = LpEngine {
            lower: data.lower.clone(),
            upper: data.upper.clone(),
            state: vec![VarState::Lower; n + m],
            head: Vec::with_capacity(m),
            x: vec![0.0; n + m],
            lu: None,
            etas: Vec::new(),
            iterations: 0,
            logical_idx: (0..m).collect(),
            warm: false,
            data,
            opts,
        };
        engine.reset_to_slack_basis();
        engine
    }

    pub fn num_structural(&self) -> usize {
        self.data.n
    }

    /// Cap on iterations per [`solve`](Self::solve) call.
    pub fn set_iteration_limit(&mut self, limit: usize) {
        self.opts.max_iterations = limit;
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn column(&self, j: usize) -> ColRef<'_> {
        if j < self.data.n {
            self.data.column(j)
        } else {
            ColRef {
                idx: std::slice::from_ref(&self.logical_idx[j - self.data.n]),
                val: &self.data.neg_one,
            }
        }
    }

    fn nonbasic_state_for(&self, j: usize) -> VarState {
        let (lo, up) = (self.lower[j], self.upper[j]);
        let c = self.data.cost[j];
        if lo.is_finite() && (c >= 0.0 || !up.is_finite()) {
            VarState::Lower
        } else if up.is_finite() {
            VarState::Upper
        } else {
            VarState::Zero
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lower[j],
            VarState::Upper => self.upper[j],
            VarState::Zero => 0.0,
            VarState::Basic => self.x[j],
        }
    }

    pub fn reset_to_slack_basis(&mut self) {
        let n = self.data.n;
        let m = self.data.m;
        for j in 0..n {
            self.state[j] = self.nonbasic_state_for(j);
        }
        for i in 0..m {
            self.state[n + i] = VarState::Basic;
        }
        self.head = (n..n + m).collect();
        self.lu = None;
        self.etas.clear();
        self.warm = false;
    }

    pub fn basis(&self) -> Basis {
        Basis {
            state: self.state.clone(),
        }
    }

    /// Install a basis from an earlier solve of a problem with the same shape.
    pub fn set_basis(&mut self, basis: &Basis) {
        let n = self.data.n;
        let m = self.data.m;
        if basis.state.len() != n + m || basis.num_basic() != m {
            self.reset_to_slack_basis();
            return;
        }
        self.state.clone_from(&basis.state);
        self.head = (0..n + m).filter(|&j| self.state[j] == VarState::Basic).collect();
        for j in 0..n + m {
            self.fix_nonbasic_state(j);
        }
        self.lu = None;
        self.etas.clear();
        self.warm = true;
    }

    fn fix_nonbasic_state(&mut self, j: usize) {
        let s = self.state[j];
        let ok = match s {
            VarState::Basic => true,
            VarState::Lower => self.lower[j].is_finite(),
            VarState::Upper => self.upper[j].is_finite(),
            VarState::Zero => !self.lower[j].is_finite() && !self.upper[j].is_finite(),
        };
        if !ok {
            self.state[j] = self.nonbasic_state_for(j);
        }
    }

    /// Change bounds of structural `j`; the current basis is kept.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.data.n);
        self.lower[j] = lower;
        self.upper[j] = upper;
        self.fix_nonbasic_state(j);
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Restore the problem's own bounds on every structural.
    pub fn restore_bounds(&mut self) {
        let n = self.data.n;
        self.lower[..n].copy_from_slice(&self.data.lower[..n]);
        self.upper[..n].copy_from_slice(&self.data.upper[..n]);
        for j in 0..n {
            self.fix_nonbasic_state(j);
        }
    }

    fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.data.m;
        let n = self.data.n;
        for _attempt in 0..3 {
            let cols: Vec<ColRef<'_>> = self.head.iter().map(|&j| self.column(j)).collect();
            match LuFactors::factorize(m, &cols) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    self.etas.clear();
                    self.recompute_primal();
                    return Ok(());
                }
                Err(sing) => {
                    log::debug!("singular basis: replacing {} columns by logicals", sing.slots.len());
                    for (&slot, &row) in sing.slots.iter().zip(&sing.rows) {
                        let out = self.head[slot];
                        let logical = n + row;
                        self.head[slot] = logical;
                        self.state[logical] = VarState::Basic;
                        self.state[out] = self.nonbasic_state_for(out);
                    }
                }
            }
        }
        Err(SolverError::Numerical("basis stays singular after repair".into()))
    }

    fn ftran_col(&self, j: usize) -> Vec<f64> {
        let m = self.data.m;
        let mut b = vec![0.0; m];
        let col = self.column(j);
        for (&i, &v) in col.idx.iter().zip(col.val) {
            b[i] += v;
        }
        let mut out = vec![0.0; m];
        self.ftran(&mut b, &mut out);
        out
    }

    fn ftran(&self, b: &mut [f64], out: &mut [f64]) {
        self.lu.as_ref().expect("factorized").ftran(b, out);
        for eta in &self.etas {
            let xr = out[eta.slot] / eta.pivot;
            if xr != 0.0 {
                for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                    out[i] -= a * xr;
                }
            }
            out[eta.slot] = xr;
        }
    }

    fn btran(&self, c: &mut [f64], out: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.slot];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                s -= c[i] * a;
            }
            c[eta.slot] = s / eta.pivot;
        }
        self.lu.as_ref().expect("factorized").btran(c, out);
    }

    fn recompute_primal(&mut self) {
        let n = self.data.n;
        let m = self.data.m;
        let mut rhs = vec![0.0; m];
        for j in 0..n + m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                let col = self.column(j);
                for (&i, &a) in col.idx.iter().zip(col.val) {
                    rhs[i] -= a * v;
                }
            }
        }
        let mut xb = vec![0.0; m];
        self.ftran(&mut rhs, &mut xb);
        for (s, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[s];
        }
    }

    /// Run the simplex method from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution, SolverError> {
        let start_iters = self.iterations;
        self.refactor()?;
        if self.dual_phase(start_iters)? {
            return Ok(self.solution(LpStatus::Infeasible, self.iterations - start_iters));
        }
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut confirmations = 0;
        loop {
            if self.iterations - start_iters >= self.opts.max_iterations {
                return Err(SolverError::IterationLimit(self.opts.max_iterations));
            }
            if self.etas.len() >= self.opts.refactor_interval {
                self.refactor()?;
            }
            match self.iterate(bland, &mut degenerate_run)? {
                Step::Continue => {
                    if degenerate_run > self.opts.degenerate_limit {
                        bland = true;
                    } else if degenerate_run == 0 {
                        bland = false;
                    }
                }
                terminal => {
                    // Confirm on fresh factors before reporting.
                    if !self.etas.is_empty() && confirmations < 3 {
                        confirmations += 1;
                        self.refactor()?;
                        continue;
                    }
                    self.warm = true;
                    let status = match terminal {
                        Step::Optimal => LpStatus::Optimal,
                        Step::Infeasible => LpStatus::Infeasible,
                        Step::Unbounded => LpStatus::Unbounded,
                        Step::Continue => unreachable!(),
                    };
                    return Ok(self.solution(status, self.iterations - start_iters));
                }
            }
        }
    }

    fn primal_infeasible(&self) -> bool {
        let tol = self.opts.primal_tol;
        self.head
            .iter()
            .any(|&j| self.x[j] < self.lower[j] - tol || self.x[j] > self.upper[j] + tol)
    }

    /// Costs nudged away from dual degeneracy: nonbasics at a bound get a
    /// small deterministic push towards staying there.
    fn perturbed_costs(&self) -> Vec<f64> {
        let n = self.data.n;
        self.data
            .cost
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if j >= n {
                    return c;
                }
                let h = (j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
                let u = 0.5 + 0.5 * (h as f64 / (1u64 << 53) as f64);
                let eps = PERTURBATION * (1.0 + c.abs()) * u;
                match self.state[j] {
                    VarState::Lower if self.lower[j] < self.upper[j] => c + eps,
                    VarState::Upper if self.lower[j] < self.upper[j] => c - eps,
                    _ => c,
                }
            })
            .collect()
    }

    /// Reduced costs of all columns under `cost`, zero on basics.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let n = self.data.n;
        let m = self.data.m;
        let mut cb: Vec<f64> = self.head.iter().map(|&j| cost[j]).collect();
        let mut y = vec![0.0; m];
        self.btran(&mut cb, &mut y);
        let mut d = vec![0.0; n + m];
        for j in 0..n + m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            d[j] = if j < n {
                let col = self.data.column(j);
                let mut s = cost[j];
                for (&i, &a) in col.idx.iter().zip(col.val) {
                    s -= y[i] * a;
                }
                s
            } else {
                cost[j] + y[j - n]
            };
        }
        d
    }

    /// Flip boxed nonbasics onto the bound their reduced cost prefers.
    /// False when an unboxed column stays dual infeasible.
    fn make_dual_feasible(&mut self, d: &[f64]) -> bool {
        let dtol = self.opts.dual_tol;
        let mut flipped = false;
        for (j, &dj) in d.iter().enumerate() {
            if self.lower[j] == self.upper[j] {
                continue;
            }
            match self.state[j] {
                VarState::Lower if dj < -dtol => {
                    if !self.upper[j].is_finite() {
                        return false;
                    }
                    self.state[j] = VarState::Upper;
                    flipped = true;
                }
                VarState::Upper if dj > dtol => {
                    if !self.lower[j].is_finite() {
                        return false;
                    }
                    self.state[j] = VarState::Lower;
                    flipped = true;
                }
                VarState::Zero if dj.abs() > dtol => return false,
                _ => {}
            }
        }
        if flipped {
            self.recompute_primal();
        }
        true
    }

    /// Dual simplex from a dual feasible basis, used to re-solve after bound
    /// changes. Returns true on proven infeasibility; otherwise the primal
    /// loop finishes (or takes over when the basis is not dual feasible).
    fn dual_phase(&mut self, start_iters: usize) -> Result<bool, SolverError> {
        if !self.warm || !self.primal_infeasible() {
            return Ok(false);
        }
        let n = self.data.n;
        let m = self.data.m;
        let tol = self.opts.primal_tol;
        let dtol = self.opts.dual_tol;
        let ptol = self.opts.pivot_tol.max(1e-9);
        let cost = self.perturbed_costs();
        let mut d = self.reduced_costs(&cost);
        if !self.make_dual_feasible(&d) {
            return Ok(false);
        }
        let budget = self.opts.max_iterations.min(2 * m + 100);
        let mut confirmations = 0;
        let mut rho = vec![0.0; m];
        let mut alpha_r = vec![0.0; n + m];
        loop {
            if self.iterations - start_iters >= budget {
                return Ok(false);
            }
            if self.etas.len() >= self.opts.refactor_interval {
                self.refactor()?;
                d = self.reduced_costs(&cost);
                if !self.make_dual_feasible(&d) {
                    return Ok(false);
                }
            }
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64, f64)> = None; // (slot, violation, target)
            for (s, &j) in self.head.iter().enumerate() {
                let v = self.x[j];
                let (viol, target) = if v < self.lower[j] - tol {
                    (self.lower[j] - v, self.lower[j])
                } else if v > self.upper[j] + tol {
                    (v - self.upper[j], self.upper[j])
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, best, _)| viol > best) {
                    leave = Some((s, viol, target));
                }
            }
            let Some((r, _, target)) = leave else {
                return Ok(false);
            };
            let out = self.head[r];
            let increase = self.x[out] < target;

            let mut e = vec![0.0; m];
            e[r] = 1.0;
            self.btran(&mut e, &mut rho);

            // Dual ratio test, Harris two-pass.
            let mut cands: Vec<(usize, f64, f64)> = Vec::new(); // (var, |alpha|, slack d)
            for j in 0..n + m {
                alpha_r[j] = 0.0;
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = if j < n {
                    let col = self.data.column(j);
                    col.idx.iter().zip(col.val).map(|(&i, &v)| rho[i] * v).sum()
                } else {
                    -rho[j - n]
                };
                alpha_r[j] = a;
                if a.abs() <= ptol {
                    continue;
                }
                // x_out moves by -a per unit increase of x_j
                let ok = match self.state[j] {
                    VarState::Lower => (a < 0.0) == increase,
                    VarState::Upper => (a > 0.0) == increase,
                    VarState::Zero => true,
                    VarState::Basic => false,
                };
                if !ok {
                    continue;
                }
                let slack = match self.state[j] {
                    VarState::Lower => d[j],
                    VarState::Upper => -d[j],
                    _ => d[j].abs(),
                }
                .max(0.0);
                cands.push((j, a.abs(), slack));
            }
            if cands.is_empty() {
                if !self.etas.is_empty() && confirmations < 2 {
                    confirmations += 1;
                    self.refactor()?;
                    d = self.reduced_costs(&cost);
                    if !self.make_dual_feasible(&d) {
                        return Ok(false);
                    }
                    continue;
                }
                return Ok(true);
            }
            let theta_max = cands
                .iter()
                .map(|&(_, a, sl)| (sl + dtol) / a)
                .fold(f64::INFINITY, f64::min);
            let &(q, _, _) = cands
                .iter()
                .filter(|&&(_, a, sl)| sl / a <= theta_max)
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("the minimum ratio passes its own bound");

            self.iterations += 1;
            let alpha_q = self.ftran_col(q);
            let piv = alpha_q[r];
            if piv.abs() < 1e-9 || (piv - alpha_r[q]).abs() > 1e-6 * (1.0 + piv.abs()) {
                log::debug!("dual pivot mismatch {:e} vs {:e}; refactoring", piv, alpha_r[q]);
                if self.etas.is_empty() {
                    return Ok(false);
                }
                self.refactor()?;
                d = self.reduced_costs(&cost);
                if !self.make_dual_feasible(&d) {
                    return Ok(false);
                }
                continue;
            }

            let theta_d = d[q] / piv;
            for j in 0..n + m {
                if alpha_r[j] != 0.0 {
                    d[j] -= theta_d * alpha_r[j];
                }
            }
            d[q] = 0.0;
            d[out] = -theta_d;

            let theta_p = (self.x[out] - target) / piv;
            self.x[q] += theta_p;
            for (s, &j) in self.head.iter().enumerate() {
                if alpha_q[s] != 0.0 {
                    self.x[j] -= theta_p * alpha_q[s];
                }
            }
            self.state[out] = if increase { VarState::Lower } else { VarState::Upper };
            self.x[out] = target;
            self.state[q] = VarState::Basic;
            self.head[r] = q;
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for (i, &a) in alpha_q.iter().enumerate() {
                if i != r && a != 0.0 {
                    idx.push(i);
                    val.push(a);
                }
            }
            self.etas.push(Eta {
                slot: r,
                pivot: piv,
                idx,
                val,
            });
        }
    }

    fn solution(&self, status: LpStatus, iterations: usize) -> LpSolution {
        let n = self.data.n;
        let mut values: Vec<f64> = self.x[..n].to_vec();
        for (j, v) in values.iter_mut().enumerate() {
            // snap basics that sit within tolerance of a bound
            let (lo, up) = (self.lower[j], self.upper[j]);
            if (*v - lo).abs() <= self.opts.primal_tol {
                *v = lo;
            } else if (*v - up).abs() <= self.opts.primal_tol {
                *v = up;
            }
        }
        let objective = values.iter().zip(&self.data.cost).map(|(v, c)| v * c).sum();
        let row_duals = if status == LpStatus::Optimal {
            let mut cb: Vec<f64> = self.head.iter().map(|&j| self.data.cost[j]).collect();
            let mut y = vec![0.0; self.data.m];
            self.btran(&mut cb, &mut y);
            y
        } else {
            Vec::new()
        };
        LpSolution {
            status,
            values,
            objective,
            iterations,
            row_duals,
        }
    }

    fn iterate(&mut self, bland: bool, degenerate_run: &mut usize) -> Result<Step, SolverError> {
        let n = self.data.n;
        let m = self.data.m;
        let tol = self.opts.primal_tol;

        let mut cb = vec![0.0; m];
        let mut phase1 = false;
        for (s, &j) in self.head.iter().enumerate() {
            let v = self.x[j];
            if v < self.lower[j] - tol {
                cb[s] = -1.0;
                phase1 = true;
            } else if v > self.upper[j] + tol {
                cb[s] = 1.0;
                phase1 = true;
            }
        }
        if !phase1 {
            for (s, &j) in self.head.iter().enumerate() {
                cb[s] = self.data.cost[j];
            }
        }
        let mut y = vec![0.0; m];
        self.btran(&mut cb, &mut y);

        // Pricing.
        let dtol = self.opts.dual_tol;
        let mut entering: Option<(usize, f64, f64)> = None; // (var, dir, |d|)
        for j in 0..n + m {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let cj = if phase1 { 0.0 } else { self.data.cost[j] };
            let d = if j < n {
                let col = self.data.column(j);
                let mut s = cj;
                for (&i, &a) in col.idx.iter().zip(col.val) {
                    s -= y[i] * a;
                }
                s
            } else {
                cj + y[j - n]
            };
            let dir = match st {
                VarState::Lower if d < -dtol => 1.0,
                VarState::Upper if d > dtol => -1.0,
                VarState::Zero if d.abs() > dtol => -d.signum(),
                _ => continue,
            };
            if bland {
                entering = Some((j, dir, d.abs()));
                break;
            }
            if entering.is_none_or(|(_, _, best)| d.abs() > best) {
                entering = Some((j, dir, d.abs()));
            }
        }

        let Some((q, dir, _)) = entering else {
            return Ok(if phase1 { Step::Infeasible } else { Step::Optimal });
        };
        self.iterations += 1;

        let alpha = self.ftran_col(q);
        let ptol = self.opts.pivot_tol;

        // Candidate limits: (slot, exact ratio, relaxed ratio, leave-at-upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (s, &j) in self.head.iter().enumerate() {
            let rate = -dir * alpha[s];
            if rate.abs() <= ptol {
                continue;
            }
            let v = self.x[j];
            let (lo, up) = (self.lower[j], self.upper[j]);
            let below = v < lo - tol;
            let above = v > up + tol;
            if rate < 0.0 {
                // decreasing
                if below {
                    continue;
                }
                let target = if above { up } else { lo };
                if !target.is_finite() {
                    continue;
                }
                let exact = (v - target) / -rate;
                let relaxed = (v - target + tol) / -rate;
                cands.push((s, exact.max(0.0), relaxed, above));
            } else {
                if above {
                    continue;
                }
                let target = if below { lo } else { up };
                if !target.is_finite() {
                    continue;
                }
                let exact = (target - v) / rate;
                let relaxed = (target - v + tol) / rate;
                cands.push((s, exact.max(0.0), relaxed, !below));
            }
        }
        let flip = self.upper[q] - self.lower[q];

        let chosen: Option<(usize, f64, bool)> = if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(s, exact, _, at_up) in &cands {
                let better = match best {
                    None => true,
                    Some((bs, br, _)) => exact < br - 1e-12 || (exact <= br + 1e-12 && self.head[s] < self.head[bs]),
                };
                if better {
                    best = Some((s, exact, at_up));
                }
            }
            best
        } else {
            let theta = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            let mut best: Option<(usize, f64, bool)> = None;
            let mut best_rate = 0.0;
            for &(s, exact, _, at_up) in &cands {
                if exact <= theta {
                    let r = alpha[s].abs();
                    if r > best_rate {
                        best_rate = r;
                        best = Some((s, exact, at_up));
                    }
                }
            }
            best
        };

        let (step, leave) = match chosen {
            Some((s, r, at_up)) if r < flip => (r, Some((s, at_up))),
            _ if flip.is_finite() => (flip, None),
            Some((s, r, at_up)) => (r, Some((s, at_up))),
            None => {
                if phase1 {
                    return Err(SolverError::Numerical("phase 1 ray without a blocking row".into()));
                }
                return Ok(Step::Unbounded);
            }
        };

        if step <= 1e-12 {
            *degenerate_run += 1;
        } else {
            *degenerate_run = 0;
        }

        if step != 0.0 {
            self.x[q] += dir * step;
            for (s, &j) in self.head.iter().enumerate() {
                if alpha[s] != 0.0 {
                    self.x[j] -= dir * step * alpha[s];
                }
            }
        }

        match leave {
            None => {
                self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                self.x[q] = self.nonbasic_value(q);
            }
            Some((s, at_up)) => {
                let out = self.head[s];
                self.state[out] = if at_up { VarState::Upper } else { VarState::Lower };
                self.x[out] = self.nonbasic_value(out);
                self.state[q] = VarState::Basic;
                self.head[s] = q;
                let mut idx = Vec::new();
                let mut val = Vec::new();
                for (i, &a) in alpha.iter().enumerate() {
                    if i != s && a != 0.0 {
                        idx.push(i);
                        val.push(a);
                    }
                }
                if alpha[s].abs() < 1e-7 {
                    log::debug!("small pivot {:e}; refactoring", alpha[s]);
                    self.etas.push(Eta {
                        slot: s,
                        pivot: alpha[s],
                        idx,
                        val,
                    });
                    self.refactor()?;
                } else {
                    self.etas.push(Eta {
                        slot: s,
                        pivot: alpha[s],
                        idx,
                        val,
                    });
                }
            }
        }
        Ok(Step::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Constraint, Variable};

    fn lp(vars: Vec<Variable>, rows: Vec<Constraint>, obj: Vec<(usize, f64)>) -> Problem {
        Problem {
            name: "t".into(),
            variables: vars,
            constraints: rows,
            objective: obj,
        }
    }

    fn solve(p: &Problem) -> LpSolution {
        LpEngine::new(p, SimplexOptions::default()).solve().unwrap()
    }

    #[test]
    fn maximise_single_bounded_variable() {
        let p = lp(vec![Variable::continuous("x", 0.0, 1.0)], vec![], vec![(0, -1.0)]);
        let s = solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.values[0], 1.0);
        assert_eq!(s.objective, -1.0);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let p = lp(
            vec![Variable::continuous("x", f64::NEG_INFINITY, f64::INFINITY)],
            vec![
                Constraint::new("ge", vec![(0, 1.0)], Relation::Ge, 2.0),
                Constraint::new("le", vec![(0, 1.0)], Relation::Le, 1.0),
            ],
            vec![],
        );
        assert_eq!(solve(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn free_direction_is_unbounded() {
        let p = lp(
            vec![
                Variable::continuous("x", 0.0, f64::INFINITY),
                Variable::continuous("y", 0.0, 1.0),
            ],
            vec![Constraint::new("r", vec![(0, 1.0), (1, -1.0)], Relation::Ge, 0.0)],
            vec![(0, -1.0)],
        );
        assert_eq!(solve(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_system_with_free_variables() {
        // x + y = 3, x - y = 1 -> (2, 1)
        let free = |n: &str| Variable::continuous(n, f64::NEG_INFINITY, f64::INFINITY);
        let p = lp(
            vec![free("x"), free("y")],
            vec![
                Constraint::new("a", vec![(0, 1.0), (1, 1.0)], Relation::Eq, 3.0),
                Constraint::new("b", vec![(0, 1.0), (1, -1.0)], Relation::Eq, 1.0),
            ],
            vec![(0, 1.0)],
        );
        let s = solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 2.0).abs() < 1e-12 && (s.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_after_bound_change() {
        // min -x - 2y, x + y <= 4, x, y in [0, 3]
        let p = lp(
            vec![Variable::continuous("x", 0.0, 3.0), Variable::continuous("y", 0.0, 3.0)],
            vec![Constraint::new("cap", vec![(0, 1.0), (1, 1.0)], Relation::Le, 4.0)],
            vec![(0, -1.0), (1, -2.0)],
        );
        let mut e = LpEngine::new(&p, SimplexOptions::default());
        let s = e.solve().unwrap();
        assert!((s.objective + 7.0).abs() < 1e-12);
        e.set_bounds(1, 0.0, 1.0);
        let s = e.solve().unwrap();
        assert!((s.objective + 5.0).abs() < 1e-12);
        assert_eq!(s.values, vec![3.0, 1.0]);
        e.restore_bounds();
        let s = e.solve().unwrap();
        assert!((s.objective + 7.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling LP.
        let v = |n: &str| Variable::continuous(n, 0.0, f64::INFINITY);
        let p = lp(
            vec![v("x4"), v("x5"), v("x6"), v("x7")],
            vec![
                Constraint::new(
                    "r1",
                    vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
                    Relation::Le,
                    0.0,
                ),
                Constraint::new(
                    "r2",
                    vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
                    Relation::Le,
                    0.0,
                ),
                Constraint::new("r3", vec![(2, 1.0)], Relation::Le, 1.0),
            ],
            vec![(0, -0.75), (1, 150.0), (2, -0.02), (3, 6.0)],
        );
        let s = solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }
}
