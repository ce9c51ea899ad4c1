//! Sparse LU factorisation of simplex basis matrices.
//!
//! Left-looking elimination over columns sorted by nonzero count, with
//! threshold partial pivoting that prefers rows with few remaining
//! nonzeros. Basis matrices of network-style models are close to
//! triangular, so fill stays small without a full minimum-degree ordering.

const PIVOT_THRESHOLD: f64 = 0.01;
const SINGULAR_TOL: f64 = 1e-11;

/// A sparse column given as parallel index/value slices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ColRef<'a> {
    pub idx: &'a [usize],
    pub val: &'a [f64],
}

#[derive(Debug, Clone, Default)]
struct SparseVec {
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// `B[:, pcol] = P' L U` in pivot-position coordinates.
#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    /// pivot position -> row of B
    prow: Vec<usize>,
    /// pivot position -> column (basis slot) of B
    pcol: Vec<usize>,
    /// multipliers below the pivot, indexed by row of B
    l: Vec<SparseVec>,
    /// strictly upper part, indexed by pivot position
    u: Vec<SparseVec>,
    u_diag: Vec<f64>,
}

/// Basis slots that found no acceptable pivot, with rows left unpivoted.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub slots: Vec<usize>,
    pub rows: Vec<usize>,
}

impl LuFactors {
    pub fn factorize(m: usize, cols: &[ColRef<'_>]) -> Result<LuFactors, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&s| (cols[s].idx.len(), s));

        let mut row_count = vec![0usize; m];
        for c in cols {
            for &i in c.idx {
                row_count[i] += 1;
            }
        }

        const NONE: usize = usize::MAX;
        let mut row_pos = vec![NONE; m];
        let mut prow = Vec::with_capacity(m);
        let mut pcol = Vec::with_capacity(m);
        let mut l: Vec<SparseVec> = Vec::with_capacity(m);
        let mut u: Vec<SparseVec> = Vec::with_capacity(m);
        let mut u_diag = Vec::with_capacity(m);
        let mut bad_slots = Vec::new();

        let mut work = vec![0.0f64; m];
        let mut mark = vec![false; m];
        let mut touched: Vec<usize> = Vec::with_capacity(m);

        for &slot in &order {
            let col = cols[slot];
            for (&i, &v) in col.idx.iter().zip(col.val) {
                row_count[i] -= 1;
                work[i] += v;
                if !mark[i] {
                    mark[i] = true;
                    touched.push(i);
                }
            }
            // Eliminate with already-pivoted rows in pivot order.
            let mut pivoted: Vec<usize> = touched.iter().map(|&i| row_pos[i]).filter(|&p| p != NONE).collect();
            if !pivoted.is_empty() {
                pivoted.sort_unstable();
                let mut heap = std::collections::BinaryHeap::new();
                for p in pivoted {
                    heap.push(std::cmp::Reverse(p));
                }
                let mut last = NONE;
                while let Some(std::cmp::Reverse(p)) = heap.pop() {
                    if p == last {
                        continue;
                    }
                    last = p;
                    let v = work[prow[p]];
                    if v == 0.0 {
                        continue;
                    }
                    let lp: &SparseVec = &l[p];
                    for (&i, &li) in lp.idx.iter().zip(&lp.val) {
                        work[i] -= li * v;
                        if !mark[i] {
                            mark[i] = true;
                            touched.push(i);
                            if row_pos[i] != NONE {
                                heap.push(std::cmp::Reverse(row_pos[i]));
                            }
                        }
                    }
                }
            }

            let mut ucol = SparseVec::default();
            let mut max_abs = 0.0f64;
            for &i in &touched {
                if row_pos[i] != NONE {
                    if work[i] != 0.0 {
                        ucol.idx.push(row_pos[i]);
                        ucol.val.push(work[i]);
                    }
                } else {
                    max_abs = max_abs.max(work[i].abs());
                }
            }

            if max_abs <= SINGULAR_TOL {
                bad_slots.push(slot);
                for &i in &touched {
                    work[i] = 0.0;
                    mark[i] = false;
                }
                touched.clear();
                continue;
            }

            let mut best = NONE;
            for &i in &touched {
                if row_pos[i] == NONE && work[i].abs() >= PIVOT_THRESHOLD * max_abs {
                    let better = best == NONE
                        || row_count[i] < row_count[best]
                        || (row_count[i] == row_count[best] && work[i].abs() > work[best].abs());
                    if better {
                        best = i;
                    }
                }
            }
            let piv = work[best];
            let mut lcol = SparseVec::default();
            for &i in &touched {
                if row_pos[i] == NONE && i != best && work[i] != 0.0 {
                    lcol.idx.push(i);
                    lcol.val.push(work[i] / piv);
                }
            }
            row_pos[best] = prow.len();
            prow.push(best);
            pcol.push(slot);
            l.push(lcol);
            u.push(ucol);
            u_diag.push(piv);

            for &i in &touched {
                work[i] = 0.0;
                mark[i] = false;
            }
            touched.clear();
        }

        if !bad_slots.is_empty() {
            let rows = (0..m).filter(|&i| row_pos[i] == NONE).collect();
            return Err(Singular { slots: bad_slots, rows });
        }
        Ok(LuFactors {
            m,
            prow,
            pcol,
            l,
            u,
            u_diag,
        })
    }

    /// Solve `B x = b`; `b` is indexed by row and overwritten as scratch,
    /// `out` receives `x` indexed by basis slot.
    pub fn ftran(&self, b: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let v = b[self.prow[k]];
            if v != 0.0 {
                let lk = &self.l[k];
                for (&i, &li) in lk.idx.iter().zip(&lk.val) {
                    b[i] -= li * v;
                }
            }
        }
        for k in (0..self.m).rev() {
            let z = b[self.prow[k]] / self.u_diag[k];
            out[self.pcol[k]] = z;
            if z != 0.0 {
                let uk = &self.u[k];
                for (&j, &uj) in uk.idx.iter().zip(&uk.val) {
                    b[self.prow[j]] -= uj * z;
                }
            }
        }
    }

    /// Solve `B' y = c`; `c` is indexed by basis slot, `out` by row.
    pub fn btran(&self, c: &[f64], out: &mut [f64]) {
        let mut z = vec![0.0; self.m];
        for k in 0..self.m {
            let uk = &self.u[k];
            let mut s = c[self.pcol[k]];
            for (&j, &uj) in uk.idx.iter().zip(&uk.val) {
                s -= uj * z[j];
            }
            z[k] = s / self.u_diag[k];
        }
        for k in (0..self.m).rev() {
            let lk = &self.l[k];
            let mut s = z[k];
            for (&i, &li) in lk.idx.iter().zip(&lk.val) {
                s -= li * out[i];
            }
            out[self.prow[k]] = s;
        }
    }

    #[cfg(test)]
    pub fn fill(&self) -> usize {
        self.l.iter().map(|c| c.idx.len()).sum::<usize>() + self.u.iter().map(|c| c.idx.len()).sum::<usize>() + self.m
    }
}
