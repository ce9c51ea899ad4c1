//! Brute-force LP oracle: enumerate every basic solution of a box-bounded LP.
//!
//! Independent of the simplex code: it only shares the `Problem` type.

use gridflex_milp::{Problem, Relation};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleResult {
    Optimal { objective: f64, point: Vec<f64> },
    Infeasible,
}

/// Hyperplane `a.x = b` taken from a row or a bound.
struct Plane {
    a: Vec<f64>,
    b: f64,
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot = a[col].clone();
                    for (x, p) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn feasible(p: &Problem, x: &[f64], tol: f64) -> bool {
    p.variables
        .iter()
        .zip(x)
        .all(|(v, &xi)| xi >= v.lower - tol && xi <= v.upper + tol)
        && p.constraints.iter().all(|c| {
            let act: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            match c.relation {
                Relation::Le => act <= c.rhs + tol,
                Relation::Ge => act >= c.rhs - tol,
                Relation::Eq => (act - c.rhs).abs() <= tol,
            }
        })
}

/// Minimum of the objective over all vertices. Requires finite bounds on
/// every variable, so a nonempty feasible set always has a vertex.
pub fn vertex_enumeration(p: &Problem) -> OracleResult {
    let n = p.variables.len();
    let mut planes = Vec::new();
    for c in &p.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.coeffs {
            a[j] += v;
        }
        planes.push(Plane { a, b: c.rhs });
    }
    for (j, v) in p.variables.iter().enumerate() {
        assert!(v.lower.is_finite() && v.upper.is_finite(), "oracle needs a bounded box");
        for b in [v.lower, v.upper] {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push(Plane { a, b });
        }
    }
    let cost = p.cost_vector();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let k = planes.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a = pick.iter().map(|&i| planes[i].a.clone()).collect();
        let b = pick.iter().map(|&i| planes[i].b).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(p, &x, 1e-9) {
                let obj: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
        // next n-combination of 0..k
        let mut i = n;
        loop {
            if i == 0 {
                return match best {
                    Some((objective, point)) => OracleResult::Optimal { objective, point },
                    None => OracleResult::Infeasible,
                };
            }
            i -= 1;
            if pick[i] < k - n + i {
                pick[i] += 1;
                for t in i + 1..n {
                    pick[t] = pick[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Seeded random bounded LP with at most 6 variables and 8 rows.
pub fn random_lp(seed: u64) -> Problem {
    use gridflex_milp::{Constraint, Variable};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let m = rng.random_range(0..=8);
    let mut p = Problem::new(format!("random-{seed}"));
    let mut anchor = Vec::new();
    for j in 0..n {
        let lo = rng.random_range(-5..=0) as f64;
        let up = lo + rng.random_range(1..=10) as f64;
        anchor.push(rng.random_range(lo..=up));
        p.add_variable(Variable::continuous(format!("x{j}"), lo, up));
    }
    // one LP in eight gets rows that ignore the anchor point, so some are infeasible
    let wild = rng.random_range(0..8) == 0;
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                let a = rng.random_range(-5..=5) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        if coeffs.is_empty() {
            continue;
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j]).sum();
        let roll = rng.random_range(0..10);
        let (relation, rhs) = if wild {
            let rel = [Relation::Le, Relation::Ge, Relation::Eq][rng.random_range(0..3)];
            (rel, rng.random_range(-20..=20) as f64)
        } else if roll == 0 {
            (Relation::Eq, act)
        } else if roll < 6 {
            (Relation::Le, (act + rng.random_range(0.0..4.0)).round())
        } else {
            (Relation::Ge, (act - rng.random_range(0.0..4.0)).round())
        };
        p.add_constraint(Constraint::new(format!("r{i}"), coeffs, relation, rhs));
    }
    p.objective = (0..n).map(|j| (j, rng.random_range(-6..=6) as f64)).collect();
    p
}
