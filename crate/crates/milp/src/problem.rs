use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    /// Integral in `[lower, upper]`; every binary of the models built on top
    /// of this crate has bounds `[0, 1]`.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Binary
    }
}

/// A single linear row. `name` identifies it in reports and MPS files.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimisation problem `min c'x` over bounded variables and linear rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
}

impl Problem {
    pub fn new(name: impl Into<String>) -> Self {
        Problem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_variable(&mut self, var: Variable) -> usize {
        self.variables.push(var);
        self.variables.len() - 1
    }

    pub fn add_constraint(&mut self, c: Constraint) -> usize {
        self.constraints.push(c);
        self.constraints.len() - 1
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.is_binary()).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Dense objective vector.
    pub fn cost_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    /// Largest bound or row violation of `values`, found by direct substitution.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Largest distance of a binary variable from the nearest integer.
    pub fn max_fractionality(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(values)
            .filter(|(v, _)| v.is_binary())
            .map(|(_, &x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Structural consistency: indices in range, `lower <= upper`, binaries boxed in `[0, 1]`.
    pub fn check(&self) -> Result<(), String> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(format!("variable {} has bounds [{}, {}]", v.name, v.lower, v.upper));
            }
            if v.is_binary() && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(format!("binary variable {} is not within [0, 1]", v.name));
            }
        }
        for c in &self.constraints {
            if let Some(&(j, _)) = c.coeffs.iter().find(|&&(j, _)| j >= n) {
                return Err(format!("row {} references variable index {j}", c.name));
            }
            if !c.rhs.is_finite() {
                return Err(format!("row {} has non-finite rhs", c.name));
            }
        }
        if let Some(&(j, _)) = self.objective.iter().find(|&&(j, _)| j >= n) {
            return Err(format!("objective references variable index {j}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values; meaningful only when `status` is `Optimal`.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Row multipliers `y`, so that `c - A^T y` are the reduced costs;
    /// empty unless `status` is `Optimal`.
    pub row_duals: Vec<f64>,
}
