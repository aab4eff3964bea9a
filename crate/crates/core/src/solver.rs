//! Solver-neutral problem representation and the default backend.
//!
//! Problems are stored in sparse triplet form (always minimization) and can
//! be dumped in the LP text format for inspection. The default backend runs
//! on the pure-Rust `microlp` branch-and-bound solver; SOS1 sets, which
//! `microlp` does not know about, are enforced by branching on the sets in
//! this layer: solve with the sets relaxed, and while some set has two
//! nonzero members, split it and re-solve both halves.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use thiserror::Error;

/// Reference to a variable in a [`LinearProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct VarDef {
    name: String,
    kind: VarKind,
    lower: f64,
    upper: f64,
    obj: f64,
}

#[derive(Debug, Clone)]
struct RowDef {
    name: String,
    terms: Vec<(VarId, f64)>,
    op: RowOp,
    rhs: f64,
}

/// A linear program in minimization form, optionally with binary variables
/// and SOS1 sets.
#[derive(Debug, Clone, Default)]
pub struct LinearProblem {
    vars: Vec<VarDef>,
    rows: Vec<RowDef>,
    sos1: Vec<(String, Vec<VarId>)>,
}

impl LinearProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        obj: f64,
    ) -> VarId {
        self.vars.push(VarDef {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
            obj,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.vars.push(VarDef {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
            obj,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        op: RowOp,
        rhs: f64,
    ) {
        self.rows.push(RowDef {
            name: name.into(),
            terms,
            op,
            rhs,
        });
    }

    /// Declare that at most one of `members` may be nonzero.
    pub fn add_sos1(&mut self, name: impl Into<String>, members: Vec<VarId>) {
        self.sos1.push((name.into(), members));
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_sos1(&self) -> usize {
        self.sos1.len()
    }

    pub fn has_binaries(&self) -> bool {
        self.vars.iter().any(|v| v.kind == VarKind::Binary)
    }

    /// Objective value of an assignment (no constant term is stored).
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .map(|(v, x)| v.obj * x)
            .sum()
    }

    /// Largest constraint or bound violation of an assignment. Used by
    /// tests to audit solutions against the stored matrix.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(VarId(i), c)| c * values[i]).sum();
            let viol = match row.op {
                RowOp::Le => lhs - row.rhs,
                RowOp::Ge => row.rhs - lhs,
                RowOp::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Largest SOS1 violation: the second-largest absolute member value
    /// over all sets.
    pub fn max_sos1_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (_, members) in &self.sos1 {
            let mut mags: Vec<f64> = members.iter().map(|&VarId(i)| values[i].abs()).collect();
            mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if mags.len() >= 2 {
                worst = worst.max(mags[1]);
            }
        }
        worst
    }

    /// Write the problem in the LP text format.
    pub fn write_lp(&self, w: &mut impl Write) -> io::Result<()> {
        let mut buf = String::new();
        buf.push_str("Minimize\n obj:");
        let mut any = false;
        for (i, v) in self.vars.iter().enumerate() {
            if v.obj != 0.0 {
                let _ = write!(buf, " {:+} {}", v.obj, lp_name(&v.name, i));
                any = true;
            }
        }
        if !any {
            let _ = write!(buf, " 0 {}", lp_name(&self.vars[0].name, 0));
        }
        buf.push_str("\nSubject To\n");
        for (ri, row) in self.rows.iter().enumerate() {
            let _ = write!(buf, " {}:", lp_name(&row.name, ri));
            for &(VarId(i), c) in &row.terms {
                let _ = write!(buf, " {:+} {}", c, lp_name(&self.vars[i].name, i));
            }
            let op = match row.op {
                RowOp::Le => "<=",
                RowOp::Ge => ">=",
                RowOp::Eq => "=",
            };
            let _ = writeln!(buf, " {} {}", op, row.rhs);
        }
        buf.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            if v.kind == VarKind::Binary {
                continue;
            }
            let name = lp_name(&v.name, i);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    let _ = writeln!(buf, " {} <= {} <= {}", v.lower, name, v.upper);
                }
                (true, false) => {
                    let _ = writeln!(buf, " {} >= {}", name, v.lower);
                }
                (false, true) => {
                    let _ = writeln!(buf, " -inf <= {} <= {}", name, v.upper);
                }
                (false, false) => {
                    let _ = writeln!(buf, " {} free", name);
                }
            }
        }
        if self.has_binaries() {
            buf.push_str("Binaries\n");
            for (i, v) in self.vars.iter().enumerate() {
                if v.kind == VarKind::Binary {
                    let _ = writeln!(buf, " {}", lp_name(&v.name, i));
                }
            }
        }
        if !self.sos1.is_empty() {
            buf.push_str("SOS\n");
            for (si, (name, members)) in self.sos1.iter().enumerate() {
                let _ = write!(buf, " {}: S1::", lp_name(name, si));
                for (k, &VarId(i)) in members.iter().enumerate() {
                    let _ = write!(buf, " {}:{}", lp_name(&self.vars[i].name, i), k + 1);
                }
                buf.push('\n');
            }
        }
        buf.push_str("End\n");
        w.write_all(buf.as_bytes())
    }
}

fn lp_name(name: &str, idx: usize) -> String {
    if name.is_empty() {
        return format!("v{idx}");
    }
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Limits applied to a single solve call.
#[derive(Debug, Clone, Default)]
pub struct SolveLimits {
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal at zero gap.
    Optimal,
    Infeasible,
    /// Budget exhausted; the best incumbent found is reported (if any).
    TimeLimit,
}

/// Result of a solve: status, objective and one value per variable in
/// declaration order. `values` is empty when no assignment is available.
#[derive(Debug, Clone)]
pub struct SolverSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
}

impl SolverSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverCapabilities {
    pub supports_sos1: bool,
    pub supports_binaries: bool,
    pub deterministic: bool,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver backend '{0}' is not available")]
    Unavailable(String),
    #[error("numeric failure in solver: {0}")]
    Numeric(String),
    #[error("malformed problem: {0}")]
    Malformed(String),
}

/// Abstraction over an LP/MILP solver.
pub trait SolverBackend: Send + Sync {
    fn id(&self) -> &str;
    fn capabilities(&self) -> SolverCapabilities;
    fn solve(&self, problem: &LinearProblem, limits: &SolveLimits)
        -> Result<SolverSolution, SolverError>;
}

/// Look up a backend by id. `microlp` is the only one built in.
pub fn backend_by_id(id: &str) -> Result<Box<dyn SolverBackend>, SolverError> {
    match id {
        "microlp" => Ok(Box::new(MicrolpBackend::default())),
        other => Err(SolverError::Unavailable(other.to_string())),
    }
}

/// Default backend: `microlp` for the LP/MILP relaxations, with SOS1
/// enforced by branching in this layer.
#[derive(Debug, Clone)]
pub struct MicrolpBackend {
    /// A member below this magnitude counts as zero for SOS purposes.
    pub sos_zero_tol: f64,
}

impl Default for MicrolpBackend {
    fn default() -> Self {
        MicrolpBackend { sos_zero_tol: 1e-9 }
    }
}

struct SosSearch<'a> {
    problem: &'a LinearProblem,
    sos_zero_tol: f64,
    deadline: Option<Instant>,
    incumbent: Option<(f64, Vec<f64>)>,
    timed_out: bool,
    saw_feasible_node: bool,
}

impl SolverBackend for MicrolpBackend {
    fn id(&self) -> &str {
        "microlp"
    }

    fn capabilities(&self) -> SolverCapabilities {
        SolverCapabilities {
            supports_sos1: true,
            supports_binaries: true,
            deterministic: true,
        }
    }

    fn solve(
        &self,
        problem: &LinearProblem,
        limits: &SolveLimits,
    ) -> Result<SolverSolution, SolverError> {
        if problem.num_vars() == 0 {
            return Err(SolverError::Malformed("problem has no variables".into()));
        }
        let deadline = limits.time_limit.map(|d| Instant::now() + d);
        let mut search = SosSearch {
            problem,
            sos_zero_tol: self.sos_zero_tol,
            deadline,
            incumbent: None,
            timed_out: false,
            saw_feasible_node: false,
        };
        let mut forced_zero = vec![false; problem.num_vars()];
        search.explore(&mut forced_zero)?;

        match (search.incumbent, search.timed_out) {
            (Some((objective, values)), false) => Ok(SolverSolution {
                status: SolveStatus::Optimal,
                objective,
                values,
            }),
            (Some((objective, values)), true) => Ok(SolverSolution {
                status: SolveStatus::TimeLimit,
                objective,
                values,
            }),
            (None, true) => Ok(SolverSolution {
                status: SolveStatus::TimeLimit,
                objective: f64::NAN,
                values: Vec::new(),
            }),
            (None, false) => Ok(SolverSolution {
                status: SolveStatus::Infeasible,
                objective: f64::NAN,
                values: Vec::new(),
            }),
        }
    }
}

impl SosSearch<'_> {
    fn explore(&mut self, forced_zero: &mut Vec<bool>) -> Result<(), SolverError> {
        if self.timed_out {
            return Ok(());
        }
        let remaining = match self.deadline {
            Some(d) => {
                let now = Instant::now();
                if now >= d {
                    self.timed_out = true;
                    return Ok(());
                }
                Some(d - now)
            }
            None => None,
        };
        // A forced-zero variable with a positive lower bound makes the
        // branch empty without solving.
        for (i, v) in self.problem.vars.iter().enumerate() {
            if forced_zero[i] && v.lower > 0.0 {
                return Ok(());
            }
        }

        let outcome = match solve_relaxation(self.problem, forced_zero, remaining) {
            Ok(o) => o,
            Err(microlp::Error::Infeasible) => return Ok(()),
            Err(microlp::Error::Unbounded) => {
                return Err(SolverError::Numeric("problem is unbounded".into()))
            }
            Err(e) => return Err(SolverError::Numeric(e.to_string())),
        };
        let (objective, values, proven) = outcome;
        if !proven {
            self.timed_out = true;
        }
        self.saw_feasible_node = true;

        // Bound: children are restrictions of this node.
        if let Some((best, _)) = &self.incumbent {
            if objective >= *best - 1e-9 {
                return Ok(());
            }
        }

        // Find a violated SOS1 set: two or more members away from zero.
        let violated = self.problem.sos1.iter().find_map(|(_, members)| {
            let nonzero: Vec<VarId> = members
                .iter()
                .copied()
                .filter(|&VarId(i)| !forced_zero[i] && values[i].abs() > self.sos_zero_tol)
                .collect();
            (nonzero.len() >= 2).then_some(nonzero)
        });

        match violated {
            None => {
                let better = self
                    .incumbent
                    .as_ref()
                    .map(|(best, _)| objective < *best)
                    .unwrap_or(true);
                if better {
                    self.incumbent = Some((objective, values));
                }
            }
            Some(nonzero) => {
                let mid = nonzero.len() / 2;
                for half in [&nonzero[..mid], &nonzero[mid..]] {
                    for &VarId(i) in half {
                        forced_zero[i] = true;
                    }
                    self.explore(forced_zero)?;
                    for &VarId(i) in half {
                        forced_zero[i] = false;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Solve the problem with SOS1 sets ignored, except that `forced_zero`
/// variables get a zero upper bound. Returns (objective, values, proven).
fn solve_relaxation(
    problem: &LinearProblem,
    forced_zero: &[bool],
    time_limit: Option<Duration>,
) -> Result<(f64, Vec<f64>, bool), microlp::Error> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let handles: Vec<microlp::Variable> = problem
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (lo, hi) = if forced_zero[i] {
                (0.0, 0.0)
            } else {
                (v.lower, v.upper)
            };
            match v.kind {
                VarKind::Continuous => lp.add_var(v.obj, (lo, hi)),
                VarKind::Binary => lp.add_integer_var(v.obj, (lo as i32, hi as i32)),
            }
        })
        .collect();
    for row in &problem.rows {
        let expr: Vec<(microlp::Variable, f64)> =
            row.terms.iter().map(|&(VarId(i), c)| (handles[i], c)).collect();
        let op = match row.op {
            RowOp::Le => ComparisonOp::Le,
            RowOp::Ge => ComparisonOp::Ge,
            RowOp::Eq => ComparisonOp::Eq,
        };
        lp.add_constraint(expr, op, row.rhs);
    }

    let mut options = microlp::SolveOptions::default();
    options.time_limit = time_limit;
    let outcome = lp.solve_with(options)?;
    let proven = outcome.is_optimal();
    let solution = outcome
        .solution()
        .ok_or_else(|| microlp::Error::InternalError("no incumbent within budget".into()))?;
    let values: Vec<f64> = handles.iter().map(|&h| solution.var_value(h)).collect();
    Ok((solution.objective(), values, proven))
}
