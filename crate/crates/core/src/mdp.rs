//! Tabular finite-horizon MDP types.
//!
//! All tables are dense and indexed with 0-based steps: `h` runs over
//! `0..horizon`, so step `h` here is step `h + 1` in the usual 1-based
//! notation.

use std::fmt;

use ndarray::{Array2, Array3, Array4, ArrayView1, ArrayView3};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Row-sum tolerance for transition kernels and policies.
pub const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    /// `p[[h, s, a, s']]`.
    transitions: Array4<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    EmptyDimension { what: &'static str },
    Shape { expected: [usize; 4], found: Vec<usize> },
    InitialState { state: usize, num_states: usize },
    NonFinite { h: usize, s: usize, a: usize, next: usize },
    Negative { h: usize, s: usize, a: usize, next: usize, value: f64 },
    RowSum { h: usize, s: usize, a: usize, sum: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyDimension { what } => write!(f, "{what} must be positive"),
            Self::Shape { expected, found } => {
                write!(f, "transition table shape {found:?}, expected {expected:?}")
            }
            Self::InitialState { state, num_states } => {
                write!(f, "initial state {state} out of range (S = {num_states})")
            }
            Self::NonFinite { h, s, a, next } => {
                write!(f, "p[h={h}][s={s}][a={a}][s'={next}] is not finite")
            }
            Self::Negative { h, s, a, next, value } => {
                write!(f, "p[h={h}][s={s}][a={a}][s'={next}] = {value} is negative")
            }
            Self::RowSum { h, s, a, sum } => {
                write!(f, "row p[h={h}][s={s}][a={a}] sums to {sum}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks shape, index ranges and row sums; never fails, only reports.
pub fn validate_mdp(mdp: &TabularMdp) -> ValidationReport {
    let mut issues = Vec::new();
    for (what, n) in [
        ("num_states", mdp.num_states),
        ("num_actions", mdp.num_actions),
        ("horizon", mdp.horizon),
    ] {
        if n == 0 {
            issues.push(ValidationIssue::EmptyDimension { what });
        }
    }
    let expected = [mdp.horizon, mdp.num_states, mdp.num_actions, mdp.num_states];
    if mdp.transitions.shape() != expected {
        issues.push(ValidationIssue::Shape {
            expected,
            found: mdp.transitions.shape().to_vec(),
        });
        return ValidationReport { issues };
    }
    if mdp.initial_state >= mdp.num_states {
        issues.push(ValidationIssue::InitialState {
            state: mdp.initial_state,
            num_states: mdp.num_states,
        });
    }
    for h in 0..mdp.horizon {
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                let mut sum = 0.0;
                for next in 0..mdp.num_states {
                    let value = mdp.transitions[[h, s, a, next]];
                    if !value.is_finite() {
                        issues.push(ValidationIssue::NonFinite { h, s, a, next });
                    } else if value < 0.0 {
                        issues.push(ValidationIssue::Negative { h, s, a, next, value });
                    }
                    sum += value;
                }
                if sum.is_finite() && (sum - 1.0).abs() > ROW_TOLERANCE {
                    issues.push(ValidationIssue::RowSum { h, s, a, sum });
                }
            }
        }
    }
    ValidationReport { issues }
}

impl TabularMdp {
    /// Builds and validates an MDP from a `[H, S, A, S]` transition table.
    pub fn new(initial_state: usize, transitions: Array4<f64>) -> Result<Self> {
        let mdp = Self::new_unchecked(initial_state, transitions);
        let report = validate_mdp(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(report.to_string()))
        }
    }

    /// Builds an MDP without validation; pair with [`validate_mdp`].
    pub fn new_unchecked(initial_state: usize, transitions: Array4<f64>) -> Self {
        let shape = transitions.shape();
        Self {
            horizon: shape[0],
            num_states: shape[1],
            num_actions: shape[2],
            initial_state,
            transitions,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transitions(&self) -> &Array4<f64> {
        &self.transitions
    }

    pub fn row(&self, h: usize, s: usize, a: usize) -> ArrayView1<'_, f64> {
        self.transitions.slice(ndarray::s![h, s, a, ..])
    }

    pub fn dims(&self) -> Dims {
        Dims {
            horizon: self.horizon,
            num_states: self.num_states,
            num_actions: self.num_actions,
        }
    }

    /// Random instance with Dirichlet(1) transition rows.
    pub fn random(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        rng: &mut RandomStream,
    ) -> Result<Self> {
        let mut p = Array4::zeros((horizon, num_states, num_actions, num_states));
        for h in 0..horizon {
            for s in 0..num_states {
                for a in 0..num_actions {
                    let draws: Vec<f64> = (0..num_states).map(|_| rng.exponential()).collect();
                    let total: f64 = draws.iter().sum();
                    for (next, d) in draws.iter().enumerate() {
                        p[[h, s, a, next]] = d / total;
                    }
                }
            }
        }
        normalize_rows(&mut p);
        Self::new(0, p)
    }
}

/// Renormalizes every last-axis row so it sums to one in floating point.
pub(crate) fn normalize_rows(p: &mut Array4<f64>) {
    for mut row in p.lanes_mut(ndarray::Axis(3)) {
        let total: f64 = row.sum();
        row.mapv_inplace(|x| x / total);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
}

impl Dims {
    pub fn shape3(&self) -> (usize, usize, usize) {
        (self.horizon, self.num_states, self.num_actions)
    }

    pub(crate) fn check3(&self, what: &str, shape: &[usize]) -> Result<()> {
        let expected = [self.horizon, self.num_states, self.num_actions];
        if shape != expected {
            return Err(Error::Dimension(format!(
                "{what} has shape {shape:?}, expected {expected:?}"
            )));
        }
        Ok(())
    }
}

/// Per-episode loss `ℓ[h, s, a] ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable(Array3<f64>);

impl LossTable {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        if let Some(((h, s, a), v)) = values
            .indexed_iter()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidLoss(format!(
                "loss[h={h}][s={s}][a={a}] = {v} is outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dims: Dims) -> Self {
        Self(Array3::zeros(dims.shape3()))
    }

    pub fn constant(dims: Dims, value: f64) -> Result<Self> {
        Self::new(Array3::from_elem(dims.shape3(), value))
    }

    pub fn uniform_random(dims: Dims, rng: &mut RandomStream) -> Self {
        Self(Array3::from_shape_simple_fn(dims.shape3(), || rng.uniform()))
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView3<'_, f64> {
        self.0.view()
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.0[[h, s, a]]
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.0
    }
}

/// Markov policy `π[h, s, a] = π_h(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(Array3<f64>);

impl Policy {
    pub fn new(probs: Array3<f64>) -> Result<Self> {
        for ((h, s), row) in probs
            .lanes(ndarray::Axis(2))
            .into_iter()
            .enumerate()
            .map(|(i, row)| ((i / probs.shape()[1], i % probs.shape()[1]), row))
        {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidPolicy(format!(
                    "row π[h={h}][s={s}] has a negative or non-finite entry"
                )));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidPolicy(format!(
                    "row π[h={h}][s={s}] sums to {sum}"
                )));
            }
        }
        Ok(Self(probs))
    }

    pub(crate) fn from_array_unchecked(probs: Array3<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(dims: Dims) -> Self {
        Self(Array3::from_elem(dims.shape3(), 1.0 / dims.num_actions as f64))
    }

    /// One-hot policy from `actions[[h, s]]`.
    pub fn deterministic(dims: Dims, actions: &Array2<usize>) -> Result<Self> {
        if actions.shape() != [dims.horizon, dims.num_states] {
            return Err(Error::Dimension(format!(
                "action table has shape {:?}, expected [{}, {}]",
                actions.shape(),
                dims.horizon,
                dims.num_states
            )));
        }
        let mut probs = Array3::zeros(dims.shape3());
        for ((h, s), &a) in actions.indexed_iter() {
            if a >= dims.num_actions {
                return Err(Error::InvalidPolicy(format!(
                    "action {a} at h={h}, s={s} out of range"
                )));
            }
            probs[[h, s, a]] = 1.0;
        }
        Ok(Self(probs))
    }

    /// Random policy with Dirichlet(1) rows.
    pub fn random(dims: Dims, rng: &mut RandomStream) -> Self {
        let mut probs = Array3::from_shape_simple_fn(dims.shape3(), || rng.exponential());
        for mut row in probs.lanes_mut(ndarray::Axis(2)) {
            let total = row.sum();
            row.mapv_inplace(|x| x / total);
        }
        Self(probs)
    }

    pub fn probs(&self) -> &Array3<f64> {
        &self.0
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.0[[h, s, a]]
    }

    pub fn row(&self, h: usize, s: usize) -> ArrayView1<'_, f64> {
        self.0.slice(ndarray::s![h, s, ..])
    }

    pub fn dims(&self) -> Dims {
        let shape = self.0.shape();
        Dims {
            horizon: shape[0],
            num_states: shape[1],
            num_actions: shape[2],
        }
    }

    /// The greedy action table when every row is one-hot.
    pub fn as_deterministic(&self) -> Option<Array2<usize>> {
        let dims = self.dims();
        let mut actions = Array2::zeros((dims.horizon, dims.num_states));
        for h in 0..dims.horizon {
            for s in 0..dims.num_states {
                let row = self.row(h, s);
                let a = row.iter().position(|&p| p == 1.0)?;
                if row.iter().filter(|&&p| p != 0.0).count() != 1 {
                    return None;
                }
                actions[[h, s]] = a;
            }
        }
        Some(actions)
    }
}

/// State-action occupancy `μ[h, s, a]` of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTable {
    pub(crate) mu: Array3<f64>,
}

impl OccupancyTable {
    pub fn values(&self) -> &Array3<f64> {
        &self.mu
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.mu[[h, s, a]]
    }

    /// `μ_h(s) = Σ_a μ_h(s, a)`.
    pub fn state(&self, h: usize, s: usize) -> f64 {
        self.mu.slice(ndarray::s![h, s, ..]).sum()
    }

    pub fn state_table(&self) -> Array2<f64> {
        self.mu.sum_axis(ndarray::Axis(2))
    }

    /// `⟨μ, ℓ⟩`, the expected total loss.
    pub fn inner(&self, loss: &LossTable) -> f64 {
        self.mu
            .iter()
            .zip(loss.values().iter())
            .map(|(m, l)| m * l)
            .sum()
    }
}

/// `(s_h, a_h)` pairs for `h = 0..H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn visited(&self, h: usize, s: usize, a: usize) -> bool {
        self.steps.get(h) == Some(&(s, a))
    }

    /// Sum of `loss` along the path.
    pub fn path_loss(&self, loss: &LossTable) -> f64 {
        self.steps
            .iter()
            .enumerate()
            .map(|(h, &(s, a))| loss.get(h, s, a))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_mdp(s: usize, a: usize, h: usize) -> Array4<f64> {
        Array4::from_elem((h, s, a, s), 1.0 / s as f64)
    }

    #[test]
    fn uniform_two_state_mdp_is_valid() {
        let mdp = TabularMdp::new_unchecked(0, uniform_mdp(2, 2, 3));
        assert!(validate_mdp(&mdp).is_ok());
    }

    #[test]
    fn short_row_is_reported_by_index() {
        let mut p = uniform_mdp(2, 2, 2);
        p[[1, 0, 1, 0]] = 0.4;
        let report = validate_mdp(&TabularMdp::new_unchecked(0, p));
        assert_eq!(report.issues.len(), 1);
        match &report.issues[0] {
            ValidationIssue::RowSum { h, s, a, sum } => {
                assert_eq!((*h, *s, *a), (1, 0, 1));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected issue {other:?}"),
        }
    }

    #[test]
    fn negative_entry_is_reported() {
        let mut p = uniform_mdp(2, 1, 1);
        p[[0, 1, 0, 0]] = -0.1;
        p[[0, 1, 0, 1]] = 1.1;
        let report = validate_mdp(&TabularMdp::new_unchecked(0, p));
        assert!(report.issues.iter().any(|i| matches!(
            i,
            ValidationIssue::Negative { h: 0, s: 1, a: 0, next: 0, .. }
        )));
    }

    #[test]
    fn initial_state_out_of_range() {
        let report = validate_mdp(&TabularMdp::new_unchecked(5, uniform_mdp(2, 2, 2)));
        assert!(matches!(report.issues[0], ValidationIssue::InitialState { .. }));
        assert!(TabularMdp::new(5, uniform_mdp(2, 2, 2)).is_err());
    }

    #[test]
    fn loss_table_rejects_out_of_range() {
        let mut v = Array3::zeros((1, 1, 2));
        v[[0, 0, 1]] = 1.5;
        assert!(LossTable::new(v).is_err());
    }

    #[test]
    fn policy_rows_checked() {
        let mut v = Array3::from_elem((1, 2, 2), 0.5);
        assert!(Policy::new(v.clone()).is_ok());
        v[[0, 1, 0]] = 0.6;
        assert!(Policy::new(v).is_err());
    }

    #[test]
    fn random_instances_are_valid() {
        let mut rng = RandomStream::new(3);
        let mdp = TabularMdp::random(4, 3, 5, &mut rng).unwrap();
        assert!(validate_mdp(&mdp).is_ok());
        let pi = Policy::random(mdp.dims(), &mut rng);
        assert!(Policy::new(pi.probs().clone()).is_ok());
    }
}
