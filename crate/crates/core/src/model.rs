//! Problem representation, penalty/Lagrangian conversion and energy evaluation.
//!
//! A [`ConstrainedProblem`] is a quadratic binary objective `f0(q)` plus linear
//! constraints `F_k(q) = C_k`, each carrying a penalty weight `lambda_k`. The
//! penalty form of the problem is
//!
//! ```text
//! f(q) = f0(q) + 1/2 * sum_k lambda_k * (F_k(q) - C_k)^2
//! ```
//!
//! and the linearized form handed to samplers is
//!
//! ```text
//! H(q, nu) = f0(q) - sum_k nu_k * (F_k(q) - C_k) - sum_k nu_k^2 / (2 lambda_k)
//! ```
//!
//! Everything is stored in binary (`q in {0,1}`) form. Spin-form inputs are
//! converted with `q = (1 + sigma) / 2` and tagged with [`Encoding::Spin`].

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when deciding whether `F_k(q) = C_k` holds.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("constraint {0} has an infinite penalty weight and has no penalty-form energy")]
    InfinitePenalty(usize),
    #[error("index {index} out of range for {n_vars} variables")]
    IndexOutOfRange { index: usize, n_vars: usize },
    #[error("constraint {0} has no nonzero coefficient")]
    EmptyConstraint(usize),
    #[error("constraint {0} is tagged hard-onehot but is not of the form sum q_i = 1")]
    MalformedOnehot(usize),
    #[error("index {0} appears in more than one hard-onehot group")]
    OverlappingOnehot(usize),
    #[error("penalty weight must be positive and finite, got {0}")]
    InvalidPenalty(f64),
    #[error("entry {0} is not a valid {1} value")]
    InvalidEntry(i64, &'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid problem document: {0}")]
    Document(String),
}

/// Which variable convention a problem was originally written in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Binary,
    Spin,
}

/// A configuration `q in {0,1}^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BinaryVector(Vec<u8>);

impl BinaryVector {
    pub fn new(bits: Vec<u8>) -> Result<Self, ModelError> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(ModelError::InvalidEntry(i64::from(b), "binary"));
        }
        Ok(BinaryVector(bits))
    }

    pub fn zeros(n: usize) -> Self {
        BinaryVector(vec![0; n])
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        BinaryVector(bits.iter().map(|&b| u8::from(b)).collect())
    }

    pub(crate) fn from_raw(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        BinaryVector(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = u8::from(bit);
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn to_spins(&self) -> SpinVector {
        SpinVector(self.0.iter().map(|&b| 2 * b as i8 - 1).collect())
    }

    /// Squared Hamming distance divided by `N`.
    pub fn mse(&self, other: &BinaryVector) -> f64 {
        assert_eq!(self.len(), other.len());
        if self.is_empty() {
            return 0.0;
        }
        let diff = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        diff as f64 / self.len() as f64
    }
}

impl TryFrom<Vec<u8>> for BinaryVector {
    type Error = ModelError;
    fn try_from(bits: Vec<u8>) -> Result<Self, Self::Error> {
        BinaryVector::new(bits)
    }
}

impl From<BinaryVector> for Vec<u8> {
    fn from(v: BinaryVector) -> Self {
        v.0
    }
}

/// A configuration `sigma in {-1,+1}^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(spins: Vec<i8>) -> Result<Self, ModelError> {
        if let Some(&s) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(ModelError::InvalidEntry(i64::from(s), "spin"));
        }
        Ok(SpinVector(spins))
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_binary(&self) -> BinaryVector {
        BinaryVector(self.0.iter().map(|&s| ((s + 1) / 2) as u8).collect())
    }
}

/// Sparse `constant + sum_i l_i q_i + sum_{i<j} J_ij q_i q_j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadraticObjective {
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    constant: f64,
}

impl QuadraticObjective {
    pub fn new() -> Self {
        Self::default()
    }

    /// Field-only objective from a dense coefficient slice.
    pub fn from_linear(coeffs: &[f64]) -> Self {
        let mut obj = Self::new();
        for (i, &c) in coeffs.iter().enumerate() {
            obj.add_linear(i, c);
        }
        obj
    }

    /// Builds a binary-form objective from spin-form fields and couplings:
    /// `constant + sum_i h_i s_i + sum_{i<j} J_ij s_i s_j`.
    pub fn from_spin(
        fields: impl IntoIterator<Item = (usize, f64)>,
        couplings: impl IntoIterator<Item = ((usize, usize), f64)>,
        constant: f64,
    ) -> Self {
        let mut obj = Self::new();
        obj.constant = constant;
        for (i, h) in fields {
            obj.add_linear(i, 2.0 * h);
            obj.constant -= h;
        }
        for ((i, j), coupling) in couplings {
            obj.add_quadratic(i, j, 4.0 * coupling);
            obj.add_linear(i, -2.0 * coupling);
            obj.add_linear(j, -2.0 * coupling);
            obj.constant += coupling;
        }
        obj
    }

    pub fn add_linear(&mut self, i: usize, coeff: f64) {
        *self.linear.entry(i).or_insert(0.0) += coeff;
    }

    /// Adds `coeff * q_i * q_j`. A diagonal term folds into the linear part
    /// because `q_i^2 = q_i`.
    pub fn add_quadratic(&mut self, i: usize, j: usize, coeff: f64) {
        if i == j {
            self.add_linear(i, coeff);
            return;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        *self.quadratic.entry(key).or_insert(0.0) += coeff;
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear_coeff(&self, i: usize) -> f64 {
        self.linear.get(&i).copied().unwrap_or(0.0)
    }

    /// True when no quadratic coefficient is nonzero.
    pub fn is_field_only(&self) -> bool {
        self.quadratic.values().all(|&c| c == 0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        let lin = self.linear.keys().next_back().copied();
        let quad = self.quadratic.keys().map(|&(_, j)| j).max();
        lin.max(quad)
    }

    /// Dense linear coefficients of length `n`.
    pub fn dense_linear(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &c) in &self.linear {
            out[i] += c;
        }
        out
    }

    /// Evaluates the objective. The caller guarantees `q` covers every index.
    pub fn evaluate(&self, q: &[u8]) -> f64 {
        let mut e = self.constant;
        for (&i, &c) in &self.linear {
            if q[i] == 1 {
                e += c;
            }
        }
        for (&(i, j), &c) in &self.quadratic {
            if q[i] == 1 && q[j] == 1 {
                e += c;
            }
        }
        e
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        let ok = self.constant.is_finite()
            && self.linear.values().all(|c| c.is_finite())
            && self.quadratic.values().all(|c| c.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ModelError::NonFinite("objective"))
        }
    }
}

/// Penalty weight `lambda_k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PenaltyWeight {
    Finite(f64),
    /// The `lambda -> infinity` limit: the constraint is only enforced through
    /// its multiplier and contributes no regularizer.
    #[default]
    Infinite,
}

impl PenaltyWeight {
    pub fn is_finite(&self) -> bool {
        matches!(self, PenaltyWeight::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            PenaltyWeight::Finite(w) => Some(w),
            PenaltyWeight::Infinite => None,
        }
    }
}

impl Serialize for PenaltyWeight {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            PenaltyWeight::Finite(w) => s.serialize_f64(w),
            PenaltyWeight::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for PenaltyWeight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct WeightVisitor;
        impl Visitor<'_> for WeightVisitor {
            type Value = PenaltyWeight;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or the string \"infinite\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(PenaltyWeight::Finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(PenaltyWeight::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(PenaltyWeight::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "infinite" {
                    Ok(PenaltyWeight::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(WeightVisitor)
    }
}

/// `F_k(q) = sum_i a_{k,i} q_i = C_k` with penalty weight `lambda_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    coeffs: BTreeMap<usize, f64>,
    target: f64,
    penalty: PenaltyWeight,
    hard_onehot: bool,
}

impl LinearConstraint {
    /// A constraint with infinite penalty weight. Repeated indices accumulate.
    pub fn new(coeffs: impl IntoIterator<Item = (usize, f64)>, target: f64) -> Self {
        let mut map = BTreeMap::new();
        for (i, a) in coeffs {
            *map.entry(i).or_insert(0.0) += a;
        }
        LinearConstraint {
            coeffs: map,
            target,
            penalty: PenaltyWeight::Infinite,
            hard_onehot: false,
        }
    }

    pub fn from_dense(coeffs: &[f64], target: f64) -> Self {
        Self::new(
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, &a)| a != 0.0)
                .map(|(i, &a)| (i, a)),
            target,
        )
    }

    /// Spin-form constraint `sum_i a_i s_i = target`, rewritten over `q`.
    pub fn from_spin(coeffs: impl IntoIterator<Item = (usize, f64)>, target: f64) -> Self {
        let mut shift = 0.0;
        let doubled: Vec<(usize, f64)> = coeffs
            .into_iter()
            .map(|(i, a)| {
                shift += a;
                (i, 2.0 * a)
            })
            .collect();
        Self::new(doubled, target + shift)
    }

    /// `sum_{i in group} q_i = 1`, enforced inside samplers.
    pub fn onehot(group: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Self::new(group.into_iter().map(|i| (i, 1.0)), 1.0);
        c.hard_onehot = true;
        c
    }

    pub fn with_penalty(mut self, penalty: PenaltyWeight) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, f64> {
        &self.coeffs
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn penalty(&self) -> PenaltyWeight {
        self.penalty
    }

    pub fn is_hard_onehot(&self) -> bool {
        self.hard_onehot
    }

    pub fn value(&self, q: &[u8]) -> f64 {
        let mut f = 0.0;
        for (&i, &a) in &self.coeffs {
            if q[i] == 1 {
                f += a;
            }
        }
        f
    }

    /// Same as [`value`](Self::value) for fractional `q`.
    pub fn value_fractional(&self, q: &[f64]) -> f64 {
        self.coeffs.iter().map(|(&i, &a)| a * q[i]).sum()
    }

    fn scale(&self) -> f64 {
        let s: f64 = self.coeffs.values().map(|a| a.abs()).sum();
        s.max(self.target.abs()).max(1.0)
    }

    /// Whether `value` equals the target up to [`FEASIBILITY_RTOL`].
    pub fn is_satisfied_by(&self, value: f64) -> bool {
        (value - self.target).abs() <= FEASIBILITY_RTOL * self.scale()
    }
}

/// Lagrange multipliers `nu`, one per constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierState {
    pub nu: Vec<f64>,
    pub iteration: usize,
}

impl MultiplierState {
    pub fn new(nu: Vec<f64>) -> Result<Self, ModelError> {
        if nu.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("multipliers"));
        }
        Ok(MultiplierState { nu, iteration: 0 })
    }

    pub fn zeros(k: usize) -> Self {
        MultiplierState {
            nu: vec![0.0; k],
            iteration: 0,
        }
    }

    pub fn filled(k: usize, value: f64) -> Self {
        MultiplierState {
            nu: vec![value; k],
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }
}

/// The linearized model `f0(q) - sum_k nu_k F_k(q) + const` handed to samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModel {
    pub n_vars: usize,
    pub objective: QuadraticObjective,
    /// Groups kept as hard `sum q_i = 1` constraints inside the sampler.
    pub onehot_groups: Vec<Vec<usize>>,
}

impl EffectiveModel {
    pub fn new(
        n_vars: usize,
        objective: QuadraticObjective,
        onehot_groups: Vec<Vec<usize>>,
    ) -> Result<Self, ModelError> {
        if let Some(m) = objective.max_index() {
            if m >= n_vars {
                return Err(ModelError::IndexOutOfRange { index: m, n_vars });
            }
        }
        check_groups(n_vars, &onehot_groups)?;
        Ok(EffectiveModel {
            n_vars,
            objective,
            onehot_groups,
        })
    }

    pub fn energy(&self, q: &[u8]) -> f64 {
        self.objective.evaluate(q)
    }

    pub fn is_field_only(&self) -> bool {
        self.objective.is_field_only()
    }

    /// Whether every one-hot group has exactly one active member.
    pub fn satisfies_groups(&self, q: &[u8]) -> bool {
        self.onehot_groups
            .iter()
            .all(|g| g.iter().filter(|&&i| q[i] == 1).count() == 1)
    }
}

pub(crate) fn check_groups(n_vars: usize, groups: &[Vec<usize>]) -> Result<(), ModelError> {
    let mut seen = vec![false; n_vars];
    for g in groups {
        for &i in g {
            if i >= n_vars {
                return Err(ModelError::IndexOutOfRange { index: i, n_vars });
            }
            if seen[i] {
                return Err(ModelError::OverlappingOnehot(i));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

/// Base objective plus linear constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProblem {
    n_vars: usize,
    base: QuadraticObjective,
    constraints: Vec<LinearConstraint>,
    encoding: Encoding,
}

impl ConstrainedProblem {
    pub fn new(
        n_vars: usize,
        base: QuadraticObjective,
        constraints: Vec<LinearConstraint>,
    ) -> Result<Self, ModelError> {
        base.check_finite()?;
        if let Some(m) = base.max_index() {
            if m >= n_vars {
                return Err(ModelError::IndexOutOfRange { index: m, n_vars });
            }
        }
        for (k, c) in constraints.iter().enumerate() {
            if c.coeffs.values().all(|&a| a == 0.0) {
                return Err(ModelError::EmptyConstraint(k));
            }
            if let Some((&i, _)) = c.coeffs.iter().next_back() {
                if i >= n_vars {
                    return Err(ModelError::IndexOutOfRange { index: i, n_vars });
                }
            }
            if !c.target.is_finite() || c.coeffs.values().any(|a| !a.is_finite()) {
                return Err(ModelError::NonFinite("constraint"));
            }
            if let PenaltyWeight::Finite(w) = c.penalty {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(ModelError::InvalidPenalty(w));
                }
            }
            if c.hard_onehot && (c.target != 1.0 || c.coeffs.values().any(|&a| a != 1.0)) {
                return Err(ModelError::MalformedOnehot(k));
            }
        }
        let problem = ConstrainedProblem {
            n_vars,
            base,
            constraints,
            encoding: Encoding::Binary,
        };
        check_groups(n_vars, &problem.onehot_groups())?;
        Ok(problem)
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn base(&self) -> &QuadraticObjective {
        &self.base
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn targets(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.target).collect()
    }

    pub fn onehot_groups(&self) -> Vec<Vec<usize>> {
        self.constraints
            .iter()
            .filter(|c| c.hard_onehot)
            .map(|c| c.coeffs.keys().copied().collect())
            .collect()
    }

    fn check_len(&self, q: &BinaryVector) -> Result<(), ModelError> {
        if q.len() != self.n_vars {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_vars,
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// `f0(q) + 1/2 sum_k lambda_k (F_k(q) - C_k)^2`. Fails if any weight is
    /// infinite.
    pub fn evaluate_penalty_form(&self, q: &BinaryVector) -> Result<f64, ModelError> {
        self.check_len(q)?;
        if let Some(k) = self.constraints.iter().position(|c| !c.penalty.is_finite()) {
            return Err(ModelError::InfinitePenalty(k));
        }
        Ok(self.penalty_energy_unchecked(q.as_slice()))
    }

    /// Penalty-form energy in which infinite weights count as unit weight.
    ///
    /// Equals [`evaluate_penalty_form`](Self::evaluate_penalty_form) when all
    /// weights are finite, and `f0(q)` plus finite penalties on configurations
    /// satisfying every infinite-weight constraint. Used to rank incumbents
    /// and to report residual energies.
    pub fn penalty_energy(&self, q: &BinaryVector) -> Result<f64, ModelError> {
        self.check_len(q)?;
        Ok(self.penalty_energy_unchecked(q.as_slice()))
    }

    pub(crate) fn penalty_energy_unchecked(&self, q: &[u8]) -> f64 {
        let mut e = self.base.evaluate(q);
        for c in &self.constraints {
            let w = c.penalty.value().unwrap_or(1.0);
            let d = c.value(q) - c.target;
            e += 0.5 * w * d * d;
        }
        e
    }

    pub fn constraint_values(&self, q: &BinaryVector) -> Result<Vec<f64>, ModelError> {
        self.check_len(q)?;
        Ok(self.constraint_values_unchecked(q.as_slice()))
    }

    pub(crate) fn constraint_values_unchecked(&self, q: &[u8]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(q)).collect()
    }

    /// Whether every infinite-weight constraint (including one-hot groups)
    /// holds. Finite-weight constraints are soft and never make `q` infeasible.
    pub fn is_feasible(&self, q: &BinaryVector) -> Result<bool, ModelError> {
        self.check_len(q)?;
        Ok(self.is_feasible_unchecked(q.as_slice()))
    }

    pub(crate) fn is_feasible_unchecked(&self, q: &[u8]) -> bool {
        self.constraints
            .iter()
            .filter(|c| !c.penalty.is_finite())
            .all(|c| c.is_satisfied_by(c.value(q)))
    }

    /// Linearizes every constraint not tagged hard-onehot with multipliers `nu`.
    ///
    /// The returned objective is `f0(q) - sum_k nu_k F_k(q)` with constant
    /// `sum_k nu_k C_k - sum_{k: lambda finite} nu_k^2 / (2 lambda_k)`.
    pub fn build_effective(&self, nu: &MultiplierState) -> Result<EffectiveModel, ModelError> {
        if nu.len() != self.constraints.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.constraints.len(),
                actual: nu.len(),
            });
        }
        let mut objective = self.base.clone();
        for (c, &v) in self.constraints.iter().zip(&nu.nu) {
            if c.hard_onehot {
                continue;
            }
            for (&i, &a) in &c.coeffs {
                objective.add_linear(i, -v * a);
            }
            objective.add_constant(v * c.target);
            if let PenaltyWeight::Finite(w) = c.penalty {
                objective.add_constant(-v * v / (2.0 * w));
            }
        }
        Ok(EffectiveModel {
            n_vars: self.n_vars,
            objective,
            onehot_groups: self.onehot_groups(),
        })
    }

    /// Dual gradient `C_k - <F_k>`. With `nu` supplied, finite-weight entries
    /// become `C_k - <F_k> - nu_k / lambda_k`.
    pub fn residual(
        &self,
        expectations: &[f64],
        nu: Option<&MultiplierState>,
    ) -> Result<Vec<f64>, ModelError> {
        if expectations.len() != self.constraints.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.constraints.len(),
                actual: expectations.len(),
            });
        }
        if let Some(nu) = nu {
            if nu.len() != self.constraints.len() {
                return Err(ModelError::DimensionMismatch {
                    expected: self.constraints.len(),
                    actual: nu.len(),
                });
            }
        }
        Ok(self
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let mut r = c.target - expectations[k];
                if let (Some(nu), PenaltyWeight::Finite(w)) = (nu, c.penalty) {
                    r -= nu.nu[k] / w;
                }
                r
            })
            .collect())
    }

    /// Expands every squared penalty term into a QUBO. Fails on infinite
    /// weights.
    pub fn to_penalty_qubo(&self) -> Result<QuadraticObjective, ModelError> {
        let mut obj = self.base.clone();
        for (k, c) in self.constraints.iter().enumerate() {
            let w = c.penalty.value().ok_or(ModelError::InfinitePenalty(k))?;
            add_squared_penalty(&mut obj, c, w);
        }
        Ok(obj)
    }

    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument {
            n_vars: self.n_vars,
            base: ObjectiveDoc(self.base.clone()),
            constraints: self.constraints.iter().map(ConstraintDoc::from).collect(),
            encoding: self.encoding,
        }
    }

    pub fn from_document(doc: ProblemDocument) -> Result<Self, ModelError> {
        let constraints = doc.constraints.into_iter().map(LinearConstraint::from).collect();
        Ok(Self::new(doc.n_vars, doc.base.0, constraints)?.with_encoding(doc.encoding))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("problem documents always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let doc: ProblemDocument =
            serde_json::from_str(s).map_err(|e| ModelError::Document(e.to_string()))?;
        Self::from_document(doc)
    }
}

/// Adds `w/2 (sum_i a_i q_i - C)^2` to `obj`, using `q_i^2 = q_i`.
pub(crate) fn add_squared_penalty(obj: &mut QuadraticObjective, c: &LinearConstraint, w: f64) {
    let terms: Vec<(usize, f64)> = c.coeffs.iter().map(|(&i, &a)| (i, a)).collect();
    for (n, &(i, a)) in terms.iter().enumerate() {
        obj.add_linear(i, 0.5 * w * (a * a - 2.0 * c.target * a));
        for &(j, b) in &terms[n + 1..] {
            obj.add_quadratic(i, j, w * a * b);
        }
    }
    obj.add_constant(0.5 * w * c.target * c.target);
}

/// Largest absolute entry, zero for an empty slice.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

/// Serialized problem: `{n_vars, base: {linear, quadratic, constant},
/// constraints: [{coeffs, target, lambda, hard_onehot}], encoding}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub n_vars: usize,
    pub base: ObjectiveDoc,
    pub constraints: Vec<ConstraintDoc>,
    #[serde(default)]
    pub encoding: Encoding,
}

/// Objective wrapper serializing index keys as strings (`"3"`, `"1,4"`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectiveDoc(pub QuadraticObjective);

struct IndexMap<'a>(&'a BTreeMap<usize, f64>);

impl Serialize for IndexMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (i, c) in self.0 {
            m.serialize_entry(&i.to_string(), c)?;
        }
        m.end()
    }
}

struct PairMap<'a>(&'a BTreeMap<(usize, usize), f64>);

impl Serialize for PairMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for ((i, j), c) in self.0 {
            m.serialize_entry(&format!("{i},{j}"), c)?;
        }
        m.end()
    }
}

fn parse_index_map<E: de::Error>(raw: BTreeMap<String, f64>) -> Result<BTreeMap<usize, f64>, E> {
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<usize>()
                .map(|i| (i, v))
                .map_err(|_| E::custom(format!("bad index key {k:?}")))
        })
        .collect()
}

fn parse_pair_map<E: de::Error>(
    raw: BTreeMap<String, f64>,
) -> Result<BTreeMap<(usize, usize), f64>, E> {
    raw.into_iter()
        .map(|(k, v)| {
            let (a, b) = k
                .split_once(',')
                .ok_or_else(|| E::custom(format!("bad pair key {k:?}")))?;
            let i = a.trim().parse::<usize>().map_err(E::custom)?;
            let j = b.trim().parse::<usize>().map_err(E::custom)?;
            if i >= j {
                return Err(E::custom(format!("pair key {k:?} must have i < j")));
            }
            Ok(((i, j), v))
        })
        .collect()
}

#[derive(Serialize)]
struct ObjectiveOut<'a> {
    linear: IndexMap<'a>,
    quadratic: PairMap<'a>,
    constant: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveIn {
    #[serde(default)]
    linear: BTreeMap<String, f64>,
    #[serde(default)]
    quadratic: BTreeMap<String, f64>,
    #[serde(default)]
    constant: f64,
}

impl Serialize for ObjectiveDoc {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ObjectiveOut {
            linear: IndexMap(&self.0.linear),
            quadratic: PairMap(&self.0.quadratic),
            constant: self.0.constant,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObjectiveDoc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ObjectiveIn::deserialize(d)?;
        Ok(ObjectiveDoc(QuadraticObjective {
            linear: parse_index_map(raw.linear)?,
            quadratic: parse_pair_map(raw.quadratic)?,
            constant: raw.constant,
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDoc(pub LinearConstraint);

#[derive(Serialize)]
struct ConstraintOut<'a> {
    coeffs: IndexMap<'a>,
    target: f64,
    lambda: PenaltyWeight,
    hard_onehot: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintIn {
    coeffs: BTreeMap<String, f64>,
    target: f64,
    #[serde(default)]
    lambda: PenaltyWeight,
    #[serde(default)]
    hard_onehot: bool,
}

impl Serialize for ConstraintDoc {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ConstraintOut {
            coeffs: IndexMap(&self.0.coeffs),
            target: self.0.target,
            lambda: self.0.penalty,
            hard_onehot: self.0.hard_onehot,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConstraintDoc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ConstraintIn::deserialize(d)?;
        Ok(ConstraintDoc(LinearConstraint {
            coeffs: parse_index_map(raw.coeffs)?,
            target: raw.target,
            penalty: raw.lambda,
            hard_onehot: raw.hard_onehot,
        }))
    }
}

impl From<&LinearConstraint> for ConstraintDoc {
    fn from(c: &LinearConstraint) -> Self {
        ConstraintDoc(c.clone())
    }
}

impl From<ConstraintDoc> for LinearConstraint {
    fn from(d: ConstraintDoc) -> Self {
        d.0
    }
}
