//! Keyed encoding, adversarial Pauli injection and iterative unambiguous
//! list decoding.
//!
//! States are kept in the encoder frame: a physical state `C(χ ⊗ |a⟩)` is
//! stored as the dense logical vector `χ` on `n + m` qubits plus the
//! ancilla basis bits `a`, which are exactly the syndrome bits. A physical
//! Pauli `E` with `C† E C = P ⊗ A` acts as `χ ↦ Pχ` up to a phase from `A`
//! and `a ↦ a ⊕ x(A)`. Dense physical states are only built on request.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::listdec::{build_list_table, logical_list_errors, measure_syndrome, ErrorSet, ListTable};
use crate::pauli::{i_pow, Letter, PauliOperator};
use crate::randunitary::{keyed_unitary, parse_key, random_state, UnitaryKind, UnitarySource};
use crate::simengine::{apply_unitary, StateVector, EMPTY_BRANCH_PROB};
use crate::stabilizer::{library, StabilizerCode, Syndrome};

/// Largest logical register `n + m` handled with dense keyed unitaries.
pub const MAX_PROTOCOL_QUBITS: usize = 10;
/// Largest code for the physical-space cross-check.
pub const MAX_PHYSICAL_QUBITS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub fidelity: f64,
    pub branch_sum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fidelity: 1e-10,
            branch_sum: 1e-10,
        }
    }
}

fn default_kind() -> UnitaryKind {
    UnitaryKind::KeyedHaar
}

/// Serializable protocol parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: usize,
    pub m: usize,
    /// Builtin name, `name^k`, or path to a code file.
    pub code: String,
    pub max_weight: usize,
    /// Up to 32 hex digits.
    pub key: String,
    #[serde(default = "default_kind")]
    pub unitary_kind: UnitaryKind,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.n + self.m > MAX_PROTOCOL_QUBITS {
            return Err(Error::Capacity {
                what: "logical register n + m",
                value: self.n + self.m,
                limit: MAX_PROTOCOL_QUBITS,
            });
        }
        if !self.unitary_kind.is_keyed() {
            return Err(Error::Config(format!("unitary_kind must be keyed, got {:?}", self.unitary_kind)));
        }
        parse_key(&self.key)?;
        Ok(())
    }
}

/// Encoder-frame state `C(χ ⊗ |a⟩)`.
#[derive(Clone, Debug)]
pub struct EncodedState {
    logical: StateVector,
    ancilla: Vec<bool>,
}

impl EncodedState {
    pub fn new(logical: StateVector, ancilla: Vec<bool>) -> Self {
        Self { logical, ancilla }
    }

    pub fn logical(&self) -> &StateVector {
        &self.logical
    }

    pub fn ancilla(&self) -> &[bool] {
        &self.ancilla
    }

    /// Syndrome of the state; ancilla bit `j` is the outcome of generator `j`.
    pub fn syndrome(&self) -> Syndrome {
        Syndrome::new(self.ancilla.clone())
    }

    /// Applies `P ⊗ A` given as a logical/ancilla split.
    pub fn apply_split(&self, logical: &PauliOperator, ancilla: &PauliOperator) -> Result<Self> {
        check_dim(self.ancilla.len(), ancilla.n())?;
        let mut k = 0u32;
        let mut bits = self.ancilla.clone();
        for (j, b) in bits.iter_mut().enumerate() {
            let (x, z) = (ancilla.x_bit(j), ancilla.z_bit(j));
            if x && z {
                k += 1;
            }
            if z && *b {
                k += 2;
            }
            *b ^= x;
        }
        let mut chi = self.logical.apply_pauli(logical)?;
        chi.scale(i_pow(ancilla.phase() as u32 + k));
        Ok(Self {
            logical: chi,
            ancilla: bits,
        })
    }

    /// Applies a physical Pauli.
    pub fn apply_physical(&self, code: &StabilizerCode, e: &PauliOperator) -> Result<Self> {
        let (p, a) = code.logical_split(e)?;
        self.apply_split(&p, &a)
    }

    /// Dense physical vector, for codes small enough to hold densely.
    pub fn to_physical(&self, code: &StabilizerCode) -> Result<StateVector> {
        let k = code.n_logical();
        let mut v = code.encode_state(&self.logical)?;
        for (j, &b) in self.ancilla.iter().enumerate() {
            if b {
                v = v.apply_pauli(code.encoding_tableau().x_image(k + j))?;
            }
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriedBranch {
    pub index: usize,
    pub pass_probability: f64,
    pub passed: bool,
}

/// Record of one decode call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub round: usize,
    pub injected_error: Option<PauliOperator>,
    pub syndrome: Syndrome,
    pub list: Vec<PauliOperator>,
    pub tried: Vec<TriedBranch>,
    pub found_index: Option<usize>,
    /// Fidelity with the reference input; `None` on decode failure or
    /// when no reference was supplied.
    pub final_fidelity: Option<f64>,
}

impl Transcript {
    pub fn failed(&self) -> bool {
        self.found_index.is_none()
    }
}

pub fn to_jsonl(transcripts: &[Transcript]) -> Result<String> {
    let mut s = String::new();
    for t in transcripts {
        s.push_str(&serde_json::to_string(t)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn from_jsonl(text: &str) -> Result<Vec<Transcript>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Per-round fidelities with decode failures counted as zero.
pub fn fidelity_series(transcripts: &[Transcript]) -> Vec<f64> {
    transcripts.iter().map(|t| t.final_fidelity.unwrap_or(0.0)).collect()
}

/// Result of one guess `b` of the decoding loop.
#[derive(Clone, Debug)]
pub struct GuessOutcome {
    pub pass_probability: f64,
    /// Normalized data register after a pass.
    pub passed: Option<StateVector>,
    /// Unnormalized `E_b U (I − Π) U† E_b† ψ` after a fail.
    pub restored: Option<EncodedState>,
}

#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    pub state: Option<StateVector>,
    pub transcript: Transcript,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchLeaf {
    /// Outcomes of the tried guesses, `true` for pass.
    pub path: Vec<bool>,
    pub probability: f64,
    pub found_index: Option<usize>,
    pub fidelity: Option<f64>,
}

/// Every leaf of the pass/fail decision tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchTree {
    pub leaves: Vec<BranchLeaf>,
}

impl BranchTree {
    pub fn total_probability(&self) -> f64 {
        self.leaves.iter().map(|l| l.probability).sum()
    }

    pub fn failure_probability(&self) -> f64 {
        self.leaves
            .iter()
            .filter(|l| l.found_index.is_none())
            .map(|l| l.probability)
            .sum()
    }

    /// `Σ p·F` over successful leaves, failures contributing zero.
    pub fn expected_fidelity(&self) -> f64 {
        self.leaves
            .iter()
            .map(|l| l.probability * l.fidelity.unwrap_or(0.0))
            .sum()
    }
}

/// A configured protocol instance holding the key.
#[derive(Clone, Debug)]
pub struct Protocol {
    config: ProtocolConfig,
    code: Arc<StabilizerCode>,
    table: Arc<ListTable>,
    u: DMatrix<Complex64>,
    u_dag: DMatrix<Complex64>,
}

impl Protocol {
    /// Resolves the code and builds the weight-bounded list table.
    pub fn new(config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let code = library::resolve(&config.code)?;
        let table = build_list_table(&code, &ErrorSet::new(code.n_physical(), config.max_weight))?;
        Self::from_parts(config, Arc::new(code), Arc::new(table))
    }

    pub fn from_parts(config: &ProtocolConfig, code: Arc<StabilizerCode>, table: Arc<ListTable>) -> Result<Self> {
        config.validate()?;
        if code.n_logical() != config.n + config.m {
            return Err(Error::Config(format!(
                "code {} has {} logical qubits, need n + m = {}",
                code.name(),
                code.n_logical(),
                config.n + config.m
            )));
        }
        check_dim(code.n_physical(), table.n())?;
        let key = parse_key(&config.key)?;
        let u = keyed_unitary(key, config.n + config.m, config.unitary_kind)?.to_dense()?;
        let u_dag = u.adjoint();
        Ok(Self {
            config: config.clone(),
            code,
            table,
            u,
            u_dag,
        })
    }

    /// Same code and table under another key.
    pub fn with_key(&self, key: u128) -> Result<Self> {
        let mut cfg = self.config.clone();
        cfg.key = crate::randunitary::format_key(key);
        Self::from_parts(&cfg, self.code.clone(), self.table.clone())
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn code(&self) -> &Arc<StabilizerCode> {
        &self.code
    }

    pub fn table(&self) -> &Arc<ListTable> {
        &self.table
    }

    /// `U_λ (φ ⊗ |0⟩^m)` in the clean code frame.
    pub fn encode(&self, logical: &StateVector) -> Result<EncodedState> {
        check_dim(1usize << self.n(), logical.dim())?;
        let chi = apply_unitary(&self.u, &crate::simengine::tensor(logical, &StateVector::zero(self.m())))?;
        Ok(EncodedState::new(chi, vec![false; self.code.n_generators()]))
    }

    /// One guess: undo `P_b ⊗ A_b`, undo `U_λ`, measure the tag register.
    pub fn guess(&self, state: &EncodedState, split: &(PauliOperator, PauliOperator)) -> Result<GuessOutcome> {
        let undone = state.apply_split(&split.0.adjoint(), &split.1)?;
        if undone.ancilla.iter().any(|&b| b) {
            return Err(Error::ContractViolation("list element does not match the syndrome".into()));
        }
        let v = apply_unitary(&self.u_dag, &undone.logical)?;
        let tag = (1usize << self.m()) - 1;
        let total: f64 = v.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        let mut pass = Vec::with_capacity(1 << self.n());
        let mut fail = v.amplitudes().to_vec();
        for (i, a) in v.amplitudes().iter().enumerate() {
            if i & tag == 0 {
                pass.push(*a);
                fail[i] = Complex64::new(0.0, 0.0);
            }
        }
        let p_pass: f64 = pass.iter().map(|a| a.norm_sqr()).sum::<f64>() / total;
        let passed = if p_pass * total >= EMPTY_BRANCH_PROB {
            Some(StateVector::new(pass)?)
        } else {
            None
        };
        let restored = if (1.0 - p_pass) * total >= EMPTY_BRANCH_PROB {
            let back = apply_unitary(&self.u, &StateVector::unnormalized(fail)?)?;
            let frame = EncodedState::new(back, undone.ancilla);
            Some(frame.apply_split(&split.0, &split.1)?)
        } else {
            None
        };
        Ok(GuessOutcome {
            pass_probability: p_pass.clamp(0.0, 1.0),
            passed,
            restored,
        })
    }

    fn lookup(&self, s: &Syndrome) -> Result<Vec<(PauliOperator, PauliOperator)>> {
        if self.table.list(s).is_empty() {
            return Err(Error::NoErrorClass(s.to_string()));
        }
        logical_list_errors(&self.code, &self.table, s)
    }

    /// Iterative unambiguous decoding with sampled measurement outcomes.
    pub fn run_algorithm1<R: Rng + ?Sized>(
        &self,
        corrupted: &EncodedState,
        reference: Option<&StateVector>,
        rng: &mut R,
    ) -> Result<DecodeOutcome> {
        let s = corrupted.syndrome();
        let splits = self.lookup(&s)?;
        let mut transcript = Transcript {
            round: 0,
            injected_error: None,
            syndrome: s.clone(),
            list: self.table.list(&s).to_vec(),
            tried: Vec::new(),
            found_index: None,
            final_fidelity: None,
        };
        let mut cur = renormalized(corrupted)?;
        for (b, split) in splits.iter().enumerate() {
            let g = self.guess(&cur, split)?;
            let pass = g.restored.is_none() || (g.passed.is_some() && rng.random::<f64>() < g.pass_probability);
            transcript.tried.push(TriedBranch {
                index: b,
                pass_probability: g.pass_probability,
                passed: pass,
            });
            if pass {
                let out = g
                    .passed
                    .ok_or_else(|| Error::ContractViolation("both measurement branches are empty".into()))?;
                transcript.found_index = Some(b);
                transcript.final_fidelity = reference.map(|r| r.overlap(&out)).transpose()?;
                return Ok(DecodeOutcome {
                    state: Some(out),
                    transcript,
                });
            }
            cur = renormalized(&g.restored.expect("fail branch present"))?;
        }
        Ok(DecodeOutcome { state: None, transcript })
    }

    /// Follows both outcomes of every guess and returns all leaves.
    pub fn branch_tree(&self, corrupted: &EncodedState, reference: Option<&StateVector>) -> Result<BranchTree> {
        let splits = self.lookup(&corrupted.syndrome())?;
        let mut leaves = Vec::new();
        let start = renormalized(corrupted)?;
        self.descend(&splits, 0, start, 1.0, Vec::new(), reference, &mut leaves)?;
        Ok(BranchTree { leaves })
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        splits: &[(PauliOperator, PauliOperator)],
        b: usize,
        state: EncodedState,
        prob: f64,
        path: Vec<bool>,
        reference: Option<&StateVector>,
        leaves: &mut Vec<BranchLeaf>,
    ) -> Result<()> {
        if b == splits.len() {
            leaves.push(BranchLeaf {
                path,
                probability: prob,
                found_index: None,
                fidelity: None,
            });
            return Ok(());
        }
        let g = self.guess(&state, &splits[b])?;
        if let Some(out) = g.passed {
            let mut p = path.clone();
            p.push(true);
            leaves.push(BranchLeaf {
                path: p,
                probability: prob * g.pass_probability,
                found_index: Some(b),
                fidelity: reference.map(|r| r.overlap(&out)).transpose()?,
            });
        }
        if let Some(rest) = g.restored {
            let mut p = path;
            p.push(false);
            let next = renormalized(&rest)?;
            self.descend(splits, b + 1, next, prob * (1.0 - g.pass_probability), p, reference, leaves)?;
        }
        Ok(())
    }

    /// Syndrome readout followed by the decoding loop.
    pub fn decode<R: Rng + ?Sized>(
        &self,
        physical: &EncodedState,
        reference: Option<&StateVector>,
        rng: &mut R,
    ) -> Result<DecodeOutcome> {
        self.run_algorithm1(physical, reference, rng)
    }

    /// Dense physical state of an encoded frame.
    pub fn encode_physical(&self, logical: &StateVector) -> Result<StateVector> {
        self.check_physical()?;
        self.encode(logical)?.to_physical(&self.code)
    }

    fn check_physical(&self) -> Result<()> {
        if self.code.n_physical() > MAX_PHYSICAL_QUBITS {
            return Err(Error::Capacity {
                what: "physical qubits for physical-space decoding",
                value: self.code.n_physical(),
                limit: MAX_PHYSICAL_QUBITS,
            });
        }
        Ok(())
    }

    /// The decoding loop carried out on dense physical vectors with the
    /// dense encoder `C`: `ψ ↦ (U_λ† ⊗ I) C† E_b† ψ`, then the tag
    /// measurement, and `ψ ↦ E_b C (U_λ ⊗ I) ·` on a fail.
    pub fn decode_physical<R: Rng + ?Sized>(
        &self,
        physical: &StateVector,
        reference: Option<&StateVector>,
        rng: &mut R,
    ) -> Result<DecodeOutcome> {
        self.check_physical()?;
        let c = self.code.encoding_tableau().to_dense()?;
        let c_dag = c.adjoint();
        let s = measure_syndrome(&self.code, physical)?;
        let list = self.table.list(&s).to_vec();
        if list.is_empty() {
            return Err(Error::NoErrorClass(s.to_string()));
        }
        let nl = self.n() + self.m();
        let np = self.code.n_physical();
        let mut transcript = Transcript {
            round: 0,
            injected_error: None,
            syndrome: s,
            list: list.clone(),
            tried: Vec::new(),
            found_index: None,
            final_fidelity: None,
        };
        let data_shift = np - self.n();
        let mut psi = StateVector::new(physical.amplitudes().to_vec())?;
        for (b, e) in list.iter().enumerate() {
            let y = apply_unitary(&c_dag, &psi.apply_pauli(&e.adjoint())?)?;
            let y = y.apply_leading(&self.u_dag)?;
            let mut pass = vec![Complex64::new(0.0, 0.0); 1 << self.n()];
            let mut fail = y.amplitudes().to_vec();
            for (i, a) in y.amplitudes().iter().enumerate() {
                // tag and ancilla qubits all zero
                if i & ((1usize << data_shift) - 1) == 0 {
                    pass[i >> data_shift] = *a;
                }
                if (i >> (np - nl)) & ((1usize << self.m()) - 1) == 0 {
                    fail[i] = Complex64::new(0.0, 0.0);
                }
            }
            let p_pass: f64 = pass.iter().map(|a| a.norm_sqr()).sum();
            let p_fail: f64 = fail.iter().map(|a| a.norm_sqr()).sum();
            let passed = p_fail < EMPTY_BRANCH_PROB || (p_pass >= EMPTY_BRANCH_PROB && rng.random::<f64>() < p_pass);
            transcript.tried.push(TriedBranch {
                index: b,
                pass_probability: p_pass.clamp(0.0, 1.0),
                passed,
            });
            if passed {
                let out = StateVector::new(pass)?;
                transcript.found_index = Some(b);
                transcript.final_fidelity = reference.map(|r| r.overlap(&out)).transpose()?;
                return Ok(DecodeOutcome {
                    state: Some(out),
                    transcript,
                });
            }
            let back = StateVector::new(fail)?.apply_leading(&self.u)?;
            psi = apply_unitary(&c, &back)?.apply_pauli(e)?;
        }
        Ok(DecodeOutcome { state: None, transcript })
    }
}

fn renormalized(s: &EncodedState) -> Result<EncodedState> {
    Ok(EncodedState::new(
        StateVector::new(s.logical.amplitudes().to_vec())?,
        s.ancilla.clone(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FixedPauli,
    RandomWeightW,
    WorstInList,
    AdaptiveRoundTable,
}

/// Adversary parameters. `error` is used by `fixed_pauli`, `weight` by
/// `random_weight_w`; `copy_budget` bounds how many past transcripts the
/// adaptive strategy replays (zero means all).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub strategy: Strategy,
    pub weight_budget: usize,
    #[serde(default)]
    pub copy_budget: usize,
    #[serde(default)]
    pub error: Option<PauliOperator>,
    #[serde(default)]
    pub weight: Option<usize>,
}

impl AdversarySpec {
    pub fn fixed(error: PauliOperator) -> Self {
        Self {
            strategy: Strategy::FixedPauli,
            weight_budget: error.weight(),
            copy_budget: 0,
            error: Some(error),
            weight: None,
        }
    }

    pub fn random_weight(weight: usize) -> Self {
        Self {
            strategy: Strategy::RandomWeightW,
            weight_budget: weight,
            copy_budget: 0,
            error: None,
            weight: Some(weight),
        }
    }

    pub fn worst_in_list(weight_budget: usize) -> Self {
        Self {
            strategy: Strategy::WorstInList,
            weight_budget,
            copy_budget: 0,
            error: None,
            weight: None,
        }
    }

    pub fn adaptive(weight_budget: usize, copy_budget: usize) -> Self {
        Self {
            strategy: Strategy::AdaptiveRoundTable,
            weight_budget,
            copy_budget,
            error: None,
            weight: None,
        }
    }
}

/// Error-choosing strategy. It holds only public data (code and table) and
/// sees past transcripts; it never has access to the key.
#[derive(Clone, Debug)]
pub struct Adversary {
    spec: AdversarySpec,
    n: usize,
    /// Largest-list syndrome and its representatives within the budget.
    worst: Option<(Syndrome, Vec<PauliOperator>)>,
}

impl Adversary {
    pub fn new(spec: AdversarySpec, code: &StabilizerCode, table: &ListTable) -> Result<Self> {
        if spec.weight_budget > table.max_weight() {
            return Err(Error::Config(format!(
                "weight budget {} exceeds the error set bound {}",
                spec.weight_budget,
                table.max_weight()
            )));
        }
        match spec.strategy {
            Strategy::FixedPauli => {
                let e = spec
                    .error
                    .as_ref()
                    .ok_or_else(|| Error::Config("fixed_pauli needs an error".into()))?;
                check_dim(code.n_physical(), e.n())?;
                if e.weight() > spec.weight_budget {
                    return Err(Error::Config(format!("{e} exceeds the weight budget")));
                }
                let s = code.syndrome(e)?;
                let unsigned = e.unsigned();
                if !table.members(&s).iter().any(|m| m.unsigned() == unsigned) {
                    return Err(Error::Config(format!("{e} is not in the error set")));
                }
            }
            Strategy::RandomWeightW => {
                let w = spec
                    .weight
                    .ok_or_else(|| Error::Config("random_weight_w needs a weight".into()))?;
                if w > spec.weight_budget || w > code.n_physical() {
                    return Err(Error::Config(format!("weight {w} exceeds the budget")));
                }
            }
            Strategy::WorstInList | Strategy::AdaptiveRoundTable => {}
        }
        let mut worst: Option<(Syndrome, Vec<PauliOperator>)> = None;
        for (s, list) in table.iter() {
            let reps: Vec<PauliOperator> = list
                .iter()
                .filter(|p| p.weight() <= spec.weight_budget)
                .cloned()
                .collect();
            if reps.len() > worst.as_ref().map_or(0, |w| w.1.len()) {
                worst = Some((s.clone(), reps));
            }
        }
        Ok(Self {
            spec,
            n: code.n_physical(),
            worst,
        })
    }

    pub fn spec(&self) -> &AdversarySpec {
        &self.spec
    }

    /// Syndrome with the longest list within the budget and its representatives.
    pub fn worst_list(&self) -> Option<(&Syndrome, &[PauliOperator])> {
        self.worst.as_ref().map(|(s, l)| (s, l.as_slice()))
    }

    fn worst_reps(&self) -> Result<&[PauliOperator]> {
        self.worst
            .as_ref()
            .map(|w| w.1.as_slice())
            .ok_or_else(|| Error::Config("no error within the weight budget".into()))
    }

    pub fn choose<R: Rng + ?Sized>(&self, history: &[Transcript], rng: &mut R) -> Result<PauliOperator> {
        match self.spec.strategy {
            Strategy::FixedPauli => Ok(self.spec.error.clone().expect("validated")),
            Strategy::RandomWeightW => {
                let w = self.spec.weight.expect("validated");
                let mut support = sample(rng, self.n, w).into_vec();
                support.sort_unstable();
                let mut p = PauliOperator::identity(self.n);
                for q in support {
                    let l = [Letter::X, Letter::Y, Letter::Z][rng.random_range(0..3)];
                    p.set_letter(q, l);
                }
                Ok(p)
            }
            Strategy::WorstInList => {
                let reps = self.worst_reps()?;
                Ok(reps[rng.random_range(0..reps.len())].clone())
            }
            Strategy::AdaptiveRoundTable => {
                // Replays past rounds and injects the representative that has
                // needed the most guesses so far; unseen ones are tried first.
                let reps = self.worst_reps()?;
                let window = if self.spec.copy_budget == 0 {
                    history
                } else {
                    &history[history.len().saturating_sub(self.spec.copy_budget)..]
                };
                let mut best = 0usize;
                let mut best_score = f64::NEG_INFINITY;
                for (i, r) in reps.iter().enumerate() {
                    let seen: Vec<f64> = window
                        .iter()
                        .filter(|t| t.injected_error.as_ref() == Some(r))
                        .map(|t| t.tried.len() as f64 + if t.failed() { 1.0 } else { 0.0 })
                        .collect();
                    let score = if seen.is_empty() {
                        f64::INFINITY
                    } else {
                        seen.iter().sum::<f64>() / seen.len() as f64
                    };
                    if score > best_score {
                        best = i;
                        best_score = score;
                    }
                }
                Ok(reps[best].clone())
            }
        }
    }
}

/// Chooses an error from the history and applies it.
pub fn inject<R: Rng + ?Sized>(
    adv: &Adversary,
    code: &StabilizerCode,
    state: &EncodedState,
    history: &[Transcript],
    rng: &mut R,
) -> Result<(PauliOperator, EncodedState)> {
    let e = adv.choose(history, rng)?;
    let out = state.apply_physical(code, &e)?;
    Ok((e, out))
}

/// Encode, inject, decode for `rounds` rounds under one key, with a fresh
/// random logical state each round.
pub fn multi_round<R: Rng + ?Sized>(
    proto: &Protocol,
    adv: &Adversary,
    rounds: usize,
    rng: &mut R,
) -> Result<Vec<Transcript>> {
    if rounds == 0 {
        return Err(Error::Config("rounds must be at least 1".into()));
    }
    let mut history: Vec<Transcript> = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let phi = random_state(rng, 1 << proto.n());
        let enc = proto.encode(&phi)?;
        let (e, corrupted) = inject(adv, &proto.code, &enc, &history, rng)?;
        let mut t = proto.decode(&corrupted, Some(&phi), rng)?.transcript;
        t.round = round;
        t.injected_error = Some(e);
        history.push(t);
    }
    Ok(history)
}

/// Monte-Carlo estimate `(mean, stderr)` of the probability that
/// `V† P V` acts nontrivially on the data qubits and only by `I`/`Z` on the
/// last `m` tag qubits, over keys and uniformly random non-identity `P`.
pub fn purity_test_epsilon<R: Rng + ?Sized>(
    family: &UnitarySource,
    n: usize,
    m: usize,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if !family.kind.is_clifford() {
        return Err(Error::Unsupported(format!(
            "purity testing needs a Clifford family, got {:?}",
            family.kind
        )));
    }
    check_dim(n + m, family.n_qubits)?;
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let nq = n + m;
    let mut bad = 0usize;
    for _ in 0..samples {
        let v = family.sample(rng)?;
        let tab = v.as_tableau().expect("Clifford family");
        let p = loop {
            let bits: u64 = rng.random_range(0..(1u64 << (2 * nq)));
            let p = PauliOperator::from_symplectic(nq, &[bits], 0);
            if !p.is_identity_up_to_phase() {
                break p;
            }
        };
        let q = tab.preimage(&p)?;
        let data_nontrivial = (0..n).any(|i| q.x_bit(i) || q.z_bit(i));
        let tag_diagonal = (n..nq).all(|i| !q.x_bit(i));
        if data_nontrivial && tag_diagonal {
            bad += 1;
        }
    }
    let mean = bad as f64 / samples as f64;
    let stderr = (mean * (1.0 - mean) / samples as f64).sqrt();
    Ok((mean, stderr))
}

/// Exact `(4ⁿ − 1) 2^m / (4^{n+m} − 1)`, the bad-event probability for any
/// unitary 2-design.
pub fn purity_epsilon_two_design(n: usize, m: usize) -> f64 {
    let num = (4f64.powi(n as i32) - 1.0) * 2f64.powi(m as i32);
    num / (4f64.powi((n + m) as i32) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small_config() -> ProtocolConfig {
        ProtocolConfig {
            n: 1,
            m: 1,
            code: "perfect5^2".into(),
            max_weight: 1,
            key: "1234".into(),
            unitary_kind: UnitaryKind::KeyedHaar,
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn frame_matches_dense_physical_action() {
        let proto = Protocol::new(&small_config()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let phi = random_state(&mut rng, 2);
        let enc = proto.encode(&phi).unwrap();
        for e in ["XIZIIYIIIZ", "IIIIIIIIIY", "ZZIIXIIYII"] {
            let e: PauliOperator = e.parse().unwrap();
            let frame = enc.apply_physical(&proto.code, &e).unwrap().to_physical(&proto.code).unwrap();
            let dense = enc.to_physical(&proto.code).unwrap().apply_pauli(&e).unwrap();
            let ov = frame.inner(&dense).unwrap();
            assert!((ov - Complex64::new(1.0, 0.0)).norm() < 1e-10, "{e}: {ov}");
        }
    }

    #[test]
    fn no_error_round_trip() {
        let proto = Protocol::new(&small_config()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let phi = random_state(&mut rng, 2);
        let enc = proto.encode(&phi).unwrap();
        let out = proto.decode(&enc, Some(&phi), &mut rng).unwrap();
        assert_eq!(out.transcript.found_index, Some(0));
        assert!(out.transcript.final_fidelity.unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn adversary_rejects_oversized_budget() {
        let proto = Protocol::new(&small_config()).unwrap();
        let r = Adversary::new(AdversarySpec::random_weight(2), &proto.code, &proto.table);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn purity_needs_clifford() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let src = UnitarySource::new(UnitaryKind::Haar, 2);
        assert!(matches!(
            purity_test_epsilon(&src, 1, 1, 10, &mut rng),
            Err(Error::Unsupported(_))
        ));
        let src = UnitarySource::new(UnitaryKind::Clifford, 2);
        let (e, _) = purity_test_epsilon(&src, 2, 0, 50, &mut rng).unwrap();
        assert_eq!(e, 1.0);
    }
}
