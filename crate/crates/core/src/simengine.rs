//! Dense state vectors, ensembles, measurement, fidelity and trace distance.
//!
//! Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of a
//! basis index.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{check_dim, Error, Result};
use crate::pauli::PauliOperator;

/// Probability below which a measurement branch is reported as empty.
pub const EMPTY_BRANCH_PROB: f64 = 1e-14;
/// Norm tolerance for states flagged as normalized.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    normalized: bool,
}

fn qubits_of(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Validation(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl StateVector {
    /// Normalizes the given amplitudes; fails on a zero vector.
    pub fn new(mut amps: Vec<Complex64>) -> Result<Self> {
        qubits_of(amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::Validation("zero state vector".into()));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Ok(Self {
            amps,
            normalized: true,
        })
    }

    /// An explicitly unnormalized vector.
    pub fn unnormalized(amps: Vec<Complex64>) -> Result<Self> {
        qubits_of(amps.len())?;
        Ok(Self {
            amps,
            normalized: false,
        })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Self {
            amps,
            normalized: true,
        }
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn scale(&mut self, c: Complex64) {
        for a in self.amps.iter_mut() {
            *a *= c;
        }
        if (c.norm() - 1.0).abs() > NORM_TOL {
            self.normalized = false;
        }
    }

    pub fn apply_pauli(&self, p: &PauliOperator) -> Result<Self> {
        Ok(Self {
            amps: p.apply_dense(&self.amps)?,
            normalized: self.normalized,
        })
    }

    /// Applies `u ⊗ I` where `u` acts on the leading qubits.
    pub fn apply_leading(&self, u: &DMatrix<Complex64>) -> Result<Self> {
        let k = u.nrows();
        if u.ncols() != k || k == 0 || !self.dim().is_multiple_of(k) {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: k,
            });
        }
        let rest = self.dim() / k;
        let mut out = vec![ZERO; self.dim()];
        for a in 0..k {
            for a2 in 0..k {
                let c = u[(a, a2)];
                if c == ZERO {
                    continue;
                }
                let src = &self.amps[a2 * rest..(a2 + 1) * rest];
                for (o, s) in out[a * rest..(a + 1) * rest].iter_mut().zip(src) {
                    *o += c * s;
                }
            }
        }
        Ok(Self {
            amps: out,
            normalized: self.normalized,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let amps: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re, a.im]).collect();
        serde_json::json!({ "dim": self.dim(), "amplitudes": amps })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Dump {
            dim: usize,
            amplitudes: Vec<[f64; 2]>,
        }
        let d: Dump = serde_json::from_value(v.clone())?;
        check_dim(d.dim, d.amplitudes.len())?;
        let amps: Vec<Complex64> = d.amplitudes.iter().map(|[r, i]| Complex64::new(*r, *i)).collect();
        let s = Self::unnormalized(amps)?;
        let normalized = (s.norm() - 1.0).abs() <= NORM_TOL;
        Ok(Self { normalized, ..s })
    }
}

fn is_unitary(u: &DMatrix<Complex64>, tol: f64) -> bool {
    let d = u.nrows();
    (u.adjoint() * u - DMatrix::<Complex64>::identity(d, d)).norm() <= tol
}

/// `U ψ`; in debug builds the unitarity of `U` is checked to 1e-9.
pub fn apply_unitary(u: &DMatrix<Complex64>, psi: &StateVector) -> Result<StateVector> {
    if u.nrows() != u.ncols() {
        return Err(Error::Validation("matrix is not square".into()));
    }
    check_dim(psi.dim(), u.ncols())?;
    if cfg!(debug_assertions) && !is_unitary(u, 1e-9) {
        return Err(Error::Validation("matrix is not unitary".into()));
    }
    let amps = (0..u.nrows())
        .map(|r| (0..u.ncols()).map(|c| u[(r, c)] * psi.amps[c]).sum())
        .collect();
    Ok(StateVector {
        amps,
        normalized: psi.normalized,
    })
}

pub fn tensor(a: &StateVector, b: &StateVector) -> StateVector {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    StateVector {
        amps,
        normalized: a.normalized && b.normalized,
    }
}

#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    pub probability: f64,
    /// `None` flags an empty branch (probability below [`EMPTY_BRANCH_PROB`]).
    pub post_state: Option<StateVector>,
}

impl ProjectionOutcome {
    fn from_branch(amps: Vec<Complex64>) -> Self {
        let probability: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let post_state = if probability < EMPTY_BRANCH_PROB {
            None
        } else {
            StateVector::new(amps).ok()
        };
        Self {
            probability,
            post_state,
        }
    }
}

fn qubit_mask(n: usize, qubits: &[usize]) -> Result<usize> {
    let mut mask = 0usize;
    for &q in qubits {
        if q >= n {
            return Err(Error::Validation(format!("qubit {q} out of range for {n} qubits")));
        }
        mask |= 1 << (n - 1 - q);
    }
    Ok(mask)
}

/// Two-outcome measurement `{Π, I − Π}` with `Π = |0…0⟩⟨0…0|` on `tag_qubits`.
pub fn project(psi: &StateVector, tag_qubits: &[usize]) -> Result<(ProjectionOutcome, ProjectionOutcome)> {
    let mask = qubit_mask(psi.n_qubits(), tag_qubits)?;
    let mut zero = vec![ZERO; psi.dim()];
    let mut rest = vec![ZERO; psi.dim()];
    for (i, a) in psi.amps.iter().enumerate() {
        if i & mask == 0 {
            zero[i] = *a;
        } else {
            rest[i] = *a;
        }
    }
    Ok((ProjectionOutcome::from_branch(zero), ProjectionOutcome::from_branch(rest)))
}

/// Keeps the amplitudes with the listed qubits in `|0⟩` and drops those
/// qubits, returning the (unnormalized) state on the remaining qubits.
pub fn drop_zero_qubits(psi: &StateVector, qubits: &[usize]) -> Result<StateVector> {
    let n = psi.n_qubits();
    let mask = qubit_mask(n, qubits)?;
    let keep: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
    let mut out = vec![ZERO; 1 << keep.len()];
    for (i, a) in psi.amps.iter().enumerate() {
        if i & mask != 0 {
            continue;
        }
        let mut j = 0usize;
        for &q in &keep {
            j = (j << 1) | ((i >> (n - 1 - q)) & 1);
        }
        out[j] = *a;
    }
    StateVector::unnormalized(out)
}

/// Weighted set of pure states.
#[derive(Clone, Debug)]
pub struct Ensemble {
    entries: Vec<(f64, StateVector)>,
}

impl Ensemble {
    pub fn new(entries: Vec<(f64, StateVector)>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::Validation("empty ensemble".into()));
        };
        let dim = first.1.dim();
        let mut total = 0.0;
        for (w, s) in &entries {
            check_dim(dim, s.dim())?;
            if *w < 0.0 {
                return Err(Error::Validation("negative ensemble weight".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("weights sum to {total}")));
        }
        Ok(Self { entries })
    }

    pub fn pure(psi: StateVector) -> Self {
        Self {
            entries: vec![(1.0, psi)],
        }
    }

    pub fn entries(&self) -> &[(f64, StateVector)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries[0].1.dim()
    }

    /// The single pure state, when the ensemble has one entry.
    pub fn as_pure(&self) -> Option<&StateVector> {
        match self.entries.as_slice() {
            [(_, s)] => Some(s),
            _ => None,
        }
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut rho = DMatrix::zeros(d, d);
        for (w, s) in &self.entries {
            let v = nalgebra::DVector::from_column_slice(&s.amps);
            rho += (&v * v.adjoint()) * Complex64::new(*w, 0.0);
        }
        rho
    }

    /// Columns `√w_i |ψ_i⟩`, so that `ρ = F F†`.
    fn factor(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim(), self.entries.len(), |r, c| {
            let (w, s) = &self.entries[c];
            s.amps[r] * w.sqrt()
        })
    }

    pub fn purity(&self) -> f64 {
        let rho = self.density_matrix();
        (&rho * &rho).trace().re
    }
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// General Uhlmann fidelity `(tr √(√ρ σ √ρ))²` on density matrices.
pub fn uhlmann_fidelity(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> Result<f64> {
    check_dim(rho.nrows(), sigma.nrows())?;
    let s = hermitian_sqrt(rho);
    let m = &s * sigma * &s;
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr: f64 = m.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Fidelity, using `tr(ρσ)` whenever one side is pure.
pub fn fidelity(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let mixed_vs_pure = |mixed: &Ensemble, pure: &StateVector| -> Result<f64> {
        let mut f = 0.0;
        for (w, s) in mixed.entries() {
            f += w * pure.overlap(s)?;
        }
        Ok(f.clamp(0.0, 1.0))
    };
    if let Some(pb) = b.as_pure() {
        return mixed_vs_pure(a, pb);
    }
    if let Some(pa) = a.as_pure() {
        return mixed_vs_pure(b, pa);
    }
    // ρ = AA†, σ = BB† gives √F = ‖A†B‖₁ without matrix square roots.
    let nuclear: f64 = (a.factor().adjoint() * b.factor()).singular_values().iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// Half the trace norm of `ρ_a − ρ_b`.
pub fn trace_distance(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    trace_distance_dm(&a.density_matrix(), &b.density_matrix())
}

pub fn trace_distance_dm(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> Result<f64> {
    check_dim(rho.nrows(), sigma.nrows())?;
    let diff = rho - sigma;
    let diff = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(0.5 * diff.symmetric_eigen().eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Reduced density matrix on `keep` (in the order given).
pub fn partial_trace(rho: &Ensemble, keep: &[usize]) -> Result<DMatrix<Complex64>> {
    let n = rho.entries[0].1.n_qubits();
    qubit_mask(n, keep)?;
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let split = |i: usize, qs: &[usize]| -> usize {
        qs.iter().fold(0usize, |acc, &q| (acc << 1) | ((i >> (n - 1 - q)) & 1))
    };
    let mut out = DMatrix::zeros(dk, dk);
    for (w, s) in &rho.entries {
        let mut m = DMatrix::<Complex64>::zeros(dk, dt);
        for (i, a) in s.amps.iter().enumerate() {
            m[(split(i, keep), split(i, &traced))] = *a;
        }
        out += (&m * m.adjoint()) * Complex64::new(*w, 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tensor_of_basis_states() {
        let s = tensor(&StateVector::basis(1, 0), &StateVector::basis(1, 1));
        assert_eq!(s, StateVector::basis(2, 1));
    }

    #[test]
    fn projection_on_tag_register() {
        let psi = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let (z, r) = project(&psi, &[1]).unwrap();
        assert!((z.probability - 1.0).abs() < 1e-12);
        assert!(r.post_state.is_none());
        let psi = StateVector::basis(2, 1);
        let (z, r) = project(&psi, &[1]).unwrap();
        assert_eq!(z.probability, 0.0);
        assert!(z.post_state.is_none());
        assert!((r.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bell_pair_reduces_to_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::new(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]).unwrap();
        let r = partial_trace(&Ensemble::pure(bell), &[0]).unwrap();
        assert!((r - DMatrix::identity(2, 2) * c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn product_state_partial_traces() {
        let a = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let b = StateVector::new(vec![c(1.0, 0.0), c(1.0, 1.0)]).unwrap();
        let ab = Ensemble::pure(tensor(&a, &b));
        let ra = partial_trace(&ab, &[0]).unwrap();
        let rb = partial_trace(&ab, &[1]).unwrap();
        assert!((ra - Ensemble::pure(a).density_matrix()).norm() < 1e-12);
        assert!((rb - Ensemble::pure(b).density_matrix()).norm() < 1e-12);
    }

    #[test]
    fn fidelity_and_distance_extremes() {
        let z = Ensemble::pure(StateVector::basis(1, 0));
        let o = Ensemble::pure(StateVector::basis(1, 1));
        assert!((fidelity(&z, &z).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&z, &o).unwrap().abs() < 1e-12);
        assert!(trace_distance(&z, &z).unwrap().abs() < 1e-12);
        assert!((trace_distance(&z, &o).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_dump_round_trip() {
        let s = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let back = StateVector::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn drop_zero_qubits_extracts_data_register() {
        let s = tensor(
            &StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap(),
            &StateVector::basis(1, 0),
        );
        let d = drop_zero_qubits(&s, &[1]).unwrap();
        assert_eq!(d.amplitudes(), &[c(0.6, 0.0), c(0.0, 0.8)]);
    }
}
