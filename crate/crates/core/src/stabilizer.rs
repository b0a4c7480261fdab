//! Stabilizer codes: validation, syndromes, cosets, encoders and a small library.
//!
//! The encoding Clifford `C` maps qubits `0..k` to the logical operators
//! (`X_i -> logical_x[i]`, `Z_i -> logical_z[i]`) and ancilla `k + j` to the
//! stabilizer frame (`Z_{k+j} -> generators[j]`, `X_{k+j} -> destabilizer j`),
//! so `C (ψ ⊗ |0…0⟩)` lies in the code space.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gf2::{self, Gf2Basis};
use crate::pauli::PauliOperator;
use crate::simengine::StateVector;
use crate::tableau::CliffordTableau;

/// Largest physical qubit count for dense code-space objects.
pub const MAX_DENSE_CODE_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Syndrome {
    bits: Vec<bool>,
}

impl Syndrome {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zero(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|b| !b)
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Syndrome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bad syndrome {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl From<Syndrome> for String {
    fn from(s: Syndrome) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Syndrome {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug)]
pub struct StabilizerCode {
    name: String,
    n_physical: usize,
    n_logical: usize,
    generators: Vec<PauliOperator>,
    logical_x: Vec<PauliOperator>,
    logical_z: Vec<PauliOperator>,
    tableau: CliffordTableau,
    span: Gf2Basis,
    distance: Option<usize>,
}

impl StabilizerCode {
    /// Validates the generators and logicals and synthesizes the encoder.
    pub fn new(
        generators: Vec<PauliOperator>,
        logical_x: Vec<PauliOperator>,
        logical_z: Vec<PauliOperator>,
    ) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::Validation("no generators".into()));
        };
        if logical_x.is_empty() {
            return Err(Error::Validation("no logical operators".into()));
        }
        check_dim(logical_x.len(), logical_z.len())?;
        let n = first.n();
        for p in generators.iter().chain(&logical_x).chain(&logical_z) {
            check_dim(n, p.n())?;
            if !p.is_hermitian() {
                return Err(Error::Validation(format!("{p} is not Hermitian")));
            }
        }
        for i in 0..generators.len() {
            for j in i + 1..generators.len() {
                if generators[i].symplectic(&generators[j]) {
                    return Err(Error::NonCommuting { i, j });
                }
            }
        }
        let mut span = Gf2Basis::new();
        for g in &generators {
            span.insert(&g.to_symplectic());
        }
        if span.rank() < generators.len() {
            return Err(Error::Rank {
                rank: span.rank(),
                expected: generators.len(),
            });
        }
        let k = logical_x.len();
        let r = generators.len();
        if r + k != n {
            return Err(Error::Validation(format!(
                "{r} generators and {k} logical qubits do not fill {n} physical qubits"
            )));
        }
        for (name, ls) in [("X", &logical_x), ("Z", &logical_z)] {
            for (i, l) in ls.iter().enumerate() {
                if let Some(j) = generators.iter().position(|g| g.symplectic(l)) {
                    return Err(Error::Validation(format!(
                        "logical {name}_{i} anticommutes with generator {j}"
                    )));
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                if logical_x[i].symplectic(&logical_z[j]) != (i == j)
                    || (i < j && logical_x[i].symplectic(&logical_x[j]))
                    || (i < j && logical_z[i].symplectic(&logical_z[j]))
                {
                    return Err(Error::Validation(format!(
                        "logical operators {i} and {j} violate the canonical relations"
                    )));
                }
            }
        }
        let destab = destabilizers(&generators, &logical_x, &logical_z)?;
        let x_images = logical_x.iter().cloned().chain(destab).collect();
        let z_images = logical_z.iter().cloned().chain(generators.iter().cloned()).collect();
        let tableau = CliffordTableau::from_images(x_images, z_images)?;
        Ok(Self {
            name: format!("[[{n},{k}]]"),
            n_physical: n,
            n_logical: k,
            generators,
            logical_x,
            logical_z,
            tableau,
            span,
            distance: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_distance(mut self, d: usize) -> Self {
        self.distance = Some(d);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_physical(&self) -> usize {
        self.n_physical
    }

    pub fn n_logical(&self) -> usize {
        self.n_logical
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn distance(&self) -> Option<usize> {
        self.distance
    }

    pub fn generators(&self) -> &[PauliOperator] {
        &self.generators
    }

    pub fn logical_x(&self) -> &[PauliOperator] {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &[PauliOperator] {
        &self.logical_z
    }

    pub fn encoding_tableau(&self) -> &CliffordTableau {
        &self.tableau
    }

    pub fn syndrome(&self, e: &PauliOperator) -> Result<Syndrome> {
        check_dim(self.n_physical, e.n())?;
        Ok(Syndrome::new(self.generators.iter().map(|g| g.symplectic(e)).collect()))
    }

    pub fn in_normalizer(&self, p: &PauliOperator) -> Result<bool> {
        Ok(self.syndrome(p)?.is_zero())
    }

    /// Membership in the stabilizer group, ignoring the phase.
    pub fn in_stabilizer(&self, p: &PauliOperator) -> Result<bool> {
        check_dim(self.n_physical, p.n())?;
        Ok(self.span.contains(&p.to_symplectic()))
    }

    /// True iff `P Q⁻¹` is not in the stabilizer group modulo phase.
    pub fn stabilizer_distinct(&self, p: &PauliOperator, q: &PauliOperator) -> Result<bool> {
        Ok(!self.in_stabilizer(&p.mul(&q.inverse())?)?)
    }

    /// Canonical label of the coset `P·𝒢` (phases ignored).
    pub fn coset_key(&self, p: &PauliOperator) -> Result<Vec<u64>> {
        check_dim(self.n_physical, p.n())?;
        Ok(self.span.reduce(&p.to_symplectic()))
    }

    /// `C† P C` split as `P_L ⊗ A` over logical and ancilla qubits; the
    /// overall phase is carried by `P_L`.
    pub fn logical_split(&self, p: &PauliOperator) -> Result<(PauliOperator, PauliOperator)> {
        let q = self.tableau.preimage(p)?;
        let k = self.n_logical;
        let logical = q.slice(0, k).with_phase(q.phase());
        let ancilla = q.slice(k, self.n_physical);
        Ok((logical, ancilla))
    }

    fn check_dense(&self) -> Result<()> {
        if self.n_physical > MAX_DENSE_CODE_QUBITS {
            return Err(Error::Capacity {
                what: "physical qubits for dense code objects",
                value: self.n_physical,
                limit: MAX_DENSE_CODE_QUBITS,
            });
        }
        Ok(())
    }

    /// Applies `Π_Q = Π_i (I + g_i)/2` to a dense vector.
    pub fn apply_projector(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut v = amps.to_vec();
        for g in &self.generators {
            let gv = g.apply_dense(&v)?;
            for (a, b) in v.iter_mut().zip(gv) {
                *a = (*a + b) * 0.5;
            }
        }
        Ok(v)
    }

    pub fn code_projector(&self) -> Result<DMatrix<Complex64>> {
        self.check_dense()?;
        let dim = 1usize << self.n_physical;
        let mut m = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let col = self.apply_projector(StateVector::basis(self.n_physical, c).amplitudes())?;
            for (r, a) in col.into_iter().enumerate() {
                m[(r, c)] = a;
            }
        }
        Ok(m)
    }

    /// `C (ψ ⊗ |0…0⟩)` as a dense physical state.
    pub fn encode_state(&self, logical: &StateVector) -> Result<StateVector> {
        self.check_dense()?;
        check_dim(1usize << self.n_logical, logical.dim())?;
        let k = self.n_logical;
        let s0 = self.tableau.zero_state_dense()?;
        let mut cols = vec![s0];
        for b in 1..(1usize << k) {
            let low = b.trailing_zeros() as usize;
            let q = k - 1 - low;
            let prev = &cols[b ^ (1 << low)];
            cols.push(self.logical_x[q].apply_dense(prev)?);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); 1usize << self.n_physical];
        for (b, amp) in logical.amplitudes().iter().enumerate() {
            for (o, c) in out.iter_mut().zip(&cols[b]) {
                *o += amp * c;
            }
        }
        if logical.is_normalized() {
            StateVector::new(out)
        } else {
            StateVector::unnormalized(out)
        }
    }

    /// Line-oriented text: header `n k`, generators, then `k` logical X and
    /// `k` logical Z operators, all in compact form.
    pub fn to_file_string(&self) -> String {
        let mut s = format!("# {}\n{} {}\n", self.name, self.n_physical, self.n_logical);
        for p in self.generators.iter().chain(&self.logical_x).chain(&self.logical_z) {
            s.push_str(&p.to_compact());
            s.push('\n');
        }
        s
    }

    pub fn parse_file(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [n, k] = nums[..] else {
            return Err(Error::Parse(format!("header must be `n k`, got {header:?}")));
        };
        if k == 0 || k >= n {
            return Err(Error::Parse(format!("need 0 < k < n, got n = {n}, k = {k}")));
        }
        let ops = lines.map(PauliOperator::parse_compact).collect::<Result<Vec<_>>>()?;
        let r = n - k;
        if ops.len() != r + 2 * k {
            return Err(Error::Parse(format!(
                "expected {} operator lines, found {}",
                r + 2 * k,
                ops.len()
            )));
        }
        Self::new(ops[..r].to_vec(), ops[r..r + k].to_vec(), ops[r + k..].to_vec())
    }
}

/// Destabilizers `d_j`: anticommute with `g_j` only, commute with the
/// logicals and with each other.
fn destabilizers(
    generators: &[PauliOperator],
    logical_x: &[PauliOperator],
    logical_z: &[PauliOperator],
) -> Result<Vec<PauliOperator>> {
    let n = generators[0].n();
    // ⟨v, p⟩_symplectic = v · swap(p)
    let swapped = |p: &PauliOperator| {
        let mut v = vec![0u64; gf2::words(2 * n)];
        for q in 0..n {
            gf2::set(&mut v, q, p.z_bit(q));
            gf2::set(&mut v, n + q, p.x_bit(q));
        }
        v
    };
    let rows: Vec<Vec<u64>> = generators
        .iter()
        .chain(logical_x)
        .chain(logical_z)
        .map(swapped)
        .collect();
    let mut out: Vec<PauliOperator> = Vec::with_capacity(generators.len());
    for j in 0..generators.len() {
        let rhs: Vec<bool> = (0..rows.len()).map(|i| i == j).collect();
        let v = gf2::solve(&rows, &rhs, 2 * n)
            .ok_or_else(|| Error::Validation("no destabilizer solution".into()))?;
        let mut d = PauliOperator::from_symplectic(n, &v, 0);
        for (i, prev) in out.iter().enumerate() {
            if d.symplectic(prev) {
                d = (&d * &generators[i]).unsigned();
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// Named codes shipped with the library.
pub mod library {
    use super::*;

    pub const BUILTIN: [&str; 4] = ["rep3", "perfect5", "steane7", "c422"];

    fn ops(list: &[&str]) -> Vec<PauliOperator> {
        list.iter().map(|s| s.parse().expect("library literal")).collect()
    }

    fn base(name: &str) -> Result<StabilizerCode> {
        let code = match name {
            "rep3" => StabilizerCode::new(ops(&["ZZI", "IZZ"]), ops(&["XXX"]), ops(&["ZII"]))?
                .with_distance(1),
            "perfect5" => StabilizerCode::new(
                ops(&["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"]),
                ops(&["XXXXX"]),
                ops(&["ZZZZZ"]),
            )?
            .with_distance(3),
            "steane7" => StabilizerCode::new(
                ops(&["IIIXXXX", "IXXIIXX", "XIXIXIX", "IIIZZZZ", "IZZIIZZ", "ZIZIZIZ"]),
                ops(&["XXXXXXX"]),
                ops(&["ZZZZZZZ"]),
            )?
            .with_distance(3),
            "c422" => StabilizerCode::new(
                ops(&["XXXX", "ZZZZ"]),
                ops(&["XXII", "XIXI"]),
                ops(&["ZIZI", "ZZII"]),
            )?
            .with_distance(2),
            other => return Err(Error::Config(format!("unknown code {other:?}"))),
        };
        Ok(code.with_name(name))
    }

    /// `k` disjoint copies of `code` on consecutive qubit blocks.
    pub fn power(code: &StabilizerCode, k: usize) -> Result<StabilizerCode> {
        if k == 0 {
            return Err(Error::Config("code power must be at least 1".into()));
        }
        let n = code.n_physical();
        let place = |p: &PauliOperator, c: usize| {
            let mut out = PauliOperator::identity(n * k).with_phase(p.phase());
            for q in 0..n {
                out.set_letter(c * n + q, p.letter(q));
            }
            out
        };
        let mut g = Vec::new();
        let mut lx = Vec::new();
        let mut lz = Vec::new();
        for c in 0..k {
            g.extend(code.generators().iter().map(|p| place(p, c)));
            lx.extend(code.logical_x().iter().map(|p| place(p, c)));
            lz.extend(code.logical_z().iter().map(|p| place(p, c)));
        }
        let mut out = StabilizerCode::new(g, lx, lz)?.with_name(if k == 1 {
            code.name().to_string()
        } else {
            format!("{}^{k}", code.name())
        });
        out.distance = code.distance();
        Ok(out)
    }

    /// Looks up `name` or `name^k` (k disjoint copies).
    pub fn builtin(spec: &str) -> Result<StabilizerCode> {
        match spec.split_once('^') {
            None => base(spec),
            Some((name, k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Config(format!("bad code power in {spec:?}")))?;
                power(&base(name)?, k)
            }
        }
    }

    /// Builtin name, or a path to a code file.
    pub fn resolve(spec: &str) -> Result<StabilizerCode> {
        match builtin(spec) {
            Ok(c) => Ok(c),
            Err(Error::Config(_)) if std::path::Path::new(spec).is_file() => {
                let text = std::fs::read_to_string(spec)?;
                Ok(StabilizerCode::parse_file(&text)?.with_name(spec))
            }
            Err(e) => Err(e),
        }
    }
}
