//! Bit-packed n-qubit Pauli operators in the symplectic representation.
//!
//! An operator is stored as `i^phase · σ(x, z)` where `σ` is the tensor
//! product of single-qubit letters and qubit `q` carries `I, X, Z, Y` for
//! `(x_q, z_q) = (0,0), (1,0), (0,1), (1,1)`. The letter Y is the Hermitian
//! Pauli Y, so a phase-0 operator is always Hermitian.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::gf2;

/// Largest qubit count for which dense matrices are produced.
pub const MAX_DENSE_QUBITS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

/// `i^k` for `k` taken mod 4.
pub fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn and_popcount(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        let w = gf2::words(n);
        Self {
            n,
            x: vec![0; w],
            z: vec![0; w],
            phase: 0,
        }
    }

    /// A single letter on qubit `q`.
    pub fn single(n: usize, q: usize, letter: Letter) -> Self {
        assert!(q < n, "qubit {q} out of range for n = {n}");
        let mut p = Self::identity(n);
        p.set_letter(q, letter);
        p
    }

    pub fn from_letters(letters: &[Letter], phase: u8) -> Self {
        let mut p = Self::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set_letter(q, l);
        }
        p.phase = phase % 4;
        p
    }

    /// Builds from a `2n`-bit symplectic vector (x bits then z bits).
    pub fn from_symplectic(n: usize, v: &[u64], phase: u8) -> Self {
        let mut p = Self::identity(n);
        for q in 0..n {
            gf2::set(&mut p.x, q, gf2::get(v, q));
            gf2::set(&mut p.z, q, gf2::get(v, n + q));
        }
        p.phase = phase % 4;
        p
    }

    pub fn to_symplectic(&self) -> Vec<u64> {
        let mut v = vec![0u64; gf2::words(2 * self.n)];
        for q in 0..self.n {
            gf2::set(&mut v, q, self.x_bit(q));
            gf2::set(&mut v, self.n + q, self.z_bit(q));
        }
        v
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    pub fn x_bit(&self, q: usize) -> bool {
        gf2::get(&self.x, q)
    }

    pub fn z_bit(&self, q: usize) -> bool {
        gf2::get(&self.z, q)
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x_bit(q), self.z_bit(q))
    }

    pub fn set_letter(&mut self, q: usize, letter: Letter) {
        let (x, z) = letter.bits();
        gf2::set(&mut self.x, q, x);
        gf2::set(&mut self.z, q, z);
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n).map(|q| self.letter(q)).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&q| self.x_bit(q) || self.z_bit(q))
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// True when the letter part is the identity, whatever the phase.
    pub fn is_identity_up_to_phase(&self) -> bool {
        gf2::is_zero(&self.x) && gf2::is_zero(&self.z)
    }

    pub fn is_identity(&self) -> bool {
        self.phase == 0 && self.is_identity_up_to_phase()
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    /// Same letters, phase dropped.
    pub fn unsigned(&self) -> Self {
        self.clone().with_phase(0)
    }

    pub fn inverse(&self) -> Self {
        // σ is Hermitian and squares to I, so only the phase flips.
        let mut p = self.clone();
        p.phase = (4 - self.phase) % 4;
        p
    }

    /// Adjoint; equal to the inverse for Pauli operators.
    pub fn adjoint(&self) -> Self {
        self.inverse()
    }

    /// Symplectic form `x_P·z_Q + z_P·x_Q` (mod 2); true means anticommuting.
    pub fn symplectic(&self, other: &Self) -> bool {
        debug_assert_eq!(self.n, other.n);
        (and_popcount(&self.x, &other.z) + and_popcount(&self.z, &other.x)) & 1 == 1
    }

    pub fn commutes(&self, other: &Self) -> Result<bool> {
        check_dim(self.n, other.n)?;
        Ok(!self.symplectic(other))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_dim(self.n, other.n)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let x: Vec<u64> = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z: Vec<u64> = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        // σ(x,z) = i^{x·z} X^x Z^z; reorder Z^{z1} X^{x2} and convert back.
        let ph = self.phase as u32
            + other.phase as u32
            + and_popcount(&self.x, &self.z)
            + and_popcount(&other.x, &other.z)
            + 2 * and_popcount(&self.z, &other.x)
            + 4 * self.n as u32
            - and_popcount(&x, &z);
        Self {
            n: self.n,
            x,
            z,
            phase: (ph % 4) as u8,
        }
    }

    /// `self ⊗ other` with `self` on the leading qubits.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut p = Self::identity(self.n + other.n);
        for q in 0..self.n {
            p.set_letter(q, self.letter(q));
        }
        for q in 0..other.n {
            p.set_letter(self.n + q, other.letter(q));
        }
        p.phase = (self.phase + other.phase) % 4;
        p
    }

    /// Letters on qubits `start..end`, phase 0.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let mut p = Self::identity(end - start);
        for q in start..end {
            p.set_letter(q - start, self.letter(q));
        }
        p
    }

    /// Dense index masks with qubit 0 as the most significant bit.
    fn dense_masks(&self) -> (usize, usize) {
        let mut xm = 0usize;
        let mut zm = 0usize;
        for q in 0..self.n {
            let bit = 1usize << (self.n - 1 - q);
            if self.x_bit(q) {
                xm |= bit;
            }
            if self.z_bit(q) {
                zm |= bit;
            }
        }
        (xm, zm)
    }

    /// Applies the operator to a dense amplitude vector of length `2^n`.
    pub fn apply_dense(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.n > 30 {
            return Err(Error::Capacity {
                what: "qubits for dense application",
                value: self.n,
                limit: 30,
            });
        }
        check_dim(1usize << self.n, amps.len())?;
        let (xm, zm) = self.dense_masks();
        let base = self.phase as u32 + (xm & zm).count_ones();
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (b, a) in amps.iter().enumerate() {
            let k = base + 2 * ((zm & b).count_ones() & 1);
            out[b ^ xm] = i_pow(k) * a;
        }
        Ok(out)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::Capacity {
                what: "qubits for dense Pauli matrix",
                value: self.n,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        let (xm, zm) = self.dense_masks();
        let base = self.phase as u32 + (xm & zm).count_ones();
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            m[(b ^ xm, b)] = i_pow(base + 2 * ((zm & b).count_ones() & 1));
        }
        Ok(m)
    }

    fn phase_prefix(&self) -> &'static str {
        match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        }
    }

    /// Compact form with explicit sign, e.g. `+iXIZ`.
    pub fn to_compact(&self) -> String {
        format!("{}{}", self.phase_prefix(), self.letter_string())
    }

    /// Letters only, e.g. `IXIZ`.
    pub fn letter_string(&self) -> String {
        (0..self.n).map(|q| self.letter(q).as_char()).collect()
    }

    /// Sparse form, e.g. `+iX_0 Z_3`; the identity prints as `+I`.
    pub fn to_sparse(&self) -> String {
        let body: Vec<String> = self
            .support()
            .into_iter()
            .map(|q| format!("{}_{}", self.letter(q).as_char(), q))
            .collect();
        if body.is_empty() {
            format!("{}I", self.phase_prefix())
        } else {
            format!("{}{}", self.phase_prefix(), body.join(" "))
        }
    }

    pub fn parse_compact(s: &str) -> Result<Self> {
        let (phase, body) = split_phase(s.trim());
        if body.is_empty() {
            return Err(Error::Parse(format!("empty Pauli string {s:?}")));
        }
        let letters = body
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| Error::Parse(format!("bad letter {c:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_letters(&letters, phase))
    }

    pub fn parse_sparse(s: &str, n: usize) -> Result<Self> {
        let (phase, body) = split_phase(s.trim());
        let mut p = Self::identity(n);
        p.phase = phase;
        if body == "I" {
            return Ok(p);
        }
        for tok in body.split_whitespace() {
            let (l, q) = tok
                .split_once('_')
                .ok_or_else(|| Error::Parse(format!("bad token {tok:?}")))?;
            let mut cs = l.chars();
            let letter = match (cs.next().and_then(Letter::from_char), cs.next()) {
                (Some(letter), None) => letter,
                _ => return Err(Error::Parse(format!("bad letter in {tok:?}"))),
            };
            let q: usize = q
                .parse()
                .map_err(|_| Error::Parse(format!("bad qubit index in {tok:?}")))?;
            if q >= n {
                return Err(Error::Parse(format!("qubit {q} out of range for n = {n}")));
            }
            if p.letter(q) != Letter::I {
                return Err(Error::Parse(format!("qubit {q} repeated")));
            }
            p.set_letter(q, letter);
        }
        Ok(p)
    }

    fn order_key(&self) -> (usize, Vec<usize>, Vec<Letter>, u8) {
        let support = self.support();
        let letters = support.iter().map(|&q| self.letter(q)).collect();
        (self.weight(), support, letters, self.phase)
    }
}

fn split_phase(s: &str) -> (u8, &str) {
    for (prefix, phase) in [("+i", 1u8), ("-i", 3), ("+", 0), ("-", 2)] {
        if let Some(rest) = s.strip_prefix(prefix) {
            return (phase, rest);
        }
    }
    (0, s)
}

/// Canonical order: weight, then support, then letters (X < Y < Z), then phase.
impl Ord for PauliOperator {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.order_key().cmp(&other.order_key()))
    }
}

impl PartialOrd for PauliOperator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_compact())
    }
}

impl fmt::Debug for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pauli({})", self.to_compact())
    }
}

impl FromStr for PauliOperator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_compact(s)
    }
}

impl Serialize for PauliOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_compact())
    }
}

impl<'de> Deserialize<'de> for PauliOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse_compact(&s).map_err(serde::de::Error::custom)
    }
}

impl std::ops::Mul for &PauliOperator {
    type Output = PauliOperator;
    /// Panics on a qubit-count mismatch; use [`PauliOperator::mul`] to get an error instead.
    fn mul(self, rhs: &PauliOperator) -> PauliOperator {
        assert_eq!(self.n, rhs.n, "Pauli qubit counts differ");
        self.mul_unchecked(rhs)
    }
}

/// All phase-0 Paulis of weight at most `max_weight`, in canonical order.
pub fn enumerate_paulis(n: usize, max_weight: usize) -> Vec<PauliOperator> {
    let max_weight = max_weight.min(n);
    let mut out = Vec::new();
    for w in 0..=max_weight {
        let mut support: Vec<usize> = (0..w).collect();
        loop {
            push_letters(n, &support, &mut out);
            if !next_combination(&mut support, n) {
                break;
            }
        }
    }
    out
}

/// Number of operators `enumerate_paulis(n, w)` returns.
pub fn count_paulis(n: usize, max_weight: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    let mut pow3 = 1u128;
    for w in 0..=max_weight.min(n) {
        total += binom * pow3;
        binom = binom * (n - w) as u128 / (w + 1) as u128;
        pow3 *= 3;
    }
    total
}

fn push_letters(n: usize, support: &[usize], out: &mut Vec<PauliOperator>) {
    const L: [Letter; 3] = [Letter::X, Letter::Y, Letter::Z];
    let w = support.len();
    let total = 3usize.pow(w as u32);
    for code in 0..total {
        let mut p = PauliOperator::identity(n);
        let mut c = code;
        for i in (0..w).rev() {
            p.set_letter(support[i], L[c % 3]);
            c /= 3;
        }
        out.push(p);
    }
}

pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
