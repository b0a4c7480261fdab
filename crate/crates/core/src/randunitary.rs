//! Haar and Clifford sampling, keyed unitaries and seeded random streams.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gf2;
use crate::pauli::PauliOperator;
use crate::simengine::StateVector;
use crate::tableau::CliffordTableau;

/// Largest qubit count accepted by the Clifford sampler.
pub const MAX_CLIFFORD_QUBITS: usize = 12;

const KEY_DOMAIN: &[u8] = b"qld/keyed-unitary/v1";
const SEED_DOMAIN: &[u8] = b"qld/seed/v1";

/// 256-bit seed for [`ChaCha20Rng`].
pub type Seed = [u8; 32];

/// Parses a hex seed; 64 hex digits are used verbatim, anything else is hashed.
pub fn parse_seed(hex_str: &str) -> Result<Seed> {
    let s = hex_str.trim().trim_start_matches("0x");
    let bytes = hex::decode(s).map_err(|e| Error::Parse(format!("bad hex seed {hex_str:?}: {e}")))?;
    Ok(match <[u8; 32]>::try_from(bytes.as_slice()) {
        Ok(b) => b,
        Err(_) => Sha256::new().chain_update(SEED_DOMAIN).chain_update(&bytes).finalize().into(),
    })
}

pub fn format_seed(seed: &Seed) -> String {
    hex::encode(seed)
}

/// Child seed for a named sub-experiment.
pub fn derive_seed(master: &Seed, label: &str) -> Seed {
    Sha256::new()
        .chain_update(SEED_DOMAIN)
        .chain_update(master)
        .chain_update((label.len() as u64).to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize()
        .into()
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: &Seed, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    rng.set_stream(stream);
    rng
}

pub fn parse_key(hex_str: &str) -> Result<u128> {
    let s = hex_str.trim().trim_start_matches("0x");
    if s.is_empty() || s.len() > 32 {
        return Err(Error::Parse(format!("key must be 1 to 32 hex digits, got {hex_str:?}")));
    }
    u128::from_str_radix(s, 16).map_err(|e| Error::Parse(format!("bad hex key {hex_str:?}: {e}")))
}

pub fn format_key(key: u128) -> String {
    format!("{key:032x}")
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    let amps = (0..dim).map(|_| complex_gaussian(rng)).collect();
    StateVector::new(amps).expect("Gaussian vector is nonzero")
}

/// Haar-random unitary: Ginibre matrix orthonormalized column by column.
///
/// Gram-Schmidt yields the QR factor with a positive real diagonal in `R`,
/// which is exactly the phase correction that makes `Q` Haar distributed.
pub fn sample_haar<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    for j in 0..dim {
        for _pass in 0..2 {
            for k in 0..j {
                let proj: Complex64 = (0..dim).map(|i| m[(i, k)].conj() * m[(i, j)]).sum();
                for i in 0..dim {
                    let v = m[(i, k)];
                    m[(i, j)] -= proj * v;
                }
            }
        }
        let norm = (0..dim).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            m[(i, j)] /= norm;
        }
    }
    m
}

fn random_bits<R: Rng + ?Sized>(rng: &mut R, nbits: usize) -> Vec<u64> {
    let mut v: Vec<u64> = (0..gf2::words(nbits)).map(|_| rng.next_u64()).collect();
    if !nbits.is_multiple_of(64) {
        let last = v.len() - 1;
        v[last] &= (1u64 << (nbits % 64)) - 1;
    }
    v
}

/// Uniformly random Clifford (modulo global phase) on `n` qubits.
///
/// A symplectic basis `(v_i, w_i)` is drawn one pair at a time, each vector
/// uniform in the symplectic complement of the pairs chosen so far; every
/// image then gets an independent random sign.
pub fn sample_clifford<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CliffordTableau> {
    if n > MAX_CLIFFORD_QUBITS {
        return Err(Error::Capacity {
            what: "qubits for Clifford sampling",
            value: n,
            limit: MAX_CLIFFORD_QUBITS,
        });
    }
    let mut xs: Vec<PauliOperator> = Vec::with_capacity(n);
    let mut zs: Vec<PauliOperator> = Vec::with_capacity(n);
    let project = |u: PauliOperator, xs: &[PauliOperator], zs: &[PauliOperator]| {
        let mut out = u.clone();
        for (v, w) in xs.iter().zip(zs) {
            if u.symplectic(w) {
                out = (&out * v).unsigned();
            }
            if u.symplectic(v) {
                out = (&out * w).unsigned();
            }
        }
        out
    };
    for _ in 0..n {
        let v = loop {
            let u = PauliOperator::from_symplectic(n, &random_bits(rng, 2 * n), 0);
            let u = project(u, &xs, &zs);
            if !u.is_identity_up_to_phase() {
                break u;
            }
        };
        let w = loop {
            let u = PauliOperator::from_symplectic(n, &random_bits(rng, 2 * n), 0);
            let u = project(u, &xs, &zs);
            if u.symplectic(&v) {
                break u;
            }
        };
        xs.push(v);
        zs.push(w);
    }
    let signs = random_bits(rng, 2 * n);
    for q in 0..n {
        if gf2::get(&signs, q) {
            xs[q] = xs[q].clone().with_phase(2);
        }
        if gf2::get(&signs, n + q) {
            zs[q] = zs[q].clone().with_phase(2);
        }
    }
    CliffordTableau::from_images(xs, zs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaryKind {
    Haar,
    Clifford,
    KeyedHaar,
    KeyedClifford,
    Fixed,
}

impl UnitaryKind {
    pub fn is_keyed(self) -> bool {
        matches!(self, UnitaryKind::KeyedHaar | UnitaryKind::KeyedClifford)
    }

    pub fn is_clifford(self) -> bool {
        matches!(self, UnitaryKind::Clifford | UnitaryKind::KeyedClifford)
    }

    fn tag(self) -> &'static str {
        match self {
            UnitaryKind::Haar => "haar",
            UnitaryKind::Clifford => "clifford",
            UnitaryKind::KeyedHaar => "keyed_haar",
            UnitaryKind::KeyedClifford => "keyed_clifford",
            UnitaryKind::Fixed => "fixed",
        }
    }
}

/// A sampled unitary, dense or as a Clifford tableau.
#[derive(Clone, Debug)]
pub enum Unitary {
    Dense(DMatrix<Complex64>),
    Clifford(CliffordTableau),
}

impl Unitary {
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        match self {
            Unitary::Dense(m) => Ok(m.clone()),
            Unitary::Clifford(t) => t.to_dense(),
        }
    }

    pub fn as_tableau(&self) -> Option<&CliffordTableau> {
        match self {
            Unitary::Clifford(t) => Some(t),
            Unitary::Dense(_) => None,
        }
    }
}

/// Deterministic generator for a (kind, qubit count, key) triple.
pub fn keyed_rng(key: u128, n_qubits: usize, kind: UnitaryKind) -> ChaCha20Rng {
    let seed: Seed = Sha256::new()
        .chain_update(KEY_DOMAIN)
        .chain_update(kind.tag().as_bytes())
        .chain_update((n_qubits as u64).to_le_bytes())
        .chain_update(key.to_le_bytes())
        .finalize()
        .into();
    ChaCha20Rng::from_seed(seed)
}

pub fn keyed_haar(key: u128, n_qubits: usize) -> DMatrix<Complex64> {
    sample_haar(&mut keyed_rng(key, n_qubits, UnitaryKind::KeyedHaar), 1 << n_qubits)
}

pub fn keyed_clifford(key: u128, n_qubits: usize) -> Result<CliffordTableau> {
    sample_clifford(&mut keyed_rng(key, n_qubits, UnitaryKind::KeyedClifford), n_qubits)
}

/// The keyed stand-in for a pseudorandom unitary `U_λ`.
pub fn keyed_unitary(key: u128, n_qubits: usize, kind: UnitaryKind) -> Result<Unitary> {
    match kind {
        UnitaryKind::KeyedHaar => Ok(Unitary::Dense(keyed_haar(key, n_qubits))),
        UnitaryKind::KeyedClifford => Ok(Unitary::Clifford(keyed_clifford(key, n_qubits)?)),
        other => Err(Error::Unsupported(format!("{} is not a keyed kind", other.tag()))),
    }
}

/// A unitary ensemble on a fixed number of qubits.
#[derive(Clone, Debug)]
pub struct UnitarySource {
    pub kind: UnitaryKind,
    pub n_qubits: usize,
    pub fixed: Option<DMatrix<Complex64>>,
}

impl UnitarySource {
    pub fn new(kind: UnitaryKind, n_qubits: usize) -> Self {
        Self {
            kind,
            n_qubits,
            fixed: None,
        }
    }

    pub fn fixed(u: DMatrix<Complex64>) -> Self {
        let n_qubits = u.nrows().trailing_zeros() as usize;
        Self {
            kind: UnitaryKind::Fixed,
            n_qubits,
            fixed: Some(u),
        }
    }

    /// Draws one element; keyed kinds draw a fresh random key from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Unitary> {
        match self.kind {
            UnitaryKind::Haar => Ok(Unitary::Dense(sample_haar(rng, 1 << self.n_qubits))),
            UnitaryKind::Clifford => Ok(Unitary::Clifford(sample_clifford(rng, self.n_qubits)?)),
            UnitaryKind::KeyedHaar | UnitaryKind::KeyedClifford => {
                keyed_unitary(rng.random::<u128>(), self.n_qubits, self.kind)
            }
            UnitaryKind::Fixed => self
                .fixed
                .clone()
                .map(Unitary::Dense)
                .ok_or_else(|| Error::Config("fixed unitary source without a matrix".into())),
        }
    }
}
