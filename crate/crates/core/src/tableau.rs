//! Clifford unitaries as conjugation tableaux.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::pauli::{Letter, PauliOperator};

/// Largest qubit count for which a tableau is expanded to a dense unitary.
pub const MAX_DENSE_TABLEAU_QUBITS: usize = 12;

/// A Clifford `U` stored through the images `U X_i U†` and `U Z_i U†`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordTableau {
    n: usize,
    x_images: Vec<PauliOperator>,
    z_images: Vec<PauliOperator>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            x_images: (0..n).map(|q| PauliOperator::single(n, q, Letter::X)).collect(),
            z_images: (0..n).map(|q| PauliOperator::single(n, q, Letter::Z)).collect(),
        }
    }

    /// Validates Hermiticity of the images and the canonical commutation relations.
    pub fn from_images(x_images: Vec<PauliOperator>, z_images: Vec<PauliOperator>) -> Result<Self> {
        let n = x_images.len();
        check_dim(n, z_images.len())?;
        for p in x_images.iter().chain(&z_images) {
            check_dim(n, p.n())?;
            if !p.is_hermitian() {
                return Err(Error::Validation(format!("tableau image {p} is not Hermitian")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let xz = x_images[i].symplectic(&z_images[j]);
                if xz != (i == j) {
                    return Err(Error::Validation(format!(
                        "images of X_{i} and Z_{j} break the symplectic relations"
                    )));
                }
                if j > i
                    && (x_images[i].symplectic(&x_images[j]) || z_images[i].symplectic(&z_images[j]))
                {
                    return Err(Error::Validation(format!(
                        "images of qubits {i} and {j} anticommute"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            x_images,
            z_images,
        })
    }

    pub fn hadamard(n: usize, q: usize) -> Self {
        let mut t = Self::identity(n);
        t.x_images[q] = PauliOperator::single(n, q, Letter::Z);
        t.z_images[q] = PauliOperator::single(n, q, Letter::X);
        t
    }

    pub fn phase_gate(n: usize, q: usize) -> Self {
        let mut t = Self::identity(n);
        t.x_images[q] = PauliOperator::single(n, q, Letter::Y);
        t
    }

    pub fn cnot(n: usize, control: usize, target: usize) -> Self {
        let mut t = Self::identity(n);
        t.x_images[control] = &PauliOperator::single(n, control, Letter::X)
            * &PauliOperator::single(n, target, Letter::X);
        t.z_images[target] = &PauliOperator::single(n, control, Letter::Z)
            * &PauliOperator::single(n, target, Letter::Z);
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, q: usize) -> &PauliOperator {
        &self.x_images[q]
    }

    pub fn z_image(&self, q: usize) -> &PauliOperator {
        &self.z_images[q]
    }

    pub fn x_images(&self) -> &[PauliOperator] {
        &self.x_images
    }

    pub fn z_images(&self) -> &[PauliOperator] {
        &self.z_images
    }

    pub fn is_valid(&self) -> bool {
        Self::from_images(self.x_images.clone(), self.z_images.clone()).is_ok()
    }

    /// Forward conjugation `U P U†`.
    pub fn image(&self, p: &PauliOperator) -> Result<PauliOperator> {
        check_dim(self.n, p.n())?;
        Ok(self.image_unchecked(p))
    }

    pub(crate) fn image_unchecked(&self, p: &PauliOperator) -> PauliOperator {
        // i^p σ(x,z) = i^{p + x·z} X^x Z^z
        let xz = (0..self.n).filter(|&q| p.x_bit(q) && p.z_bit(q)).count() as u32;
        let mut acc = PauliOperator::identity(self.n).with_phase(((p.phase() as u32 + xz) % 4) as u8);
        for q in 0..self.n {
            if p.x_bit(q) {
                acc = acc.mul_unchecked(&self.x_images[q]);
            }
        }
        for q in 0..self.n {
            if p.z_bit(q) {
                acc = acc.mul_unchecked(&self.z_images[q]);
            }
        }
        acc
    }

    /// Backward conjugation `U† P U`.
    pub fn preimage(&self, p: &PauliOperator) -> Result<PauliOperator> {
        check_dim(self.n, p.n())?;
        let mut q = PauliOperator::identity(self.n);
        for j in 0..self.n {
            let x = p.symplectic(&self.z_images[j]);
            let z = p.symplectic(&self.x_images[j]);
            q.set_letter(j, Letter::from_bits(x, z));
        }
        let fwd = self.image_unchecked(&q);
        Ok(q.with_phase((4 + p.phase() - fwd.phase()) % 4))
    }

    /// Tableau of `self · other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_dim(self.n, other.n)?;
        Ok(Self {
            n: self.n,
            x_images: other.x_images.iter().map(|p| self.image_unchecked(p)).collect(),
            z_images: other.z_images.iter().map(|p| self.image_unchecked(p)).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        let pre = |p: PauliOperator| self.preimage(&p).expect("dimension checked");
        Self {
            n: self.n,
            x_images: (0..self.n).map(|q| pre(PauliOperator::single(self.n, q, Letter::X))).collect(),
            z_images: (0..self.n).map(|q| pre(PauliOperator::single(self.n, q, Letter::Z))).collect(),
        }
    }

    /// `U|0…0⟩`: the state stabilized by every Z image, with its first
    /// nonzero amplitude made real and positive.
    pub fn zero_state_dense(&self) -> Result<Vec<Complex64>> {
        self.check_dense()?;
        let dim = 1usize << self.n;
        // A generic start vector has nonzero overlap with the target state.
        let mut v: Vec<Complex64> = (0..dim)
            .map(|j| {
                let t = 0.618_033_988_749_895 * (j as f64 + 1.0) + 0.1 * (j as f64).sqrt();
                Complex64::from_polar(1.0 + 0.5 * (t * 7.0).sin(), std::f64::consts::TAU * t)
            })
            .collect();
        for g in &self.z_images {
            let gv = g.apply_dense(&v)?;
            for (a, b) in v.iter_mut().zip(gv) {
                *a = (*a + b) * 0.5;
            }
        }
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let peak = v.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let first = v
            .iter()
            .find(|a| a.norm() > 1e-6 * peak)
            .copied()
            .ok_or_else(|| Error::Validation("degenerate stabilizer projection".into()))?;
        let fix = first.conj() / first.norm() / norm;
        for a in v.iter_mut() {
            *a *= fix;
            if a.norm() < 1e-14 {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        Ok(v)
    }

    /// Dense unitary with `U P U† = image(P)`, fixed up to the global phase
    /// convention of [`Self::zero_state_dense`].
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let s0 = self.zero_state_dense()?;
        let dim = 1usize << self.n;
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        cols.push(s0);
        for b in 1..dim {
            let low = b.trailing_zeros() as usize;
            let q = self.n - 1 - low;
            let prev = &cols[b ^ (1 << low)];
            cols.push(self.x_images[q].apply_dense(prev)?);
        }
        Ok(DMatrix::from_fn(dim, dim, |r, c| cols[c][r]))
    }

    fn check_dense(&self) -> Result<()> {
        if self.n > MAX_DENSE_TABLEAU_QUBITS {
            return Err(Error::Capacity {
                what: "qubits for dense Clifford",
                value: self.n,
                limit: MAX_DENSE_TABLEAU_QUBITS,
            });
        }
        Ok(())
    }
}

/// `U† P U` for the Clifford `U` described by `tab`.
pub fn conjugate_by_tableau(tab: &CliffordTableau, p: &PauliOperator) -> Result<PauliOperator> {
    tab.preimage(p)
}
