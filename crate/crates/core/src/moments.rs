//! Exact Haar moments of order 2 and 4 via Weingarten calculus.
//!
//! Permutations act on tensor factors by `V(π)|i_0 … i_{k-1}⟩ = |i'⟩` with
//! `i'_{π(j)} = i_j`, so `V(π)V(τ) = V(π∘τ)`. For this convention
//! `Tr[(A_0⊗…⊗A_{k-1}) V(τ)]` is the product, over the cycles
//! `(j, τ⁻¹j, τ⁻²j, …)`, of `Tr(A_j A_{τ⁻¹j} A_{τ⁻²j} …)`.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::pauli::{i_pow, PauliOperator};

/// Largest `d⁴` accepted by the dense order-4 moment.
pub const MAX_MOMENT4_DIM: usize = 1 << 12;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Self { map: (0..k).collect() }
    }

    pub fn from_mapping(map: Vec<usize>) -> Result<Self> {
        let k = map.len();
        let mut seen = vec![false; k];
        for &m in &map {
            if m >= k || seen[m] {
                return Err(Error::Validation(format!("{map:?} is not a permutation")));
            }
            seen[m] = true;
        }
        Ok(Self { map })
    }

    /// All `k!` permutations in lexicographic order of their image lists.
    pub fn all(k: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..k).collect();
        loop {
            out.push(Self { map: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
                break;
            };
            let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
        out
    }

    pub fn k(&self) -> usize {
        self.map.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.map
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            map: other.map.iter().map(|&i| self.map[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.k()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Self { map: inv }
    }

    /// Cycles `(j, π j, π² j, …)`, each starting at its smallest element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.k()];
        let mut out = Vec::new();
        for start in 0..self.k() {
            if seen[start] {
                continue;
            }
            let mut c = vec![start];
            seen[start] = true;
            let mut j = self.map[start];
            while j != start {
                seen[j] = true;
                c.push(j);
                j = self.map[j];
            }
            out.push(c);
        }
        out
    }

    /// Cycle lengths in non-increasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles().len()
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.cycles() {
            let items: Vec<String> = c.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, "({})", items.join(" "))?;
        }
        Ok(())
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// The cyclic permutation `γ` with `Tr[(A⊗B⊗C⊗D) V(γ)] = Tr(ABCD)`.
pub fn gamma4() -> Permutation {
    Permutation { map: vec![3, 0, 1, 2] }
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

fn rat(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// Order-4 Weingarten function for a cycle type (a partition of 4).
pub fn wg_coefficient(cycle_type: &[usize], d: usize) -> Result<BigRational> {
    if d <= 3 {
        return Err(Error::Pole(d));
    }
    let mut t = cycle_type.to_vec();
    t.sort_unstable_by(|a, b| b.cmp(a));
    let d = big(d as i64);
    let d2 = &d * &d;
    let base = &d2 * (&d2 - 1) * (&d2 - 4) * (&d2 - 9);
    Ok(match t.as_slice() {
        [1, 1, 1, 1] => rat(&d2 * &d2 - big(8) * &d2 + 6, base),
        [2, 1, 1] => rat(big(-1), &d * (&d2 - 1) * (&d2 - 9)),
        [2, 2] => rat(&d2 + 6, base),
        [3, 1] => rat(big(2) * &d2 - 3, base),
        [4] => rat(big(-5), &d * (&d2 - 1) * (&d2 - 4) * (&d2 - 9)),
        other => {
            return Err(Error::Validation(format!("{other:?} is not a partition of 4")));
        }
    })
}

/// Order-2 Weingarten function: `Wg([1,1]) = 1/(d²−1)`, `Wg([2]) = −1/(d(d²−1))`.
pub fn wg2_coefficient(cycle_type: &[usize], d: usize) -> Result<BigRational> {
    if d <= 1 {
        return Err(Error::Pole(d));
    }
    let d = big(d as i64);
    let d2m1 = &d * &d - 1;
    match cycle_type {
        [1, 1] => Ok(rat(big(1), d2m1)),
        [2] => Ok(rat(big(-1), &d * d2m1)),
        other => Err(Error::Validation(format!("{other:?} is not a partition of 2"))),
    }
}

pub fn wg(pi: &Permutation, d: usize) -> Result<BigRational> {
    match pi.k() {
        2 => wg2_coefficient(&pi.cycle_type(), d),
        4 => wg_coefficient(&pi.cycle_type(), d),
        k => Err(Error::Unsupported(format!("Weingarten order {k}"))),
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `Σ_σ Wg(π⁻¹σ, d) d^{#cycles(σ)}` for every `π ∈ S_4`, exactly.
pub fn orthogonality(d: usize) -> Result<Vec<(Permutation, BigRational)>> {
    let perms = Permutation::all(4);
    let db = big(d as i64);
    perms
        .iter()
        .map(|pi| {
            let pinv = pi.inverse();
            let mut acc = BigRational::zero();
            for sigma in &perms {
                let w = wg(&pinv.compose(sigma), d)?;
                let pow = num_traits::pow(db.clone(), sigma.num_cycles());
                acc += w * BigRational::from_integer(pow);
            }
            Ok((pi.clone(), acc))
        })
        .collect()
}

/// Largest `|Σ_σ Wg(π⁻¹σ) d^{#σ} − δ_{π,e}|` over `π`, evaluated in floating point.
pub fn orthogonality_error(d: usize) -> Result<f64> {
    let id = Permutation::identity(4);
    Ok(orthogonality(d)?
        .iter()
        .map(|(pi, v)| {
            let target = if *pi == id { 1.0 } else { 0.0 };
            (to_f64(v) - target).abs()
        })
        .fold(0.0, f64::max))
}

/// Applies `V(π)` to the digits of a base-`d` index with factor 0 most significant.
fn permute_index(pi: &Permutation, i: usize, d: usize) -> usize {
    let k = pi.k();
    let mut digits = vec![0usize; k];
    let mut x = i;
    for j in (0..k).rev() {
        digits[j] = x % d;
        x /= d;
    }
    let mut out = vec![0usize; k];
    for j in 0..k {
        out[pi.apply(j)] = digits[j];
    }
    out.iter().fold(0, |acc, &v| acc * d + v)
}

/// Dense `V(π)` on `(C^d)^{⊗k}`.
pub fn permutation_matrix(pi: &Permutation, d: usize) -> DMatrix<Complex64> {
    let dim = d.pow(pi.k() as u32);
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(permute_index(pi, i, d), i)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// `Tr(V(σ)† O)` for a dense operator on `(C^d)^{⊗k}`.
pub fn beta_dense(o: &DMatrix<Complex64>, sigma: &Permutation, d: usize) -> Complex64 {
    (0..o.ncols()).map(|i| o[(permute_index(sigma, i, d), i)]).sum()
}

/// `Tr[(A_0 ⊗ … ⊗ A_{k-1}) V(τ)]` from products of the factors.
pub fn trace_with_permutation<T, F>(factors: &[T], tau: &Permutation, mut trace_word: F) -> Complex64
where
    F: FnMut(&[&T]) -> Complex64,
{
    let tinv = tau.inverse();
    let mut acc = Complex64::new(1.0, 0.0);
    for c in tinv.cycles() {
        let word: Vec<&T> = c.iter().map(|&j| &factors[j]).collect();
        acc *= trace_word(&word);
    }
    acc
}

/// Trace of a product of dense matrices.
pub fn dense_word_trace(word: &[&DMatrix<Complex64>]) -> Complex64 {
    let mut m = word[0].clone();
    for w in &word[1..] {
        m = &m * *w;
    }
    m.trace()
}

/// Trace of a product of Paulis, `d · i^phase` or zero.
pub fn pauli_word_trace(word: &[&PauliOperator]) -> Complex64 {
    let mut p = word[0].clone();
    for w in &word[1..] {
        p = &p * *w;
    }
    if p.is_identity_up_to_phase() {
        i_pow(p.phase() as u32) * 2f64.powi(p.n() as i32)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `β_σ = Tr(V(σ)† (A_0⊗A_1⊗A_2⊗A_3))` for Pauli factors.
pub fn beta_pauli(factors: &[PauliOperator], sigma: &Permutation) -> Complex64 {
    trace_with_permutation(factors, &sigma.inverse(), pauli_word_trace)
}

/// `c_I, c_F` with `E[U†⊗² O U⊗²] = c_I I + c_F F`.
pub fn moment2_coefficients(o: &DMatrix<Complex64>) -> Result<(Complex64, Complex64)> {
    if o.nrows() != o.ncols() {
        return Err(Error::Validation("operator is not square".into()));
    }
    let dim = o.nrows();
    let d = (dim as f64).sqrt().round() as usize;
    if d * d != dim {
        return Err(Error::Validation(format!("dimension {dim} is not a perfect square")));
    }
    let swap = Permutation::from_mapping(vec![1, 0])?;
    let tr_o = o.trace();
    let tr_of = beta_dense(o, &swap, d);
    let df = d as f64;
    let den = df * df - 1.0;
    Ok(((tr_o - tr_of / df) / den, (tr_of - tr_o / df) / den))
}

/// `E_U P_0(U) = (2ⁿ d − 1)/(d² − 1)` with `d = 2^{n+m}`, exactly.
pub fn expected_p0_exact(n: u32, m: u32) -> BigRational {
    let d = BigInt::one() << (n + m);
    let num = (BigInt::one() << n) * &d - 1;
    rat(num, &d * &d - 1)
}

pub fn expected_p0(n: u32, m: u32) -> f64 {
    to_f64(&expected_p0_exact(n, m))
}

/// Value of an order-4 Haar moment.
#[derive(Clone, Debug)]
pub enum MomentValue {
    /// Dense `d⁴ × d⁴` operator.
    Operator(DMatrix<Complex64>),
    /// Coefficients on `V(π)` for each `π`, in [`Permutation::all`] order.
    PermutationBasis(Vec<(Permutation, Complex64)>),
    Scalar(Complex64),
}

#[derive(Clone, Debug)]
pub struct MomentResult {
    pub order: usize,
    pub value: MomentValue,
    /// Nonzero `Wg(π⁻¹σ) β_σ` contributions keyed by `(π, σ)`.
    pub breakdown: Vec<((Permutation, Permutation), Complex64)>,
}

fn moment4_coefficients(betas: &[(Permutation, Complex64)], d: usize) -> Result<MomentResult> {
    let perms = Permutation::all(4);
    let mut coeffs = Vec::with_capacity(24);
    let mut breakdown = Vec::new();
    for pi in &perms {
        let pinv = pi.inverse();
        let mut c = Complex64::new(0.0, 0.0);
        for (sigma, beta) in betas {
            if beta.norm() == 0.0 {
                continue;
            }
            let term = *beta * to_f64(&wg(&pinv.compose(sigma), d)?);
            breakdown.push(((pi.clone(), sigma.clone()), term));
            c += term;
        }
        coeffs.push((pi.clone(), c));
    }
    Ok(MomentResult {
        order: 4,
        value: MomentValue::PermutationBasis(coeffs),
        breakdown,
    })
}

/// Dense `E[U†^{⊗4} O U^{⊗4}] = Σ Wg(π⁻¹σ, d) Tr(V(σ)† O) V(π)`.
pub fn moment4(o: &DMatrix<Complex64>, d: usize) -> Result<MomentResult> {
    let dim = d.pow(4);
    if dim > MAX_MOMENT4_DIM {
        return Err(Error::Capacity {
            what: "d^4 for the dense order-4 moment",
            value: dim,
            limit: MAX_MOMENT4_DIM,
        });
    }
    check_dim(dim, o.nrows())?;
    check_dim(dim, o.ncols())?;
    let betas: Vec<(Permutation, Complex64)> = Permutation::all(4)
        .into_iter()
        .map(|s| {
            let b = beta_dense(o, &s, d);
            (s, b)
        })
        .collect();
    let r = moment4_coefficients(&betas, d)?;
    let MomentValue::PermutationBasis(coeffs) = &r.value else {
        unreachable!()
    };
    let mut out = DMatrix::zeros(dim, dim);
    for (pi, c) in coeffs {
        if c.norm() != 0.0 {
            out += permutation_matrix(pi, d) * *c;
        }
    }
    Ok(MomentResult {
        value: MomentValue::Operator(out),
        ..r
    })
}

/// Order-4 moment of `A_0⊗A_1⊗A_2⊗A_3` with Pauli factors, in the permutation basis.
pub fn moment4_pauli(factors: &[PauliOperator; 4]) -> Result<MomentResult> {
    let n = factors[0].n();
    for f in factors {
        check_dim(n, f.n())?;
    }
    if n > 12 {
        return Err(Error::Capacity {
            what: "qubits for the structured order-4 moment",
            value: n,
            limit: 12,
        });
    }
    let betas: Vec<(Permutation, Complex64)> = Permutation::all(4)
        .into_iter()
        .map(|s| {
            let b = beta_pauli(factors, &s);
            (s, b)
        })
        .collect();
    moment4_coefficients(&betas, 1 << n)
}

/// `β_σ` for `O = T†⊗T⊗T†⊗T` when `T² = sign·I` and `T ≠ I`, exactly.
///
/// A cycle word with `a` copies of `T` and `b` of `T†` equals
/// `sign^b T^{a+b}`, whose trace is `d·sign^{b+(a+b)/2}` for even `a+b`
/// and zero otherwise.
pub fn lemma2_beta(sigma: &Permutation, d: usize, t_squared_sign: i32) -> BigInt {
    let is_dagger = [true, false, true, false];
    let mut acc = BigInt::one();
    for c in sigma.cycles() {
        let b = c.iter().filter(|&&j| is_dagger[j]).count();
        let a = c.len() - b;
        if (a + b) % 2 == 1 {
            return BigInt::zero();
        }
        let e = b + (a + b) / 2;
        let sign = if t_squared_sign < 0 && e % 2 == 1 { -1 } else { 1 };
        acc *= big(d as i64) * sign;
    }
    acc
}

/// `α_π = Tr[(ρ_0 ⊗ Q ⊗ ρ_0 ⊗ Q) V(π) V(γ)]` with `Q = I − Π`,
/// `Tr ρ_0^j = 1`, `Tr Q^j = d − d/2^m` and mixed words vanishing.
pub fn fidelity_alpha(pi: &Permutation, n: u32, m: u32) -> BigInt {
    let is_rho = [true, false, true, false];
    let d = BigInt::one() << (n + m);
    let tr_q = &d - (BigInt::one() << n);
    let tau = pi.compose(&gamma4());
    let mut acc = BigInt::one();
    for c in tau.inverse().cycles() {
        let rho = c.iter().filter(|&&j| is_rho[j]).count();
        if rho == c.len() {
            continue;
        } else if rho == 0 {
            acc *= &tr_q;
        } else {
            return BigInt::zero();
        }
    }
    acc
}

/// Exact key-averaged unnormalized restoration fidelity after one wrong
/// guess: the full 24 × 24 Weingarten sum with `d = 2^{n+m}`.
pub fn expected_unnormalized_fidelity_exact(n: u32, m: u32, t_squared_sign: i32) -> Result<BigRational> {
    let d = 1usize << (n + m);
    let perms = Permutation::all(4);
    let mut acc = BigRational::zero();
    for pi in &perms {
        let alpha = fidelity_alpha(pi, n, m);
        if alpha.is_zero() {
            continue;
        }
        let pinv = pi.inverse();
        for sigma in &perms {
            let beta = lemma2_beta(sigma, d, t_squared_sign);
            if beta.is_zero() {
                continue;
            }
            acc += wg(&pinv.compose(sigma), d)? * BigRational::from_integer(beta * &alpha);
        }
    }
    Ok(acc)
}

pub fn expected_unnormalized_fidelity(n: u32, m: u32, t_squared_sign: i32) -> Result<f64> {
    Ok(to_f64(&expected_unnormalized_fidelity_exact(n, m, t_squared_sign)?))
}

/// The single leading term `Wg([1,1,1,1], d) · d² · [Tr(I − Π)]²`.
pub fn leading_order_fidelity(n: u32, m: u32) -> Result<f64> {
    let d = 1usize << (n + m);
    let tr_q = (d - (1usize << n)) as f64;
    Ok(to_f64(&wg_coefficient(&[1, 1, 1, 1], d)?) * (d as f64).powi(2) * tr_q * tr_q)
}

/// Smallest `c` with `F ≥ 1 − c·2^{−m}` at the given sizes.
pub fn required_fidelity_constant(n: u32, m: u32) -> Result<f64> {
    let f = expected_unnormalized_fidelity(n, m, 1)?;
    Ok((1.0 - f) * 2f64.powi(m as i32))
}

/// Weingarten table rows `(cycle type, d, exact, float)` as CSV.
pub fn wg_table_csv(ds: &[usize]) -> Result<String> {
    let mut s = String::from("cycle_type,d,exact,value\n");
    for &d in ds {
        for t in [[1, 1, 1, 1].as_slice(), &[2, 1, 1], &[2, 2], &[3, 1], &[4]] {
            let w = wg_coefficient(t, d)?;
            let label: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("[{}],{d},{w},{:e}\n", label.join(" "), to_f64(&w)));
        }
    }
    Ok(s)
}

/// Orthogonality sums per permutation as CSV.
pub fn orthogonality_csv(ds: &[usize]) -> Result<String> {
    let mut s = String::from("d,pi,cycle_type,sum\n");
    for &d in ds {
        for (pi, v) in orthogonality(d)? {
            let t: Vec<String> = pi.cycle_type().iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{d},{pi},[{}],{v}\n", t.join(" ")));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wg_four_cycle_at_d4() {
        let w = wg_coefficient(&[4], 4).unwrap();
        assert_eq!(w, rat(big(-5), big(5040)));
        assert!(matches!(wg_coefficient(&[4], 3), Err(Error::Pole(3))));
    }

    #[test]
    fn permutations_of_four() {
        let all = Permutation::all(4);
        assert_eq!(all.len(), 24);
        let g = gamma4();
        assert_eq!(g.cycle_type(), vec![4]);
        assert_eq!(g.inverse().mapping(), &[1, 2, 3, 0]);
        for p in &all {
            assert_eq!(p.compose(&p.inverse()), Permutation::identity(4));
        }
    }

    #[test]
    fn orthogonality_is_exact() {
        for d in [4, 8, 16] {
            let id = Permutation::identity(4);
            for (pi, v) in orthogonality(d).unwrap() {
                let expect = if pi == id { BigRational::one() } else { BigRational::zero() };
                assert_eq!(v, expect, "d={d} pi={pi}");
            }
        }
    }

    #[test]
    fn p0_closed_forms() {
        assert_eq!(expected_p0_exact(2, 2), rat(big(63), big(255)));
        assert_eq!(expected_p0_exact(1, 1), rat(big(7), big(15)));
    }

    #[test]
    fn moment2_invariants() {
        let d = 3;
        let id = DMatrix::<Complex64>::identity(9, 9);
        let (ci, cf) = moment2_coefficients(&id).unwrap();
        assert!((ci - 1.0).norm() < 1e-12 && cf.norm() < 1e-12);
        let f = permutation_matrix(&Permutation::from_mapping(vec![1, 0]).unwrap(), d);
        let (ci, cf) = moment2_coefficients(&f).unwrap();
        assert!(ci.norm() < 1e-12 && (cf - 1.0).norm() < 1e-12);
        assert!(moment2_coefficients(&DMatrix::identity(8, 8)).is_err());
    }

    #[test]
    fn sign_of_t_squared_cancels() {
        let a = expected_unnormalized_fidelity_exact(2, 3, 1).unwrap();
        let b = expected_unnormalized_fidelity_exact(2, 3, -1).unwrap();
        assert_eq!(a, b);
        assert!((to_f64(&a) - 0.77107).abs() < 1e-4, "{}", to_f64(&a));
    }

    #[test]
    fn pauli_fast_path_matches_dense() {
        let t: PauliOperator = "XY".parse().unwrap();
        let tdag = t.adjoint();
        let factors = [tdag.clone(), t.clone(), tdag.clone(), t.clone()];
        let mats: Vec<DMatrix<Complex64>> = factors.iter().map(|p| p.to_matrix().unwrap()).collect();
        let mut o = mats[0].kronecker(&mats[1]);
        o = o.kronecker(&mats[2]).kronecker(&mats[3]);
        let dense = moment4(&o, 4).unwrap();
        let fast = moment4_pauli(&factors).unwrap();
        let (MomentValue::Operator(dm), MomentValue::PermutationBasis(c)) = (&dense.value, &fast.value) else {
            panic!()
        };
        let mut rebuilt = DMatrix::zeros(256, 256);
        for (pi, v) in c {
            rebuilt += permutation_matrix(pi, 4) * *v;
        }
        assert!((dm - rebuilt).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        for s in Permutation::all(4) {
            assert!((beta_dense(&o, &s, 4) - beta_pauli(&factors, &s)).norm() < 1e-12);
            let l = lemma2_beta(&s, 4, 1);
            assert!((beta_pauli(&factors, &s).re - l.to_f64().unwrap()).abs() < 1e-12);
        }
    }
}
