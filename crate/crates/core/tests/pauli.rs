use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use qld_core::pauli::{count_paulis, enumerate_paulis, Letter, PauliOperator};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// Independent single-qubit matrices, combined by Kronecker products.
fn letter_matrix(l: Letter) -> DMatrix<Complex64> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match l {
        Letter::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        Letter::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        Letter::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Letter::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

fn oracle_matrix(p: &PauliOperator) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for l in p.letters() {
        m = m.kronecker(&letter_matrix(l));
    }
    let ph = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)][p.phase() as usize];
    m * ph
}

fn max_dev(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn all_two_qubit() -> Vec<PauliOperator> {
    enumerate_paulis(2, 2)
}

#[test]
fn two_qubit_products_match_dense_multiplication() {
    let ps = all_two_qubit();
    assert_eq!(ps.len(), 16);
    for a in &ps {
        for phase in 0..4u8 {
            let a = a.clone().with_phase(phase);
            assert!(max_dev(&a.to_matrix().unwrap(), &oracle_matrix(&a)) < 1e-14);
            for b in &ps {
                let prod = a.mul(b).unwrap();
                let dense = oracle_matrix(&a) * oracle_matrix(b);
                assert!(max_dev(&oracle_matrix(&prod), &dense) < 1e-14, "{a} * {b} = {prod}");
            }
        }
    }
}

#[test]
fn commutation_matches_dense_commutators() {
    let ps = all_two_qubit();
    let mut pairs = 0;
    for a in &ps {
        for b in &ps {
            let (ma, mb) = (oracle_matrix(a), oracle_matrix(b));
            let comm = &ma * &mb - &mb * &ma;
            let dense_commutes = comm.iter().all(|z| z.norm() < 1e-14);
            assert_eq!(a.commutes(b).unwrap(), dense_commutes, "{a} {b}");
            pairs += 1;
        }
    }
    assert_eq!(pairs, 256);
}

#[test]
fn single_qubit_phase_rules() {
    let x: PauliOperator = "X".parse().unwrap();
    let z: PauliOperator = "Z".parse().unwrap();
    let y: PauliOperator = "Y".parse().unwrap();
    assert_eq!(x.mul(&z).unwrap(), y.clone().with_phase(3));
    assert_eq!(z.mul(&x).unwrap(), y.clone().with_phase(1));
    assert!(y.mul(&y).unwrap().is_identity());
}

#[test]
fn enumeration_counts_and_order() {
    assert_eq!(count_paulis(3, 1), 10);
    assert_eq!(count_paulis(5, 2), 106);
    let ps = enumerate_paulis(5, 2);
    assert_eq!(ps.len(), 106);
    assert!(ps.windows(2).all(|w| w[0] < w[1]));
    assert!(ps.iter().all(|p| p.weight() <= 2 && p.phase() == 0));
}

#[test]
fn mismatched_sizes_are_rejected() {
    let a = PauliOperator::identity(2);
    let b = PauliOperator::identity(3);
    assert!(a.mul(&b).is_err());
    assert!(a.commutes(&b).is_err());
    assert!("+iXQ".parse::<PauliOperator>().is_err());
}

fn pauli(n: usize) -> impl Strategy<Value = PauliOperator> {
    (prop::collection::vec(0u8..4, n), 0u8..4).prop_map(|(ls, ph)| {
        let letters: Vec<Letter> = ls
            .into_iter()
            .map(|v| [Letter::I, Letter::X, Letter::Y, Letter::Z][v as usize])
            .collect();
        PauliOperator::from_letters(&letters, ph)
    })
}

fn triple() -> impl Strategy<Value = (PauliOperator, PauliOperator, PauliOperator)> {
    (1usize..70).prop_flat_map(|n| (pauli(n), pauli(n), pauli(n)))
}

proptest! {
    #[test]
    fn multiplication_is_associative((a, b, c) in triple()) {
        let l = a.mul(&b).unwrap().mul(&c).unwrap();
        let r = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn inverse_and_adjoint((a, _b, _c) in triple()) {
        prop_assert!(a.mul(&a.inverse()).unwrap().is_identity());
        prop_assert!(a.mul(&a.adjoint()).unwrap().is_identity());
    }

    #[test]
    fn commutation_sign((a, b, _c) in triple()) {
        let ab = a.mul(&b).unwrap();
        let ba = b.mul(&a).unwrap();
        prop_assert_eq!(ab.unsigned(), ba.unsigned());
        let diff = (ab.phase() + 4 - ba.phase()) % 4;
        prop_assert_eq!(diff == 0, a.commutes(&b).unwrap());
        prop_assert!(diff == 0 || diff == 2);
    }

    #[test]
    fn text_round_trips((a, _b, _c) in triple()) {
        prop_assert_eq!(PauliOperator::parse_compact(&a.to_compact()).unwrap(), a.clone());
        prop_assert_eq!(PauliOperator::parse_sparse(&a.to_sparse(), a.n()).unwrap(), a.clone());
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<PauliOperator>(&json).unwrap(), a);
    }

    #[test]
    fn symplectic_round_trip((a, _b, _c) in triple()) {
        let v = a.to_symplectic();
        prop_assert_eq!(PauliOperator::from_symplectic(a.n(), &v, a.phase()), a);
    }

    #[test]
    fn dense_action_matches_matrix(a in pauli(4), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let psi = qld_core::randunitary::random_state(&mut rng, 16);
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let expect = oracle_matrix(&a) * v;
        let got = a.apply_dense(psi.amplitudes()).unwrap();
        for (x, y) in got.iter().zip(expect.iter()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }
}
