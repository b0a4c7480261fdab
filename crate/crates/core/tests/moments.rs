use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use qld_core::moments::{
    beta_pauli, expected_p0, expected_unnormalized_fidelity, lemma2_beta, moment2_coefficients, moment4,
    moment4_pauli, permutation_matrix, to_f64, wg, MomentValue, Permutation,
};
use qld_core::pauli::PauliOperator;
use qld_core::randunitary::{random_state, sample_haar};

fn max_dev(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// Independent route: Wg is the inverse of the Gram matrix d^{#cycles(π⁻¹σ)}.
fn gram_inverse(k: usize, d: usize) -> (Vec<Permutation>, DMatrix<f64>) {
    let perms = Permutation::all(k);
    let g = DMatrix::from_fn(perms.len(), perms.len(), |i, j| {
        (d as f64).powi(perms[i].inverse().compose(&perms[j]).num_cycles() as i32)
    });
    (perms, g.try_inverse().expect("Gram matrix is invertible for d >= k"))
}

#[test]
fn weingarten_matches_gram_inverse() {
    for (k, d) in [(2, 2), (2, 3), (4, 4), (4, 5), (4, 8), (4, 16)] {
        let (perms, inv) = gram_inverse(k, d);
        for (i, p) in perms.iter().enumerate() {
            for (j, s) in perms.iter().enumerate() {
                let exact = to_f64(&wg(&p.inverse().compose(s), d).unwrap());
                let scale = inv[(i, j)].abs().max(1e-300);
                assert!((exact - inv[(i, j)]).abs() / scale < 1e-6, "k={k} d={d} {p} {s}");
            }
        }
    }
}

#[test]
fn weingarten_poles_are_errors() {
    let p = Permutation::identity(4);
    assert!(wg(&p, 3).is_err());
    assert!(wg(&Permutation::identity(3), 8).is_err());
}

#[test]
fn second_moment_matches_monte_carlo() {
    let mut rng = ChaCha20Rng::seed_from_u64(51);
    let o = DMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let (ci, cf) = moment2_coefficients(&o).unwrap();
    let swap = permutation_matrix(&Permutation::from_mapping(vec![1, 0]).unwrap(), 2);
    let predicted = DMatrix::<Complex64>::identity(4, 4) * ci + &swap * cf;
    let trials = 100_000;
    let mut acc = DMatrix::<Complex64>::zeros(4, 4);
    for _ in 0..trials {
        let u = sample_haar(&mut rng, 2);
        let uu = u.kronecker(&u);
        acc += uu.adjoint() * &o * uu;
    }
    acc /= Complex64::new(trials as f64, 0.0);
    // entries of O are bounded by 1/√2, so 5σ of the sample mean is about 0.01
    assert!(max_dev(&acc, &predicted) < 0.01, "{}", max_dev(&acc, &predicted));
    assert!(moment2_coefficients(&DMatrix::identity(3, 3)).is_err());
}

#[test]
fn fourth_moment_fixes_the_commutant() {
    let d = 4;
    let id = DMatrix::<Complex64>::identity(256, 256);
    let MomentValue::Operator(m) = moment4(&id, d).unwrap().value else {
        panic!("dense moment")
    };
    assert!(max_dev(&m, &id) < 1e-12);
    for map in [vec![1, 0, 2, 3], vec![1, 2, 3, 0], vec![2, 3, 0, 1]] {
        let v = permutation_matrix(&Permutation::from_mapping(map).unwrap(), d);
        let MomentValue::Operator(m) = moment4(&v, d).unwrap().value else {
            panic!("dense moment")
        };
        assert!(max_dev(&m, &v) < 1e-12);
    }
    assert!(moment4(&DMatrix::identity(16 * 16 * 16 * 16, 1), 16).is_err());
}

#[test]
fn pauli_betas_follow_the_closed_form() {
    let mut rng = ChaCha20Rng::seed_from_u64(52);
    let mut checked = 0;
    while checked < 50 {
        let bits: u64 = rng.random_range(1..256);
        let p = PauliOperator::from_symplectic(4, &[bits], 0);
        for (sign, t) in [(1, p.clone()), (-1, p.clone().with_phase(1))] {
            let factors = [t.adjoint(), t.clone(), t.adjoint(), t.clone()];
            for sigma in Permutation::all(4) {
                let fast = beta_pauli(&factors, &sigma);
                let closed = to_f64(&num_rational::BigRational::from_integer(lemma2_beta(&sigma, 16, sign)));
                assert!((fast - Complex64::new(closed, 0.0)).norm() < 1e-9, "{t} {sigma}");
            }
            let r = moment4_pauli(&factors).unwrap();
            assert_eq!(r.order, 4);
        }
        checked += 1;
    }
}

#[test]
fn restoration_fidelity_matches_haar_sampling() {
    // n = 1 data qubit, m = 1 tag qubit: d = 4, Π = I ⊗ |0⟩⟨0|.
    let (n, m) = (1u32, 1u32);
    let d = 4usize;
    let mut rng = ChaCha20Rng::seed_from_u64(53);
    let pi = DMatrix::from_fn(d, d, |r, c| {
        if r == c && r % 2 == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let t: PauliOperator = "XZ".parse().unwrap();
    let tm = t.to_matrix().unwrap();
    let trials = 40_000;
    let (mut p0_sum, mut f_sum, mut f_sq) = (0.0, 0.0, 0.0);
    for _ in 0..trials {
        let u = sample_haar(&mut rng, d);
        let phi = random_state(&mut rng, 2);
        let psi0 = nalgebra::DVector::from_vec(vec![phi.amplitudes()[0], Complex64::new(0.0, 0.0), phi.amplitudes()[1], Complex64::new(0.0, 0.0)]);
        let w = u.adjoint() * &tm * &u;
        let v = &w * &psi0;
        let p0 = (v.adjoint() * &pi * &v)[(0, 0)].re;
        let f = (1.0 - p0).powi(2);
        p0_sum += p0;
        f_sum += f;
        f_sq += f * f;
    }
    let nt = trials as f64;
    let f_mean = f_sum / nt;
    let f_err = ((f_sq / nt - f_mean * f_mean) / nt).sqrt();
    let exact = expected_unnormalized_fidelity(n, m, 1).unwrap();
    assert!((f_mean - exact).abs() < 5.0 * f_err, "{f_mean} ± {f_err} vs {exact}");
    assert!((p0_sum / nt - expected_p0(n, m)).abs() < 0.01);
    assert_eq!(exact, expected_unnormalized_fidelity(n, m, -1).unwrap());
}
