use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use qld_core::klcheck::{
    build_recovery_isometry, check_cross_syndrome_with, kl_report, verify_recovery_channel, CROSS_TOL, DEFECT_TOL,
};
use qld_core::listdec::{build_list_table, is_L_qld, list_decode, mixture_channel, mixture_density, ErrorSet};
use qld_core::pauli::{Letter, PauliOperator};
use qld_core::randunitary::random_state;
use qld_core::stabilizer::library::builtin;
use qld_core::{Error, StabilizerCode};

// Full stabilizer group as unsigned symplectic words, built by closure under XOR.
fn stabilizer_group(code: &StabilizerCode) -> HashSet<Vec<u64>> {
    let mut group: HashSet<Vec<u64>> = HashSet::new();
    group.insert(PauliOperator::identity(code.n_physical()).to_symplectic());
    for g in code.generators() {
        let gv = g.to_symplectic();
        let next: Vec<Vec<u64>> = group
            .iter()
            .map(|h| h.iter().zip(&gv).map(|(a, b)| a ^ b).collect())
            .collect();
        group.extend(next);
    }
    group
}

fn oracle_syndrome(code: &StabilizerCode, e: &PauliOperator) -> Vec<bool> {
    code.generators().iter().map(|g| !g.commutes(e).unwrap()).collect()
}

/// Union-find style grouping: same syndrome and product in the stabilizer group.
fn oracle_partition(code: &StabilizerCode, errors: &[PauliOperator]) -> BTreeMap<Vec<bool>, Vec<Vec<PauliOperator>>> {
    let group = stabilizer_group(code);
    let mut out: BTreeMap<Vec<bool>, Vec<Vec<PauliOperator>>> = BTreeMap::new();
    for e in errors {
        let classes = out.entry(oracle_syndrome(code, e)).or_default();
        let ev = e.to_symplectic();
        let hit = classes.iter_mut().find(|c| {
            let fv = c[0].to_symplectic();
            let prod: Vec<u64> = ev.iter().zip(&fv).map(|(a, b)| a ^ b).collect();
            group.contains(&prod)
        });
        match hit {
            Some(c) => c.push(e.clone()),
            None => classes.push(vec![e.clone()]),
        }
    }
    out
}

#[test]
fn perfect_code_table_matches_brute_force_partition() {
    let code = builtin("perfect5").unwrap();
    assert_eq!(stabilizer_group(&code).len(), 16);
    let eset = ErrorSet::new(5, 2);
    assert_eq!(eset.members().len(), 106);
    let table = build_list_table(&code, &eset).unwrap();
    let oracle = oracle_partition(&code, eset.members());
    assert_eq!(table.syndromes().count(), oracle.len());
    let mut covered = 0;
    let mut l_max = 0;
    for (bits, classes) in &oracle {
        let s = qld_core::Syndrome::new(bits.clone());
        let got = table.classes(&s);
        assert_eq!(got.len(), classes.len(), "{s}");
        for c in classes {
            let rep = c.iter().min().unwrap();
            let class = got.iter().find(|g| &g.representative == rep).expect("representative");
            let mut want = c.clone();
            want.sort();
            assert_eq!(class.members, want);
            covered += c.len();
        }
        l_max = l_max.max(classes.len());
    }
    assert_eq!(covered, 106);
    assert_eq!(table.covered(), 106);
    assert_eq!(table.l_max(), l_max);
    assert_eq!(table.l_max(), 4);
    assert!(is_L_qld(&table, 4) && !is_L_qld(&table, 3));
}

#[test]
fn mixture_matches_dense_assembly() {
    let code = builtin("perfect5").unwrap();
    let table = build_list_table(&code, &ErrorSet::new(5, 2)).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let psi = random_state(&mut rng, 2);
    let enc = code.encode_state(&psi).unwrap();
    let enc_v = DVector::from_column_slice(enc.amplitudes());
    for (s, list) in table.iter().take(6) {
        let rho = mixture_channel(&code, &table, &psi, s).unwrap().density_matrix();
        let mut dense = DMatrix::<Complex64>::zeros(32, 32);
        for e in list {
            let v = e.to_matrix().unwrap() * &enc_v;
            dense += &v * v.adjoint() / Complex64::new(list.len() as f64, 0.0);
        }
        let dev = (&rho - &dense).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-12, "{s}: {dev}");
        let dev2 = (&rho - mixture_density(&enc, list).unwrap()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev2 < 1e-12);
        // decoding a corrupted state returns the syndrome and list
        let corrupted = enc.apply_pauli(&list[0]).unwrap();
        let (ms, ml, _) = list_decode(&code, &table, &corrupted).unwrap();
        assert_eq!(&ms, s);
        assert_eq!(ml.as_slice(), list);
    }
}

#[test]
fn recovery_isometry_for_degenerate_phase_flips() {
    let code = builtin("rep3").unwrap();
    let members: Vec<PauliOperator> = (0..3).map(|q| PauliOperator::single(3, q, Letter::Z)).collect();
    let eset = ErrorSet::from_members(3, members).unwrap();
    let table = build_list_table(&code, &eset).unwrap();
    let s = qld_core::Syndrome::zero(2);
    assert_eq!(table.list(&s).len(), 1);
    assert_eq!(table.members(&s).len(), 3);
    let v = build_recovery_isometry(&code, &table, &s, None).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let dev = verify_recovery_channel(&code, &table, &s, &v, &mut rng).unwrap();
    assert!(dev <= 1e-10, "{dev}");
}

#[test]
fn recovery_isometry_rejects_inconsistent_lists() {
    let code = builtin("rep3").unwrap();
    // I and Z0 share the trivial syndrome but act differently on the code.
    let table = build_list_table(&code, &ErrorSet::with_letters(3, 1, &[Letter::Z])).unwrap();
    let s = qld_core::Syndrome::zero(2);
    assert_eq!(table.list(&s).len(), 2);
    let r = build_recovery_isometry(&code, &table, &s, None);
    assert!(matches!(r, Err(Error::Consistency { .. })), "{r:?}");
}

#[test]
fn perfect_code_knill_laflamme() {
    let code = builtin("perfect5").unwrap();
    let eset = ErrorSet::new(5, 1);
    let r = kl_report(&code, &eset).unwrap();
    assert!(r.pass);
    assert!(r.cross_syndrome_max_norm <= CROSS_TOL);
    assert!(r.same_syndrome_max_defect <= DEFECT_TOL);
    // 16 syndromes, each owning one error: every distinct-syndrome pair is checked
    assert_eq!(r.cross_syndrome_pairs, 16 * 15 / 2);
    let id = DMatrix::<Complex64>::identity(32, 32);
    let neg = check_cross_syndrome_with(&code, &eset, &id).unwrap();
    assert!((neg.max_norm - 1.0).abs() < 1e-12);
}

#[test]
fn weight_two_paulis_satisfy_list_conditions_but_not_unique_ones() {
    let code = builtin("perfect5").unwrap();
    let eset = ErrorSet::new(5, 2);
    let r = kl_report(&code, &eset).unwrap();
    // Same-syndrome Pauli products are stabilizers or logicals, both unitary on the code.
    assert!(r.pass);
    let proj = code.code_projector().unwrap();
    let k_dim = Complex64::new(2.0, 0.0);
    let mut worst = 0.0f64;
    for res in &r.same_syndrome_results {
        let m = &proj * res.e.adjoint().mul(&res.f).unwrap().to_matrix().unwrap() * &proj;
        let c = m.trace() / k_dim;
        let dev = (&m - &proj * c).singular_values().max();
        worst = worst.max(dev);
    }
    // ...but some pair acts as a nontrivial logical, so Π E†F Π is not ∝ Π.
    assert!((worst - 1.0).abs() < 1e-10, "{worst}");
}
