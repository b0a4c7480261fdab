//! Dense Knill-Laflamme checks for list decoding and the recovery isometry.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::listdec::{ErrorSet, ListTable};
use crate::pauli::PauliOperator;
use crate::randunitary::random_state;
use crate::stabilizer::{StabilizerCode, Syndrome};

/// Largest physical qubit count for dense KL checks.
pub const MAX_KL_QUBITS: usize = 10;
/// Threshold on `‖Π E†F Π‖` for pairs with different syndromes.
pub const CROSS_TOL: f64 = 1e-10;
/// Threshold on `‖M†M − Π‖` for pairs with equal syndromes.
pub const DEFECT_TOL: f64 = 1e-12;
/// Tolerance on assembled isometries and Gram consistency.
pub const ISOMETRY_TOL: f64 = 1e-9;
/// Random code states used by [`verify_recovery_channel`].
pub const CHANNEL_SAMPLES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub e: PauliOperator,
    pub f: PauliOperator,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSyndromeFragment {
    pub pairs: usize,
    pub max_norm: f64,
    pub worst: Option<PairValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SameSyndromeFragment {
    pub results: Vec<PairValue>,
    pub max_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KLReport {
    pub code: String,
    pub error_set: String,
    pub cross_syndrome_max_norm: f64,
    pub cross_syndrome_pairs: usize,
    pub cross_syndrome_worst: Option<PairValue>,
    pub same_syndrome_results: Vec<PairValue>,
    pub same_syndrome_max_defect: f64,
    pub pass: bool,
}

fn check_capacity(code: &StabilizerCode) -> Result<()> {
    if code.n_physical() > MAX_KL_QUBITS {
        return Err(Error::Capacity {
            what: "physical qubits for dense KL checks",
            value: code.n_physical(),
            limit: MAX_KL_QUBITS,
        });
    }
    Ok(())
}

fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn sandwich(proj: &DMatrix<Complex64>, p: &PauliOperator) -> Result<DMatrix<Complex64>> {
    Ok(proj * p.to_matrix()? * proj)
}

/// Max of `‖Π E†F Π‖` over pairs with different syndromes, with an
/// arbitrary stand-in for `Π` (the identity gives the negative control).
pub fn check_cross_syndrome_with(
    code: &StabilizerCode,
    eset: &ErrorSet,
    proj: &DMatrix<Complex64>,
) -> Result<CrossSyndromeFragment> {
    check_capacity(code)?;
    check_dim(code.n_physical(), eset.n())?;
    check_dim(1usize << code.n_physical(), proj.nrows())?;
    let members = eset.members();
    let syn = members.iter().map(|e| code.syndrome(e)).collect::<Result<Vec<_>>>()?;
    let per_row: Vec<(usize, Option<PairValue>)> = (0..members.len())
        .into_par_iter()
        .map(|i| -> Result<(usize, Option<PairValue>)> {
            let mut count = 0;
            let mut worst: Option<PairValue> = None;
            for j in i + 1..members.len() {
                if syn[i] == syn[j] {
                    continue;
                }
                count += 1;
                let k = members[i].adjoint().mul(&members[j])?;
                let v = spectral_norm(&sandwich(proj, &k)?);
                if worst.as_ref().is_none_or(|w| v > w.value) {
                    worst = Some(PairValue {
                        e: members[i].clone(),
                        f: members[j].clone(),
                        value: v,
                    });
                }
            }
            Ok((count, worst))
        })
        .collect::<Result<_>>()?;
    let mut pairs = 0;
    let mut worst: Option<PairValue> = None;
    for (c, w) in per_row {
        pairs += c;
        if let Some(w) = w {
            if worst.as_ref().is_none_or(|b| w.value > b.value) {
                worst = Some(w);
            }
        }
    }
    Ok(CrossSyndromeFragment {
        pairs,
        max_norm: worst.as_ref().map_or(0.0, |w| w.value),
        worst,
    })
}

pub fn check_cross_syndrome(code: &StabilizerCode, eset: &ErrorSet) -> Result<CrossSyndromeFragment> {
    check_capacity(code)?;
    check_cross_syndrome_with(code, eset, &code.code_projector()?)
}

/// Partial-isometry defect `‖M†M − Π‖` of `M = Π E†F Π` for every pair
/// (including `E = F`) sharing a syndrome.
pub fn check_same_syndrome(code: &StabilizerCode, eset: &ErrorSet) -> Result<SameSyndromeFragment> {
    check_capacity(code)?;
    check_dim(code.n_physical(), eset.n())?;
    let proj = code.code_projector()?;
    let members = eset.members();
    let syn = members.iter().map(|e| code.syndrome(e)).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..members.len())
        .flat_map(|i| (i..members.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| syn[i] == syn[j])
        .collect();
    let results: Vec<PairValue> = pairs
        .into_par_iter()
        .map(|(i, j)| -> Result<PairValue> {
            let k = members[i].adjoint().mul(&members[j])?;
            let m = sandwich(&proj, &k)?;
            let defect = spectral_norm(&(m.adjoint() * &m - &proj));
            Ok(PairValue {
                e: members[i].clone(),
                f: members[j].clone(),
                value: defect,
            })
        })
        .collect::<Result<_>>()?;
    let max_defect = results.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(SameSyndromeFragment { results, max_defect })
}

pub fn kl_report(code: &StabilizerCode, eset: &ErrorSet) -> Result<KLReport> {
    let cross = check_cross_syndrome(code, eset)?;
    let same = check_same_syndrome(code, eset)?;
    Ok(KLReport {
        code: code.name().to_string(),
        error_set: eset.descriptor().to_string(),
        pass: cross.max_norm <= CROSS_TOL && same.max_defect <= DEFECT_TOL,
        cross_syndrome_max_norm: cross.max_norm,
        cross_syndrome_pairs: cross.pairs,
        cross_syndrome_worst: cross.worst,
        same_syndrome_results: same.results,
        same_syndrome_max_defect: same.max_defect,
    })
}

fn dense_vec(v: Vec<Complex64>) -> DVector<Complex64> {
    DVector::from_vec(v)
}

/// `Y_k(E) = Σ_i U(E)_{ki} E_i` applied to `v`.
fn apply_y(u: &DMatrix<Complex64>, k: usize, list: &[PauliOperator], v: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for (i, e) in list.iter().enumerate() {
        let c = u[(k, i)];
        if c.norm() == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(e.apply_dense(v)?) {
            *o += c * a;
        }
    }
    Ok(out)
}

/// Assembles the recovery isometry on the syndrome-`s` subspace.
///
/// The inputs are the error-set members recorded at `s`; `branch_unitaries`
/// supplies one `ℓ × ℓ` matrix `U(E)` per input in the order of
/// [`ListTable::members`] and defaults to the identity. The returned matrix
/// maps the physical space into `physical ⊗ aux` with row index
/// `phys · ℓ + k`.
pub fn build_recovery_isometry(
    code: &StabilizerCode,
    table: &ListTable,
    s: &Syndrome,
    branch_unitaries: Option<&[DMatrix<Complex64>]>,
) -> Result<DMatrix<Complex64>> {
    check_capacity(code)?;
    let list = table.list(s);
    if list.is_empty() {
        return Err(Error::NoErrorClass(s.to_string()));
    }
    let l = list.len();
    let inputs = table.members(s);
    let identity = DMatrix::<Complex64>::identity(l, l);
    let us: Vec<&DMatrix<Complex64>> = match branch_unitaries {
        None => vec![&identity; inputs.len()],
        Some(us) => {
            check_dim(inputs.len(), us.len())?;
            for u in us {
                check_dim(l, u.nrows())?;
                check_dim(l, u.ncols())?;
            }
            us.iter().collect()
        }
    };
    let c = 1.0 / l as f64;
    let proj = code.code_projector()?;
    let ys = |idx: usize| -> Result<Vec<DMatrix<Complex64>>> {
        let id = DMatrix::<Complex64>::identity(proj.nrows(), proj.nrows());
        (0..l)
            .map(|k| {
                let cols: Vec<Vec<Complex64>> = (0..proj.ncols())
                    .map(|col| apply_y(us[idx], k, list, id.column(col).as_slice()))
                    .collect::<Result<_>>()?;
                Ok(DMatrix::from_fn(proj.nrows(), proj.ncols(), |r, cc| cols[cc][r]))
            })
            .collect()
    };
    let y_all: Vec<Vec<DMatrix<Complex64>>> = (0..inputs.len()).map(ys).collect::<Result<_>>()?;
    // Gram condition: Π E†F Π == c Σ_k Π Y_k(E)† Y_k(F) Π for every input pair.
    let mut worst = (0usize, 0usize, 0.0f64);
    for a in 0..inputs.len() {
        for b in a..inputs.len() {
            let lhs = sandwich(&proj, &inputs[a].adjoint().mul(&inputs[b])?)?;
            let mut rhs = DMatrix::<Complex64>::zeros(proj.nrows(), proj.ncols());
            for (ya, yb) in y_all[a].iter().zip(&y_all[b]) {
                rhs += ya.adjoint() * yb;
            }
            let rhs = &proj * rhs * &proj * Complex64::new(c, 0.0);
            let defect = spectral_norm(&(lhs - rhs));
            if defect > worst.2 {
                worst = (a, b, defect);
            }
        }
    }
    if worst.2 > ISOMETRY_TOL {
        return Err(Error::Consistency {
            e: inputs[worst.0].to_compact(),
            f: inputs[worst.1].to_compact(),
            defect: worst.2,
        });
    }
    // Columns from the basis E_1 |b̄⟩ of the syndrome-s subspace.
    let dim = 1usize << code.n_physical();
    let e1 = &list[0];
    let e1_pos = inputs.iter().position(|p| p == e1).unwrap_or(0);
    let k_log = code.n_logical();
    let mut v = DMatrix::<Complex64>::zeros(dim * l, dim);
    for b in 0..(1usize << k_log) {
        let bar = code.encode_state(&crate::simengine::StateVector::basis(k_log, b))?;
        let input = dense_vec(e1.apply_dense(bar.amplitudes())?);
        let mut image = DVector::<Complex64>::zeros(dim * l);
        for k in 0..l {
            let yk = &y_all[e1_pos][k] * dense_vec(bar.amplitudes().to_vec());
            for r in 0..dim {
                image[r * l + k] = yk[r] * c.sqrt();
            }
        }
        v += image * input.adjoint();
    }
    // V†V must be the projector onto the syndrome-s subspace.
    let e1m = e1.to_matrix()?;
    let ps = &e1m * &proj * e1m.adjoint();
    let iso = spectral_norm(&(v.adjoint() * &v - ps));
    if iso > ISOMETRY_TOL {
        return Err(Error::Consistency {
            e: e1.to_compact(),
            f: e1.to_compact(),
            defect: iso,
        });
    }
    Ok(v)
}

/// Max entrywise deviation between `Tr_aux(V E ρ E† V†)` and the uniform
/// list mixture, over every input error and random code states.
pub fn verify_recovery_channel<R: Rng + ?Sized>(
    code: &StabilizerCode,
    table: &ListTable,
    s: &Syndrome,
    v: &DMatrix<Complex64>,
    rng: &mut R,
) -> Result<f64> {
    let list = table.list(s);
    if list.is_empty() {
        return Err(Error::NoErrorClass(s.to_string()));
    }
    let l = list.len();
    let dim = 1usize << code.n_physical();
    check_dim(dim * l, v.nrows())?;
    check_dim(dim, v.ncols())?;
    let c = Complex64::new(1.0 / l as f64, 0.0);
    let mut worst = 0.0f64;
    for _ in 0..CHANNEL_SAMPLES {
        let psi = random_state(rng, 1 << code.n_logical());
        let bar = code.encode_state(&psi)?;
        let mut target = DMatrix::<Complex64>::zeros(dim, dim);
        for e in list {
            let x = dense_vec(e.apply_dense(bar.amplitudes())?);
            target += &x * x.adjoint() * c;
        }
        for e in table.members(s) {
            let w = v * dense_vec(e.apply_dense(bar.amplitudes())?);
            let wm = DMatrix::from_fn(dim, l, |r, k| w[r * l + k]);
            let out = &wm * wm.adjoint();
            let dev = (out - &target).iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::listdec::build_list_table;
    use crate::pauli::Letter;
    use crate::randunitary::stream_rng;
    use crate::stabilizer::library::builtin;

    #[test]
    fn perfect_code_weight_one_passes() {
        let code = builtin("perfect5").unwrap();
        let r = kl_report(&code, &ErrorSet::new(5, 1)).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.same_syndrome_results.len(), 16);
    }

    #[test]
    fn identity_projector_is_a_failing_control() {
        let code = builtin("perfect5").unwrap();
        let id = DMatrix::identity(32, 32);
        let f = check_cross_syndrome_with(&code, &ErrorSet::new(5, 1), &id).unwrap();
        assert!(f.max_norm > CROSS_TOL);
    }

    #[test]
    fn capacity_guard() {
        let code = builtin("perfect5^3").unwrap();
        assert!(matches!(
            check_cross_syndrome(&code, &ErrorSet::new(15, 0)),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn single_element_list_gives_isometry() {
        let code = builtin("perfect5").unwrap();
        let t = build_list_table(&code, &ErrorSet::new(5, 1)).unwrap();
        let s = code.syndrome(&"XIIII".parse().unwrap()).unwrap();
        let v = build_recovery_isometry(&code, &t, &s, None).unwrap();
        let dev = verify_recovery_channel(&code, &t, &s, &v, &mut stream_rng(&[1; 32], 0)).unwrap();
        assert!(dev <= 1e-12, "{dev}");
    }

    #[test]
    fn stabilizer_equivalent_inputs_succeed() {
        let code = builtin("rep3").unwrap();
        let eset = ErrorSet::with_letters(3, 1, &[Letter::Z]);
        let t = build_list_table(&code, &eset).unwrap();
        let s = Syndrome::zero(2);
        assert_eq!(t.list(&s).len(), 2);
        assert_eq!(t.members(&s).len(), 4);
    }
}
