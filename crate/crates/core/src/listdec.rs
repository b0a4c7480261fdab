//! Syndrome list tables, list decoding and the uniform-mixture channel.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::pauli::{enumerate_paulis, Letter, PauliOperator};
use crate::simengine::{Ensemble, StateVector};
use crate::stabilizer::{StabilizerCode, Syndrome};

/// Tolerance for a dense state to count as a syndrome eigenstate.
pub const EIGENSTATE_TOL: f64 = 1e-9;

/// A deterministic set of phase-0 Pauli errors.
#[derive(Clone, Debug)]
pub struct ErrorSet {
    n: usize,
    max_weight: usize,
    members: Vec<PauliOperator>,
    descriptor: String,
}

impl ErrorSet {
    /// Every Pauli of weight at most `max_weight`.
    pub fn new(n: usize, max_weight: usize) -> Self {
        Self {
            n,
            max_weight,
            members: enumerate_paulis(n, max_weight),
            descriptor: format!("weight<={max_weight}"),
        }
    }

    /// Weight budget `floor(eps · n)`.
    pub fn from_fraction(n: usize, eps: f64) -> Self {
        Self::new(n, (eps * n as f64).floor() as usize)
    }

    /// Weight-bounded errors built only from the given letters.
    pub fn with_letters(n: usize, max_weight: usize, letters: &[Letter]) -> Self {
        let members = enumerate_paulis(n, max_weight)
            .into_iter()
            .filter(|p| p.support().iter().all(|&q| letters.contains(&p.letter(q))))
            .collect();
        let tag: String = letters.iter().map(|l| l.as_char()).collect();
        Self {
            n,
            max_weight,
            members,
            descriptor: format!("weight<={max_weight} letters={tag}"),
        }
    }

    /// An explicit list; phases are dropped and the order canonicalized.
    pub fn from_members(n: usize, members: Vec<PauliOperator>) -> Result<Self> {
        let mut m = Vec::with_capacity(members.len());
        for p in members {
            check_dim(n, p.n())?;
            m.push(p.unsigned());
        }
        m.sort();
        m.dedup();
        let max_weight = m.iter().map(|p| p.weight()).max().unwrap_or(0);
        Ok(Self {
            n,
            max_weight,
            descriptor: format!("explicit({})", m.len()),
            members: m,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_weight(&self) -> usize {
        self.max_weight
    }

    pub fn members(&self) -> &[PauliOperator] {
        &self.members
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn contains(&self, p: &PauliOperator) -> bool {
        self.members.binary_search(&p.unsigned()).is_ok()
    }
}

/// One stabilizer-equivalence class inside a syndrome list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ListClass {
    pub representative: PauliOperator,
    /// Error-set members in this class, in canonical order.
    pub members: Vec<PauliOperator>,
}

#[derive(Clone, Debug)]
pub struct ListTable {
    code_name: String,
    n: usize,
    n_generators: usize,
    max_weight: usize,
    entries: BTreeMap<Syndrome, Vec<ListClass>>,
    reps: BTreeMap<Syndrome, Vec<PauliOperator>>,
    l_max: usize,
}

impl ListTable {
    pub fn code_name(&self) -> &str {
        &self.code_name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_weight(&self) -> usize {
        self.max_weight
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Representatives at `s`; empty when no error reaches `s`.
    pub fn list(&self, s: &Syndrome) -> &[PauliOperator] {
        self.reps.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every error-set member at `s`, class by class.
    pub fn members(&self, s: &Syndrome) -> Vec<PauliOperator> {
        self.classes(s).iter().flat_map(|c| c.members.iter().cloned()).collect()
    }

    pub fn classes(&self, s: &Syndrome) -> &[ListClass] {
        self.entries.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Reached syndromes in ascending order.
    pub fn syndromes(&self) -> impl Iterator<Item = &Syndrome> {
        self.reps.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Syndrome, &[PauliOperator])> {
        self.reps.iter().map(|(s, r)| (s, r.as_slice()))
    }

    /// Total number of error-set members covered by the classes.
    pub fn covered(&self) -> usize {
        self.entries.values().flatten().map(|c| c.members.len()).sum()
    }

    /// Canonical JSON export.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<TableEntryJson> = self
            .reps
            .iter()
            .map(|(s, r)| TableEntryJson {
                syndrome: s.to_string(),
                reps: r.iter().map(|p| p.letter_string()).collect(),
            })
            .collect();
        serde_json::to_value(TableJson {
            code: self.code_name.clone(),
            max_weight: self.max_weight,
            l_max: self.l_max,
            entries,
        })
        .expect("table serializes")
    }

    /// Rebuilds a table from its JSON export; only representatives are
    /// stored there, so every class comes back with itself as sole member.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let t: TableJson = serde_json::from_value(v.clone())?;
        let mut reps = BTreeMap::new();
        let mut entries = BTreeMap::new();
        let mut n = 0;
        let mut r = 0;
        for e in t.entries {
            let s: Syndrome = e.syndrome.parse()?;
            r = s.len();
            let list = e
                .reps
                .iter()
                .map(|p| PauliOperator::parse_compact(p))
                .collect::<Result<Vec<_>>>()?;
            if let Some(p) = list.first() {
                n = p.n();
            }
            entries.insert(
                s.clone(),
                list.iter()
                    .map(|p| ListClass {
                        representative: p.clone(),
                        members: vec![p.clone()],
                    })
                    .collect(),
            );
            reps.insert(s, list);
        }
        let l_max = reps.values().map(Vec::len).max().unwrap_or(0);
        if l_max != t.l_max {
            return Err(Error::Parse(format!("L_max {} does not match entries ({l_max})", t.l_max)));
        }
        Ok(Self {
            code_name: t.code,
            n,
            n_generators: r,
            max_weight: t.max_weight,
            entries,
            reps,
            l_max,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TableEntryJson {
    syndrome: String,
    reps: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    code: String,
    max_weight: usize,
    #[serde(rename = "L_max")]
    l_max: usize,
    entries: Vec<TableEntryJson>,
}

/// Partitions `eset` by syndrome and then by stabilizer coset, keeping the
/// least member of every coset as its representative.
pub fn build_list_table(code: &StabilizerCode, eset: &ErrorSet) -> Result<ListTable> {
    check_dim(code.n_physical(), eset.n())?;
    let mut by_syndrome: HashMap<Syndrome, Vec<&PauliOperator>> = HashMap::new();
    for e in eset.members() {
        by_syndrome.entry(code.syndrome(e)?).or_default().push(e);
    }
    let mut groups: Vec<(Syndrome, Vec<&PauliOperator>)> = by_syndrome.into_iter().collect();
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    let classes: Vec<(Syndrome, Vec<ListClass>)> = groups
        .into_par_iter()
        .map(|(s, errs)| {
            let mut by_coset: HashMap<Vec<u64>, ListClass> = HashMap::new();
            for e in errs {
                let key = code.coset_key(e).expect("dimension checked");
                by_coset
                    .entry(key)
                    .and_modify(|c| c.members.push(e.clone()))
                    .or_insert_with(|| ListClass {
                        representative: e.clone(),
                        members: vec![e.clone()],
                    });
            }
            // Members arrive in canonical order, so the first is the least.
            let mut list: Vec<ListClass> = by_coset.into_values().collect();
            list.sort_by(|a, b| a.representative.cmp(&b.representative));
            (s, list)
        })
        .collect();
    let entries: BTreeMap<Syndrome, Vec<ListClass>> = classes.into_iter().collect();
    let reps: BTreeMap<Syndrome, Vec<PauliOperator>> = entries
        .iter()
        .map(|(s, l)| (s.clone(), l.iter().map(|c| c.representative.clone()).collect()))
        .collect();
    let l_max = reps.values().map(Vec::len).max().unwrap_or(0);
    Ok(ListTable {
        code_name: code.name().to_string(),
        n: code.n_physical(),
        n_generators: code.n_generators(),
        max_weight: eset.max_weight(),
        entries,
        reps,
        l_max,
    })
}

#[allow(non_snake_case)]
pub fn is_L_qld(table: &ListTable, l: usize) -> bool {
    table.l_max() <= l
}

/// Measures the syndrome of a dense state that must be a syndrome eigenstate.
pub fn measure_syndrome(code: &StabilizerCode, state: &StateVector) -> Result<Syndrome> {
    check_dim(1usize << code.n_physical(), state.dim())?;
    let norm2 = state.norm().powi(2);
    let mut bits = Vec::with_capacity(code.n_generators());
    for (i, g) in code.generators().iter().enumerate() {
        let expect = state.inner(&state.apply_pauli(g)?)?.re / norm2;
        let p_plus = 0.5 * (1.0 + expect);
        if p_plus.abs() <= EIGENSTATE_TOL {
            bits.push(true);
        } else if (p_plus - 1.0).abs() <= EIGENSTATE_TOL {
            bits.push(false);
        } else {
            return Err(Error::ContractViolation(format!(
                "state is not an eigenstate of generator {i}: P(+1) = {p_plus:.6}"
            )));
        }
    }
    Ok(Syndrome::new(bits))
}

/// Syndrome, its representative list and the (unchanged) post-measurement state.
pub fn list_decode(
    code: &StabilizerCode,
    table: &ListTable,
    state: &StateVector,
) -> Result<(Syndrome, Vec<PauliOperator>, StateVector)> {
    check_dim(table.n_generators, code.n_generators())?;
    let s = measure_syndrome(code, state)?;
    let list = table.list(&s).to_vec();
    Ok((s, list, state.clone()))
}

/// Uniform mixture `{(1/ℓ, E_i |ψ̄⟩)}` over the list at `s`.
pub fn mixture_channel(
    code: &StabilizerCode,
    table: &ListTable,
    logical: &StateVector,
    s: &Syndrome,
) -> Result<Ensemble> {
    let list = table.list(s);
    if list.is_empty() {
        return Err(Error::NoErrorClass(s.to_string()));
    }
    let encoded = code.encode_state(logical)?;
    let w = 1.0 / list.len() as f64;
    let entries = list
        .iter()
        .map(|e| Ok((w, encoded.apply_pauli(e)?)))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(entries)
}

/// `C† E_i C = P_i ⊗ A_i` for every list member at `s`.
pub fn logical_list_errors(
    code: &StabilizerCode,
    table: &ListTable,
    s: &Syndrome,
) -> Result<Vec<(PauliOperator, PauliOperator)>> {
    check_dim(code.n_physical(), table.n())?;
    table.list(s).iter().map(|e| code.logical_split(e)).collect()
}

/// Dense `Σ_i c E_i |ψ⟩⟨ψ| E_i†` used to cross-check mixtures.
pub fn mixture_density(
    encoded: &StateVector,
    errors: &[PauliOperator],
) -> Result<nalgebra::DMatrix<Complex64>> {
    let d = encoded.dim();
    let mut rho = nalgebra::DMatrix::zeros(d, d);
    let c = Complex64::new(1.0 / errors.len() as f64, 0.0);
    for e in errors {
        let v = nalgebra::DVector::from_vec(encoded.apply_pauli(e)?.into_amplitudes());
        rho += &v * v.adjoint() * c;
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stabilizer::library::builtin;

    #[test]
    fn repetition_bit_flips_are_uniquely_decodable() {
        let code = builtin("rep3").unwrap();
        let eset = ErrorSet::with_letters(3, 1, &[Letter::X]);
        let t = build_list_table(&code, &eset).unwrap();
        assert_eq!(t.syndromes().count(), 4);
        assert_eq!(t.l_max(), 1);
        assert!(is_L_qld(&t, 1));
    }

    #[test]
    fn perfect_code_weight_one() {
        let code = builtin("perfect5").unwrap();
        let t = build_list_table(&code, &ErrorSet::new(5, 1)).unwrap();
        assert_eq!(t.syndromes().count(), 16);
        assert_eq!(t.l_max(), 1);
        assert_eq!(t.covered(), 16);
    }

    #[test]
    fn empty_list_is_an_error_for_mixtures() {
        let code = builtin("rep3").unwrap();
        let t = build_list_table(&code, &ErrorSet::from_members(3, vec![PauliOperator::identity(3)]).unwrap()).unwrap();
        let s: Syndrome = "11".parse().unwrap();
        assert!(t.list(&s).is_empty());
        let r = mixture_channel(&code, &t, &StateVector::zero(1), &s);
        assert!(matches!(r, Err(Error::NoErrorClass(_))));
    }

    #[test]
    fn json_round_trip() {
        let code = builtin("perfect5").unwrap();
        let t = build_list_table(&code, &ErrorSet::new(5, 2)).unwrap();
        let j = t.to_json();
        assert!(j["entries"][0]["syndrome"].is_string());
        let back = ListTable::from_json(&j).unwrap();
        assert_eq!(back.l_max(), t.l_max());
        for (s, l) in t.iter() {
            assert_eq!(back.list(s), l);
        }
    }

    #[test]
    fn non_eigenstate_is_rejected() {
        let code = builtin("rep3").unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        amps[0] = Complex64::new(h, 0.0);
        amps[1] = Complex64::new(h, 0.0);
        let psi = StateVector::new(amps).unwrap();
        let t = build_list_table(&code, &ErrorSet::new(3, 1)).unwrap();
        assert!(matches!(list_decode(&code, &t, &psi), Err(Error::ContractViolation(_))));
    }
}
