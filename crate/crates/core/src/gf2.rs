//! Small GF(2) linear-algebra kit over packed `u64` words.

pub(crate) fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
pub(crate) fn get(v: &[u64], i: usize) -> bool {
    (v[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
pub(crate) fn set(v: &mut [u64], i: usize, b: bool) {
    let mask = 1u64 << (i % 64);
    if b {
        v[i / 64] |= mask;
    } else {
        v[i / 64] &= !mask;
    }
}

#[inline]
pub(crate) fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

#[cfg(test)]
fn dot(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum::<u32>() & 1 == 1
}

pub(crate) fn is_zero(v: &[u64]) -> bool {
    v.iter().all(|&w| w == 0)
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Fully reduced row-echelon basis of a GF(2) subspace.
///
/// Every pivot column appears in exactly one row, so `reduce` returns a
/// canonical representative of the coset `v + span`.
#[derive(Clone, Debug, Default)]
pub struct Gf2Basis {
    rows: Vec<(usize, Vec<u64>)>,
}

impl Gf2Basis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn reduce(&self, v: &[u64]) -> Vec<u64> {
        let mut out = v.to_vec();
        for (p, row) in &self.rows {
            if get(&out, *p) {
                xor_into(&mut out, row);
            }
        }
        out
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        is_zero(&self.reduce(v))
    }

    /// Adds `v` to the span; returns false if it was already dependent.
    pub fn insert(&mut self, v: &[u64]) -> bool {
        let r = self.reduce(v);
        let Some(p) = lowest_bit(&r) else {
            return false;
        };
        for (_, row) in self.rows.iter_mut() {
            if get(row, p) {
                xor_into(row, &r);
            }
        }
        self.rows.push((p, r));
        true
    }
}

/// Solves `A v = b` over GF(2) where `rows[i]·v = rhs[i]`.
///
/// Pivots are taken in column order and free variables are set to zero, so
/// the answer is a deterministic function of the inputs.
pub(crate) fn solve(rows: &[Vec<u64>], rhs: &[bool], nbits: usize) -> Option<Vec<u64>> {
    let mut a: Vec<(Vec<u64>, bool)> = rows.iter().cloned().zip(rhs.iter().copied()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..nbits {
        let Some(k) = (r..a.len()).find(|&k| get(&a[k].0, col)) else {
            continue;
        };
        a.swap(r, k);
        let (prow, pb) = a[r].clone();
        for (i, (row, b)) in a.iter_mut().enumerate() {
            if i != r && get(row, col) {
                xor_into(row, &prow);
                *b ^= pb;
            }
        }
        pivots.push(col);
        r += 1;
        if r == a.len() {
            break;
        }
    }
    if a[r..].iter().any(|(_, b)| *b) {
        return None;
    }
    let mut v = vec![0u64; words(nbits)];
    for (i, &col) in pivots.iter().enumerate() {
        set(&mut v, col, a[i].1);
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_reduces_to_canonical_coset_rep() {
        let mut b = Gf2Basis::new();
        assert!(b.insert(&[0b0110]));
        assert!(b.insert(&[0b0011]));
        assert!(!b.insert(&[0b0101]));
        assert_eq!(b.rank(), 2);
        assert_eq!(b.reduce(&[0b1000]), b.reduce(&[0b1110]));
        assert!(b.contains(&[0b0101]));
    }

    #[test]
    fn solve_finds_solution_and_detects_inconsistency() {
        let rows = vec![vec![0b011], vec![0b110]];
        let v = solve(&rows, &[true, false], 3).unwrap();
        assert!(dot(&rows[0], &v));
        assert!(!dot(&rows[1], &v));
        assert!(solve(&[vec![0b1], vec![0b1]], &[true, false], 1).is_none());
    }
}
