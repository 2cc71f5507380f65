//! Enumeration of auxiliary density operator (ADO) indices.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Occupation vector n = (n_1, …, n_K) with level Σ n_k.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdoIndex {
    pub n: Vec<u16>,
    pub level: usize,
}

/// Link to a neighbouring ADO differing by one quantum in mode `mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub mode: usize,
    pub offset: usize,
}

/// Index skeleton of a hierarchy truncated at level L.
///
/// Indices are stored in graded lexicographic order: by level, and within a
/// level in descending lexicographic order of the occupation vector. Offset 0
/// is always the system density matrix. Links that would leave the
/// truncated set are simply absent; those ADOs are treated as zero.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    modes: usize,
    truncation: usize,
    indices: Vec<AdoIndex>,
    index_map: HashMap<Vec<u16>, usize>,
    plus: Vec<Vec<Link>>,
    minus: Vec<Vec<Link>>,
}

/// binomial(K + L, L), saturating at `u128::MAX`.
pub fn ado_count(modes: usize, truncation: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 1..=truncation as u128 {
        acc = match acc.checked_mul(modes as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

fn push_level(prefix: &mut Vec<u16>, remaining: usize, slots: usize, out: &mut Vec<Vec<u16>>) {
    if slots == 1 {
        prefix.push(remaining as u16);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=remaining).rev() {
        prefix.push(first as u16);
        push_level(prefix, remaining - first, slots - 1, out);
        prefix.pop();
    }
}

impl Hierarchy {
    pub fn build(modes: usize, truncation: usize, budget: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidInput("hierarchy needs at least one mode".into()));
        }
        if truncation > u16::MAX as usize {
            return Err(Error::InvalidInput(format!("truncation level {truncation} too large")));
        }
        let required = ado_count(modes, truncation);
        if required > budget as u128 {
            return Err(Error::CapacityExceeded { required, budget });
        }

        let mut vectors = Vec::with_capacity(required as usize);
        for level in 0..=truncation {
            push_level(&mut Vec::with_capacity(modes), level, modes, &mut vectors);
        }
        let index_map: HashMap<Vec<u16>, usize> =
            vectors.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();

        let mut plus = Vec::with_capacity(vectors.len());
        let mut minus = Vec::with_capacity(vectors.len());
        let mut probe = vec![0u16; modes];
        for v in &vectors {
            probe.copy_from_slice(v);
            let mut up = Vec::new();
            let mut down = Vec::new();
            for k in 0..modes {
                probe[k] += 1;
                if let Some(&offset) = index_map.get(&probe) {
                    up.push(Link { mode: k, offset });
                }
                probe[k] -= 1;
                if v[k] > 0 {
                    probe[k] -= 1;
                    down.push(Link { mode: k, offset: index_map[&probe] });
                    probe[k] += 1;
                }
            }
            plus.push(up);
            minus.push(down);
        }

        let indices = vectors
            .into_iter()
            .map(|n| {
                let level = n.iter().map(|&x| x as usize).sum();
                AdoIndex { n, level }
            })
            .collect();
        Ok(Self { modes, truncation, indices, index_map, plus, minus })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[AdoIndex] {
        &self.indices
    }

    pub fn offset_of(&self, n: &[u16]) -> Option<usize> {
        self.index_map.get(n).copied()
    }

    /// Links to n + e_k for every k with that ADO inside the truncation.
    pub fn plus_links(&self, offset: usize) -> &[Link] {
        &self.plus[offset]
    }

    /// Links to n − e_k for every k with n_k > 0.
    pub fn minus_links(&self, offset: usize) -> &[Link] {
        &self.minus[offset]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_mode_first_level() {
        let h = Hierarchy::build(1, 1, 100).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.indices()[0].n, vec![0]);
        assert_eq!(h.indices()[1].n, vec![1]);
        assert_eq!(h.plus_links(0), &[Link { mode: 0, offset: 1 }]);
        assert!(h.plus_links(1).is_empty());
    }

    #[test]
    fn seven_modes_five_levels() {
        assert_eq!(ado_count(7, 5), 792);
        assert_eq!(Hierarchy::build(7, 5, 10_000).unwrap().len(), 792);
    }

    #[test]
    fn level_zero_is_bare_system() {
        let h = Hierarchy::build(4, 0, 10).unwrap();
        assert_eq!(h.len(), 1);
        assert!(h.plus_links(0).is_empty() && h.minus_links(0).is_empty());
    }

    #[test]
    fn graded_lexicographic_order() {
        let h = Hierarchy::build(3, 2, 100).unwrap();
        let got: Vec<Vec<u16>> = h.indices().iter().map(|a| a.n.clone()).collect();
        let expected: Vec<Vec<u16>> = vec![
            vec![0, 0, 0],
            vec![1, 0, 0],
            vec![0, 1, 0],
            vec![0, 0, 1],
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 2, 0],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        assert_eq!(got, expected);
    }

    #[test]
    fn budget_is_enforced() {
        let err = Hierarchy::build(10, 5, 3000).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { required: 3003, budget: 3000 }));
        assert!(Hierarchy::build(0, 2, 10).is_err());
    }

    proptest! {
        #[test]
        fn structure_invariants(k in 1usize..6, l in 0usize..5) {
            let h = Hierarchy::build(k, l, 1_000_000).unwrap();
            prop_assert_eq!(h.len() as u128, ado_count(k, l));
            let mut seen = std::collections::HashSet::new();
            for (i, idx) in h.indices().iter().enumerate() {
                prop_assert!(idx.level <= l);
                prop_assert!(seen.insert(idx.n.clone()));
                prop_assert_eq!(h.offset_of(&idx.n), Some(i));
                for link in h.plus_links(i) {
                    prop_assert_eq!(h.indices()[link.offset].level, idx.level + 1);
                    prop_assert_eq!(h.indices()[link.offset].n[link.mode], idx.n[link.mode] + 1);
                }
                for link in h.minus_links(i) {
                    prop_assert_eq!(h.indices()[link.offset].level + 1, idx.level);
                }
                let expected_plus = if idx.level < l { k } else { 0 };
                prop_assert_eq!(h.plus_links(i).len(), expected_plus);
                let occupied = idx.n.iter().filter(|&&x| x > 0).count();
                prop_assert_eq!(h.minus_links(i).len(), occupied);
            }
        }
    }
}
