//! Allocation-free grouping of rows by a key: one hash table from key hash
//! to group, with hash collisions chained through the groups themselves.

use std::collections::HashMap;
use std::hash::{BuildHasher, BuildHasherDefault, DefaultHasher, Hash, Hasher};

const NONE: usize = usize::MAX;

/// Assigns dense group ids, in order of first appearance, to the items
/// `0..n` for which `include` holds (others get `usize::MAX`). Items `i`
/// and `j` share a group when `same(i, j)`; `hash` must agree with it.
pub(crate) fn dense_groups(
    n: usize,
    include: impl Fn(usize) -> bool,
    hash: impl Fn(usize, &mut DefaultHasher),
    same: impl Fn(usize, usize) -> bool,
) -> (Vec<usize>, usize) {
    let build = BuildHasherDefault::<DefaultHasher>::default();
    let mut heads: HashMap<u64, usize> = HashMap::with_capacity(n);
    // per group: first member and the next group with the same hash
    let mut first: Vec<usize> = Vec::new();
    let mut chain: Vec<usize> = Vec::new();
    let mut ids = vec![NONE; n];
    for (i, id) in ids.iter_mut().enumerate() {
        if !include(i) {
            continue;
        }
        let mut h = build.build_hasher();
        hash(i, &mut h);
        let h = h.finish();
        let head = heads.get(&h).copied().unwrap_or(NONE);
        let mut g = head;
        while g != NONE && !same(first[g], i) {
            g = chain[g];
        }
        if g == NONE {
            g = first.len();
            first.push(i);
            chain.push(head);
            heads.insert(h, g);
        }
        *id = g;
    }
    (ids, first.len())
}

/// Hashes the values of `row` at `positions`.
pub(crate) fn hash_at<T: Hash>(row: &[T], positions: &[usize], h: &mut DefaultHasher) {
    for &p in positions {
        row[p].hash(h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_in_first_appearance_order() {
        let xs = [3, 1, 3, 2, 1, 7];
        let (ids, n) = dense_groups(xs.len(), |_| true, |i, h| xs[i].hash(h), |i, j| xs[i] == xs[j]);
        assert_eq!(ids, vec![0, 1, 0, 2, 1, 3]);
        assert_eq!(n, 4);
    }

    #[test]
    fn collisions_are_separated() {
        let xs = [1, 2, 1, 3, 2];
        let (ids, n) = dense_groups(xs.len(), |i| xs[i] != 3, |_, h| 0u8.hash(h), |i, j| xs[i] == xs[j]);
        assert_eq!(ids, vec![0, 1, 0, NONE, 1]);
        assert_eq!(n, 2);
    }
}
