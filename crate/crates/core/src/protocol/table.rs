use std::collections::{HashMap, HashSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProtocolError;
use crate::waveform::MAX_PAYLOAD_BYTES;

/// How the node picks the key for its next emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeySelection {
    /// Both sides walk the shared table in order.
    #[default]
    Sequential,
    /// Uniform choice among unused entries.
    Random,
}

/// One-time PVK table provisioned identically on the node and the CN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PvkTable {
    entries: Vec<Vec<u8>>,
    used: Vec<bool>,
    cursor: usize,
    index: HashMap<Vec<u8>, usize>,
}

impl PvkTable {
    pub fn new(entries: Vec<Vec<u8>>) -> Result<Self, ProtocolError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.is_empty() || e.len() > MAX_PAYLOAD_BYTES {
                return Err(ProtocolError::InvalidKeyLength { len: e.len() });
            }
            if index.insert(e.clone(), i).is_some() {
                return Err(ProtocolError::DuplicateKey { index: i });
            }
        }
        let used = vec![false; entries.len()];
        Ok(Self { entries, used, cursor: 0, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> Option<&[u8]> {
        self.entries.get(index).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.iter().map(Vec::as_slice)
    }

    pub fn lookup(&self, code: &[u8]) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn is_used(&self, index: usize) -> bool {
        self.used.get(index).copied().unwrap_or(false)
    }

    /// First unused index, or `len()` when exhausted.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn unused_count(&self) -> usize {
        self.used.iter().filter(|&&u| !u).count()
    }

    pub fn mark_used(&mut self, index: usize) {
        if let Some(u) = self.used.get_mut(index) {
            *u = true;
        }
        while self.cursor < self.used.len() && self.used[self.cursor] {
            self.cursor += 1;
        }
    }

    /// Entry at the cursor. Does not mark it used.
    pub fn next_key(&self) -> Result<(usize, &[u8]), ProtocolError> {
        self.entry(self.cursor).map(|code| (self.cursor, code)).ok_or(ProtocolError::TableExhausted)
    }

    /// Uniformly chosen unused entry. Does not mark it used.
    pub fn random_unused<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, &[u8]), ProtocolError> {
        let unused = self.unused_count();
        if unused == 0 {
            return Err(ProtocolError::TableExhausted);
        }
        let pick = rng.random_range(0..unused);
        let index = (0..self.len()).filter(|&i| !self.used[i]).nth(pick).expect("pick < unused");
        Ok((index, &self.entries[index]))
    }

    pub fn select(&self, policy: KeySelection, rng: &mut impl Rng) -> Result<(usize, &[u8]), ProtocolError> {
        match policy {
            KeySelection::Sequential => self.next_key(),
            KeySelection::Random => self.random_unused(rng),
        }
    }
}

/// Free function form of [`PvkTable::next_key`] returning an owned code.
pub fn next_key(table: &PvkTable) -> Result<(usize, Vec<u8>), ProtocolError> {
    table.next_key().map(|(i, c)| (i, c.to_vec()))
}

/// `n_keys` distinct random codes, identical for identical seeds.
pub fn generate_table(n_keys: usize, key_len_bytes: usize, rng_seed: u64) -> Result<PvkTable, ProtocolError> {
    if n_keys == 0 {
        return Err(ProtocolError::InvalidParameter { field: "n_keys", reason: "must be >= 1".into() });
    }
    if key_len_bytes == 0 || key_len_bytes > MAX_PAYLOAD_BYTES {
        return Err(ProtocolError::InvalidKeyLength { len: key_len_bytes });
    }
    let capacity = 256u128.checked_pow(key_len_bytes as u32);
    if capacity.is_some_and(|c| (n_keys as u128) > c) {
        return Err(ProtocolError::Capacity { n_keys, key_len_bytes });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seen = HashSet::with_capacity(n_keys);
    let mut entries = Vec::with_capacity(n_keys);
    while entries.len() < n_keys {
        let mut key = vec![0u8; key_len_bytes];
        rng.fill_bytes(&mut key);
        if seen.insert(key.clone()) {
            entries.push(key);
        }
    }
    PvkTable::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_walk() {
        let mut t = PvkTable::new(vec![vec![1], vec![2], vec![3]]).unwrap();
        assert_eq!(next_key(&t).unwrap(), (0, vec![1]));
        t.mark_used(0);
        assert_eq!(next_key(&t).unwrap(), (1, vec![2]));
        t.mark_used(2);
        assert_eq!(t.cursor(), 1);
        t.mark_used(1);
        assert_eq!(t.cursor(), 3);
        assert!(matches!(next_key(&t), Err(ProtocolError::TableExhausted)));
    }

    #[test]
    fn rejects_duplicates_and_bad_lengths() {
        assert!(matches!(PvkTable::new(vec![vec![1], vec![1]]), Err(ProtocolError::DuplicateKey { index: 1 })));
        assert!(PvkTable::new(vec![vec![]]).is_err());
        assert!(PvkTable::new(vec![vec![0; 65]]).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_distinct() {
        let a = generate_table(1000, 2, 7).unwrap();
        let b = generate_table(1000, 2, 7).unwrap();
        assert_eq!(a, b);
        let distinct: HashSet<&[u8]> = a.entries().collect();
        assert_eq!(distinct.len(), 1000);
        assert!(a.entries().all(|e| e.len() == 2));
        assert_ne!(a, generate_table(1000, 2, 8).unwrap());
    }

    #[test]
    fn generation_capacity_errors() {
        assert!(matches!(
            generate_table(70_000, 2, 1),
            Err(ProtocolError::Capacity { n_keys: 70_000, key_len_bytes: 2 })
        ));
        assert!(generate_table(256, 1, 1).is_ok());
        assert!(generate_table(257, 1, 1).is_err());
        assert!(generate_table(0, 2, 1).is_err());
        assert!(generate_table(4, 65, 1).is_err());
        assert!(generate_table(4, 64, 1).is_ok());
    }

    #[test]
    fn random_selection_skips_used() {
        let mut t = generate_table(8, 2, 3).unwrap();
        for i in 0..7 {
            t.mark_used(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert_eq!(t.random_unused(&mut rng).unwrap().0, 7);
        }
        t.mark_used(7);
        assert!(matches!(t.random_unused(&mut rng), Err(ProtocolError::TableExhausted)));
    }
}
