use std::collections::BTreeMap;

/// Set of disjoint half-open `u64` intervals, merged on insert.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RangeSet {
    // start -> end (exclusive)
    map: BTreeMap<u64, u64>,
}

impl RangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// Inserts `[start, end)`. Returns the number of values that were not yet present.
    pub fn insert(&mut self, start: u64, end: u64) -> u64 {
        if end <= start {
            return 0;
        }
        let mut new_start = start;
        let mut new_end = end;
        let mut covered = 0;
        // a range starting before `start` may overlap or touch
        if let Some((&s, &e)) = self.map.range(..=start).next_back() {
            if e >= start {
                if e >= end {
                    return 0;
                }
                new_start = s;
                covered += e - start;
                self.map.remove(&s);
            }
        }
        let following: Vec<(u64, u64)> =
            self.map.range(start..=end).map(|(s, e)| (*s, *e)).collect();
        for (s, e) in following {
            self.map.remove(&s);
            covered += e.min(end) - s;
            new_end = new_end.max(e);
        }
        self.map.insert(new_start, new_end);
        (end - start) - covered
    }

    pub fn contains(&self, v: u64) -> bool {
        self.map
            .range(..=v)
            .next_back()
            .is_some_and(|(_, e)| v < *e)
    }

    /// `true` if all of `[start, end)` is present.
    pub fn contains_range(&self, start: u64, end: u64) -> bool {
        if end <= start {
            return true;
        }
        self.map
            .range(..=start)
            .next_back()
            .is_some_and(|(_, e)| end <= *e)
    }

    /// Length of the prefix `[0, n)` that is fully present.
    pub fn contiguous_from_zero(&self) -> u64 {
        match self.map.first_key_value() {
            Some((0, e)) => *e,
            _ => 0,
        }
    }

    pub fn max(&self) -> Option<u64> {
        self.map.last_key_value().map(|(_, e)| e - 1)
    }

    /// Ranges from highest to lowest, as inclusive `(lo, hi)` pairs.
    pub fn iter_desc(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.map.iter().rev().map(|(s, e)| (*s, e - 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.map.iter().map(|(s, e)| (*s, *e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn merges_adjacent_and_overlapping() {
        let mut r = RangeSet::new();
        assert_eq!(r.insert(0, 10), 10);
        assert_eq!(r.insert(20, 30), 10);
        assert_eq!(r.insert(10, 20), 10);
        assert_eq!(r.len(), 1);
        assert_eq!(r.contiguous_from_zero(), 30);
        assert_eq!(r.insert(5, 25), 0);
        assert_eq!(r.insert(25, 40), 10);
        assert_eq!(r.max(), Some(39));
    }

    proptest! {
        #[test]
        fn matches_naive_set(ops in proptest::collection::vec((0u64..200, 1u64..20), 1..60)) {
            let mut r = RangeSet::new();
            let mut naive = BTreeSet::new();
            for (s, len) in ops {
                let fresh = (s..s + len).filter(|v| naive.insert(*v)).count() as u64;
                prop_assert_eq!(r.insert(s, s + len), fresh);
            }
            for v in 0..230 {
                prop_assert_eq!(r.contains(v), naive.contains(&v));
            }
            let prefix = (0..).take_while(|v| naive.contains(v)).count() as u64;
            prop_assert_eq!(r.contiguous_from_zero(), prefix);
            let ranges: Vec<_> = r.iter().collect();
            for w in ranges.windows(2) {
                prop_assert!(w[0].1 < w[1].0);
            }
        }
    }
}
