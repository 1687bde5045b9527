//! Singlet-crossing counts for a ladder of contiguous blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdrg::DecimationEvent;

/// Block lengths measured from one or more equally spaced anchors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLadder {
    sizes: Vec<usize>,
    anchors: Vec<usize>,
    n_sites: usize,
}

impl BlockLadder {
    pub fn new(sizes: Vec<usize>, anchor: usize, n_sites: usize) -> Result<Self> {
        Self::with_anchors(sizes, vec![anchor], n_sites)
    }

    pub fn with_anchors(sizes: Vec<usize>, anchors: Vec<usize>, n_sites: usize) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidParameter("block ladder is empty".into()));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "block sizes must be strictly increasing: {sizes:?}"
            )));
        }
        if sizes[0] < 1 || *sizes.last().unwrap() >= n_sites {
            return Err(Error::InvalidParameter(format!(
                "block sizes must lie in [1, {n_sites}): {sizes:?}"
            )));
        }
        if anchors.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one anchor required".into(),
            ));
        }
        if let Some(&a) = anchors.iter().find(|&&a| a >= n_sites) {
            return Err(Error::PositionOutOfRange { pos: a, n_sites });
        }
        Ok(Self {
            sizes,
            anchors,
            n_sites,
        })
    }

    /// Powers of two from 8 up to `N / 8`.
    pub fn geometric(n_sites: usize) -> Result<Self> {
        let sizes: Vec<usize> = std::iter::successors(Some(8usize), |l| Some(l * 2))
            .take_while(|&l| l <= n_sites / 8)
            .collect();
        if sizes.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "chain of {n_sites} sites too short for the automatic ladder"
            )));
        }
        Self::new(sizes, 0, n_sites)
    }

    /// `count` anchors spaced `N / count` apart, starting at 0.
    pub fn with_equally_spaced_anchors(self, count: usize) -> Result<Self> {
        if count == 0 || count > self.n_sites {
            return Err(Error::InvalidParameter(format!(
                "anchor count must lie in [1, {}], got {count}",
                self.n_sites
            )));
        }
        let anchors = (0..count).map(|k| k * self.n_sites / count).collect();
        Self::with_anchors(self.sizes, anchors, self.n_sites)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
}

/// Crossing counts of one configuration: `counts[anchor][size]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingTable {
    pub sizes: Vec<usize>,
    pub counts: Vec<Vec<u32>>,
}

impl CrossingTable {
    /// Counts for the first anchor.
    pub fn first(&self) -> &[u32] {
        &self.counts[0]
    }
}

/// Counts the singlets with exactly one endpoint in `[anchor, anchor + L)`
/// (mod N) for every `L` of the ladder. Trio merges never contribute.
pub fn count_crossings(events: &[DecimationEvent], ladder: &BlockLadder) -> Result<CrossingTable> {
    let n = ladder.n_sites;
    let sizes = &ladder.sizes;
    let mut counts = vec![vec![0u32; sizes.len()]; ladder.anchors.len()];
    for e in events {
        let DecimationEvent::Singlet { a, b } = *e else {
            continue;
        };
        let (a, b) = (a as usize, b as usize);
        for pos in [a, b] {
            if pos >= n {
                return Err(Error::PositionOutOfRange { pos, n_sites: n });
            }
        }
        for (row, &anchor) in counts.iter_mut().zip(&ladder.anchors) {
            let da = (a + n - anchor) % n;
            let db = (b + n - anchor) % n;
            let (lo, hi) = if da < db { (da, db) } else { (db, da) };
            // Crosses the window of length L iff lo < L <= hi.
            let start = sizes.partition_point(|&l| l <= lo);
            let end = sizes.partition_point(|&l| l <= hi);
            for c in &mut row[start..end] {
                *c += 1;
            }
        }
    }
    Ok(CrossingTable {
        sizes: sizes.clone(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: u32, b: u32) -> DecimationEvent {
        DecimationEvent::Singlet { a, b }
    }

    #[test]
    fn small_examples() {
        let ladder = BlockLadder::new(vec![2], 0, 4).unwrap();
        let t = count_crossings(&[s(0, 1), s(2, 3)], &ladder).unwrap();
        assert_eq!(t.first(), &[0]);
        let t = count_crossings(&[s(1, 2)], &ladder).unwrap();
        assert_eq!(t.first(), &[1]);
    }

    #[test]
    fn window_wraps_around() {
        let ladder = BlockLadder::new(vec![1, 2, 3], 3, 4).unwrap();
        // window L=2 at anchor 3 is {3, 0}
        let t = count_crossings(&[s(3, 0), s(1, 2)], &ladder).unwrap();
        assert_eq!(t.first(), &[1, 0, 1]);
    }

    #[test]
    fn trios_are_ignored() {
        let ladder = BlockLadder::new(vec![2], 0, 6).unwrap();
        let events = [
            DecimationEvent::TrioMerge {
                left: 1,
                mid: 2,
                right: 3,
                surviving: 2,
            },
            s(0, 5),
        ];
        assert_eq!(count_crossings(&events, &ladder).unwrap().first(), &[1]);
    }

    #[test]
    fn rejects_out_of_range_positions() {
        let ladder = BlockLadder::new(vec![2], 0, 4).unwrap();
        assert!(matches!(
            count_crossings(&[s(1, 4)], &ladder),
            Err(Error::PositionOutOfRange { pos: 4, .. })
        ));
    }

    #[test]
    fn ladder_validation() {
        assert!(BlockLadder::new(vec![], 0, 10).is_err());
        assert!(BlockLadder::new(vec![4, 2], 0, 10).is_err());
        assert!(BlockLadder::new(vec![0, 2], 0, 10).is_err());
        assert!(BlockLadder::new(vec![2, 10], 0, 10).is_err());
        assert!(BlockLadder::new(vec![2], 10, 10).is_err());
        assert_eq!(
            BlockLadder::geometric(1024).unwrap().sizes(),
            &[8, 16, 32, 64, 128]
        );
        assert!(BlockLadder::geometric(32).is_err());
        let l = BlockLadder::geometric(1024)
            .unwrap()
            .with_equally_spaced_anchors(4)
            .unwrap();
        assert_eq!(l.anchors(), &[0, 256, 512, 768]);
    }
}
