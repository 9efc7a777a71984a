//! Synthetic trees stored as CSR adjacency in global memory.

use crate::runtime::GlobalMemory;

/// Complete `branch`-ary tree of depth `depth`, in heap order: node `i` has
/// children `branch*i + 1 ..= branch*i + branch`.
///
/// Memory layout, one word per entry:
/// `[offsets: nodes + 1][adjacency: nodes - 1][visited: nodes]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeGenConfig {
    pub branch: u64,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeLayout {
    pub nodes: u64,
    pub offsets_base: u64,
    pub adjacency_base: u64,
    pub visited_base: u64,
    pub words: u64,
}

impl TreeLayout {
    /// Arguments for `visit(offsets, adj, visited, root)`.
    pub fn visit_args(&self) -> Vec<i64> {
        vec![self.offsets_base as i64, self.adjacency_base as i64, self.visited_base as i64, 0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("branch factor and depth must both be at least 1")]
    Degenerate,
    #[error("tree with branch factor {branch} and depth {depth} does not fit in memory")]
    TooLarge { branch: u64, depth: u32 },
    #[error("tree needs {needed} words but memory is limited to {limit}")]
    MemoryTooSmall { needed: u64, limit: u64 },
}

impl TreeGenConfig {
    /// `(B^D - 1) / (B - 1)`, or `D` when `B = 1`.
    pub fn node_count(&self) -> Result<u64, GraphError> {
        if self.branch == 0 || self.depth == 0 {
            return Err(GraphError::Degenerate);
        }
        let too_large = || GraphError::TooLarge { branch: self.branch, depth: self.depth };
        let mut total: u64 = 0;
        let mut level: u64 = 1;
        for d in 0..self.depth {
            total = total.checked_add(level).ok_or_else(too_large)?;
            if d + 1 < self.depth {
                level = level.checked_mul(self.branch).ok_or_else(too_large)?;
            }
        }
        Ok(total)
    }

    pub fn layout(&self) -> Result<TreeLayout, GraphError> {
        let nodes = self.node_count()?;
        let words = nodes.checked_mul(3).ok_or(GraphError::TooLarge { branch: self.branch, depth: self.depth })?;
        Ok(TreeLayout {
            nodes,
            offsets_base: 0,
            adjacency_base: nodes + 1,
            visited_base: 2 * nodes,
            words,
        })
    }

    /// Builds the tree image. `limit` caps the memory size in words.
    pub fn generate(&self, limit: Option<u64>) -> Result<(TreeLayout, GlobalMemory), GraphError> {
        let layout = self.layout()?;
        if let Some(limit) = limit {
            if layout.words > limit {
                return Err(GraphError::MemoryTooSmall { needed: layout.words, limit });
            }
        }
        let n = layout.nodes;
        let mut words = vec![0i64; layout.words as usize];
        let mut edge = 0u64;
        for i in 0..n {
            words[(layout.offsets_base + i) as usize] = edge as i64;
            let first = self.branch.saturating_mul(i).saturating_add(1);
            for child in first..first.saturating_add(self.branch).min(n) {
                words[(layout.adjacency_base + edge) as usize] = child as i64;
                edge += 1;
            }
        }
        words[(layout.offsets_base + n) as usize] = edge as i64;
        debug_assert_eq!(edge, n - 1);
        Ok((layout, GlobalMemory::from_words(&words)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        let count = |b, d| TreeGenConfig { branch: b, depth: d }.node_count().unwrap();
        assert_eq!(count(4, 7), 5461);
        assert_eq!(count(4, 9), 87381);
        assert_eq!(count(1, 1), 1);
        assert_eq!(count(1, 5), 5);
        assert_eq!(count(2, 3), 7);
        assert!(TreeGenConfig { branch: 0, depth: 3 }.node_count().is_err());
        assert!(TreeGenConfig { branch: 1 << 40, depth: 3 }.node_count().is_err());
    }

    #[test]
    fn csr_is_well_formed() {
        for (b, d) in [(1, 1), (1, 4), (2, 4), (3, 3), (4, 4)] {
            let (layout, mem) = TreeGenConfig { branch: b, depth: d }.generate(None).unwrap();
            let w = mem.to_vec();
            let n = layout.nodes as usize;
            let offsets = &w[..=n];
            assert!(offsets.windows(2).all(|p| p[0] <= p[1]));
            assert_eq!(offsets[n] as usize, n - 1);
            let adj = &w[n + 1..2 * n];
            assert!(adj.iter().all(|&c| c > 0 && (c as usize) < n));
            // Every non-root node has exactly one parent.
            let mut seen = vec![0; n];
            for &c in adj {
                seen[c as usize] += 1;
            }
            assert!(seen[1..].iter().all(|&k| k == 1));
            assert!(w[2 * n..].iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn memory_limit_is_checked() {
        let cfg = TreeGenConfig { branch: 4, depth: 7 };
        assert!(matches!(cfg.generate(Some(100)), Err(GraphError::MemoryTooSmall { .. })));
    }
}
