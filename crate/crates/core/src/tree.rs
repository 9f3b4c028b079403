//! Truncated regular rooted k-ary trees in breadth-first layout.
//!
//! Vertex 0 is the root; the children of `v` are `k·v + 1 ..= k·v + k`, so
//! every sphere `S_r` occupies a contiguous index range and navigation needs
//! no adjacency storage.

use std::ops::Range;

use crate::error::{Error, Result};

/// Default cap on the number of vertices of a truncated tree.
pub const DEFAULT_VERTEX_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeGraph {
    k: usize,
    depth: usize,
    vertex_count: usize,
    /// `sphere_offsets[r]` is the first index of `S_r`; the last entry is
    /// `vertex_count`.
    sphere_offsets: Vec<usize>,
}

impl TreeGraph {
    pub fn new(k: usize, depth: usize) -> Result<Self> {
        Self::with_cap(k, depth, DEFAULT_VERTEX_CAP)
    }

    pub fn with_cap(k: usize, depth: usize, cap: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter(format!(
                "branching factor must be >= 1, got {k}"
            )));
        }
        let mut offsets = Vec::with_capacity(depth + 2);
        let mut total: u128 = 0;
        let mut sphere: u128 = 1;
        for _ in 0..=depth {
            offsets.push(total);
            total += sphere;
            if total > cap as u128 {
                return Err(Error::CapacityExceeded {
                    requested: total,
                    cap,
                });
            }
            sphere = sphere.saturating_mul(k as u128);
        }
        offsets.push(total);
        Ok(Self {
            k,
            depth,
            vertex_count: total as usize,
            sphere_offsets: offsets.into_iter().map(|o| o as usize).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Truncation radius `R`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.vertex_count - 1
    }

    pub fn sphere_offsets(&self) -> &[usize] {
        &self.sphere_offsets[..=self.depth]
    }

    /// Index range of the sphere `S_r`.
    pub fn sphere(&self, r: usize) -> Range<usize> {
        assert!(r <= self.depth, "sphere {r} beyond depth {}", self.depth);
        self.sphere_offsets[r]..self.sphere_offsets[r + 1]
    }

    pub fn sphere_size(&self, r: usize) -> usize {
        self.sphere(r).len()
    }

    /// Vertices of the ball `|v| <= r`.
    pub fn ball(&self, r: usize) -> Range<usize> {
        0..self.sphere_offsets[r.min(self.depth) + 1]
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.vertex_count {
            Err(Error::IndexOutOfRange {
                vertex: v,
                vertex_count: self.vertex_count,
            })
        } else {
            Ok(())
        }
    }

    /// Distance `|v|` from the root.
    pub fn vertex_depth(&self, v: usize) -> Result<usize> {
        self.check(v)?;
        Ok(self.depth_unchecked(v))
    }

    pub(crate) fn depth_unchecked(&self, v: usize) -> usize {
        self.sphere_offsets.partition_point(|&o| o <= v) - 1
    }

    /// Depth of every vertex, in index order.
    pub fn depths(&self) -> Vec<usize> {
        (0..=self.depth)
            .flat_map(|r| std::iter::repeat_n(r, self.sphere_size(r)))
            .collect()
    }

    pub fn parent(&self, v: usize) -> Result<usize> {
        self.check(v)?;
        if v == 0 {
            return Err(Error::RootHasNoParent);
        }
        Ok((v - 1) / self.k)
    }

    /// Children of `v`; empty on the boundary sphere `S_R`.
    pub fn children(&self, v: usize) -> Result<Range<usize>> {
        self.check(v)?;
        if self.depth_unchecked(v) == self.depth {
            return Ok(0..0);
        }
        let first = self.k * v + 1;
        Ok(first..first + self.k)
    }

    /// All edges `(parent, child)` in child index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.vertex_count).map(move |c| ((c - 1) / self.k, c))
    }
}
