//! Block-structured state spaces and graph-distance neighborhoods.
//!
//! Nodes and blocks are 0-based throughout the API. File formats (edge
//! lists, CSV indices) are 1-based and converted at the boundary.
//!
//! The selection `x ↦ x_B` onto a neighborhood, its adjoint embedding, and
//! the tail projector that zeroes the leading blocks are index operations
//! here; [`dense`] materializes them as matrices for cross-checking.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Range;

use crate::error::{Error, Result};

/// Partition of `ℝⁿ` into `s` consecutive blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    n: usize,
}

impl BlockStructure {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter(
                "block structure needs at least one block".into(),
            ));
        }
        if let Some(j) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!("block {} has zero dimension", j + 1)));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for &d in &dims {
            offsets.push(acc);
            acc += d;
        }
        Ok(Self { dims, offsets, n: acc })
    }

    /// `s` blocks of size one.
    pub fn scalar(s: usize) -> Result<Self> {
        Self::new(vec![1; s])
    }

    pub fn uniform(s: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; s])
    }

    pub fn block_count(&self) -> usize {
        self.dims.len()
    }

    /// Total dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn block_dim(&self, j: usize) -> usize {
        self.dims[j]
    }

    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j] + self.dims[j]
    }

    /// Block containing coordinate `k`.
    pub fn block_of(&self, k: usize) -> usize {
        match self.offsets.binary_search(&k) {
            Ok(j) => j,
            Err(j) => j - 1,
        }
    }

    fn check_len(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.n,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Marker for "no directed path" in the distance table.
pub const UNREACHABLE: usize = usize::MAX;

/// Directed graph on `s` nodes with all-pairs shortest-path lengths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterconnectionGraph {
    s: usize,
    edges: BTreeSet<(usize, usize)>,
    dist: Vec<usize>,
    diameter: usize,
}

impl InterconnectionGraph {
    /// Builds the graph and its distance table (one BFS per source).
    /// `(i, j)` means node `i` influences node `j`. Self-loops are ignored.
    pub fn new(s: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= s || j >= s {
                return Err(Error::EdgeOutOfRange {
                    from: i + 1,
                    to: j + 1,
                    nodes: s,
                });
            }
            if i != j {
                set.insert((i, j));
            }
        }
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); s];
        for &(i, j) in &set {
            out[i].push(j);
        }
        let mut dist = vec![UNREACHABLE; s * s];
        let mut queue = VecDeque::new();
        for src in 0..s {
            let row = &mut dist[src * s..(src + 1) * s];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                let du = row[u];
                for &v in &out[u] {
                    if row[v] == UNREACHABLE {
                        row[v] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        let diameter = dist.iter().copied().filter(|&d| d != UNREACHABLE).max().unwrap_or(0);
        Ok(Self {
            s,
            edges: set,
            dist,
            diameter,
        })
    }

    /// Undirected graph: each pair is inserted in both directions.
    pub fn undirected(s: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let both: Vec<_> = pairs.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
        Self::new(s, &both)
    }

    /// Path `0 — 1 — … — s−1`.
    pub fn path(s: usize) -> Result<Self> {
        let pairs: Vec<_> = (1..s).map(|i| (i - 1, i)).collect();
        Self::undirected(s, &pairs)
    }

    pub fn cycle(s: usize) -> Result<Self> {
        let mut pairs: Vec<_> = (1..s).map(|i| (i - 1, i)).collect();
        if s > 2 {
            pairs.push((s - 1, 0));
        }
        Self::undirected(s, &pairs)
    }

    /// `rows x cols` four-neighbor grid, nodes numbered row-major.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let k = r * cols + c;
                if c + 1 < cols {
                    pairs.push((k, k + 1));
                }
                if r + 1 < rows {
                    pairs.push((k, k + cols));
                }
            }
        }
        Self::undirected(rows * cols, &pairs)
    }

    /// Star with node 0 at the center.
    pub fn star(s: usize) -> Result<Self> {
        let pairs: Vec<_> = (1..s).map(|i| (0, i)).collect();
        Self::undirected(s, &pairs)
    }

    /// Graph with every edge reversed (distances transposed).
    pub fn transposed(&self) -> Self {
        let rev: Vec<_> = self.edges.iter().map(|&(i, j)| (j, i)).collect();
        Self::new(self.s, &rev).expect("same node set")
    }

    /// Parses an edge list: one `i j` pair per line, 1-based. Blank lines and
    /// `#` comments are skipped.
    pub fn parse_edge_list(s: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            if parts.len() != 2 {
                return Err(bad(format!("expected `i j`, found {line:?}")));
            }
            let parse = |t: &str| t.parse::<usize>().map_err(|e| bad(format!("{t:?}: {e}")));
            let (i, j) = (parse(parts[0])?, parse(parts[1])?);
            if i == 0 || j == 0 || i > s || j > s {
                return Err(Error::EdgeOutOfRange {
                    from: i,
                    to: j,
                    nodes: s,
                });
            }
            edges.push((i - 1, j - 1));
        }
        Self::new(s, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges
            .iter()
            .map(|&(i, j)| format!("{} {}\n", i + 1, j + 1))
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.s
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    /// Length of the shortest directed path from `i` to `j`, or `None`.
    pub fn dist(&self, i: usize, j: usize) -> Option<usize> {
        match self.dist[i * self.s + j] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    /// Raw table entry, [`UNREACHABLE`] for no path.
    pub fn dist_raw(&self, i: usize, j: usize) -> usize {
        self.dist[i * self.s + j]
    }

    /// Largest finite distance.
    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn is_strongly_connected(&self) -> bool {
        !self.dist.contains(&UNREACHABLE)
    }

    /// `B_l(j) = { i : dist(i, j) ≤ l }` with its subspace dimension.
    pub fn neighborhood(&self, blocks: &BlockStructure, center: usize, radius: usize) -> Result<Neighborhood> {
        if center >= self.s {
            return Err(Error::IndexOutOfRange {
                context: "neighborhood center",
                index: center,
                bound: self.s,
            });
        }
        if blocks.block_count() != self.s {
            return Err(Error::DimensionMismatch {
                context: "graph nodes vs blocks",
                expected: self.s,
                actual: blocks.block_count(),
            });
        }
        let members: Vec<usize> = (0..self.s).filter(|&i| self.dist_raw(i, center) <= radius).collect();
        let sub_dim = members.iter().map(|&i| blocks.block_dim(i)).sum();
        Ok(Neighborhood {
            center,
            radius,
            members,
            sub_dim,
        })
    }
}

/// The index set `B_l(j)` in ascending order, and `b_l^j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: usize,
    pub radius: usize,
    pub members: Vec<usize>,
    pub sub_dim: usize,
}

impl Neighborhood {
    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }
}

/// `H x`: concatenation of the member blocks of `x`.
pub fn restrict(blocks: &BlockStructure, nb: &Neighborhood, x: &[f64]) -> Result<Vec<f64>> {
    blocks.check_len(x, "restrict")?;
    let mut out = Vec::with_capacity(nb.sub_dim);
    for &i in &nb.members {
        out.extend_from_slice(&x[blocks.range(i)]);
    }
    Ok(out)
}

/// `Hᵀ x_B`: member blocks filled from `x_B`, all others zero.
pub fn embed(blocks: &BlockStructure, nb: &Neighborhood, x_b: &[f64]) -> Result<Vec<f64>> {
    if x_b.len() != nb.sub_dim {
        return Err(Error::DimensionMismatch {
            context: "embed",
            expected: nb.sub_dim,
            actual: x_b.len(),
        });
    }
    let mut out = vec![0.0; blocks.dim()];
    let mut k = 0;
    for &i in &nb.members {
        let r = blocks.range(i);
        let len = r.len();
        out[r].copy_from_slice(&x_b[k..k + len]);
        k += len;
    }
    Ok(out)
}

/// Zeroes the first `cutoff` blocks in place (`0 ≤ cutoff ≤ s`).
pub fn project_tail_in_place(blocks: &BlockStructure, cutoff: usize, x: &mut [f64]) -> Result<()> {
    blocks.check_len(x, "project_tail")?;
    if cutoff > blocks.block_count() {
        return Err(Error::IndexOutOfRange {
            context: "project_tail cutoff",
            index: cutoff,
            bound: blocks.block_count() + 1,
        });
    }
    let end = if cutoff == blocks.block_count() {
        blocks.dim()
    } else {
        blocks.offset(cutoff)
    };
    x[..end].iter_mut().for_each(|v| *v = 0.0);
    Ok(())
}

/// Copy of `x` with the first `cutoff` blocks zeroed.
pub fn project_tail(blocks: &BlockStructure, cutoff: usize, x: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    project_tail_in_place(blocks, cutoff, &mut y)?;
    Ok(y)
}

/// Dense materializations of the index operators, for oracle tests only.
pub mod dense {
    use super::{BlockStructure, Neighborhood};
    use crate::linalg::Matrix;

    /// The `b_l^j x n` selection matrix `H`.
    pub fn selection_matrix(blocks: &BlockStructure, nb: &Neighborhood) -> Matrix {
        let mut h = Matrix::zeros(nb.sub_dim, blocks.dim());
        let mut row = 0;
        for &i in &nb.members {
            for col in blocks.range(i) {
                h[(row, col)] = 1.0;
                row += 1;
            }
        }
        h
    }

    /// `diag(0, …, 0, I, …, I)` with the first `cutoff` blocks zero.
    pub fn tail_projector(blocks: &BlockStructure, cutoff: usize) -> Matrix {
        let n = blocks.dim();
        let start = if cutoff >= blocks.block_count() {
            n
        } else {
            blocks.offset(cutoff)
        };
        Matrix::from_fn(n, n, |i, j| if i == j && i >= start { 1.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_offsets() {
        let b = BlockStructure::new(vec![2, 1, 2]).unwrap();
        assert_eq!(b.dim(), 5);
        assert_eq!(b.offset(0), 0);
        assert_eq!(b.offset(2), 3);
        assert_eq!(b.range(1), 2..3);
        assert_eq!(b.block_of(4), 2);
        assert_eq!(b.block_of(2), 1);
        assert!(BlockStructure::new(vec![]).is_err());
        assert!(BlockStructure::new(vec![1, 0]).is_err());
    }

    #[test]
    fn path_distances() {
        let g = InterconnectionGraph::path(5).unwrap();
        assert_eq!(g.dist(0, 4), Some(4));
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(g.dist(i, j), Some(i.abs_diff(j)));
            }
        }
        assert_eq!(g.diameter(), 4);
    }

    #[test]
    fn disconnected_nodes_are_unreachable() {
        let g = InterconnectionGraph::new(3, &[]).unwrap();
        assert_eq!(g.dist(0, 1), None);
        assert_eq!(g.dist(1, 1), Some(0));
        let b = BlockStructure::scalar(3).unwrap();
        assert_eq!(g.neighborhood(&b, 1, 10).unwrap().members, vec![1]);
    }

    #[test]
    fn rejects_bad_edges() {
        let err = InterconnectionGraph::new(3, &[(0, 3)]).unwrap_err();
        assert!(matches!(
            err,
            Error::EdgeOutOfRange {
                from: 1,
                to: 4,
                nodes: 3
            }
        ));
        assert!(InterconnectionGraph::parse_edge_list(3, "1 2\n0 1\n").is_err());
        assert!(matches!(
            InterconnectionGraph::parse_edge_list(3, "1 2\n1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = InterconnectionGraph::cycle(4).unwrap();
        let back = InterconnectionGraph::parse_edge_list(4, &g.to_edge_list()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn heat_neighborhoods() {
        let g = InterconnectionGraph::path(5).unwrap();
        let b = BlockStructure::scalar(5).unwrap();
        assert_eq!(g.neighborhood(&b, 0, 1).unwrap().members, vec![0, 1]);
        assert_eq!(g.neighborhood(&b, 1, 1).unwrap().members, vec![0, 1, 2]);
        assert_eq!(g.neighborhood(&b, 0, 2).unwrap().members, vec![0, 1, 2]);
        assert_eq!(g.neighborhood(&b, 3, 0).unwrap().members, vec![3]);
        assert!(g.neighborhood(&b, 5, 1).is_err());
    }

    #[test]
    fn directed_neighborhood_uses_paths_into_center() {
        // 0 -> 1 -> 2: node 0 reaches 2, not the reverse.
        let g = InterconnectionGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let b = BlockStructure::scalar(3).unwrap();
        assert_eq!(g.neighborhood(&b, 2, 2).unwrap().members, vec![0, 1, 2]);
        assert_eq!(g.neighborhood(&b, 0, 2).unwrap().members, vec![0]);
        let t = g.transposed();
        assert_eq!(t.neighborhood(&b, 0, 2).unwrap().members, vec![0, 1, 2]);
    }

    #[test]
    fn restrict_and_embed_blocks() {
        let b = BlockStructure::new(vec![2, 1, 2]).unwrap();
        let g = InterconnectionGraph::new(3, &[]).unwrap();
        let mut nb = g.neighborhood(&b, 0, 0).unwrap();
        nb.members = vec![0, 2];
        nb.sub_dim = 4;
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(restrict(&b, &nb, &x).unwrap(), vec![1.0, 2.0, 4.0, 5.0]);
        assert_eq!(
            embed(&b, &nb, &[1.0, 2.0, 4.0, 5.0]).unwrap(),
            vec![1.0, 2.0, 0.0, 4.0, 5.0]
        );
        assert!(restrict(&b, &nb, &x[..4]).is_err());
        assert!(embed(&b, &nb, &x).is_err());
    }

    #[test]
    fn tail_projection() {
        let b = BlockStructure::scalar(3).unwrap();
        let x = [7.0, 8.0, 9.0];
        assert_eq!(project_tail(&b, 0, &x).unwrap(), x.to_vec());
        assert_eq!(project_tail(&b, 1, &x).unwrap(), vec![0.0, 8.0, 9.0]);
        assert_eq!(project_tail(&b, 3, &x).unwrap(), vec![0.0; 3]);
        assert!(project_tail(&b, 4, &x).is_err());
    }
}
