use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One undirected edge `{i, j}` with exchange rate `p(i, j)`, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Symmetric, irreducible exchange kernel `p(i, j)` on `0..num_vertices`.
///
/// Each unordered pair fires one exchange at rate `p(i, j)`. Rows may be
/// substochastic; only connectivity is enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeKernel {
    num_vertices: usize,
    edges: Vec<Edge>,
}

const ROW_SUM_SLACK: f64 = 1e-12;

impl ExchangeKernel {
    /// Builds a kernel from `(i, j, weight)` triples.
    ///
    /// Pairs may be given in either orientation. A pair listed twice must carry
    /// the same weight both times; zero-weight pairs are dropped.
    pub fn new(num_vertices: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::InvalidKernel("kernel needs at least one vertex".into()));
        }
        let mut edges: Vec<Edge> = Vec::with_capacity(triples.len());
        for &(a, b, w) in triples {
            if a >= num_vertices || b >= num_vertices {
                return Err(Error::InvalidKernel(format!(
                    "edge ({a}, {b}) out of range for {num_vertices} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidKernel(format!("self-loop at vertex {a}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidKernel(format!(
                    "edge ({a}, {b}) has invalid weight {w}"
                )));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            match edges.iter().find(|e| e.i == i && e.j == j) {
                Some(e) if e.weight != w => {
                    return Err(Error::InvalidKernel(format!(
                        "pair ({i}, {j}) listed with conflicting weights {} and {w}",
                        e.weight
                    )));
                }
                Some(_) => {}
                None => edges.push(Edge { i, j, weight: w }),
            }
        }
        edges.retain(|e| e.weight > 0.0);
        edges.sort_by_key(|e| (e.i, e.j));

        let kernel = Self {
            num_vertices,
            edges,
        };
        for (v, sum) in kernel.row_sums().iter().enumerate() {
            if *sum > 1.0 + ROW_SUM_SLACK {
                return Err(Error::InvalidKernel(format!(
                    "row {v} sums to {sum} > 1"
                )));
            }
        }
        if !kernel.is_connected() {
            return Err(Error::InvalidKernel("kernel is not irreducible (graph disconnected)".into()));
        }
        Ok(kernel)
    }

    /// Two agents exchanging at rate 1.
    pub fn two() -> Self {
        Self::new(2, &[(0, 1, 1.0)]).expect("valid builtin")
    }

    /// Path `0 - 1 - ... - (k-1)` with `p = 1/2` on every edge.
    pub fn path(k: usize) -> Result<Self> {
        let triples: Vec<_> = (1..k).map(|v| (v - 1, v, 0.5)).collect();
        Self::new(k, &triples)
    }

    /// Cycle of `k >= 3` vertices with `p = 1/2` on every edge.
    pub fn cycle(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidKernel(format!("cycle needs k >= 3, got {k}")));
        }
        let triples: Vec<_> = (0..k).map(|v| (v, (v + 1) % k, 0.5)).collect();
        Self::new(k, &triples)
    }

    /// Complete graph with `p = 1/(k-1)` on every pair.
    pub fn complete(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidKernel(format!("complete graph needs k >= 2, got {k}")));
        }
        let w = 1.0 / (k - 1) as f64;
        let mut triples = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                triples.push((i, j, w));
            }
        }
        Self::new(k, &triples)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sum of all edge rates; the total event rate of the exchange process.
    pub fn total_rate(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_vertices];
        for e in &self.edges {
            sums[e.i] += e.weight;
            sums[e.j] += e.weight;
        }
        sums
    }

    /// Weight `p(i, j)`, symmetric, zero on the diagonal and non-edges.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .iter()
            .find(|e| e.i == a && e.j == b)
            .map_or(0.0, |e| e.weight)
    }

    /// A copy with every rate multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            num_vertices: self.num_vertices,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    weight: e.weight * factor,
                    ..*e
                })
                .collect(),
        }
    }

    fn is_connected(&self) -> bool {
        let mut adjacency = vec![Vec::new(); self.num_vertices];
        for e in &self.edges {
            adjacency[e.i].push(e.j);
            adjacency[e.j].push(e.i);
        }
        let mut seen = vec![false; self.num_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        assert_eq!(ExchangeKernel::two().total_rate(), 1.0);
        let path = ExchangeKernel::path(5).unwrap();
        assert_eq!(path.edges().len(), 4);
        assert_eq!(path.row_sums(), vec![0.5, 1.0, 1.0, 1.0, 0.5]);
        let cycle = ExchangeKernel::cycle(6).unwrap();
        assert!(cycle.row_sums().iter().all(|&r| r == 1.0));
        let complete = ExchangeKernel::complete(4).unwrap();
        assert_eq!(complete.edges().len(), 6);
        assert!((complete.row_sums()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_disconnected() {
        let err = ExchangeKernel::new(4, &[(0, 1, 0.5), (2, 3, 0.5)]).unwrap_err();
        assert!(matches!(err, Error::InvalidKernel(_)));
        assert!(ExchangeKernel::new(3, &[(0, 1, 0.5), (1, 2, 0.0)]).is_err());
    }

    #[test]
    fn rejects_conflicting_duplicates_and_accepts_consistent_ones() {
        assert!(ExchangeKernel::new(2, &[(0, 1, 0.5), (1, 0, 0.25)]).is_err());
        let k = ExchangeKernel::new(2, &[(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        assert_eq!(k.edges().len(), 1);
        assert_eq!(k.weight(1, 0), 0.5);
    }

    #[test]
    fn rejects_superstochastic_rows_and_bad_weights() {
        assert!(ExchangeKernel::new(3, &[(0, 1, 0.8), (1, 2, 0.8)]).is_err());
        assert!(ExchangeKernel::new(2, &[(0, 1, -0.1)]).is_err());
        assert!(ExchangeKernel::new(2, &[(0, 0, 0.1)]).is_err());
        assert!(ExchangeKernel::new(2, &[(0, 2, 0.1)]).is_err());
        assert!(ExchangeKernel::cycle(2).is_err());
    }

    #[test]
    fn single_vertex_is_trivially_connected() {
        let k = ExchangeKernel::path(1).unwrap();
        assert_eq!(k.total_rate(), 0.0);
    }
}
