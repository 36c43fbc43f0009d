use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Undirected, connected location graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairGraph {
    adjacency: Vec<Vec<usize>>,
    layout: Option<Vec<[f64; 2]>>,
}

/// On-disk form: `{"vertices": N, "edges": [[a,b],…], "layout": [[x,y],…]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<[f64; 2]>>,
}

impl RepairGraph {
    pub fn from_edges(vertices: usize, edges: &[[usize; 2]]) -> Result<Self> {
        if vertices == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut adjacency = vec![Vec::new(); vertices];
        for &[a, b] in edges {
            if a >= vertices || b >= vertices {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        let graph = Self { adjacency, layout: None };
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    pub fn with_layout(mut self, layout: Vec<[f64; 2]>) -> Result<Self> {
        if layout.len() != self.num_vertices() {
            return Err(Error::InvalidGraph("layout length differs from vertex count".into()));
        }
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn from_doc(doc: &GraphDoc) -> Result<Self> {
        let g = Self::from_edges(doc.vertices, &doc.edges)?;
        match &doc.layout {
            Some(l) => g.with_layout(l.clone()),
            None => Ok(g),
        }
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            vertices: self.num_vertices(),
            edges: self.edges(),
            layout: self.layout.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_doc(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_doc())?)?;
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    /// Sorted neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn layout(&self) -> Option<&[[f64; 2]]> {
        self.layout.as_deref()
    }

    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for (a, nbrs) in self.adjacency.iter().enumerate() {
            for &b in nbrs {
                if a < b {
                    out.push([a, b]);
                }
            }
        }
        out
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_vertices()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<[usize; 2]> = (1..n).map(|i| [i - 1, i]).collect();
        let layout = (0..n).map(|i| [i as f64, 0.0]).collect();
        Self::from_edges(n, &edges)?.with_layout(layout)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let mut edges: Vec<[usize; 2]> = (1..n).map(|i| [i - 1, i]).collect();
        edges.push([n - 1, 0]);
        let layout = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        Self::from_edges(n, &edges)?.with_layout(layout)
    }

    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        Self::grid_with_chords(rows, cols, 0, 0)
    }

    /// `rows × cols` grid plus `chords` extra random edges (seeded).
    pub fn grid_with_chords(rows: usize, cols: usize, chords: usize, seed: u64) -> Result<Self> {
        let n = rows * cols;
        let id = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push([id(r, c), id(r, c + 1)]);
                }
                if r + 1 < rows {
                    edges.push([id(r, c), id(r + 1, c)]);
                }
            }
        }
        let mut rng = stream(seed, &[rows as u64, cols as u64, chords as u64]);
        let mut added = 0;
        let mut attempts = 0;
        while added < chords && attempts < 100 * (chords + 1) {
            attempts += 1;
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let (a, b) = (a.min(b), a.max(b));
            if a == b || edges.contains(&[a, b]) {
                continue;
            }
            edges.push([a, b]);
            added += 1;
        }
        let layout = (0..n).map(|v| [(v % cols) as f64, (v / cols) as f64]).collect();
        Self::from_edges(n, &edges)?.with_layout(layout)
    }

    /// Random spanning tree plus `extra` random edges.
    pub fn random_connected(n: usize, extra: usize, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, &[n as u64, extra as u64]);
        let mut edges = Vec::new();
        for v in 1..n {
            let parent = rng.random_range(0..v);
            edges.push([parent, v]);
        }
        let mut added = 0;
        let mut attempts = 0;
        while added < extra && attempts < 100 * (extra + 1) {
            attempts += 1;
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let (a, b) = (a.min(b), a.max(b));
            if a == b || edges.contains(&[a, b]) {
                continue;
            }
            edges.push([a, b]);
            added += 1;
        }
        Self::from_edges(n, &edges)
    }

    /// 32-vertex benchmark network: 4×8 grid with 8 seeded chords.
    pub fn benchmark() -> Self {
        Self::grid_with_chords(4, 8, 8, 2021).expect("benchmark graph is valid")
    }

    /// 12-vertex desk-scale network: 3×4 grid with 2 seeded chords.
    pub fn desk() -> Self {
        Self::grid_with_chords(3, 4, 2, 2021).expect("desk graph is valid")
    }
}
