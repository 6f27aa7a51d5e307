//! Surface segmentation by breadth-first flood fill over a kNN graph, with
//! edge points acting as boundaries.

use std::collections::VecDeque;
use std::io::Write;

use crate::cloud::io::write_ply_with;
use crate::cloud::{PointCloud, SpatialIndex};
use crate::error::{Error, Result};

pub const DEFAULT_GRAPH_K: usize = 5;

/// Id of edge points and of points in discarded specks.
pub const UNASSIGNED: i64 = -1;

/// Default minimum segment size as a fraction of the non-edge points.
pub const MIN_SEGMENT_FRACTION: f64 = 0.002;

/// Waves smaller than this many points are discarded by default. Random
/// sampling leaves specks of a few points just outside an edge band whose
/// neighbours all lie inside it; they are not surfaces.
pub fn default_min_size(non_edge_points: usize) -> usize {
    ((non_edge_points as f64 * MIN_SEGMENT_FRACTION).ceil() as usize).max(1)
}

/// Symmetrized kNN adjacency; each list is sorted by neighbour index.
pub fn knn_graph(cloud: &PointCloud, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = cloud.len();
    if k == 0 {
        return Err(Error::invalid("graph k must be positive"));
    }
    if n < k + 1 {
        return Err(Error::InsufficientNeighborhood { needed: k + 1, available: n });
    }
    let index = SpatialIndex::build(cloud)?;
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for nb in index.knn_excluding(i, k) {
            adj[i].push(nb.index);
            adj[nb.index].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    Ok(adj)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationResult {
    pub ids: Vec<i64>,
    pub count: usize,
    pub sizes: Vec<usize>,
}

/// Flood fill seeded at the lowest-index unvisited non-edge point; edge
/// points stop the wave and keep id -1. Uses [`default_min_size`].
pub fn flood_segment(cloud: &PointCloud, k: usize) -> Result<SegmentationResult> {
    let edges = cloud.require_labels()?;
    let non_edge = edges.iter().filter(|&&e| !e).count();
    flood_segment_with(cloud, k, default_min_size(non_edge))
}

/// [`flood_segment`] with an explicit minimum segment size; 1 keeps every wave.
pub fn flood_segment_with(cloud: &PointCloud, k: usize, min_size: usize) -> Result<SegmentationResult> {
    let edges = cloud.require_labels()?;
    let adj = knn_graph(cloud, k)?;
    Ok(flood_fill(&adj, edges, min_size))
}

/// Flood fill over a prepared adjacency.
pub fn flood_fill(adj: &[Vec<usize>], edges: &[bool], min_size: usize) -> SegmentationResult {
    let mut ids = vec![UNASSIGNED; adj.len()];
    let mut visited = vec![false; adj.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    let mut wave = Vec::new();
    for seed in 0..adj.len() {
        if edges[seed] || visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        wave.clear();
        while let Some(u) = queue.pop_front() {
            wave.push(u);
            for &v in &adj[u] {
                if !edges[v] && !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if wave.len() >= min_size {
            let id = sizes.len() as i64;
            for &u in &wave {
                ids[u] = id;
            }
            sizes.push(wave.len());
        }
    }
    SegmentationResult { count: sizes.len(), ids, sizes }
}

impl SegmentationResult {
    /// Gives each unassigned point the id of its nearest assigned point.
    /// Ties resolve to the lower index. No-op when nothing is assigned.
    pub fn attach_unassigned(&self, cloud: &PointCloud) -> Result<Self> {
        let assigned: Vec<usize> = (0..self.ids.len()).filter(|&i| self.ids[i] != UNASSIGNED).collect();
        if assigned.is_empty() {
            return Ok(self.clone());
        }
        let pts: Vec<_> = assigned.iter().map(|&i| cloud.points()[i]).collect();
        let index = SpatialIndex::from_points(&pts)?;
        let mut out = self.clone();
        for (i, id) in out.ids.iter_mut().enumerate() {
            if *id == UNASSIGNED {
                let nearest = index.knn(&cloud.points()[i], 1)[0].index;
                *id = self.ids[assigned[nearest]];
                out.sizes[*id as usize] += 1;
            }
        }
        Ok(out)
    }

    /// Text rows `x y z segment_id`.
    pub fn write_xyz(&self, w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
        self.check_len(cloud)?;
        for (p, id) in cloud.points().iter().zip(&self.ids) {
            writeln!(w, "{} {} {} {id}", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    /// ASCII PLY with an integer `segment` vertex property.
    pub fn write_ply(&self, w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
        self.check_len(cloud)?;
        write_ply_with(w, cloud, Some(("segment", &self.ids)))
    }

    fn check_len(&self, cloud: &PointCloud) -> Result<()> {
        if self.ids.len() != cloud.len() {
            return Err(Error::invalid(format!("{} segment ids for {} points", self.ids.len(), cloud.len())));
        }
        Ok(())
    }
}
