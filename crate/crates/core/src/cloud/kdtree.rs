use std::cmp::Ordering;

use super::{Point, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

/// A query result: point index and squared Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist2.sqrt()
    }

    /// Total order used for every kNN result: distance, then index.
    fn rank(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact kNN index over a fixed set of positions.
///
/// Results are sorted by distance with ties broken by smaller point index, so
/// they agree element for element with a brute-force scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("cannot index an empty point set"));
        }
        let mut index = Self {
            points: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] == 0.0 {
            // All coincident: no split can separate them.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `min(k, N)` nearest points to `query`.
    pub fn knn(&self, query: &Point, k: usize) -> Vec<Neighbor> {
        let k = k.min(self.points.len());
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(0, &[query.x, query.y, query.z], k, &mut best);
        }
        best
    }

    /// The `k` nearest points to point `i`, excluding `i` itself.
    pub fn knn_excluding(&self, i: usize, k: usize) -> Vec<Neighbor> {
        let p = self.points[i];
        let mut out = self.knn(&Point::new(p[0], p[1], p[2]), k + 1);
        out.retain(|n| n.index != i);
        out.truncate(k);
        out
    }

    fn search(&self, node: usize, q: &[f64; 3], k: usize, best: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let p = &self.points[i];
                    let dist2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    let cand = Neighbor { index: i, dist2 };
                    if best.len() == k && cand.rank(&best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best
                        .binary_search_by(|n| n.rank(&cand))
                        .unwrap_or_else(|e| e);
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, best);
                // Equal distances must still be visited: a farther subtree may
                // hold a tie with a smaller index.
                if best.len() < k || diff * diff <= best[k - 1].dist2 {
                    self.search(far, q, k, best);
                }
            }
        }
    }
}
