//! Static k-d tree over a point set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use super::{Aabb, Point3};
use crate::scalar::{cmp_real, Real};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub id: usize,
    pub distance: T,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnnError {
    #[error("requested {k} neighbors from an index of {len} points")]
    KTooLarge { k: usize, len: usize },
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Query results are exactly those of a linear scan ordered by `(distance, id)`.
#[derive(Debug, Clone)]
pub struct SpatialIndex<T> {
    points: Vec<Point3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

/// Max-heap entry; the worst candidate sits on top.
#[derive(Clone, Copy)]
struct Candidate<T> {
    dist2: T,
    id: usize,
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Real> Eq for Candidate<T> {}
impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        cmp_real(&self.dist2, &o.dist2).then(self.id.cmp(&o.id))
    }
}

impl<T: Real> SpatialIndex<T> {
    pub fn new(points: &[Point3<T>]) -> Self {
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return slot;
        }
        let bounds = Aabb::from_points(self.order[start..end].iter().map(|&i| &self.points[i]));
        let axis = bounds.longest_axis();
        if bounds.extent()[axis] == T::zero() {
            // all points coincide
            return slot;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            cmp_real(&points[a][axis], &points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[slot] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        slot
    }

    /// The `k` nearest points, ascending by distance with ties broken by lower id.
    pub fn knn(&self, query: Point3<T>, k: usize) -> Result<Vec<Neighbor<T>>, KnnError> {
        if k > self.len() {
            return Err(KnnError::KTooLarge { k, len: self.len() });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_recurse(0, query, k, &mut heap);
        let mut out: Vec<Candidate<T>> = heap.into_vec();
        out.sort();
        Ok(out
            .into_iter()
            .map(|c| Neighbor {
                id: c.id,
                distance: c.dist2.sqrt(),
            })
            .collect())
    }

    fn knn_recurse(
        &self,
        node: usize,
        query: Point3<T>,
        k: usize,
        heap: &mut BinaryHeap<Candidate<T>>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[start..end] {
                    let c = Candidate {
                        dist2: self.points[id].distance_squared(query),
                        id,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap holds k entries") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[axis] - value;
                let (near, far) = if delta < T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_recurse(near, query, k, heap);
                // `<=` keeps equal-distance candidates with lower ids reachable
                if heap.len() < k || delta * delta <= heap.peek().expect("non-empty").dist2 {
                    self.knn_recurse(far, query, k, heap);
                }
            }
        }
    }

    /// Nearest point, if any.
    pub fn nearest(&self, query: Point3<T>) -> Option<Neighbor<T>> {
        if self.is_empty() {
            return None;
        }
        self.knn(query, 1).ok().and_then(|v| v.into_iter().next())
    }

    /// All points with distance `<= radius`, ascending by `(distance, id)`.
    pub fn within_radius(&self, query: Point3<T>, radius: T) -> Vec<Neighbor<T>> {
        let mut out = Vec::new();
        if !self.is_empty() && radius >= T::zero() {
            self.radius_recurse(0, query, radius * radius, &mut out);
        }
        out.sort();
        out.into_iter()
            .map(|c| Neighbor {
                id: c.id,
                distance: c.dist2.sqrt(),
            })
            .collect()
    }

    fn radius_recurse(&self, node: usize, query: Point3<T>, r2: T, out: &mut Vec<Candidate<T>>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[start..end] {
                    let dist2 = self.points[id].distance_squared(query);
                    if dist2 <= r2 {
                        out.push(Candidate { dist2, id });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[axis] - value;
                let (near, far) = if delta < T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.radius_recurse(near, query, r2, out);
                if delta * delta <= r2 {
                    self.radius_recurse(far, query, r2, out);
                }
            }
        }
    }
}
