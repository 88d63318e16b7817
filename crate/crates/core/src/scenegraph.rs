//! Directed anchor graph. Each edge carries its Euclidean length `d` and an
//! anchoring loss `loss = l_base + r_to`, where `r_to` is the destination's score.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::AnchorPoint;
use crate::geometry::SpatialIndex;
use crate::scalar::{cmp_real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SceneEdge<T> {
    pub from: usize,
    pub to: usize,
    pub d: T,
    pub loss: T,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneGraphError<T: Real> {
    #[error("a scene graph needs at least 2 anchors, got {0}")]
    TooFewAnchors(usize),
    #[error("anchor id {0} appears more than once")]
    DuplicateAnchor(usize),
    #[error("neighbor radius {0} must be positive")]
    InvalidRadius(f64),
    /// The graph is still returned; every vertex is isolated.
    #[error("no anchor pair lies within the neighbor radius")]
    NoEdges(Box<SceneGraph<T>>),
    #[error("malformed graph: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions<T> {
    /// Base cost added to every edge loss.
    pub l_base: T,
    /// Keep only mutual nearest neighbours up to this out-degree.
    pub max_out_degree: Option<usize>,
}

impl<T: Real> Default for GraphOptions<T> {
    fn default() -> Self {
        Self {
            l_base: T::zero(),
            max_out_degree: Some(16),
        }
    }
}

/// Vertices are stored in ascending id order; edges are sorted by `(from, to)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument<T>", into = "GraphDocument<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SceneGraph<T> {
    neighbor_radius: T,
    vertices: Vec<AnchorPoint<T>>,
    edges: Vec<SceneEdge<T>>,
    slots: HashMap<usize, usize>,
    /// `edges[offsets[s]..offsets[s + 1]]` leave the vertex in slot `s`.
    offsets: Vec<usize>,
}

/// On-disk form of a [`SceneGraph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
#[serde(deny_unknown_fields)]
pub struct GraphDocument<T> {
    pub neighbor_radius: T,
    pub vertices: Vec<AnchorPoint<T>>,
    pub edges: Vec<SceneEdge<T>>,
}

impl<T: Real> From<SceneGraph<T>> for GraphDocument<T> {
    fn from(g: SceneGraph<T>) -> Self {
        Self {
            neighbor_radius: g.neighbor_radius,
            vertices: g.vertices,
            edges: g.edges,
        }
    }
}

impl<T: Real> TryFrom<GraphDocument<T>> for SceneGraph<T> {
    type Error = SceneGraphError<T>;

    fn try_from(doc: GraphDocument<T>) -> Result<Self, Self::Error> {
        SceneGraph::from_parts(doc.neighbor_radius, doc.vertices, doc.edges)
    }
}

impl<T: Real> std::fmt::Display for SceneGraph<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "scene graph with {} vertices and {} edges", self.vertices.len(), self.edges.len())
    }
}

impl<T: Real> SceneGraph<T> {
    /// Checks the graph invariants and builds the adjacency.
    pub fn from_parts(
        neighbor_radius: T,
        mut vertices: Vec<AnchorPoint<T>>,
        mut edges: Vec<SceneEdge<T>>,
    ) -> Result<Self, SceneGraphError<T>> {
        vertices.sort_by_key(|a| a.id);
        let mut slots = HashMap::with_capacity(vertices.len());
        for (s, a) in vertices.iter().enumerate() {
            if slots.insert(a.id, s).is_some() {
                return Err(SceneGraphError::DuplicateAnchor(a.id));
            }
        }
        edges.sort_by(|a, b| a.from.cmp(&b.from).then(a.to.cmp(&b.to)));
        let mut offsets = vec![0usize; vertices.len() + 1];
        for (i, e) in edges.iter().enumerate() {
            let (Some(&sf), Some(_)) = (slots.get(&e.from), slots.get(&e.to)) else {
                return Err(SceneGraphError::Malformed(format!(
                    "edge {}->{} references a missing anchor",
                    e.from, e.to
                )));
            };
            if e.from == e.to {
                return Err(SceneGraphError::Malformed(format!("self edge on {}", e.from)));
            }
            if i > 0 && edges[i - 1].from == e.from && edges[i - 1].to == e.to {
                return Err(SceneGraphError::Malformed(format!(
                    "duplicate edge {}->{}",
                    e.from, e.to
                )));
            }
            if e.d > neighbor_radius {
                return Err(SceneGraphError::Malformed(format!(
                    "edge {}->{} longer than the neighbor radius",
                    e.from, e.to
                )));
            }
            offsets[sf + 1] += 1;
        }
        for s in 0..vertices.len() {
            offsets[s + 1] += offsets[s];
        }
        Ok(Self {
            neighbor_radius,
            vertices,
            edges,
            slots,
            offsets,
        })
    }

    pub fn neighbor_radius(&self) -> T {
        self.neighbor_radius
    }

    pub fn vertices(&self) -> &[AnchorPoint<T>] {
        &self.vertices
    }

    pub fn edges(&self) -> &[SceneEdge<T>] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Dense position of anchor `id`, usable with [`Self::vertex_at`].
    pub fn slot(&self, id: usize) -> Option<usize> {
        self.slots.get(&id).copied()
    }

    pub fn vertex_at(&self, slot: usize) -> &AnchorPoint<T> {
        &self.vertices[slot]
    }

    pub fn anchor(&self, id: usize) -> Option<&AnchorPoint<T>> {
        self.slot(id).map(|s| &self.vertices[s])
    }

    pub fn out_edges_at(&self, slot: usize) -> &[SceneEdge<T>] {
        &self.edges[self.offsets[slot]..self.offsets[slot + 1]]
    }

    pub fn out_edges(&self, id: usize) -> &[SceneEdge<T>] {
        self.slot(id).map_or(&[], |s| self.out_edges_at(s))
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&SceneEdge<T>> {
        let out = self.out_edges(from);
        out.binary_search_by(|e| e.to.cmp(&to)).ok().map(|i| &out[i])
    }
}

/// Edges `a -> b` for every ordered pair with `0 < |a - b| <= neighbor_radius`.
///
/// With `max_out_degree = Some(k)` a pair is kept only if each endpoint is
/// among the other's `k` nearest anchors in range (ties by id), which keeps
/// edge existence symmetric.
pub fn build_graph<T: Real>(
    anchors: &[AnchorPoint<T>],
    neighbor_radius: T,
    opts: &GraphOptions<T>,
) -> Result<SceneGraph<T>, SceneGraphError<T>> {
    if anchors.len() < 2 {
        return Err(SceneGraphError::TooFewAnchors(anchors.len()));
    }
    if !(neighbor_radius > T::zero()) {
        return Err(SceneGraphError::InvalidRadius(neighbor_radius.to_f64_lossy()));
    }
    let positions: Vec<_> = anchors.iter().map(|a| a.position).collect();
    let index = SpatialIndex::new(&positions);
    let n = anchors.len();

    // Per-anchor neighbour lists (indices into `anchors`), nearest first.
    let lists: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let p = positions[i];
            let in_range = |d: T| d > T::zero() && d <= neighbor_radius;
            match opts.max_out_degree {
                None => index
                    .within_radius(p, neighbor_radius)
                    .into_iter()
                    .filter(|nb| in_range(nb.distance))
                    .map(|nb| nb.id)
                    .collect(),
                Some(cap) => {
                    // Coincident anchors (d = 0) are skipped, so ask for enough extra.
                    let mut want = (cap + 1).min(n);
                    loop {
                        let found = index.knn(p, want).expect("want <= n");
                        let zeros = found.iter().filter(|nb| nb.distance <= T::zero()).count();
                        let list: Vec<usize> = found
                            .iter()
                            .filter(|nb| in_range(nb.distance))
                            .map(|nb| nb.id)
                            .take(cap)
                            .collect();
                        if list.len() == cap || want == n || found.last().is_some_and(|nb| nb.distance > neighbor_radius) {
                            break list;
                        }
                        want = (cap + zeros + 1).max(want + 1).min(n);
                    }
                }
            }
        })
        .collect();

    let mut sorted_lists = lists.clone();
    for l in sorted_lists.iter_mut() {
        l.sort_unstable();
    }
    let mut edges = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            if opts.max_out_degree.is_some() && sorted_lists[j].binary_search(&i).is_err() {
                continue;
            }
            edges.push(SceneEdge {
                from: anchors[i].id,
                to: anchors[j].id,
                d: positions[i].distance(positions[j]),
                loss: opts.l_base + anchors[j].r,
            });
        }
    }
    let graph = SceneGraph::from_parts(neighbor_radius, anchors.to_vec(), edges)?;
    if graph.edges.is_empty() {
        return Err(SceneGraphError::NoEdges(Box::new(graph)));
    }
    Ok(graph)
}

/// Removes edges longer than `h_max`; vertices are kept even if isolated.
pub fn prune_by_hop<T: Real>(graph: &SceneGraph<T>, h_max: T) -> SceneGraph<T> {
    let edges = graph.edges.iter().copied().filter(|e| e.d <= h_max).collect();
    SceneGraph::from_parts(graph.neighbor_radius, graph.vertices.clone(), edges)
        .expect("a subset of a valid graph is valid")
}

/// Anchor nearest to `target`, ties by lower id.
pub fn nearest_anchor<T: Real>(graph: &SceneGraph<T>, target: crate::geometry::Point3<T>) -> Option<usize> {
    graph
        .vertices
        .iter()
        .min_by(|a, b| {
            cmp_real(&a.position.distance_squared(target), &b.position.distance_squared(target))
                .then(a.id.cmp(&b.id))
        })
        .map(|a| a.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn anchor(id: usize, x: f64, r: f64) -> AnchorPoint<f64> {
        AnchorPoint {
            id,
            position: Vec3::new(x, 0.0, 0.0),
            normal: Vec3::axis(2),
            flatness: 0.0,
            flatness_norm: 0.0,
            height_risk: r,
            r,
        }
    }

    #[test]
    fn two_anchors_get_both_directions() {
        let g = build_graph(&[anchor(7, 0.0, 0.1), anchor(3, 3.0, 0.4)], 5.0, &GraphOptions::default()).unwrap();
        assert_eq!(g.edges().len(), 2);
        let e = g.edge(7, 3).unwrap();
        assert_eq!(e.d, 3.0);
        assert_eq!(e.loss, 0.4);
        assert_eq!(g.edge(3, 7).unwrap().loss, 0.1);
        assert_eq!(g.vertices()[0].id, 3);
    }

    #[test]
    fn radius_cut_and_no_edges() {
        let a = [anchor(0, 0.0, 0.0), anchor(1, 4.0, 0.0), anchor(2, 8.0, 0.0)];
        let g = build_graph(&a, 5.0, &GraphOptions::default()).unwrap();
        assert!(g.edge(0, 2).is_none() && g.edge(2, 0).is_none());
        assert_eq!(g.edges().len(), 4);
        match build_graph(&a, 1.0, &GraphOptions::default()) {
            Err(SceneGraphError::NoEdges(g)) => assert_eq!(g.len(), 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(build_graph(&a[..1], 1.0, &GraphOptions::default()), Err(SceneGraphError::TooFewAnchors(1))));
    }

    #[test]
    fn l_base_adds_to_loss() {
        let opts = GraphOptions { l_base: 0.25, max_out_degree: None };
        let g = build_graph(&[anchor(0, 0.0, 0.0), anchor(1, 1.0, 0.5)], 2.0, &opts).unwrap();
        assert_eq!(g.edge(0, 1).unwrap().loss, 0.75);
    }

    #[test]
    fn degree_cap_is_symmetric_and_bounded() {
        let a: Vec<_> = (0..30).map(|i| anchor(i, (i as f64).sqrt(), 0.0)).collect();
        let opts = GraphOptions { l_base: 0.0, max_out_degree: Some(3) };
        let g = build_graph(&a, 100.0, &opts).unwrap();
        for v in g.vertices() {
            assert!(g.out_edges(v.id).len() <= 3);
            for e in g.out_edges(v.id) {
                assert!(g.edge(e.to, e.from).is_some());
            }
        }
    }

    #[test]
    fn prune_and_json_round_trip() {
        let a = [anchor(0, 0.0, 0.2), anchor(1, 4.0, 0.3), anchor(2, 8.0, 0.1)];
        let g = build_graph(&a, 10.0, &GraphOptions { l_base: 0.0, max_out_degree: None }).unwrap();
        assert_eq!(g.edges().len(), 6);
        let p = prune_by_hop(&g, 5.0);
        assert_eq!(p.edges().len(), 4);
        assert_eq!(p.len(), 3);
        let s = serde_json::to_string(&p).unwrap();
        let back: SceneGraph<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert_eq!(nearest_anchor(&p, Vec3::new(6.1, 0.0, 0.0)), Some(2));
    }

    #[test]
    fn malformed_document_rejected() {
        let doc = r#"{"neighbor_radius":1.0,"vertices":[],"edges":[{"from":0,"to":1,"d":0.5,"loss":0.0}]}"#;
        assert!(serde_json::from_str::<SceneGraph<f64>>(doc).is_err());
    }
}
