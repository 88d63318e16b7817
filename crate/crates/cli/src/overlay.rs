//! OBJ overlay for external viewers. Colours ride on `v x y z r g b` records,
//! which MeshLab, CloudCompare and Blender read.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hopclimb::geometry::Vec3;
use hopclimb::reconstruct::TriangleMesh;
use hopclimb::scenegraph::SceneGraph;

use crate::docs::{self, AnchorSet, PlanDocument};
use crate::error::CliError;

type V = Vec3<f64>;
type Rgb = [f64; 3];

const SURFACE: Rgb = [0.62, 0.6, 0.56];
/// Robot 1..4 path colours; more robots cycle.
const PATHS: [Rgb; 4] = [[0.9, 0.1, 0.1], [0.1, 0.7, 0.1], [0.1, 0.3, 0.95], [0.95, 0.8, 0.05]];

/// Low risk green through yellow to red.
fn risk_colour(r: f64) -> Rgb {
    let r = r.clamp(0.0, 1.0);
    if r < 0.5 {
        [2.0 * r, 0.8, 0.1]
    } else {
        [1.0, 0.8 * (2.0 - 2.0 * r), 0.1]
    }
}

#[derive(Default)]
struct Obj {
    text: String,
    vertices: usize,
}

impl Obj {
    fn vertex(&mut self, p: V, c: Rgb) -> usize {
        writeln!(self.text, "v {} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]).unwrap();
        self.vertices += 1;
        self.vertices
    }

    fn group(&mut self, name: &str) {
        writeln!(self.text, "o {name}").unwrap();
    }

    fn mesh(&mut self, mesh: &TriangleMesh<f64>, colour: impl Fn(usize) -> Rgb) {
        let base = self.vertices;
        for (i, &v) in mesh.vertices.iter().enumerate() {
            self.vertex(v, colour(i));
        }
        for t in &mesh.triangles {
            writeln!(self.text, "f {} {} {}", base + t[0] + 1, base + t[1] + 1, base + t[2] + 1).unwrap();
        }
    }

    /// Octahedron of half-diagonal `size` centred on `p`, wound outward.
    fn marker(&mut self, p: V, size: f64, c: Rgb) {
        let [px, nx, py, ny, pz, nz] = [
            V::new(size, 0.0, 0.0),
            V::new(-size, 0.0, 0.0),
            V::new(0.0, size, 0.0),
            V::new(0.0, -size, 0.0),
            V::new(0.0, 0.0, size),
            V::new(0.0, 0.0, -size),
        ]
        .map(|d| self.vertex(p + d, c));
        for [a, b, t] in [
            [px, py, pz],
            [py, nx, pz],
            [nx, ny, pz],
            [ny, px, pz],
            [py, px, nz],
            [nx, py, nz],
            [ny, nx, nz],
            [px, ny, nz],
        ] {
            writeln!(self.text, "f {a} {b} {t}").unwrap();
        }
    }

    fn polyline(&mut self, points: &[V], c: Rgb) {
        if points.len() < 2 {
            return;
        }
        let ids: Vec<String> = points.iter().map(|&p| self.vertex(p, c).to_string()).collect();
        writeln!(self.text, "l {}", ids.join(" ")).unwrap();
    }
}

pub fn export(
    mesh: Option<&Path>,
    anchors: Option<&Path>,
    plan: Option<&Path>,
    graph: Option<&Path>,
    marker: f64,
    out: &Path,
) -> Result<(), CliError> {
    if mesh.is_none() && anchors.is_none() && plan.is_none() && graph.is_none() {
        return Err(CliError::Usage("export needs at least one of --mesh, --anchors, --plan, --graph".into()));
    }
    if !(marker > 0.0 && marker.is_finite()) {
        return Err(CliError::Usage(format!("marker size must be positive, got {marker}")));
    }
    let mesh = mesh
        .map(|p| TriangleMesh::<f64>::read_obj(p).map_err(|e| CliError::input(p, e)))
        .transpose()?;
    let anchors: Option<AnchorSet> = anchors.map(docs::read).transpose()?;
    let graph: Option<SceneGraph<f64>> = graph.map(docs::read).transpose()?;
    let plan: Option<PlanDocument> = plan.map(docs::read).transpose()?;

    let mut obj = Obj::default();
    obj.text.push_str("# hopclimb overlay: surface, anchors coloured by risk, one polyline per robot\n");
    if let Some(m) = &mesh {
        obj.group("surface");
        obj.mesh(m, |_| SURFACE);
    }
    let markers: Vec<(V, f64)> = match (&anchors, &graph) {
        (Some(a), _) => a.iter().map(|a| (a.position, a.r)).collect(),
        (None, Some(g)) => g.vertices().iter().map(|a| (a.position, a.r)).collect(),
        _ => Vec::new(),
    };
    if !markers.is_empty() {
        obj.group("anchors");
        for (p, r) in markers {
            obj.marker(p, marker, risk_colour(r));
        }
    }
    if let Some(plan) = &plan {
        let mut position: HashMap<usize, V> = HashMap::new();
        if let Some(m) = &mesh {
            position.extend(m.vertices.iter().copied().enumerate());
        }
        if let Some(a) = &anchors {
            position.extend(a.iter().map(|a| (a.id, a.position)));
        }
        if let Some(g) = &graph {
            position.extend(g.vertices().iter().map(|a| (a.id, a.position)));
        }
        for (k, robot) in plan.robots.iter().enumerate() {
            let Some(hops) = &robot.plan else { continue };
            let points = hops
                .anchors
                .iter()
                .map(|id| position.get(id).copied())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| CliError::Usage("plan anchors need positions: pass --graph, --anchors or --mesh".into()))?;
            obj.group(&format!("robot{}", k + 1));
            obj.polyline(&points, PATHS[k % PATHS.len()]);
        }
    }
    fs::write(out, obj.text).map_err(|e| CliError::write(out, e))
}
