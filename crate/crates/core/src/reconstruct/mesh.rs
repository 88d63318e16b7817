use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{Point3, Vec3};
use crate::scalar::Real;

/// Triangle soup with shared vertices; counter-clockwise winding faces outward.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Point3<T>>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Error)]
pub enum ObjError {
    #[error("OBJ parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl<T: Real> TriangleMesh<T> {
    pub fn new(vertices: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Undirected edge -> number of incident triangles.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn max_edge_valence(&self) -> usize {
        self.edge_counts().values().copied().max().unwrap_or(0)
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        !self.triangles.is_empty() && self.edge_counts().values().all(|&c| c == 2)
    }

    /// V - E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    pub fn has_duplicate_triangles(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.triangles.len());
        self.triangles.iter().any(|t| {
            let mut k = *t;
            k.sort_unstable();
            !seen.insert(k)
        })
    }

    pub fn references_valid_vertices(&self) -> bool {
        self.triangles
            .iter()
            .all(|t| t.iter().all(|&v| v < self.vertices.len()))
    }

    /// Non-normalised face normal following the winding.
    pub fn face_normal(&self, t: usize) -> Vec3<T> {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        (b - a).cross(c - a)
    }

    /// Area-weighted vertex normals; isolated or cancelling vertices get `None`.
    pub fn vertex_normals(&self) -> Vec<Option<Vec3<T>>> {
        let mut acc = vec![Vec3::zero(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let n = self.face_normal(t);
            for &v in tri {
                acc[v] += n;
            }
        }
        acc.into_iter().map(Vec3::normalized).collect()
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&p| p + offset).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Applies `p -> scale * p + offset` componentwise.
    pub fn transformed(&self, scale: Vec3<T>, offset: Vec3<T>) -> Self {
        let mut m = Self {
            vertices: self
                .vertices
                .iter()
                .map(|&p| p.mul_by_component(scale) + offset)
                .collect(),
            triangles: self.triangles.clone(),
        };
        // a reflection flips orientation
        if scale.x * scale.y * scale.z < T::zero() {
            m.triangles.iter_mut().for_each(|t| t.swap(1, 2));
        }
        m
    }

    /// Drops unreferenced vertices, keeping the order of first use.
    pub fn compacted(&self) -> Self {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let triangles = self
            .triangles
            .iter()
            .map(|t| {
                t.map(|v| {
                    if remap[v] == usize::MAX {
                        remap[v] = vertices.len();
                        vertices.push(self.vertices[v]);
                    }
                    remap[v]
                })
            })
            .collect();
        Self { vertices, triangles }
    }

    /// Triangles whose three vertices pass `keep`, compacted.
    pub fn retain_vertices(&self, keep: impl Fn(&Point3<T>) -> bool) -> Self {
        let kept: Vec<bool> = self.vertices.iter().map(keep).collect();
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().copied().filter(|t| t.iter().all(|&v| kept[v])).collect(),
        }
        .compacted()
    }

    /// Appends `other`, offsetting its indices.
    pub fn append(&mut self, other: &Self) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
    }

    pub fn write_obj(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_obj_to(&mut w)?;
        w.flush()
    }

    pub fn write_obj_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn read_obj(path: &Path) -> Result<Self, ObjError> {
        Self::parse_obj(BufReader::new(File::open(path)?))
    }

    /// Reads `v` and `f` records; polygons are fan-triangulated, other records ignored.
    pub fn parse_obj<R: BufRead>(reader: R) -> Result<Self, ObjError> {
        let mut mesh = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let err = |m: String| ObjError::Parse {
                line: lineno,
                message: m,
            };
            let mut toks = line.split_whitespace();
            match toks.next() {
                Some("v") => {
                    let c: Vec<f64> = toks
                        .take(3)
                        .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad coordinate {t:?}"))))
                        .collect::<Result<_, _>>()?;
                    if c.len() != 3 || c.iter().any(|v| !v.is_finite()) {
                        return Err(err("vertex needs three finite coordinates".into()));
                    }
                    mesh.vertices
                        .push(Vec3::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2])));
                }
                Some("f") => {
                    let n = mesh.vertices.len() as i64;
                    let idx: Vec<usize> = toks
                        .map(|t| {
                            let first = t.split('/').next().unwrap_or("");
                            let raw: i64 = first
                                .parse()
                                .map_err(|_| err(format!("bad face index {t:?}")))?;
                            let resolved = if raw < 0 { n + raw } else { raw - 1 };
                            if resolved < 0 || resolved >= n {
                                return Err(err(format!("face index {raw} out of range")));
                            }
                            Ok(resolved as usize)
                        })
                        .collect::<Result<_, _>>()?;
                    if idx.len() < 3 {
                        return Err(err("face needs at least three vertices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(mesh)
    }
}
