//! XYZ and PLY point cloud reading and writing.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{OrientedPoint, Point3, PointCloud, Vec3};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
}

impl CloudFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xyz" | "txt" | "pts" => Some(Self::Xyz),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> CloudError {
    CloudError::ParseError {
        line,
        message: message.into(),
    }
}

fn parse_finite(tok: &str, line: usize) -> Result<f64, CloudError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate {tok:?}")));
    }
    Ok(v)
}

fn parse_origin<T: Real>(rest: &str, line: usize) -> Result<Point3<T>, CloudError> {
    let vals: Vec<f64> = rest
        .split_whitespace()
        .map(|t| parse_finite(t, line))
        .collect::<Result<_, _>>()?;
    if vals.len() != 3 {
        return Err(parse_err(line, "sensor_origin needs three coordinates"));
    }
    Ok(Vec3::new(T::lit(vals[0]), T::lit(vals[1]), T::lit(vals[2])))
}

pub fn load_cloud<T: Real>(path: &Path, format: CloudFormat) -> Result<PointCloud<T>, CloudError> {
    let file = File::open(path)?;
    parse_cloud(BufReader::new(file), format)
}

pub fn parse_cloud<T: Real, R: BufRead>(
    reader: R,
    format: CloudFormat,
) -> Result<PointCloud<T>, CloudError> {
    let cloud = match format {
        CloudFormat::Xyz => parse_xyz(reader)?,
        CloudFormat::Ply => {
            let table = read_ply_vertices(reader)?;
            let cols = table.columns(&["x", "y", "z"])?;
            let points = table
                .rows
                .iter()
                .map(|r| Vec3::new(T::lit(r[cols[0]]), T::lit(r[cols[1]]), T::lit(r[cols[2]])))
                .collect();
            PointCloud::new(points, table.origin())
        }
    };
    if cloud.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    Ok(cloud)
}

fn parse_xyz<T: Real, R: BufRead>(reader: R) -> Result<PointCloud<T>, CloudError> {
    let mut points = Vec::new();
    let mut origin = Vec3::zero();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("sensor_origin") {
                origin = parse_origin(rest, lineno)?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(lineno, "expected at least three columns"));
        }
        let x = parse_finite(toks[0], lineno)?;
        let y = parse_finite(toks[1], lineno)?;
        let z = parse_finite(toks[2], lineno)?;
        points.push(Vec3::new(T::lit(x), T::lit(y), T::lit(z)));
    }
    Ok(PointCloud::new(points, origin))
}

#[derive(Debug, Clone, Copy)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<(String, Option<PlyType>)>,
}

/// Vertex element of a PLY file, one row of doubles per vertex.
struct PlyTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    origin: Option<[f64; 3]>,
}

impl PlyTable {
    fn columns(&self, wanted: &[&str]) -> Result<Vec<usize>, CloudError> {
        wanted
            .iter()
            .map(|w| {
                self.names
                    .iter()
                    .position(|n| n == w)
                    .ok_or_else(|| parse_err(0, format!("vertex element lacks property {w:?}")))
            })
            .collect()
    }

    fn origin<T: Real>(&self) -> Point3<T> {
        self.origin
            .map(|o| Vec3::new(T::lit(o[0]), T::lit(o[1]), T::lit(o[2])))
            .unwrap_or_else(Vec3::zero)
    }
}

fn next_line<R: BufRead>(
    reader: &mut R,
    line: &mut String,
    lineno: &mut usize,
) -> Result<usize, CloudError> {
    line.clear();
    if reader.read_line(line)? == 0 {
        return Err(parse_err(*lineno + 1, "unexpected end of file"));
    }
    *lineno += 1;
    Ok(*lineno)
}

fn read_ply_vertices<R: BufRead>(mut reader: R) -> Result<PlyTable, CloudError> {
    let mut line = String::new();
    let mut lineno = 0usize;

    let n = next_line(&mut reader, &mut line, &mut lineno)?;
    if line.trim() != "ply" {
        return Err(parse_err(n, "missing 'ply' magic"));
    }
    let mut binary = None;
    let mut origin = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let n = next_line(&mut reader, &mut line, &mut lineno)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, ..] => {
                return Err(parse_err(n, format!("unsupported format {other}")));
            }
            ["comment", "sensor_origin", rest @ ..] => {
                let p: Point3<f64> = parse_origin(&rest.join(" "), n)?;
                origin = Some([p.x, p.y, p.z]);
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(n, format!("bad element count {count:?}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(n, "property before element"))?
                .properties
                .push((name.to_string(), None)),
            ["property", ty, name] => {
                let ty = PlyType::parse(ty)
                    .ok_or_else(|| parse_err(n, format!("unknown property type {ty:?}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before element"))?
                    .properties
                    .push((name.to_string(), Some(ty)));
            }
            ["end_header"] => break,
            _ => return Err(parse_err(n, format!("unrecognized header line {:?}", line.trim()))),
        }
    }
    let binary = binary.ok_or_else(|| parse_err(lineno, "missing format line"))?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(lineno, "no vertex element"))?;
    let vertex = &elements[vertex_pos];
    if vertex.properties.iter().any(|(_, t)| t.is_none()) {
        return Err(parse_err(lineno, "list properties on vertex element are not supported"));
    }
    let names: Vec<String> = vertex.properties.iter().map(|(n, _)| n.clone()).collect();
    let types: Vec<PlyType> = vertex.properties.iter().filter_map(|(_, t)| *t).collect();
    let header_lines = lineno;
    let mut rows = Vec::with_capacity(vertex.count);

    if binary {
        for e in &elements[..vertex_pos] {
            if e.properties.iter().any(|(_, t)| t.is_none()) {
                return Err(parse_err(header_lines, "cannot skip list element preceding vertices"));
            }
            let size: usize = e.properties.iter().filter_map(|(_, t)| t.map(PlyType::size)).sum();
            io::copy(&mut (&mut reader).take((size * e.count) as u64), &mut io::sink())?;
        }
        let stride: usize = types.iter().map(|t| t.size()).sum();
        let mut buf = vec![0u8; stride];
        for i in 0..vertex.count {
            let rec = header_lines + i + 1;
            reader
                .read_exact(&mut buf)
                .map_err(|_| parse_err(rec, "truncated binary vertex data"))?;
            let mut off = 0;
            let mut row = Vec::with_capacity(types.len());
            for t in &types {
                let v = t.decode_le(&buf[off..off + t.size()]);
                if !v.is_finite() {
                    return Err(parse_err(rec, "non-finite vertex value"));
                }
                row.push(v);
                off += t.size();
            }
            rows.push(row);
        }
    } else {
        let skip: usize = elements[..vertex_pos].iter().map(|e| e.count).sum();
        for _ in 0..skip {
            next_line(&mut reader, &mut line, &mut lineno)?;
        }
        for _ in 0..vertex.count {
            let n = next_line(&mut reader, &mut line, &mut lineno)?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < types.len() {
                return Err(parse_err(n, format!("expected {} values", types.len())));
            }
            let row = toks[..types.len()]
                .iter()
                .map(|t| parse_finite(t, n))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
    }
    Ok(PlyTable {
        names,
        rows,
        origin,
    })
}

/// Reads a PLY whose vertices carry `nx ny nz` normals.
pub fn load_oriented_ply<T: Real>(
    path: &Path,
) -> Result<(Vec<OrientedPoint<T>>, Point3<T>), CloudError> {
    let table = read_ply_vertices(BufReader::new(File::open(path)?))?;
    let c = table.columns(&["x", "y", "z", "nx", "ny", "nz"])?;
    let pts: Vec<_> = table
        .rows
        .iter()
        .map(|r| OrientedPoint {
            position: Vec3::new(T::lit(r[c[0]]), T::lit(r[c[1]]), T::lit(r[c[2]])),
            normal: Vec3::new(T::lit(r[c[3]]), T::lit(r[c[4]]), T::lit(r[c[5]])),
        })
        .collect();
    if pts.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    Ok((pts, table.origin()))
}

pub fn write_xyz<T: Real>(path: &Path, cloud: &PointCloud<T>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let o = cloud.sensor_origin;
    writeln!(w, "# sensor_origin {} {} {}", o.x, o.y, o.z)?;
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    w.flush()
}

pub fn write_ply<T: Real>(path: &Path, cloud: &PointCloud<T>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let o = cloud.sensor_origin;
    write!(
        w,
        "ply\nformat ascii 1.0\ncomment sensor_origin {} {} {}\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\nend_header\n",
        o.x,
        o.y,
        o.z,
        cloud.len()
    )?;
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    w.flush()
}

pub fn write_oriented_ply<T: Real>(
    path: &Path,
    points: &[OrientedPoint<T>],
    sensor_origin: Point3<T>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let o = sensor_origin;
    write!(
        w,
        "ply\nformat ascii 1.0\ncomment sensor_origin {} {} {}\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property double nx\nproperty double ny\nproperty double nz\nend_header\n",
        o.x,
        o.y,
        o.z,
        points.len()
    )?;
    for p in points {
        let (a, n) = (p.position, p.normal);
        writeln!(w, "{} {} {} {} {} {}", a.x, a.y, a.z, n.x, n.y, n.z)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn xyz(s: &str) -> Result<PointCloud<f64>, CloudError> {
        parse_cloud(Cursor::new(s), CloudFormat::Xyz)
    }

    #[test]
    fn single_record() {
        let c = xyz("1 2 3\n").unwrap();
        assert_eq!(c.points, vec![Vec3::new(1.0, 2.0, 3.0)]);
        assert_eq!(c.sensor_origin, Vec3::zero());
    }

    #[test]
    fn nan_rejected_with_line_number() {
        match xyz("1 2 nan\n") {
            Err(CloudError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match xyz("# header\n0 0 0\n4 5 inf\n") {
            Err(CloudError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_origin() {
        let c = xyz("# sensor_origin 0 0 5\n# other\n\n1 1 1\n2 2 2 extra\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.sensor_origin, Vec3::new(0.0, 0.0, 5.0));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(xyz("# nothing\n"), Err(CloudError::EmptyCloud)));
        assert!(matches!(xyz("1 2\n"), Err(CloudError::ParseError { line: 1, .. })));
    }

    #[test]
    fn ascii_ply_with_face_element_after() {
        let s = "ply\nformat ascii 1.0\ncomment sensor_origin 1 2 3\nelement vertex 2\n\
                 property float x\nproperty float y\nproperty float z\nproperty uchar red\n\
                 element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                 0 0 0 255\n1.5 2 3 0\n3 0 1 2\n";
        let c: PointCloud<f32> = parse_cloud(Cursor::new(s), CloudFormat::Ply).unwrap();
        assert_eq!(c.points[1], Vec3::new(1.5, 2.0, 3.0));
        assert_eq!(c.sensor_origin, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn binary_ply_round() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement camera 1\nproperty float k\n\
                          element vertex 2\nproperty float x\nproperty float y\nproperty double z\nend_header\n"
            .to_vec();
        bytes.extend(7.0f32.to_le_bytes());
        for (x, y, z) in [(1.0f32, 2.0f32, 3.0f64), (-1.0, 0.5, 1e-3)] {
            bytes.extend(x.to_le_bytes());
            bytes.extend(y.to_le_bytes());
            bytes.extend(z.to_le_bytes());
        }
        let c: PointCloud<f64> = parse_cloud(Cursor::new(bytes), CloudFormat::Ply).unwrap();
        assert_eq!(c.points, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 1e-3)]);
    }

    #[test]
    fn truncated_binary() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
                          property float x\nproperty float y\nproperty float z\nend_header\n"
            .to_vec();
        bytes.extend([0u8; 14]);
        assert!(matches!(
            parse_cloud::<f64, _>(Cursor::new(bytes), CloudFormat::Ply),
            Err(CloudError::ParseError { .. })
        ));
    }

    #[test]
    fn large_ply_loads_without_loss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.ply");
        let pts: Vec<_> = (0..30_500)
            .map(|i| Vec3::new(i as f64 * 0.001, (i % 97) as f64, -(i as f64).sqrt()))
            .collect();
        let cloud = PointCloud::new(pts, Vec3::new(0.0, 0.25, 0.0));
        write_ply(&path, &cloud).unwrap();
        let back: PointCloud<f64> = load_cloud(&path, CloudFormat::Ply).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn oriented_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.ply");
        let pts = vec![OrientedPoint {
            position: Vec3::new(0.1, 0.2, 0.3),
            normal: Vec3::new(0.0, 0.6, 0.8),
        }];
        write_oriented_ply(&path, &pts, Vec3::new(0.0, 0.0, 9.0)).unwrap();
        let (back, origin) = load_oriented_ply::<f64>(&path).unwrap();
        assert_eq!(back, pts);
        assert_eq!(origin, Vec3::new(0.0, 0.0, 9.0));
    }
}
