//! ASCII PLY and ASCII STL readers and writers.
//!
//! Clouds are written as PLY with `x y z` and, when present, `nx ny nz`
//! vertex properties. Meshes read from PLY use the `vertex_indices` list of
//! the `face` element; polygons with more than three corners are fanned.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{PointCloud, TriangleMesh, Vec3};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

fn write_string(path: &Path, s: &str) -> Result<(), IoError> {
    fs::write(path, s).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

#[derive(Debug)]
enum Property {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Default)]
struct PlyData {
    vertices: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    faces: Vec<Vec<usize>>,
}

const SCALAR_TYPES: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16",
    "uint16", "int32", "uint32", "float32", "float64",
];

fn parse_ply(text: &str) -> Result<PlyData, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "unterminated header"))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(parse_err(ln, "only 'format ascii 1.0' is supported"));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(ln, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(ln, "element without valid count"))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| parse_err(ln, "property before element"))?;
                let t: Vec<&str> = tok.collect();
                let prop = match t.as_slice() {
                    ["list", c, v, name] if SCALAR_TYPES.contains(c) && SCALAR_TYPES.contains(v) => {
                        Property::List(name.to_string())
                    }
                    [ty, name] if SCALAR_TYPES.contains(ty) => Property::Scalar(name.to_string()),
                    _ => return Err(parse_err(ln, format!("bad property line '{line}'"))),
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(parse_err(ln, format!("unknown header keyword '{other}'"))),
        }
    }
    if !saw_format {
        return Err(parse_err(0, "missing format line"));
    }

    let mut data = PlyData::default();
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    for el in &elements {
        let scalar_idx = |name: &str| {
            el.props.iter().position(|p| matches!(p, Property::Scalar(n) if n == name))
        };
        let xyz = [scalar_idx("x"), scalar_idx("y"), scalar_idx("z")];
        let nxyz = [scalar_idx("nx"), scalar_idx("ny"), scalar_idx("nz")];
        let has_normals = nxyz.iter().all(Option::is_some);
        if el.name == "vertex" && has_normals {
            data.normals = Some(Vec::with_capacity(el.count));
        }
        for _ in 0..el.count {
            let (ln, line) = body.next().ok_or_else(|| parse_err(0, format!("truncated '{}' data", el.name)))?;
            let mut toks = line.split_whitespace();
            let mut values: Vec<f64> = Vec::with_capacity(el.props.len());
            let mut list: Option<Vec<usize>> = None;
            for p in &el.props {
                match p {
                    Property::Scalar(_) => {
                        let v = toks
                            .next()
                            .and_then(|s| s.parse::<f64>().ok())
                            .ok_or_else(|| parse_err(ln, "bad scalar value"))?;
                        values.push(v);
                    }
                    Property::List(name) => {
                        let n: usize = toks
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| parse_err(ln, "bad list count"))?;
                        let items = (0..n)
                            .map(|_| toks.next().and_then(|s| s.parse::<usize>().ok()))
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| parse_err(ln, "bad list item"))?;
                        if name == "vertex_indices" || name == "vertex_index" {
                            list = Some(items);
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if toks.next().is_some() {
                return Err(parse_err(ln, "trailing values"));
            }
            if el.name == "vertex" {
                let get = |i: Option<usize>| i.map(|i| values[i]).ok_or_else(|| parse_err(ln, "vertex lacks x/y/z"));
                let p = Vec3::new(get(xyz[0])?, get(xyz[1])?, get(xyz[2])?);
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(parse_err(ln, "non-finite coordinate"));
                }
                data.vertices.push(p);
                if let Some(ns) = data.normals.as_mut() {
                    let n = Vec3::new(get(nxyz[0])?, get(nxyz[1])?, get(nxyz[2])?);
                    ns.push(n);
                }
            } else if el.name == "face" {
                data.faces.push(list.ok_or_else(|| parse_err(ln, "face lacks vertex_indices"))?);
            }
        }
    }
    Ok(data)
}

/// Reads an ASCII PLY point cloud. Normals are kept when `nx ny nz` are present.
pub fn read_ply_cloud(path: &Path) -> Result<PointCloud, IoError> {
    parse_ply_cloud(&read_to_string(path)?)
}

pub fn parse_ply_cloud(text: &str) -> Result<PointCloud, IoError> {
    let data = parse_ply(text)?;
    let normals = data.normals.map(|ns| {
        ns.into_iter().map(|n| if n.norm() > 0.0 { n.normalize() } else { n }).collect()
    });
    Ok(PointCloud { points: data.vertices, normals })
}

pub fn format_ply_cloud(cloud: &PointCloud) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.normals.is_some() {
        s.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{:.4} {:.4} {:.4}", p.x, p.y, p.z);
        if let Some(ns) = &cloud.normals {
            let n = ns[i];
            let _ = write!(s, " {:.6} {:.6} {:.6}", n.x, n.y, n.z);
        }
        s.push('\n');
    }
    s
}

pub fn write_ply_cloud(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    write_string(path, &format_ply_cloud(cloud))
}

/// Reads a mesh from ASCII PLY or ASCII STL, chosen by file extension.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh, IoError> {
    let text = read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("stl") => parse_stl(&text),
        _ => parse_ply_mesh(&text),
    }
}

pub fn parse_ply_mesh(text: &str) -> Result<TriangleMesh, IoError> {
    let data = parse_ply(text)?;
    let mut tris = Vec::new();
    for f in &data.faces {
        if f.len() < 3 {
            return Err(parse_err(0, "face with fewer than 3 vertices"));
        }
        for k in 1..f.len() - 1 {
            tris.push([f[0], f[k], f[k + 1]]);
        }
    }
    TriangleMesh::new(data.vertices, tris).map_err(|m| parse_err(0, m))
}

pub fn format_ply_mesh(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    let _ = writeln!(s, "element face {}", mesh.triangles.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.6} {:.6} {:.6}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_ply_mesh(path: &Path, mesh: &TriangleMesh) -> Result<(), IoError> {
    write_string(path, &format_ply_mesh(mesh))
}

/// ASCII STL. Vertices are not welded; each facet contributes three.
pub fn parse_stl(text: &str) -> Result<TriangleMesh, IoError> {
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut saw_solid = false;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("solid") => saw_solid = true,
            Some("vertex") => {
                let c: Vec<f64> = tok.map(|t| t.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| parse_err(ln, "bad vertex"))?;
                if c.len() != 3 {
                    return Err(parse_err(ln, "vertex needs 3 coordinates"));
                }
                pending.push(vertices.len());
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("endloop") => {
                if pending.len() != 3 {
                    return Err(parse_err(ln, "facet loop must have 3 vertices"));
                }
                tris.push([pending[0], pending[1], pending[2]]);
                pending.clear();
            }
            Some("facet") | Some("outer") | Some("endfacet") | Some("endsolid") | None => {}
            Some(other) => return Err(parse_err(ln, format!("unexpected '{other}'"))),
        }
    }
    if !saw_solid {
        return Err(parse_err(1, "missing 'solid'"));
    }
    TriangleMesh::new(vertices, tris).map_err(|m| parse_err(0, m))
}

pub fn format_stl(mesh: &TriangleMesh, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "solid {name}");
    for i in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(i);
        let n = (b - a).cross(&(c - a)).normalize();
        let _ = writeln!(s, "  facet normal {:.6} {:.6} {:.6}\n    outer loop", n.x, n.y, n.z);
        for v in [a, b, c] {
            let _ = writeln!(s, "      vertex {:.6} {:.6} {:.6}", v.x, v.y, v.z);
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(s, "endsolid {name}");
    s
}
