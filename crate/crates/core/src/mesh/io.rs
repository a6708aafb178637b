//! Line-oriented text formats for meshes and per-vertex scalar fields.
//!
//! ```text
//! FBMS-MESH 1
//! v 0 0 0
//! v 1 0 0
//! v 0 1 0
//! f 0 1 2
//! ```
//!
//! Fields use the header `FBMS-FIELD 1` followed by one `s value` line per
//! vertex.

use super::{MeshError, TriSurfaceMesh};
use crate::scalar::{lit, to_f64, Real};
use nalgebra::Point3;
use std::fmt::Write as _;
use std::path::Path;

pub const MESH_HEADER: &str = "FBMS-MESH 1";
pub const FIELD_HEADER: &str = "FBMS-FIELD 1";

#[derive(Debug, thiserror::Error)]
pub enum MeshIoError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn read_text(path: &Path) -> Result<String, MeshIoError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => MeshIoError::NotFound(path.display().to_string()),
        _ => MeshIoError::Io {
            path: path.display().to_string(),
            source: e,
        },
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), MeshIoError> {
    std::fs::write(path, text).map_err(|e| MeshIoError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshIoError {
    MeshIoError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_fields<V: std::str::FromStr>(line: usize, parts: &[&str], n: usize) -> Result<Vec<V>, MeshIoError> {
    if parts.len() != n {
        return Err(parse_err(line, format!("expected {n} values, found {}", parts.len())));
    }
    parts
        .iter()
        .map(|s| {
            s.parse::<V>()
                .map_err(|_| parse_err(line, format!("cannot parse '{s}'")))
        })
        .collect()
}

pub fn parse_mesh<T: Real>(text: &str) -> Result<TriSurfaceMesh<T>, MeshIoError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h == MESH_HEADER => {}
        Some((n, h)) => return Err(parse_err(n, format!("expected header '{MESH_HEADER}', found '{h}'"))),
        None => return Err(parse_err(0, "empty mesh file")),
    }
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, l) in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts[0] {
            "v" => {
                let c: Vec<f64> = parse_fields(n, &parts[1..], 3)?;
                vertices.push(Point3::new(lit(c[0]), lit(c[1]), lit(c[2])));
            }
            "f" => {
                let c: Vec<usize> = parse_fields(n, &parts[1..], 3)?;
                triangles.push([c[0], c[1], c[2]]);
            }
            other => return Err(parse_err(n, format!("unknown record '{other}'"))),
        }
    }
    Ok(TriSurfaceMesh::build(vertices, triangles)?)
}

pub fn format_mesh<T: Real>(mesh: &TriSurfaceMesh<T>) -> String {
    let mut s = String::new();
    writeln!(s, "{MESH_HEADER}").unwrap();
    for p in mesh.vertices() {
        // {:?} on f64 is the shortest representation that round-trips
        writeln!(s, "v {:?} {:?} {:?}", to_f64(p.x), to_f64(p.y), to_f64(p.z)).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "f {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

pub fn read_mesh<T: Real>(path: &Path) -> Result<TriSurfaceMesh<T>, MeshIoError> {
    parse_mesh(&read_text(path)?)
}

pub fn write_mesh<T: Real>(path: &Path, mesh: &TriSurfaceMesh<T>) -> Result<(), MeshIoError> {
    write_text(path, &format_mesh(mesh))
}

pub fn parse_field<T: Real>(text: &str) -> Result<Vec<T>, MeshIoError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h == FIELD_HEADER => {}
        Some((n, h)) => return Err(parse_err(n, format!("expected header '{FIELD_HEADER}', found '{h}'"))),
        None => return Err(parse_err(0, "empty field file")),
    }
    let mut out = Vec::new();
    for (n, l) in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts[0] != "s" {
            return Err(parse_err(n, format!("unknown record '{}'", parts[0])));
        }
        let v: Vec<f64> = parse_fields(n, &parts[1..], 1)?;
        out.push(lit(v[0]));
    }
    Ok(out)
}

pub fn read_field<T: Real>(path: &Path) -> Result<Vec<T>, MeshIoError> {
    parse_field(&read_text(path)?)
}

pub fn write_field<T: Real>(path: &Path, values: &[T]) -> Result<(), MeshIoError> {
    let mut s = String::new();
    writeln!(s, "{FIELD_HEADER}").unwrap();
    for v in values {
        writeln!(s, "s {:?}", to_f64(*v)).unwrap();
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn mesh_round_trip_is_exact() {
        let m = annulus(7, 2, 0.3, 1.0);
        let back: TriSurfaceMesh<f64> = parse_mesh(&format_mesh(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
    }

    #[test]
    fn reader_skips_comments_and_blank_lines() {
        let text = "# a triangle\n\nFBMS-MESH 1\nv 0 0 0\nv 1 0 0 # corner\n\nv 0 1 0\nf 0 1 2\n";
        let m: TriSurfaceMesh<f64> = parse_mesh(text).unwrap();
        assert_eq!(m.n_triangles(), 1);
    }

    #[test]
    fn malformed_records_report_line_numbers() {
        let err = parse_mesh::<f64>("FBMS-MESH 1\nv 0 0\n").unwrap_err();
        assert!(matches!(err, MeshIoError::Parse { line: 2, .. }));
        assert!(parse_mesh::<f64>("OBJ\n").is_err());
        assert!(parse_field::<f64>("FBMS-FIELD 1\ns x\n").is_err());
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = read_mesh::<f64>(Path::new("/nonexistent/missing.fbm")).unwrap_err();
        assert!(err.to_string().contains("file not found"));
    }

    #[test]
    fn field_round_trip() {
        let vals = vec![0.0, 1.5, -2.25e-7, std::f64::consts::PI];
        let text = {
            let dir = std::env::temp_dir().join(format!("fbms-field-{}", std::process::id()));
            write_field(&dir, &vals).unwrap();
            let t = std::fs::read_to_string(&dir).unwrap();
            std::fs::remove_file(&dir).ok();
            t
        };
        assert_eq!(parse_field::<f64>(&text).unwrap(), vals);
    }
}
