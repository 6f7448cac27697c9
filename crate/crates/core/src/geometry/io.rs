use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::SurfaceMesh;
use crate::{Error, Point, Result};

/// Reads the ASCII format: `nv nt`, then nv lines `x y z`, then nt lines `i j k`
/// (0-based, counterclockwise seen from outside). Blank lines and `#` comments are skipped.
pub fn read_triangle_soup<R: BufRead>(reader: R) -> Result<SurfaceMesh> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(n, l)| l.map(|s| (n + 1, s)))
        .filter(|r| match r {
            Ok((_, s)) => {
                let t = s.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        });
    let mut next_fields = |what: &str, count: usize| -> Result<(usize, Vec<String>)> {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of file while reading {what}")))??;
        let fields: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if fields.len() != count {
            return Err(Error::Parse(format!(
                "line {line_no}: expected {count} fields for {what}, found {}",
                fields.len()
            )));
        }
        Ok((line_no, fields))
    };
    let parse_usize = |line: usize, s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Parse(format!("line {line}: '{s}' is not a non-negative integer")))
    };
    let (line, header) = next_fields("header", 2)?;
    let nv = parse_usize(line, &header[0])?;
    let nt = parse_usize(line, &header[1])?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = next_fields("vertex", 3)?;
        let mut xyz = [0.0; 3];
        for (d, s) in f.iter().enumerate() {
            xyz[d] = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: '{s}' is not a number")))?;
        }
        vertices.push(Vector3::from(xyz));
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = next_fields("triangle", 3)?;
        triangles.push([
            parse_usize(line, &f[0])?,
            parse_usize(line, &f[1])?,
            parse_usize(line, &f[2])?,
        ]);
    }
    SurfaceMesh::new(vertices, triangles)
}

pub fn write_triangle_soup<W: Write>(mesh: &SurfaceMesh, mut writer: W) -> Result<()> {
    writeln!(writer, "{} {}", mesh.vertices().len(), mesh.triangles().len())?;
    for v in mesh.vertices() {
        writeln!(writer, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(writer, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// Reads binary or ASCII STL. Coincident vertices are welded and facet normals are
/// ignored; orientation comes from the vertex winding.
pub fn read_stl<R: Read + Seek>(reader: &mut R) -> Result<SurfaceMesh> {
    let indexed = stl_io::read_stl(reader).map_err(|e| Error::Parse(format!("STL: {e}")))?;
    let vertices: Vec<Point> = indexed
        .vertices
        .iter()
        .map(|v| Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64))
        .collect();
    let triangles = indexed.faces.iter().map(|f| f.vertices).collect();
    SurfaceMesh::new(vertices, triangles)
}

/// Dispatches on the extension: `.stl` is read as STL, anything else as the ASCII format.
pub fn read_mesh_file(path: &Path) -> Result<SurfaceMesh> {
    let file = File::open(path)?;
    let is_stl = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("stl"));
    if is_stl {
        let mut reader = BufReader::new(file);
        read_stl(&mut reader)
    } else {
        read_triangle_soup(BufReader::new(file))
    }
}
