use std::fmt::Write as _;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use super::mesh::{BoundaryFacet, Mesh};
use super::{GeometryError, Point};

/// Serialize a mesh as whitespace-separated text.
///
/// Layout: a header `dim nv nc nb`, then one line per vertex, one per cell and
/// one per boundary facet (`i j nx ny measure` in 2D, `i nx ny measure` in 1D).
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let dim = mesh.dim();
    writeln!(s, "{} {} {} {}", dim, mesh.num_vertices(), mesh.num_cells(), mesh.facets().len()).unwrap();
    for v in mesh.vertices() {
        if dim == 1 {
            writeln!(s, "{:.16e}", v[0]).unwrap();
        } else {
            writeln!(s, "{:.16e} {:.16e}", v[0], v[1]).unwrap();
        }
    }
    for c in mesh.cells() {
        let line: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    for f in mesh.facets() {
        if dim == 1 {
            write!(s, "{}", f.nodes[0]).unwrap();
        } else {
            write!(s, "{} {}", f.nodes[0], f.nodes[1]).unwrap();
        }
        writeln!(s, " {:.16e} {:.16e} {:.16e}", f.normal[0], f.normal[1], f.measure).unwrap();
    }
    s
}

impl Mesh {
    /// SHA-256 of the text serialization, as lowercase hex.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(mesh_to_string(self).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<(), GeometryError> {
    out.write_all(mesh_to_string(mesh).as_bytes())?;
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh, GeometryError> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = |what: &str| -> Result<(usize, Vec<String>), GeometryError> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l.split_whitespace().map(str::to_owned).collect())),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(GeometryError::Parse { line: 0, message: format!("unexpected end of file, expected {what}") }),
        }
    };
    let (n, header) = next("header")?;
    let header: Vec<usize> = parse_all(n, &header)?;
    let [dim, nv, nc, nb] = header[..] else {
        return Err(GeometryError::Parse { line: n, message: "header must be `dim nv nc nb`".into() });
    };
    if dim != 1 && dim != 2 {
        return Err(GeometryError::Parse { line: n, message: format!("dimension {dim} is not 1 or 2") });
    }
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, tok) = next("vertex")?;
        let x: Vec<f64> = parse_all(n, &tok)?;
        expect_len(n, &x, dim)?;
        vertices.push(if dim == 1 { [x[0], 0.0] } else { [x[0], x[1]] });
    }
    let mut simplices = Vec::with_capacity(nc * (dim + 1));
    for _ in 0..nc {
        let (n, tok) = next("cell")?;
        let idx: Vec<usize> = parse_all(n, &tok)?;
        expect_len(n, &idx, dim + 1)?;
        simplices.extend(idx);
    }
    let mut facets = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (n, tok) = next("facet")?;
        expect_len(n, &tok, dim + 3)?;
        let idx: Vec<usize> = parse_all(n, &tok[..dim])?;
        let vals: Vec<f64> = parse_all(n, &tok[dim..])?;
        let nodes = if dim == 1 { [idx[0], idx[0]] } else { [idx[0], idx[1]] };
        facets.push(BoundaryFacet { nodes, normal: [vals[0], vals[1]], measure: vals[2] });
    }
    Mesh::from_parts(dim, vertices, simplices, facets)
}

fn parse_all<T: std::str::FromStr>(line: usize, tok: &[String]) -> Result<Vec<T>, GeometryError> {
    tok.iter()
        .map(|t| t.parse::<T>().map_err(|_| GeometryError::Parse { line, message: format!("cannot parse `{t}`") }))
        .collect()
}

fn expect_len<T>(line: usize, v: &[T], n: usize) -> Result<(), GeometryError> {
    if v.len() == n {
        Ok(())
    } else {
        Err(GeometryError::Parse { line, message: format!("expected {n} fields, found {}", v.len()) })
    }
}
