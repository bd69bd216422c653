//! Native text format and legacy ASCII VTK import/export.
//!
//! Native layout:
//!
//! ```text
//! MESHFIT v1
//! # optional comment / metadata lines
//! NODES <n>
//! x y z                      (n lines)
//! HEX8 <m>
//! i0 i1 i2 i3 i4 i5 i6 i7    (m lines, zero-based)
//! FACETS <k>
//! i0 i1 i2 i3                (k lines)
//! NODESET <name> <count>
//! indices...                 (whitespace separated, any line breaks)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Mesh, MeshError, Vec3};

pub const NATIVE_HEADER: &str = "MESHFIT v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Native,
    VtkLegacy,
}

impl MeshFormat {
    /// Guesses the format from a file extension (`.vtk` -> legacy VTK).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("vtk") => MeshFormat::VtkLegacy,
            _ => MeshFormat::Native,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(MeshFormat::Native),
            "vtk" | "vtk_legacy" => Ok(MeshFormat::VtkLegacy),
            other => Err(format!("unknown mesh format '{other}' (native|vtk)")),
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Native => parse_native(&text),
        MeshFormat::VtkLegacy => parse_vtk(&text),
    }
}

pub fn save_mesh(mesh: &Mesh, path: &Path, format: MeshFormat) -> Result<(), MeshError> {
    let text = match format {
        MeshFormat::Native => write_native(mesh),
        MeshFormat::VtkLegacy => write_vtk(mesh, &[]),
    };
    fs::write(path, text)?;
    Ok(())
}

/// Whitespace tokens tagged with their 1-based line number.
struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(lines: impl Iterator<Item = (usize, &'a str)>) -> Self {
        let items = lines
            .flat_map(|(n, l)| l.split_whitespace().map(move |t| (n, t)))
            .collect();
        Tokens { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or(self.items.last())
            .map_or(0, |t| t.0)
    }

    fn err(&self, msg: impl Into<String>) -> MeshError {
        MeshError::Parse {
            line: self.line(),
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn next(&mut self, what: &str) -> Result<&'a str, MeshError> {
        let tok = self
            .items
            .get(self.pos)
            .map(|t| t.1)
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn parse<T: FromStr>(&mut self, what: &str) -> Result<T, MeshError> {
        let tok = self.next(what)?;
        tok.parse().map_err(|_| {
            self.pos -= 1;
            self.err(format!("expected {what}, found '{tok}'"))
        })
    }

    fn keyword(&mut self, kw: &str) -> Result<(), MeshError> {
        let tok = self.next(kw)?;
        if !tok.eq_ignore_ascii_case(kw) {
            self.pos -= 1;
            return Err(self.err(format!("expected '{kw}', found '{tok}'")));
        }
        Ok(())
    }

    fn point(&mut self) -> Result<Vec3, MeshError> {
        Ok(Vec3::new(
            self.parse("x coordinate")?,
            self.parse("y coordinate")?,
            self.parse("z coordinate")?,
        ))
    }

    fn indices<const N: usize>(&mut self, what: &str) -> Result<[usize; N], MeshError> {
        let mut out = [0; N];
        for v in &mut out {
            *v = self.parse(what)?;
        }
        Ok(out)
    }
}

pub fn parse_native(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let header = lines.find(|(_, l)| !l.trim().is_empty());
    match header {
        Some((_, l)) if l.trim() == NATIVE_HEADER => {}
        Some((n, l)) => {
            return Err(MeshError::Parse {
                line: n,
                msg: format!("expected header '{NATIVE_HEADER}', found '{}'", l.trim()),
            })
        }
        None => {
            return Err(MeshError::Parse {
                line: 0,
                msg: "empty file".into(),
            })
        }
    }
    let mut metadata = Vec::new();
    let body = lines.filter(|(_, l)| {
        let t = l.trim_start();
        if let Some(c) = t.strip_prefix('#') {
            metadata.push(c.trim().to_string());
            false
        } else {
            true
        }
    });
    let mut tok = Tokens::new(body);

    tok.keyword("NODES")?;
    let n: usize = tok.parse("node count")?;
    let nodes = (0..n).map(|_| tok.point()).collect::<Result<Vec<_>, _>>()?;

    tok.keyword("HEX8")?;
    let m: usize = tok.parse("element count")?;
    let elements = (0..m)
        .map(|_| tok.indices::<8>("node index"))
        .collect::<Result<Vec<_>, _>>()?;

    let mut boundary_facets = Vec::new();
    let mut node_sets = BTreeMap::new();
    while let Some(kw) = tok.peek() {
        match kw {
            "FACETS" => {
                tok.keyword("FACETS")?;
                let k: usize = tok.parse("facet count")?;
                boundary_facets = (0..k)
                    .map(|_| tok.indices::<4>("facet node index"))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            "NODESET" => {
                tok.keyword("NODESET")?;
                let name = tok.next("node set name")?.to_string();
                let count: usize = tok.parse("node set size")?;
                let set = (0..count)
                    .map(|_| tok.parse::<usize>("node index"))
                    .collect::<Result<Vec<_>, _>>()?;
                node_sets.insert(name, set);
            }
            other => return Err(tok.err(format!("unexpected token '{other}'"))),
        }
    }
    let mut mesh = Mesh::new(nodes, elements, boundary_facets, node_sets)?;
    mesh.metadata = metadata;
    Ok(mesh)
}

pub fn write_native(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{NATIVE_HEADER}").unwrap();
    for m in &mesh.metadata {
        writeln!(s, "# {m}").unwrap();
    }
    writeln!(s, "NODES {}", mesh.nodes.len()).unwrap();
    for p in &mesh.nodes {
        // Debug formatting of f64 is the shortest round-trip representation.
        writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z).unwrap();
    }
    writeln!(s, "HEX8 {}", mesh.elements.len()).unwrap();
    for e in &mesh.elements {
        writeln!(s, "{}", join(e)).unwrap();
    }
    writeln!(s, "FACETS {}", mesh.boundary_facets.len()).unwrap();
    for f in &mesh.boundary_facets {
        writeln!(s, "{}", join(f)).unwrap();
    }
    for (name, set) in &mesh.node_sets {
        writeln!(s, "NODESET {name} {}", set.len()).unwrap();
        for chunk in set.chunks(12) {
            writeln!(s, "{}", join(chunk)).unwrap();
        }
    }
    s
}

fn join(ids: &[usize]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Legacy ASCII VTK unstructured grid with optional per-cell scalar arrays.
pub fn write_vtk(mesh: &Mesh, cell_data: &[(&str, &[f64])]) -> String {
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "meshfit hex8 mesh").unwrap();
    writeln!(s, "ASCII").unwrap();
    writeln!(s, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.nodes.len()).unwrap();
    for p in &mesh.nodes {
        writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z).unwrap();
    }
    let m = mesh.elements.len();
    writeln!(s, "CELLS {} {}", m, 9 * m).unwrap();
    for e in &mesh.elements {
        writeln!(s, "8 {}", join(e)).unwrap();
    }
    writeln!(s, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        writeln!(s, "12").unwrap();
    }
    if !cell_data.is_empty() {
        writeln!(s, "CELL_DATA {m}").unwrap();
        for (name, values) in cell_data {
            writeln!(s, "SCALARS {name} double 1").unwrap();
            writeln!(s, "LOOKUP_TABLE default").unwrap();
            for v in values.iter() {
                writeln!(s, "{v:?}").unwrap();
            }
        }
    }
    s
}

pub fn parse_vtk(text: &str) -> Result<Mesh, MeshError> {
    // The first two lines (version, title) are free-form.
    let mut tok = Tokens::new(text.lines().enumerate().skip(2).map(|(i, l)| (i + 1, l)));
    tok.keyword("ASCII")?;
    tok.keyword("DATASET")?;
    tok.keyword("UNSTRUCTURED_GRID")?;
    tok.keyword("POINTS")?;
    let n: usize = tok.parse("point count")?;
    tok.next("point data type")?;
    let nodes = (0..n).map(|_| tok.point()).collect::<Result<Vec<_>, _>>()?;
    tok.keyword("CELLS")?;
    let m: usize = tok.parse("cell count")?;
    let _size: usize = tok.parse("cell list size")?;
    let mut elements = Vec::with_capacity(m);
    for c in 0..m {
        let k: usize = tok.parse("cell vertex count")?;
        if k != 8 {
            return Err(tok.err(format!("cell {c} has {k} vertices; only hex8 is supported")));
        }
        elements.push(tok.indices::<8>("cell vertex index")?);
    }
    tok.keyword("CELL_TYPES")?;
    let mt: usize = tok.parse("cell type count")?;
    if mt != m {
        return Err(tok.err(format!("CELL_TYPES count {mt} differs from CELLS count {m}")));
    }
    for c in 0..m {
        let t: u32 = tok.parse("cell type")?;
        if t != 12 {
            return Err(tok.err(format!("cell {c} has VTK type {t}; only 12 (hexahedron) is supported")));
        }
    }
    Mesh::from_elements(nodes, elements)
}
