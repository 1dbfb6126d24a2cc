//! Legacy ASCII VTK output of element-wise (cell) data.
//!
//! Discontinuous fields are sampled at element centroids, which is enough for
//! visual inspection in ParaView or VisIt.

use std::io::Write;
use std::path::Path;

use crate::bdm::BdmField;
use crate::dg::{PiecewiseVectorField, StressField};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::postprocess::PressureField;

enum CellArray {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 2]>),
}

/// Collects named cell arrays on a mesh and writes them as an unstructured grid.
pub struct VtkWriter<'a> {
    mesh: &'a Mesh,
    arrays: Vec<(String, CellArray)>,
}

impl<'a> VtkWriter<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        Self { mesh, arrays: Vec::new() }
    }

    fn check(&self, name: &str, len: usize) -> Result<()> {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Config(format!("invalid VTK array name {name:?}")));
        }
        if self.arrays.iter().any(|(n, _)| n == name) {
            return Err(Error::Config(format!("duplicate VTK array {name}")));
        }
        if len != self.mesh.num_elements() {
            return Err(Error::Config(format!(
                "VTK array {name} has {len} entries, mesh has {} cells",
                self.mesh.num_elements()
            )));
        }
        Ok(())
    }

    pub fn scalar(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.check(name, values.len())?;
        self.arrays.push((name.to_string(), CellArray::Scalar(values)));
        Ok(self)
    }

    pub fn vector(mut self, name: &str, values: Vec<[f64; 2]>) -> Result<Self> {
        self.check(name, values.len())?;
        self.arrays.push((name.to_string(), CellArray::Vector(values)));
        Ok(self)
    }

    /// Adds `name_xx`, `name_xy`, `name_yy` sampled at centroids.
    pub fn stress(self, name: &str, sigma: &StressField) -> Result<Self> {
        let vals: Vec<_> = centroids(self.mesh).map(|(e, x)| sigma.evaluate(e, x).0).collect();
        self.scalar(&format!("{name}_xx"), vals.iter().map(|s| s[0]).collect())?
            .scalar(&format!("{name}_xy"), vals.iter().map(|s| s[1]).collect())?
            .scalar(&format!("{name}_yy"), vals.iter().map(|s| s[2]).collect())
    }

    pub fn pressure(self, name: &str, p: &PressureField) -> Result<Self> {
        let vals = centroids(self.mesh).map(|(e, x)| p.evaluate(e, x)).collect();
        self.scalar(name, vals)
    }

    pub fn velocity(self, name: &str, u: &PiecewiseVectorField) -> Result<Self> {
        let vals = centroids(self.mesh).map(|(e, x)| u.evaluate(e, x)).collect();
        self.vector(name, vals)
    }

    pub fn bdm_velocity(self, name: &str, u: &BdmField) -> Result<Self> {
        let vals = centroids(self.mesh).map(|(e, x)| u.evaluate(e, x).0).collect();
        self.vector(name, vals)
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        let m = self.mesh;
        writeln!(out, "# vtk DataFile Version 2.0")?;
        writeln!(out, "stressdg solution")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {} double", m.num_vertices())?;
        for v in m.vertices() {
            writeln!(out, "{:.17e} {:.17e} 0", v[0], v[1])?;
        }
        let n = m.num_elements();
        writeln!(out, "CELLS {n} {}", 4 * n)?;
        for t in m.triangles() {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "CELL_TYPES {n}")?;
        for _ in 0..n {
            writeln!(out, "5")?;
        }
        if !self.arrays.is_empty() {
            writeln!(out, "CELL_DATA {n}")?;
        }
        for (name, array) in &self.arrays {
            match array {
                CellArray::Scalar(v) => {
                    writeln!(out, "SCALARS {name} double 1")?;
                    writeln!(out, "LOOKUP_TABLE default")?;
                    for x in v {
                        writeln!(out, "{x:.17e}")?;
                    }
                }
                CellArray::Vector(v) => {
                    writeln!(out, "VECTORS {name} double")?;
                    for x in v {
                        writeln!(out, "{:.17e} {:.17e} 0", x[0], x[1])?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut buf = std::io::BufWriter::new(file);
        self.write(&mut buf)?;
        buf.flush()?;
        Ok(())
    }
}

fn centroids(mesh: &Mesh) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
    (0..mesh.num_elements()).map(move |e| (e, mesh.geometry(e).centroid()))
}
