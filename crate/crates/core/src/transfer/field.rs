//! Field samples, their CSV form, and element quadrature points.

use std::io::{Read, Write};
use std::path::Path;

use super::tensor::Mat3;
use super::TransferError;
use crate::mesh::{Mesh, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValues {
    Scalar(Vec<f64>),
    Tensor(Vec<Mat3>),
}

impl FieldValues {
    pub fn len(&self) -> usize {
        match self {
            FieldValues::Scalar(v) => v.len(),
            FieldValues::Tensor(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FieldValues::Scalar(_) => "scalar",
            FieldValues::Tensor(_) => "tensor",
        }
    }
}

/// Scattered point/value pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSamples {
    pub points: Vec<Vec3>,
    pub values: FieldValues,
}

const TENSOR_COLUMNS: [&str; 9] = ["T11", "T12", "T13", "T21", "T22", "T23", "T31", "T32", "T33"];

impl FieldSamples {
    pub fn new(points: Vec<Vec3>, values: FieldValues) -> Result<Self, TransferError> {
        if points.len() != values.len() {
            return Err(TransferError::Invalid(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        Ok(FieldSamples { points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with columns `x,y,z,value` or `x,y,z,T11..T33` (row-major).
    pub fn read_csv<R: Read>(r: R) -> Result<Self, TransferError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let tensor = match header.as_slice() {
            [x, y, z, v] if [x, y, z] == ["x", "y", "z"] && v == "value" => false,
            [x, y, z, rest @ ..] if [x, y, z] == ["x", "y", "z"] && rest.iter().eq(TENSOR_COLUMNS.iter()) => true,
            _ => {
                return Err(TransferError::Invalid(format!(
                    "field header must be x,y,z,value or x,y,z,T11..T33, got {}",
                    header.join(",")
                )))
            }
        };
        let mut points = Vec::new();
        let mut scalars = Vec::new();
        let mut tensors = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| TransferError::Invalid(format!("field row {}: {e}", row + 1)))?;
            points.push(Vec3::new(nums[0], nums[1], nums[2]));
            if tensor {
                tensors.push(Mat3::from_row_slice(&nums[3..12]));
            } else {
                scalars.push(nums[3]);
            }
        }
        let values = if tensor {
            FieldValues::Tensor(tensors)
        } else {
            FieldValues::Scalar(scalars)
        };
        FieldSamples::new(points, values)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TransferError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["x", "y", "z"];
        match &self.values {
            FieldValues::Scalar(_) => header.push("value"),
            FieldValues::Tensor(_) => header.extend(TENSOR_COLUMNS),
        }
        out.write_record(&header)?;
        for (j, x) in self.points.iter().enumerate() {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            match &self.values {
                FieldValues::Scalar(v) => rec.push(v[j].to_string()),
                FieldValues::Tensor(t) => {
                    rec.extend((0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| t[j][(r, c)].to_string()))
                }
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TransferError> {
        let file = std::fs::File::open(path).map_err(|source| TransferError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<(), TransferError> {
        let file = std::fs::File::create(path).map_err(|source| TransferError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Where a field lives, which decides where it is queried on the new mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldLocation {
    Nodes,
    Quadrature,
}

impl FieldLocation {
    /// Quadrature when the samples are exactly the old mesh's quadrature
    /// points (to `1e-9` of the mesh diameter), otherwise nodes.
    pub fn detect(old: &Mesh, points: &[Vec3]) -> Self {
        let tol = 1e-9 * old.diameter().max(f64::MIN_POSITIVE);
        if points.len() == 8 * old.num_elements()
            && gauss_points(old).iter().zip(points).all(|(a, b)| (a - b).norm() <= tol)
        {
            FieldLocation::Quadrature
        } else {
            FieldLocation::Nodes
        }
    }

    pub fn query_points(self, mesh: &Mesh) -> Vec<Vec3> {
        match self {
            FieldLocation::Nodes => mesh.nodes.clone(),
            FieldLocation::Quadrature => gauss_points(mesh),
        }
    }
}

/// 2x2x2 Gauss points of every element, eight per element with the first
/// natural coordinate varying fastest.
pub fn gauss_points(mesh: &Mesh) -> Vec<Vec3> {
    const G: f64 = 0.577_350_269_189_625_8;
    const CORNER: [[f64; 3]; 8] = [
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ];
    let mut out = Vec::with_capacity(8 * mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let x = mesh.element_coords(e);
        for g in 0..8 {
            let xi = [g & 1, (g >> 1) & 1, (g >> 2) & 1].map(|b| if b == 0 { -G } else { G });
            out.push((0..8).fold(Vec3::zeros(), |acc, a| {
                let n: f64 = (0..3).map(|d| 0.5 * (1.0 + CORNER[a][d] * xi[d])).product();
                acc + x[a] * n
            }));
        }
    }
    out
}
