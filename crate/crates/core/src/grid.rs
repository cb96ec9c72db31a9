//! Uniform cell-centred meshes on [0, x_max] and densities living on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Analytic;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh needs at least 16 cells, got {0}")]
    TooFewCells(usize),
    #[error("x_max must be positive and finite, got {0}")]
    BadExtent(f64),
    #[error("density has {got} values but the mesh has {expected} cells")]
    Length { expected: usize, got: usize },
    #[error("density value {value} at cell {index} is negative or not finite")]
    BadValue { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    pub n_cells: usize,
    pub x_max: f64,
}

impl Mesh1D {
    pub fn new(n_cells: usize, x_max: f64) -> Result<Self, MeshError> {
        if n_cells < 16 {
            return Err(MeshError::TooFewCells(n_cells));
        }
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(MeshError::BadExtent(x_max));
        }
        Ok(Mesh1D { n_cells, x_max })
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.n_cells as f64
    }

    /// Left edge of cell `i`; `edge(n_cells) == x_max`.
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_max
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.edge(i)).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }
}

/// Nonnegative cell values (units 1/money) on a mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDensity {
    pub mesh: Mesh1D,
    pub values: Vec<f64>,
    pub t: f64,
}

impl GridDensity {
    pub fn new(mesh: Mesh1D, values: Vec<f64>, t: f64) -> Result<Self, MeshError> {
        if values.len() != mesh.n_cells {
            return Err(MeshError::Length { expected: mesh.n_cells, got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(MeshError::BadValue { index, value });
        }
        Ok(GridDensity { mesh, values, t })
    }

    pub fn mass(&self) -> f64 {
        crate::stats::neumaier(self.values.iter().map(|v| v * self.mesh.dx()))
    }

    /// `k`-th raw moment with the cell mass lumped at the centre.
    pub fn raw_moment(&self, k: i32) -> f64 {
        let dx = self.mesh.dx();
        crate::stats::neumaier(self.values.iter().enumerate().map(|(i, v)| v * dx * self.mesh.center(i).powi(k)))
    }

    pub fn mean(&self) -> f64 {
        self.mass_and_mean().1
    }

    /// Mass and mean in one pass.
    pub fn mass_and_mean(&self) -> (f64, f64) {
        let dx = self.mesh.dx();
        let (mut m0, mut m1) = (crate::stats::Neumaier::default(), crate::stats::Neumaier::default());
        for (i, v) in self.values.iter().enumerate() {
            m0.add(v * dx);
            m1.add(v * dx * self.mesh.center(i));
        }
        (m0.value(), m1.value() / m0.value())
    }

    /// Variance about the mean, normalised by the mass.
    pub fn variance(&self) -> f64 {
        let (mass, m) = self.mass_and_mean();
        let dx = self.mesh.dx();
        let s = crate::stats::neumaier(
            self.values.iter().enumerate().map(|(i, v)| v * dx * (self.mesh.center(i) - m).powi(2)),
        );
        s / mass
    }

    /// Analytic density projected onto the mesh: nodal values when the density is
    /// bounded at the origin, cell averages otherwise. Returns the grid and the
    /// mass of the analytic density beyond `x_max`.
    pub fn project(mesh: Mesh1D, d: &Analytic, t: f64) -> (GridDensity, f64) {
        let dx = mesh.dx();
        let values: Vec<f64> = if d.bounded_at_origin() && !matches!(d, Analytic::Uniform { .. }) {
            (0..mesh.n_cells).map(|i| d.pdf(mesh.center(i))).collect()
        } else {
            (0..mesh.n_cells)
                .map(|i| ((d.cdf(mesh.edge(i + 1)) - d.cdf(mesh.edge(i))) / dx).max(0.0))
                .collect()
        };
        let tail = d.tail_mass(mesh.x_max);
        (GridDensity { mesh, values, t }, tail)
    }

    /// Rescale to unit mass.
    pub fn normalized(mut self) -> Self {
        let m = self.mass();
        if m > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
        self
    }

    /// `sum |f - g| dx / sum |g| dx`.
    pub fn rel_l1(&self, reference: &[f64]) -> f64 {
        let num: f64 = self.values.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum();
        let den: f64 = reference.iter().map(|b| b.abs()).sum();
        num / den
    }
}
