//! Deposit-loan kinetic Lotka-Volterra system: moment ODEs, agent Monte Carlo,
//! Fokker-Planck solver and inequality measures.

pub mod density;
pub mod fp;
pub mod grid;
pub mod inequality;
pub mod mc;
pub mod ode;
pub mod params;
pub mod special;
pub mod stats;

pub use density::{Analytic, DensityShape, ShapeError};
pub use grid::{GridDensity, Mesh1D, MeshError};
pub use params::{
    validate, InitialConditions, ModelParams, ParamError, ParamWarning, ParamsRecord, Risk,
    RiskMode, Species, Validated, ValidationErrors,
};
