//! Transforms, differentiation, dealiasing, mode projection and quadrature on
//! the Fourier x Chebyshev tensor grid over `[0, L] x [0, 1]`.

mod field;
mod grid;
mod ops;
mod transform;

pub use field::{PhysicalField, SpectralField};
pub use grid::Grid;
pub use ops::{
    ddx1, ddx2, dealias, eval_at, l2_inner, l2_norm, laplacian, project_low_modes, to_physical,
    to_physical_unchecked, to_spectral,
};
pub use transform::Workspace;

pub(crate) use ops::{
    add_wall_deltas_row, cheb_derivative_row, cheb_second_derivative_row, validate_projection,
    wall_values_row,
};
