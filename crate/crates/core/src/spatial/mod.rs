//! Rasters, basin masks and spatial interpolation.

pub mod grid;
pub mod interp;
pub mod polygon;

pub use grid::{GridField, GridGeometry, NODATA};
pub use interp::{
    grid_rmse, interpolate_metal, interpolation_cv, interpolation_report, predict_hpi_grid,
    CoordModel, GridRmse, InterpolationReport, RfSpec,
};
pub use polygon::Polygon;
