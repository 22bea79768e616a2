//! Continuous objects: box-union domains with tagged boundaries, unit
//! normals, hyperrectangles, cylinders, balls, and exact half-space clipping.

mod clip;
mod domain;
mod shapes;

pub(crate) use clip::to_f64;
pub use clip::{
    clipped_measure, halfspace_clip, halfspace_clip_exact, FacetClass, SurfaceFacet, SurfaceOrigin,
    SurfaceSet,
};
pub use domain::{
    format_rational, make_box_domain, parse_rational, unit_cube_domain, Domain, FaceId, FaceTag,
    Facet, RBox,
};
pub use shapes::{
    cyl, dot, norm, unit_ball_volume, Ball, Cylinder, Hyperrectangle, UnitVector, GEOM_TOL,
};
