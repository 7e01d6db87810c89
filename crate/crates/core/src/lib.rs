//! Adapting conventional image processing to equirectangular 360-degree
//! frames.
//!
//! Two strategies are supported:
//!
//! * **Viewport-centric**: cover the sphere with overlapping square
//!   viewports ([`tessellation`]), render each one rectilinearly
//!   ([`projection::render_viewport`]), process them independently, then
//!   fuse the results back, either by accumulator/weight blending
//!   ([`projection::BlendAccumulator`]) or by lifting detections and running
//!   seam-aware NMS ([`fusion`]).
//! * **Image-centric**: process the whole frame, correcting for the
//!   projection: cyclic-longitude NMS ([`fusion::spherical_nms`]) and a blur
//!   measure whose edge widths are compensated for latitude stretch
//!   ([`blur_metric`]).

pub mod blur_metric;
pub mod error;
pub mod fusion;
pub mod projection;
pub mod sphere_geom;
pub mod synth;
pub mod tessellation;

pub use error::{Error, Result};
pub use fusion::{Detection, ViewportDetection};
pub use projection::{BlendAccumulator, EquirectImage, ViewportImage};
pub use sphere_geom::{EquirectCoord, SphereDir, UnitVec3, ViewportCoord};
pub use tessellation::{Tessellation, Viewport};
