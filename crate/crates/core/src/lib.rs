pub mod baseline;
pub mod error;
pub mod geom;
pub mod gravity;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod noise;
pub mod octree;
pub mod params;
pub mod pipeline;
pub mod prefilter;
pub mod synthetic;

pub use error::{Error, Result};
pub use geom::{bounding_box, centroid, Aabb, Point3, PointCloud};
pub use params::DenoiseParams;
