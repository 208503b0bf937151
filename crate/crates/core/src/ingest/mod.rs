//! Building metric-measure spaces from raster images, point lists and
//! triangle meshes.

mod fps;
mod image;
mod mesh;

pub use fps::{farthest_point_sample, farthest_point_sample_from};
pub use image::{
    image_to_space, parse_pgm, points_to_space, raster_to_space, read_pgm, read_points_csv,
    GrayImage,
};
pub use mesh::{
    dijkstra_distances, mesh_data_to_space, mesh_to_graph, mesh_to_space, parse_off, read_off,
    GeodesicDistances, Mesh, WeightedGraph,
};
