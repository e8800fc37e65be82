//! Time-dependent routing: path-ranking invariance through the constant
//! traversal cost LP, lower and upper bounds from a less congested auxiliary
//! graph, and an exact branch-and-bound for the time-dependent TSP.

pub mod atsp;
pub mod bnb;
pub mod bounds;
pub mod ctcp;
pub mod instgen;
pub mod omega;
pub mod pwl;
pub mod simplex;
pub mod tdgraph;

pub use pwl::{PwlError, PwlFunction, StepFunction, TravelTime};
pub use tdgraph::{Arc, GraphError, TdGraph, Vertex};
