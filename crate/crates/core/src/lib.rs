pub mod cli;
pub mod condsim;
pub mod covariance;
pub mod error;
pub mod exceedance;
pub mod grid;
pub mod io;
pub mod kriging;
pub mod linalg;
pub mod reml;
pub mod simstudy;
pub mod special;
