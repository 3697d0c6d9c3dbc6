//! Random walks with geodesic-ball steps on a cusped surface of revolution:
//! operator discretisation, spectra, functionals and Monte Carlo mixing.

pub mod cli;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod operator;
pub mod quadrature;
pub mod spectral;
pub mod tempered;

pub use error::{Error, Result};
pub use geometry::{ball_half_width, ball_volume, overlap_threshold, BallGeometry, BallSlice, CuspProfile};
