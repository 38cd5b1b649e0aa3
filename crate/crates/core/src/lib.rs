//! Grid-free stochastic solver for Laplace and Poisson Dirichlet problems.
//!
//! Walk-on-Spheres paths discretize Brownian motion spatially; a single
//! feed-forward network with a solution head and a gradient head is trained
//! so that its path-accumulated boundary prediction matches the sampled
//! boundary values. After training, the network answers solution and gradient
//! queries anywhere in the domain in constant time. Classic WoS, a
//! WoS-driven regression network, and a finite-difference solver are included
//! as baselines and references.

pub mod error;
pub mod fdm;
pub mod fields;
pub mod geometry;
pub mod greens;
pub mod nn;
pub mod problems;
pub mod rng;
pub mod trainer;
pub mod wos;

pub use error::{Error, Result};
pub use geometry::{Domain, Point};
pub use problems::PdeProblem;
