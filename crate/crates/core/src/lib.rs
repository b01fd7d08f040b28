//! Numerical laboratory for quantized hyperbolic toral automorphisms.
//!
//! * [`dynamics`]: integer cat maps, rational orbits, periods mod `N`, holes and survivor sets.
//! * [`quantization`]: Weyl quantization of trigonometric polynomials on the torus.
//! * [`propagator`]: metaplectic quantization `B_N` of a cat map.
//! * [`spectral`]: eigendecomposition, quantum ergodicity statistics, scarred states.
//! * [`phase_space`]: coherent states and Husimi densities.
//! * [`fup`]: porosity and the discrete fractal uncertainty principle.

pub mod dynamics;
pub mod linalg;
pub mod quantization;
pub mod propagator;
pub mod phase_space;
pub mod spectral;
pub mod fup;
