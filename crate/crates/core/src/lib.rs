//! Spin-resonance toolkit for Ce3+ ions in garnet hosts.
//!
//! The crate models a single Kramers doublet with a strongly anisotropic
//! g-tensor sitting on one of the six magnetically inequivalent dodecahedral
//! sites of a cubic garnet. On top of that it provides:
//!
//! - [`crystal`]: site frames, effective g-factors, lab-frame g-matrices
//! - [`spectrum`]: transition frequencies, ODMR spectra, Zeeman sweeps
//! - [`pumping`]: rate-equation model of optical spin pumping
//! - [`dynamics`]: pulsed two-level simulations under classical dephasing
//! - [`cluster`]: exact evolution of small like-spin dipolar clusters
//! - [`fitting`]: Levenberg-Marquardt fits of decay/oscillation models
//!
//! Units are MHz for frequencies, ns for times, gauss for fields and nm for
//! distances throughout. Frequencies are cycle frequencies (not angular), so
//! a phase advances by `2*pi*f*t*1e-3` radians for `f` in MHz and `t` in ns.


pub mod cluster;
pub mod constants;
pub mod crystal;
pub mod dynamics;

mod error;

pub mod fitting;
pub mod pumping;
pub mod signal;
pub mod spectrum;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}
