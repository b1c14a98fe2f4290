//! Site geometry and g-tensor algebra.
//!
//! The dodecahedral sites of a cubic garnet split into six orientation
//! classes with D2 point symmetry. Each class carries the same principal
//! g-values but a different local frame: the local z-axes lie along the
//! three cubic <100> directions and the local x/y axes along <110>
//! directions, with the two classes sharing a z-axis having x and y
//! swapped. An external field therefore sees up to six distinct effective
//! g-factors.

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Tolerance for accepting a direction vector as normalized.
const UNIT_TOL: f64 = 1e-9;

/// Principal g-values of one Kramers doublet in its local D2 frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTensor {
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl GTensor {
    pub fn new(gx: f64, gy: f64, gz: f64) -> Result<Self> {
        if !(gx > 0.0 && gy > 0.0 && gz > 0.0) || !(gx + gy + gz).is_finite() {
            return Err(Error::invalid(format!(
                "g-values must be positive and finite, got ({gx}, {gy}, {gz})"
            )));
        }
        Ok(GTensor { gx, gy, gz })
    }
}

/// Ground-doublet g-values of Ce3+ on a dodecahedral garnet site.
impl Default for GTensor {
    fn default() -> Self {
        GTensor {
            gx: 1.87,
            gy: 0.91,
            gz: 2.74,
        }
    }
}

/// Orthonormal local frame of one site orientation class, in cubic axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteFrame {
    /// Orientation class, 1..=6.
    pub site_id: u8,
    pub x_axis: Vector3<f64>,
    pub y_axis: Vector3<f64>,
    pub z_axis: Vector3<f64>,
}

impl SiteFrame {
    /// Rotation matrix whose columns are the local axes, mapping local
    /// coordinates to cubic (lab) coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.x_axis, self.y_axis, self.z_axis])
    }
}

/// Static magnetic field: magnitude in gauss plus a unit direction in
/// cubic axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    magnitude_gauss: f64,
    direction: Vector3<f64>,
}

impl FieldSpec {
    /// `direction` need not be normalized; it must be non-zero and finite.
    pub fn new(magnitude_gauss: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(magnitude_gauss >= 0.0) || !magnitude_gauss.is_finite() {
            return Err(Error::invalid(format!(
                "field magnitude must be finite and >= 0, got {magnitude_gauss}"
            )));
        }
        let norm = direction.norm();
        if !norm.is_finite() || norm < UNIT_TOL {
            return Err(Error::invalid("field direction must be non-zero"));
        }
        Ok(FieldSpec {
            magnitude_gauss,
            direction: direction / norm,
        })
    }

    pub fn magnitude_gauss(&self) -> f64 {
        self.magnitude_gauss
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }
}

fn frame(site_id: u8, x: [f64; 3], y: [f64; 3]) -> SiteFrame {
    let x_axis = Vector3::from(x).normalize();
    let y_axis = Vector3::from(y).normalize();
    SiteFrame {
        site_id,
        x_axis,
        y_axis,
        z_axis: x_axis.cross(&y_axis),
    }
}

/// The six site orientation classes.
///
/// Classes come in pairs sharing a local z along one cubic axis with x and y
/// swapped: site 1 has x || [110], y || [-110], z || [001] and site 2 the
/// swap; sites 3-6 repeat the pattern for z along [100] and [010]. Each
/// z-axis is signed to keep the frame right-handed, which leaves all
/// g-factors unchanged.
pub fn site_frames() -> [SiteFrame; 6] {
    [
        frame(1, [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]),
        frame(2, [-1.0, 1.0, 0.0], [1.0, 1.0, 0.0]),
        frame(3, [0.0, 1.0, 1.0], [0.0, -1.0, 1.0]),
        frame(4, [0.0, -1.0, 1.0], [0.0, 1.0, 1.0]),
        frame(5, [1.0, 0.0, 1.0], [1.0, 0.0, -1.0]),
        frame(6, [1.0, 0.0, -1.0], [1.0, 0.0, 1.0]),
    ]
}

/// Fractional coordinates of the 24 dodecahedral sites in one cubic garnet
/// cell, in units of the lattice constant.
///
/// Twelve base positions plus their body-centred copies; the set is closed
/// under inversion, every site has exactly four nearest neighbours, and the
/// nearest-neighbour distance is `sqrt(6)/8` lattice constants (0.368 nm
/// for YAG).
pub fn dodecahedral_site_fractions() -> [Vector3<f64>; 24] {
    const BASE: [[f64; 3]; 12] = [
        [0.125, 0.0, 0.25],
        [0.375, 0.0, 0.75],
        [0.25, 0.125, 0.0],
        [0.75, 0.375, 0.0],
        [0.0, 0.25, 0.125],
        [0.0, 0.75, 0.375],
        [0.875, 0.0, 0.75],
        [0.625, 0.0, 0.25],
        [0.75, 0.875, 0.0],
        [0.25, 0.625, 0.0],
        [0.0, 0.75, 0.875],
        [0.0, 0.25, 0.625],
    ];
    let mut out = [Vector3::zeros(); 24];
    for (i, b) in BASE.iter().enumerate() {
        out[2 * i] = Vector3::from(*b);
        out[2 * i + 1] = Vector3::from(*b).map(|c| (c + 0.5) % 1.0);
    }
    out
}

/// Effective g-factor of one site for a unit field direction `n`:
/// `sqrt(gx^2 (n.x)^2 + gy^2 (n.y)^2 + gz^2 (n.z)^2)` with the direction
/// cosines taken against the site's local axes.
///
/// `n` must be a unit vector; callers sweeping many directions are expected
/// to normalize once up front.
pub fn effective_g(frame: &SiteFrame, g: &GTensor, n: Vector3<f64>) -> Result<f64> {
    if (n.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!(
            "direction must be a unit vector, |n| = {}",
            n.norm()
        )));
    }
    let cx = n.dot(&frame.x_axis);
    let cy = n.dot(&frame.y_axis);
    let cz = n.dot(&frame.z_axis);
    Ok((g.gx * g.gx * cx * cx + g.gy * g.gy * cy * cy + g.gz * g.gz * cz * cz).sqrt())
}

/// Symmetric lab-frame g-matrix `R diag(gx, gy, gz) R^T` of one site.
pub fn lab_g_matrix(frame: &SiteFrame, g: &GTensor) -> Matrix3<f64> {
    let r = frame.rotation();
    r * Matrix3::from_diagonal(&Vector3::new(g.gx, g.gy, g.gz)) * r.transpose()
}
