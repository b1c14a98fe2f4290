//! Resonance lines, ODMR spectra and Zeeman sweeps.

use nalgebra::Vector3;

use crate::constants::BOHR_MHZ_PER_GAUSS;
use crate::crystal::{effective_g, site_frames, FieldSpec, GTensor};
use crate::signal::{Signal, SignalMeta};
use crate::{Error, Result};

/// One spin transition of one site orientation class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceLine {
    pub site_id: u8,
    pub frequency_mhz: f64,
    /// Relative synthesis weight; 1 unless the caller models site-selective
    /// excitation.
    pub weight: f64,
}

/// Normalized line profile used when synthesizing spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineShape {
    pub kind: LineShapeKind,
    pub fwhm_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineShapeKind {
    Lorentzian,
    Gaussian,
}

impl LineShape {
    pub fn new(kind: LineShapeKind, fwhm_mhz: f64) -> Result<Self> {
        if !(fwhm_mhz > 0.0) || !fwhm_mhz.is_finite() {
            return Err(Error::invalid(format!(
                "line width must be positive, got {fwhm_mhz}"
            )));
        }
        Ok(LineShape { kind, fwhm_mhz })
    }

    /// Unit-area profile evaluated at offset `f - f0` from line centre.
    pub fn eval(&self, delta_mhz: f64) -> f64 {
        match self.kind {
            LineShapeKind::Lorentzian => {
                let hwhm = 0.5 * self.fwhm_mhz;
                hwhm / (std::f64::consts::PI * (delta_mhz * delta_mhz + hwhm * hwhm))
            }
            LineShapeKind::Gaussian => {
                let s = self.fwhm_mhz / (2.0 * (2.0 * 2.0f64.ln()).sqrt());
                (-0.5 * (delta_mhz / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }
}

/// Zeeman transition frequency of every site class, unit weights, ordered by
/// site id. Frequencies are `g_eff * (muB/h) * B` and scale exactly linearly
/// with the field magnitude.
pub fn transition_frequencies(field: &FieldSpec, g: &GTensor) -> Vec<ResonanceLine> {
    let n = field.direction();
    site_frames()
        .iter()
        .map(|f| ResonanceLine {
            site_id: f.site_id,
            // Direction is unit by FieldSpec construction.
            frequency_mhz: effective_g(f, g, n).unwrap()
                * BOHR_MHZ_PER_GAUSS
                * field.magnitude_gauss(),
            weight: 1.0,
        })
        .collect()
}

/// Synthesize a spectrum from explicit lines: a sum of unit-area profiles
/// scaled by line weights, then normalized so the curve's peak value is 1.
///
/// The peak is searched over the grid and the line centres, so a grid that
/// misses every line still comes back with near-zero values rather than
/// being stretched to 1.
pub fn odmr_spectrum_from_lines(
    lines: &[ResonanceLine],
    shape: &LineShape,
    f_grid_mhz: &[f64],
) -> Result<Signal> {
    if lines.is_empty() {
        return Err(Error::invalid("no resonance lines given"));
    }
    if lines.iter().any(|l| !(l.weight >= 0.0)) {
        return Err(Error::invalid("line weights must be >= 0"));
    }
    if lines.iter().map(|l| l.weight).sum::<f64>() <= 0.0 {
        return Err(Error::invalid("at least one line weight must be positive"));
    }
    let raw = |f: f64| -> f64 {
        lines
            .iter()
            .map(|l| l.weight * shape.eval(f - l.frequency_mhz))
            .sum()
    };
    let y_raw: Vec<f64> = f_grid_mhz.iter().map(|&f| raw(f)).collect();
    let peak = lines
        .iter()
        .map(|l| raw(l.frequency_mhz))
        .chain(y_raw.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let y = y_raw.iter().map(|v| v / peak).collect();
    let mut meta = SignalMeta::new("frequency_mhz", "signal");
    meta.comments = Vec::new();
    Signal::new(f_grid_mhz.to_vec(), y, meta)
}

/// Spectrum of all six sites with unit weights.
pub fn odmr_spectrum(
    field: &FieldSpec,
    g: &GTensor,
    shape: &LineShape,
    f_grid_mhz: &[f64],
) -> Result<Signal> {
    odmr_spectrum_from_lines(&transition_frequencies(field, g), shape, f_grid_mhz)
}

/// Per-site transition frequency versus field magnitude, one signal per
/// site class. Needs at least two grid points; single fields go through
/// [`transition_frequencies`] directly.
pub fn zeeman_sweep(
    direction: Vector3<f64>,
    g: &GTensor,
    b_grid_gauss: &[f64],
) -> Result<Vec<Signal>> {
    if b_grid_gauss.len() < 2 {
        return Err(Error::invalid("field grid needs at least two points"));
    }
    let norm = direction.norm();
    if !norm.is_finite() || norm < 1e-9 {
        return Err(Error::invalid("field direction must be non-zero"));
    }
    let n = direction / norm;
    let gs: Vec<(u8, f64)> = site_frames()
        .iter()
        .map(|f| (f.site_id, effective_g(f, g, n).unwrap()))
        .collect();
    gs.iter()
        .map(|(site_id, ge)| {
            let y: Vec<f64> = b_grid_gauss
                .iter()
                .map(|&b| ge * BOHR_MHZ_PER_GAUSS * b)
                .collect();
            let meta = SignalMeta::new("field_gauss", &format!("site{site_id}_mhz"));
            Signal::new(b_grid_gauss.to_vec(), y, meta)
        })
        .collect()
}
