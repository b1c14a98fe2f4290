//! Exact evolution of small clusters of identical dipolar-coupled spins.
//!
//! One probed spin (index 0) plus a few bath spins of the same species
//! evolve under the secular like-spin dipolar Hamiltonian
//!
//! ```text
//! H/h = sum_i (delta_i/2) sigma_z^i
//!     + sum_{i<j} (b_ij/4) (2 sigma_z^i sigma_z^j
//!                           - sigma_x^i sigma_x^j - sigma_y^i sigma_y^j)
//! ```
//!
//! with all energies in MHz. Because bath and probe share the transition
//! frequency, control pulses rotate *every* spin: a global pi pulse leaves
//! the dipolar Hamiltonian invariant, which is why an echo cannot refocus
//! this bath and multi-pulse line-narrowing cycles are needed instead.
//!
//! Basis convention: basis index bit `k` holds spin `k` (bit 0 is the
//! probed spin), with bit value 0 for up and 1 for down. Evolution is exact
//! through dense eigendecompositions — one of the free Hamiltonian, plus
//! one per distinct finite pulse when pulses are not ideal; the
//! Hilbert-space cap of nine spins (dimension 512) keeps that cheap.
//! Larger baths are out of scope.

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constants::{
    DIPOLAR_MHZ_NM3, GARNET_LATTICE_NM, MHZ_NS_CYCLES, MIN_ION_SEPARATION_NM,
};
use crate::crystal::{
    dodecahedral_site_fractions, effective_g, site_frames, FieldSpec, GTensor,
};
use crate::dynamics::{
    axis_rotation, ElementKind, PulseElement, PulseSequence, ReadoutAxis, SweepKind,
};
use crate::signal::{Signal, SignalMeta};
use crate::{Error, Result};

/// Largest cluster handled exactly (Hilbert dimension 512).
pub const MAX_CLUSTER_SPINS: usize = 9;

/// Geometry-free description of one cluster: pairwise secular dipolar
/// strengths plus per-spin detunings, all in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    couplings: DMatrix<f64>,
    detunings: Vec<f64>,
}

impl ClusterSpec {
    /// `couplings` must be square, symmetric, zero on the diagonal, with
    /// 2 to 9 rows matching `detunings` in length.
    pub fn new(couplings: DMatrix<f64>, detunings: Vec<f64>) -> Result<Self> {
        let n = couplings.nrows();
        if couplings.ncols() != n {
            return Err(Error::invalid("coupling matrix must be square"));
        }
        if !(2..=MAX_CLUSTER_SPINS).contains(&n) {
            return Err(Error::invalid(format!(
                "cluster needs 2..={} spins, got {}",
                MAX_CLUSTER_SPINS, n
            )));
        }
        if detunings.len() != n {
            return Err(Error::invalid(format!(
                "{} detunings for {} spins",
                detunings.len(),
                n
            )));
        }
        if couplings.iter().any(|b| !b.is_finite())
            || detunings.iter().any(|d| !d.is_finite())
        {
            return Err(Error::invalid("cluster parameters must be finite"));
        }
        for i in 0..n {
            if couplings[(i, i)] != 0.0 {
                return Err(Error::invalid("self-coupling must be zero"));
            }
            for j in 0..i {
                if (couplings[(i, j)] - couplings[(j, i)]).abs() > 1e-12 {
                    return Err(Error::invalid("coupling matrix must be symmetric"));
                }
            }
        }
        Ok(ClusterSpec {
            couplings,
            detunings,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.detunings.len()
    }

    pub fn coupling_mhz(&self, i: usize, j: usize) -> f64 {
        self.couplings[(i, j)]
    }

    pub fn detunings_mhz(&self) -> &[f64] {
        &self.detunings
    }

    /// Largest pairwise coupling magnitude.
    pub fn max_coupling_mhz(&self) -> f64 {
        self.couplings.iter().fold(0.0f64, |m, b| m.max(b.abs()))
    }

    /// The same geometry with every coupling multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ClusterSpec::new(&self.couplings * factor, self.detunings.clone())
    }

    /// Dense Hamiltonian in the computational basis, MHz units; real and
    /// symmetric because the flip-flop matrix elements are real.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let n = self.n_spins();
        let dim = 1usize << n;
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let sign = |k: usize| 1.0 - 2.0 * ((i >> k) & 1) as f64;
            let mut diag = 0.0;
            for k in 0..n {
                diag += 0.5 * self.detunings[k] * sign(k);
                for l in 0..k {
                    diag += 0.5 * self.couplings[(k, l)] * sign(k) * sign(l);
                }
            }
            h[(i, i)] = diag;
            // flip-flop: couples configurations where spins k and l point
            // opposite ways, exchanging their states
            for k in 0..n {
                for l in 0..k {
                    if (i >> k) & 1 != (i >> l) & 1 {
                        let j = i ^ (1 << k) ^ (1 << l);
                        h[(i, j)] -= 0.5 * self.couplings[(k, l)];
                    }
                }
            }
        }
        h
    }

    /// Plain-text form: spin count, coupling matrix rows, detuning row.
    /// Floats print in shortest round-trip form, so parsing the output
    /// reproduces the `ClusterSpec` exactly.
    pub fn to_text(&self) -> String {
        let n = self.n_spins();
        let mut out = String::new();
        out.push_str(&format!("n_spins {}\n", n));
        out.push_str("couplings_mhz\n");
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{}", self.couplings[(i, j)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out.push_str("detunings_mhz\n");
        let row: Vec<String> = self.detunings.iter().map(|d| format!("{}", d)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
        out
    }

    /// Parses the `to_text` format. Blank lines and `#` comments are
    /// ignored; everything else must appear in order.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::invalid(format!("cluster text ends before {}", what)))
        };
        let header = next("the spin count")?;
        let n: usize = header
            .strip_prefix("n_spins")
            .map(str::trim)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::invalid(format!("expected 'n_spins <count>', got '{}'", header)))?;
        let tag = next("the coupling matrix")?;
        if tag != "couplings_mhz" {
            return Err(Error::invalid(format!(
                "expected 'couplings_mhz', got '{}'",
                tag
            )));
        }
        let mut couplings = DMatrix::zeros(n, n);
        for i in 0..n {
            let row = next("a coupling row")?;
            let vals = parse_float_row(row, n, "coupling")?;
            for (j, v) in vals.into_iter().enumerate() {
                couplings[(i, j)] = v;
            }
        }
        let tag = next("the detuning row")?;
        if tag != "detunings_mhz" {
            return Err(Error::invalid(format!(
                "expected 'detunings_mhz', got '{}'",
                tag
            )));
        }
        let detunings = parse_float_row(next("the detuning row")?, n, "detuning")?;
        if let Some(extra) = lines.next() {
            return Err(Error::invalid(format!(
                "unexpected trailing content '{}'",
                extra
            )));
        }
        ClusterSpec::new(couplings, detunings)
    }
}

fn parse_float_row(line: &str, expect: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad {} value '{}'", what, tok)))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expect {
        return Err(Error::invalid(format!(
            "expected {} {} values, got {}",
            expect,
            what,
            vals.len()
        )));
    }
    Ok(vals)
}

/// Pure state of a cluster, dimension `2^n_spins`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    amp: DVector<Complex64>,
    n_spins: usize,
}

impl ClusterState {
    /// Computational basis state; bit `k` of `down_mask` puts spin `k` in
    /// the down state.
    pub fn basis(n_spins: usize, down_mask: usize) -> Result<Self> {
        if !(2..=MAX_CLUSTER_SPINS).contains(&n_spins) {
            return Err(Error::invalid("cluster needs 2..=9 spins"));
        }
        let dim = 1usize << n_spins;
        if down_mask >= dim {
            return Err(Error::invalid("basis index out of range"));
        }
        let mut amp = DVector::from_element(dim, Complex64::new(0.0, 0.0));
        amp[down_mask] = Complex64::new(1.0, 0.0);
        Ok(ClusterState { amp, n_spins })
    }

    /// Product state from one unit Bloch vector per spin.
    pub fn product(bloch: &[(f64, f64, f64)]) -> Result<Self> {
        let n = bloch.len();
        if !(2..=MAX_CLUSTER_SPINS).contains(&n) {
            return Err(Error::invalid("cluster needs 2..=9 spins"));
        }
        let mut factors = Vec::with_capacity(n);
        for &(x, y, z) in bloch {
            let norm = (x * x + y * y + z * z).sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("Bloch vectors must be unit length"));
            }
            let theta = z.clamp(-1.0, 1.0).acos();
            let phi = y.atan2(x);
            factors.push((
                Complex64::new((theta / 2.0).cos(), 0.0),
                Complex64::from_polar((theta / 2.0).sin(), phi),
            ));
        }
        let dim = 1usize << n;
        let amp = DVector::from_iterator(
            dim,
            (0..dim).map(|i| {
                factors
                    .iter()
                    .enumerate()
                    .fold(Complex64::new(1.0, 0.0), |acc, (k, f)| {
                        acc * if (i >> k) & 1 == 0 { f.0 } else { f.1 }
                    })
            }),
        );
        Ok(ClusterState { amp, n_spins: n })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amp.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    /// Expectation of one spin's Pauli operator.
    pub fn expect_sigma(&self, spin: usize, axis: ReadoutAxis) -> f64 {
        assert!(spin < self.n_spins, "spin index out of range");
        let mask = 1usize << spin;
        let dim = self.amp.len();
        match axis {
            ReadoutAxis::Z => (0..dim)
                .map(|i| {
                    let s = 1.0 - 2.0 * ((i >> spin) & 1) as f64;
                    s * self.amp[i].norm_sqr()
                })
                .sum(),
            ReadoutAxis::X => (0..dim)
                .filter(|i| i & mask == 0)
                .map(|i| 2.0 * (self.amp[i].conj() * self.amp[i | mask]).re)
                .sum(),
            ReadoutAxis::Y => (0..dim)
                .filter(|i| i & mask == 0)
                .map(|i| 2.0 * (self.amp[i].conj() * self.amp[i | mask]).im)
                .sum(),
        }
    }

    /// Expectation of the total z magnetization, conserved by the dipolar
    /// Hamiltonian.
    pub fn total_sigma_z(&self) -> f64 {
        (0..self.n_spins)
            .map(|k| self.expect_sigma(k, ReadoutAxis::Z))
            .sum()
    }

    fn apply_single_qubit(&mut self, spin: usize, u: &Matrix2<Complex64>) {
        let mask = 1usize << spin;
        for i in 0..self.amp.len() {
            if i & mask == 0 {
                let j = i | mask;
                let a0 = self.amp[i];
                let a1 = self.amp[j];
                self.amp[i] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
                self.amp[j] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
            }
        }
    }

    /// Rotates every spin by `angle_rad` about the equatorial axis at
    /// `phase_rad` — a control pulse in the like-spin setting.
    pub fn apply_global_rotation(&mut self, angle_rad: f64, phase_rad: f64) {
        let u = axis_rotation(angle_rad, phase_rad);
        for k in 0..self.n_spins {
            self.apply_single_qubit(k, &u);
        }
    }
}

/// Prediagonalized evolution under one time-independent Hamiltonian.
struct HamiltonianPropagator {
    eigvals: DVector<f64>,
    vecs: DMatrix<Complex64>,
}

impl HamiltonianPropagator {
    fn free(spec: &ClusterSpec) -> Self {
        Self::from_hermitian(spec.hamiltonian().map(|v| Complex64::new(v, 0.0)))
    }

    /// Dipolar + detuning Hamiltonian plus a resonant global drive of the
    /// given Rabi frequency and phase, for finite-length pulses.
    fn driven(spec: &ClusterSpec, rabi_mhz: f64, phase_rad: f64) -> Self {
        let n = spec.n_spins();
        let mut h = spec.hamiltonian().map(|v| Complex64::new(v, 0.0));
        // (rabi/2)(cos sigma_x + sin sigma_y) per spin has upper matrix
        // element (rabi/2) e^(-i phase)
        let up = Complex64::from_polar(0.5 * rabi_mhz, -phase_rad);
        for k in 0..n {
            let mask = 1usize << k;
            for i in 0..h.nrows() {
                if i & mask == 0 {
                    h[(i, i | mask)] += up;
                    h[(i | mask, i)] += up.conj();
                }
            }
        }
        Self::from_hermitian(h)
    }

    fn from_hermitian(h: DMatrix<Complex64>) -> Self {
        let se = h.symmetric_eigen();
        HamiltonianPropagator {
            eigvals: se.eigenvalues,
            vecs: se.eigenvectors,
        }
    }

    /// Applies `exp(-i 2 pi H t)` exactly through the eigenbasis.
    fn evolve(&self, state: &mut ClusterState, duration_ns: f64) {
        if duration_ns == 0.0 {
            return;
        }
        let mut c = self.vecs.adjoint() * &state.amp;
        for j in 0..c.len() {
            let theta = 2.0 * std::f64::consts::PI * self.eigvals[j] * duration_ns * MHZ_NS_CYCLES;
            c[j] *= Complex64::from_polar(1.0, -theta);
        }
        state.amp = &self.vecs * c;
    }
}

/// Exact free evolution for `duration_ns` under the cluster Hamiltonian.
pub fn evolve_cluster(
    state: &ClusterState,
    spec: &ClusterSpec,
    duration_ns: f64,
) -> Result<ClusterState> {
    if state.n_spins != spec.n_spins() {
        return Err(Error::invalid(format!(
            "state has {} spins, spec has {}",
            state.n_spins,
            spec.n_spins()
        )));
    }
    if !(duration_ns.is_finite() && duration_ns >= 0.0) {
        return Err(Error::invalid("duration must be non-negative"));
    }
    let mut out = state.clone();
    HamiltonianPropagator::free(spec).evolve(&mut out, duration_ns);
    Ok(out)
}

/// Secular dipolar coupling of a spin pair: `prefactor * (1 - 3 cos^2
/// theta) / r^3` with `theta` the angle between the separation and the
/// field direction. `separation_nm` must be non-zero; `field_dir` need not
/// be normalized.
pub fn dipolar_coupling_mhz(
    prefactor_mhz_nm3: f64,
    separation_nm: Vector3<f64>,
    field_dir: Vector3<f64>,
) -> Result<f64> {
    let r = separation_nm.norm();
    let f = field_dir.norm();
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("spin separation must be non-zero"));
    }
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::invalid("field direction must be non-zero"));
    }
    let cos_theta = separation_nm.dot(&field_dir) / (r * f);
    Ok(prefactor_mhz_nm3 * (1.0 - 3.0 * cos_theta * cos_theta) / (r * r * r))
}

/// Draws a cluster geometry: the probed ion on a dodecahedral site plus
/// `n_spins - 1` bath ions placed uniformly at random on distinct
/// dodecahedral sites within the radius that holds `n_spins - 1` occupied
/// sites on average at the given occupation fraction (so the sampled ions
/// stand in for the expected local bath; radius scales as
/// `concentration^(-1/3)`).
///
/// Couplings follow the secular dipolar formula with the prefactor set by
/// the field-direction effective g of the second site orientation class —
/// the class the companion demos probe. All detunings are zero: the bath is
/// the same species on the same site class.
pub fn sample_cluster(
    concentration: f64,
    n_spins: usize,
    rng_seed: u64,
    field: &FieldSpec,
    g: &GTensor,
) -> Result<ClusterSpec> {
    if !(concentration > 0.0 && concentration < 1.0) {
        return Err(Error::invalid("concentration must lie strictly in (0, 1)"));
    }
    if !(2..=MAX_CLUSTER_SPINS).contains(&n_spins) {
        return Err(Error::invalid(format!(
            "cluster needs 2..={} spins, got {}",
            MAX_CLUSTER_SPINS, n_spins
        )));
    }
    let a = GARNET_LATTICE_NM;
    let occupied_density =
        crate::constants::dodecahedral_site_density_per_nm3() * concentration;
    let n_bath = n_spins - 1;
    let radius = (3.0 * n_bath as f64 / (4.0 * std::f64::consts::PI * occupied_density)).cbrt();

    let fractions = dodecahedral_site_fractions();
    let probe = fractions[0] * a;
    let reach = (radius / a).ceil() as i64 + 1;
    let mut candidates: Vec<Vector3<f64>> = Vec::new();
    for cx in -reach..=reach {
        for cy in -reach..=reach {
            for cz in -reach..=reach {
                let cell = Vector3::new(cx as f64, cy as f64, cz as f64);
                for f in &fractions {
                    let p = (f + cell) * a;
                    let d = (p - probe).norm();
                    if d > 1e-9 && d <= radius {
                        candidates.push(p);
                    }
                }
            }
        }
    }
    if candidates.len() < n_bath {
        return Err(Error::invalid(format!(
            "only {} sites within {:.2} nm; concentration too high for {} bath spins",
            candidates.len(),
            radius,
            n_bath
        )));
    }

    // partial Fisher-Yates: the first n_bath entries become the sample
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for k in 0..n_bath {
        let pick = rng.random_range(k..candidates.len());
        candidates.swap(k, pick);
    }
    let mut positions = vec![probe];
    positions.extend_from_slice(&candidates[..n_bath]);

    let g_eff = effective_g(&site_frames()[1], g, field.direction())?;
    let prefactor = DIPOLAR_MHZ_NM3 * g_eff * g_eff;
    let mut couplings = DMatrix::zeros(n_spins, n_spins);
    for i in 0..n_spins {
        for j in 0..i {
            let sep = positions[i] - positions[j];
            debug_assert!(sep.norm() >= MIN_ION_SEPARATION_NM - 1e-6);
            let b = dipolar_coupling_mhz(prefactor, sep, field.direction())?;
            couplings[(i, j)] = b;
            couplings[(j, i)] = b;
        }
    }
    ClusterSpec::new(couplings, vec![0.0; n_spins])
}

/// A fixed five-spin demonstration cluster: sampled at 0.2% occupation in a
/// 310 G field along [110], then rescaled so the largest coupling is
/// exactly 1 MHz. Frozen here so decoupling demos and their published
/// curves are reproducible.
pub fn demo_five_spin() -> ClusterSpec {
    let field = FieldSpec::new(310.0, Vector3::new(1.0, 1.0, 0.0)).expect("valid field");
    let spec = sample_cluster(0.002, 5, 18, &field, &GTensor::default())
        .expect("demo sampling parameters are valid");
    spec.scaled(1.0 / spec.max_coupling_mhz())
        .expect("rescaling preserves validity")
}

/// Propagators for every element a realized sequence can contain: free
/// evolution plus one diagonalization per distinct finite drive.
struct SequencePropagators {
    free: HamiltonianPropagator,
    driven: Vec<((u64, u64), HamiltonianPropagator)>,
}

impl SequencePropagators {
    fn new(spec: &ClusterSpec, realized: &[Vec<PulseElement>], ideal_pulses: bool) -> Self {
        let mut driven: Vec<((u64, u64), HamiltonianPropagator)> = Vec::new();
        if !ideal_pulses {
            for el in realized.iter().flatten() {
                if let ElementKind::Drive { rabi_mhz, phase_rad } = el.kind {
                    let key = (rabi_mhz.to_bits(), phase_rad.to_bits());
                    if !driven.iter().any(|(k, _)| *k == key) {
                        driven.push((key, HamiltonianPropagator::driven(spec, rabi_mhz, phase_rad)));
                    }
                }
            }
        }
        SequencePropagators {
            free: HamiltonianPropagator::free(spec),
            driven,
        }
    }

    fn apply(&self, state: &mut ClusterState, elements: &[PulseElement], ideal_pulses: bool) {
        for el in elements {
            match el.kind {
                ElementKind::Delay => self.free.evolve(state, el.duration_ns),
                ElementKind::Drive { rabi_mhz, phase_rad } => {
                    if ideal_pulses {
                        let angle =
                            2.0 * std::f64::consts::PI * rabi_mhz * el.duration_ns * MHZ_NS_CYCLES;
                        state.apply_global_rotation(angle, phase_rad);
                    } else {
                        let key = (rabi_mhz.to_bits(), phase_rad.to_bits());
                        let prop = &self
                            .driven
                            .iter()
                            .find(|(k, _)| *k == key)
                            .expect("propagator prepared for every drive")
                            .1;
                        prop.evolve(state, el.duration_ns);
                    }
                }
            }
        }
    }
}

/// Probed-spin signal for a pulse sequence played against the cluster,
/// averaged over `n_configs` random bath product states (an
/// infinite-temperature bath). Ideal pulses act as instantaneous global
/// rotations; finite pulses evolve the cluster exactly under the drive plus
/// dipolar Hamiltonian for the pulse length (still global — every spin is
/// driven). Per-element detuning offsets are not supported here (detunings
/// live in the `ClusterSpec`). The x axis and readout convention match the
/// single-spin engine: swept duration in ns (or repetition count times
/// block time) against `(1 - <sigma_axis>)/2`.
///
/// Deterministic for a fixed seed: bath states are drawn per configuration
/// from seed-split streams and shared across grid points, and the
/// configuration average is accumulated in fixed order.
pub fn cluster_dd_signal(
    spec: &ClusterSpec,
    seq: &PulseSequence,
    sweep_grid: &[f64],
    n_configs: usize,
    rng_seed: u64,
) -> Result<Signal> {
    if n_configs == 0 {
        return Err(Error::invalid("need at least one bath configuration"));
    }
    let (realized, xs) = checked_realization(seq, sweep_grid)?;
    let n = spec.n_spins();
    let props = SequencePropagators::new(spec, &realized, seq.ideal_pulses);
    let curves: Vec<Vec<f64>> = (0..n_configs)
        .into_par_iter()
        .map(|config| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(config as u64);
            // probe up; bath spins uniform on the Bloch sphere
            let mut bloch = vec![(0.0, 0.0, 1.0)];
            for _ in 1..n {
                let cos_theta: f64 = 1.0 - 2.0 * rng.random_range(0.0..1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();
                bloch.push((sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta));
            }
            realized
                .iter()
                .map(|elements| {
                    let mut state =
                        ClusterState::product(&bloch).expect("unit Bloch vectors");
                    props.apply(&mut state, elements, seq.ideal_pulses);
                    debug_assert!((state.norm() - 1.0).abs() < 1e-10);
                    0.5 * (1.0 - state.expect_sigma(0, seq.readout_axis))
                })
                .collect()
        })
        .collect();

    let mut ys = vec![0.0; sweep_grid.len()];
    for curve in &curves {
        for (acc, y) in ys.iter_mut().zip(curve) {
            *acc += y;
        }
    }
    for y in &mut ys {
        *y /= n_configs as f64;
    }
    Signal::new(xs, ys, SignalMeta::new("time_ns", "signal"))
}

/// The same signal averaged exactly: the signal is linear in the bath
/// density matrix, so summing the 2^(n-1) bath computational basis states
/// realizes the maximally mixed (infinite-temperature) bath with no
/// sampling error. Cost grows as 4^(n-1); the nine-spin cap keeps it cheap.
pub fn cluster_dd_signal_exact(
    spec: &ClusterSpec,
    seq: &PulseSequence,
    sweep_grid: &[f64],
) -> Result<Signal> {
    let (realized, xs) = checked_realization(seq, sweep_grid)?;
    let n = spec.n_spins();
    let props = SequencePropagators::new(spec, &realized, seq.ideal_pulses);
    let mut ys = vec![0.0; sweep_grid.len()];
    for bath in 0..(1usize << (n - 1)) {
        for (acc, elements) in ys.iter_mut().zip(&realized) {
            let mut state = ClusterState::basis(n, bath << 1)?;
            props.apply(&mut state, elements, seq.ideal_pulses);
            *acc += 0.5 * (1.0 - state.expect_sigma(0, seq.readout_axis));
        }
    }
    for y in &mut ys {
        *y /= (1usize << (n - 1)) as f64;
    }
    Signal::new(xs, ys, SignalMeta::new("time_ns", "signal"))
}

/// Validates a sequence against the cluster engine's contract and realizes
/// it on the sweep grid, returning the element lists and the time axis.
fn checked_realization(
    seq: &PulseSequence,
    sweep_grid: &[f64],
) -> Result<(Vec<Vec<PulseElement>>, Vec<f64>)> {
    seq.validate()?;
    if sweep_grid.len() < 2 {
        return Err(Error::invalid("sweep grid needs at least two points"));
    }
    if sweep_grid.iter().any(|x| !x.is_finite()) || sweep_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sweep grid must be finite and strictly increasing"));
    }
    let realized: Vec<Vec<PulseElement>> = sweep_grid
        .iter()
        .map(|&s| seq.realize(s))
        .collect::<Result<_>>()?;
    if realized
        .iter()
        .flatten()
        .any(|el| el.detuning_offset_mhz != 0.0)
    {
        return Err(Error::invalid(
            "per-element detuning offsets are not supported for clusters",
        ));
    }
    let xs: Vec<f64> = match seq.sweep {
        SweepKind::Duration => sweep_grid.to_vec(),
        SweepKind::Repetition => {
            let block = seq.block_duration_ns()?;
            sweep_grid.iter().map(|&c| c * block).collect()
        }
    };
    Ok((realized, xs))
}
