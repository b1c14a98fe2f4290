//! Physical constants in the crate's working units (MHz, ns, gauss, nm).

/// Bohr magneton over Planck constant, MHz per gauss.
///
/// All Zeeman frequencies are `g_eff * BOHR_MHZ_PER_GAUSS * B` with the
/// doublet treated as an effective spin 1/2 (spin operators sigma/2).
pub const BOHR_MHZ_PER_GAUSS: f64 = 1.3996245;

/// Cycles accumulated per MHz of frequency per ns of time.
///
/// Phases advance by `2*pi*f*t*MHZ_NS_CYCLES` radians.
pub const MHZ_NS_CYCLES: f64 = 1e-3;

/// Dipolar coupling prefactor mu0*muB^2/(4*pi*h) in MHz*nm^3 for g = 1.
///
/// Two like spins with effective g-factor `g` at distance `r` nm couple at
/// `DIPOLAR_MHZ_NM3 * g^2 * (1 - 3cos^2 theta) / r^3` MHz.
pub const DIPOLAR_MHZ_NM3: f64 = 12.98013;

/// Cubic garnet lattice constant in nm.
pub const GARNET_LATTICE_NM: f64 = 1.2008;

/// Dodecahedral (rare-earth) sites per cubic garnet unit cell.
pub const DODECAHEDRAL_SITES_PER_CELL: f64 = 24.0;

/// Nearest-neighbour separation of dodecahedral sites, nm.
///
/// Used as a hard floor when placing substitutional ions at random: two ions
/// can never sit closer than adjacent lattice sites.
pub const MIN_ION_SEPARATION_NM: f64 = 0.368;

/// Number density of dodecahedral sites, nm^-3.
pub fn dodecahedral_site_density_per_nm3() -> f64 {
    DODECAHEDRAL_SITES_PER_CELL / GARNET_LATTICE_NM.powi(3)
}
