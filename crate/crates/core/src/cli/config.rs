//! Default run parameters for scenarios, simulation and figure generation.

/// Wavepacket coherence time, in the same (femtosecond-like) units as delays.
pub const COHERENCE_TIME: f64 = 100.0;

/// Mean pairs per unit exposure for each measurement setting.
pub const FLUX: f64 = 1e5;

pub const SEED: u64 = 42;

/// Environment variable that replaces [`SEED`].
pub const SEED_ENV: &str = "HIDDENQUTRIT_SEED";

pub const HIDDEN_DIM: usize = 2;

/// Delay of the fully distinguishable pair, in coherence times.
pub const SEPARATED_DELAY: f64 = 10.0;

/// Collective phase spread of the decohering crystal, radians.
pub const DEPHASING_STDEV: f64 = 2.0;

/// Axis misalignment of the decohering crystal, degrees.
pub const ROTATION_ANGLE_DEG: f64 = 5.0;

/// Delay giving `γ² = 1/3`, i.e. a 2:1 split between ψ⁺ and ψ⁻.
pub fn partial_delay(coherence_time: f64) -> f64 {
    coherence_time * 3f64.ln().sqrt()
}
