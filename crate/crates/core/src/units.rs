//! Unit conversions. Internal quantities are Hartree atomic units.

/// Boltzmann constant in hartree per kelvin.
pub const K_B: f64 = 3.166811563e-6;

/// One atomic unit of time in femtoseconds.
pub const FS_PER_AU: f64 = 2.418884326586e-2;

pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs / FS_PER_AU
}

pub fn au_to_fs(t_au: f64) -> f64 {
    t_au * FS_PER_AU
}

/// Inverse thermal energy β = 1 / (k_B T) in inverse hartree.
pub fn beta_from_kelvin(temperature: f64) -> f64 {
    1.0 / (K_B * temperature)
}
