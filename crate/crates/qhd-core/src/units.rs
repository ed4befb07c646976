//! SI constants and boundary conversions. Everything inside the solvers is
//! in natural units (hbar = c = 1, reference mass 1); these helpers exist
//! only for reading and reporting laboratory numbers.

/// CODATA 2018 values.
pub const HBAR_SI: f64 = 1.054_571_817e-34; // J s
pub const BOLTZMANN_SI: f64 = 1.380_649e-23; // J / K
pub const SPEED_OF_LIGHT_SI: f64 = 2.997_924_58e8; // m / s
pub const ELECTRON_MASS_KG: f64 = 9.109_383_701_5e-31;
pub const ELEMENTARY_CHARGE_SI: f64 = 1.602_176_634e-19; // C

/// Thermal correlation length kappa hbar / sqrt(2 m k_B T) in meters.
pub fn lambda_c_si_meters(temperature_kelvin: f64, mass_kg: f64, kappa: f64) -> f64 {
    if temperature_kelvin == 0.0 {
        return f64::INFINITY;
    }
    kappa * HBAR_SI / (2.0 * mass_kg * BOLTZMANN_SI * temperature_kelvin).sqrt()
}

/// Length scale of one natural unit for a particle of the given mass: the
/// reduced Compton wavelength hbar / (m c).
pub fn natural_length_meters(mass_kg: f64) -> f64 {
    HBAR_SI / (mass_kg * SPEED_OF_LIGHT_SI)
}

/// Time scale of one natural unit: hbar / (m c^2).
pub fn natural_time_seconds(mass_kg: f64) -> f64 {
    HBAR_SI / (mass_kg * SPEED_OF_LIGHT_SI * SPEED_OF_LIGHT_SI)
}

/// Energy of one natural unit in joules: m c^2.
pub fn natural_energy_joules(mass_kg: f64) -> f64 {
    mass_kg * SPEED_OF_LIGHT_SI * SPEED_OF_LIGHT_SI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn electron_compton_scales() {
        // reduced Compton wavelength of the electron: 3.8616e-13 m
        let lc = natural_length_meters(ELECTRON_MASS_KG);
        assert!((lc - 3.8616e-13).abs() / 3.8616e-13 < 1e-4);
    }
}
