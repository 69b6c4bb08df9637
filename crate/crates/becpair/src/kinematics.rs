//! Physical constants, beam-derived quantities and free-fall kinematics.
//!
//! Everything here is stored in SI base units. Unit suffixes exist only at
//! the I/O boundary (see [`crate::config`]).

use crate::error::{Error, Result};

/// CODATA value of Planck's constant, J s.
pub const PLANCK_CONSTANT: f64 = 6.62607015e-34;

/// Default gravitational acceleration, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Coefficient of the relative momentum spread of the source,
/// (1/pi) * sqrt(21/8). Multiplied by lambda_dB / S_x it gives dp_x/p.
pub fn momentum_spread_coefficient() -> f64 {
    (21.0f64 / 8.0).sqrt() / std::f64::consts::PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Planck's constant, J s.
    pub planck: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { planck: PLANCK_CONSTANT, gravity: STANDARD_GRAVITY }
    }
}

impl PhysicalConstants {
    pub fn new(planck: f64, gravity: f64) -> Result<Self> {
        if !(planck > 0.0) || !planck.is_finite() {
            return Err(Error::Domain(format!("planck constant must be positive, got {planck}")));
        }
        if !(gravity > 0.0) || !gravity.is_finite() {
            return Err(Error::Domain(format!("gravity must be positive, got {gravity}")));
        }
        Ok(Self { planck, gravity })
    }
}

/// Laser and atom parameters together with the derived recoil quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParameters {
    pub constants: PhysicalConstants,
    /// Laser wavelength, m.
    pub laser_wavelength: f64,
    /// Atomic mass, kg.
    pub atomic_mass: f64,
    /// Recoil velocity h / (lambda_L m), m/s. Derived.
    pub recoil_velocity: f64,
    /// de Broglie wavelength at the recoil velocity, m. Derived; equals the
    /// laser wavelength by construction.
    pub de_broglie_wavelength: f64,
    /// Velocity uncertainty along x as a fraction of the recoil velocity.
    pub velocity_spread_x: f64,
    /// Velocity uncertainty along y and z as a fraction of the recoil velocity.
    pub velocity_spread_yz: f64,
}

impl BeamParameters {
    pub fn new(
        constants: PhysicalConstants,
        laser_wavelength: f64,
        atomic_mass: f64,
        velocity_spread_x: f64,
        velocity_spread_yz: f64,
    ) -> Result<Self> {
        let v_rec = recoil_velocity(&constants, laser_wavelength, atomic_mass)?;
        for (name, value) in [("velocity_spread_x", velocity_spread_x), ("velocity_spread_yz", velocity_spread_yz)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1), got {value}")));
            }
        }
        Ok(Self {
            constants,
            laser_wavelength,
            atomic_mass,
            recoil_velocity: v_rec,
            de_broglie_wavelength: constants.planck / (atomic_mass * v_rec),
            velocity_spread_x,
            velocity_spread_yz,
        })
    }

    /// Relative momentum spread dp_x/p for a source of extent `source_extent_x`.
    pub fn momentum_spread_fraction(&self, source_extent_x: f64) -> Result<f64> {
        if !(source_extent_x > 0.0) {
            return Err(Error::Domain(format!(
                "source extent must be positive, got {source_extent_x}"
            )));
        }
        Ok(momentum_spread_coefficient() * self.de_broglie_wavelength / source_extent_x)
    }
}

/// Recoil speed h / (lambda_L m), m/s.
pub fn recoil_velocity(constants: &PhysicalConstants, laser_wavelength: f64, atomic_mass: f64) -> Result<f64> {
    if !(laser_wavelength > 0.0) {
        return Err(Error::Domain(format!("laser wavelength must be positive, got {laser_wavelength}")));
    }
    if !(atomic_mass > 0.0) {
        return Err(Error::Domain(format!("atomic mass must be positive, got {atomic_mass}")));
    }
    Ok(constants.planck / (laser_wavelength * atomic_mass))
}

/// Time to fall `drop_height` starting with an upward speed `initial_upward_speed`,
/// i.e. the positive root of  drop_height = -v0 t + g t^2 / 2.
pub fn fall_time(constants: &PhysicalConstants, drop_height: f64, initial_upward_speed: f64) -> Result<f64> {
    if drop_height < 0.0 {
        return Err(Error::Domain(format!("drop height must be non-negative, got {drop_height}")));
    }
    let g = constants.gravity;
    let v0 = initial_upward_speed;
    let disc = v0 * v0 + 2.0 * g * drop_height;
    if disc < 0.0 {
        return Err(Error::Domain(format!(
            "no real fall time for drop_height {drop_height} and initial speed {v0}"
        )));
    }
    Ok((v0 + disc.sqrt()) / g)
}

/// Maximum lateral distance reachable during the fall: v_rec * tau.
pub fn lateral_reach(beam: &BeamParameters, drop_height: f64) -> Result<f64> {
    let tau = fall_time(&beam.constants, drop_height, beam.recoil_velocity)?;
    Ok(beam.recoil_velocity * tau)
}

/// Fall time and lateral reach for a beam dropped from `drop_height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallSolution {
    pub fall_time: f64,
    pub lateral_reach: f64,
}

pub fn fall_solution(beam: &BeamParameters, drop_height: f64) -> Result<FallSolution> {
    let fall_time = fall_time(&beam.constants, drop_height, beam.recoil_velocity)?;
    Ok(FallSolution { fall_time, lateral_reach: beam.recoil_velocity * fall_time })
}

/// Helium-4 reference beam: 1.083 um light on mass 6.646e-27 kg with the
/// anisotropic velocity spreads used throughout the bundled configs.
pub fn helium_reference_beam() -> BeamParameters {
    BeamParameters::new(PhysicalConstants::default(), 1.083e-6, 6.646e-27, 0.0044, 0.091)
        .expect("reference beam parameters are valid")
}
