//! Arrival-time spreads and Monte Carlo pair identification.
//!
//! Shots are independent experiments: each one owns a counter-mode RNG
//! stream derived from (seed, shot index), so multi-threaded runs are
//! schedule independent and seeded runs reproduce bitwise.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::engine::TwoParticlePattern;
use crate::error::{Error, Result};
use crate::geometry::Side;
use crate::kinematics::{fall_time, BeamParameters};

/// Per-shot Monte Carlo configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotConfig {
    /// Mean number of usable pairs per shot (Poisson).
    pub mean_pairs: f64,
    /// Detection efficiency per atom.
    pub efficiency: f64,
    /// Exponential decay constant of the collision rate, s.
    pub collision_time_constant: f64,
    /// Hard window within which all collisions happen, s.
    pub collision_window: f64,
    /// Vertical velocity uncertainty as a fraction of the recoil velocity.
    pub vertical_spread_fraction: f64,
    /// Drop height, m.
    pub drop_height: f64,
    /// Lateral positions are drawn uniformly within +- this value when no
    /// pattern is supplied, m.
    pub lateral_half_window: f64,
    pub seed: u64,
}

impl ShotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mean_pairs < 0.0 || !self.mean_pairs.is_finite() {
            return Err(Error::Validation(format!("mean_pairs must be non-negative, got {}", self.mean_pairs)));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Validation(format!("efficiency must lie in [0, 1], got {}", self.efficiency)));
        }
        if self.collision_time_constant < 0.0 {
            return Err(Error::Validation("collision_time_constant must be non-negative".into()));
        }
        if !(self.collision_window > 0.0) {
            return Err(Error::Validation("collision_window must be positive".into()));
        }
        if self.vertical_spread_fraction < 0.0 || self.vertical_spread_fraction >= 1.0 {
            return Err(Error::Validation("vertical velocity spread fraction must lie in [0, 1)".into()));
        }
        if self.drop_height < 0.0 {
            return Err(Error::Validation("drop_height must be non-negative".into()));
        }
        if !(self.lateral_half_window > 0.0) {
            return Err(Error::Validation("lateral_half_window must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ShotConfig {
    fn default() -> Self {
        Self {
            mean_pairs: 1.0,
            efficiency: 1.0,
            collision_time_constant: 150e-6,
            collision_window: 1e-3,
            vertical_spread_fraction: 0.091,
            drop_height: 0.5,
            lateral_half_window: 1e-3,
            seed: 0,
        }
    }
}

/// One detected atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomEvent {
    pub side: Side,
    /// Arrival time at the detector, s (collision time + fall time).
    pub arrival_time: f64,
    /// Lateral detector coordinate, m.
    pub position: f64,
    /// Ground-truth pair identity; used only for scoring, never by the
    /// identification strategy.
    pub pair_id: u64,
}

/// Outcome of greedy coincidence identification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingResult {
    pub identified: usize,
    pub true_positives: usize,
    /// Correct matches / identified (1 when nothing was identified... 0).
    pub true_positive_rate: f64,
    pub false_pair_rate: f64,
    pub unpaired_fraction: f64,
}

/// Arrival-time difference between a partner at v_rec and one at
/// v_rec (1 + spread_fraction).
pub fn pair_time_spread(beam: &BeamParameters, drop_height: f64, spread_fraction: f64) -> Result<f64> {
    if spread_fraction < 0.0 {
        return Err(Error::Domain(format!("spread fraction must be non-negative, got {spread_fraction}")));
    }
    let base = fall_time(&beam.constants, drop_height, beam.recoil_velocity)?;
    let up = fall_time(
        &beam.constants,
        drop_height,
        beam.recoil_velocity * (1.0 + spread_fraction),
    )?;
    Ok(up - base)
}

/// Joint sampler over a pattern grid, used to draw correlated lateral
/// positions for generated pairs.
#[derive(Debug, Clone)]
pub struct PatternSampler {
    cdf: Vec<f64>,
    axis_a: Vec<f64>,
    axis_b: Vec<f64>,
    pitch_a: f64,
    pitch_b: f64,
}

impl PatternSampler {
    pub fn new(pattern: &TwoParticlePattern) -> Result<Self> {
        let total: f64 = pattern.values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Validation("pattern has zero total weight".into()));
        }
        let mut cdf = Vec::with_capacity(pattern.values.len());
        let mut acc = 0.0;
        for v in &pattern.values {
            acc += v.max(0.0);
            cdf.push(acc);
        }
        let norm = 1.0 / acc;
        for c in &mut cdf {
            *c *= norm;
        }
        Ok(Self {
            cdf,
            axis_a: pattern.axis_a.clone(),
            axis_b: pattern.axis_b.clone(),
            pitch_a: pattern.pitch_a(),
            pitch_b: pattern.pitch_b(),
        })
    }

    fn sample(&self, u: f64, jitter_a: f64, jitter_b: f64) -> (f64, f64) {
        let idx = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        let nb = self.axis_b.len();
        let (i, j) = (idx / nb, idx % nb);
        (
            self.axis_a[i] + (jitter_a - 0.5) * self.pitch_a,
            self.axis_b[j] + (jitter_b - 0.5) * self.pitch_b,
        )
    }
}

/// Collision time from the truncated exponential decay.
fn collision_time(rng: &mut ChaCha8Rng, tau: f64, window: f64) -> f64 {
    let u: f64 = rng.random();
    if tau == 0.0 {
        return 0.0;
    }
    -tau * (1.0 - u * (1.0 - (-window / tau).exp())).ln()
}

/// Generate the detected events of one shot, sorted by arrival time.
pub fn simulate_shot(
    cfg: &ShotConfig,
    beam: &BeamParameters,
    shot_index: u64,
    sampler: Option<&PatternSampler>,
) -> Result<Vec<AtomEvent>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(shot_index);

    let n_pairs = if cfg.mean_pairs == 0.0 {
        0
    } else {
        let poisson = Poisson::new(cfg.mean_pairs)
            .map_err(|e| Error::Validation(format!("invalid pair mean: {e}")))?;
        poisson.sample(&mut rng) as u64
    };

    let sigma = cfg.vertical_spread_fraction * beam.recoil_velocity;
    let mut events = Vec::new();
    for pair in 0..n_pairs {
        let pair_id = shot_index << 20 | pair;
        let t_coll = collision_time(&mut rng, cfg.collision_time_constant, cfg.collision_window);
        let (pos_a, pos_b) = match sampler {
            Some(s) => {
                let u: f64 = rng.random();
                let ja: f64 = rng.random();
                let jb: f64 = rng.random();
                s.sample(u, ja, jb)
            }
            None => {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                (
                    (2.0 * a - 1.0) * cfg.lateral_half_window,
                    (2.0 * b - 1.0) * cfg.lateral_half_window,
                )
            }
        };
        for (side, pos) in [(Side::A, pos_a), (Side::B, pos_b)] {
            let z: f64 = rng.sample(StandardNormal);
            let v_z = beam.recoil_velocity + sigma * z;
            let arrival = t_coll + fall_time(&beam.constants, cfg.drop_height, v_z)?;
            let detected: f64 = rng.random();
            if detected < cfg.efficiency {
                events.push(AtomEvent { side, arrival_time: arrival, position: pos, pair_id });
            }
        }
    }
    events.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time));
    Ok(events)
}

/// Greedy nearest-in-time matching of A events against B events within the
/// window, scored against the hidden truth ids. Ties resolve by event
/// order, which keeps the degenerate all-equal-times case deterministic.
pub fn identify_pairs(events: &[AtomEvent], window: f64) -> PairingResult {
    let a_idx: Vec<usize> = (0..events.len()).filter(|&i| events[i].side == Side::A).collect();
    let b_idx: Vec<usize> = (0..events.len()).filter(|&i| events[i].side == Side::B).collect();
    let mut candidates = Vec::new();
    for &ia in &a_idx {
        for &ib in &b_idx {
            let gap = (events[ia].arrival_time - events[ib].arrival_time).abs();
            if gap <= window {
                candidates.push((gap, ia, ib));
            }
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
    });
    let mut used = vec![false; events.len()];
    let mut identified = 0usize;
    let mut true_positives = 0usize;
    for (_, ia, ib) in candidates {
        if used[ia] || used[ib] {
            continue;
        }
        used[ia] = true;
        used[ib] = true;
        identified += 1;
        if events[ia].pair_id == events[ib].pair_id {
            true_positives += 1;
        }
    }
    let tp_rate = if identified > 0 { true_positives as f64 / identified as f64 } else { 0.0 };
    PairingResult {
        identified,
        true_positives,
        true_positive_rate: tp_rate,
        false_pair_rate: if identified > 0 { 1.0 - tp_rate } else { 0.0 },
        unpaired_fraction: if events.is_empty() {
            0.0
        } else {
            (events.len() - 2 * identified) as f64 / events.len() as f64
        },
    }
}

/// Aggregate of a multi-shot run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSummary {
    pub shots: usize,
    pub events: usize,
    pub identified: usize,
    pub true_positives: usize,
    pub true_positive_rate: f64,
    pub false_pair_rate: f64,
    pub unpaired_fraction: f64,
    /// Largest arrival gap between any A event and any B event of the same
    /// shot (the confusion scale for identification).
    pub cross_gap_max: f64,
    /// Largest arrival gap between detected partners of one pair.
    pub partner_gap_max: f64,
    /// Coincidences identified per shot.
    pub identified_per_shot: f64,
}

/// Run `shots` independent shots and identify coincidences within `window`
/// per shot. Also returns the per-shot event lists for export.
pub fn run_shots(
    cfg: &ShotConfig,
    beam: &BeamParameters,
    shots: usize,
    window: f64,
    sampler: Option<&PatternSampler>,
) -> Result<(TimingSummary, Vec<Vec<AtomEvent>>)> {
    cfg.validate()?;
    if !(window > 0.0) {
        return Err(Error::Validation(format!("pairing window must be positive, got {window}")));
    }
    let per_shot: Vec<Result<(Vec<AtomEvent>, PairingResult)>> = (0..shots as u64)
        .into_par_iter()
        .map(|shot| {
            let events = simulate_shot(cfg, beam, shot, sampler)?;
            let pairing = identify_pairs(&events, window);
            Ok((events, pairing))
        })
        .collect();

    let mut all_events = Vec::with_capacity(shots);
    let mut events_total = 0usize;
    let mut identified = 0usize;
    let mut true_positives = 0usize;
    let mut cross_gap_max = 0.0f64;
    let mut partner_gap_max = 0.0f64;
    for item in per_shot {
        let (events, pairing) = item?;
        events_total += events.len();
        identified += pairing.identified;
        true_positives += pairing.true_positives;
        for a in events.iter().filter(|e| e.side == Side::A) {
            for b in events.iter().filter(|e| e.side == Side::B) {
                let gap = (a.arrival_time - b.arrival_time).abs();
                if a.pair_id == b.pair_id {
                    partner_gap_max = partner_gap_max.max(gap);
                }
                cross_gap_max = cross_gap_max.max(gap);
            }
        }
        all_events.push(events);
    }
    let tp_rate = if identified > 0 { true_positives as f64 / identified as f64 } else { 0.0 };
    Ok((
        TimingSummary {
            shots,
            events: events_total,
            identified,
            true_positives,
            true_positive_rate: tp_rate,
            false_pair_rate: if identified > 0 { 1.0 - tp_rate } else { 0.0 },
            unpaired_fraction: if events_total > 0 {
                (events_total - 2 * identified) as f64 / events_total as f64
            } else {
                0.0
            },
            cross_gap_max,
            partner_gap_max,
            identified_per_shot: identified as f64 / shots.max(1) as f64,
        },
        all_events,
    ))
}
