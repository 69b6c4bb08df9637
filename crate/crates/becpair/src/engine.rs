//! Two-particle amplitude evaluation and coherent integration over the
//! extended source.
//!
//! For every emission point the amplitude is a superposition of equal-weight
//! path terms exp(i k L); the extended-source pattern coherently sums those
//! amplitudes over a midpoint-rule sample grid of the source, then takes the
//! modulus squared. The per-pixel accumulation order is fixed (row-major
//! over source samples), so the result is bitwise independent of the worker
//! count: parallelism only ever splits work across detector pixels or table
//! entries, never across the coherent sum of one pixel.
//!
//! Numerical conditioning: a constant reference length (L1 + L2 per side) is
//! subtracted from every path before multiplying by k. This is an exact
//! global phase common to all terms and all emission points, so |psi|^2 is
//! unchanged, while the trigonometric arguments drop from ~1e5 rad to a few
//! hundred rad.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    segment, slit_points, ExperimentGeometry, Mode, PathSet, Point, Side, SourceRegion,
};

/// Maximum per-step phase increment allowed by the sampling rule, rad.
pub const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_4;

/// Relative deviation the halving study must reach before a pattern is
/// reported.
pub const CONVERGENCE_LIMIT: f64 = 1e-3;

/// Maximum number of halvings attempted by [`converged_pattern`].
pub const MAX_REFINEMENTS: usize = 4;

/// Axes whose per-step phase increment is already below this floor are not
/// halved further; their midpoint-rule error is bounded well under the
/// convergence limit.
const PHASE_STEP_FLOOR: f64 = std::f64::consts::PI / 64.0;

/// Detector pixel grid: `count_a` x `count_b` pixels spanning
/// +-`half_window` on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_window: f64,
    pub count_a: usize,
    pub count_b: usize,
}

impl GridSpec {
    pub fn new(half_window: f64, count_a: usize, count_b: usize) -> Result<Self> {
        if !(half_window > 0.0) || !half_window.is_finite() {
            return Err(Error::Validation(format!("detector window must be positive, got {half_window}")));
        }
        if count_a < 2 || count_b < 2 {
            return Err(Error::Validation(format!(
                "detector grid needs at least 2 pixels per axis, got {count_a}x{count_b}"
            )));
        }
        Ok(Self { half_window, count_a, count_b })
    }

    pub fn axis(&self, side: Side) -> Vec<f64> {
        let n = match side {
            Side::A => self.count_a,
            Side::B => self.count_b,
        };
        let pitch = 2.0 * self.half_window / (n - 1) as f64;
        (0..n).map(|i| -self.half_window + i as f64 * pitch).collect()
    }
}

/// Engine accuracy/physics options beyond the geometry itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Keep the 1/r spherical-wave prefactor per segment instead of
    /// dropping it (it is practically constant in the far field).
    pub spherical_prefactor: bool,
    /// Full slit width, m. Zero models ideal point slits.
    pub slit_width: f64,
    /// Sub-points per slit when `slit_width > 0`.
    pub slit_subpoints: usize,
    /// Integrate over the source z extent as well (default: the top-view
    /// plane only, z_S = 0).
    pub integrate_z: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self { spherical_prefactor: false, slit_width: 0.0, slit_subpoints: 1, integrate_z: false }
    }
}

/// Midpoint-rule sampling of the source region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSampling {
    pub counts: [usize; 3],
}

impl SourceSampling {
    pub fn from_counts(counts: [usize; 3]) -> Result<Self> {
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::Validation("sample counts must be >= 1 on every axis".into()));
        }
        Ok(Self { counts })
    }

    /// Sampling that satisfies the phase rule with `oversample` extra
    /// refinement (1 = exactly the rule limit).
    pub fn auto(
        geom: &ExperimentGeometry,
        source: &SourceRegion,
        grid: &GridSpec,
        lambda_db: f64,
        opts: &EngineOptions,
        oversample: f64,
    ) -> Self {
        let oversample = oversample.max(1.0);
        let limits = max_steps(geom, source, grid, lambda_db);
        let mut counts = [1usize; 3];
        for axis in 0..3 {
            let extent = effective_extent(source, opts)[axis];
            if extent > 0.0 {
                counts[axis] = (extent / (limits[axis] / oversample)).ceil().max(1.0) as usize;
            }
        }
        Self { counts }
    }

    /// Actual step sizes for a given source region (extent / count; zero on
    /// point-like axes).
    pub fn steps(&self, source: &SourceRegion, opts: &EngineOptions) -> [f64; 3] {
        let ext = effective_extent(source, opts);
        let mut s = [0.0; 3];
        for axis in 0..3 {
            if ext[axis] > 0.0 {
                s[axis] = ext[axis] / self.counts[axis] as f64;
            }
        }
        s
    }

    pub fn total_samples(&self) -> usize {
        self.counts.iter().product()
    }

    /// Enforce the phase sampling rule: each axis step must keep the
    /// per-step phase increment at or below pi/4.
    pub fn validate(
        &self,
        geom: &ExperimentGeometry,
        source: &SourceRegion,
        grid: &GridSpec,
        lambda_db: f64,
        opts: &EngineOptions,
    ) -> Result<()> {
        let limits = max_steps(geom, source, grid, lambda_db);
        let steps = self.steps(source, opts);
        for (axis, label) in ['x', 'y', 'z'].into_iter().enumerate() {
            if steps[axis] > limits[axis] * (1.0 + 1e-12) {
                return Err(Error::SamplingRule { axis: label, step: steps[axis], required: limits[axis] });
            }
        }
        Ok(())
    }

    /// Halve the step on every axis that still matters for accuracy.
    /// Axes whose per-step phase is already below the floor keep their
    /// count; if nothing qualifies the sampling is returned unchanged.
    pub fn halved(
        &self,
        geom: &ExperimentGeometry,
        source: &SourceRegion,
        grid: &GridSpec,
        lambda_db: f64,
        opts: &EngineOptions,
    ) -> Self {
        let k = std::f64::consts::TAU / lambda_db;
        let gradients = phase_gradients(geom, source, grid);
        let steps = self.steps(source, opts);
        let mut counts = self.counts;
        for axis in 0..3 {
            if steps[axis] > 0.0 && k * steps[axis] * gradients[axis] > PHASE_STEP_FLOOR {
                counts[axis] *= 2;
            }
        }
        Self { counts }
    }
}

/// Effective extents after applying the 2-D default (z collapsed unless
/// `integrate_z` is set).
fn effective_extent(source: &SourceRegion, opts: &EngineOptions) -> [f64; 3] {
    let mut e = source.extent;
    if !opts.integrate_z {
        e[2] = 0.0;
    }
    e
}

/// Conservative per-axis bounds on |d(phase)/d(axis)| / k over the source,
/// slits and detector window.
fn phase_gradients(geom: &ExperimentGeometry, source: &SourceRegion, grid: &GridSpec) -> [f64; 3] {
    let d = geom.slit_separation;
    let l1 = geom.source_slit_distance;
    let l2 = geom.slit_detector_distance;
    let t = d + grid.half_window + source.extent[0] / 2.0;
    // x: direction-cosine differences on both sides and both segments.
    let gx = 2.0 * (t / l1 + t / l2);
    // y: leading terms cancel between the receding sides; the residual is
    // second order in the transverse offsets.
    let gy = (t / l1) * (t / l1);
    // z: both sides accrue the same sign, plus the quadratic residual.
    let gz = source.extent[2] / l1 + gy;
    [gx, gy.max(1e-12), gz.max(1e-12)]
}

/// Largest step allowed per axis by the pi/4 phase rule.
fn max_steps(geom: &ExperimentGeometry, source: &SourceRegion, grid: &GridSpec, lambda_db: f64) -> [f64; 3] {
    let g = phase_gradients(geom, source, grid);
    let k = std::f64::consts::TAU / lambda_db;
    [
        MAX_PHASE_STEP / (k * g[0]),
        MAX_PHASE_STEP / (k * g[1]),
        MAX_PHASE_STEP / (k * g[2]),
    ]
}

/// Discretized |psi_AB(x_A, x_B)|^2 with axis metadata and the inputs that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticlePattern {
    pub axis_a: Vec<f64>,
    pub axis_b: Vec<f64>,
    /// Row-major values: `values[i * axis_b.len() + j]` for (x_A[i], x_B[j]).
    pub values: Vec<f64>,
    pub normalized: bool,
    pub mode: Mode,
    pub lambda_db: f64,
    pub geometry: ExperimentGeometry,
    pub source: SourceRegion,
}

impl TwoParticlePattern {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axis_b.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.axis_b.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn pitch_a(&self) -> f64 {
        self.axis_a[1] - self.axis_a[0]
    }

    pub fn pitch_b(&self) -> f64 {
        self.axis_b[1] - self.axis_b[0]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Nearest pixel index on an axis; errors when the position falls
    /// outside the grid window.
    pub fn nearest_index(&self, side: Side, x: f64) -> Result<usize> {
        let axis = match side {
            Side::A => &self.axis_a,
            Side::B => &self.axis_b,
        };
        let pitch = axis[1] - axis[0];
        let lo = axis[0] - 0.5 * pitch;
        let hi = axis[axis.len() - 1] + 0.5 * pitch;
        if x < lo || x > hi {
            return Err(Error::Range(format!(
                "position {x:.6e} m lies outside the detector window [{:.6e}, {:.6e}]",
                axis[0],
                axis[axis.len() - 1]
            )));
        }
        let idx = ((x - axis[0]) / pitch).round() as isize;
        Ok(idx.clamp(0, axis.len() as isize - 1) as usize)
    }

    /// Scale so that sum(P) * dxA * dxB = 1 and set the flag.
    pub fn normalize(&mut self) {
        let cell = self.pitch_a() * self.pitch_b();
        let total = self.total() * cell;
        if total > 0.0 {
            let inv = 1.0 / total;
            for v in &mut self.values {
                *v *= inv;
            }
        }
        self.normalized = true;
    }
}

/// Four-term superposition for one emission point in double double-slit
/// mode, with k = 2 pi / lambda_dB. Equal to the product of the per-side
/// two-path sums.
pub fn point_amplitude_dds(paths: &PathSet, lambda_db: f64) -> Complex64 {
    let k = std::f64::consts::TAU / lambda_db;
    match paths {
        PathSet::Dds { a, b } => {
            let mut sum = Complex64::new(0.0, 0.0);
            for la in a {
                for lb in b {
                    sum += Complex64::from_polar(1.0, k * (la + lb));
                }
            }
            sum
        }
        PathSet::Ghost { .. } => panic!("point_amplitude_dds requires dds paths"),
    }
}

/// Two-term superposition for one emission point in ghost mode.
pub fn point_amplitude_ghost(paths: &PathSet, lambda_db: f64) -> Complex64 {
    let k = std::f64::consts::TAU / lambda_db;
    match paths {
        PathSet::Ghost { a, b } => {
            Complex64::from_polar(1.0, k * (a[0] + b)) + Complex64::from_polar(1.0, k * (a[1] + b))
        }
        PathSet::Dds { .. } => panic!("point_amplitude_ghost requires ghost paths"),
    }
}

/// Emission points and weights in fixed row-major order (x outermost).
fn source_samples(source: &SourceRegion, sampling: &SourceSampling, opts: &EngineOptions) -> Vec<(Point, f64)> {
    let ext = effective_extent(source, opts);
    let positions = |axis: usize| -> Vec<f64> {
        let n = sampling.counts[axis];
        if ext[axis] == 0.0 {
            return vec![0.0];
        }
        let step = ext[axis] / n as f64;
        (0..n).map(|i| -ext[axis] / 2.0 + (i as f64 + 0.5) * step).collect()
    };
    let (xs, ys, zs) = (positions(0), positions(1), positions(2));
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                let p = [x, y, z];
                out.push((p, source.weight(p)));
            }
        }
    }
    out
}

/// Slit sub-points for one side: the ideal point per slit, or `slit_subpoints`
/// midpoints across `slit_width` when a finite width is requested.
fn side_slits(geom: &ExperimentGeometry, side: Side, opts: &EngineOptions) -> Vec<Point> {
    let all = slit_points(geom);
    let pair: &[Point] = match side {
        Side::A => &all[0..2],
        Side::B => &all[2..4],
    };
    if opts.slit_width <= 0.0 || opts.slit_subpoints <= 1 {
        return pair.to_vec();
    }
    let n = opts.slit_subpoints;
    let step = opts.slit_width / n as f64;
    let mut out = Vec::with_capacity(2 * n);
    for slit in pair {
        for i in 0..n {
            let dx = -opts.slit_width / 2.0 + (i as f64 + 0.5) * step;
            out.push([slit[0] + dx, slit[1], slit[2]]);
        }
    }
    out
}

/// Per-side factor: sum over this side's paths of exp(i k (L - ref)).
fn side_factor(
    k: f64,
    src: Point,
    slits: &[Point],
    det: Point,
    phase_ref: f64,
    opts: &EngineOptions,
) -> Complex64 {
    let norm = 1.0 / (slits.len() as f64 / 2.0).max(1.0); // keep point-slit scale per slit pair
    let mut sum = Complex64::new(0.0, 0.0);
    for slit in slits {
        let l1 = segment(src, *slit);
        let l2 = segment(*slit, det);
        let amp = if opts.spherical_prefactor { norm / (l1 * l2) } else { norm };
        sum += Complex64::from_polar(amp, k * (l1 + l2 - phase_ref));
    }
    sum
}

/// Ghost side B: single direct segment.
fn direct_factor(k: f64, src: Point, det: Point, phase_ref: f64, opts: &EngineOptions) -> Complex64 {
    let l = segment(src, det);
    let amp = if opts.spherical_prefactor { 1.0 / l } else { 1.0 };
    Complex64::from_polar(amp, k * (l - phase_ref))
}

/// Coherent integration of the point amplitudes over the sampled source,
/// producing |psi_AB|^2 on the detector grid.
pub fn integrate_source(
    geom: &ExperimentGeometry,
    source: &SourceRegion,
    sampling: &SourceSampling,
    grid: &GridSpec,
    lambda_db: f64,
    opts: &EngineOptions,
) -> Result<TwoParticlePattern> {
    if !(lambda_db > 0.0) {
        return Err(Error::Domain(format!("de Broglie wavelength must be positive, got {lambda_db}")));
    }
    sampling.validate(geom, source, grid, lambda_db, opts)?;

    let axis_a = grid.axis(Side::A);
    let axis_b = grid.axis(Side::B);
    let (n_a, n_b) = (axis_a.len(), axis_b.len());
    let k = std::f64::consts::TAU / lambda_db;
    let phase_ref = geom.detector_offset();

    let samples = source_samples(source, sampling, opts);
    let total_weight: f64 = samples.iter().map(|s| s.1).sum();
    if !(total_weight > 0.0) {
        return Err(Error::Validation("source weighting sums to zero over the sample grid".into()));
    }

    let slits_a = side_slits(geom, Side::A, opts);
    let slits_b = match geom.mode {
        Mode::DoubleDoubleSlit => side_slits(geom, Side::B, opts),
        Mode::Ghost => Vec::new(),
    };
    let det_a: Vec<Point> = axis_a.iter().map(|&x| geom.detector_point(Side::A, x)).collect();
    let det_b: Vec<Point> = axis_b.iter().map(|&x| geom.detector_point(Side::B, x)).collect();

    let mut acc = vec![Complex64::new(0.0, 0.0); n_a * n_b];

    // Table block size bounds the factor-table memory while preserving the
    // global sample order inside every pixel's accumulation.
    const BLOCK: usize = 2048;
    let mut fa = vec![Complex64::new(0.0, 0.0); BLOCK.min(samples.len()) * n_a];
    let mut fb = vec![Complex64::new(0.0, 0.0); BLOCK.min(samples.len()) * n_b];

    for block in samples.chunks(BLOCK) {
        let nble = block.len();
        fa[..nble * n_a]
            .par_chunks_mut(n_a)
            .zip(block.par_iter())
            .for_each(|(row, (src, _))| {
                for (f, det) in row.iter_mut().zip(&det_a) {
                    *f = side_factor(k, *src, &slits_a, *det, phase_ref, opts);
                }
            });
        fb[..nble * n_b]
            .par_chunks_mut(n_b)
            .zip(block.par_iter())
            .for_each(|(row, (src, _))| match geom.mode {
                Mode::DoubleDoubleSlit => {
                    for (f, det) in row.iter_mut().zip(&det_b) {
                        *f = side_factor(k, *src, &slits_b, *det, phase_ref, opts);
                    }
                }
                Mode::Ghost => {
                    for (f, det) in row.iter_mut().zip(&det_b) {
                        *f = direct_factor(k, *src, *det, phase_ref, opts);
                    }
                }
            });

        let fa = &fa;
        let fb = &fb;
        acc.par_chunks_mut(n_b).enumerate().for_each(|(i, row)| {
            for (s, (_, w)) in block.iter().enumerate() {
                let a = fa[s * n_a + i] * *w;
                let bs = &fb[s * n_b..s * n_b + n_b];
                for (r, b) in row.iter_mut().zip(bs) {
                    *r += a * b;
                }
            }
        });
    }

    let inv_w = 1.0 / total_weight;
    let values: Vec<f64> = acc.iter().map(|c| (c * inv_w).norm_sqr()).collect();

    Ok(TwoParticlePattern {
        axis_a,
        axis_b,
        values,
        normalized: false,
        mode: geom.mode,
        lambda_db,
        geometry: *geom,
        source: *source,
    })
}

/// Max-norm deviation of two patterns after peak normalization.
pub fn convergence_check(coarse: &TwoParticlePattern, fine: &TwoParticlePattern) -> Result<f64> {
    if coarse.axis_a != fine.axis_a || coarse.axis_b != fine.axis_b {
        return Err(Error::Usage("convergence check requires patterns on the same grid".into()));
    }
    let (pa, pb) = (coarse.peak(), fine.peak());
    if pa == 0.0 && pb == 0.0 {
        return Ok(0.0);
    }
    if pa == 0.0 || pb == 0.0 {
        return Ok(1.0);
    }
    let mut dev: f64 = 0.0;
    for (a, b) in coarse.values.iter().zip(&fine.values) {
        dev = dev.max((a / pa - b / pb).abs());
    }
    Ok(dev)
}

/// Result of the halving study performed by [`converged_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    /// Peak-normalized max-norm deviation between the last two refinements.
    pub deviation: f64,
    /// Number of halvings performed beyond the initial sampling.
    pub refinements: usize,
    /// Sampling of the accepted pattern.
    pub sampling: SourceSampling,
    pub limit: f64,
}

/// Compute the pattern and refine the source sampling by halving until the
/// deviation between successive refinements drops below
/// [`CONVERGENCE_LIMIT`]. The accepted pattern is always the finest one.
pub fn converged_pattern(
    geom: &ExperimentGeometry,
    source: &SourceRegion,
    grid: &GridSpec,
    lambda_db: f64,
    opts: &EngineOptions,
    initial: Option<SourceSampling>,
) -> Result<(TwoParticlePattern, ConvergenceReport)> {
    let mut sampling = initial.unwrap_or_else(|| SourceSampling::auto(geom, source, grid, lambda_db, opts, 2.0));
    let mut current = integrate_source(geom, source, &sampling, grid, lambda_db, opts)?;
    let mut deviation = f64::INFINITY;
    for refinement in 0..=MAX_REFINEMENTS {
        let finer_sampling = sampling.halved(geom, source, grid, lambda_db, opts);
        if finer_sampling == sampling {
            // Nothing left to refine (point source or steps below the floor).
            return Ok((
                current,
                ConvergenceReport { deviation: 0.0, refinements: refinement, sampling, limit: CONVERGENCE_LIMIT },
            ));
        }
        let finer = integrate_source(geom, source, &finer_sampling, grid, lambda_db, opts)?;
        deviation = convergence_check(&current, &finer)?;
        sampling = finer_sampling;
        current = finer;
        if deviation < CONVERGENCE_LIMIT {
            return Ok((
                current,
                ConvergenceReport { deviation, refinements: refinement + 1, sampling, limit: CONVERGENCE_LIMIT },
            ));
        }
    }
    Err(Error::Convergence { deviation, refinements: MAX_REFINEMENTS, limit: CONVERGENCE_LIMIT })
}
