//! Reduction of computed patterns to observables: conditional slices,
//! fringe fits, one- and two-particle visibilities, factorizability and
//! closed-form reference patterns.

use crate::engine::{GridSpec, TwoParticlePattern};
use crate::error::{Error, Result};
use crate::feasibility::fringe_distances;
use crate::geometry::{ExperimentGeometry, Mode, Side, SourceRegion};

/// A 1-D profile extracted from a pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Least-squares fit of A cos^2(pi (x - x0) / p) + B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    /// Fringe period p, m.
    pub period: f64,
    /// Peak position x0, m, wrapped into (-p/2, p/2].
    pub phase_offset: f64,
    /// (max - min) / (max + min) of the fitted model, clamped to [0, 1].
    pub visibility: f64,
    /// RMS residual as a fraction of the profile peak.
    pub residual: f64,
    /// False when the period search ran into its scan bounds.
    pub converged: bool,
}

/// Correlation structure of a two-particle pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationClass {
    None,
    /// Conditional maxima follow x_B ~ +x_A.
    Diagonal,
    /// Conditional maxima follow x_B ~ -x_A.
    AntiDiagonal,
}

impl CorrelationClass {
    pub fn label(self) -> &'static str {
        match self {
            CorrelationClass::None => "none",
            CorrelationClass::Diagonal => "diagonal",
            CorrelationClass::AntiDiagonal => "anti-diagonal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationDiagnosis {
    pub class: CorrelationClass,
    /// sigma_1^2 / sum sigma_k^2 of the pattern matrix; 1 iff the pattern
    /// factorizes exactly.
    pub rank1_fraction: f64,
    /// Visibility of the profile over x_A/d_A - x_B/d_B.
    pub diagonal_visibility: f64,
    /// Visibility of the profile over x_A/d_A + x_B/d_B.
    pub antidiagonal_visibility: f64,
}

/// Correlated coordinate used for two-particle visibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationAxis {
    /// u = x_A - x_B (double double-slit correlations).
    Difference,
    /// u = x_A + x_B (ghost correlations).
    Sum,
}

/// Closed-form reference regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Product,
    Diagonal,
    AntiDiagonal,
}

/// Row or column of the pattern at the conditioning detector position
/// (nearest pixel). The profile runs over the opposite side's axis.
pub fn conditional_slice(
    pattern: &TwoParticlePattern,
    conditioning_side: Side,
    at: f64,
) -> Result<Profile> {
    let idx = pattern.nearest_index(conditioning_side, at)?;
    match conditioning_side {
        Side::A => Ok(Profile { x: pattern.axis_b.clone(), y: pattern.row(idx).to_vec() }),
        Side::B => {
            let y = (0..pattern.axis_a.len()).map(|i| pattern.at(i, idx)).collect();
            Ok(Profile { x: pattern.axis_a.clone(), y })
        }
    }
}

/// Per-side single-particle fringe distances implied by the pattern's
/// geometry snapshot (side A, side B).
pub fn side_fringe_distances(pattern: &TwoParticlePattern) -> (f64, f64) {
    let d = fringe_distances(&pattern.geometry, pattern.lambda_db);
    match pattern.mode {
        Mode::DoubleDoubleSlit => (d.dds, d.dds),
        Mode::Ghost => (d.ghost_a, d.ghost_b),
    }
}

/// Expected period of the correlated-coordinate profile.
pub fn correlated_period(pattern: &TwoParticlePattern) -> f64 {
    let (da, db) = side_fringe_distances(pattern);
    2.0 * da * db / (da + db)
}

struct CosFit {
    period: f64,
    amplitude: f64,
    mean: f64,
    phase: f64,
    sse: f64,
    at_bound: bool,
}

/// Linear LS of y = c0 + c1 cos(w x) + c2 sin(w x) for fixed w; returns
/// (c0, c1, c2, sse).
fn linear_cos_fit(x: &[f64], y: &[f64], center: f64, omega: f64) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let (mut sc, mut ss, mut scc, mut sss, mut scs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut syc, mut sys) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (s, c) = (omega * (xi - center)).sin_cos();
        sc += c;
        ss += s;
        scc += c * c;
        sss += s * s;
        scs += c * s;
        sy += yi;
        syc += yi * c;
        sys += yi * s;
    }
    // 3x3 normal equations, solved by Gaussian elimination with partial
    // pivoting.
    let mut m = [
        [n, sc, ss, sy],
        [sc, scc, scs, syc],
        [ss, scs, sss, sys],
    ];
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, pivot);
        if m[col][col].abs() < 1e-300 {
            return (sy / n, 0.0, 0.0, f64::INFINITY);
        }
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let c2 = m[2][3] / m[2][2];
    let c1 = (m[1][3] - m[1][2] * c2) / m[1][1];
    let c0 = (m[0][3] - m[0][1] * c1 - m[0][2] * c2) / m[0][0];
    let mut sse = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let (s, c) = (omega * (xi - center)).sin_cos();
        let r = yi - (c0 + c1 * c + c2 * s);
        sse += r * r;
    }
    (c0, c1, c2, sse)
}

/// Scan periods around the hint, then refine the best candidate by golden
/// section.
fn scan_cos_fit(x: &[f64], y: &[f64], period_hint: f64) -> CosFit {
    let center = x.iter().sum::<f64>() / x.len() as f64;
    let lo = 0.5 * period_hint;
    let hi = 2.0 * period_hint;
    let steps = 600;
    let mut best = (f64::INFINITY, period_hint);
    for i in 0..=steps {
        let p = lo + (hi - lo) * i as f64 / steps as f64;
        let (_, _, _, sse) = linear_cos_fit(x, y, center, std::f64::consts::TAU / p);
        if sse < best.0 {
            best = (sse, p);
        }
    }
    let span = (hi - lo) / steps as f64;
    let (mut a, mut b) = ((best.1 - span).max(lo), (best.1 + span).min(hi));
    let sse_at = |p: f64| linear_cos_fit(x, y, center, std::f64::consts::TAU / p).3;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut p1, mut p2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (sse_at(p1), sse_at(p2));
    for _ in 0..100 {
        if (b - a) < 1e-9 * period_hint {
            break;
        }
        if f1 < f2 {
            b = p2;
            p2 = p1;
            f2 = f1;
            p1 = b - phi * (b - a);
            f1 = sse_at(p1);
        } else {
            a = p1;
            p1 = p2;
            f1 = f2;
            p2 = a + phi * (b - a);
            f2 = sse_at(p2);
        }
    }
    let period = 0.5 * (a + b);
    let (c0, c1, c2, sse) = linear_cos_fit(x, y, center, std::f64::consts::TAU / period);
    let amplitude = c1.hypot(c2);
    let phase = center + c2.atan2(c1) * period / std::f64::consts::TAU;
    let at_bound = period < lo * 1.005 || period > hi * 0.995;
    CosFit { period, amplitude, mean: c0, phase, sse, at_bound }
}

/// Least-squares fit of A cos^2(pi (x - x0)/p) + B against a profile.
/// The profile must span at least two periods of the hint.
pub fn fit_fringes(profile: &Profile, period_hint: f64) -> Result<FringeFit> {
    if !(period_hint > 0.0) || !period_hint.is_finite() {
        return Err(Error::Domain(format!("period hint must be positive, got {period_hint}")));
    }
    if profile.x.len() < 8 {
        return Err(Error::Validation(format!("profile has only {} points", profile.x.len())));
    }
    let span = profile.x[profile.x.len() - 1] - profile.x[0];
    if span < 2.0 * period_hint {
        return Err(Error::Validation(format!(
            "profile spans {span:.3e} m, need at least two periods of the hint ({:.3e} m)",
            2.0 * period_hint
        )));
    }
    // A cos^2(pi (x-x0)/p) + B == (A/2 + B) + (A/2) cos(2 pi (x-x0)/p):
    // fit the cosine component at period p.
    let fit = scan_cos_fit(&profile.x, &profile.y, period_hint);
    let peak = profile.y.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let visibility = if fit.mean.abs() > 0.0 && fit.mean.is_finite() {
        (fit.amplitude / fit.mean).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut offset = fit.phase % fit.period;
    if offset > fit.period / 2.0 {
        offset -= fit.period;
    }
    if offset <= -fit.period / 2.0 {
        offset += fit.period;
    }
    let residual = if peak > 0.0 { (fit.sse / profile.x.len() as f64).sqrt() / peak } else { 0.0 };
    Ok(FringeFit {
        period: fit.period,
        phase_offset: offset,
        visibility,
        residual,
        converged: !fit.at_bound && fit.mean.is_finite(),
    })
}

fn require_square(pattern: &TwoParticlePattern) -> Result<()> {
    if pattern.axis_a.len() != pattern.axis_b.len()
        || (pattern.axis_a[0] - pattern.axis_b[0]).abs() > 1e-15
    {
        return Err(Error::Validation("pattern grid must be square in extent".into()));
    }
    Ok(())
}

/// Average of the pattern at fixed u = x_A -+ x_B, restricted to the
/// central window |u| <= half_window.
pub fn correlated_profile(pattern: &TwoParticlePattern, axis: CorrelationAxis) -> Result<Profile> {
    require_square(pattern)?;
    Ok(raw_correlated_profile(&pattern.axis_a, pattern.axis_b.len(), &pattern.values, axis))
}

fn raw_correlated_profile(axis_vals: &[f64], n: usize, values: &[f64], axis: CorrelationAxis) -> Profile {
    let pitch = axis_vals[1] - axis_vals[0];
    let half_window = axis_vals[n - 1];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    match axis {
        CorrelationAxis::Difference => {
            for k in -(n as isize - 1)..=(n as isize - 1) {
                let u = k as f64 * pitch;
                if u.abs() > half_window * (1.0 + 1e-12) {
                    continue;
                }
                let (lo, hi) = (k.max(0), (n as isize + k).min(n as isize));
                let mut sum = 0.0;
                for i in lo..hi {
                    sum += values[i as usize * n + (i - k) as usize];
                }
                xs.push(u);
                ys.push(sum / (hi - lo) as f64);
            }
        }
        CorrelationAxis::Sum => {
            for c in 0..(2 * n - 1) as isize {
                let u = (c - (n as isize - 1)) as f64 * pitch;
                if u.abs() > half_window * (1.0 + 1e-12) {
                    continue;
                }
                let (lo, hi) = ((c - (n as isize - 1)).max(0), c.min(n as isize - 1));
                let mut sum = 0.0;
                for i in lo..=hi {
                    sum += values[i as usize * n + (c - i) as usize];
                }
                xs.push(u);
                ys.push(sum / (hi - lo + 1) as f64);
            }
        }
    }
    Profile { x: xs, y: ys }
}

/// Visibility of the fitted fringe model on the correlated-coordinate
/// profile. Product patterns score up to ~1/2 here; see
/// [`corrected_two_particle_visibility`] for the background-subtracted
/// variant.
pub fn two_particle_visibility(pattern: &TwoParticlePattern, axis: CorrelationAxis) -> Result<f64> {
    let profile = correlated_profile(pattern, axis)?;
    let fit = fit_fringes(&profile, correlated_period(pattern))?;
    Ok(fit.visibility)
}

/// Two-particle visibility in excess of the factorizable background: the
/// profile of the marginals' outer product is subtracted before measuring
/// the fringe amplitude, so any product pattern scores ~0 while an ideal
/// correlated cos^2 pattern still scores 1.
pub fn corrected_two_particle_visibility(
    pattern: &TwoParticlePattern,
    axis: CorrelationAxis,
) -> Result<f64> {
    require_square(pattern)?;
    let n = pattern.axis_b.len();
    let total: f64 = pattern.total();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let mut marg_a = vec![0.0; n];
    let mut marg_b = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let v = pattern.at(i, j);
            marg_a[i] += v;
            marg_b[j] += v;
        }
    }
    let baseline: Vec<f64> = (0..n * n)
        .map(|idx| marg_a[idx / n] * marg_b[idx % n] / total)
        .collect();
    let raw = raw_correlated_profile(&pattern.axis_a, n, &pattern.values, axis);
    let base = raw_correlated_profile(&pattern.axis_a, n, &baseline, axis);
    let residual = Profile {
        x: raw.x.clone(),
        y: raw.y.iter().zip(&base.y).map(|(r, b)| r - b).collect(),
    };
    let hint = correlated_period(pattern);
    let span = residual.x[residual.x.len() - 1] - residual.x[0];
    if span < 2.0 * hint {
        return Err(Error::Validation(format!(
            "correlated profile spans {span:.3e} m, need two periods of {hint:.3e} m"
        )));
    }
    let fit = scan_cos_fit(&residual.x, &residual.y, hint);
    let mean_raw = raw.y.iter().sum::<f64>() / raw.y.len() as f64;
    if mean_raw <= 0.0 {
        return Ok(0.0);
    }
    Ok((fit.amplitude / mean_raw).clamp(0.0, 1.0))
}

/// Marginal (single-particle) profile on one side: the pattern integrated
/// over the other side's coordinate.
pub fn marginal_profile(pattern: &TwoParticlePattern, side: Side) -> Profile {
    let (na, nb) = (pattern.axis_a.len(), pattern.axis_b.len());
    match side {
        Side::A => {
            let y = (0..na).map(|i| pattern.row(i).iter().sum::<f64>() * pattern.pitch_b()).collect();
            Profile { x: pattern.axis_a.clone(), y }
        }
        Side::B => {
            let mut y = vec![0.0; nb];
            for i in 0..na {
                for (j, v) in pattern.row(i).iter().enumerate() {
                    y[j] += v;
                }
            }
            for v in &mut y {
                *v *= pattern.pitch_a();
            }
            Profile { x: pattern.axis_b.clone(), y }
        }
    }
}

/// Fringe visibility of the marginal on one side, fitted at that side's
/// single-particle fringe distance.
pub fn marginal_visibility(pattern: &TwoParticlePattern, side: Side) -> Result<f64> {
    let profile = marginal_profile(pattern, side);
    let (da, db) = side_fringe_distances(pattern);
    let hint = match side {
        Side::A => da,
        Side::B => db,
    };
    Ok(fit_fringes(&profile, hint)?.visibility)
}

/// Scaled-coordinate profile w = x_A/d_A -+ x_B/d_B, binned; fringes have
/// period 1 in w whatever the per-side periods are.
fn scaled_profile(pattern: &TwoParticlePattern, sign_sum: bool) -> Profile {
    let (da, db) = side_fringe_distances(pattern);
    let n = pattern.axis_b.len();
    let pitch = pattern.pitch_a();
    let bin = 0.5 * (pitch / da + pitch / db);
    let half_range = 0.5 * (pattern.axis_a[n - 1] / da + pattern.axis_b[n - 1] / db);
    let nbins = (2.0 * half_range / bin).ceil() as usize + 1;
    let mut sums = vec![0.0; nbins];
    let mut counts = vec![0usize; nbins];
    for (i, &xa) in pattern.axis_a.iter().enumerate() {
        for (j, &xb) in pattern.axis_b.iter().enumerate() {
            let w = xa / da + if sign_sum { xb / db } else { -xb / db };
            if w.abs() > half_range {
                continue;
            }
            let idx = (((w + half_range) / bin) as usize).min(nbins - 1);
            sums[idx] += pattern.at(i, j);
            counts[idx] += 1;
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, (&s, &c)) in sums.iter().zip(&counts).enumerate() {
        if c > 0 {
            xs.push(-half_range + (idx as f64 + 0.5) * bin);
            ys.push(s / c as f64);
        }
    }
    Profile { x: xs, y: ys }
}

/// Largest squared singular value as a fraction of the squared Frobenius
/// norm, by power iteration on P^T P. The pattern is non-negative, so the
/// all-ones start vector always overlaps the leading singular space.
pub fn rank1_fraction(pattern: &TwoParticlePattern) -> f64 {
    let (na, nb) = (pattern.axis_a.len(), pattern.axis_b.len());
    let frob: f64 = pattern.values.iter().map(|v| v * v).sum();
    if frob == 0.0 {
        return 1.0;
    }
    let mut v = vec![1.0 / (nb as f64).sqrt(); nb];
    let mut w = vec![0.0; na];
    let mut lambda_prev = 0.0;
    for _ in 0..10_000 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = pattern.row(i).iter().zip(&v).map(|(p, vj)| p * vj).sum();
        }
        let lambda: f64 = w.iter().map(|x| x * x).sum();
        for vj in v.iter_mut() {
            *vj = 0.0;
        }
        for (i, &wi) in w.iter().enumerate() {
            for (vj, p) in v.iter_mut().zip(pattern.row(i)) {
                *vj += p * wi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        for vj in v.iter_mut() {
            *vj /= norm;
        }
        if (lambda - lambda_prev).abs() <= 1e-13 * lambda.max(f64::MIN_POSITIVE) {
            return (lambda / frob).min(1.0);
        }
        lambda_prev = lambda;
    }
    (lambda_prev / frob).min(1.0)
}

/// Singular-spectrum and conditional-maxima diagnosis of the correlation
/// structure.
pub fn factorizability(pattern: &TwoParticlePattern) -> Result<CorrelationDiagnosis> {
    require_square(pattern)?;
    let fraction = rank1_fraction(pattern);
    let diag = scaled_profile(pattern, false);
    let anti = scaled_profile(pattern, true);
    let vis = |p: &Profile| -> f64 {
        if p.x.len() < 8 || p.x[p.x.len() - 1] - p.x[0] < 2.0 {
            return 0.0;
        }
        let fit = scan_cos_fit(&p.x, &p.y, 1.0);
        if fit.mean > 0.0 {
            (fit.amplitude / fit.mean).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    let vd = vis(&diag);
    let va = vis(&anti);
    let class = if vd >= 0.2 && vd >= 2.0 * va {
        CorrelationClass::Diagonal
    } else if va >= 0.2 && va >= 2.0 * vd {
        CorrelationClass::AntiDiagonal
    } else {
        CorrelationClass::None
    };
    Ok(CorrelationDiagnosis {
        class,
        rank1_fraction: fraction,
        diagonal_visibility: vd,
        antidiagonal_visibility: va,
    })
}

/// Closed-form limiting patterns on the same grid layout the engine uses.
pub fn analytic_reference(
    mode: Mode,
    regime: Regime,
    geom: &ExperimentGeometry,
    lambda_db: f64,
    grid: &GridSpec,
) -> TwoParticlePattern {
    let d = fringe_distances(geom, lambda_db);
    let (da, db) = match mode {
        Mode::DoubleDoubleSlit => (d.dds, d.dds),
        Mode::Ghost => (d.ghost_a, d.ghost_b),
    };
    let axis_a = grid.axis(Side::A);
    let axis_b = grid.axis(Side::B);
    let mut values = Vec::with_capacity(axis_a.len() * axis_b.len());
    let cos2 = |t: f64| {
        let c = (std::f64::consts::PI * t).cos();
        c * c
    };
    for &xa in &axis_a {
        for &xb in &axis_b {
            let v = match regime {
                Regime::Product => match mode {
                    Mode::DoubleDoubleSlit => cos2(xa / da) * cos2(xb / db),
                    Mode::Ghost => cos2(xa / da),
                },
                Regime::Diagonal => cos2(xa / da - xb / db),
                Regime::AntiDiagonal => cos2(xa / da + xb / db),
            };
            values.push(v);
        }
    }
    TwoParticlePattern {
        axis_a,
        axis_b,
        values,
        normalized: false,
        mode,
        lambda_db,
        geometry: *geom,
        source: SourceRegion::uniform([0.0; 3]).expect("point source"),
    }
}

/// Result of the detector-resolution convolution.
#[derive(Debug, Clone)]
pub struct Convolved {
    pub pattern: TwoParticlePattern,
    /// False when the requested width was below the pixel pitch and the
    /// pattern was returned unchanged.
    pub applied: bool,
}

fn box_filter_axis(x: &[f64], y: &[f64], width: f64) -> Vec<f64> {
    let n = x.len();
    let pitch = x[1] - x[0];
    let lo_edge = x[0] - 0.5 * pitch;
    let hi_edge = x[n - 1] + 0.5 * pitch;
    let mut out = vec![0.0; n];
    for (c, o) in out.iter_mut().enumerate() {
        let wlo = (x[c] - 0.5 * width).max(lo_edge);
        let whi = (x[c] + 0.5 * width).min(hi_edge);
        let first = (((wlo - lo_edge) / pitch).floor() as usize).min(n - 1);
        let last = (((whi - lo_edge) / pitch).ceil() as usize).clamp(1, n);
        let mut acc = 0.0;
        let mut cover = 0.0;
        for m in first..last {
            let cell_lo = lo_edge + m as f64 * pitch;
            let cell_hi = cell_lo + pitch;
            let overlap = (whi.min(cell_hi) - wlo.max(cell_lo)).max(0.0);
            acc += y[m] * overlap;
            cover += overlap;
        }
        *o = if cover > 0.0 { acc / cover } else { y[c] };
    }
    out
}

/// Separable box filter of width `delta_x` on both axes, modeling the
/// detector resolution. Widths below the pixel pitch leave the pattern
/// unchanged (`applied = false`). Total weight is preserved.
pub fn convolve_detector(pattern: &TwoParticlePattern, delta_x: f64) -> Convolved {
    let pitch = pattern.pitch_a().min(pattern.pitch_b());
    if delta_x < pitch * (1.0 - 1e-12) {
        return Convolved { pattern: pattern.clone(), applied: false };
    }
    let (na, nb) = (pattern.axis_a.len(), pattern.axis_b.len());
    let mut filtered = pattern.clone();
    // along x_B (within rows)
    for i in 0..na {
        let row: Vec<f64> = filtered.row(i).to_vec();
        let out = box_filter_axis(&pattern.axis_b, &row, delta_x);
        filtered.values[i * nb..(i + 1) * nb].copy_from_slice(&out);
    }
    // along x_A (across rows)
    for j in 0..nb {
        let col: Vec<f64> = (0..na).map(|i| filtered.at(i, j)).collect();
        let out = box_filter_axis(&pattern.axis_a, &col, delta_x);
        for (i, v) in out.into_iter().enumerate() {
            filtered.values[i * nb + j] = v;
        }
    }
    let before = pattern.total();
    let after = filtered.total();
    if after > 0.0 && before > 0.0 {
        let scale = before / after;
        for v in &mut filtered.values {
            *v *= scale;
        }
    }
    Convolved { pattern: filtered, applied: true }
}

/// Normalized inner product of two patterns on the same grid, in [0, 1]
/// for non-negative patterns.
pub fn overlap(a: &TwoParticlePattern, b: &TwoParticlePattern) -> Result<f64> {
    if a.axis_a != b.axis_a || a.axis_b != b.axis_b {
        return Err(Error::Usage("overlap requires patterns on the same grid".into()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na: f64 = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Position of the local maximum of a profile nearest to `near`, refined
/// by a three-point parabola. Maxima below 5% of the profile peak are
/// ignored.
pub fn local_maximum_near(profile: &Profile, near: f64) -> Option<f64> {
    let n = profile.y.len();
    let peak = profile.y.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak <= 0.0 {
        return None;
    }
    let mut best: Option<(f64, f64)> = None;
    for i in 1..n - 1 {
        let (yl, yc, yr) = (profile.y[i - 1], profile.y[i], profile.y[i + 1]);
        if yc >= yl && yc >= yr && yc > 0.05 * peak {
            let denom = yl - 2.0 * yc + yr;
            let frac = if denom.abs() > 0.0 { 0.5 * (yl - yr) / denom } else { 0.0 };
            let x = profile.x[i] + frac.clamp(-0.5, 0.5) * (profile.x[i + 1] - profile.x[i]);
            let dist = (x - near).abs();
            if best.map_or(true, |(bd, _)| dist < bd) {
                best = Some((dist, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Full analysis bundle for one computed pattern, as written into run
/// reports. The same function backs both the in-process path and the
/// `analyze` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternAnalysis {
    pub mode: Mode,
    /// Fit of the slice conditioned on side A at x_A = 0 (profile over B).
    pub conditional_fit_b: FringeFit,
    /// Fit of the slice conditioned on side B at x_B = 0 (profile over A).
    pub conditional_fit_a: FringeFit,
    pub marginal_visibility_a: f64,
    pub marginal_visibility_b: f64,
    /// Plain correlated-coordinate visibility (mode's natural axis).
    pub two_particle_visibility: f64,
    /// Background-corrected two-particle visibility (same axis).
    pub corrected_two_particle_visibility: f64,
    pub diagnosis: CorrelationDiagnosis,
    /// True when the corrected two-particle visibility exceeds 1/2, the
    /// ceiling attainable by classically correlated sources.
    pub classical_bound_exceeded: bool,
    /// Single-particle fringe distances (side A, side B).
    pub fringe_distance_a: f64,
    pub fringe_distance_b: f64,
}

pub fn mode_axis(mode: Mode) -> CorrelationAxis {
    match mode {
        Mode::DoubleDoubleSlit => CorrelationAxis::Difference,
        Mode::Ghost => CorrelationAxis::Sum,
    }
}

pub fn summarize(pattern: &TwoParticlePattern) -> Result<PatternAnalysis> {
    let (da, db) = side_fringe_distances(pattern);
    let slice_b = conditional_slice(pattern, Side::A, 0.0)?;
    let slice_a = conditional_slice(pattern, Side::B, 0.0)?;
    let axis = mode_axis(pattern.mode);
    let plain = two_particle_visibility(pattern, axis)?;
    let corrected = corrected_two_particle_visibility(pattern, axis)?;
    Ok(PatternAnalysis {
        mode: pattern.mode,
        conditional_fit_b: fit_fringes(&slice_b, db)?,
        conditional_fit_a: fit_fringes(&slice_a, da)?,
        marginal_visibility_a: marginal_visibility(pattern, Side::A)?,
        marginal_visibility_b: marginal_visibility(pattern, Side::B)?,
        two_particle_visibility: plain,
        corrected_two_particle_visibility: corrected,
        diagnosis: factorizability(pattern)?,
        classical_bound_exceeded: corrected > 0.5,
        fringe_distance_a: da,
        fringe_distance_b: db,
    })
}
