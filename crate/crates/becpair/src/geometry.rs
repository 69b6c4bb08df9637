//! Coordinate system, slit and detector placement, and exact Euclidean
//! path lengths.
//!
//! The source sits around the origin. Side A slits lie at y = +L1, side B
//! slits at y = -L1 (double double-slit mode only), detectors at
//! y = +-(L1 + L2). Everything interferometric happens in the top-view
//! x-y plane; gravity acts along z and never enters the path lengths
//! unless a source point carries a z offset.

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Euclidean distance between two points.
pub fn segment(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    DoubleDoubleSlit,
    Ghost,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::DoubleDoubleSlit => "dds",
            Mode::Ghost => "ghost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::A => "A",
            Side::B => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentGeometry {
    pub mode: Mode,
    /// Source to slit plane distance L1, m.
    pub source_slit_distance: f64,
    /// Slit plane to detector plane distance L2, m.
    pub slit_detector_distance: f64,
    /// Slit separation d, m.
    pub slit_separation: f64,
    /// Drop height H, m.
    pub drop_height: f64,
    /// Detector pixel resolution, m.
    pub detector_resolution: f64,
}

impl ExperimentGeometry {
    pub fn new(
        mode: Mode,
        source_slit_distance: f64,
        slit_detector_distance: f64,
        slit_separation: f64,
        drop_height: f64,
        detector_resolution: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("source_slit_distance", source_slit_distance),
            ("slit_detector_distance", slit_detector_distance),
            ("slit_separation", slit_separation),
            ("detector_resolution", detector_resolution),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if drop_height < 0.0 {
            return Err(Error::Domain(format!("drop_height must be non-negative, got {drop_height}")));
        }
        Ok(Self {
            mode,
            source_slit_distance,
            slit_detector_distance,
            slit_separation,
            drop_height,
            detector_resolution,
        })
    }

    /// Lateral distance from source to detector plane, L1 + L2.
    pub fn detector_offset(&self) -> f64 {
        self.source_slit_distance + self.slit_detector_distance
    }

    /// Detector point for a lateral coordinate x on the given side.
    pub fn detector_point(&self, side: Side, x: f64) -> Point {
        let y = match side {
            Side::A => self.detector_offset(),
            Side::B => -self.detector_offset(),
        };
        [x, y, 0.0]
    }
}

/// Weighting applied across the source region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    Uniform,
    /// Gaussian with per-axis standard deviations, m. Axes with extent 0
    /// are point-like and their sigma is ignored.
    Gaussian { sigma: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceRegion {
    /// Full extents S_x, S_y, S_z, m. A zero extent means a point source
    /// along that axis.
    pub extent: [f64; 3],
    pub weighting: Weighting,
}

impl SourceRegion {
    pub fn new(extent: [f64; 3], weighting: Weighting) -> Result<Self> {
        for (axis, v) in ["x", "y", "z"].iter().zip(extent) {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Domain(format!("source extent along {axis} must be non-negative, got {v}")));
            }
        }
        if let Weighting::Gaussian { sigma } = weighting {
            for (axis, s) in ["x", "y", "z"].iter().zip(sigma) {
                if s < 0.0 || !s.is_finite() {
                    return Err(Error::Domain(format!("gaussian sigma along {axis} must be non-negative, got {s}")));
                }
            }
        }
        Ok(Self { extent, weighting })
    }

    pub fn uniform(extent: [f64; 3]) -> Result<Self> {
        Self::new(extent, Weighting::Uniform)
    }

    /// Weight g(r_S) of an emission point.
    pub fn weight(&self, p: Point) -> f64 {
        match self.weighting {
            Weighting::Uniform => 1.0,
            Weighting::Gaussian { sigma } => {
                let mut w = 1.0;
                for (x, s) in p.iter().zip(sigma) {
                    if s > 0.0 {
                        w *= (-0.5 * (x / s) * (x / s)).exp();
                    }
                }
                w
            }
        }
    }

    /// True when the weighting is an even function of x_S, which makes the
    /// two-particle pattern symmetric under (x_A, x_B) -> (-x_A, -x_B).
    pub fn even_in_x(&self) -> bool {
        true // both supported weightings are centered on the origin
    }
}

/// Two-segment path lengths through the slits for one emission point and
/// one detector position per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathSet {
    /// Both sides carry a double slit: lengths through a1/a2 and b1/b2.
    Dds { a: [f64; 2], b: [f64; 2] },
    /// Only side A carries a slit; side B is the direct distance.
    Ghost { a: [f64; 2], b: f64 },
}

impl PathSet {
    pub fn side_a(&self) -> [f64; 2] {
        match self {
            PathSet::Dds { a, .. } | PathSet::Ghost { a, .. } => *a,
        }
    }
}

/// Slit positions for the configured mode. Slit 1 of each pair sits at
/// x = +d/2, slit 2 at x = -d/2; side A at y = +L1, side B at y = -L1.
/// Ghost mode only has the side A pair.
pub fn slit_points(geom: &ExperimentGeometry) -> Vec<Point> {
    let half = geom.slit_separation / 2.0;
    let l1 = geom.source_slit_distance;
    let mut pts = vec![[half, l1, 0.0], [-half, l1, 0.0]];
    if geom.mode == Mode::DoubleDoubleSlit {
        pts.push([half, -l1, 0.0]);
        pts.push([-half, -l1, 0.0]);
    }
    pts
}

/// Exact two-segment path lengths from `source_point` through each slit to
/// the detectors at lateral coordinates `x_a` and `x_b`. No paraxial
/// approximation is made anywhere.
pub fn path_lengths(geom: &ExperimentGeometry, source_point: Point, x_a: f64, x_b: f64) -> PathSet {
    let det_a = geom.detector_point(Side::A, x_a);
    let det_b = geom.detector_point(Side::B, x_b);
    let slits = slit_points(geom);

    let through = |slit: Point, det: Point| segment(source_point, slit) + segment(slit, det);

    let a = [through(slits[0], det_a), through(slits[1], det_a)];
    match geom.mode {
        Mode::DoubleDoubleSlit => {
            let b = [through(slits[2], det_b), through(slits[3], det_b)];
            PathSet::Dds { a, b }
        }
        Mode::Ghost => PathSet::Ghost { a, b: segment(source_point, det_b) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dds_geom() -> ExperimentGeometry {
        ExperimentGeometry::new(Mode::DoubleDoubleSlit, 5e-3, 25e-3, 100e-6, 0.5, 60e-6).unwrap()
    }

    #[test]
    fn slit_points_dds() {
        let pts = slit_points(&dds_geom());
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0], [50e-6, 5e-3, 0.0]);
        assert_eq!(pts[1], [-50e-6, 5e-3, 0.0]);
        // b slits mirror a slits under y -> -y
        assert_eq!(pts[2], [pts[0][0], -pts[0][1], 0.0]);
        assert_eq!(pts[3], [pts[1][0], -pts[1][1], 0.0]);
    }

    #[test]
    fn slit_points_ghost() {
        let geom = ExperimentGeometry::new(Mode::Ghost, 5e-3, 25e-3, 50e-6, 0.5, 60e-6).unwrap();
        assert_eq!(slit_points(&geom).len(), 2);
    }

    #[test]
    fn centered_paths_are_mirror_symmetric() {
        let paths = path_lengths(&dds_geom(), [0.0; 3], 0.0, 0.0);
        match paths {
            PathSet::Dds { a, b } => {
                assert!((a[0] - a[1]).abs() < 1e-18);
                // y -> -y symmetry pairs the sides when x_A = x_B
                assert!((a[0] - b[0]).abs() < 1e-18);
                assert!((a[1] - b[1]).abs() < 1e-18);
            }
            _ => panic!("expected dds paths"),
        }
    }

    #[test]
    fn path_length_frozen_example() {
        // source at origin, x_A = 0: both segments are hypotenuses of
        // (50 um, 5 mm) and (50 um, 25 mm) triangles.
        let paths = path_lengths(&dds_geom(), [0.0; 3], 0.0, 0.0);
        let expected = 0.0050002499937503125 + 0.02500004999995;
        match paths {
            PathSet::Dds { a, .. } => {
                assert!((a[0] - expected).abs() < 1e-15, "a1 = {}", a[0]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn ghost_side_b_is_direct_distance() {
        let geom = ExperimentGeometry::new(Mode::Ghost, 5e-3, 25e-3, 50e-6, 0.5, 60e-6).unwrap();
        let src = [10e-6, -4e-6, 0.0];
        let xb = 2e-4;
        match path_lengths(&geom, src, 0.0, xb) {
            PathSet::Ghost { b, .. } => {
                assert_eq!(b, segment(src, geom.detector_point(Side::B, xb)));
            }
            _ => panic!("expected ghost paths"),
        }
    }

    #[test]
    fn rejects_nonpositive_lengths() {
        assert!(ExperimentGeometry::new(Mode::Ghost, 0.0, 25e-3, 50e-6, 0.5, 60e-6).is_err());
        assert!(ExperimentGeometry::new(Mode::Ghost, 5e-3, 25e-3, -1e-6, 0.5, 60e-6).is_err());
    }

    #[test]
    fn gaussian_weight_falls_off() {
        let src = SourceRegion::new([100e-6, 0.0, 0.0], Weighting::Gaussian { sigma: [25e-6, 0.0, 0.0] }).unwrap();
        assert_eq!(src.weight([0.0; 3]), 1.0);
        let w = src.weight([25e-6, 0.0, 0.0]);
        assert!((w - (-0.5f64).exp()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn joint_translation_leaves_segments_invariant(
            ax in -1e-3f64..1e-3, ay in -1e-3f64..1e-3,
            bx in -1e-3f64..1e-3, by in -1e-3f64..1e-3,
            tx in -1.0f64..1.0, ty in -1.0f64..1.0, tz in -1.0f64..1.0,
        ) {
            let a = [ax, ay, 0.0];
            let b = [bx, by + 5e-3, 1e-5];
            let t = [tx, ty, tz];
            let shifted = |p: Point| [p[0] + t[0], p[1] + t[1], p[2] + t[2]];
            let d0 = segment(a, b);
            let d1 = segment(shifted(a), shifted(b));
            prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
        }

        #[test]
        fn reflection_about_x_swaps_slit_paths(
            sx in -50e-6f64..50e-6, sy in -10e-6f64..10e-6,
            xa in -1e-3f64..1e-3, xb in -1e-3f64..1e-3,
        ) {
            let geom = dds_geom();
            let p = path_lengths(&geom, [sx, sy, 0.0], xa, xb);
            let m = path_lengths(&geom, [-sx, sy, 0.0], -xa, -xb);
            match (p, m) {
                (PathSet::Dds { a, b }, PathSet::Dds { a: am, b: bm }) => {
                    prop_assert!((a[0] - am[1]).abs() < 1e-15);
                    prop_assert!((a[1] - am[0]).abs() < 1e-15);
                    prop_assert!((b[0] - bm[1]).abs() < 1e-15);
                    prop_assert!((b[1] - bm[0]).abs() < 1e-15);
                }
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn two_segment_path_respects_triangle_inequality(
            sx in -200e-6f64..200e-6, sy in -10e-6f64..10e-6,
            xa in -1e-3f64..1e-3, xb in -1e-3f64..1e-3,
        ) {
            let geom = dds_geom();
            let direct_a = segment([sx, sy, 0.0], geom.detector_point(Side::A, xa));
            let direct_b = segment([sx, sy, 0.0], geom.detector_point(Side::B, xb));
            match path_lengths(&geom, [sx, sy, 0.0], xa, xb) {
                PathSet::Dds { a, b } => {
                    for l in a { prop_assert!(l >= direct_a - 1e-15); }
                    for l in b { prop_assert!(l >= direct_b - 1e-15); }
                }
                _ => prop_assert!(false),
            }
        }
    }
}
