//! Serialization: pattern CSV and graymap images, structured-text reports,
//! event exports, and the run manifest.
//!
//! Floats are written with the shortest round-trip representation (`{:e}`),
//! so reading a CSV back reproduces the exact f64 bits and re-analysis is
//! bit-identical to the in-process path.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::analysis::PatternAnalysis;
use crate::engine::TwoParticlePattern;
use crate::error::{Error, Result};
use crate::feasibility::FeasibilityReport;
use crate::geometry::{ExperimentGeometry, Mode, SourceRegion, Weighting};
use crate::timing::{AtomEvent, TimingSummary};

/// First 16 hex digits of the SHA-256 of the resolved configuration. Every
/// output file of a run carries this tag.
pub fn manifest_hash(resolved_config: &str) -> String {
    let digest = Sha256::digest(resolved_config.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Manifest: comment metadata on top, then the resolved config — itself a
/// valid config file, so re-running from the manifest reproduces the run.
pub fn manifest_text(resolved_config: &str, meta: &[(String, String)]) -> String {
    let mut s = String::from("# becpair run manifest\n");
    for (k, v) in meta {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s.push_str(&format!("# manifest_hash: {}\n", manifest_hash(resolved_config)));
    s.push_str(resolved_config);
    s
}

fn mode_text(mode: Mode) -> &'static str {
    mode.label()
}

/// CSV: `#`-prefixed metadata, a header row carrying the x_B axis, then one
/// row per x_A value with the pattern values in row-major order.
pub fn pattern_csv_text(pattern: &TwoParticlePattern, hash: &str) -> String {
    let mut s = String::new();
    s.push_str("# becpair pattern\n");
    s.push_str(&format!("# manifest: {hash}\n"));
    s.push_str(&format!("# mode: {}\n", mode_text(pattern.mode)));
    s.push_str(&format!("# normalized: {}\n", pattern.normalized));
    s.push_str(&format!("# lambda_db: {:e}\n", pattern.lambda_db));
    let g = &pattern.geometry;
    s.push_str(&format!("# d: {:e}\n", g.slit_separation));
    s.push_str(&format!("# l1: {:e}\n", g.source_slit_distance));
    s.push_str(&format!("# l2: {:e}\n", g.slit_detector_distance));
    s.push_str(&format!("# drop_height: {:e}\n", g.drop_height));
    s.push_str(&format!("# detector_resolution: {:e}\n", g.detector_resolution));
    let src = &pattern.source;
    s.push_str(&format!(
        "# source_extent: {:e} {:e} {:e}\n",
        src.extent[0], src.extent[1], src.extent[2]
    ));
    match src.weighting {
        Weighting::Uniform => s.push_str("# source_weighting: uniform\n"),
        Weighting::Gaussian { sigma } => s.push_str(&format!(
            "# source_weighting: gaussian {:e} {:e} {:e}\n",
            sigma[0], sigma[1], sigma[2]
        )),
    }
    s.push_str("xA\\xB");
    for xb in &pattern.axis_b {
        s.push_str(&format!(",{xb:e}"));
    }
    s.push('\n');
    for (i, xa) in pattern.axis_a.iter().enumerate() {
        s.push_str(&format!("{xa:e}"));
        for v in pattern.row(i) {
            s.push_str(&format!(",{v:e}"));
        }
        s.push('\n');
    }
    s
}

pub fn write_pattern_csv(path: &Path, pattern: &TwoParticlePattern, hash: &str) -> Result<()> {
    write_text(path, &pattern_csv_text(pattern, hash))
}

/// Parse a pattern CSV produced by [`pattern_csv_text`]. Returns the
/// pattern and the manifest hash it was tagged with.
pub fn read_pattern_csv(path: &Path) -> Result<(TwoParticlePattern, String)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pattern_csv(&text, &path.display().to_string())
}

pub fn parse_pattern_csv(text: &str, label: &str) -> Result<(TwoParticlePattern, String)> {
    let mut meta = std::collections::BTreeMap::new();
    let mut header: Option<Vec<f64>> = None;
    let mut axis_a = Vec::new();
    let mut values = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let mut fields = line.split(',');
        let first = fields.next().unwrap_or_default();
        if header.is_none() {
            if first != "xA\\xB" {
                return Err(Error::Config {
                    path: label.into(),
                    line: no + 1,
                    msg: format!("expected pattern header row, got '{first}'"),
                });
            }
            let axis: std::result::Result<Vec<f64>, _> = fields.map(str::parse).collect();
            header = Some(axis.map_err(|e| Error::Config {
                path: label.into(),
                line: no + 1,
                msg: format!("bad axis value: {e}"),
            })?);
            continue;
        }
        let xa: f64 = first.parse().map_err(|e| Error::Config {
            path: label.into(),
            line: no + 1,
            msg: format!("bad row coordinate: {e}"),
        })?;
        axis_a.push(xa);
        for f in fields {
            values.push(f.parse::<f64>().map_err(|e| Error::Config {
                path: label.into(),
                line: no + 1,
                msg: format!("bad value: {e}"),
            })?);
        }
    }
    let axis_b = header.ok_or_else(|| Error::Validation(format!("{label}: no header row found")))?;
    if values.len() != axis_a.len() * axis_b.len() {
        return Err(Error::Validation(format!(
            "{label}: {} values for a {}x{} grid",
            values.len(),
            axis_a.len(),
            axis_b.len()
        )));
    }
    let get = |k: &str| -> Result<&String> {
        meta.get(k).ok_or_else(|| Error::Validation(format!("{label}: missing metadata '{k}'")))
    };
    let getf = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|e| Error::Validation(format!("{label}: bad metadata '{k}': {e}")))
    };
    let mode = match get("mode")?.as_str() {
        "dds" => Mode::DoubleDoubleSlit,
        "ghost" => Mode::Ghost,
        other => return Err(Error::Validation(format!("{label}: unknown mode '{other}'"))),
    };
    let geometry = ExperimentGeometry::new(
        mode,
        getf("l1")?,
        getf("l2")?,
        getf("d")?,
        getf("drop_height")?,
        getf("detector_resolution")?,
    )?;
    let extent_str = get("source_extent")?;
    let extents: std::result::Result<Vec<f64>, _> =
        extent_str.split_whitespace().map(str::parse).collect();
    let extents =
        extents.map_err(|e| Error::Validation(format!("{label}: bad source_extent: {e}")))?;
    if extents.len() != 3 {
        return Err(Error::Validation(format!("{label}: source_extent needs 3 values")));
    }
    let weighting_str = get("source_weighting")?;
    let weighting = if weighting_str == "uniform" {
        Weighting::Uniform
    } else if let Some(rest) = weighting_str.strip_prefix("gaussian") {
        let sig: std::result::Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse).collect();
        let sig = sig.map_err(|e| Error::Validation(format!("{label}: bad gaussian sigmas: {e}")))?;
        if sig.len() != 3 {
            return Err(Error::Validation(format!("{label}: gaussian weighting needs 3 sigmas")));
        }
        Weighting::Gaussian { sigma: [sig[0], sig[1], sig[2]] }
    } else {
        return Err(Error::Validation(format!("{label}: unknown weighting '{weighting_str}'")));
    };
    let source = SourceRegion::new([extents[0], extents[1], extents[2]], weighting)?;
    let normalized = get("normalized")?.as_str() == "true";
    let hash = meta.get("manifest").cloned().unwrap_or_default();
    Ok((
        TwoParticlePattern {
            axis_a,
            axis_b,
            values,
            normalized,
            mode,
            lambda_db: getf("lambda_db")?,
            geometry,
            source,
        },
        hash,
    ))
}

/// 8-bit binary graymap, peak-normalized to 255. Columns run over x_A
/// (left to right ascending); rows over x_B, topmost row at the largest
/// x_B, so the image reads like a plot with x_B upward.
pub fn write_pattern_pgm(path: &Path, pattern: &TwoParticlePattern, hash: &str) -> Result<()> {
    let (na, nb) = (pattern.axis_a.len(), pattern.axis_b.len());
    let peak = pattern.peak();
    let mut data = Vec::with_capacity(na * nb);
    for j in (0..nb).rev() {
        for i in 0..na {
            let v = if peak > 0.0 { pattern.at(i, j) / peak } else { 0.0 };
            data.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header = format!("P5\n# manifest: {hash}\n{na} {nb}\n255\n");
    file.write_all(header.as_bytes())
        .and_then(|_| file.write_all(&data))
        .map_err(|e| Error::io(path, e))
}

/// Structured-text analysis report; `key = value` lines.
pub fn pattern_report_text(analysis: &PatternAnalysis, hash: &str) -> String {
    let mut s = String::from("# becpair pattern report\n");
    s.push_str("# visibility values are derived from this simulation run\n");
    s.push_str(&format!("manifest = {hash}\n"));
    s.push_str(&format!("mode = {}\n", mode_text(analysis.mode)));
    s.push_str(&format!("fringe_distance_a_m = {:e}\n", analysis.fringe_distance_a));
    s.push_str(&format!("fringe_distance_b_m = {:e}\n", analysis.fringe_distance_b));
    let fit = |s: &mut String, name: &str, f: &crate::analysis::FringeFit| {
        s.push_str(&format!("{name}_period_m = {:e}\n", f.period));
        s.push_str(&format!("{name}_offset_m = {:e}\n", f.phase_offset));
        s.push_str(&format!("{name}_visibility = {:e}\n", f.visibility));
        s.push_str(&format!("{name}_residual = {:e}\n", f.residual));
        s.push_str(&format!("{name}_converged = {}\n", f.converged));
    };
    fit(&mut s, "conditional_b", &analysis.conditional_fit_b);
    fit(&mut s, "conditional_a", &analysis.conditional_fit_a);
    s.push_str(&format!("marginal_visibility_a = {:e}\n", analysis.marginal_visibility_a));
    s.push_str(&format!("marginal_visibility_b = {:e}\n", analysis.marginal_visibility_b));
    s.push_str(&format!("two_particle_visibility = {:e}\n", analysis.two_particle_visibility));
    s.push_str(&format!(
        "corrected_two_particle_visibility = {:e}\n",
        analysis.corrected_two_particle_visibility
    ));
    s.push_str(&format!("rank1_fraction = {:e}\n", analysis.diagnosis.rank1_fraction));
    s.push_str(&format!("correlation_class = {}\n", analysis.diagnosis.class.label()));
    s.push_str(&format!("diagonal_visibility = {:e}\n", analysis.diagnosis.diagonal_visibility));
    s.push_str(&format!(
        "antidiagonal_visibility = {:e}\n",
        analysis.diagnosis.antidiagonal_visibility
    ));
    s.push_str(&format!("classical_bound_exceeded = {}\n", analysis.classical_bound_exceeded));
    s
}

/// Parse a `key = value` report back into (key, value) pairs.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Structured feasibility report.
pub fn feasibility_report_text(report: &FeasibilityReport, hash: &str) -> String {
    let mut s = String::from("# becpair feasibility report\n");
    s.push_str(&format!("manifest = {hash}\n"));
    s.push_str(&format!("mode = {}\n", mode_text(report.mode)));
    s.push_str(&format!("chain = {}\n", report.chain_line()));
    s.push_str(&format!("overall = {}\n", report.overall.label()));
    for e in &report.entries {
        s.push_str(&format!("condition_{}_lhs_m = {:e}\n", e.name, e.lhs));
        s.push_str(&format!("condition_{}_comparator = {}\n", e.name, e.comparator));
        s.push_str(&format!("condition_{}_rhs_m = {:e}\n", e.name, e.rhs));
        s.push_str(&format!("condition_{}_margin = {:e}\n", e.name, e.margin));
        s.push_str(&format!("condition_{}_verdict = {}\n", e.name, e.verdict.label()));
        if let Some(note) = &e.note {
            s.push_str(&format!("condition_{}_note = {note}\n", e.name));
        }
    }
    s.push_str(&format!("fringe_distance_dds_m = {:e}\n", report.fringes.dds));
    s.push_str(&format!("fringe_distance_ghost_a_m = {:e}\n", report.fringes.ghost_a));
    s.push_str(&format!("fringe_distance_ghost_b_m = {:e}\n", report.fringes.ghost_b));
    s
}

/// Human-readable table for stdout.
pub fn feasibility_table(report: &FeasibilityReport) -> String {
    let um = 1e6;
    let mut s = String::new();
    s.push_str(&format!("condition chain: {}\n", report.chain_line()));
    s.push_str(&format!(
        "{:<6} {:<46} {:>12} {:<3} {:>12} {:>8}  {}\n",
        "cond", "description", "lhs", "", "rhs", "margin", "verdict"
    ));
    for e in &report.entries {
        s.push_str(&format!(
            "{:<6} {:<46} {:>9.2} um {:<3} {:>9.2} um {:>8.2}  {}\n",
            e.name,
            e.description,
            e.lhs * um,
            e.comparator,
            e.rhs * um,
            e.margin,
            e.verdict.label()
        ));
        if let Some(note) = &e.note {
            s.push_str(&format!("       note: {note}\n"));
        }
    }
    s.push_str(&format!(
        "fringe distances: dds {:.2} um, ghost side A {:.2} um, ghost side B {:.2} um\n",
        report.fringes.dds * um,
        report.fringes.ghost_a * um,
        report.fringes.ghost_b * um
    ));
    s.push_str(&format!("overall: {}\n", report.overall.label()));
    s
}

/// Event export: one row per detected atom, optionally with the hidden
/// truth pair id.
pub fn events_csv_text(shots: &[Vec<AtomEvent>], hash: &str, include_truth: bool) -> String {
    let mut s = String::from("# becpair events\n");
    s.push_str(&format!("# manifest: {hash}\n"));
    s.push_str("shot,side,arrival_time_s,position_m");
    if include_truth {
        s.push_str(",pair_id");
    }
    s.push('\n');
    for (shot, events) in shots.iter().enumerate() {
        for e in events {
            s.push_str(&format!("{shot},{},{:e},{:e}", e.side.label(), e.arrival_time, e.position));
            if include_truth {
                s.push_str(&format!(",{}", e.pair_id));
            }
            s.push('\n');
        }
    }
    s
}

/// Structured timing report.
pub fn timing_report_text(
    summary: &TimingSummary,
    predicted_pair_spread: f64,
    pairing_window: f64,
    hash: &str,
) -> String {
    let mut s = String::from("# becpair timing report\n");
    s.push_str(&format!("manifest = {hash}\n"));
    s.push_str(&format!("shots = {}\n", summary.shots));
    s.push_str(&format!("events = {}\n", summary.events));
    s.push_str(&format!("predicted_pair_time_spread_s = {predicted_pair_spread:e}\n"));
    s.push_str(&format!("pairing_window_s = {pairing_window:e}\n"));
    s.push_str(&format!("identified = {}\n", summary.identified));
    s.push_str(&format!("identified_per_shot = {:e}\n", summary.identified_per_shot));
    s.push_str(&format!("true_positives = {}\n", summary.true_positives));
    s.push_str(&format!("true_positive_rate = {:e}\n", summary.true_positive_rate));
    s.push_str(&format!("false_pair_rate = {:e}\n", summary.false_pair_rate));
    s.push_str(&format!("unpaired_fraction = {:e}\n", summary.unpaired_fraction));
    s.push_str(&format!("partner_gap_max_s = {:e}\n", summary.partner_gap_max));
    s.push_str(&format!("cross_gap_max_s = {:e}\n", summary.cross_gap_max));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::engine::GridSpec;
    use crate::geometry::Side;

    fn tiny_pattern() -> TwoParticlePattern {
        let geom =
            ExperimentGeometry::new(Mode::DoubleDoubleSlit, 5e-3, 25e-3, 100e-6, 0.5, 60e-6).unwrap();
        TwoParticlePattern {
            axis_a: vec![-1e-4, 1e-4],
            axis_b: vec![-1e-4, 1e-4],
            values: vec![0.25, 0.5, 0.75, 1.0],
            normalized: false,
            mode: Mode::DoubleDoubleSlit,
            lambda_db: 1.083e-6,
            geometry: geom,
            source: SourceRegion::uniform([50e-6, 10e-6, 0.0]).unwrap(),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let pattern = tiny_pattern();
        let text = pattern_csv_text(&pattern, "cafe0123");
        let (back, hash) = parse_pattern_csv(&text, "mem").unwrap();
        assert_eq!(hash, "cafe0123");
        assert_eq!(back.axis_a, pattern.axis_a);
        assert_eq!(back.axis_b, pattern.axis_b);
        assert_eq!(back.values, pattern.values);
        assert_eq!(back.mode, pattern.mode);
        assert_eq!(back.geometry, pattern.geometry);
        assert_eq!(back.source, pattern.source);
    }

    #[test]
    fn two_by_two_pattern_gives_three_line_csv() {
        let text = pattern_csv_text(&tiny_pattern(), "h");
        let data_lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data_lines.len(), 3); // header + 2 rows
    }

    #[test]
    fn pgm_peak_is_255() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.pgm");
        write_pattern_pgm(&path, &tiny_pattern(), "h").unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_end = bytes.windows(4).position(|w| w == b"255\n").unwrap() + 4;
        let pixels = &bytes[header_end..];
        assert_eq!(pixels.len(), 4);
        assert_eq!(*pixels.iter().max().unwrap(), 255u8);
        // top row holds the largest x_B: values (0.5, 1.0) -> (128, 255)
        assert_eq!(pixels[0], 128);
        assert_eq!(pixels[1], 255);
    }

    #[test]
    fn manifest_hash_is_stable_and_sensitive() {
        let h1 = manifest_hash("mode = dds\n");
        let h2 = manifest_hash("mode = dds\n");
        let h3 = manifest_hash("mode = ghost\n");
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
        assert_eq!(h1.len(), 16);
    }

    #[test]
    fn report_text_round_trips_through_parse_report() {
        let geom = tiny_pattern().geometry;
        let grid = GridSpec::new(0.75e-3, 201, 201).unwrap();
        let pattern = analysis::analytic_reference(
            Mode::DoubleDoubleSlit,
            analysis::Regime::Diagonal,
            &geom,
            1.083e-6,
            &grid,
        );
        let summary = analysis::summarize(&pattern).unwrap();
        let text = pattern_report_text(&summary, "deadbeef");
        let kv = parse_report(&text);
        let lookup = |k: &str| kv.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
        assert_eq!(lookup("manifest").unwrap(), "deadbeef");
        assert_eq!(lookup("correlation_class").unwrap(), "diagonal");
        let vis: f64 = lookup("two_particle_visibility").unwrap().parse().unwrap();
        assert!((vis - summary.two_particle_visibility).abs() < 1e-15);
    }

    #[test]
    fn events_csv_controls_truth_column() {
        let events = vec![vec![AtomEvent {
            side: Side::A,
            arrival_time: 0.3288,
            position: 1e-4,
            pair_id: 42,
        }]];
        let with = events_csv_text(&events, "h", true);
        assert!(with.contains("pair_id"));
        assert!(with.contains(",42"));
        let without = events_csv_text(&events, "h", false);
        assert!(!without.contains("pair_id"));
    }
}
