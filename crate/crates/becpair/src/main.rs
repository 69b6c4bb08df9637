use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use becpair::analysis;
use becpair::config::{parse_length_flag, RunConfig};
use becpair::engine;
use becpair::error::{Error, Result};
use becpair::feasibility;
use becpair::geometry::Mode;
use becpair::output;
use becpair::timing::{self, PatternSampler};

#[derive(Parser)]
#[command(
    name = "becpair",
    version,
    about = "Two-particle interference simulator for atom pairs from a colliding condensate source"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a two-particle pattern and analyze it
    Simulate {
        /// Experiment mode: dds (double double-slit) or ghost
        mode: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the design-condition chain for a configuration
    Feasibility {
        #[arg(long)]
        config: PathBuf,
        /// Write the report (and manifest) into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo coincidence timing and pair identification
    Timing {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shots: Option<usize>,
        /// Draw lateral positions from this pattern CSV instead of uniformly
        #[arg(long)]
        pattern: Option<PathBuf>,
        /// Omit the hidden truth pair ids from the event export
        #[arg(long)]
        no_truth_ids: bool,
    },
    /// Run the simulation over a grid of parameter values
    Sweep {
        /// Sweep values, e.g. --param source_x=25um,50um,100um,200um
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-analyze an existing pattern CSV
    Analyze {
        pattern: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the engine (0 = all cores); output is identical
    /// for any worker count
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detector grid as NAxNB, e.g. 201x201
    #[arg(long)]
    grid: Option<String>,
    /// Detector half window (bare meters or with unit, e.g. 0.75mm)
    #[arg(long)]
    window: Option<String>,
    /// Also emit the pattern convolved with the detector resolution
    #[arg(long)]
    convolve_detector: bool,
    /// Comma list of output formats: csv,pgm,report
    #[arg(long)]
    formats: Option<String>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { mode, common } => {
            let mode = parse_mode(&mode)?;
            let cfg = load_config(&common)?;
            if cfg.mode != mode {
                return Err(Error::Validation(format!(
                    "subcommand asks for mode '{}' but the config sets '{}'",
                    mode.label(),
                    cfg.mode.label()
                )));
            }
            install_workers(cfg.workers)?;
            let out_dir = PathBuf::from(&cfg.out_dir);
            simulate_into(&cfg, &out_dir, &format!("simulate {}", mode.label()))
        }
        Command::Feasibility { config, out } => {
            let cfg = parse_config_file(&config)?;
            let beam = cfg.beam()?;
            let report = feasibility::evaluate_chain(&cfg.geometry()?, &cfg.source()?, &beam)?;
            print!("{}", output::feasibility_table(&report));
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let resolved = cfg.to_text();
                let hash = output::manifest_hash(&resolved);
                let meta = vec![
                    ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
                    ("command".to_string(), "feasibility".to_string()),
                ];
                output::write_text(&dir.join("manifest.txt"), &output::manifest_text(&resolved, &meta))?;
                output::write_text(
                    &dir.join("feasibility.txt"),
                    &output::feasibility_report_text(&report, &hash),
                )?;
                println!("wrote {}", dir.join("feasibility.txt").display());
            }
            Ok(())
        }
        Command::Timing { config, out, seed, shots, pattern, no_truth_ids } => {
            let mut cfg = parse_config_file(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(shots) = shots {
                cfg.shots = shots;
            }
            cfg.revalidate()?;
            let beam = cfg.beam()?;
            let sampler = match &pattern {
                Some(path) => Some(PatternSampler::new(&output::read_pattern_csv(path)?.0)?),
                None => None,
            };
            let shot_cfg = cfg.shot_config();
            let started = Instant::now();
            let (summary, events) =
                timing::run_shots(&shot_cfg, &beam, cfg.shots, cfg.pairing_window, sampler.as_ref())?;
            let spread = timing::pair_time_spread(&beam, cfg.drop_height, cfg.velocity_spread_yz)?;
            let resolved = cfg.to_text();
            let hash = output::manifest_hash(&resolved);
            let report = output::timing_report_text(&summary, spread, cfg.pairing_window, &hash);
            print!("{report}");
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let meta = vec![
                ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
                ("command".to_string(), "timing".to_string()),
                ("wall_time_s".to_string(), format!("{:.3}", started.elapsed().as_secs_f64())),
            ];
            output::write_text(&dir.join("manifest.txt"), &output::manifest_text(&resolved, &meta))?;
            output::write_text(&dir.join("timing.txt"), &report)?;
            output::write_text(
                &dir.join("events.csv"),
                &output::events_csv_text(&events, &hash, !no_truth_ids),
            )?;
            println!("wrote {}", dir.join("events.csv").display());
            Ok(())
        }
        Command::Sweep { params, common } => {
            let base = load_config(&common)?;
            install_workers(base.workers)?;
            let axes = parse_sweep_params(&params)?;
            let out_root = PathBuf::from(&base.out_dir);
            let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
            for (key, values) in &axes {
                let mut next = Vec::new();
                for combo in &combos {
                    for v in values {
                        let mut c = combo.clone();
                        c.push((key.clone(), v.clone()));
                        next.push(c);
                    }
                }
                combos = next;
            }
            for combo in combos {
                let mut cfg = base.clone();
                let mut label_parts = Vec::new();
                for (key, value) in &combo {
                    cfg.set(key, value)?;
                    label_parts.push(format!("{key}_{}", sanitize(value)));
                }
                let label = label_parts.join("__");
                let dir = out_root.join(&label);
                cfg.out_dir = dir.display().to_string();
                cfg.revalidate()?;
                println!("sweep point: {label}");
                simulate_into(&cfg, &dir, &format!("sweep {label}"))?;
            }
            Ok(())
        }
        Command::Analyze { pattern, out } => {
            let (pattern, hash) = output::read_pattern_csv(&pattern)?;
            let summary = analysis::summarize(&pattern)?;
            let report = output::pattern_report_text(&summary, &hash);
            print!("{report}");
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                output::write_text(&dir.join("report.txt"), &report)?;
            }
            Ok(())
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "dds" => Ok(Mode::DoubleDoubleSlit),
        "ghost" => Ok(Mode::Ghost),
        other => Err(Error::Usage(format!("unknown mode '{other}' (expected dds or ghost)"))),
    }
}

fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text, &path.display().to_string())
}

/// Read the config file and fold the CLI overrides into it, so the
/// manifest's resolved config reproduces the run exactly.
fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = parse_config_file(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = &common.grid {
        let (a, b) = grid
            .split_once('x')
            .ok_or_else(|| Error::Usage(format!("--grid expects NAxNB, got '{grid}'")))?;
        cfg.grid_a = a.parse().map_err(|_| Error::Usage(format!("bad grid count '{a}'")))?;
        cfg.grid_b = b.parse().map_err(|_| Error::Usage(format!("bad grid count '{b}'")))?;
    }
    if let Some(window) = &common.window {
        cfg.window = parse_length_flag(window)?;
    }
    if common.convolve_detector {
        cfg.convolve_detector = true;
    }
    if let Some(formats) = &common.formats {
        cfg.set("formats", formats)?;
    }
    cfg.revalidate()?;
    Ok(cfg)
}

fn install_workers(workers: usize) -> Result<()> {
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Validation(format!("cannot configure {workers} workers: {e}")))?;
    }
    Ok(())
}

fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn parse_sweep_params(params: &[String]) -> Result<Vec<(String, Vec<String>)>> {
    let mut axes = Vec::new();
    for p in params {
        let (key, values) = p
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--param expects key=v1,v2,..., got '{p}'")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.is_empty() || values.iter().any(String::is_empty) {
            return Err(Error::Usage(format!("--param '{p}' has empty values")));
        }
        axes.push((key.trim().to_string(), values));
    }
    Ok(axes)
}

fn simulate_into(cfg: &RunConfig, out_dir: &Path, command_label: &str) -> Result<()> {
    let geom = cfg.geometry()?;
    let source = cfg.source()?;
    let grid = cfg.grid()?;
    let beam = cfg.beam()?;
    let opts = cfg.engine_options();
    let initial = cfg.sampling_override()?;

    let started = Instant::now();
    let (pattern, convergence) = engine::converged_pattern(
        &geom,
        &source,
        &grid,
        beam.de_broglie_wavelength,
        &opts,
        initial,
    )?;
    let wall = started.elapsed().as_secs_f64();
    let summary = analysis::summarize(&pattern)?;

    let resolved = cfg.to_text();
    let hash = output::manifest_hash(&resolved);

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let steps = convergence.sampling.steps(&source, &opts);
    let meta = vec![
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("command".to_string(), command_label.to_string()),
        ("grid".to_string(), format!("{}x{}", grid.count_a, grid.count_b)),
        ("window_m".to_string(), format!("{:e}", grid.half_window)),
        (
            "sampling_counts".to_string(),
            format!("{} {} {}", convergence.sampling.counts[0], convergence.sampling.counts[1], convergence.sampling.counts[2]),
        ),
        ("sampling_steps_m".to_string(), format!("{:e} {:e} {:e}", steps[0], steps[1], steps[2])),
        ("convergence_deviation".to_string(), format!("{:e}", convergence.deviation)),
        ("convergence_refinements".to_string(), convergence.refinements.to_string()),
        ("wall_time_s".to_string(), format!("{wall:.3}")),
    ];
    output::write_text(&out_dir.join("manifest.txt"), &output::manifest_text(&resolved, &meta))?;

    let f = cfg.formats;
    if f.csv {
        output::write_pattern_csv(&out_dir.join("pattern.csv"), &pattern, &hash)?;
    }
    if f.pgm {
        output::write_pattern_pgm(&out_dir.join("pattern.pgm"), &pattern, &hash)?;
    }
    if f.report {
        output::write_text(&out_dir.join("report.txt"), &output::pattern_report_text(&summary, &hash))?;
    }

    if cfg.convolve_detector {
        let convolved = analysis::convolve_detector(&pattern, geom.detector_resolution);
        if !convolved.applied {
            eprintln!(
                "warning: detector resolution {:.3e} m is below the pixel pitch; convolution skipped",
                geom.detector_resolution
            );
        }
        let conv_summary = analysis::summarize(&convolved.pattern)?;
        if f.csv {
            output::write_pattern_csv(&out_dir.join("pattern_convolved.csv"), &convolved.pattern, &hash)?;
        }
        if f.pgm {
            output::write_pattern_pgm(&out_dir.join("pattern_convolved.pgm"), &convolved.pattern, &hash)?;
        }
        if f.report {
            output::write_text(
                &out_dir.join("report_convolved.txt"),
                &output::pattern_report_text(&conv_summary, &hash),
            )?;
        }
    }

    println!(
        "{}: {} pattern {}x{}, convergence deviation {:.2e} after {} refinement(s), {:.1}s",
        command_label,
        pattern.mode.label(),
        grid.count_a,
        grid.count_b,
        convergence.deviation,
        convergence.refinements,
        wall
    );
    println!(
        "  conditional periods: A {:.4e} m, B {:.4e} m; two-particle visibility {:.3} (corrected {:.3}); class {}",
        summary.conditional_fit_a.period,
        summary.conditional_fit_b.period,
        summary.two_particle_visibility,
        summary.corrected_two_particle_visibility,
        summary.diagnosis.class.label()
    );
    println!("  wrote {}", out_dir.join("manifest.txt").display());
    Ok(())
}
