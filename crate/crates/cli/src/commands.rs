use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use ellipsometer::calibration::{
    calibrate_qwp_offsets, collect_offset_samples, fit_contrast_threshold, median_threshold,
    reference_qwp, CalibrationParams, GridSearchConfig, RampTrial, TimeAnchor,
};
use ellipsometer::forward::DEFAULT_OMEGA;
use ellipsometer::io::{
    decompose_video, mueller_mosaic, read_calibration, read_event_file, read_scene,
    read_video_file, write_calibration, write_csv, write_event_file, write_pgm, write_video_file,
    CalibrationFile, EventFile, RampMeta, RecordingMetadata,
};
use ellipsometer::metrics::video_errors;
use ellipsometer::reconstruction::{reconstruct_video, IrlsWeighting, SolverConfig};
use ellipsometer::sim::{
    simulate_ramp_set, simulate_scene, MaterialSpec, PixelSensor, RampSpec, Rect, Region,
};

use crate::{
    AnchorArg, DecomposeArgs, EvaluateArgs, OffsetsArgs, ReconstructArgs, SimulateArgs,
    SimulateRampsArgs, ThresholdArgs, WeightingArg,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: expected a {expected} recording, found a {found} recording")]
    WrongKind {
        path: PathBuf,
        expected: &'static str,
        found: &'static str,
    },
    #[error("missing calibration: pass --calibration <FILE>")]
    MissingCalibration,
    #[error("{0}: sensor size differs from the other inputs")]
    SizeMismatch(PathBuf),
    #[error("insufficient events: no pixel produced a usable {0} threshold fit")]
    InsufficientEvents(&'static str),
    #[error("offsets are not identifiable: {count} grid cells away from the optimum score within tolerance (e.g. {example:?})")]
    AmbiguousOffsets { count: usize, example: (f64, f64) },
}

fn default_truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.emmv")
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut scene = read_scene(&args.scene)
        .with_context(|| format!("reading scene {}", args.scene.display()))?;
    let metadata = match args.reference {
        Some(alpha) => {
            let m = reference_qwp(alpha).context("reference target")?;
            scene.regions = vec![Region {
                rect: Rect {
                    x: 0,
                    y: 0,
                    width: scene.width,
                    height: scene.height,
                },
                material: MaterialSpec::Explicit(m.to_vectorized().0),
                gain: 1.0,
            }];
            RecordingMetadata::Reference { alpha }
        }
        None => RecordingMetadata::Scene {
            frames: scene.frames,
            seed: scene.noise.seed,
        },
    };
    let t = Instant::now();
    let rec = simulate_scene(&scene)?;
    let elapsed = t.elapsed();

    let rate = rec.stream.event_rate();
    let n_events = rec.stream.events.len();
    let file = EventFile {
        width: scene.width,
        height: scene.height,
        omega: scene.omega,
        refractory: scene.sensor.refractory,
        metadata,
        events: rec.stream.events,
        triggers: rec.stream.triggers,
    };
    write_event_file(&args.out, &file)?;
    let truth = args
        .ground_truth
        .clone()
        .unwrap_or_else(|| default_truth_path(&args.out));
    write_video_file(&truth, &rec.ground_truth)?;
    if let Some(path) = &args.calibration_out {
        write_calibration(path, &CalibrationFile::new(rec.sensor))?;
    }

    let pixels = scene.width as f64 * scene.height as f64;
    println!(
        "simulated {} frames of {}x{} in {:.2?}",
        scene.frames, scene.width, scene.height, elapsed
    );
    println!(
        "events: {n_events} ({:.1} per pixel-frame)",
        n_events as f64 / (pixels * scene.frames as f64)
    );
    println!("event rate: {:.3} MEv/s", rate / 1e6);
    println!("wrote {} and {}", args.out.display(), truth.display());
    Ok(())
}

pub fn simulate_ramps(args: &SimulateRampsArgs) -> Result<()> {
    let ramps: Vec<RampSpec> = (0..args.repeats)
        .flat_map(|_| RampSpec::up_down(args.ratio, args.duration))
        .collect();
    let sensor = PixelSensor::new(args.c_on, args.c_off, args.refractory);
    let gap = 0.2 * args.duration;
    let (starts, events) = simulate_ramp_set(
        args.width,
        args.height,
        &ramps,
        gap,
        &sensor,
        args.step,
        !args.no_quantize,
    )?;
    let trials = ramps
        .iter()
        .zip(&starts)
        .map(|(r, &t0)| RampMeta {
            a: r.a,
            b: r.b,
            t0,
            duration: r.duration,
        })
        .collect();
    let n = events.len();
    let file = EventFile {
        width: args.width,
        height: args.height,
        omega: DEFAULT_OMEGA,
        refractory: args.refractory,
        metadata: RecordingMetadata::Ramp { trials },
        events,
        triggers: Default::default(),
    };
    write_event_file(&args.out, &file)?;
    println!(
        "{} ramps, {n} events; wrote {}",
        ramps.len(),
        args.out.display()
    );
    Ok(())
}

/// Text histogram of a threshold map.
fn print_histogram(name: &str, values: &[f64]) {
    const BINS: usize = 10;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{name}: min {lo:.5}  max {hi:.5}");
    if !(hi > lo) {
        println!("  all {} pixels at {lo:.5}", values.len());
        return;
    }
    let mut counts = [0usize; BINS];
    for v in values {
        let b = (((v - lo) / (hi - lo)) * BINS as f64) as usize;
        counts[b.min(BINS - 1)] += 1;
    }
    let width = (hi - lo) / BINS as f64;
    for (b, c) in counts.iter().enumerate() {
        println!(
            "  [{:.5}, {:.5}) {c}",
            lo + b as f64 * width,
            lo + (b + 1) as f64 * width
        );
    }
}

pub fn calibrate_threshold(args: &ThresholdArgs) -> Result<()> {
    let mut trials: Vec<RampTrial> = Vec::new();
    let mut shape: Option<(u16, u16, f64)> = None;
    for path in &args.inputs {
        let file = read_event_file(path).with_context(|| format!("reading {}", path.display()))?;
        let found = file.metadata.kind();
        let t = file.ramp_trials().ok_or_else(|| CliError::WrongKind {
            path: path.clone(),
            expected: "ramp",
            found,
        })?;
        let this = (file.width, file.height, file.refractory);
        if shape.is_some_and(|s| s != this) {
            return Err(CliError::SizeMismatch(path.clone()).into());
        }
        shape = Some(this);
        trials.extend(t);
    }
    let (width, height, refractory) = shape.expect("at least one input");
    let fits = fit_contrast_threshold(&trials, width, height, refractory);
    let med_on =
        median_threshold(fits.iter().map(|f| f.on)).ok_or(CliError::InsufficientEvents("on"))?;
    let med_off =
        median_threshold(fits.iter().map(|f| f.off)).ok_or(CliError::InsufficientEvents("off"))?;
    let uncalibrated: Vec<usize> = fits
        .iter()
        .enumerate()
        .filter(|(_, f)| f.on.is_none() || f.off.is_none())
        .map(|(i, _)| i)
        .collect();
    let on: Vec<f64> = fits.iter().map(|f| f.on.unwrap_or(med_on)).collect();
    let off: Vec<f64> = fits.iter().map(|f| f.off.unwrap_or(med_off)).collect();

    let (phi1, phi2) = match &args.base {
        Some(p) => {
            let base = read_calibration(p)?;
            (base.params.phi_calib1, base.params.phi_calib2)
        }
        None => (0.0, 0.0),
    };
    let params = CalibrationParams::new(
        width,
        height,
        on.clone(),
        off.clone(),
        refractory,
        phi1,
        phi2,
    )?;
    let mut file = CalibrationFile::new(params);
    file.uncalibrated_pixels = uncalibrated;
    file.raw_thresholds = Some(fits);
    write_calibration(&args.out, &file)?;

    println!("median C_on {med_on:.5}  median C_off {med_off:.5}");
    print_histogram("C_on", &on);
    print_histogram("C_off", &off);
    println!(
        "{} of {} pixels filled with the median",
        file.uncalibrated_pixels.len(),
        on.len()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn calibrate_offsets(args: &OffsetsArgs) -> Result<()> {
    let file = read_event_file(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let RecordingMetadata::Reference { alpha } = file.metadata else {
        return Err(CliError::WrongKind {
            path: args.input.clone(),
            expected: "reference",
            found: file.metadata.kind(),
        }
        .into());
    };
    let mut calib = read_calibration(&args.calibration)
        .with_context(|| format!("reading {}", args.calibration.display()))?;
    if (calib.params.width, calib.params.height) != (file.width, file.height) {
        return Err(CliError::SizeMismatch(args.calibration.clone()).into());
    }
    let stream = file.stream();
    let samples = collect_offset_samples(
        &stream.per_pixel(),
        &stream.triggers,
        &calib.params,
        args.max_samples,
    );
    let cfg = GridSearchConfig {
        step: args.grid_step.to_radians(),
        refine: !args.no_refine,
        ..GridSearchConfig::default()
    };
    let t = Instant::now();
    let fit = calibrate_qwp_offsets(&samples, &reference_qwp(alpha)?, &cfg)?;
    let elapsed = t.elapsed();
    if fit.is_ambiguous() {
        return Err(CliError::AmbiguousOffsets {
            count: fit.distant_ties.len(),
            example: fit.distant_ties[0],
        }
        .into());
    }
    println!(
        "{} intervals, {}x{} grid searched in {:.2?}",
        samples.len(),
        fit.cells_per_axis,
        fit.cells_per_axis,
        elapsed
    );
    println!("score range [{:.6e}, {:.6e}]", fit.score_min, fit.score_max);
    println!(
        "grid optimum ({:.4}°, {:.4}°), refined ({:.4}°, {:.4}°) score {:.6e}",
        fit.grid_phi1.to_degrees(),
        fit.grid_phi2.to_degrees(),
        fit.phi_calib1.to_degrees(),
        fit.phi_calib2.to_degrees(),
        fit.score
    );
    calib.params.phi_calib1 = fit.phi_calib1;
    calib.params.phi_calib2 = fit.phi_calib2;
    calib.offset_fit = Some(fit);
    write_calibration(&args.out, &calib)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn reconstruct(args: &ReconstructArgs) -> Result<()> {
    let calib_path = args
        .calibration
        .as_ref()
        .ok_or(CliError::MissingCalibration)?;
    let file = read_event_file(&args.events)
        .with_context(|| format!("reading {}", args.events.display()))?;
    if let RecordingMetadata::Ramp { .. } = file.metadata {
        return Err(CliError::WrongKind {
            path: args.events.clone(),
            expected: "scene",
            found: "ramp",
        }
        .into());
    }
    let calib = read_calibration(calib_path)
        .with_context(|| format!("reading {}", calib_path.display()))?;
    let cfg = SolverConfig {
        epsilon: args.epsilon,
        irls_iterations: args.irls_iters,
        irls_weighting: match args.irls_weighting {
            WeightingArg::Residual => IrlsWeighting::Residual,
            WeightingArg::L1 => IrlsWeighting::L1,
        },
        propagation_iterations: args.prop_iters,
        sigma: args.sigma,
        k_min: args.kmin,
        seed: args.seed,
        skip_propagation: args.skip_propagation,
        skip_perturbation: args.skip_perturbation,
        skip_cloude: args.skip_cloude,
        anchor: match args.anchor {
            AnchorArg::Midpoint => TimeAnchor::Midpoint,
            AnchorArg::EventStart => TimeAnchor::EventStart,
        },
    };
    let stream = file.stream();
    let rec = reconstruct_video(&stream, &calib.params, &cfg)?;
    write_video_file(&args.out, &rec.video)?;
    if let Some(p) = &args.initial_out {
        write_video_file(p, &rec.initial)?;
    }
    let t = &rec.timings;
    println!("build systems  {:.3?}", t.build);
    println!("per-pixel      {:.3?}", t.per_pixel);
    println!("refinement     {:.3?}", t.refinement);
    let s = &rec.stats;
    println!(
        "refinement: {} rounds, {} propagations, {} perturbations accepted, cost {:.6e} -> {:.6e}",
        s.rounds, s.propagation_accepts, s.perturbation_accepts, s.initial_cost, s.final_cost
    );
    println!(
        "valid pixels: {} of {}",
        rec.video.valid_count(),
        rec.video.len()
    );
    if !rec.skipped_frames.is_empty() {
        println!("skipped frames (bad triggers): {:?}", rec.skipped_frames);
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn decompose(args: &DecomposeArgs) -> Result<()> {
    let video = read_video_file(&args.video)
        .with_context(|| format!("reading {}", args.video.display()))?;
    fs::create_dir_all(&args.out)?;
    let maps = decompose_video(&video);
    let (w, h) = (video.width, video.height);
    for (f, m) in maps.iter().enumerate() {
        let layers: [(&str, Vec<f64>, f64, f64); 4] = [
            ("diattenuation", m.diattenuation.clone(), 0.0, 1.0),
            ("polarizance", m.polarizance.clone(), 0.0, 1.0),
            ("rho", m.rho.clone(), 0.0, 1.0),
            (
                "retardance_rho",
                m.modulated_retardance(),
                0.0,
                std::f64::consts::PI,
            ),
        ];
        for (name, values, lo, hi) in &layers {
            let stem = args.out.join(format!("frame{f:04}_{name}"));
            write_pgm(&stem.with_extension("pgm"), w, h, values, *lo, *hi)?;
            write_csv(&stem.with_extension("csv"), w, values, name)?;
        }
        let (mw, mh, mosaic) = mueller_mosaic(&video, f);
        write_pgm(
            &args.out.join(format!("frame{f:04}_mueller.pgm")),
            mw,
            mh,
            &mosaic,
            -1.0,
            1.0,
        )?;
    }
    println!(
        "wrote {} frames of maps to {}",
        maps.len(),
        args.out.display()
    );
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let a = read_video_file(&args.video)
        .with_context(|| format!("reading {}", args.video.display()))?;
    let b = read_video_file(&args.ground_truth)
        .with_context(|| format!("reading {}", args.ground_truth.display()))?;
    let errors = video_errors(&a, &b)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&errors)?);
        return Ok(());
    }
    for (f, e) in errors.per_frame.iter().enumerate() {
        println!(
            "frame {f:4}  mse {:.6e}  mae {:.6e}  pixels {}",
            e.mse, e.mae, e.pixels
        );
    }
    let e = errors.aggregate;
    println!(
        "all         mse {:.6e}  mae {:.6e}  pixels {}",
        e.mse, e.mae, e.pixels
    );
    Ok(())
}
