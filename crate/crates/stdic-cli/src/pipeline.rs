//! Pipeline drivers behind the CLI subcommands. Each stage works off the
//! same experiment config and output directory, so synth, analyze and
//! metrics can run separately or chained by `reproduce`.
//!
//! Output layout under the chosen directory:
//!
//! ```text
//! effective_config.json
//! noise_<pct>/frames/frame_0000.f64      one subdir per noise level
//! noise_<pct>/ground_truth.csv
//! noise_<pct>/metadata.txt
//! fields/<method>_noise_<pct>.csv        displacement fields
//! logs/<method>_noise_<pct>.log          iteration statistics
//! metrics/frame_errors.csv
//! metrics/ratio_table_u.csv, ratio_table_v.csv
//! metrics/strain_stats.csv, strain_fit.csv   (strain motions)
//! metrics/plots/err_<comp>_<method>_<label>.csv
//! summary.txt                            (reproduce runs)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use stdic::engine::{
    analyze_sequence, read_fields_csv, write_fields_csv, write_run_log, AnalysisPlan, Roi,
};
use stdic::image::{load_image, write_f64_raw, write_pgm8, MARGIN};
use stdic::metrics::{
    error_ratio, frame_error, linear_fit, strain_stats, write_frame_errors_csv,
    write_ratio_table_csv, FrameError,
};
use stdic::solver::SolveSettings;
use stdic::synth::{make_speckle, render_sequence, with_noise, GroundTruth, NoiseSpec};
use stdic::{GrayImage, ImageSequence};

use crate::config::{AnalyzeConfig, ExperimentConfig, MotionConfig, SynthConfig};

/// Run-wide flags resolved from the command line.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub quantize_8bit: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> RunOptions {
        RunOptions {
            out_dir: out_dir.into(),
            seed_override: None,
            quantize_8bit: false,
        }
    }

    fn seed(&self, config: &ExperimentConfig) -> u64 {
        self.seed_override.unwrap_or(config.seed)
    }
}

fn echo_effective_config(config: &ExperimentConfig, options: &RunOptions) -> Result<()> {
    fs::create_dir_all(&options.out_dir)?;
    let mut effective = config.clone();
    effective.seed = options.seed(config);
    if let (true, Some(synth)) = (options.quantize_8bit, effective.synth.as_mut()) {
        synth.quantize_8bit = true;
    }
    fs::write(
        options.out_dir.join("effective_config.json"),
        effective.to_json(),
    )?;
    Ok(())
}

fn frame_file_name(index: usize, quantized: bool) -> String {
    if quantized {
        format!("frame_{index:04}.pgm")
    } else {
        format!("frame_{index:04}.f64")
    }
}

fn motion_description(motion: &MotionConfig) -> String {
    match motion {
        MotionConfig::Translation => "translation u(t) = t/20 px".to_string(),
        MotionConfig::Vibration => {
            "vibration u(t) = 10 exp(-2t) sin(10t), v(t) = 10 exp(-3t) sin(5t)".to_string()
        }
        MotionConfig::ConstantVelocity { u_rate, v_rate } => {
            format!("constant velocity ({u_rate}, {v_rate}) px/frame")
        }
        MotionConfig::UniformStrain { ex_rate, ey_rate } => {
            format!("uniform strain ({ex_rate}, {ey_rate}) per frame about the image center")
        }
    }
}

/// Renders all noise levels of the configured experiment and writes
/// frames, ground truth and metadata.
pub fn run_synth(config: &ExperimentConfig, options: &RunOptions) -> Result<()> {
    let synth = config
        .synth
        .as_ref()
        .ok_or_else(|| anyhow!("config has no synth section"))?;
    echo_effective_config(config, options)?;
    let seed = options.seed(config);
    let quantized = synth.quantize_8bit || options.quantize_8bit;

    let base = make_speckle(
        synth.width,
        synth.height,
        seed,
        synth.speckle_radius,
        synth.speckle_density,
    );
    let program = synth.motion_program();
    let (clean, truth) = render_sequence(&base, &program, &NoiseSpec::none(seed))
        .context("rendering the clean sequence")?;

    for &level in &synth.noise_levels {
        let label = ExperimentConfig::noise_label(level);
        let level_dir = options.out_dir.join(&label);
        let frames_dir = level_dir.join("frames");
        fs::create_dir_all(&frames_dir)?;

        let sequence = with_noise(&clean, &NoiseSpec { level, seed })?;
        for (index, frame) in sequence.frames().iter().enumerate() {
            let path = frames_dir.join(frame_file_name(index, quantized));
            if quantized {
                write_pgm8(frame, &path)?;
            } else {
                write_f64_raw(frame, &path)?;
            }
        }

        write_truth_csv(&level_dir.join("ground_truth.csv"), &truth, &sequence)?;
        write_metadata(
            &level_dir.join("metadata.txt"),
            synth,
            seed,
            level,
            &program.max_displacement(synth.width, synth.height),
        )?;
    }
    Ok(())
}

fn write_truth_csv(path: &Path, truth: &GroundTruth, sequence: &ImageSequence) -> Result<()> {
    let mut out = String::new();
    let strained = matches!(truth, GroundTruth::UniformStrain { .. });
    if strained {
        out.push_str("frame,t_seconds,u_true,v_true,ex_true,ey_true\r\n");
    } else {
        out.push_str("frame,t_seconds,u_true,v_true\r\n");
    }
    for frame in 0..truth.len() {
        let t = sequence.time_of(frame);
        // displacement columns hold the rigid part (zero for pure strain)
        let (u, v) = match truth {
            GroundTruth::Translation { .. } => truth.displacement(frame, 0.0, 0.0),
            GroundTruth::UniformStrain { center, .. } => {
                truth.displacement(frame, center.0, center.1)
            }
        };
        if let Some((ex, ey)) = truth.strain(frame) {
            writeln!(out, "{frame},{t},{u},{v},{ex},{ey}\r").ok();
        } else {
            writeln!(out, "{frame},{t},{u},{v}\r").ok();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_metadata(
    path: &Path,
    synth: &SynthConfig,
    seed: u64,
    level: f64,
    max_displacement: &f64,
) -> Result<()> {
    let border_guard = max_displacement.ceil() + 5.0;
    let text = format!(
        "motion = {}\n\
         frame_count = {}\n\
         frame_interval_seconds = {}\n\
         width = {}\n\
         height = {}\n\
         speckle_radius_px = {}\n\
         speckle_density_per_px2 = {}\n\
         noise_level_fraction = {}\n\
         seed = {}\n\
         max_displacement_px = {}\n\
         roi_border_guard_px = {}\n\
         rng = chacha8 seeded from `seed`; stream 0 drives the speckle, stream t+1 the noise of frame t; gaussian deviates via box-muller from 53-bit uniforms\n",
        motion_description(&synth.motion),
        synth.frame_count,
        synth.frame_interval,
        synth.width,
        synth.height,
        synth.speckle_radius,
        synth.speckle_density,
        level,
        seed,
        max_displacement,
        border_guard,
    );
    fs::write(path, text)?;
    Ok(())
}

fn load_sequence(
    frames_dir: &Path,
    frame_count: usize,
    quantized: bool,
    frame_interval: f64,
) -> Result<ImageSequence> {
    let mut frames: Vec<GrayImage> = Vec::with_capacity(frame_count);
    for index in 0..frame_count {
        let path = frames_dir.join(frame_file_name(index, quantized));
        if !path.exists() {
            bail!("missing frame file: {}", path.display());
        }
        frames.push(load_image(&path)?);
    }
    Ok(ImageSequence::new(frames, frame_interval)?)
}

/// Derives the grid rectangle when the config leaves it out: inset by the
/// subset, the interpolation margin, the motion extent plus a wraparound
/// guard, and the initial-guess search radius.
fn auto_roi(synth: &SynthConfig, analyze: &AnalyzeConfig) -> Roi {
    let program = synth.motion_program();
    let max_disp = program.max_displacement(synth.width, synth.height);
    let guard = (max_disp.ceil() as usize + 5).max(analyze.search_radius);
    let inset = (analyze.subset_half_width + guard.max(MARGIN + 1)) as i64;
    Roi {
        x0: inset,
        y0: inset,
        x1: synth.width as i64 - 1 - inset,
        y1: synth.height as i64 - 1 - inset,
    }
}

struct MethodPlan {
    name: String,
    plan: AnalysisPlan,
}

fn build_plans(config: &ExperimentConfig) -> Result<Vec<MethodPlan>> {
    let analyze = config
        .analyze
        .as_ref()
        .ok_or_else(|| anyhow!("config has no analyze section"))?;
    let synth = config
        .synth
        .as_ref()
        .ok_or_else(|| anyhow!("analysis needs the synth section to locate frames"))?;
    let criterion = analyze.criterion_kind().map_err(|e| anyhow!(e))?;
    let roi = match analyze.roi {
        Some(r) => Roi {
            x0: r.x0,
            y0: r.y0,
            x1: r.x1,
            y1: r.y1,
        },
        None => auto_roi(synth, analyze),
    };
    let mut plans = Vec::new();
    for method in &analyze.methods {
        let spec = method.shape_function()?;
        let settings = SolveSettings {
            optimizer: method.optimizer_kind().map_err(|e| anyhow!(e))?,
            max_iterations: analyze.max_iterations,
            convergence_tol: analyze.convergence_tol,
            divergence_guard: analyze.divergence_guard,
        };
        let mut plan = AnalysisPlan::new(
            analyze.grid_step,
            analyze.subset_half_width,
            roi,
            spec,
            criterion,
            settings,
        );
        plan.search_radius = analyze.search_radius;
        plan.min_zncc = analyze.min_zncc;
        // sparse correlation lattice on large subsets
        plan.zncc_stride = if analyze.subset_half_width >= 8 { 2 } else { 1 };
        plans.push(MethodPlan {
            name: method.name.clone(),
            plan,
        });
    }
    Ok(plans)
}

/// Central frames shared by all methods: every window must fit.
fn central_frames(config: &ExperimentConfig, sequence_len: usize) -> Result<Vec<usize>> {
    let analyze = config.analyze.as_ref().expect("checked by build_plans");
    let half_max = analyze
        .methods
        .iter()
        .map(|m| (m.window - 1) / 2)
        .max()
        .unwrap_or(0);
    let (start, end) = match analyze.frames {
        Some(range) => (range.start, range.end),
        None => (half_max, sequence_len - 1 - half_max),
    };
    if start < half_max || end + half_max >= sequence_len || end < start {
        bail!(
            "frame range {start}..={end} does not fit windows of half-width {half_max} in {sequence_len} frames"
        );
    }
    Ok((start..=end).collect())
}

fn fields_path(out_dir: &Path, method: &str, label: &str) -> PathBuf {
    out_dir.join("fields").join(format!("{method}_{label}.csv"))
}

/// Runs every configured method over every noise level and writes fields
/// and run logs.
pub fn run_analyze(config: &ExperimentConfig, options: &RunOptions) -> Result<()> {
    let synth = config
        .synth
        .as_ref()
        .ok_or_else(|| anyhow!("analysis needs the synth section to locate frames"))?;
    let analyze = config
        .analyze
        .as_ref()
        .ok_or_else(|| anyhow!("config has no analyze section"))?;
    echo_effective_config(config, options)?;
    let plans = build_plans(config)?;
    let quantized = synth.quantize_8bit || options.quantize_8bit;

    fs::create_dir_all(options.out_dir.join("fields"))?;
    fs::create_dir_all(options.out_dir.join("logs"))?;

    for &level in &synth.noise_levels {
        let label = ExperimentConfig::noise_label(level);
        let frames_dir = options.out_dir.join(&label).join("frames");
        let sequence = load_sequence(
            &frames_dir,
            synth.frame_count + 1,
            quantized,
            synth.frame_interval,
        )?;
        let frames = central_frames(config, sequence.len())?;

        for method in &plans {
            let fields = analyze_sequence(&sequence, &method.plan, &frames)
                .with_context(|| format!("method {} on {label}", method.name))?;
            if analyze.concat_fields {
                write_fields_csv(fields_path(&options.out_dir, &method.name, &label), &fields)?;
            } else {
                for field in &fields {
                    let path = options.out_dir.join("fields").join(format!(
                        "{}_{}_frame_{:04}.csv",
                        method.name, label, field.frame
                    ));
                    write_fields_csv(path, std::slice::from_ref(field))?;
                }
            }
            write_run_log(
                options
                    .out_dir
                    .join("logs")
                    .join(format!("{}_{}.log", method.name, label)),
                &fields,
            )?;
        }
    }
    Ok(())
}

/// Ground truth read back from a synth output directory.
fn read_truth(config: &ExperimentConfig, level_dir: &Path) -> Result<GroundTruth> {
    let synth = config.synth.as_ref().expect("checked by callers");
    let path = level_dir.join("ground_truth.csv");
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let strained = header.contains("ex_true");
    let mut shifts = Vec::new();
    let mut strains = Vec::new();
    for line in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> Result<f64> {
            cols.get(i)
                .ok_or_else(|| anyhow!("short row in {}", path.display()))?
                .parse::<f64>()
                .map_err(|e| anyhow!("bad number in {}: {e}", path.display()))
        };
        if strained {
            strains.push((num(4)?, num(5)?));
        } else {
            shifts.push((num(2)?, num(3)?));
        }
    }
    Ok(if strained {
        GroundTruth::UniformStrain {
            strains,
            center: (
                (synth.width - 1) as f64 / 2.0,
                (synth.height - 1) as f64 / 2.0,
            ),
        }
    } else {
        GroundTruth::Translation { shifts }
    })
}

/// Per-frame error lists of one run, as `(time_seconds, error)` pairs.
pub struct MethodErrors {
    pub method: String,
    pub noise_level: f64,
    pub frames: Vec<FrameError>,
    pub times: Vec<f64>,
}

impl MethodErrors {
    pub fn component(&self, component: char) -> Vec<(f64, f64)> {
        self.frames
            .iter()
            .zip(&self.times)
            .map(|(e, t)| {
                (
                    *t,
                    match component {
                        'u' => e.u.mean_l1,
                        _ => e.v.mean_l1,
                    },
                )
            })
            .collect()
    }

    pub fn mean_l1(&self, component: char) -> f64 {
        let list = self.component(component);
        list.iter().map(|(_, e)| e).sum::<f64>() / list.len().max(1) as f64
    }

    pub fn mean_sd(&self, component: char) -> f64 {
        let sds: Vec<f64> = self
            .frames
            .iter()
            .map(|e| match component {
                'u' => e.u.sd,
                _ => e.v.sd,
            })
            .collect();
        sds.iter().sum::<f64>() / sds.len().max(1) as f64
    }
}

fn load_method_errors(
    config: &ExperimentConfig,
    options: &RunOptions,
    method: &str,
    level: f64,
) -> Result<MethodErrors> {
    let synth = config.synth.as_ref().expect("checked by callers");
    let label = ExperimentConfig::noise_label(level);
    let truth = read_truth(config, &options.out_dir.join(&label))?;
    let path = fields_path(&options.out_dir, method, &label);
    if !path.exists() {
        bail!("missing analysis output: {}", path.display());
    }
    let fields = read_fields_csv(&path)?;
    let mut frames = Vec::with_capacity(fields.len());
    let mut times = Vec::with_capacity(fields.len());
    for field in &fields {
        frames.push(frame_error(field, &truth)?);
        times.push(field.frame as f64 * synth.frame_interval);
    }
    Ok(MethodErrors {
        method: method.to_string(),
        noise_level: level,
        frames,
        times,
    })
}

/// Computes per-frame errors, emits the error CSV, plot data, ratio tables
/// and (for strain motions) strain statistics.
pub fn run_metrics(config: &ExperimentConfig, options: &RunOptions) -> Result<()> {
    let synth = config
        .synth
        .as_ref()
        .ok_or_else(|| anyhow!("metrics needs the synth section"))?;
    let analyze = config
        .analyze
        .as_ref()
        .ok_or_else(|| anyhow!("metrics needs the analyze section"))?;
    echo_effective_config(config, options)?;
    let metrics_dir = options.out_dir.join("metrics");
    let plots_dir = metrics_dir.join("plots");
    fs::create_dir_all(&plots_dir)?;

    let mut all_rows: Vec<(String, f64, FrameError)> = Vec::new();
    let mut runs: Vec<MethodErrors> = Vec::new();
    for &level in &synth.noise_levels {
        for method in &analyze.methods {
            let run = load_method_errors(config, options, &method.name, level)?;
            for e in &run.frames {
                all_rows.push((method.name.clone(), level, *e));
            }
            runs.push(run);
        }
    }
    write_frame_errors_csv(metrics_dir.join("frame_errors.csv"), &all_rows)?;

    // plot data: one (x, y) file per run and component
    for run in &runs {
        let label = ExperimentConfig::noise_label(run.noise_level);
        for component in ['u', 'v'] {
            let mut text = String::from("frame,error\r\n");
            for (e, t) in run.frames.iter().zip(&run.times) {
                let frame = (t / synth.frame_interval).round() as i64;
                let value = if component == 'u' {
                    e.u.mean_l1
                } else {
                    e.v.mean_l1
                };
                writeln!(text, "{frame},{value}\r").ok();
            }
            fs::write(
                plots_dir.join(format!("err_{component}_{}_{label}.csv", run.method)),
                text,
            )?;
        }
    }

    // ratio tables against the baseline method
    let baseline = config
        .metrics
        .baseline_method
        .clone()
        .or_else(|| analyze.methods.get(1).map(|m| m.name.clone()));
    if let Some(baseline) = baseline {
        if analyze.methods.iter().any(|m| m.name == baseline) {
            let others: Vec<String> = analyze
                .methods
                .iter()
                .filter(|m| m.name != baseline)
                .map(|m| m.name.clone())
                .collect();
            let min_t = config.metrics.time_filter_min;
            let filter = |t: f64| min_t.map_or(true, |m| t >= m);
            for component in ['u', 'v'] {
                let mut rows = Vec::new();
                for &level in &synth.noise_levels {
                    let base_run = runs
                        .iter()
                        .find(|r| r.method == baseline && r.noise_level == level)
                        .expect("baseline run exists");
                    let mut values = Vec::new();
                    for other in &others {
                        let run = runs
                            .iter()
                            .find(|r| r.method == *other && r.noise_level == level)
                            .expect("method run exists");
                        values.push(error_ratio(
                            &run.component(component),
                            &base_run.component(component),
                            filter,
                        )?);
                    }
                    rows.push((level * 100.0, values));
                }
                write_ratio_table_csv(
                    metrics_dir.join(format!("ratio_table_{component}.csv")),
                    &others,
                    &rows,
                )?;
            }
        }
    }

    if matches!(synth.motion, MotionConfig::UniformStrain { .. }) {
        write_strain_outputs(config, options, &metrics_dir)?;
    }
    Ok(())
}

fn write_strain_outputs(
    config: &ExperimentConfig,
    options: &RunOptions,
    metrics_dir: &Path,
) -> Result<()> {
    let synth = config.synth.as_ref().expect("checked by caller");
    let analyze = config.analyze.as_ref().expect("checked by caller");
    let mut stats_text = String::from(
        "frame,method,noise_level,mean_ux,mean_vy,sd_ux,sd_vy,n_converged\r\n",
    );
    let mut fit_text = String::from(
        "method,noise_level,component,slope_per_frame,intercept,r_squared\r\n",
    );
    for &level in &synth.noise_levels {
        let label = ExperimentConfig::noise_label(level);
        for method in &analyze.methods {
            let fields = read_fields_csv(fields_path(&options.out_dir, &method.name, &label))?;
            let mut frames: Vec<f64> = Vec::new();
            let mut ux: Vec<f64> = Vec::new();
            let mut vy: Vec<f64> = Vec::new();
            for field in &fields {
                let s = strain_stats(field)?;
                writeln!(
                    stats_text,
                    "{},{},{},{},{},{},{},{}\r",
                    field.frame, method.name, level, s.mean_ux, s.mean_vy, s.sd_ux, s.sd_vy, s.n
                )
                .ok();
                frames.push(field.frame as f64);
                ux.push(s.mean_ux);
                vy.push(s.mean_vy);
            }
            for (component, values) in [("ux", &ux), ("vy", &vy)] {
                let fit = linear_fit(&frames, values)?;
                writeln!(
                    fit_text,
                    "{},{},{},{},{},{}\r",
                    method.name, level, component, fit.slope, fit.intercept, fit.r_squared
                )
                .ok();
            }
        }
    }
    fs::write(metrics_dir.join("strain_stats.csv"), stats_text)?;
    fs::write(metrics_dir.join("strain_fit.csv"), fit_text)?;
    Ok(())
}

/// Canned experiments.
pub mod presets {
    use super::*;
    use crate::config::{FrameRange, MethodConfig, MetricsConfig};

    fn method(name: &str, spatial: u8, temporal: u8, cross: bool, window: usize, optimizer: &str) -> MethodConfig {
        MethodConfig {
            name: name.to_string(),
            spatial_order: spatial,
            temporal_order: temporal,
            cross_terms: cross,
            window,
            optimizer: optimizer.to_string(),
        }
    }

    /// Subpixel translation study: 20 frames at 0.05 px per frame, noise
    /// 0-5%, spatial DIC against the first-order spatial-temporal method.
    pub fn translation(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            synth: Some(SynthConfig {
                width: 192,
                height: 192,
                speckle_radius: 2.5,
                speckle_density: 0.02,
                motion: MotionConfig::Translation,
                frame_count: 20,
                frame_interval: 1.0,
                noise_levels: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
                quantize_8bit: false,
            }),
            analyze: Some(AnalyzeConfig {
                methods: vec![
                    method("spatial-1", 1, 0, false, 1, "ic"),
                    method("st-1", 1, 1, true, 5, "ic"),
                ],
                subset_half_width: 15,
                grid_step: 10,
                roi: Some(crate::config::RoiConfig {
                    x0: 36,
                    y0: 36,
                    x1: 146,
                    y1: 146,
                }),
                criterion: "znssd".to_string(),
                max_iterations: 50,
                convergence_tol: 1e-4,
                divergence_guard: 5.0,
                search_radius: 3,
                min_zncc: 0.3,
                frames: Some(FrameRange { start: 2, end: 18 }),
                concat_fields: true,
            }),
            metrics: MetricsConfig {
                baseline_method: Some("st-1".to_string()),
                time_filter_min: None,
            },
        }
    }

    /// Damped-vibration study: 200 frames at 0.01 s, three methods, ratio
    /// table over the gently-varying span (t >= 1 s).
    pub fn vibration(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            synth: Some(SynthConfig {
                width: 192,
                height: 192,
                speckle_radius: 2.5,
                speckle_density: 0.02,
                motion: MotionConfig::Vibration,
                frame_count: 199,
                frame_interval: 0.01,
                noise_levels: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
                quantize_8bit: false,
            }),
            analyze: Some(AnalyzeConfig {
                methods: vec![
                    method("spatial-1", 1, 0, false, 1, "ic"),
                    method("st-1", 1, 1, true, 5, "ic"),
                    method("st-2", 1, 2, false, 5, "fa"),
                ],
                subset_half_width: 15,
                grid_step: 10,
                roi: Some(crate::config::RoiConfig {
                    x0: 66,
                    y0: 66,
                    x1: 126,
                    y1: 126,
                }),
                criterion: "znssd".to_string(),
                max_iterations: 50,
                // the noisy runs approach their optimum geometrically with
                // a ratio near 0.5; stopping at 1e-3 px leaves the
                // parameters ~1e-3 px from the fixed point, two orders
                // below the noise floor of this experiment
                convergence_tol: 1e-3,
                divergence_guard: 5.0,
                search_radius: 8,
                min_zncc: 0.3,
                frames: None,
                concat_fields: true,
            }),
            metrics: MetricsConfig {
                baseline_method: Some("st-1".to_string()),
                time_filter_min: Some(1.0),
            },
        }
    }

    /// Uniform thermal-expansion analog: linear-in-frame biaxial strain,
    /// larger subsets on a sparser grid.
    pub fn expansion(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            synth: Some(SynthConfig {
                width: 256,
                height: 256,
                speckle_radius: 2.5,
                speckle_density: 0.02,
                motion: MotionConfig::UniformStrain {
                    ex_rate: 20e-6,
                    ey_rate: 20e-6,
                },
                frame_count: 15,
                frame_interval: 1.0,
                noise_levels: vec![0.0, 0.02],
                quantize_8bit: false,
            }),
            analyze: Some(AnalyzeConfig {
                methods: vec![
                    method("spatial-1", 1, 0, false, 1, "ic"),
                    method("st-1", 1, 1, true, 5, "ic"),
                ],
                subset_half_width: 25,
                grid_step: 15,
                roi: Some(crate::config::RoiConfig {
                    x0: 46,
                    y0: 46,
                    x1: 181,
                    y1: 181,
                }),
                criterion: "znssd".to_string(),
                max_iterations: 50,
                convergence_tol: 1e-4,
                divergence_guard: 5.0,
                search_radius: 3,
                min_zncc: 0.3,
                frames: Some(FrameRange { start: 2, end: 13 }),
                concat_fields: true,
            }),
            metrics: MetricsConfig {
                baseline_method: Some("st-1".to_string()),
                time_filter_min: None,
            },
        }
    }
}

/// Runs synth, analyze and metrics for a canned experiment and writes a
/// summary report.
pub fn run_reproduce(name: &str, options: &RunOptions) -> Result<()> {
    let seed = options.seed_override.unwrap_or(1);
    let config = match name {
        "translation" => presets::translation(seed),
        "vibration" => presets::vibration(seed),
        other => bail!("unknown experiment {other:?} (expected translation or vibration)"),
    };
    run_synth(&config, options)?;
    run_analyze(&config, options)?;
    run_metrics(&config, options)?;
    let summary = match name {
        "translation" => summarize_translation(&config, options)?,
        _ => summarize_vibration(&config, options)?,
    };
    fs::write(options.out_dir.join("summary.txt"), summary)?;
    Ok(())
}

fn summarize_translation(config: &ExperimentConfig, options: &RunOptions) -> Result<String> {
    let synth = config.synth.as_ref().expect("preset has synth");
    let mut text = String::from("subpixel translation experiment\n\n");
    writeln!(
        text,
        "{:>9} {:>12} {:>12} {:>12} {:>12}",
        "noise_pct", "spatial_u", "st_u", "spatial_sd", "st_sd"
    )
    .ok();
    let mut spatial_at = std::collections::BTreeMap::new();
    let mut st_at = std::collections::BTreeMap::new();
    for &level in &synth.noise_levels {
        let spatial = load_method_errors(config, options, "spatial-1", level)?;
        let st = load_method_errors(config, options, "st-1", level)?;
        writeln!(
            text,
            "{:>9} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            level * 100.0,
            spatial.mean_l1('u'),
            st.mean_l1('u'),
            spatial.mean_sd('u'),
            st.mean_sd('u'),
        )
        .ok();
        spatial_at.insert((level * 1000.0) as i64, spatial.mean_l1('u'));
        st_at.insert((level * 1000.0) as i64, st.mean_l1('u'));
    }
    if let (Some(sp3), Some(st5)) = (spatial_at.get(&30), st_at.get(&50)) {
        writeln!(
            text,
            "\nst at 5% noise vs spatial at 3% noise (mean u error): {:.6} / {:.6} = {:.3}",
            st5,
            sp3,
            st5 / sp3
        )
        .ok();
    }
    Ok(text)
}

fn summarize_vibration(config: &ExperimentConfig, options: &RunOptions) -> Result<String> {
    let synth = config.synth.as_ref().expect("preset has synth");
    let mut text = String::from("damped vibration experiment\n\n");
    text.push_str("mean-error ratios vs st-1 over t >= 1 s (v component):\n");
    writeln!(text, "{:>9} {:>10} {:>10}", "noise_pct", "spatial", "st-2").ok();
    for &level in &synth.noise_levels {
        let spatial = load_method_errors(config, options, "spatial-1", level)?;
        let st1 = load_method_errors(config, options, "st-1", level)?;
        let st2 = load_method_errors(config, options, "st-2", level)?;
        let filter = |t: f64| t >= 1.0;
        let r_spatial = error_ratio(&spatial.component('v'), &st1.component('v'), filter)?;
        let r_st2 = error_ratio(&st2.component('v'), &st1.component('v'), filter)?;
        writeln!(
            text,
            "{:>9} {:>10.3} {:>10.3}",
            level * 100.0,
            r_spatial,
            r_st2
        )
        .ok();
    }
    text.push_str("\nnear-extremum span (t < 1 s), mean u error:\n");
    writeln!(text, "{:>9} {:>12} {:>12}", "noise_pct", "st-1", "st-2").ok();
    for &level in &synth.noise_levels {
        let st1 = load_method_errors(config, options, "st-1", level)?;
        let st2 = load_method_errors(config, options, "st-2", level)?;
        let early = |run: &MethodErrors| {
            let list: Vec<f64> = run
                .component('u')
                .iter()
                .filter(|(t, _)| *t < 1.0)
                .map(|(_, e)| *e)
                .collect();
            list.iter().sum::<f64>() / list.len().max(1) as f64
        };
        writeln!(
            text,
            "{:>9} {:>12.6} {:>12.6}",
            level * 100.0,
            early(&st1),
            early(&st2)
        )
        .ok();
    }
    Ok(text)
}
