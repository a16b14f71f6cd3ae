//! Experiment configuration: one JSON document describing synthesis,
//! analysis and metrics of a run. Unknown keys are rejected; all defaults
//! are resolved at load time and the effective config is echoed into the
//! output directory for provenance.

use serde::{Deserialize, Serialize};
use stdic::criterion::CriterionKind;
use stdic::solver::OptimizerKind;
use stdic::synth::{MotionKind, MotionProgram};
use stdic::ShapeFunctionSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for speckle and noise streams.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub synth: Option<SynthConfig>,
    pub analyze: Option<AnalyzeConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_size")]
    pub width: usize,
    #[serde(default = "default_size")]
    pub height: usize,
    #[serde(default = "default_radius")]
    pub speckle_radius: f64,
    #[serde(default = "default_density")]
    pub speckle_density: f64,
    pub motion: MotionConfig,
    /// Number of deformed frames after the reference.
    pub frame_count: usize,
    #[serde(default = "default_interval")]
    pub frame_interval: f64,
    /// Noise standard deviations as fractions of the 255 grayscale range.
    #[serde(default = "default_noise_levels")]
    pub noise_levels: Vec<f64>,
    /// Round and clip frames to 8 bits on output (PGM instead of raw f64).
    #[serde(default)]
    pub quantize_8bit: bool,
}

fn default_size() -> usize {
    192
}

fn default_radius() -> f64 {
    2.5
}

fn default_density() -> f64 {
    0.02
}

fn default_interval() -> f64 {
    1.0
}

fn default_noise_levels() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionConfig {
    /// u(t) = t/20 px per frame index.
    Translation,
    /// Damped two-axis vibration sampled at `frame_interval` seconds.
    Vibration,
    ConstantVelocity { u_rate: f64, v_rate: f64 },
    UniformStrain { ex_rate: f64, ey_rate: f64 },
}

impl MotionConfig {
    pub fn kind(&self) -> MotionKind {
        match *self {
            MotionConfig::Translation => MotionKind::Translation,
            MotionConfig::Vibration => MotionKind::Vibration,
            MotionConfig::ConstantVelocity { u_rate, v_rate } => {
                MotionKind::ConstantVelocity { u_rate, v_rate }
            }
            MotionConfig::UniformStrain { ex_rate, ey_rate } => {
                MotionKind::UniformStrain { ex_rate, ey_rate }
            }
        }
    }
}

impl SynthConfig {
    pub fn motion_program(&self) -> MotionProgram {
        MotionProgram {
            kind: self.motion.kind(),
            frame_count: self.frame_count,
            frame_interval: self.frame_interval,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    pub spatial_order: u8,
    pub temporal_order: u8,
    #[serde(default)]
    pub cross_terms: bool,
    pub window: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
}

fn default_optimizer() -> String {
    "ic".to_string()
}

impl MethodConfig {
    pub fn shape_function(&self) -> stdic::Result<ShapeFunctionSpec> {
        ShapeFunctionSpec::new(
            self.spatial_order,
            self.temporal_order,
            self.cross_terms,
            self.cross_terms,
            self.window,
        )
    }

    pub fn optimizer_kind(&self) -> Result<OptimizerKind, String> {
        match self.optimizer.as_str() {
            "fa" => Ok(OptimizerKind::ForwardAdditive),
            "fc" => Ok(OptimizerKind::ForwardCompositional),
            "ic" => Ok(OptimizerKind::InverseCompositional),
            other => Err(format!("unknown optimizer {other:?} (expected fa, fc or ic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRange {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub methods: Vec<MethodConfig>,
    #[serde(default = "default_half_width")]
    pub subset_half_width: usize,
    #[serde(default = "default_grid_step")]
    pub grid_step: usize,
    /// Grid-center rectangle; derived from the motion extent when absent.
    pub roi: Option<RoiConfig>,
    #[serde(default = "default_criterion")]
    pub criterion: String,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tol")]
    pub convergence_tol: f64,
    #[serde(default = "default_guard")]
    pub divergence_guard: f64,
    #[serde(default = "default_search_radius")]
    pub search_radius: usize,
    #[serde(default = "default_min_zncc")]
    pub min_zncc: f64,
    /// Central frames to analyze; derived from the widest window when
    /// absent.
    pub frames: Option<FrameRange>,
    /// One concatenated CSV per method (true) or one per frame (false).
    #[serde(default = "default_true")]
    pub concat_fields: bool,
}

fn default_half_width() -> usize {
    15
}

fn default_grid_step() -> usize {
    10
}

fn default_criterion() -> String {
    "znssd".to_string()
}

fn default_max_iterations() -> usize {
    50
}

fn default_tol() -> f64 {
    1e-4
}

fn default_guard() -> f64 {
    5.0
}

fn default_search_radius() -> usize {
    10
}

fn default_min_zncc() -> f64 {
    0.3
}

fn default_true() -> bool {
    true
}

impl AnalyzeConfig {
    pub fn criterion_kind(&self) -> Result<CriterionKind, String> {
        match self.criterion.as_str() {
            "ssd" => Ok(CriterionKind::Ssd),
            "znssd" => Ok(CriterionKind::Znssd),
            other => Err(format!(
                "unknown criterion {other:?} (expected ssd or znssd)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Method the ratio table normalizes by; defaults to the second
    /// configured method.
    #[serde(default)]
    pub baseline_method: Option<String>,
    /// Ratio-table frames keep `t >= time_filter_min` seconds.
    #[serde(default)]
    pub time_filter_min: Option<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            baseline_method: None,
            time_filter_min: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, String> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(synth) = &self.synth {
            if synth.frame_count == 0 {
                return Err("synth.frame_count must be positive".into());
            }
            if synth.noise_levels.is_empty() {
                return Err("synth.noise_levels must not be empty".into());
            }
            if synth.noise_levels.iter().any(|l| *l < 0.0) {
                return Err("noise levels must be non-negative".into());
            }
            if synth.width < 64 || synth.height < 64 {
                return Err("synth images must be at least 64x64".into());
            }
        }
        if let Some(analyze) = &self.analyze {
            if analyze.methods.is_empty() {
                return Err("analyze.methods must not be empty".into());
            }
            let mut names: Vec<&str> = analyze.methods.iter().map(|m| m.name.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            if names.len() != analyze.methods.len() {
                return Err("method names must be unique".into());
            }
            for m in &analyze.methods {
                m.shape_function().map_err(|e| e.to_string())?;
                let optimizer = m.optimizer_kind()?;
                let sf = m.shape_function().map_err(|e| e.to_string())?;
                if optimizer != OptimizerKind::ForwardAdditive && !sf.is_warp_capable() {
                    return Err(format!(
                        "method {:?}: optimizer {:?} needs a warp-capable shape function; use \"fa\"",
                        m.name, m.optimizer
                    ));
                }
            }
            analyze.criterion_kind()?;
            if let Some(r) = &analyze.frames {
                if r.end < r.start {
                    return Err("frames.end must be >= frames.start".into());
                }
            }
        }
        Ok(())
    }

    /// Directory label of a noise level, e.g. `noise_2.5` for 2.5%.
    pub fn noise_label(level: f64) -> String {
        let pct = level * 100.0;
        if (pct - pct.round()).abs() < 1e-9 {
            format!("noise_{}", pct.round() as i64)
        } else {
            format!("noise_{pct}")
        }
    }
}
