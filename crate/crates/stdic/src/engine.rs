//! Full-field measurement pipeline: grid construction, integer-pixel
//! initial guessing, temporal-window management and per-point solve
//! dispatch.
//!
//! The reference is always frame 0 of the sequence; each analyzed frame is
//! the center of a symmetric window of `m` frames. Per-point solves are
//! independent and run in parallel; results are gathered in grid order, so
//! output is identical for any thread count. Non-converged points stay in
//! the field with their failure recorded, never dropped.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::criterion::CriterionKind;
use crate::error::{Error, Result};
use crate::image::{GrayImage, ImageSequence, SubsetRegion};
use crate::shapefn::{Monomial, ParamLayout, ParamSet, ShapeFunctionSpec};
use crate::solver::{
    self, precompute_ic, reference_stack, OptimizerKind, SolveFailure, SolveOutcome,
    SolveSettings,
};

/// Inclusive rectangle of grid-point centers, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

/// Everything needed to analyze frames of a sequence.
#[derive(Debug, Clone)]
pub struct AnalysisPlan {
    pub grid_step: usize,
    pub subset_half_width: usize,
    pub roi: Roi,
    pub spec: ShapeFunctionSpec,
    pub criterion: CriterionKind,
    pub settings: SolveSettings,
    /// Half-width of the integer search window of the initial guess.
    pub search_radius: usize,
    /// ZNCC peak below which a point is flagged instead of solved.
    pub min_zncc: f64,
    /// Pixel stride of the correlation used for initial guessing; the
    /// guess needs integer accuracy only, so sparse sampling is safe and
    /// much cheaper on large subsets.
    pub zncc_stride: usize,
}

impl AnalysisPlan {
    pub fn new(
        grid_step: usize,
        subset_half_width: usize,
        roi: Roi,
        spec: ShapeFunctionSpec,
        criterion: CriterionKind,
        settings: SolveSettings,
    ) -> AnalysisPlan {
        AnalysisPlan {
            grid_step,
            subset_half_width,
            roi,
            spec,
            criterion,
            settings,
            search_radius: 10,
            min_zncc: 0.3,
            zncc_stride: 1,
        }
    }

    /// Grid centers in row-major order.
    pub fn grid_points(&self) -> Vec<(i64, i64)> {
        let mut points = Vec::new();
        let mut y = self.roi.y0;
        while y <= self.roi.y1 {
            let mut x = self.roi.x0;
            while x <= self.roi.x1 {
                points.push((x, y));
                x += self.grid_step as i64;
            }
            y += self.grid_step as i64;
        }
        points
    }

    /// Checks the plan against a sequence: window length, grid emptiness,
    /// and that every subset plus interpolation margin fits the images.
    pub fn validate(&self, sequence: &ImageSequence) -> Result<()> {
        if self.grid_step == 0 {
            return Err(Error::InvalidPlan {
                reason: "grid step must be positive".into(),
            });
        }
        if self.spec.window() > sequence.len() {
            return Err(Error::InvalidPlan {
                reason: format!(
                    "window of {} frames exceeds sequence length {}",
                    self.spec.window(),
                    sequence.len()
                ),
            });
        }
        let points = self.grid_points();
        if points.is_empty() {
            return Err(Error::InvalidPlan {
                reason: "roi contains no grid points".into(),
            });
        }
        let frame = sequence.frame(0);
        for &(x, y) in &[(self.roi.x0, self.roi.y0), (self.roi.x1, self.roi.y1)] {
            let region = SubsetRegion::new(x, y, self.subset_half_width)?;
            region.validate_in(frame).map_err(|_| Error::InvalidPlan {
                reason: format!(
                    "subset at ({x}, {y}) with half-width {} leaves the valid image interior",
                    self.subset_half_width
                ),
            })?;
        }
        Ok(())
    }

    /// Stable content hash, recorded in fields for provenance.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.grid_step as u64);
        h.write_u64(self.subset_half_width as u64);
        for v in [self.roi.x0, self.roi.y0, self.roi.x1, self.roi.y1] {
            h.write_u64(v as u64);
        }
        h.write_u64(self.spec.spatial_order() as u64);
        h.write_u64(self.spec.temporal_order() as u64);
        let (xt, yt) = self.spec.cross_terms();
        h.write_u64(xt as u64);
        h.write_u64(yt as u64);
        h.write_u64(self.spec.window() as u64);
        h.write_u64(self.criterion.name().len() as u64);
        for b in self.criterion.name().bytes() {
            h.write_u64(b as u64);
        }
        h.write_u64(self.settings.max_iterations as u64);
        h.write_u64(self.settings.convergence_tol.to_bits());
        h.write_u64(self.settings.divergence_guard.to_bits());
        h.write_u64(self.search_radius as u64);
        h.write_u64(self.min_zncc.to_bits());
        h.write_u64(self.zncc_stride as u64);
        h.finish()
    }
}

/// FNV-1a, used for stable plan hashes independent of std's hasher.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Fnv1a {
        Fnv1a(0xcbf29ce484222325)
    }

    fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Integer initial guess from zero-mean normalized cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub u: i64,
    pub v: i64,
    /// ZNCC score of the winning offset, in [-1, 1].
    pub peak: f64,
}

/// Exhaustive integer ZNCC search of the subset of `ref_image` at `region`
/// inside `target`, offsets in `[-search_radius, +search_radius]^2`.
/// Ties break toward the smallest displacement norm, then lexicographic
/// `(u, v)`.
pub fn initial_guess(
    ref_image: &GrayImage,
    target: &GrayImage,
    region: &SubsetRegion,
    search_radius: usize,
) -> Result<InitialGuess> {
    initial_guess_strided(ref_image, target, region, search_radius, 1)
}

/// [`initial_guess`] over a sparse pixel lattice of the subset (every
/// `stride`-th offset in each direction).
pub fn initial_guess_strided(
    ref_image: &GrayImage,
    target: &GrayImage,
    region: &SubsetRegion,
    search_radius: usize,
    stride: usize,
) -> Result<InitialGuess> {
    let stride = stride.max(1) as i64;
    let (cx, cy) = region.center();
    let h = region.half_width() as i64;
    let r = search_radius as i64;
    if cx - h - r < 0
        || cy - h - r < 0
        || cx + h + r >= target.width() as i64
        || cy + h + r >= target.height() as i64
    {
        return Err(Error::OutOfDomain {
            x: cx as f64,
            y: cy as f64,
        });
    }

    let mut ref_values = Vec::with_capacity(region.pixel_count());
    let mut taps = Vec::with_capacity(region.pixel_count());
    for (dx, dy) in region.offsets() {
        if dx.rem_euclid(stride) != 0 || dy.rem_euclid(stride) != 0 {
            continue;
        }
        ref_values.push(ref_image.intensity((cx + dx) as usize, (cy + dy) as usize));
        taps.push((dx, dy));
    }
    let n2 = ref_values.len() as f64;
    let ref_mean = ref_values.iter().sum::<f64>() / n2;
    let ref_ss: f64 = ref_values
        .iter()
        .map(|v| (v - ref_mean) * (v - ref_mean))
        .sum();
    if ref_ss.sqrt() < 1e-6 * n2.sqrt() {
        return Err(Error::FlatSubset {
            sdev: ref_ss.sqrt(),
            threshold: 1e-6 * n2.sqrt(),
        });
    }

    let mut best: Option<InitialGuess> = None;
    for dv in -r..=r {
        for du in -r..=r {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut cross = 0.0;
            for (i, &(dx, dy)) in taps.iter().enumerate() {
                let g = target.intensity((cx + dx + du) as usize, (cy + dy + dv) as usize);
                sum += g;
                sum_sq += g * g;
                cross += ref_values[i] * g;
            }
            let g_mean = sum / n2;
            let g_ss = sum_sq - n2 * g_mean * g_mean;
            if g_ss <= 0.0 {
                continue; // flat candidate window
            }
            let score = (cross - n2 * ref_mean * g_mean) / (ref_ss.sqrt() * g_ss.sqrt());
            let better = match &best {
                None => true,
                Some(b) => {
                    if score != b.peak {
                        score > b.peak
                    } else {
                        let nc = du * du + dv * dv;
                        let nb = b.u * b.u + b.v * b.v;
                        nc < nb || (nc == nb && (du, dv) < (b.u, b.v))
                    }
                }
            };
            if better {
                best = Some(InitialGuess {
                    u: du,
                    v: dv,
                    peak: score,
                });
            }
        }
    }
    best.ok_or(Error::FlatSubset {
        sdev: 0.0,
        threshold: 0.0,
    })
}

/// One grid point of a displacement field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPoint {
    pub x: i64,
    pub y: i64,
    pub outcome: SolveOutcome,
}

/// Converged grid of subset solves for one central frame, expressed with
/// respect to frame 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub frame: usize,
    pub layout: ParamLayout,
    pub points: Vec<FieldPoint>,
    /// Content hash of the producing plan; `None` for fields read back
    /// from files.
    pub plan_hash: Option<u64>,
}

impl DisplacementField {
    pub fn n_converged(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.converged).count()
    }

    pub fn convergence_fraction(&self) -> f64 {
        self.n_converged() as f64 / self.points.len().max(1) as f64
    }

    /// Iterates converged points as `(x, y, params)`.
    pub fn converged_points(&self) -> impl Iterator<Item = (f64, f64, &ParamSet)> {
        self.points.iter().filter_map(|p| {
            p.outcome
                .converged
                .then_some((p.x as f64, p.y as f64, &p.outcome.params))
        })
    }
}

fn failure_of(err: Error) -> SolveFailure {
    match err {
        Error::Singular { .. } => SolveFailure::Singular,
        Error::SingularWarp { .. } => SolveFailure::SingularWarp,
        Error::FlatSubset { .. } => SolveFailure::FlatSubset,
        Error::OutOfDomain { .. } => SolveFailure::OutOfDomain,
        _ => SolveFailure::Diverged,
    }
}

/// Reference-side state of one grid point, reusable across every central
/// frame (the reference never changes).
enum PointState {
    Ic(solver::PrecomputedIC),
    Forward(crate::criterion::SubsetSample),
    Failed(SolveFailure),
}

fn prepare_point(sequence: &ImageSequence, plan: &AnalysisPlan, x: i64, y: i64) -> PointState {
    let ref_image = sequence.frame(0);
    let region = match SubsetRegion::new(x, y, plan.subset_half_width) {
        Ok(r) => r,
        Err(e) => return PointState::Failed(failure_of(e)),
    };
    match plan.settings.optimizer {
        OptimizerKind::InverseCompositional => {
            match precompute_ic(ref_image, &region, &plan.spec, plan.criterion) {
                Ok(pre) => PointState::Ic(pre),
                Err(e) => PointState::Failed(failure_of(e)),
            }
        }
        _ => match reference_stack(ref_image, &region, plan.spec.window()) {
            Ok(sample) => PointState::Forward(sample),
            Err(e) => PointState::Failed(failure_of(e)),
        },
    }
}

/// Temporal monomials propagated between consecutive frames as a warm
/// start.
const TEMPORAL_MONOMIALS: [Monomial; 4] = [
    Monomial::T,
    Monomial::XT,
    Monomial::YT,
    Monomial::TT,
];

fn solve_prepared(
    state: &PointState,
    sequence: &ImageSequence,
    plan: &AnalysisPlan,
    central_frame: usize,
    x: i64,
    y: i64,
    temporal_seed: Option<&ParamSet>,
) -> SolveOutcome {
    let layout = plan.spec.layout();
    let zero = ParamSet::zero(layout);
    let state = match state {
        PointState::Failed(f) => return SolveOutcome::failed(zero, 0, *f),
        other => other,
    };
    let region = SubsetRegion::new(x, y, plan.subset_half_width).expect("validated in prepare");
    let ref_image = sequence.frame(0);

    let guess = match initial_guess_strided(
        ref_image,
        sequence.frame(central_frame),
        &region,
        plan.search_radius,
        plan.zncc_stride,
    ) {
        Ok(g) => g,
        Err(e) => return SolveOutcome::failed(zero, 0, failure_of(e)),
    };
    if guess.peak < plan.min_zncc {
        return SolveOutcome::failed(zero, 0, SolveFailure::NotFound);
    }

    let mut init = ParamSet::zero(layout);
    init.set_u_coeff(Monomial::One, guess.u as f64);
    init.set_v_coeff(Monomial::One, guess.v as f64);
    if let Some(seed) = temporal_seed {
        for m in TEMPORAL_MONOMIALS {
            init.set_u_coeff(m, seed.u_coeff(m));
            init.set_v_coeff(m, seed.v_coeff(m));
        }
    }

    let solved = match state {
        PointState::Ic(pre) => solver::solve_ic(
            pre,
            sequence,
            central_frame,
            plan.criterion,
            &init,
            &plan.settings,
        ),
        PointState::Forward(ref_sample) => {
            let solve = if plan.settings.optimizer == OptimizerKind::ForwardCompositional {
                solver::solve_fc
            } else {
                solver::solve_fa
            };
            solve(
                ref_sample,
                sequence,
                central_frame,
                &region,
                &plan.spec,
                plan.criterion,
                &init,
                &plan.settings,
            )
        }
        PointState::Failed(_) => unreachable!(),
    };
    match solved {
        Ok(outcome) => outcome,
        Err(e) => SolveOutcome::failed(init, 0, failure_of(e)),
    }
}

fn solve_point(
    sequence: &ImageSequence,
    plan: &AnalysisPlan,
    central_frame: usize,
    x: i64,
    y: i64,
    temporal_seed: Option<&ParamSet>,
) -> SolveOutcome {
    let state = prepare_point(sequence, plan, x, y);
    solve_prepared(&state, sequence, plan, central_frame, x, y, temporal_seed)
}

fn check_window(sequence: &ImageSequence, plan: &AnalysisPlan, central_frame: usize) -> Result<()> {
    let half = (plan.spec.window() - 1) / 2;
    if central_frame < half || central_frame + half >= sequence.len() {
        return Err(Error::WindowOutOfRange {
            central: central_frame,
            window: plan.spec.window(),
            len: sequence.len(),
        });
    }
    Ok(())
}

/// Analyzes one central frame: every grid point gets an integer initial
/// guess against the central frame, temporal parameters seeded from
/// `temporal_seed` (the previous frame's field) when available, and a
/// solve over the window. Per-point failures are recorded, not raised.
pub fn analyze_frame_seeded(
    sequence: &ImageSequence,
    plan: &AnalysisPlan,
    central_frame: usize,
    temporal_seed: Option<&DisplacementField>,
) -> Result<DisplacementField> {
    plan.validate(sequence)?;
    check_window(sequence, plan, central_frame)?;

    let points = plan.grid_points();
    let layout = plan.spec.layout();
    let seeds: Vec<Option<&ParamSet>> = match temporal_seed {
        Some(prev) if prev.layout == *layout && prev.points.len() == points.len() => prev
            .points
            .iter()
            .map(|p| {
                (p.outcome.converged && layout.contains(Monomial::T))
                    .then_some(&p.outcome.params)
            })
            .collect(),
        _ => vec![None; points.len()],
    };

    let solved: Vec<FieldPoint> = points
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&(x, y), seed)| FieldPoint {
            x,
            y,
            outcome: solve_point(sequence, plan, central_frame, x, y, *seed),
        })
        .collect();

    Ok(DisplacementField {
        frame: central_frame,
        layout: layout.clone(),
        points: solved,
        plan_hash: Some(plan.content_hash()),
    })
}

/// Analyzes one central frame with zero temporal seeding.
pub fn analyze_frame(
    sequence: &ImageSequence,
    plan: &AnalysisPlan,
    central_frame: usize,
) -> Result<DisplacementField> {
    analyze_frame_seeded(sequence, plan, central_frame, None)
}

/// Analyzes a list of central frames in order. Each grid point prepares
/// its reference-side state (IC precompute or reference stack) once and
/// walks the frames with it; a converged frame seeds the temporal
/// parameters of the next consecutive frame at the same point (a warm
/// start that changes iteration counts, not results). Per-point work is
/// parallel, gathered in grid order.
pub fn analyze_sequence(
    sequence: &ImageSequence,
    plan: &AnalysisPlan,
    frames: &[usize],
) -> Result<Vec<DisplacementField>> {
    plan.validate(sequence)?;
    for &f in frames {
        check_window(sequence, plan, f)?;
    }
    let points = plan.grid_points();
    let layout = plan.spec.layout();
    let seeding = layout.contains(Monomial::T);

    // per point: outcomes over all frames
    let columns: Vec<Vec<SolveOutcome>> = points
        .par_iter()
        .map(|&(x, y)| {
            let state = prepare_point(sequence, plan, x, y);
            let mut outcomes: Vec<SolveOutcome> = Vec::with_capacity(frames.len());
            for (i, &frame) in frames.iter().enumerate() {
                let seed = if seeding && i > 0 && frames[i - 1] + 1 == frame {
                    let prev = &outcomes[i - 1];
                    prev.converged.then_some(&prev.params)
                } else {
                    None
                };
                let seed = seed.cloned();
                outcomes.push(solve_prepared(
                    &state,
                    sequence,
                    plan,
                    frame,
                    x,
                    y,
                    seed.as_ref(),
                ));
            }
            outcomes
        })
        .collect();

    let hash = plan.content_hash();
    Ok(frames
        .iter()
        .enumerate()
        .map(|(i, &frame)| DisplacementField {
            frame,
            layout: layout.clone(),
            points: points
                .iter()
                .zip(&columns)
                .map(|(&(x, y), column)| FieldPoint {
                    x,
                    y,
                    outcome: column[i].clone(),
                })
                .collect(),
            plan_hash: Some(hash),
        })
        .collect())
}

/// CSV header for a field of the given layout:
/// `frame, x, y, converged, iterations, residual_norm, u, v, <gradients>`.
pub fn field_csv_header(layout: &ParamLayout) -> Vec<String> {
    let mut header = vec![
        "frame".to_string(),
        "x".to_string(),
        "y".to_string(),
        "converged".to_string(),
        "iterations".to_string(),
        "residual_norm".to_string(),
    ];
    let names = layout.param_names();
    let k = layout.len();
    header.push(names[0].clone()); // u
    header.push(names[k].clone()); // v
    header.extend(names[1..k].iter().cloned());
    header.extend(names[k + 1..].iter().cloned());
    header
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::BadCsvFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Writes fields as RFC-4180 CSV with one row per grid point.
pub fn write_fields_csv(path: impl AsRef<Path>, fields: &[DisplacementField]) -> Result<()> {
    let path = path.as_ref();
    let layout = match fields.first() {
        Some(f) => &f.layout,
        None => {
            return Err(Error::InvalidPlan {
                reason: "no fields to write".into(),
            })
        }
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(field_csv_header(layout))
        .map_err(csv_error(path))?;
    let k = layout.len();
    for field in fields {
        assert_eq!(field.layout, *layout, "fields share one layout per file");
        for p in &field.points {
            let o = &p.outcome;
            let mut record = vec![
                field.frame.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                o.converged.to_string(),
                o.iterations.to_string(),
                format!("{}", o.final_residual_norm),
            ];
            record.push(format!("{}", o.params.u_params()[0]));
            record.push(format!("{}", o.params.v_params()[0]));
            for i in 1..k {
                record.push(format!("{}", o.params.u_params()[i]));
            }
            for i in 1..k {
                record.push(format!("{}", o.params.v_params()[i]));
            }
            w.write_record(&record).map_err(csv_error(path))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads fields back from [`write_fields_csv`] output, grouping rows by
/// frame. The parameter layout is reconstructed from the header.
pub fn read_fields_csv(path: impl AsRef<Path>) -> Result<Vec<DisplacementField>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::BadCsvFile {
        path: path.display().to_string(),
        reason,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = reader
        .headers()
        .map_err(csv_error(path))?
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    if header.len() < 8
        || header[..6] != ["frame", "x", "y", "converged", "iterations", "residual_norm"]
    {
        return Err(bad("unexpected field csv header".into()));
    }
    let params = &header[6..];
    let k = params.len() / 2;
    // columns: u, v, then the u gradients, then the v gradients
    let u_names: Vec<&str> = std::iter::once(params[0].as_str())
        .chain(params[2..2 + (k - 1)].iter().map(|s| s.as_str()))
        .collect();
    let layout = ParamLayout::from_param_names(&u_names)
        .ok_or_else(|| bad(format!("unrecognized parameter columns {params:?}")))?;

    let mut fields: Vec<DisplacementField> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error(path))?;
        let get = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| bad(format!("short row at index {i}")))
        };
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| bad(format!("bad number {s:?}: {e}")))
        };
        let frame: usize = get(0)?
            .parse()
            .map_err(|e| bad(format!("bad frame: {e}")))?;
        let x: i64 = get(1)?.parse().map_err(|e| bad(format!("bad x: {e}")))?;
        let y: i64 = get(2)?.parse().map_err(|e| bad(format!("bad y: {e}")))?;
        let converged = get(3)? == "true";
        let iterations: usize = get(4)?
            .parse()
            .map_err(|e| bad(format!("bad iterations: {e}")))?;
        let residual_norm = parse(get(5)?)?;
        let u0 = parse(get(6)?)?;
        let v0 = parse(get(7)?)?;
        let mut u = vec![u0];
        let mut v = vec![v0];
        for i in 0..k - 1 {
            u.push(parse(get(8 + i)?)?);
        }
        for i in 0..k - 1 {
            v.push(parse(get(8 + (k - 1) + i)?)?);
        }
        let params = ParamSet::new(&layout, u, v)?;
        let point = FieldPoint {
            x,
            y,
            outcome: SolveOutcome {
                params,
                iterations,
                final_residual_norm: residual_norm,
                converged,
                failure: None,
            },
        };
        match fields.last_mut() {
            Some(f) if f.frame == frame => f.points.push(point),
            _ => fields.push(DisplacementField {
                frame,
                layout: layout.clone(),
                points: vec![point],
                plan_hash: None,
            }),
        }
    }
    Ok(fields)
}

/// Writes a plain-text run log with per-frame iteration and failure
/// statistics.
pub fn write_run_log(path: impl AsRef<Path>, fields: &[DisplacementField]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for field in fields {
        let mut iterations = 0usize;
        let mut failures: Vec<(&str, usize)> = Vec::new();
        for p in &field.points {
            iterations += p.outcome.iterations;
            if let Some(f) = p.outcome.failure {
                match failures.iter_mut().find(|(name, _)| *name == f.name()) {
                    Some((_, count)) => *count += 1,
                    None => failures.push((f.name(), 1)),
                }
            }
        }
        let n = field.points.len();
        write!(
            out,
            "frame {}: points {} converged {} ({:.1}%) mean_iterations {:.2}",
            field.frame,
            n,
            field.n_converged(),
            100.0 * field.convergence_fraction(),
            iterations as f64 / n.max(1) as f64
        )?;
        for (name, count) in failures {
            write!(out, " {name} {count}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
