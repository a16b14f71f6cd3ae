//! Nonlinear least-squares engines specialized to subset DIC.
//!
//! Three update strategies share one residual and one shape-function
//! Jacobian structure:
//!
//! * forward-additive (FA): relinearizes the deformed subset every
//!   iteration and updates `p <- p + dp`;
//! * forward-compositional (FC): same linearization point, but the update
//!   composes warp matrices, `W(p) <- W(p) W(dp)`;
//! * inverse-compositional (IC): linearizes the reference subset once, so
//!   the Jacobian and its pseudo-inverse are precomputed, and updates
//!   `W(p) <- W(p) W(dp)^-1`.
//!
//! All solves run over a symmetric temporal window of `m` frames around a
//! central frame; `m = 1` is classic two-image DIC.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::criterion::{self, CriterionKind, OptimizerFamily, SubsetSample};
use crate::error::{Error, Result};
use crate::image::{GrayImage, ImageSequence, SubsetRegion};
use crate::shapefn::{to_warp, Monomial, ParamSet, ShapeFunctionSpec, WarpMatrix};

/// Optimizer selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    ForwardAdditive,
    ForwardCompositional,
    InverseCompositional,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::ForwardAdditive => "fa",
            OptimizerKind::ForwardCompositional => "fc",
            OptimizerKind::InverseCompositional => "ic",
        }
    }
}

/// Iteration controls shared by all optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub optimizer: OptimizerKind,
    pub max_iterations: usize,
    /// Convergence threshold on the displacement components of the step,
    /// `|(du, dv)| < tol`, in pixels.
    pub convergence_tol: f64,
    /// A single step moving the subset further than this many pixels
    /// counts as divergence.
    pub divergence_guard: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            optimizer: OptimizerKind::InverseCompositional,
            max_iterations: 50,
            convergence_tol: 1e-4,
            divergence_guard: 5.0,
        }
    }
}

/// Why a subset solve stopped without converging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveFailure {
    /// Normal equations singular (untextured or degenerate subset).
    Singular,
    /// Warp-matrix update could not be inverted.
    SingularWarp,
    /// A step exceeded the divergence guard or stopped being finite.
    Diverged,
    /// The warped subset left the valid image domain.
    OutOfDomain,
    /// Subset spread fell below the flatness threshold (ZNSSD).
    FlatSubset,
    /// Initial-guess correlation peak too weak to seed a solve.
    NotFound,
}

impl SolveFailure {
    pub fn name(self) -> &'static str {
        match self {
            SolveFailure::Singular => "singular",
            SolveFailure::SingularWarp => "singular-warp",
            SolveFailure::Diverged => "diverged",
            SolveFailure::OutOfDomain => "out-of-domain",
            SolveFailure::FlatSubset => "flat-subset",
            SolveFailure::NotFound => "not-found",
        }
    }
}

/// Converged (or abandoned) state of one subset solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub params: ParamSet,
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    pub failure: Option<SolveFailure>,
}

impl SolveOutcome {
    pub(crate) fn failed(
        params: ParamSet,
        iterations: usize,
        failure: SolveFailure,
    ) -> SolveOutcome {
        SolveOutcome {
            params,
            iterations,
            final_residual_norm: f64::NAN,
            converged: false,
            failure: Some(failure),
        }
    }
}

/// Closed-form linear least-squares solution of `min |A p + b|^2`:
/// `p* = -(A^T A)^-1 A^T b`.
///
/// Errors with `Singular` when the condition number of `A` (estimated from
/// the eigenvalues of the normal matrix) exceeds 1e12.
pub fn linear_lsq_solve(design: &DMatrix<f64>, offset: &DVector<f64>) -> Result<DVector<f64>> {
    let ata = design.transpose() * design;
    let atb = design.transpose() * offset;
    let chol = checked_cholesky(&ata)?;
    Ok(-chol.solve(&atb))
}

/// Gauss-Newton increment `dp = -(J^T J)^-1 J^T r`; algebraically the
/// closed-form solution with `A = J`, `b = r`.
pub fn gauss_newton_step(jacobian: &DMatrix<f64>, residual: &DVector<f64>) -> Result<DVector<f64>> {
    linear_lsq_solve(jacobian, residual)
}

fn checked_cholesky(normal: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let eigen = normal.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for v in eigen.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    // cond(A) = sqrt of the normal-matrix eigenvalue ratio
    let cond = if lo > 0.0 {
        (hi / lo).sqrt()
    } else {
        f64::INFINITY
    };
    if !(cond <= 1e12) {
        return Err(Error::Singular { cond });
    }
    Cholesky::new(normal.clone()).ok_or(Error::Singular { cond })
}

/// Frame indices and offsets of the symmetric window around `central`.
fn window_frames(
    sequence: &ImageSequence,
    central: usize,
    spec: &ShapeFunctionSpec,
) -> Result<Vec<(usize, f64)>> {
    let half = (spec.window() - 1) / 2;
    if central < half || central + half >= sequence.len() {
        return Err(Error::WindowOutOfRange {
            central,
            window: spec.window(),
            len: sequence.len(),
        });
    }
    Ok(spec
        .frame_offsets()
        .map(|dt| ((central as i64 + dt) as usize, dt as f64))
        .collect())
}

/// Builds the reference stack: the subset of `image` at integer offsets,
/// replicated once per window frame in the shared stack ordering (pixels
/// outer, frame offsets inner, ascending).
pub fn reference_stack(
    image: &GrayImage,
    region: &SubsetRegion,
    window: usize,
) -> Result<SubsetSample> {
    region.validate_in(image)?;
    let (cx, cy) = region.center();
    let mut values = Vec::with_capacity(region.pixel_count() * window);
    for (dx, dy) in region.offsets() {
        let v = image.intensity((cx + dx) as usize, (cy + dy) as usize);
        values.extend(std::iter::repeat(v).take(window));
    }
    Ok(SubsetSample::new(values))
}

/// Precomputed inverse-compositional state: the reference-side Jacobian of
/// the stacked residual and its pseudo-inverse, both criterion-independent
/// (ZNSSD reuses them through the step scale).
#[derive(Debug, Clone)]
pub struct PrecomputedIC {
    pub jacobian: DMatrix<f64>,
    pub pseudo_inverse: DMatrix<f64>,
    pub ref_sample: SubsetSample,
    spec: ShapeFunctionSpec,
    region: SubsetRegion,
}

impl PrecomputedIC {
    pub fn spec(&self) -> &ShapeFunctionSpec {
        &self.spec
    }

    pub fn region(&self) -> &SubsetRegion {
        &self.region
    }
}

/// Builds the IC Jacobian from reference gradients and the shape-function
/// basis at every `(dx, dy, dt)` of the stack, plus its pseudo-inverse.
pub fn precompute_ic(
    ref_image: &GrayImage,
    region: &SubsetRegion,
    spec: &ShapeFunctionSpec,
    criterion: CriterionKind,
) -> Result<PrecomputedIC> {
    spec.warp_coords()?; // IC needs the compositional update
    region.validate_in(ref_image)?;
    let m = spec.window();
    let k = spec.basis_len();
    let rows = region.pixel_count() * m;
    let (cx, cy) = region.center();

    let mut values = Vec::with_capacity(rows);
    // built transposed so each sample writes one contiguous column
    let mut jt = DMatrix::zeros(2 * k, rows);
    let mut basis = vec![0.0; k];
    let mut row = 0;
    for (dx, dy) in region.offsets() {
        let x = (cx + dx) as f64;
        let y = (cy + dy) as f64;
        let (value, gx, gy) = ref_image.sample_with_gradient(x, y)?;
        for dt in spec.frame_offsets() {
            values.push(value);
            spec.layout()
                .basis_into(dx as f64, dy as f64, dt as f64, &mut basis);
            for (i, b) in basis.iter().enumerate() {
                jt[(i, row)] = gx * b;
                jt[(k + i, row)] = gy * b;
            }
            row += 1;
        }
    }

    let ref_sample = SubsetSample::new(values);
    if criterion == CriterionKind::Znssd && ref_sample.is_flat() {
        return Err(Error::FlatSubset {
            sdev: ref_sample.sdev(),
            threshold: ref_sample.flatness_threshold(),
        });
    }

    let chol = checked_cholesky(&(&jt * jt.transpose()))?;
    let pseudo_inverse = chol.solve(&jt);
    let jacobian = jt.transpose();

    Ok(PrecomputedIC {
        jacobian,
        pseudo_inverse,
        ref_sample,
        spec: spec.clone(),
        region: *region,
    })
}

/// Per-frame polynomial form of a warp: for a fixed frame offset every
/// supported shape function reduces to
/// `x~ = c[0] + c[1] dx + c[2] dy + c[3] dx^2 + c[4] dx dy + c[5] dy^2`
/// (likewise `y~`), so the inner pixel loop stays branch-free.
#[derive(Clone, Copy)]
struct FrameWarp {
    cx: [f64; 6],
    cy: [f64; 6],
}

impl FrameWarp {
    fn from_params(params: &ParamSet, dt: f64) -> FrameWarp {
        let mut cx = [0.0; 6];
        let mut cy = [0.0; 6];
        cx[1] = 1.0;
        cy[2] = 1.0;
        for (i, m) in params.layout().monomials().iter().enumerate() {
            let (u, v) = (params.u_params()[i], params.v_params()[i]);
            let slot = match m {
                Monomial::One => (0, 1.0),
                Monomial::T => (0, dt),
                Monomial::TT => (0, dt * dt),
                Monomial::X => (1, 1.0),
                Monomial::XT => (1, dt),
                Monomial::Y => (2, 1.0),
                Monomial::YT => (2, dt),
                Monomial::XX => (3, 1.0),
                Monomial::XY => (4, 1.0),
                Monomial::YY => (5, 1.0),
            };
            cx[slot.0] += u * slot.1;
            cy[slot.0] += v * slot.1;
        }
        FrameWarp { cx, cy }
    }

    fn from_warp_matrix(warp: &WarpMatrix, dt: f64) -> FrameWarp {
        let mut cx = [0.0; 6];
        let mut cy = [0.0; 6];
        let m = warp.matrix();
        for (j, coord) in warp.coords().iter().enumerate() {
            let slot = match coord {
                Monomial::One => (0, 1.0),
                Monomial::T => (0, dt),
                Monomial::X => (1, 1.0),
                Monomial::XT => (1, dt),
                Monomial::Y => (2, 1.0),
                Monomial::YT => (2, dt),
                // warp coordinates never contain second-order monomials
                _ => unreachable!("unsupported warp coordinate"),
            };
            cx[slot.0] += m[(1, j)] * slot.1;
            cy[slot.0] += m[(2, j)] * slot.1;
        }
        FrameWarp { cx, cy }
    }

    #[inline(always)]
    fn eval(&self, dx: f64, dy: f64) -> (f64, f64) {
        let wx = self.cx[0]
            + self.cx[1] * dx
            + self.cx[2] * dy
            + self.cx[3] * dx * dx
            + self.cx[4] * dx * dy
            + self.cx[5] * dy * dy;
        let wy = self.cy[0]
            + self.cy[1] * dx
            + self.cy[2] * dy
            + self.cy[3] * dx * dx
            + self.cy[4] * dx * dy
            + self.cy[5] * dy * dy;
        (wx, wy)
    }
}

/// Samples the deformed stack under per-frame warps. Returns the first
/// domain violation instead of values.
fn sample_stack_warps(
    sequence: &ImageSequence,
    frames: &[(usize, f64)],
    warps: &[FrameWarp],
    region: &SubsetRegion,
    out: &mut Vec<f64>,
) -> std::result::Result<(), SolveFailure> {
    let (cx, cy) = region.center();
    let m = frames.len();
    out.clear();
    out.resize(region.pixel_count() * m, 0.0);
    for (f, &(frame, _)) in frames.iter().enumerate() {
        let warp = &warps[f];
        let image = sequence.frame(frame);
        let mut idx = f;
        for (dx, dy) in region.offsets() {
            let (wx, wy) = warp.eval(dx as f64, dy as f64);
            match image.sample(cx as f64 + wx, cy as f64 + wy) {
                Ok(v) => out[idx] = v,
                Err(_) => return Err(SolveFailure::OutOfDomain),
            }
            idx += m;
        }
    }
    Ok(())
}

fn param_frame_warps(params: &ParamSet, frames: &[(usize, f64)]) -> Vec<FrameWarp> {
    frames
        .iter()
        .map(|&(_, dt)| FrameWarp::from_params(params, dt))
        .collect()
}

/// Monomial derivatives with respect to the local spatial offsets, used by
/// the forward-compositional chain rule.
#[inline]
fn monomial_spatial_derivative(m: Monomial, dx: f64, dy: f64, dt: f64) -> (f64, f64) {
    match m {
        Monomial::One | Monomial::T | Monomial::TT => (0.0, 0.0),
        Monomial::X => (1.0, 0.0),
        Monomial::Y => (0.0, 1.0),
        Monomial::XT => (dt, 0.0),
        Monomial::YT => (0.0, dt),
        Monomial::XX => (2.0 * dx, 0.0),
        Monomial::XY => (dy, dx),
        Monomial::YY => (0.0, 2.0 * dy),
    }
}

/// Spatial Jacobian `d(x~, y~)/d(dx, dy)` of the warp at one offset.
fn warp_spatial_jacobian(params: &ParamSet, dx: f64, dy: f64, dt: f64) -> [f64; 4] {
    let mut a = [1.0, 0.0, 0.0, 1.0];
    for (i, m) in params.layout().monomials().iter().enumerate() {
        let (ddx, ddy) = monomial_spatial_derivative(*m, dx, dy, dt);
        a[0] += params.u_params()[i] * ddx;
        a[1] += params.u_params()[i] * ddy;
        a[2] += params.v_params()[i] * ddx;
        a[3] += params.v_params()[i] * ddy;
    }
    a
}

struct ForwardScratch {
    values: Vec<f64>,
    /// Jacobian stored transposed, `2k x rows`.
    jt: DMatrix<f64>,
    residual: Vec<f64>,
    basis: Vec<f64>,
}

/// One forward linearization pass: samples the stack, evaluates deformed
/// gradients at the warped locations, and fills the Jacobian rows
/// `[gx * basis | gy * basis]` (times the warp's spatial Jacobian for the
/// compositional variant, which is constant per frame for warp-capable
/// shape functions).
fn forward_pass(
    sequence: &ImageSequence,
    frames: &[(usize, f64)],
    region: &SubsetRegion,
    spec: &ShapeFunctionSpec,
    params: &ParamSet,
    chain_rule: bool,
    scratch: &mut ForwardScratch,
) -> std::result::Result<(), SolveFailure> {
    let (cx, cy) = region.center();
    let k = spec.basis_len();
    let m = frames.len();
    let rows = region.pixel_count() * m;
    scratch.values.clear();
    scratch.values.resize(rows, 0.0);
    for (f, &(frame, dt)) in frames.iter().enumerate() {
        let warp = FrameWarp::from_params(params, dt);
        let chain = chain_rule.then(|| warp_spatial_jacobian(params, 0.0, 0.0, dt));
        let image = sequence.frame(frame);
        let mut idx = f;
        for (dx, dy) in region.offsets() {
            let (dxf, dyf) = (dx as f64, dy as f64);
            let (wx, wy) = warp.eval(dxf, dyf);
            let sampled = image.sample_with_gradient(cx as f64 + wx, cy as f64 + wy);
            let (value, gx, gy) = match sampled {
                Ok(v) => v,
                Err(_) => return Err(SolveFailure::OutOfDomain),
            };
            let (ex, ey) = match &chain {
                Some(a) => (gx * a[0] + gy * a[2], gx * a[1] + gy * a[3]),
                None => (gx, gy),
            };
            scratch.values[idx] = value;
            spec.layout().basis_into(dxf, dyf, dt, &mut scratch.basis);
            for (i, b) in scratch.basis.iter().enumerate() {
                scratch.jt[(i, idx)] = ex * b;
                scratch.jt[(k + i, idx)] = ey * b;
            }
            idx += m;
        }
    }
    Ok(())
}

fn residual_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Recomputes the criterion residual norm at the final parameters.
fn final_norm(
    sequence: &ImageSequence,
    frames: &[(usize, f64)],
    region: &SubsetRegion,
    ref_sample: &SubsetSample,
    criterion: CriterionKind,
    params: &ParamSet,
) -> f64 {
    let mut values = Vec::new();
    let warps = param_frame_warps(params, frames);
    if sample_stack_warps(sequence, frames, &warps, region, &mut values).is_err() {
        return f64::NAN;
    }
    let warped = SubsetSample::new(values);
    let mut r = vec![0.0; warped.len()];
    match criterion::residual_into(criterion, ref_sample, &warped, &mut r) {
        Ok(()) => residual_norm(&r),
        Err(_) => f64::NAN,
    }
}

/// Shared forward iteration (additive or compositional update).
#[allow(clippy::too_many_arguments)]
fn solve_forward(
    compositional: bool,
    ref_sample: &SubsetSample,
    sequence: &ImageSequence,
    central_frame: usize,
    region: &SubsetRegion,
    spec: &ShapeFunctionSpec,
    criterion: CriterionKind,
    init: &ParamSet,
    settings: &SolveSettings,
) -> Result<SolveOutcome> {
    let frames = window_frames(sequence, central_frame, spec)?;
    region.validate_in(sequence.frame(0))?;
    let k = spec.basis_len();
    let rows = region.pixel_count() * frames.len();
    if ref_sample.len() != rows {
        return Err(Error::LengthMismatch {
            left: ref_sample.len(),
            right: rows,
        });
    }
    if criterion == CriterionKind::Znssd && ref_sample.is_flat() {
        return Err(Error::FlatSubset {
            sdev: ref_sample.sdev(),
            threshold: ref_sample.flatness_threshold(),
        });
    }

    // Compositional updates run on the warp matrix; additive on params.
    let mut params = init.clone();
    let mut warp = if compositional {
        Some(to_warp(spec, init)?)
    } else {
        None
    };

    let mut scratch = ForwardScratch {
        values: Vec::new(),
        jt: DMatrix::zeros(2 * k, rows),
        residual: vec![0.0; rows],
        basis: vec![0.0; k],
    };

    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..settings.max_iterations {
        if let Err(f) = forward_pass(
            sequence,
            &frames,
            region,
            spec,
            &params,
            compositional,
            &mut scratch,
        ) {
            return Ok(SolveOutcome::failed(params, iterations, f));
        }
        let warped = SubsetSample::new(std::mem::take(&mut scratch.values));
        if criterion == CriterionKind::Znssd && warped.is_flat() {
            return Ok(SolveOutcome::failed(
                params,
                iterations,
                SolveFailure::FlatSubset,
            ));
        }
        criterion::residual_into(criterion, ref_sample, &warped, &mut scratch.residual)
            .expect("lengths and texture checked");
        let scale =
            criterion::step_scale(criterion, OptimizerFamily::Forward, ref_sample, &warped)
                .expect("texture checked");
        scratch.values = warped.into_values();

        // dp = +scale (J~^T J~)^-1 J~^T r with J~ the positive row builder
        // (the criterion Jacobian is -J~, the two signs cancel).
        let jtj = &scratch.jt * scratch.jt.transpose();
        let jtr = &scratch.jt * DVector::from_column_slice(&scratch.residual);
        let chol = match Cholesky::new(jtj) {
            Some(c) => c,
            None => {
                return Ok(SolveOutcome::failed(
                    params,
                    iterations,
                    SolveFailure::Singular,
                ))
            }
        };
        let delta = chol.solve(&jtr) * scale;

        let step = (delta[0] * delta[0] + delta[k] * delta[k]).sqrt();
        if !step.is_finite() || step > settings.divergence_guard {
            return Ok(SolveOutcome::failed(
                params,
                iterations,
                SolveFailure::Diverged,
            ));
        }

        let delta_params = ParamSet::new(
            spec.layout(),
            delta.as_slice()[..k].to_vec(),
            delta.as_slice()[k..].to_vec(),
        )
        .expect("layout length matches");
        if let Some(w) = warp.as_mut() {
            let dw = to_warp(spec, &delta_params)?;
            *w = w.compose(&dw)?;
            params = w.to_param_set(spec.layout());
        } else {
            params.add_assign(&delta_params)?;
        }
        iterations += 1;

        if step < settings.convergence_tol {
            converged = true;
            break;
        }
    }

    let norm = final_norm(sequence, &frames, region, ref_sample, criterion, &params);
    Ok(SolveOutcome {
        params,
        iterations,
        final_residual_norm: norm,
        converged,
        failure: None,
    })
}

/// Forward-additive Gauss-Newton: relinearizes the deformed subsets at the
/// warped locations every iteration and adds the increment to `p`. Works
/// for every shape function, including second-order ones.
#[allow(clippy::too_many_arguments)]
pub fn solve_fa(
    ref_sample: &SubsetSample,
    sequence: &ImageSequence,
    central_frame: usize,
    region: &SubsetRegion,
    spec: &ShapeFunctionSpec,
    criterion: CriterionKind,
    init: &ParamSet,
    settings: &SolveSettings,
) -> Result<SolveOutcome> {
    solve_forward(
        false,
        ref_sample,
        sequence,
        central_frame,
        region,
        spec,
        criterion,
        init,
        settings,
    )
}

/// Forward-compositional Gauss-Newton: same linearization as FA but the
/// update composes warp matrices. Requires a warp-capable shape function.
#[allow(clippy::too_many_arguments)]
pub fn solve_fc(
    ref_sample: &SubsetSample,
    sequence: &ImageSequence,
    central_frame: usize,
    region: &SubsetRegion,
    spec: &ShapeFunctionSpec,
    criterion: CriterionKind,
    init: &ParamSet,
    settings: &SolveSettings,
) -> Result<SolveOutcome> {
    solve_forward(
        true,
        ref_sample,
        sequence,
        central_frame,
        region,
        spec,
        criterion,
        init,
        settings,
    )
}

/// Inverse-compositional Gauss-Newton with the precomputed pseudo-inverse:
/// per iteration only the warped stack and one small matrix-vector product
/// are evaluated; the update is `W(p) <- W(p) W(dp)^-1` with parameters
/// read back off the `x`/`y` rows.
pub fn solve_ic(
    pre: &PrecomputedIC,
    sequence: &ImageSequence,
    central_frame: usize,
    criterion: CriterionKind,
    init: &ParamSet,
    settings: &SolveSettings,
) -> Result<SolveOutcome> {
    let spec = &pre.spec;
    let region = &pre.region;
    let frames = window_frames(sequence, central_frame, spec)?;
    region.validate_in(sequence.frame(0))?;
    let k = spec.basis_len();
    if criterion == CriterionKind::Znssd && pre.ref_sample.is_flat() {
        return Err(Error::FlatSubset {
            sdev: pre.ref_sample.sdev(),
            threshold: pre.ref_sample.flatness_threshold(),
        });
    }

    let mut warp = to_warp(spec, init)?;
    let mut params = init.clone();
    let mut values = Vec::new();
    let mut residual = vec![0.0; pre.ref_sample.len()];

    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..settings.max_iterations {
        {
            let frame_warps: Vec<FrameWarp> = frames
                .iter()
                .map(|&(_, dt)| FrameWarp::from_warp_matrix(&warp, dt))
                .collect();
            if let Err(f) = sample_stack_warps(sequence, &frames, &frame_warps, region, &mut values)
            {
                return Ok(SolveOutcome::failed(params, iterations, f));
            }
        }
        let warped = SubsetSample::new(std::mem::take(&mut values));
        if criterion == CriterionKind::Znssd && warped.is_flat() {
            return Ok(SolveOutcome::failed(
                params,
                iterations,
                SolveFailure::FlatSubset,
            ));
        }
        criterion::residual_into(criterion, &pre.ref_sample, &warped, &mut residual)
            .expect("lengths and texture checked");
        let scale = criterion::step_scale(
            criterion,
            OptimizerFamily::Inverse,
            &pre.ref_sample,
            &warped,
        )
        .expect("texture checked");
        values = warped.into_values();

        // dp = -scale * pinv(J) r  (reference-side Jacobian)
        let delta = &pre.pseudo_inverse * DVector::from_column_slice(&residual) * (-scale);

        let step = (delta[0] * delta[0] + delta[k] * delta[k]).sqrt();
        if !step.is_finite() || step > settings.divergence_guard {
            return Ok(SolveOutcome::failed(
                params,
                iterations,
                SolveFailure::Diverged,
            ));
        }

        let delta_params = ParamSet::new(
            spec.layout(),
            delta.as_slice()[..k].to_vec(),
            delta.as_slice()[k..].to_vec(),
        )
        .expect("layout length matches");
        let dw = to_warp(spec, &delta_params)?;
        let dw_inv = match dw.invert() {
            Ok(w) => w,
            Err(_) => {
                return Ok(SolveOutcome::failed(
                    params,
                    iterations,
                    SolveFailure::SingularWarp,
                ))
            }
        };
        warp = warp.compose(&dw_inv)?;
        params = warp.to_param_set(spec.layout());
        iterations += 1;

        if step < settings.convergence_tol {
            converged = true;
            break;
        }
    }

    let norm = final_norm(
        sequence,
        &frames,
        region,
        &pre.ref_sample,
        criterion,
        &params,
    );
    Ok(SolveOutcome {
        params,
        iterations,
        final_residual_norm: norm,
        converged,
        failure: None,
    })
}

/// Dispatches on `settings.optimizer`, building the IC precompute on the
/// fly when asked for; callers doing repeated solves at one reference
/// location should precompute explicitly instead.
#[allow(clippy::too_many_arguments)]
pub fn solve(
    ref_image: &GrayImage,
    sequence: &ImageSequence,
    central_frame: usize,
    region: &SubsetRegion,
    spec: &ShapeFunctionSpec,
    criterion: CriterionKind,
    init: &ParamSet,
    settings: &SolveSettings,
) -> Result<SolveOutcome> {
    match settings.optimizer {
        OptimizerKind::InverseCompositional => {
            let pre = precompute_ic(ref_image, region, spec, criterion)?;
            solve_ic(&pre, sequence, central_frame, criterion, init, settings)
        }
        _ => {
            let ref_sample = reference_stack(ref_image, region, spec.window())?;
            solve_forward(
                settings.optimizer == OptimizerKind::ForwardCompositional,
                &ref_sample,
                sequence,
                central_frame,
                region,
                spec,
                criterion,
                init,
                settings,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{
        fourier_shift, make_speckle, render_sequence, MotionKind, MotionProgram, NoiseSpec,
    };
    use approx::assert_relative_eq;

    fn spec(s: u8, t: u8, cross: bool, window: usize) -> ShapeFunctionSpec {
        ShapeFunctionSpec::new(s, t, cross, cross, window).unwrap()
    }

    fn single_frame(img: &GrayImage) -> ImageSequence {
        ImageSequence::new(vec![img.clone()], 1.0).unwrap()
    }

    #[test]
    fn linear_lsq_identity_system() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_column_slice(&[-3.0, 4.0]);
        let p = linear_lsq_solve(&a, &b).unwrap();
        assert_relative_eq!(p[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], -4.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_lsq_overdetermined_mean() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 1.0]);
        let b = DVector::from_column_slice(&[-1.0, -2.0, -3.0]);
        let p = linear_lsq_solve(&a, &b).unwrap();
        assert_relative_eq!(p[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_lsq_residual_orthogonality() {
        let a = DMatrix::from_fn(20, 4, |i, j| ((i * 7 + j * 13 + 3) % 17) as f64 - 8.0);
        let b = DVector::from_fn(20, |i, _| ((i * 11 + 5) % 23) as f64 - 11.0);
        let p = linear_lsq_solve(&a, &b).unwrap();
        let grad = a.transpose() * (&a * &p + &b);
        assert!(grad.norm() < 1e-8 * b.norm().max(1.0));
    }

    #[test]
    fn linear_lsq_detects_singularity() {
        // two proportional columns
        let a = DMatrix::from_fn(10, 2, |i, j| (i as f64 + 1.0) * (j as f64 + 1.0));
        let b = DVector::from_element(10, 1.0);
        assert!(matches!(
            linear_lsq_solve(&a, &b),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn gauss_newton_zero_residual_gives_zero_step() {
        let j = DMatrix::from_fn(8, 3, |i, c| ((i + 2 * c + 1) % 5) as f64 - 2.0);
        let r = DVector::zeros(8);
        let dp = gauss_newton_step(&j, &r).unwrap();
        assert!(dp.norm() < 1e-14);
    }

    #[test]
    fn gauss_newton_one_step_on_linear_residual() {
        // r(p) = A p + b from any p0: one step lands on the closed form
        let a = DMatrix::from_fn(12, 3, |i, j| (((i + 1) * (j + 2)) % 7) as f64 - 3.0);
        let b = DVector::from_fn(12, |i, _| ((i * 5 + 1) % 9) as f64 - 4.0);
        let optimum = linear_lsq_solve(&a, &b).unwrap();
        let p0 = DVector::from_column_slice(&[10.0, -3.0, 0.5]);
        let r0 = &a * &p0 + &b;
        let step = gauss_newton_step(&a, &r0).unwrap();
        let p1 = &p0 + &step;
        assert!((p1 - optimum).norm() < 1e-9);
    }

    #[test]
    fn fa_zero_deformation_converges_immediately() {
        let img = make_speckle(96, 96, 100, 2.5, 0.02);
        let seq = single_frame(&img);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let ref_sample = reference_stack(&img, &region, 1).unwrap();
        let out = solve_fa(
            &ref_sample,
            &seq,
            0,
            &region,
            &sf,
            CriterionKind::Znssd,
            &ParamSet::zero(sf.layout()),
            &SolveSettings::default(),
        )
        .unwrap();
        assert!(out.converged, "{out:?}");
        assert!(out.iterations <= 2);
        let (u, v) = out.params.displacement();
        assert!(u.abs() < 1e-6 && v.abs() < 1e-6);
    }

    #[test]
    fn fa_recovers_quarter_pixel_translation() {
        let img = make_speckle(96, 96, 101, 2.5, 0.02);
        let shifted = fourier_shift(&img, 0.25, 0.0);
        let seq = single_frame(&shifted);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let ref_sample = reference_stack(&img, &region, 1).unwrap();
        let out = solve_fa(
            &ref_sample,
            &seq,
            0,
            &region,
            &sf,
            CriterionKind::Znssd,
            &ParamSet::zero(sf.layout()),
            &SolveSettings::default(),
        )
        .unwrap();
        assert!(out.converged);
        let (u, v) = out.params.displacement();
        assert!((u - 0.25).abs() < 0.01, "u = {u}");
        assert!(v.abs() < 0.01, "v = {v}");
    }

    #[test]
    fn fa_recovers_constant_velocity() {
        let img = make_speckle(96, 96, 102, 2.5, 0.02);
        let program = MotionProgram {
            kind: MotionKind::ConstantVelocity {
                u_rate: 0.1,
                v_rate: 0.0,
            },
            frame_count: 4,
            frame_interval: 1.0,
        };
        let (seq, _) = render_sequence(&img, &program, &NoiseSpec::none(0)).unwrap();
        let sf = spec(1, 1, false, 5);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let ref_sample = reference_stack(&img, &region, 5).unwrap();
        let out = solve_fa(
            &ref_sample,
            &seq,
            2,
            &region,
            &sf,
            CriterionKind::Znssd,
            &ParamSet::zero(sf.layout()),
            &SolveSettings {
                optimizer: OptimizerKind::ForwardAdditive,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.converged, "{out:?}");
        let ut = out.params.u_coeff(Monomial::T);
        let u = out.params.u_coeff(Monomial::One);
        assert!((u - 0.2).abs() < 0.005, "u = {u}");
        assert!((ut - 0.1).abs() < 0.005, "ut = {ut}");
    }

    #[test]
    fn fc_agrees_with_fa() {
        let img = make_speckle(96, 96, 103, 2.5, 0.02);
        let shifted = fourier_shift(&img, 0.31, -0.62);
        let seq = single_frame(&shifted);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let ref_sample = reference_stack(&img, &region, 1).unwrap();
        let init = ParamSet::zero(sf.layout());
        let settings = SolveSettings::default();
        let fa = solve_fa(
            &ref_sample,
            &seq,
            0,
            &region,
            &sf,
            CriterionKind::Znssd,
            &init,
            &settings,
        )
        .unwrap();
        let fc = solve_fc(
            &ref_sample,
            &seq,
            0,
            &region,
            &sf,
            CriterionKind::Znssd,
            &init,
            &settings,
        )
        .unwrap();
        assert!(fa.converged && fc.converged);
        let (ua, va) = fa.params.displacement();
        let (uc, vc) = fc.params.displacement();
        assert!((ua - uc).abs() < 1e-4 && (va - vc).abs() < 1e-4);
    }

    #[test]
    fn precompute_rejects_constant_reference() {
        let img = GrayImage::constant(64, 64, 100.0).unwrap();
        let region = SubsetRegion::new(32, 32, 10).unwrap();
        let sf = spec(1, 0, false, 1);
        let err = precompute_ic(&img, &region, &sf, CriterionKind::Ssd).unwrap_err();
        assert!(matches!(
            err,
            Error::Singular { .. } | Error::FlatSubset { .. }
        ));
    }

    #[test]
    fn ic_jacobian_rows_follow_gradient_basis_structure() {
        let img = make_speckle(96, 96, 104, 2.5, 0.02);
        let region = SubsetRegion::new(40, 52, 5).unwrap();
        let sf = spec(1, 0, false, 1);
        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
        let (cx, cy) = region.center();
        for (row, (dx, dy)) in region.offsets().enumerate() {
            let (gx, gy) = img.gradient((cx + dx) as f64, (cy + dy) as f64).unwrap();
            let expect = [
                gx,
                gx * dx as f64,
                gx * dy as f64,
                gy,
                gy * dx as f64,
                gy * dy as f64,
            ];
            for (col, e) in expect.iter().enumerate() {
                assert_relative_eq!(pre.jacobian[(row, col)], *e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ic_pseudo_inverse_is_left_inverse() {
        let img = make_speckle(96, 96, 105, 2.5, 0.02);
        let region = SubsetRegion::new(48, 48, 10).unwrap();
        let sf = spec(1, 1, true, 5);
        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
        let prod = &pre.pseudo_inverse * &pre.jacobian;
        let k2 = 2 * sf.basis_len();
        for r in 0..k2 {
            for c in 0..k2 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!(
                    (prod[(r, c)] - expect).abs() < 1e-8,
                    "pinv*J at ({r}, {c}) = {}",
                    prod[(r, c)]
                );
            }
        }
    }

    #[test]
    fn ic_jacobian_matches_residual_finite_difference() {
        // IC residual r(dp) = F(W(dp) X) - G(W(p) X); at dp = 0 its
        // derivative with respect to dp must equal the precomputed rows.
        let img = make_speckle(96, 96, 106, 2.5, 0.02);
        let region = SubsetRegion::new(48, 48, 7).unwrap();
        for sf in [
            spec(1, 0, false, 1),
            spec(1, 1, false, 3),
            spec(1, 1, true, 3),
        ] {
            let pre = precompute_ic(&img, &region, &sf, CriterionKind::Ssd).unwrap();
            let k = sf.basis_len();
            let (cx, cy) = region.center();
            let h = 1e-3;
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for col in 0..2 * k {
                let mut u = vec![0.0; k];
                let mut v = vec![0.0; k];
                if col < k {
                    u[col] = h;
                } else {
                    v[col - k] = h;
                }
                let plus = ParamSet::new(sf.layout(), u.clone(), v.clone()).unwrap();
                for x in u.iter_mut().chain(v.iter_mut()) {
                    *x = -*x;
                }
                let minus = ParamSet::new(sf.layout(), u, v).unwrap();
                let mut row = 0;
                for (dx, dy) in region.offsets() {
                    for dt in sf.frame_offsets() {
                        let (pxo, pyo) = plus.warp_point(dx as f64, dy as f64, dt as f64);
                        let (mxo, myo) = minus.warp_point(dx as f64, dy as f64, dt as f64);
                        let fp = img.sample(cx as f64 + pxo, cy as f64 + pyo).unwrap();
                        let fm = img.sample(cx as f64 + mxo, cy as f64 + myo).unwrap();
                        let fd = (fp - fm) / (2.0 * h);
                        let a = pre.jacobian[(row, col)];
                        num += (a - fd) * (a - fd);
                        den += a * a;
                        row += 1;
                    }
                }
                assert_eq!(row, region.pixel_count() * sf.window());
            }
            let rel = (num / den).sqrt();
            assert!(rel < 1e-4, "window {}: rel err {rel}", sf.window());
        }
    }

    #[test]
    fn ic_zero_deformation_converges_immediately() {
        let img = make_speckle(96, 96, 107, 2.5, 0.02);
        let seq = single_frame(&img);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
        let out = solve_ic(
            &pre,
            &seq,
            0,
            CriterionKind::Znssd,
            &ParamSet::zero(sf.layout()),
            &SolveSettings::default(),
        )
        .unwrap();
        assert!(out.converged && out.iterations <= 2, "{out:?}");
        let (u, v) = out.params.displacement();
        assert!(u.abs() < 1e-6 && v.abs() < 1e-6);
    }

    #[test]
    fn ic_agrees_with_fa_on_translation() {
        let img = make_speckle(96, 96, 108, 2.5, 0.02);
        let shifted = fourier_shift(&img, 0.25, 0.4);
        let seq = single_frame(&shifted);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let init = ParamSet::zero(sf.layout());
        let settings = SolveSettings::default();
        let ref_sample = reference_stack(&img, &region, 1).unwrap();
        let fa = solve_fa(
            &ref_sample,
            &seq,
            0,
            &region,
            &sf,
            CriterionKind::Znssd,
            &init,
            &settings,
        )
        .unwrap();
        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
        let ic = solve_ic(&pre, &seq, 0, CriterionKind::Znssd, &init, &settings).unwrap();
        assert!(fa.converged && ic.converged);
        let (ua, va) = fa.params.displacement();
        let (ui, vi) = ic.params.displacement();
        assert!((ua - 0.25).abs() < 0.01);
        assert!(
            (ua - ui).abs() < 1e-4 && (va - vi).abs() < 1e-4,
            "fa ({ua}, {va}) ic ({ui}, {vi})"
        );
    }

    #[test]
    fn ic_recovers_uniform_strain_rate() {
        // Window frames strained by e(dt) = 0.001 dt around the central
        // frame; the velocity-and-strain-rate configuration must recover
        // u_xt = 0.001.
        let img = make_speckle(128, 128, 109, 2.5, 0.02);
        let mut frames = Vec::new();
        for dt in -2i64..=2 {
            let e = 1e-3 * dt as f64;
            if e == 0.0 {
                frames.push(img.clone());
            } else {
                // backward warp of the x axis about the subset center
                let mut pixels = Vec::with_capacity(128 * 128);
                let (x0, x1, y0, y1) = img.domain();
                for y in 0..128 {
                    for x in 0..128 {
                        let sx = (64.0 + (x as f64 - 64.0) / (1.0 + e)).clamp(x0, x1);
                        let sy = (y as f64).clamp(y0, y1);
                        pixels.push(img.sample(sx, sy).unwrap());
                    }
                }
                frames.push(GrayImage::from_pixels(128, 128, pixels).unwrap());
            }
        }
        let seq = ImageSequence::new(frames, 1.0).unwrap();
        let sf = spec(1, 1, true, 5);
        let region = SubsetRegion::new(64, 64, 15).unwrap();
        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
        let out = solve_ic(
            &pre,
            &seq,
            2,
            CriterionKind::Znssd,
            &ParamSet::zero(sf.layout()),
            &SolveSettings::default(),
        )
        .unwrap();
        assert!(out.converged, "{out:?}");
        let uxt = out.params.u_coeff(Monomial::XT);
        assert!((uxt - 1e-3).abs() < 1e-4, "uxt = {uxt}");
    }

    #[test]
    fn znssd_shortcut_matches_direct_jacobian_path() {
        // Direct path: scale the Jacobian by 1/dF and iterate without the
        // step factor. Both must land on the same parameters.
        let img = make_speckle(96, 96, 110, 2.5, 0.02);
        let shifted = fourier_shift(&img, -0.3, 0.15);
        // affine intensity change exercises the normalization
        let mapped = GrayImage::from_pixels(
            96,
            96,
            shifted.pixels().iter().map(|v| 1.3 * v + 11.0).collect(),
        )
        .unwrap();
        let seq = single_frame(&mapped);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 12).unwrap();
        let settings = SolveSettings::default();
        let init = ParamSet::zero(sf.layout());

        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
        let shortcut = solve_ic(&pre, &seq, 0, CriterionKind::Znssd, &init, &settings).unwrap();

        // direct ZNSSD-Jacobian iteration
        let df = pre.ref_sample.sdev();
        let scaled_pinv = &pre.pseudo_inverse * df;
        let mut warp = to_warp(&sf, &init).unwrap();
        let frames = vec![(0usize, 0.0f64)];
        let mut values = Vec::new();
        let mut residual = vec![0.0; pre.ref_sample.len()];
        let k = sf.basis_len();
        let mut params = init.clone();
        for _ in 0..settings.max_iterations {
            let frame_warps: Vec<FrameWarp> = frames
                .iter()
                .map(|&(_, dt)| FrameWarp::from_warp_matrix(&warp, dt))
                .collect();
            sample_stack_warps(&seq, &frames, &frame_warps, &region, &mut values).unwrap();
            let warped = SubsetSample::new(std::mem::take(&mut values));
            criterion::residual_into(
                CriterionKind::Znssd,
                &pre.ref_sample,
                &warped,
                &mut residual,
            )
            .unwrap();
            values = warped.into_values();
            let delta = &scaled_pinv * DVector::from_column_slice(&residual) * (-1.0);
            let step = (delta[0] * delta[0] + delta[k] * delta[k]).sqrt();
            let dp = ParamSet::new(
                sf.layout(),
                delta.as_slice()[..k].to_vec(),
                delta.as_slice()[k..].to_vec(),
            )
            .unwrap();
            warp = warp
                .compose(&to_warp(&sf, &dp).unwrap().invert().unwrap())
                .unwrap();
            params = warp.to_param_set(sf.layout());
            if step < settings.convergence_tol {
                break;
            }
        }

        let (us, vs) = shortcut.params.displacement();
        let (ud, vd) = params.displacement();
        assert!(
            (us - ud).abs() < 1e-8 && (vs - vd).abs() < 1e-8,
            "shortcut ({us}, {vs}) vs direct ({ud}, {vd})"
        );
    }

    #[test]
    fn ssd_and_znssd_agree_without_intensity_change() {
        // The two fixed points are not bit-identical even without noise:
        // the warped resampling residual is nonzero and the normalization
        // weights it differently. The measured offset sits near 2e-6 px;
        // assert the 1e-5 px equivalence level.
        let img = make_speckle(96, 96, 111, 2.5, 0.02);
        let shifted = fourier_shift(&img, 0.42, -0.17);
        let seq = single_frame(&shifted);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let init = ParamSet::zero(sf.layout());
        // drive both solves all the way to their fixed points
        let settings = SolveSettings {
            convergence_tol: 1e-10,
            max_iterations: 200,
            ..Default::default()
        };
        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Ssd).unwrap();
        let a = solve_ic(&pre, &seq, 0, CriterionKind::Ssd, &init, &settings).unwrap();
        let b = solve_ic(&pre, &seq, 0, CriterionKind::Znssd, &init, &settings).unwrap();
        assert!(a.converged && b.converged);
        let (ua, va) = a.params.displacement();
        let (ub, vb) = b.params.displacement();
        assert!((ua - ub).abs() < 1e-5 && (va - vb).abs() < 1e-5);
    }

    #[test]
    fn residual_norm_never_increases_on_convergence() {
        let img = make_speckle(96, 96, 112, 2.5, 0.02);
        for (idx, (dx, dy)) in [(0.5, 0.0), (-0.3, 0.7), (1.2, -0.9)].iter().enumerate() {
            let seq = single_frame(&fourier_shift(&img, *dx, *dy));
            let sf = spec(1, 0, false, 1);
            let region = SubsetRegion::new(48, 48, 15).unwrap();
            let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
            let init = ParamSet::zero(sf.layout());
            let out = solve_ic(
                &pre,
                &seq,
                0,
                CriterionKind::Znssd,
                &init,
                &SolveSettings::default(),
            )
            .unwrap();
            assert!(out.converged, "case {idx}");
            let initial = final_norm(
                &seq,
                &[(0, 0.0)],
                &region,
                &pre.ref_sample,
                CriterionKind::Znssd,
                &init,
            );
            assert!(
                out.final_residual_norm <= initial + 1e-12,
                "case {idx}: {} vs {initial}",
                out.final_residual_norm
            );
        }
    }

    #[test]
    fn window_bounds_are_enforced() {
        let img = make_speckle(96, 96, 113, 2.5, 0.02);
        let seq = ImageSequence::new(vec![img.clone(); 4], 1.0).unwrap();
        let sf = spec(1, 1, false, 5);
        let region = SubsetRegion::new(48, 48, 10).unwrap();
        let ref_sample = reference_stack(&img, &region, 5).unwrap();
        let err = solve_fa(
            &ref_sample,
            &seq,
            1,
            &region,
            &sf,
            CriterionKind::Znssd,
            &ParamSet::zero(sf.layout()),
            &SolveSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::WindowOutOfRange { .. }));
    }

    #[test]
    fn runaway_initial_guess_is_flagged_not_raised() {
        let img = make_speckle(96, 96, 114, 2.5, 0.02);
        let seq = single_frame(&img);
        let sf = spec(1, 0, false, 1);
        let region = SubsetRegion::new(48, 48, 15).unwrap();
        let pre = precompute_ic(&img, &region, &sf, CriterionKind::Znssd).unwrap();
        let mut init = ParamSet::zero(sf.layout());
        init.set_u_coeff(Monomial::One, 25.0);
        let out = solve_ic(
            &pre,
            &seq,
            0,
            CriterionKind::Znssd,
            &init,
            &SolveSettings::default(),
        )
        .unwrap();
        assert!(!out.converged);
        assert!(out.failure.is_some());
    }
}
