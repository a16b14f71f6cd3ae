//! Unified spatial-temporal shape functions.
//!
//! A shape function is a Taylor polynomial mapping subset-local coordinates
//! `(dx, dy, dt)` to the deformed position. Every piece of the pipeline
//! (residuals, Jacobians, warps, CSV columns) reads parameters in one fixed
//! monomial order, so the basis built here is the single source of truth
//! for "which parameter is which".

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One Taylor monomial in the subset-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Monomial {
    /// Constant term, always active.
    One,
    X,
    Y,
    T,
    XT,
    YT,
    XX,
    XY,
    YY,
    TT,
}

/// Canonical ordering of all supported monomials. Shape functions use the
/// subsequence of this list that their orders activate; the ordering never
/// changes.
pub const MONOMIAL_ORDER: [Monomial; 10] = [
    Monomial::One,
    Monomial::X,
    Monomial::Y,
    Monomial::T,
    Monomial::XT,
    Monomial::YT,
    Monomial::XX,
    Monomial::XY,
    Monomial::YY,
    Monomial::TT,
];

impl Monomial {
    /// Evaluates the monomial at a local offset.
    #[inline]
    pub fn eval(self, dx: f64, dy: f64, dt: f64) -> f64 {
        match self {
            Monomial::One => 1.0,
            Monomial::X => dx,
            Monomial::Y => dy,
            Monomial::T => dt,
            Monomial::XT => dx * dt,
            Monomial::YT => dy * dt,
            Monomial::XX => dx * dx,
            Monomial::XY => dx * dy,
            Monomial::YY => dy * dy,
            Monomial::TT => dt * dt,
        }
    }

    /// Suffix used for parameter column names (`u` + suffix, `v` + suffix).
    pub fn suffix(self) -> &'static str {
        match self {
            Monomial::One => "",
            Monomial::X => "x",
            Monomial::Y => "y",
            Monomial::T => "t",
            Monomial::XT => "xt",
            Monomial::YT => "yt",
            Monomial::XX => "xx",
            Monomial::XY => "xy",
            Monomial::YY => "yy",
            Monomial::TT => "tt",
        }
    }

    fn from_suffix(s: &str) -> Option<Monomial> {
        MONOMIAL_ORDER.iter().copied().find(|m| m.suffix() == s)
    }
}

/// Ordered set of active monomials: the layout of a parameter vector.
///
/// Two parameter sets are interchangeable exactly when their layouts are
/// equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    monomials: Vec<Monomial>,
}

impl ParamLayout {
    /// Builds a layout from a monomial subset, reordering it into the
    /// canonical order and deduplicating. The constant term is always
    /// included.
    pub fn from_monomials(active: &[Monomial]) -> ParamLayout {
        let monomials = MONOMIAL_ORDER
            .iter()
            .copied()
            .filter(|m| *m == Monomial::One || active.contains(m))
            .collect();
        ParamLayout { monomials }
    }

    /// Reconstructs a layout from parameter column names such as
    /// `["u", "ux", "uy", "ut"]`. Returns `None` on an unknown name.
    pub fn from_param_names(names: &[&str]) -> Option<ParamLayout> {
        let mut active = Vec::new();
        for name in names {
            let suffix = name.strip_prefix('u')?;
            active.push(Monomial::from_suffix(suffix)?);
        }
        let layout = ParamLayout::from_monomials(&active);
        // Reject permuted or duplicated headers.
        if layout.len() != names.len() {
            return None;
        }
        Some(layout)
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// Number of active monomials `k`; the full parameter vector has `2k`
    /// entries.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constant term is always present
    }

    pub fn index_of(&self, m: Monomial) -> Option<usize> {
        self.monomials.iter().position(|x| *x == m)
    }

    pub fn contains(&self, m: Monomial) -> bool {
        self.index_of(m).is_some()
    }

    /// Evaluates the basis vector at a local offset.
    pub fn basis_at(&self, dx: f64, dy: f64, dt: f64) -> BasisVector {
        BasisVector {
            values: self.monomials.iter().map(|m| m.eval(dx, dy, dt)).collect(),
        }
    }

    /// Writes the basis values into `out` without allocating.
    #[inline]
    pub fn basis_into(&self, dx: f64, dy: f64, dt: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.monomials.len());
        for (slot, m) in out.iter_mut().zip(&self.monomials) {
            *slot = m.eval(dx, dy, dt);
        }
    }

    /// Parameter column names in CSV order: all `u*` then all `v*`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .monomials
            .iter()
            .map(|m| format!("u{}", m.suffix()))
            .collect();
        names.extend(self.monomials.iter().map(|m| format!("v{}", m.suffix())));
        names
    }
}

/// Basis vector `X_H`: the active monomials evaluated at one local offset.
/// The first entry is always the constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    pub values: Vec<f64>,
}

impl BasisVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<usize> for BasisVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Declarative choice of shape function: polynomial orders per dimension,
/// optional first-order spatial-rate cross terms, and the temporal window
/// size the solver matches against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeFunctionSpec {
    spatial_order: u8,
    temporal_order: u8,
    cross_xt: bool,
    cross_yt: bool,
    window: usize,
    layout: ParamLayout,
}

impl ShapeFunctionSpec {
    /// Builds and validates a shape-function spec.
    ///
    /// `window` is the odd number of frames `m` matched simultaneously;
    /// `m = 1` means purely spatial. Temporal terms require `m >= 3`.
    pub fn new(
        spatial_order: u8,
        temporal_order: u8,
        cross_xt: bool,
        cross_yt: bool,
        window: usize,
    ) -> Result<ShapeFunctionSpec> {
        if spatial_order > 2 || temporal_order > 2 {
            return Err(Error::InvalidSpec {
                reason: format!(
                    "orders above 2 are not supported (got spatial {spatial_order}, temporal {temporal_order})"
                ),
            });
        }
        if window == 0 || window % 2 == 0 {
            return Err(Error::InvalidSpec {
                reason: format!("window must be odd and >= 1 (got {window})"),
            });
        }
        let temporal_terms = temporal_order >= 1 || cross_xt || cross_yt;
        if temporal_terms && window < 3 {
            return Err(Error::InvalidSpec {
                reason: format!("temporal terms need a window of at least 3 frames (got {window})"),
            });
        }

        let mut active = vec![Monomial::One];
        if spatial_order >= 1 {
            active.extend([Monomial::X, Monomial::Y]);
        }
        if temporal_order >= 1 {
            active.push(Monomial::T);
        }
        if cross_xt {
            active.push(Monomial::XT);
        }
        if cross_yt {
            active.push(Monomial::YT);
        }
        if spatial_order >= 2 {
            active.extend([Monomial::XX, Monomial::XY, Monomial::YY]);
        }
        if temporal_order >= 2 {
            active.push(Monomial::TT);
        }

        Ok(ShapeFunctionSpec {
            spatial_order,
            temporal_order,
            cross_xt,
            cross_yt,
            window,
            layout: ParamLayout::from_monomials(&active),
        })
    }

    /// Purely spatial shape function of the given order (`m = 1`).
    pub fn spatial(order: u8) -> Result<ShapeFunctionSpec> {
        ShapeFunctionSpec::new(order, 0, false, false, 1)
    }

    pub fn spatial_order(&self) -> u8 {
        self.spatial_order
    }

    pub fn temporal_order(&self) -> u8 {
        self.temporal_order
    }

    pub fn cross_terms(&self) -> (bool, bool) {
        (self.cross_xt, self.cross_yt)
    }

    /// Temporal window size `m` (odd; 1 = spatial only).
    pub fn window(&self) -> usize {
        self.window
    }

    /// Frame offsets matched by this spec: `-(m-1)/2 ..= (m-1)/2`.
    pub fn frame_offsets(&self) -> impl Iterator<Item = i64> {
        let half = (self.window as i64 - 1) / 2;
        -half..=half
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Number of active monomials `k`.
    pub fn basis_len(&self) -> usize {
        self.layout.len()
    }

    /// Evaluates the basis vector `X_H` at a local offset.
    pub fn basis_at(&self, dx: f64, dy: f64, dt: f64) -> BasisVector {
        debug_assert!(2 * dt.abs() as usize <= self.window.saturating_sub(1) + 1);
        self.layout.basis_at(dx, dy, dt)
    }

    /// Whether the spec embeds into a homogeneous warp matrix, enabling the
    /// compositional optimizers.
    ///
    /// First-order spatial and temporal terms embed exactly. The `xt`/`yt`
    /// cross terms embed via the truncated expansion only when both are
    /// present together with the `t` term; any second-order term has no
    /// finite-dimensional warp group and routes to the forward-additive
    /// solver instead.
    pub fn is_warp_capable(&self) -> bool {
        if self.spatial_order > 1 || self.temporal_order > 1 {
            return false;
        }
        match (self.cross_xt, self.cross_yt) {
            (false, false) => true,
            (true, true) => self.temporal_order == 1,
            _ => false,
        }
    }

    fn warp_unsupported_reason(&self) -> String {
        if self.spatial_order > 1 || self.temporal_order > 1 {
            "second-order terms have no exact warp group; use the forward-additive optimizer"
                .to_string()
        } else if self.cross_xt != self.cross_yt {
            "cross terms must be enabled in pairs (xt with yt) to stay closed under composition"
                .to_string()
        } else {
            "cross terms without a first-order t term do not stay closed under composition"
                .to_string()
        }
    }

    /// Monomials of the homogeneous warp coordinate vector. This always
    /// contains `1, x, y` (positions must be tracked even when the spatial
    /// order is 0) plus the temporal monomials the spec activates.
    pub fn warp_coords(&self) -> Result<Vec<Monomial>> {
        if !self.is_warp_capable() {
            return Err(Error::UnsupportedSpec {
                reason: self.warp_unsupported_reason(),
            });
        }
        let mut coords = vec![Monomial::One, Monomial::X, Monomial::Y];
        if self.temporal_order >= 1 {
            coords.push(Monomial::T);
        }
        if self.cross_xt {
            coords.extend([Monomial::XT, Monomial::YT]);
        }
        Ok(coords)
    }
}

/// The parameter pair `(u-row, v-row)` of a shape function, one scalar per
/// active monomial. `zero` is the identity deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    layout: ParamLayout,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl ParamSet {
    pub fn zero(layout: &ParamLayout) -> ParamSet {
        ParamSet {
            layout: layout.clone(),
            u: vec![0.0; layout.len()],
            v: vec![0.0; layout.len()],
        }
    }

    pub fn new(layout: &ParamLayout, u: Vec<f64>, v: Vec<f64>) -> Result<ParamSet> {
        if u.len() != layout.len() || v.len() != layout.len() {
            return Err(Error::LengthMismatch {
                left: u.len().max(v.len()),
                right: layout.len(),
            });
        }
        Ok(ParamSet {
            layout: layout.clone(),
            u,
            v,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn u_params(&self) -> &[f64] {
        &self.u
    }

    pub fn v_params(&self) -> &[f64] {
        &self.v
    }

    /// The displacement components `(u, v)`.
    pub fn displacement(&self) -> (f64, f64) {
        (self.u[0], self.v[0])
    }

    /// Returns the `u`-row coefficient of a monomial, or 0 if inactive.
    pub fn u_coeff(&self, m: Monomial) -> f64 {
        self.layout.index_of(m).map_or(0.0, |i| self.u[i])
    }

    /// Returns the `v`-row coefficient of a monomial, or 0 if inactive.
    pub fn v_coeff(&self, m: Monomial) -> f64 {
        self.layout.index_of(m).map_or(0.0, |i| self.v[i])
    }

    pub fn set_u_coeff(&mut self, m: Monomial, value: f64) {
        if let Some(i) = self.layout.index_of(m) {
            self.u[i] = value;
        }
    }

    pub fn set_v_coeff(&mut self, m: Monomial, value: f64) {
        if let Some(i) = self.layout.index_of(m) {
            self.v[i] = value;
        }
    }

    /// Adds an increment in place (forward-additive update).
    pub fn add_assign(&mut self, delta: &ParamSet) -> Result<()> {
        if delta.layout != self.layout {
            return Err(Error::LengthMismatch {
                left: self.layout.len(),
                right: delta.layout.len(),
            });
        }
        for (a, b) in self.u.iter_mut().zip(&delta.u) {
            *a += b;
        }
        for (a, b) in self.v.iter_mut().zip(&delta.v) {
            *a += b;
        }
        Ok(())
    }

    /// Maps a local offset through the shape function:
    /// `x~ = dx + u . X_H`, `y~ = dy + v . X_H`.
    #[inline]
    pub fn warp_point(&self, dx: f64, dy: f64, dt: f64) -> (f64, f64) {
        let mut wx = dx;
        let mut wy = dy;
        for (i, m) in self.layout.monomials().iter().enumerate() {
            let b = m.eval(dx, dy, dt);
            wx += self.u[i] * b;
            wy += self.v[i] * b;
        }
        (wx, wy)
    }
}

/// Shape-function Jacobian `d(x~, y~)/dp` at one local offset: the
/// block-diagonal `[X_H^T, 0; 0, X_H^T]`, independent of the parameters.
pub fn shape_jacobian(layout: &ParamLayout, dx: f64, dy: f64, dt: f64) -> DMatrix<f64> {
    let k = layout.len();
    let basis = layout.basis_at(dx, dy, dt);
    let mut jac = DMatrix::zeros(2, 2 * k);
    for i in 0..k {
        jac[(0, i)] = basis[i];
        jac[(1, k + i)] = basis[i];
    }
    jac
}

/// Homogeneous warp matrix acting on the coordinate vector named by
/// `coords` (a prefix-closed subset of the canonical monomials, e.g.
/// `[1, x, y, t, xt, yt]`).
///
/// Structural rows are maintained exactly: the constant row is
/// `[1, 0, ...]`, the `t` row is a unit row (time is never warped), and the
/// `xt`/`yt` rows repeat the translation/gradient pattern of the `x`/`y`
/// rows, which keeps the truncated warps closed under composition and
/// inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpMatrix {
    coords: Vec<Monomial>,
    mat: DMatrix<f64>,
}

impl WarpMatrix {
    pub fn identity(coords: Vec<Monomial>) -> WarpMatrix {
        let n = coords.len();
        WarpMatrix {
            coords,
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn coords(&self) -> &[Monomial] {
        &self.coords
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn col_of(&self, m: Monomial) -> Option<usize> {
        self.coords.iter().position(|c| *c == m)
    }

    /// Builds `W(p)` for a warp-capable spec.
    pub fn from_params(spec: &ShapeFunctionSpec, params: &ParamSet) -> Result<WarpMatrix> {
        let coords = spec.warp_coords()?;
        let n = coords.len();
        let mut mat = DMatrix::identity(n, n);
        // Rows 1 and 2 hold the full parameter rows; inactive monomials of
        // the spec simply stay zero.
        for (j, m) in coords.iter().enumerate() {
            mat[(1, j)] += params.u_coeff(*m);
            mat[(2, j)] += params.v_coeff(*m);
        }
        let mut warp = WarpMatrix { coords, mat };
        warp.restore_structure();
        Ok(warp)
    }

    /// Rewrites the structural rows exactly from the `x`/`y` rows, clearing
    /// any numerical fuzz introduced by matrix products or inversion.
    fn restore_structure(&mut self) {
        let n = self.dim();
        for j in 0..n {
            self.mat[(0, j)] = if j == 0 { 1.0 } else { 0.0 };
        }
        if let Some(t) = self.col_of(Monomial::T) {
            for j in 0..n {
                self.mat[(t, j)] = if j == t { 1.0 } else { 0.0 };
            }
            if let (Some(xt), Some(yt)) = (self.col_of(Monomial::XT), self.col_of(Monomial::YT)) {
                // x~t = u t + (1 + u_x) xt + u_y yt, truncated at first
                // order in t; likewise for y~t.
                for (row_st, row_s) in [(xt, 1), (yt, 2)] {
                    for j in 0..n {
                        self.mat[(row_st, j)] = 0.0;
                    }
                    self.mat[(row_st, t)] = self.mat[(row_s, 0)];
                    self.mat[(row_st, xt)] = self.mat[(row_s, 1)];
                    self.mat[(row_st, yt)] = self.mat[(row_s, 2)];
                }
            }
        }
    }

    /// Reads the parameters of `layout` back off the `x`/`y` rows.
    pub fn to_param_set(&self, layout: &ParamLayout) -> ParamSet {
        let mut p = ParamSet::zero(layout);
        for (i, m) in layout.monomials().iter().enumerate() {
            if let Some(j) = self.col_of(*m) {
                let sub_x = if j == 1 { 1.0 } else { 0.0 };
                let sub_y = if j == 2 { 1.0 } else { 0.0 };
                p.u[i] = self.mat[(1, j)] - sub_x;
                p.v[i] = self.mat[(2, j)] - sub_y;
            }
        }
        p
    }

    /// Matrix product `self * rhs`, with structural rows restored.
    pub fn compose(&self, rhs: &WarpMatrix) -> Result<WarpMatrix> {
        if self.coords != rhs.coords {
            return Err(Error::LengthMismatch {
                left: self.dim(),
                right: rhs.dim(),
            });
        }
        let mut out = WarpMatrix {
            coords: self.coords.clone(),
            mat: &self.mat * &rhs.mat,
        };
        out.restore_structure();
        Ok(out)
    }

    /// Matrix inverse followed by structural re-projection.
    pub fn invert(&self) -> Result<WarpMatrix> {
        let det = self.mat.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::SingularWarp { det });
        }
        let inv = self
            .mat
            .clone()
            .try_inverse()
            .ok_or(Error::SingularWarp { det })?;
        let mut out = WarpMatrix {
            coords: self.coords.clone(),
            mat: inv,
        };
        out.restore_structure();
        Ok(out)
    }

    /// Applies the warp to the coordinate vector of a local offset and
    /// returns the warped `(x~, y~)` offsets.
    #[inline]
    pub fn warp_offset(&self, dx: f64, dy: f64, dt: f64) -> (f64, f64) {
        let mut wx = 0.0;
        let mut wy = 0.0;
        for (j, m) in self.coords.iter().enumerate() {
            let b = m.eval(dx, dy, dt);
            wx += self.mat[(1, j)] * b;
            wy += self.mat[(2, j)] * b;
        }
        (wx, wy)
    }
}

/// Builds the homogeneous warp `W(p)`; errors with `UnsupportedSpec` for
/// shape functions outside the warp group.
pub fn to_warp(spec: &ShapeFunctionSpec, params: &ParamSet) -> Result<WarpMatrix> {
    WarpMatrix::from_params(spec, params)
}
