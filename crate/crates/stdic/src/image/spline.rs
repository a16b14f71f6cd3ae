//! Bicubic B-spline interpolation with a precomputed coefficient grid.
//!
//! Coefficients are solved per line with natural end conditions (zero
//! second derivative), so constant and linear intensity fields are
//! reproduced exactly everywhere in the interior. Sampling and the
//! analytic gradient share the same coefficients, which keeps solver
//! Jacobians exactly consistent with the residuals they linearize.

/// Interpolation margin in pixels: the valid interior domain of an image is
/// the integer grid shrunk by this amount on every border.
pub const MARGIN: usize = 2;

/// Cubic B-spline kernel weights for the four taps around a sample with
/// fractional offset `t` in `[0, 1)`.
#[inline]
pub(crate) fn weights(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0,
        (4.0 - 6.0 * s * s + 3.0 * s * s * s) / 6.0,
        t * t * t / 6.0,
    ]
}

/// Derivatives of [`weights`] with respect to the sample coordinate.
#[inline]
pub(crate) fn dweights(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [
        -0.5 * s * s,
        0.5 * t * (3.0 * t - 4.0),
        0.5 * s * (4.0 - 3.0 * s),
        0.5 * t * t,
    ]
}

/// Solves the cubic B-spline interpolation system for one line of samples.
///
/// Writes `src.len() + 2` coefficients into `dst` (index shifted by one:
/// `dst[i + 1]` multiplies the basis function centered at sample `i`).
/// Natural end conditions pin `c_0 = s_0` and `c_{n-1} = s_{n-1}` and
/// extrapolate the two phantom coefficients linearly.
pub(crate) fn prefilter_line(src: &[f64], dst: &mut [f64], scratch: &mut Vec<f64>) {
    let n = src.len();
    debug_assert!(n >= 5);
    debug_assert_eq!(dst.len(), n + 2);

    let c0 = src[0];
    let cn1 = src[n - 1];

    // Tridiagonal system (1, 4, 1) for the interior coefficients
    // c_1 .. c_{n-2}, after moving the known boundary coefficients to the
    // right-hand side. Thomas algorithm, stable since the matrix is
    // strictly diagonally dominant.
    let m = n - 2;
    scratch.clear();
    scratch.resize(2 * m, 0.0);
    let (cp, dp) = scratch.split_at_mut(m);

    cp[0] = 1.0 / 4.0;
    dp[0] = (6.0 * src[1] - c0) / 4.0;
    for i in 1..m {
        let rhs = if i == m - 1 {
            6.0 * src[i + 1] - cn1
        } else {
            6.0 * src[i + 1]
        };
        let denom = 4.0 - cp[i - 1];
        cp[i] = 1.0 / denom;
        dp[i] = (rhs - dp[i - 1]) / denom;
    }
    dst[m + 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        dst[i + 2] = dp[i] - cp[i] * dst[i + 3];
    }

    dst[1] = c0;
    dst[n] = cn1;
    dst[0] = 2.0 * c0 - dst[2];
    dst[n + 1] = 2.0 * cn1 - dst[n - 1];
}

/// Builds the full 2D coefficient grid, `(height + 2) x (width + 2)`,
/// row-major. Rows are filtered first, then columns of the intermediate.
pub(crate) fn prefilter_grid(width: usize, height: usize, pixels: &[f64]) -> Vec<f64> {
    debug_assert_eq!(pixels.len(), width * height);
    let cw = width + 2;
    let ch = height + 2;
    let mut scratch = Vec::new();

    let mut rows = vec![0.0; cw * height];
    for y in 0..height {
        prefilter_line(
            &pixels[y * width..(y + 1) * width],
            &mut rows[y * cw..(y + 1) * cw],
            &mut scratch,
        );
    }

    let mut grid = vec![0.0; cw * ch];
    let mut column = vec![0.0; height];
    let mut filtered = vec![0.0; ch];
    for x in 0..cw {
        for y in 0..height {
            column[y] = rows[y * cw + x];
        }
        prefilter_line(&column, &mut filtered, &mut scratch);
        for y in 0..ch {
            grid[y * cw + x] = filtered[y];
        }
    }
    grid
}
