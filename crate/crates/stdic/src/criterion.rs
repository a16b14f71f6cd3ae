//! Correlation criteria: SSD and ZNSSD residual vectors.
//!
//! Residuals are built over the stacked spatial-temporal subset (all
//! pixels of all window frames in one vector, pixels outer, frames inner
//! by ascending frame offset). ZNSSD subtracts the subset mean and divides
//! by the grayscale spread, which cancels affine intensity changes; its
//! Gauss-Newton step reuses the SSD Jacobian scaled by a single factor
//! ([`step_scale`]), so the expensive pseudo-inverse never depends on the
//! criterion.

use crate::error::{Error, Result};

/// Intensity sample of one subset stack with cached statistics.
///
/// `sdev` is the root sum of squared deviations (no `1/n` normalization);
/// the normalized residual `(v - mean) / sdev` then has unit Euclidean
/// norm, which is the convention the step factors assume.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSample {
    values: Vec<f64>,
    mean: f64,
    sdev: f64,
}

impl SubsetSample {
    pub fn new(values: Vec<f64>) -> SubsetSample {
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        let sumsq = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        SubsetSample {
            values,
            mean,
            sdev: sumsq.sqrt(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Root sum of squared deviations from the mean.
    pub fn sdev(&self) -> f64 {
        self.sdev
    }

    /// Spread threshold below which a sample counts as untextured. Scales
    /// with the square root of the sample count so the per-value spread it
    /// tolerates is size-independent.
    pub fn flatness_threshold(&self) -> f64 {
        1e-6 * (self.len() as f64).sqrt()
    }

    pub fn is_flat(&self) -> bool {
        self.sdev < self.flatness_threshold()
    }

    fn require_textured(&self) -> Result<()> {
        if self.is_flat() {
            Err(Error::FlatSubset {
                sdev: self.sdev,
                threshold: self.flatness_threshold(),
            })
        } else {
            Ok(())
        }
    }

    /// Recovers the value buffer for reuse.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Correlation criterion selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionKind {
    /// Sum of squared differences of raw intensities.
    Ssd,
    /// Zero-mean normalized SSD; invariant to `G -> a G + b` with `a > 0`.
    Znssd,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Ssd => "ssd",
            CriterionKind::Znssd => "znssd",
        }
    }
}

/// Which side of the match the optimizer linearizes: forward methods
/// differentiate the deformed subset, the inverse-compositional method the
/// reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerFamily {
    Forward,
    Inverse,
}

fn check_lengths(reference: &SubsetSample, warped: &SubsetSample) -> Result<()> {
    if reference.len() != warped.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: warped.len(),
        });
    }
    Ok(())
}

/// SSD residual `F - G`, elementwise in the stack ordering.
pub fn residual_ssd(reference: &SubsetSample, warped: &SubsetSample) -> Result<Vec<f64>> {
    check_lengths(reference, warped)?;
    let mut out = vec![0.0; reference.len()];
    residual_ssd_into(reference, warped, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn residual_ssd_into(reference: &SubsetSample, warped: &SubsetSample, out: &mut [f64]) {
    for ((r, f), g) in out.iter_mut().zip(reference.values()).zip(warped.values()) {
        *r = f - g;
    }
}

/// ZNSSD residual `(F - F_mean)/dF - (G - G_mean)/dG`.
pub fn residual_znssd(reference: &SubsetSample, warped: &SubsetSample) -> Result<Vec<f64>> {
    check_lengths(reference, warped)?;
    reference.require_textured()?;
    warped.require_textured()?;
    let mut out = vec![0.0; reference.len()];
    residual_znssd_into(reference, warped, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn residual_znssd_into(
    reference: &SubsetSample,
    warped: &SubsetSample,
    out: &mut [f64],
) {
    let (fm, fs) = (reference.mean(), reference.sdev());
    let (gm, gs) = (warped.mean(), warped.sdev());
    for ((r, f), g) in out.iter_mut().zip(reference.values()).zip(warped.values()) {
        *r = (f - fm) / fs - (g - gm) / gs;
    }
}

/// Builds the residual for the requested criterion.
pub fn residual(
    kind: CriterionKind,
    reference: &SubsetSample,
    warped: &SubsetSample,
) -> Result<Vec<f64>> {
    match kind {
        CriterionKind::Ssd => residual_ssd(reference, warped),
        CriterionKind::Znssd => residual_znssd(reference, warped),
    }
}

pub(crate) fn residual_into(
    kind: CriterionKind,
    reference: &SubsetSample,
    warped: &SubsetSample,
    out: &mut [f64],
) -> Result<()> {
    check_lengths(reference, warped)?;
    match kind {
        CriterionKind::Ssd => residual_ssd_into(reference, warped, out),
        CriterionKind::Znssd => {
            reference.require_textured()?;
            warped.require_textured()?;
            residual_znssd_into(reference, warped, out);
        }
    }
    Ok(())
}

/// Scalar factor that turns the SSD Gauss-Newton step into the step of the
/// requested criterion: 1 for SSD, the deformed-subset spread for forward
/// optimizers under ZNSSD, the reference spread for inverse-compositional.
pub fn step_scale(
    kind: CriterionKind,
    family: OptimizerFamily,
    reference: &SubsetSample,
    warped: &SubsetSample,
) -> Result<f64> {
    match kind {
        CriterionKind::Ssd => Ok(1.0),
        CriterionKind::Znssd => match family {
            OptimizerFamily::Forward => {
                warped.require_textured()?;
                Ok(warped.sdev())
            }
            OptimizerFamily::Inverse => {
                reference.require_textured()?;
                Ok(reference.sdev())
            }
        },
    }
}
