//! Disk-overlap geometry.

use std::f64::consts::PI;

use crate::error::{check_finite, invalid, Result};

/// Two disks of radii `r1`, `r2` whose centres are `h` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPair {
    pub r1: f64,
    pub r2: f64,
    pub h: f64,
}

impl DiskPair {
    pub fn new(r1: f64, r2: f64, h: f64) -> Result<Self> {
        for (n, v) in [("r1", r1), ("r2", r2), ("h", h)] {
            check_finite(n, v)?;
            if v < 0.0 {
                return invalid(format!("{n} must be non-negative, got {v}"));
            }
        }
        Ok(DiskPair { r1, r2, h })
    }

    pub fn lens_area(&self) -> f64 {
        lens_area_unchecked(self.r1, self.r2, self.h)
    }

    /// Overlap fractions `(A12 / (pi r1^2), A12 / (pi r2^2))`.
    pub fn overlap_fractions(&self) -> (f64, f64) {
        overlap_fractions_unchecked(self.r1, self.r2, self.h)
    }
}

/// Intersection area of two disks.
pub fn lens_area(r1: f64, r2: f64, h: f64) -> Result<f64> {
    Ok(DiskPair::new(r1, r2, h)?.lens_area())
}

/// Overlap fraction of the first disk, `A12 / (pi r1^2)`.
pub fn delta(r1: f64, r2: f64, h: f64) -> Result<f64> {
    let p = DiskPair::new(r1, r2, h)?;
    if r1 == 0.0 {
        return invalid("overlap fraction of a zero-radius disk is undefined");
    }
    Ok(p.overlap_fractions().0)
}

#[inline]
pub(crate) fn lens_area_unchecked(r1: f64, r2: f64, h: f64) -> f64 {
    if h >= r1 + r2 {
        return 0.0;
    }
    let rmin = r1.min(r2);
    if (r1 - r2).abs() >= h {
        return PI * rmin * rmin;
    }
    let c1 = ((h * h + r1 * r1 - r2 * r2) / (2.0 * h * r1)).clamp(-1.0, 1.0);
    let c2 = ((h * h + r2 * r2 - r1 * r1) / (2.0 * h * r2)).clamp(-1.0, 1.0);
    let p1 = c1.acos();
    let p2 = c2.acos();
    // r^2 (phi - sin(2 phi) / 2) per disk
    r1 * r1 * (p1 - c1 * (1.0 - c1 * c1).max(0.0).sqrt())
        + r2 * r2 * (p2 - c2 * (1.0 - c2 * c2).max(0.0).sqrt())
}

#[inline]
pub(crate) fn overlap_fractions_unchecked(r1: f64, r2: f64, h: f64) -> (f64, f64) {
    if h >= r1 + r2 {
        return (0.0, 0.0);
    }
    if (r1 - r2).abs() >= h {
        return if r1 <= r2 {
            (1.0, (r1 * r1) / (r2 * r2))
        } else {
            ((r2 * r2) / (r1 * r1), 1.0)
        };
    }
    let a = lens_area_unchecked(r1, r2, h);
    ((a / (PI * r1 * r1)).min(1.0), (a / (PI * r2 * r2)).min(1.0))
}
