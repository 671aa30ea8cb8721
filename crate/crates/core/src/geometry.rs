//! Implicit closed hypersurfaces given by signed distance functions, and the
//! closest-point map `x - d(x) n(x)` onto them.

use crate::error::{Error, Result};

/// Closed hypersurface with a closed-form signed distance function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImplicitSurface {
    /// Unit sphere in R^3.
    Sphere2,
    /// Torus in R^3 with major radius `major` and tube radius `minor`.
    Torus { major: f64, minor: f64 },
    /// Unit 3-sphere in R^4.
    Sphere3,
}

impl ImplicitSurface {
    /// The torus used throughout the experiments (R = 2, r = 0.5).
    pub const STANDARD_TORUS: ImplicitSurface = ImplicitSurface::Torus { major: 2.0, minor: 0.5 };

    /// Topological dimension of the surface.
    pub fn dim(&self) -> usize {
        match self {
            ImplicitSurface::Sphere2 | ImplicitSurface::Torus { .. } => 2,
            ImplicitSurface::Sphere3 => 3,
        }
    }

    /// Dimension of the embedding space.
    pub fn ambient_dim(&self) -> usize {
        self.dim() + 1
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            ImplicitSurface::Sphere2 | ImplicitSurface::Sphere3 => 2.0,
            ImplicitSurface::Torus { major, minor } => 2.0 * (major + minor),
        }
    }

    /// Inner reach: the closest-point map is single valued for `d(x) > -reach`.
    pub fn reach(&self) -> f64 {
        match *self {
            ImplicitSurface::Sphere2 | ImplicitSurface::Sphere3 => 1.0,
            ImplicitSurface::Torus { minor, .. } => minor,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn signed_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        match *self {
            ImplicitSurface::Sphere2 => sdf_sphere_s2(x),
            ImplicitSurface::Sphere3 => sdf_sphere_s3(x),
            ImplicitSurface::Torus { major, minor } => sdf_torus(x, major, minor),
        }
    }

    /// Unit normal `grad d(x)`, computed analytically.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        match *self {
            ImplicitSurface::Sphere2 | ImplicitSurface::Sphere3 => {
                let n = norm(x);
                if n == 0.0 {
                    return Err(Error::Domain("gradient undefined at the origin".into()));
                }
                Ok(x.iter().map(|v| v / n).collect())
            }
            ImplicitSurface::Torus { major, .. } => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return Err(Error::Domain("gradient undefined on the torus axis".into()));
                }
                let q0 = rho - major;
                let q = q0.hypot(x[2]);
                if q == 0.0 {
                    return Err(Error::Domain("gradient undefined on the core circle".into()));
                }
                Ok(vec![q0 / q * x[0] / rho, q0 / q * x[1] / rho, x[2] / q])
            }
        }
    }

    /// Closest point on the surface. Fails for points where the projection
    /// is not single valued.
    pub fn closest_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let outside = || Error::Projection { point: x.to_vec() };
        match *self {
            ImplicitSurface::Sphere2 | ImplicitSurface::Sphere3 => {
                let n = norm(x);
                if !(n > 0.0) || !n.is_finite() {
                    return Err(outside());
                }
                Ok(x.iter().map(|v| v / n).collect())
            }
            ImplicitSurface::Torus { major, minor } => {
                let rho = x[0].hypot(x[1]);
                if !(rho > 0.0) || !rho.is_finite() {
                    return Err(outside());
                }
                let q0 = rho - major;
                let q = q0.hypot(x[2]);
                if !(q > 0.0) {
                    return Err(outside());
                }
                // Nearest point of the core circle, then out along the tube radius.
                let s = minor / q;
                let ring = major + s * q0;
                Ok(vec![ring * x[0] / rho, ring * x[1] / rho, s * x[2]])
            }
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `|x| - 1` in R^3.
pub fn sdf_sphere_s2(x: &[f64]) -> Result<f64> {
    if x.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: x.len(),
        });
    }
    let n = norm(x);
    if n == 0.0 {
        return Err(Error::Domain("signed distance of S^2 evaluated at the origin".into()));
    }
    Ok(n - 1.0)
}

/// `|x| - 1` in R^4.
pub fn sdf_sphere_s3(x: &[f64]) -> Result<f64> {
    if x.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: x.len(),
        });
    }
    let n = norm(x);
    if n == 0.0 {
        return Err(Error::Domain("signed distance of S^3 evaluated at the origin".into()));
    }
    Ok(n - 1.0)
}

/// Signed distance to the torus with major radius `major` and tube radius `minor`.
pub fn sdf_torus(x: &[f64], major: f64, minor: f64) -> Result<f64> {
    if x.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: x.len(),
        });
    }
    let rho = x[0].hypot(x[1]);
    if rho == 0.0 {
        return Err(Error::Domain(
            "signed distance of the torus evaluated on its axis".into(),
        ));
    }
    Ok((rho - major).hypot(x[2]) - minor)
}
