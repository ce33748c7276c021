//! Shared numeric primitives: relative positions, 2x2 covariances and
//! information-form (error ellipse) fusion.
//!
//! Every relative quantity lives in a translation-relative frame whose axes
//! stay aligned with the world axes. Propagation is therefore pure addition.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::EstimationError;

/// Eigenvalue floor below which a covariance is treated as singular.
pub const EPSILON_INV: f64 = 1e-9;

/// Position relative to the owning agent, in body lengths.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelVec {
    pub x: f64,
    pub y: f64,
}

impl RelVec {
    pub const ZERO: RelVec = RelVec { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(range: f64, angle: f64) -> Self {
        Self::new(range * angle.cos(), range * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Angle of the vector measured from +x, in (-pi, pi].
    pub fn bearing(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn dot(self, other: RelVec) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Rotate counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for RelVec {
    type Output = RelVec;
    fn add(self, rhs: RelVec) -> RelVec {
        RelVec::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for RelVec {
    fn add_assign(&mut self, rhs: RelVec) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for RelVec {
    type Output = RelVec;
    fn sub(self, rhs: RelVec) -> RelVec {
        RelVec::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for RelVec {
    type Output = RelVec;
    fn neg(self) -> RelVec {
        RelVec::new(-self.x, -self.y)
    }
}

impl Mul<f64> for RelVec {
    type Output = RelVec;
    fn mul(self, rhs: f64) -> RelVec {
        RelVec::new(self.x * rhs, self.y * rhs)
    }
}

/// Symmetric 2x2 covariance in bl².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CovMat {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl CovMat {
    pub const ZERO: CovMat = CovMat { xx: 0.0, xy: 0.0, yy: 0.0 };
    pub const IDENTITY: CovMat = CovMat { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Self { xx, xy: 0.0, yy }
    }

    pub const fn isotropic(v: f64) -> Self {
        Self::diag(v, v)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * self.trace();
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        (mean - radius, mean + radius)
    }

    pub fn is_psd(&self) -> bool {
        self.eigenvalues().0 >= -EPSILON_INV
    }

    pub fn is_zero(&self) -> bool {
        self.xx == 0.0 && self.xy == 0.0 && self.yy == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// Inverse, refusing matrices whose smallest eigenvalue is below
    /// [`EPSILON_INV`].
    pub fn inverse(&self) -> Result<CovMat, EstimationError> {
        let (lo, _) = self.eigenvalues();
        if !(lo > EPSILON_INV) || !self.is_finite() {
            return Err(EstimationError::SingularCovariance { min_eigenvalue: lo });
        }
        let det = self.det();
        Ok(CovMat::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    pub fn mul_vec(&self, v: RelVec) -> RelVec {
        RelVec::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    pub fn scale(&self, s: f64) -> CovMat {
        CovMat::new(self.xx * s, self.xy * s, self.yy * s)
    }

    /// `self - other` is positive semi-definite.
    pub fn dominates(&self, other: &CovMat) -> bool {
        (*self - *other).is_psd()
    }

    /// Quadratic form `v^T self^-1 v`; `None` when the matrix is singular.
    pub fn mahalanobis_sq(&self, v: RelVec) -> Option<f64> {
        self.inverse().ok().map(|inv| v.dot(inv.mul_vec(v)))
    }

    /// `R self R^T` for the rotation by `angle`.
    pub fn rotate(&self, angle: f64) -> CovMat {
        let (s, c) = angle.sin_cos();
        CovMat::new(
            c * c * self.xx - 2.0 * s * c * self.xy + s * s * self.yy,
            s * c * (self.xx - self.yy) + (c * c - s * s) * self.xy,
            s * s * self.xx + 2.0 * s * c * self.xy + c * c * self.yy,
        )
    }

    /// Lower-triangular factor `L` with `L L^T = self`, as `(l11, l21, l22)`.
    /// Tolerates semi-definite input; negative round-off is clipped.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        let l11 = self.xx.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.xy / l11 } else { 0.0 };
        let l22 = (self.yy - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }

    /// Map a standard-normal pair through the Cholesky factor.
    pub fn color(&self, z: RelVec) -> RelVec {
        let (l11, l21, l22) = self.cholesky();
        RelVec::new(l11 * z.x, l21 * z.x + l22 * z.y)
    }
}

impl Add for CovMat {
    type Output = CovMat;
    fn add(self, rhs: CovMat) -> CovMat {
        CovMat::new(self.xx + rhs.xx, self.xy + rhs.xy, self.yy + rhs.yy)
    }
}

impl AddAssign for CovMat {
    fn add_assign(&mut self, rhs: CovMat) {
        *self = *self + rhs;
    }
}

impl Sub for CovMat {
    type Output = CovMat;
    fn sub(self, rhs: CovMat) -> CovMat {
        CovMat::new(self.xx - rhs.xx, self.xy - rhs.xy, self.yy - rhs.yy)
    }
}

/// Differential-entropy proxy: the covariance determinant, in bl⁴.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Entropy(pub f64);

impl Entropy {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Mean and covariance of a relative position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianEstimate {
    pub mean: RelVec,
    pub cov: CovMat,
}

impl GaussianEstimate {
    pub const fn new(mean: RelVec, cov: CovMat) -> Self {
        Self { mean, cov }
    }

    pub fn entropy(&self) -> Entropy {
        entropy(&self.cov)
    }
}

pub fn entropy(cov: &CovMat) -> Entropy {
    Entropy(cov.det())
}

/// Information-form fusion of two independent estimates.
pub fn fuse(a: &GaussianEstimate, b: &GaussianEstimate) -> Result<GaussianEstimate, EstimationError> {
    fuse_all([a, b])
}

/// Fuse any number of independent estimates in one information sum.
pub fn fuse_all<'a, I>(estimates: I) -> Result<GaussianEstimate, EstimationError>
where
    I: IntoIterator<Item = &'a GaussianEstimate>,
{
    let mut info = CovMat::ZERO;
    let mut info_mean = RelVec::ZERO;
    let mut count = 0usize;
    for e in estimates {
        let inv = e.cov.inverse()?;
        info += inv;
        info_mean += inv.mul_vec(e.mean);
        count += 1;
    }
    if count == 0 {
        return Err(EstimationError::Empty);
    }
    let cov = info.inverse()?;
    Ok(GaussianEstimate::new(cov.mul_vec(info_mean), cov))
}

/// Shift the mean and grow the covariance.
pub fn propagate(e: &GaussianEstimate, shift: RelVec, growth: CovMat) -> GaussianEstimate {
    GaussianEstimate::new(e.mean + shift, e.cov + growth)
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn est(x: f64, y: f64, cov: CovMat) -> GaussianEstimate {
        GaussianEstimate::new(RelVec::new(x, y), cov)
    }

    fn pd_cov() -> impl Strategy<Value = CovMat> {
        (0.05f64..10.0, 0.05f64..10.0, -0.95f64..0.95).prop_map(|(a, b, rho)| {
            CovMat::new(a, rho * (a * b).sqrt(), b)
        })
    }

    #[test]
    fn fuse_equal_weight_average() {
        let a = est(0.0, 0.0, CovMat::isotropic(2.0));
        let b = est(2.0, 0.0, CovMat::isotropic(2.0));
        let f = fuse(&a, &b).unwrap();
        assert_relative_eq!(f.mean.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.mean.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(f.cov.xx, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.cov.yy, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.cov.xy, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fuse_with_uninformative_input() {
        let a = est(1.0, 1.0, CovMat::IDENTITY);
        let b = est(9.0, 9.0, CovMat::isotropic(1e6));
        let f = fuse(&a, &b).unwrap();
        assert!((f.mean.x - 1.0).abs() < 1e-4 && (f.mean.y - 1.0).abs() < 1e-4);
        assert!((f.cov.xx - 1.0).abs() < 1e-4 && (f.cov.yy - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fuse_rejects_singular() {
        let a = est(0.0, 0.0, CovMat::ZERO);
        let b = est(1.0, 0.0, CovMat::IDENTITY);
        assert!(matches!(fuse(&a, &b), Err(EstimationError::SingularCovariance { .. })));
        let rank_one = est(0.0, 0.0, CovMat::new(1.0, 1.0, 1.0));
        assert!(fuse(&rank_one, &b).is_err());
    }

    #[test]
    fn propagate_examples() {
        let e = est(1.0, 0.0, CovMat::IDENTITY);
        let p = propagate(&e, RelVec::new(-1.0, 0.0), CovMat::isotropic(0.5));
        assert_eq!(p.mean, RelVec::ZERO);
        assert_eq!(p.cov, CovMat::isotropic(1.5));
        assert_eq!(propagate(&e, RelVec::ZERO, CovMat::ZERO), e);
    }

    #[test]
    fn propagate_repeated_matches_loop_sum() {
        let q = CovMat::new(0.3, 0.05, 0.2);
        let start = est(0.5, -0.5, CovMat::new(1.0, 0.1, 2.0));
        let mut e = start;
        for _ in 0..10 {
            e = propagate(&e, RelVec::ZERO, q);
        }
        assert_relative_eq!(e.cov.xx, 1.0 + 10.0 * 0.3, epsilon = 1e-12);
        assert_relative_eq!(e.cov.xy, 0.1 + 10.0 * 0.05, epsilon = 1e-12);
        assert_relative_eq!(e.cov.yy, 2.0 + 10.0 * 0.2, epsilon = 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&CovMat::diag(2.0, 3.0)).value(), 6.0);
        assert_eq!(entropy(&CovMat::IDENTITY).value(), 1.0);
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.5), 0.5);
        assert_relative_eq!(wrap_angle(-2.0 * PI - 0.25), -0.25, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs(c in pd_cov()) {
            let (l11, l21, l22) = c.cholesky();
            prop_assert!((l11 * l11 - c.xx).abs() < 1e-9);
            prop_assert!((l11 * l21 - c.xy).abs() < 1e-9);
            prop_assert!((l21 * l21 + l22 * l22 - c.yy).abs() < 1e-9);
        }

        #[test]
        fn rotation_matches_matrix_product(c in pd_cov(), a in -4.0f64..4.0) {
            // R C R^T written out column by column
            let (s, co) = a.sin_cos();
            let rc = [[co * c.xx - s * c.xy, co * c.xy - s * c.yy], [s * c.xx + co * c.xy, s * c.xy + co * c.yy]];
            let xx = rc[0][0] * co - rc[0][1] * s;
            let xy = rc[0][0] * s + rc[0][1] * co;
            let yy = rc[1][0] * s + rc[1][1] * co;
            let r = c.rotate(a);
            prop_assert!((r.xx - xx).abs() < 1e-9 && (r.xy - xy).abs() < 1e-9 && (r.yy - yy).abs() < 1e-9);
            prop_assert!((r.det() - c.det()).abs() < 1e-9 * (1.0 + c.det()));
        }

        #[test]
        fn entropy_matches_cofactor_expansion(c in pd_cov()) {
            // | a b ; b d | = a*d - b*c by cofactor expansion along the first row
            let m = [[c.xx, c.xy], [c.xy, c.yy]];
            let cofactor = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            prop_assert!((entropy(&c).value() - cofactor).abs() <= 1e-12 * cofactor.abs().max(1.0));
        }

        #[test]
        fn fuse_is_commutative(a in pd_cov(), b in pd_cov(), x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let ea = est(x, y, a);
            let eb = est(y, -x, b);
            let ab = fuse(&ea, &eb).unwrap();
            let ba = fuse(&eb, &ea).unwrap();
            prop_assert!((ab.mean - ba.mean).norm() < 1e-9);
            prop_assert!((ab.cov.xx - ba.cov.xx).abs() < 1e-9);
            prop_assert!((ab.cov.xy - ba.cov.xy).abs() < 1e-9);
            prop_assert!((ab.cov.yy - ba.cov.yy).abs() < 1e-9);
        }

        #[test]
        fn fuse_never_loses_information(a in pd_cov(), b in pd_cov()) {
            let f = fuse(&est(0.0, 0.0, a), &est(1.0, 1.0, b)).unwrap();
            prop_assert!(f.cov.det() <= a.det().min(b.det()) * (1.0 + 1e-9));
        }

        #[test]
        fn psd_growth_never_reduces_entropy(a in pd_cov(), g in pd_cov(), s in 0.0f64..1.0) {
            let e = est(0.0, 0.0, a);
            let grown = propagate(&e, RelVec::ZERO, g.scale(s));
            prop_assert!(grown.entropy().value() >= e.entropy().value() * (1.0 - 1e-12));
        }

        #[test]
        fn fusing_with_hugely_grown_copy_returns_original(a in pd_cov(), x in -5.0f64..5.0) {
            let e = est(x, -x, a);
            let blurred = propagate(&e, RelVec::ZERO, CovMat::isotropic(1e6));
            let f = fuse(&e, &blurred).unwrap();
            prop_assert!((f.mean - e.mean).norm() < 1e-3);
            prop_assert!((f.cov.xx - a.xx).abs() < 1e-3);
            prop_assert!((f.cov.xy - a.xy).abs() < 1e-3);
            prop_assert!((f.cov.yy - a.yy).abs() < 1e-3);
        }
    }
}
