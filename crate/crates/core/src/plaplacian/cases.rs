use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ModelParams;
use crate::gradientflow::{FluxFn, PotentialData, ScalarFn};
use crate::mesh::{lshape_reentrant_dirichlet, Point, QuadMesh};

pub type GradFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseName {
    TC1,
    TC2,
    TC3,
    TC4,
    TC5,
    TC6,
}

impl CaseName {
    pub const ALL: [CaseName; 6] = [
        Self::TC1,
        Self::TC2,
        Self::TC3,
        Self::TC4,
        Self::TC5,
        Self::TC6,
    ];
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTestCase(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    UnitSquare,
    LShape,
}

/// Origin of the radial coordinate for the unit-square cases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadialCenter {
    #[default]
    Center,
    Corner,
}

impl RadialCenter {
    fn point(self) -> Point {
        match self {
            Self::Center => [0.5, 0.5],
            Self::Corner => [0.0, 0.0],
        }
    }
}

/// A manufactured (or, for TC6, source-only) p-Laplacian problem.
#[derive(Clone)]
pub struct TestCase {
    pub name: CaseName,
    pub domain: Domain,
    pub p: f64,
    pub gamma: f64,
    pub sigma: Option<f64>,
    pub a: Option<f64>,
    pub alpha: Option<f64>,
    pub exact: Option<ScalarFn>,
    pub exact_grad: Option<GradFn>,
    pub source: ScalarFn,
    pub flux: Option<FluxFn>,
}

impl fmt::Debug for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestCase")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("p", &self.p)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

fn radial(x: Point, c: Point) -> (f64, f64, f64) {
    let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
    ((dx * dx + dy * dy).sqrt(), dx, dy)
}

/// `u = (p-1)/(s+p) (s+2)^{1/(1-p)} (1 - r^{(s+p)/(p-1)})`, `S = r^s`.
fn smooth_radial(name: CaseName, sigma: f64, p: f64, center: Point) -> TestCase {
    let k = (p - 1.0) / (sigma + p) * (sigma + 2.0).powf(1.0 / (1.0 - p));
    let q = (sigma + p) / (p - 1.0);
    TestCase {
        name,
        domain: Domain::UnitSquare,
        p,
        gamma: p / (p - 2.0),
        sigma: Some(sigma),
        a: None,
        alpha: None,
        exact: Some(Arc::new(move |x| k * (1.0 - radial(x, center).0.powf(q)))),
        exact_grad: Some(Arc::new(move |x| {
            let (r, dx, dy) = radial(x, center);
            if r == 0.0 {
                return [0.0, 0.0];
            }
            // u'(r) / r
            let d = -k * q * r.powf(q - 2.0);
            [d * dx, d * dy]
        })),
        source: Arc::new(move |x| {
            let r = radial(x, center).0;
            if sigma == 0.0 {
                1.0
            } else {
                r.powf(sigma)
            }
        }),
        flux: None,
    }
}

/// `u = (r-a)^4` outside the disk of radius `a`, zero inside.
fn annulus(a: f64, p: f64, center: Point) -> TestCase {
    TestCase {
        name: CaseName::TC3,
        domain: Domain::UnitSquare,
        p,
        gamma: p / (p - 2.0),
        sigma: None,
        a: Some(a),
        alpha: None,
        exact: Some(Arc::new(move |x| {
            let r = radial(x, center).0;
            if r < a {
                0.0
            } else {
                (r - a).powi(4)
            }
        })),
        exact_grad: Some(Arc::new(move |x| {
            let (r, dx, dy) = radial(x, center);
            if r < a {
                return [0.0, 0.0];
            }
            let d = 4.0 * (r - a).powi(3) / r;
            [d * dx, d * dy]
        })),
        source: Arc::new(move |x| {
            let r = radial(x, center).0;
            if r < a {
                0.0
            } else {
                4f64.powf(p - 1.0) * (r - a).powf(3.0 * p - 4.0) * (2.0 - 3.0 * p + a / r)
            }
        }),
        flux: None,
    }
}

/// Polar angle on the L-shape, in `[0, 3 pi / 2]`.
pub fn lshape_angle(x: Point) -> f64 {
    let t = x[1].atan2(x[0]);
    if t < -0.5 * PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// `u = r^alpha sin(alpha theta)` with the flux `|grad u|^{p-2} du/dn` on the Neumann part.
fn corner(alpha: f64, p: f64) -> TestCase {
    let grad = move |x: Point| -> Point {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let t = lshape_angle(x);
        let (ur, ut) = (
            alpha * r.powf(alpha - 1.0) * (alpha * t).sin(),
            alpha * r.powf(alpha - 1.0) * (alpha * t).cos(),
        );
        // (u_r, u_theta / r) rotated to Cartesian
        let (c, s) = (t.cos(), t.sin());
        [ur * c - ut * s, ur * s + ut * c]
    };
    TestCase {
        name: CaseName::TC5,
        domain: Domain::LShape,
        p,
        gamma: p / (p - 2.0),
        sigma: None,
        a: None,
        alpha: Some(alpha),
        exact: Some(Arc::new(move |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            r.powf(alpha) * (alpha * lshape_angle(x)).sin()
        })),
        exact_grad: Some(Arc::new(grad)),
        source: Arc::new(move |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            -alpha
                * alpha.abs().powf(p - 2.0)
                * (alpha - 1.0)
                * (p - 2.0)
                * r.powf(p * alpha - alpha - p)
                * (alpha * lshape_angle(x)).sin()
        }),
        flux: Some(Arc::new(move |x, n| {
            let g = grad(x);
            (g[0] * g[0] + g[1] * g[1]).powf(0.5 * (p - 2.0)) * (g[0] * n[0] + g[1] * n[1])
        })),
    }
}

impl TestCase {
    /// TC1..TC5 with their published parameters; TC6 at `p = 5`.
    pub fn new(name: CaseName) -> Self {
        Self::with_center(name, RadialCenter::Center)
    }

    pub fn with_center(name: CaseName, center: RadialCenter) -> Self {
        let c = center.point();
        match name {
            CaseName::TC1 => smooth_radial(name, 0.0, 4.0, c),
            CaseName::TC2 => smooth_radial(name, 7.0, 4.0, c),
            CaseName::TC3 => annulus(0.3, 4.0, c),
            CaseName::TC4 => smooth_radial(name, 7.0, 20.0, c),
            CaseName::TC5 => corner(2.0, 4.0),
            CaseName::TC6 => Self::tc6(5.0).expect("p = 5 is valid"),
        }
    }

    /// Constant source `S = 2` with homogeneous Dirichlet data on the L-shape.
    pub fn tc6(p: f64) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 2, got {p}")));
        }
        Ok(Self {
            name: CaseName::TC6,
            domain: Domain::LShape,
            p,
            gamma: p / (p - 2.0),
            sigma: None,
            a: None,
            alpha: None,
            exact: None,
            exact_grad: None,
            source: Arc::new(|_| 2.0),
            flux: None,
        })
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            r: 0.0,
            nu: 1.0,
            gamma: self.gamma,
            eps: 0.0,
        }
    }

    /// Mesh with `n` cells per unit length and the case's boundary tags.
    pub fn mesh(&self, n: usize) -> Result<QuadMesh> {
        match (self.domain, self.name) {
            (Domain::UnitSquare, _) => QuadMesh::unit_square(n),
            (Domain::LShape, CaseName::TC5) => {
                Ok(QuadMesh::lshape(n)?.with_boundary_kinds(lshape_reentrant_dirichlet))
            }
            (Domain::LShape, _) => QuadMesh::lshape(n),
        }
    }

    pub fn potential_data(&self) -> PotentialData {
        PotentialData {
            source: self.source.clone(),
            dirichlet: self.exact.clone(),
            flux: self.flux.clone(),
            mean_correct_source: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tc1_value_at_center() {
        let tc = TestCase::new(CaseName::TC1);
        let u0 = (tc.exact.as_ref().unwrap())([0.5, 0.5]);
        assert!((u0 - 0.75 * 2f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((u0 - 0.5953).abs() < 1e-4);
    }

    #[test]
    fn tc3_source_vanishes_inside() {
        let tc = TestCase::new(CaseName::TC3);
        assert_eq!((tc.source)([0.5, 0.6]), 0.0);
        assert_eq!((tc.exact.as_ref().unwrap())([0.6, 0.6]), 0.0);
    }

    #[test]
    fn p_gamma_pairs() {
        for (name, g) in [(CaseName::TC1, 2.0), (CaseName::TC4, 10.0 / 9.0)] {
            let tc = TestCase::new(name);
            assert!((tc.gamma - g).abs() < 1e-15);
            assert!((2.0 * tc.gamma / (tc.gamma - 1.0) - tc.p).abs() < 1e-12);
        }
        let t = TestCase::tc6(50.0).unwrap();
        assert!((t.gamma - 25.0 / 24.0).abs() < 1e-15);
        assert!(!t.has_exact());
    }

    #[test]
    fn tc5_is_2xy() {
        let tc = TestCase::new(CaseName::TC5);
        let u = tc.exact.as_ref().unwrap();
        for x in [[0.3, 0.4], [-0.5, 0.2], [-0.7, -0.6]] {
            assert!((u(x) - 2.0 * x[0] * x[1]).abs() < 1e-14);
            assert!(((tc.source)(x) + 32.0 * x[0] * x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("tc4".parse::<CaseName>().unwrap(), CaseName::TC4);
        assert!(matches!(
            "TC9".parse::<CaseName>(),
            Err(Error::UnknownTestCase(_))
        ));
    }
}
