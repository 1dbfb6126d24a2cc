//! Manufactured solutions with hand-derived stress, divergence and forcing.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::ProblemData;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Permeability, Point};
use crate::reference::{edge_rule, triangle_rule, Sym};

type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type StressFn = Arc<dyn Fn(Point) -> (Sym, [f64; 2]) + Send + Sync>;

/// How the permeability is laid out over the unit square.
#[derive(Debug, Clone, PartialEq)]
pub enum KappaLayout {
    Constant(f64),
    /// `left` for `x < split`, `right` for `x > split`.
    SplitX { split: f64, left: f64, right: f64 },
}

impl KappaLayout {
    pub fn apply(&self, mesh: Mesh) -> Result<Mesh> {
        match *self {
            KappaLayout::Constant(k) => mesh.set_permeability(Permeability::Constant(k)),
            KappaLayout::SplitX { split, left, right } => mesh.split_at_x(split, left, right),
        }
    }
}

/// Exact velocity, pressure and stress `sigma = 2 mu eps(u) - p I` with
/// `div u = 0`. Forcing and boundary data follow from the Brinkman system.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub mu: f64,
    pub kappa: KappaLayout,
    velocity: VectorFn,
    pressure: ScalarFn,
    /// Stress and its divergence, without the pressure shift.
    stress: StressFn,
    /// Constant added to the pressure (and subtracted from the stress trace).
    pressure_shift: f64,
    /// `int_Omega p` before the shift, for the unit square.
    pressure_integral: f64,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("mu", &self.mu)
            .field("kappa", &self.kappa)
            .field("pressure_shift", &self.pressure_shift)
            .finish_non_exhaustive()
    }
}

impl ManufacturedCase {
    /// Smooth rotating flow `u = (cos pi x sin pi y, -sin pi x cos pi y)`,
    /// `p = sin(pi x y)`.
    pub fn trigonometric(mu: f64, kappa: KappaLayout) -> Self {
        let velocity: VectorFn = Arc::new(|x: Point| {
            let (sx, cx) = (PI * x[0]).sin_cos();
            let (sy, cy) = (PI * x[1]).sin_cos();
            [cx * sy, -sx * cy]
        });
        let pressure: ScalarFn = Arc::new(|x: Point| (PI * x[0] * x[1]).sin());
        let stress: StressFn = Arc::new(move |x: Point| {
            let (sx, cx) = (PI * x[0]).sin_cos();
            let (sy, cy) = (PI * x[1]).sin_cos();
            let p = (PI * x[0] * x[1]).sin();
            let cp = (PI * x[0] * x[1]).cos();
            // eps(u) = diag(-pi sx sy, pi sx sy); off-diagonal vanishes.
            let e = PI * sx * sy;
            let s = [-2.0 * mu * e - p, 0.0, 2.0 * mu * e - p];
            let div = [
                -2.0 * mu * PI * PI * cx * sy - PI * x[1] * cp,
                2.0 * mu * PI * PI * sx * cy - PI * x[0] * cp,
            ];
            (s, div)
        });
        // int_0^1 int_0^1 sin(pi x y) dy dx = int_0^1 (1 - cos pi x) / (pi x) dx
        let rule = edge_rule(crate::reference::quadrature::MAX_EXACTNESS).expect("valid rule");
        let pressure_integral = rule
            .iter()
            .map(|(s, w)| {
                let x = s[0];
                w * (1.0 - (PI * x).cos()) / (PI * x)
            })
            .sum();
        Self {
            name: "trigonometric".into(),
            mu,
            kappa,
            velocity,
            pressure,
            stress,
            pressure_shift: 0.0,
            pressure_integral,
        }
    }

    /// The same smooth solution on `x < 1/2` / `x > 1/2` with permeabilities
    /// `1` and `1 / contrast`.
    pub fn heterogeneous(mu: f64, contrast: f64) -> Result<Self> {
        if !(contrast >= 1.0 && contrast.is_finite()) {
            return Err(Error::Config(format!("contrast must be at least one, got {contrast}")));
        }
        let mut case = Self::trigonometric(
            mu,
            KappaLayout::SplitX {
                split: 0.5,
                left: 1.0,
                right: 1.0 / contrast,
            },
        );
        case.name = format!("heterogeneous-{contrast:e}");
        Ok(case)
    }

    /// Quadratic velocity `(x^2, -2xy)`, linear pressure `x + y - 1`, linear
    /// stress: reproduced exactly by every degree.
    pub fn polynomial(mu: f64, kappa: KappaLayout) -> Self {
        Self {
            name: "polynomial".into(),
            mu,
            kappa,
            velocity: Arc::new(|x: Point| [x[0] * x[0], -2.0 * x[0] * x[1]]),
            pressure: Arc::new(|x: Point| x[0] + x[1] - 1.0),
            stress: Arc::new(move |x: Point| {
                let p = x[0] + x[1] - 1.0;
                let s = [4.0 * mu * x[0] - p, -2.0 * mu * x[1], -4.0 * mu * x[0] - p];
                (s, [2.0 * mu - 1.0, -1.0])
            }),
            pressure_shift: 0.0,
            pressure_integral: 0.0,
        }
    }

    /// Linear shear flow `u = (y, x)` with zero pressure: constant stress.
    pub fn constant_stress(mu: f64, kappa: KappaLayout) -> Self {
        Self {
            name: "constant-stress".into(),
            mu,
            kappa,
            velocity: Arc::new(|x: Point| [x[1], x[0]]),
            pressure: Arc::new(|_| 0.0),
            stress: Arc::new(move |_| ([0.0, 2.0 * mu, 0.0], [0.0, 0.0])),
            pressure_shift: 0.0,
            pressure_integral: 0.0,
        }
    }

    /// Shifts the pressure to zero mean over the unit square, as required
    /// when the whole boundary carries velocity data.
    pub fn with_zero_mean_pressure(mut self) -> Self {
        self.pressure_shift = -self.pressure_integral;
        self
    }

    /// Zero-mean pressure over the domain covered by `mesh`, for domains
    /// other than the unit square.
    pub fn with_zero_mean_pressure_on(mut self, mesh: &Mesh) -> Self {
        let rule = triangle_rule(crate::reference::quadrature::MAX_EXACTNESS).expect("valid rule");
        let mut integral = 0.0;
        for e in 0..mesh.num_elements() {
            let g = mesh.geometry(e);
            integral += rule.iter().map(|(xi, w)| w * g.det * (self.pressure)(g.to_physical(xi))).sum::<f64>();
        }
        self.pressure_shift = -integral / mesh.total_area();
        self
    }

    pub fn velocity(&self, x: Point) -> [f64; 2] {
        (self.velocity)(x)
    }

    pub fn pressure(&self, x: Point) -> f64 {
        (self.pressure)(x) + self.pressure_shift
    }

    /// Exact stress and its divergence.
    pub fn stress(&self, x: Point) -> (Sym, [f64; 2]) {
        let (mut s, d) = (self.stress)(x);
        s[0] -= self.pressure_shift;
        s[2] -= self.pressure_shift;
        (s, d)
    }

    /// `F = (mu / kappa) u - div sigma`.
    pub fn body_force(&self, x: Point, kappa: f64) -> [f64; 2] {
        let u = self.velocity(x);
        let (_, d) = self.stress(x);
        [self.mu / kappa * u[0] - d[0], self.mu / kappa * u[1] - d[1]]
    }

    /// Discrete problem data for this solution.
    pub fn problem_data(&self, a_star: f64, quadrature_bump: usize) -> ProblemData {
        let (c1, c2, c3) = (self.clone(), self.clone(), self.clone());
        ProblemData {
            mu: self.mu,
            body_force: Arc::new(move |x, kappa| c1.body_force(x, kappa)),
            dirichlet: Arc::new(move |x| c2.velocity(x)),
            neumann: Arc::new(move |x, n| crate::reference::tensor::apply(c3.stress(x).0, n)),
            a_star,
            quadrature_bump,
        }
    }
}
