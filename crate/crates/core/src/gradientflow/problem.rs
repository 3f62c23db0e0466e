use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    apply_weighted_laplacian, assemble_a_diagonal, assemble_coupling, assemble_source,
    assemble_stiffness, local_conductance, metabolic_rate, permeability, ModelParams, Q1Space,
};
use crate::linalg::{krylov_solve, norm2, project_zero_mean, BlockSystem, KrylovConfig};
use crate::mesh::{Point, QuadMesh};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Neumann datum `g_N(x, n)` with `n` the outward unit normal.
pub type FluxFn = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;

/// Data of the potential equation `-div((c + r) grad u) = S`.
#[derive(Clone)]
pub struct PotentialData {
    pub source: ScalarFn,
    /// Dirichlet datum; zero when absent.
    pub dirichlet: Option<ScalarFn>,
    /// Neumann flux; zero when absent.
    pub flux: Option<FluxFn>,
    /// Subtract the mean of the source (used with pure Neumann boundaries).
    pub mean_correct_source: bool,
}

impl PotentialData {
    pub fn source_only(source: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            source: Arc::new(source),
            dirichlet: None,
            flux: None,
            mean_correct_source: false,
        }
    }
}

/// Conductance and potential at time `t`. `u` holds every vertex, including
/// the Dirichlet values.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub c: Vec<f64>,
    pub u: Vec<f64>,
}

/// A discretized problem: space, coefficients and the assembled load vector.
pub struct Problem {
    pub space: Q1Space,
    pub params: ModelParams,
    pub data: PotentialData,
    load: Vec<f64>,
    dirichlet_values: Vec<f64>,
}

impl Problem {
    pub fn new(mesh: QuadMesh, params: ModelParams, data: PotentialData) -> Result<Self> {
        params.validate()?;
        let space = Q1Space::new(mesh);
        let flux = data.flux.clone();
        let flux_ref: Option<&dyn Fn(Point, Point) -> f64> = flux.as_ref().map(|f| f.as_ref() as _);
        let mut load = assemble_source(&space, data.source.as_ref(), flux_ref);
        if space.is_pure_neumann() {
            if data.mean_correct_source {
                let total: f64 = load.iter().sum();
                let area = space.mesh.area();
                for (f, w) in load.iter_mut().zip(space.basis_integrals()) {
                    *f -= total * w / area;
                }
            }
            let imbalance: f64 = load.iter().sum();
            let scale: f64 = load.iter().map(|f| f.abs()).sum();
            if imbalance.abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::IncompatibleSource { imbalance });
            }
            project_zero_mean(&mut load);
        }
        let mut dirichlet_values = vec![0.0; space.num_nodes()];
        if let Some(g) = &data.dirichlet {
            space.apply_dirichlet(&mut dirichlet_values, |x| g(x));
        }
        Ok(Self {
            space,
            params,
            data,
            load,
            dirichlet_values,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.space.num_cells()
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn constant_kernel(&self) -> bool {
        self.space.is_pure_neumann()
    }

    /// Vertex vector holding the Dirichlet datum and zeros elsewhere.
    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet_values
    }

    /// Solves the weighted Poisson problem for the potential at conductance `c`.
    pub fn solve_potential(&self, c: &[f64], krylov: &KrylovConfig) -> Result<Vec<f64>> {
        if c.len() != self.num_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} conductance values for {} cells",
                c.len(),
                self.num_cells()
            )));
        }
        let k = permeability(c, self.params.r)?;
        let mat = assemble_stiffness(&self.space, c, self.params.r)?;
        let u0 = self.dirichlet_values.clone();
        // rhs = F - C u_D restricted to free vertices
        let cu = apply_weighted_laplacian(&self.space, &k, &u0);
        let rhs: Vec<f64> = self
            .space
            .free_nodes()
            .iter()
            .map(|&v| self.load[v] - cu[v])
            .collect();
        let (x, _) = krylov_solve(&mat, &rhs, krylov, self.constant_kernel())?;
        let mut u = u0;
        self.space.add_free(&mut u, &x, 1.0);
        Ok(u)
    }

    /// Initial state: given conductance and the matching potential.
    pub fn initial_state(&self, c0: Vec<f64>, krylov: &KrylovConfig) -> Result<State> {
        if let Some(cell) = c0.iter().position(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "initial conductance negative on cell {cell}"
            )));
        }
        let u = self.solve_potential(&c0, krylov)?;
        Ok(State { t: 0.0, c: c0, u })
    }

    /// Stacked backward-Euler residual `(R_c, R_u)`; `R_u` lives on free vertices.
    ///
    /// `R_c,K = 1/2 (|K| ((c - c_prev)/dt + nu (c^2+eps)^{(gamma-2)/2} c) - int_K |grad u|^2)`
    /// and `R_u,i = F_i - int (c + r) grad u . grad phi_i`.
    /// `int_K |grad u|^2` on every cell (2x2 Gauss).
    pub fn cell_gradient_energy(&self, u: &[f64]) -> Vec<f64> {
        let sp = &self.space;
        (0..sp.num_cells())
            .map(|cell| {
                sp.qpoints(cell)
                    .iter()
                    .map(|q| {
                        let g = sp.grad_at(cell, q, u);
                        q.jxw * (g[0] * g[0] + g[1] * g[1])
                    })
                    .sum()
            })
            .collect()
    }

    pub fn residual(&self, c_prev: &[f64], c: &[f64], u: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let sp = &self.space;
        let gsq = self.cell_gradient_energy(u);
        let rc = (0..sp.num_cells())
            .map(|cell| {
                let area = sp.cell_area(cell);
                let time = (c[cell] - c_prev[cell]) / dt;
                0.5 * (area * (time + metabolic_rate(c[cell], &self.params)) - gsq[cell])
            })
            .collect();
        let k: Vec<f64> = c.iter().map(|ck| ck + self.params.r).collect();
        let au = apply_weighted_laplacian(sp, &k, u);
        let ru = sp
            .free_nodes()
            .iter()
            .map(|&v| self.load[v] - au[v])
            .collect();
        (rc, ru)
    }

    /// Conductances zeroing the conductance residual for the frozen potential `u`
    /// (cell by cell, `gamma >= 1` only).
    pub fn solve_conductance(&self, c_prev: &[f64], u: &[f64], dt: f64) -> Vec<f64> {
        self.reduced_energy(c_prev, u, dt).0
    }

    /// Conductance eliminated at the potential `u`, with the convex functional
    /// whose negative gradient is the potential residual at that conductance:
    /// `sum_K |K|/2 (c^2/(2dt) + c m(c) - M(c)) + r/2 int |grad u|^2 - F.u`,
    /// where `m` is the metabolic rate and `M` its primitive.
    pub fn reduced_energy(&self, c_prev: &[f64], u: &[f64], dt: f64) -> (Vec<f64>, f64) {
        let sp = &self.space;
        let p = &self.params;
        let gsq = self.cell_gradient_energy(u);
        let mut c = Vec::with_capacity(gsq.len());
        let mut j = 0.0;
        for (cell, g) in gsq.iter().enumerate() {
            let area = sp.cell_area(cell);
            let ck = local_conductance(c_prev[cell] / dt + g / area, dt, p);
            let big_m = p.nu / p.gamma * (ck * ck + p.eps).powf(0.5 * p.gamma);
            j += 0.5 * area * (0.5 * ck * ck / dt + ck * metabolic_rate(ck, p) - big_m)
                + 0.5 * p.r * g;
            c.push(ck);
        }
        for &v in sp.free_nodes() {
            j -= self.load[v] * u[v];
        }
        (c, j)
    }

    /// Jacobian blocks at `(c, u)`: `J = [[A, B^T], [B, -C]]` of the residual above.
    pub fn jacobian(&self, c: &[f64], u: &[f64], dt: f64) -> Result<BlockSystem> {
        let a = assemble_a_diagonal(&self.space, c, &self.params, dt)?;
        let b = assemble_coupling(&self.space, u);
        let cm = assemble_stiffness(&self.space, c, self.params.r)?;
        BlockSystem::new(a, b, cm)
    }

    /// `int (c + r)|grad u|^2 + (nu/gamma)(c^2 + eps)^{gamma/2}`.
    pub fn energy(&self, state: &State) -> f64 {
        self.dissipation_parts(state).0 + self.metabolic_energy(&state.c)
    }

    /// Energy that the flow dissipates for any boundary data:
    /// `2 l(u) - a_c(u, u) + metabolic`, with `l` the load functional.
    ///
    /// Equal to [`Problem::energy`] when the Dirichlet datum vanishes and `u`
    /// solves the potential equation.
    pub fn lyapunov_energy(&self, state: &State) -> f64 {
        let (a, l) = self.dissipation_parts(state);
        2.0 * l - a + self.metabolic_energy(&state.c)
    }

    fn dissipation_parts(&self, state: &State) -> (f64, f64) {
        let sp = &self.space;
        let mut a = 0.0;
        for cell in 0..sp.num_cells() {
            let k = state.c[cell] + self.params.r;
            for q in sp.qpoints(cell) {
                let g = sp.grad_at(cell, q, &state.u);
                a += k * q.jxw * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        let l = self.load.iter().zip(&state.u).map(|(f, u)| f * u).sum();
        (a, l)
    }

    pub fn metabolic_energy(&self, c: &[f64]) -> f64 {
        let p = &self.params;
        c.iter()
            .zip(self.space.cell_areas())
            .map(|(ck, area)| area * p.nu / p.gamma * (ck * ck + p.eps).powf(0.5 * p.gamma))
            .sum()
    }

    /// `(1/p) int |grad u|^p - l(u)`.
    pub fn plap_energy(&self, u: &[f64], p: f64) -> f64 {
        let sp = &self.space;
        let mut e = 0.0;
        for cell in 0..sp.num_cells() {
            for q in sp.qpoints(cell) {
                let g = sp.grad_at(cell, q, u);
                e += q.jxw * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p);
            }
        }
        e / p - self.load.iter().zip(u).map(|(f, u)| f * u).sum::<f64>()
    }

    /// `|| |grad u|^2 - c^{gamma-1} ||_{L2}` at the quadrature points.
    pub fn steady_residual(&self, state: &State) -> f64 {
        let sp = &self.space;
        let gm1 = self.params.gamma - 1.0;
        let mut s = 0.0;
        for cell in 0..sp.num_cells() {
            let cpow = state.c[cell].max(0.0).powf(gm1);
            for q in sp.qpoints(cell) {
                let g = sp.grad_at(cell, q, &state.u);
                let d = g[0] * g[0] + g[1] * g[1] - cpow;
                s += q.jxw * d * d;
            }
        }
        s.sqrt()
    }

    /// Pointwise steady defect projected onto P0.
    pub fn steady_defect_p0(&self, state: &State) -> Vec<f64> {
        let gm1 = self.params.gamma - 1.0;
        crate::fem::project_p0_with(&self.space, |cell, q| {
            let g = self.space.grad_at(cell, q, &state.u);
            g[0] * g[0] + g[1] * g[1] - state.c[cell].max(0.0).powf(gm1)
        })
    }

    /// Area-weighted L2 norm of a P0 field.
    pub fn l2_norm_p0(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(self.space.cell_areas())
            .map(|(x, a)| a * x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Norm of the stacked residual.
    pub fn residual_norm(&self, rc: &[f64], ru: &[f64]) -> f64 {
        (norm2(rc).powi(2) + norm2(ru).powi(2)).sqrt()
    }
}
