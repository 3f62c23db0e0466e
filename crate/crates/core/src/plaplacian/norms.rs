use crate::fem::{Q1Space, QuadratureRule};
use crate::mesh::Point;

fn integrate(space: &Q1Space, mut f: impl FnMut(usize, &crate::fem::QPoint) -> f64) -> f64 {
    let rule = QuadratureRule::gauss_quad(3);
    let mut s = 0.0;
    for cell in 0..space.num_cells() {
        for q in space.qpoints_with(cell, &rule) {
            s += q.jxw * f(cell, &q);
        }
    }
    s
}

/// `||u_h - u||_{L^p}` with 3x3 Gauss.
pub fn error_lp(space: &Q1Space, uh: &[f64], exact: &dyn Fn(Point) -> f64, p: f64) -> f64 {
    integrate(space, |cell, q| {
        (space.value_at(cell, q, uh) - exact(q.x)).abs().powf(p)
    })
    .powf(1.0 / p)
}

/// `|u_h - u|_{W^{1,p}}`, the L^p norm of the gradient error.
pub fn error_w1p(space: &Q1Space, uh: &[f64], exact_grad: &dyn Fn(Point) -> Point, p: f64) -> f64 {
    integrate(space, |cell, q| {
        let g = space.grad_at(cell, q, uh);
        let e = exact_grad(q.x);
        ((g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2)).powf(0.5 * p)
    })
    .powf(1.0 / p)
}

/// `( int (|grad u| + |grad(u - u_h)|)^{p-2} |grad(u - u_h)|^2 )^{1/2}`.
pub fn error_quasinorm(
    space: &Q1Space,
    uh: &[f64],
    exact_grad: &dyn Fn(Point) -> Point,
    p: f64,
) -> f64 {
    integrate(space, |cell, q| {
        let g = space.grad_at(cell, q, uh);
        let e = exact_grad(q.x);
        let de = ((g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2)).sqrt();
        let ge = (e[0] * e[0] + e[1] * e[1]).sqrt();
        (ge + de).powf(p - 2.0) * de * de
    })
    .sqrt()
}

/// Least-squares slope of `log err` against `log h`.
pub fn fit_rate(h: &[f64], err: &[f64]) -> Option<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
