/// Points and weights on a reference cell.
///
/// Quadrilateral rules live on `[-1, 1]^2` (weights sum to 4), triangle rules
/// on the unit simplex `{x, y >= 0, x + y <= 1}` (weights sum to 1/2).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly (per variable for tensor rules).
    pub degree: usize,
}

impl QuadratureRule {
    /// Tensor Gauss–Legendre rule with `n` points per direction, `n` in 1..=3.
    pub fn gauss_quad(n: usize) -> Self {
        let (x, w): (Vec<f64>, Vec<f64>) = match n {
            1 => (vec![0.0], vec![2.0]),
            2 => {
                let a = 1.0 / 3f64.sqrt();
                (vec![-a, a], vec![1.0, 1.0])
            }
            3 => {
                let a = (0.6f64).sqrt();
                (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            _ => panic!("gauss_quad supports 1 to 3 points per direction, got {n}"),
        };
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 1,
        }
    }

    /// Three interior points, exact for quadratics.
    pub fn triangle3() -> Self {
        Self {
            points: vec![
                [1.0 / 6.0, 1.0 / 6.0],
                [2.0 / 3.0, 1.0 / 6.0],
                [1.0 / 6.0, 2.0 / 3.0],
            ],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // exact integral of x^a over [-1, 1]
    fn mono1d(a: i32) -> f64 {
        if a % 2 == 1 {
            0.0
        } else {
            2.0 / (a as f64 + 1.0)
        }
    }

    #[test]
    fn tensor_rules_integrate_monomials() {
        for n in 1..=3 {
            let q = QuadratureRule::gauss_quad(n);
            assert!((q.weights.iter().sum::<f64>() - 4.0).abs() < 1e-14);
            let deg = q.degree as i32;
            for a in 0..=deg {
                for b in 0..=deg {
                    let s: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(p, w)| w * p[0].powi(a) * p[1].powi(b))
                        .sum();
                    assert!(
                        (s - mono1d(a) * mono1d(b)).abs() < 1e-14,
                        "n={n} a={a} b={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn two_point_rule_not_exact_beyond_degree_three() {
        let q = QuadratureRule::gauss_quad(2);
        let s: f64 = q
            .points
            .iter()
            .zip(&q.weights)
            .map(|(p, w)| w * p[0].powi(4))
            .sum();
        assert!((s - 2.0 * mono1d(4)).abs() > 1e-3);
    }

    #[test]
    fn triangle_rule_integrates_quadratics() {
        let q = QuadratureRule::triangle3();
        // int x^a y^b over the simplex = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for a in 0..=2u32 {
            for b in 0..=(2 - a) {
                let s: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((s - exact).abs() < 1e-15);
            }
        }
    }
}
