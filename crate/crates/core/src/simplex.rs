//! Geometry of flat simplices embedded in a higher-dimensional space, and
//! quadrature rules in barycentric coordinates.

/// Volume and barycentric-coordinate gradients of a flat simplex. The
/// gradients lie in the simplex's affine hull (they are tangential).
#[derive(Debug, Clone)]
pub struct SimplexGeometry {
    pub volume: f64,
    pub grads: Vec<Vec<f64>>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

/// Inverts a small symmetric positive definite matrix in place (row-major),
/// returning its determinant, or `None` when singular.
fn invert_spd(g: &mut [f64], n: usize) -> Option<f64> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = (0..n).fold(0.0f64, |s, i| s.max(g[i * n + i].abs()));
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|a, b| g[a * n + col].abs().partial_cmp(&g[b * n + col].abs()).unwrap())
            .unwrap();
        if g[piv * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                g.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        let p = g[col * n + col];
        det *= p;
        for k in 0..n {
            g[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = g[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        g[r * n + k] -= f * g[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    g.copy_from_slice(&inv);
    Some(det)
}

/// Volume of the simplex spanned by `points` (any number of points, any
/// ambient dimension), via the Gram determinant.
pub fn simplex_volume(points: &[&[f64]]) -> f64 {
    let d = points.len() - 1;
    if d == 0 {
        return 1.0;
    }
    let amb = points[0].len();
    let mut g = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            g[i * d + j] = (0..amb)
                .map(|k| (points[i + 1][k] - points[0][k]) * (points[j + 1][k] - points[0][k]))
                .sum();
        }
    }
    match invert_spd(&mut g, d) {
        Some(det) if det > 0.0 => det.sqrt() / factorial(d),
        _ => 0.0,
    }
}

/// Geometry of a non-degenerate simplex, or `None` when degenerate.
pub fn simplex_geometry(points: &[&[f64]]) -> Option<SimplexGeometry> {
    let d = points.len() - 1;
    let amb = points[0].len();
    let edges: Vec<Vec<f64>> = (1..=d)
        .map(|i| (0..amb).map(|k| points[i][k] - points[0][k]).collect())
        .collect();
    let mut g = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            g[i * d + j] = edges[i].iter().zip(&edges[j]).map(|(a, b)| a * b).sum();
        }
    }
    let h2 = (0..d).fold(0.0f64, |m, i| m.max(g[i * d + i]));
    let det = invert_spd(&mut g, d)?;
    // relative degeneracy test on the normalized Gram determinant
    if !(det > 1e-24 * h2.powi(d as i32)) {
        return None;
    }
    let volume = det.sqrt() / factorial(d);
    let mut grads = vec![vec![0.0; amb]; d + 1];
    for k in 0..d {
        for j in 0..d {
            let c = g[j * d + k];
            for a in 0..amb {
                grads[k + 1][a] += edges[j][a] * c;
            }
        }
    }
    for a in 0..amb {
        grads[0][a] = -(1..=d).map(|k| grads[k][a]).sum::<f64>();
    }
    Some(SimplexGeometry { volume, grads })
}

/// Quadrature on a simplex in barycentric coordinates; weights sum to one, so
/// `integral ~= volume * sum(w_q f(x_q))`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// A rule on the `dim`-simplex exact for polynomials of total degree `degree`.
    pub fn new(dim: usize, degree: usize) -> Self {
        match (dim, degree) {
            (0, _) => Self {
                points: vec![vec![1.0]],
                weights: vec![1.0],
            },
            (_, 0 | 1) => Self {
                points: vec![vec![1.0 / (dim + 1) as f64; dim + 1]],
                weights: vec![1.0],
            },
            (1, 2) => {
                let s = 0.5 / 3f64.sqrt();
                Self {
                    points: vec![vec![0.5 + s, 0.5 - s], vec![0.5 - s, 0.5 + s]],
                    weights: vec![0.5, 0.5],
                }
            }
            (2, 2) => Self::symmetric(3, 2.0 / 3.0, 1.0 / 6.0),
            (3, 2) => Self::symmetric(4, 0.585_410_196_624_968_5, 0.138_196_601_125_010_5),
            _ => Self::collapsed_gauss(dim, (degree + dim).div_ceil(2)),
        }
    }

    /// Orbit of `(a, b, ..., b)` with equal weights.
    fn symmetric(n: usize, a: f64, b: f64) -> Self {
        let points = (0..n)
            .map(|i| (0..n).map(|j| if i == j { a } else { b }).collect())
            .collect();
        Self {
            points,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Tensor Gauss-Legendre rule pulled back through the collapsed (Duffy)
    /// map from the unit cube; exact for degree `2n - dim` polynomials.
    pub fn collapsed_gauss(dim: usize, n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        let total = n.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let u: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let mut coords = vec![0.0; dim];
            let mut remaining = 1.0;
            for k in 0..dim {
                coords[k] = u[k] * remaining;
                remaining *= 1.0 - u[k];
            }
            // Jacobian: prod_k (1 - u_k)^(dim - 1 - k)
            let mut jac = 1.0;
            for k in 0..dim.saturating_sub(1) {
                jac *= (1.0 - u[k]).powi((dim - 1 - k) as i32);
            }
            let weight = idx.iter().map(|&i| w[i]).product::<f64>() * jac;
            let mut bary = Vec::with_capacity(dim + 1);
            bary.push(1.0 - coords.iter().sum::<f64>());
            bary.extend_from_slice(&coords);
            points.push(bary);
            weights.push(weight * factorial(dim));
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * p - pm1) / (t * t - 1.0);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}
