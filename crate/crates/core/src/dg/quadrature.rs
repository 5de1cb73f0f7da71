//! One-dimensional Gauss rules and Lagrange bases on the reference interval [0, 1].
//! Weights are normalized to sum to one.

/// Legendre polynomial P_n(x) and its derivative on [−1, 1].
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // Endpoint value P_n'(±1) = (±1)^{n+1} n(n+1)/2.
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// Gauss–Legendre rule with `n` points: exact for degree ≤ 2n − 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss–Lobatto–Legendre rule with `m ≥ 2` points, endpoints included: exact for
/// degree ≤ 2m − 3.
pub fn gauss_lobatto(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2, "Lobatto rules need both endpoints");
    let n = m - 1;
    let nf = n as f64;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    nodes[m - 1] = 1.0;
    for i in 1..n {
        // Interior nodes are the roots of P_n'.
        let mut x = -(std::f64::consts::PI * i as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            // P_n'' from the Legendre ODE.
            let d2p = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (x + 1.0);
    }
    for i in 0..m {
        let x = 2.0 * nodes[i] - 1.0;
        let (p, _) = legendre(n, x);
        weights[i] = 1.0 / (nf * (nf + 1.0) * p * p);
    }
    (nodes, weights)
}

/// Lagrange basis through distinct nodes, evaluated in barycentric form.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[f64]) -> Self {
        let bary = (0..nodes.len())
            .map(|j| {
                let prod: f64 = (0..nodes.len())
                    .filter(|&k| k != j)
                    .map(|k| nodes[j] - nodes[k])
                    .product();
                1.0 / prod
            })
            .collect();
        Self {
            nodes: nodes.to_vec(),
            bary,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// ℓ_j(x) for every j.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        if let Some(j) = self.nodes.iter().position(|&n| n == x) {
            let mut out = vec![0.0; self.len()];
            out[j] = 1.0;
            return out;
        }
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.bary)
            .map(|(n, b)| b / (x - n))
            .collect();
        let s: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / s).collect()
    }

    /// ℓ_j'(x) for every j.
    pub fn eval_derivative(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                // Product rule on ℓ_j(x) = b_j Π_{k≠j}(x − x_k).
                let mut sum = 0.0;
                for m in (0..n).filter(|&m| m != j) {
                    let prod: f64 = (0..n)
                        .filter(|&k| k != j && k != m)
                        .map(|k| x - self.nodes[k])
                        .product();
                    sum += prod;
                }
                self.bary[j] * sum
            })
            .collect()
    }

    /// Row r, column j: ℓ_j(targets[r]).
    pub fn interpolation_matrix(&self, targets: &[f64]) -> Vec<Vec<f64>> {
        targets.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Degree-k nodal basis on N = k+1 Gauss–Legendre points plus the operators the DG
/// update needs.
#[derive(Clone, Debug)]
pub struct NodalBasis {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// ℓ_q(0).
    pub left: Vec<f64>,
    /// ℓ_q(1).
    pub right: Vec<f64>,
    /// d[r][q] = ℓ_q'(ξ_r).
    pub dmat: Vec<Vec<f64>>,
    /// Lobatto rule used for the realizability analysis.
    pub lobatto_nodes: Vec<f64>,
    pub lobatto_weights: Vec<f64>,
    /// Row r: basis evaluated at Lobatto node r.
    pub to_lobatto: Vec<Vec<f64>>,
    pub lagrange: LagrangeBasis,
}

impl NodalBasis {
    /// `lobatto_points` is the size of the companion Lobatto rule (at least 2).
    pub fn new(degree: usize, lobatto_points: usize) -> Self {
        let (nodes, weights) = gauss_legendre(degree + 1);
        let lagrange = LagrangeBasis::new(&nodes);
        let (lobatto_nodes, lobatto_weights) = gauss_lobatto(lobatto_points.max(2));
        Self {
            degree,
            left: lagrange.eval(0.0),
            right: lagrange.eval(1.0),
            dmat: nodes.iter().map(|&x| lagrange.eval_derivative(x)).collect(),
            to_lobatto: lagrange.interpolation_matrix(&lobatto_nodes),
            lobatto_nodes,
            lobatto_weights,
            nodes,
            weights,
            lagrange,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Endpoint weight of the Lobatto rule, ŵ_M.
    pub fn lobatto_end_weight(&self) -> f64 {
        self.lobatto_weights[0]
    }
}

/// ⌈(k+5)/2⌉: Lobatto size integrating degree k+2 exactly.
pub fn energy_lobatto_points(k: usize) -> usize {
    (k + 6) / 2
}

/// ⌈(k+3)/2⌉: Lobatto size integrating degree k exactly.
pub fn space_lobatto_points(k: usize) -> usize {
    ((k + 4) / 2).max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn integrate(rule: &(Vec<f64>, Vec<f64>), p: usize) -> f64 {
        rule.0
            .iter()
            .zip(&rule.1)
            .map(|(x, w)| w * x.powi(p as i32))
            .sum()
    }

    #[test]
    fn legendre_rules_are_exact_to_degree_2n_minus_1() {
        for n in 1..=8 {
            let rule = gauss_legendre(n);
            assert_relative_eq!(rule.1.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for p in 0..2 * n {
                assert_relative_eq!(integrate(&rule, p), 1.0 / (p as f64 + 1.0), epsilon = 1e-14);
            }
            if n <= 4 {
                // The defect (n!)⁴/((2n+1)((2n)!)³) is still resolvable here.
                assert!((integrate(&rule, 2 * n) - 1.0 / (2 * n + 1) as f64).abs() > 1e-12);
            }
        }
    }

    #[test]
    fn lobatto_rules_are_exact_to_degree_2m_minus_3() {
        for m in 2..=8 {
            let rule = gauss_lobatto(m);
            assert_eq!(rule.0[0], 0.0);
            assert_eq!(rule.0[m - 1], 1.0);
            for p in 0..=(2 * m - 3) {
                assert_relative_eq!(integrate(&rule, p), 1.0 / (p as f64 + 1.0), epsilon = 1e-14);
            }
        }
        // Three points: Simpson's rule, endpoint weight 1/6.
        assert_relative_eq!(gauss_lobatto(3).1[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(gauss_lobatto(4).1[0], 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn lobatto_sizes() {
        assert_eq!(space_lobatto_points(2), 3);
        assert_eq!(energy_lobatto_points(2), 4);
        assert_eq!(space_lobatto_points(1), 2);
        assert_eq!(energy_lobatto_points(1), 3);
        for k in 0..6 {
            assert!(2 * energy_lobatto_points(k) >= k + 5);
            assert!(2 * space_lobatto_points(k) >= k + 3);
        }
    }

    #[test]
    fn basis_operators() {
        let b = NodalBasis::new(2, 3);
        assert_relative_eq!(b.left.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.right.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        for row in &b.dmat {
            assert!(row.iter().sum::<f64>().abs() < 1e-13);
        }
        // Differentiating x² at the nodes.
        let f: Vec<f64> = b.nodes.iter().map(|x| x * x).collect();
        for (r, row) in b.dmat.iter().enumerate() {
            let d: f64 = row.iter().zip(&f).map(|(a, b)| a * b).sum();
            assert_relative_eq!(d, 2.0 * b.nodes[r], epsilon = 1e-13);
        }
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_polynomials(c in prop::array::uniform4(-3.0..3.0f64), x in 0.0..1.0f64) {
            let b = NodalBasis::new(3, 4);
            let poly = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
            let vals: Vec<f64> = b.nodes.iter().map(|&t| poly(t)).collect();
            let l = b.lagrange.eval(x);
            let got: f64 = l.iter().zip(&vals).map(|(a, b)| a * b).sum();
            prop_assert!((got - poly(x)).abs() < 1e-12);
            let dl = b.lagrange.eval_derivative(x);
            let dgot: f64 = dl.iter().zip(&vals).map(|(a, b)| a * b).sum();
            let dexact = c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x;
            prop_assert!((dgot - dexact).abs() < 1e-10);
        }
    }
}
