//! Gauss-Jacobi rules for Beta weights and tensor rules on the simplex.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, hypot, sqrt};

/// A quadrature rule for a probability weight: `E[f] ~ sum w_j f(t_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `n`-point Gauss rule for the `Beta(p, q)` law on `[0, 1]`, exact for
/// polynomials of degree `2n - 1`. Built with Golub-Welsch from the
/// Jacobi recurrence.
pub fn beta_rule(p: f64, q: f64, n: usize) -> Rule {
    assert!(p > 0.0 && q > 0.0 && n > 0);
    // Jacobi weight (1 - x)^a (1 + x)^b on [-1, 1]; t = (1 + x) / 2.
    let a = q - 1.0;
    let b = p - 1.0;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    diag[0] = (b - a) / (a + b + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        diag[k] = (b * b - a * a) / (s * (s + 2.0));
        let sq = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b) * (2.0 + a + b) * (3.0 + a + b))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off[k - 1] = sqrt(sq);
    }
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    symmetric_tridiagonal_eigen(&mut diag, &mut off, &mut first);
    let mut pairs: Vec<(f64, f64)> =
        diag.iter().zip(&first).map(|(x, v)| (0.5 * (1.0 + x), v * v)).collect();
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Implicit QL with Wilkinson shifts. On return `diag` holds the
/// eigenvalues and `first` the first components of the eigenvectors.
/// `off[i]` couples rows `i` and `i + 1`; its last entry is scratch.
fn symmetric_tridiagonal_eigen(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = fabs(diag[m]) + fabs(diag[m + 1]);
                if fabs(off[m]) + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations < 100, "tridiagonal QL did not converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = hypot(g, 1.0);
            g = diag[m] - diag[l] + off[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let bb = c * off[i];
                r = hypot(f, g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - bb;
                let f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

/// Tensor-product rule for `E[f(x)]` under `Dirichlet(alphas)`.
///
/// Uses stick breaking: `x_1 = B_1`, `x_j = B_j (1 - x_1 - ... - x_{j-1})`
/// with independent `B_j ~ Beta(alpha_j, alpha_{j+1} + ... + alpha_K)`, so a
/// polynomial of total degree `D` is integrated exactly once
/// `2 * nodes - 1 >= D`. Cost is `nodes^(K-1)` evaluations.
pub struct SimplexRule {
    rules: Vec<Rule>,
    components: usize,
}

impl SimplexRule {
    pub fn new(alphas: &[f64], nodes: usize) -> Self {
        let k = alphas.len();
        assert!(k >= 2);
        let mut rules = Vec::with_capacity(k - 1);
        for j in 0..k - 1 {
            let tail: f64 = alphas[j + 1..].iter().sum();
            rules.push(beta_rule(alphas[j], tail, nodes));
        }
        SimplexRule { rules, components: k }
    }

    pub fn expectation<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let mut x = vec![0.0; self.components];
        let mut acc = 0.0;
        self.recurse(0, 1.0, 1.0, &mut x, &mut f, &mut acc);
        acc
    }

    fn recurse<F: FnMut(&[f64]) -> f64>(
        &self,
        level: usize,
        remaining: f64,
        weight: f64,
        x: &mut [f64],
        f: &mut F,
        acc: &mut f64,
    ) {
        if level == self.rules.len() {
            x[level] = remaining;
            *acc += weight * f(x);
            return;
        }
        let rule = &self.rules[level];
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            x[level] = t * remaining;
            self.recurse(level + 1, remaining * (1.0 - t), weight * w, x, f, acc);
        }
    }
}
