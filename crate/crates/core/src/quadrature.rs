//! Normalized Hermite functions and Gauss–Hermite quadrature.
//!
//! The Hermite functions φ_n(y) = (2ⁿ n! √π)^{-1/2} H_n(y) e^{-y²/2} are
//! generated by their three-term recurrence. The polynomial part is carried
//! with a running exponent so that neither the factorials nor e^{-y²/2}
//! overflow or underflow for large n or |y|.

use std::f64::consts::PI;

const RESCALE: f64 = 1e150;
const LN_RESCALE: f64 = 345.387_763_949_107_0; // ln(1e150)

/// Fills `out[n]` with φ_n(y) for n = 0..out.len().
pub fn hermite_functions_into(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let gauss = -0.5 * y * y;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut log_scale = 0.0;
    out[0] = cur * gauss.exp();
    for k in 0..out.len() - 1 {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += LN_RESCALE;
        }
        out[k + 1] = cur * (gauss + log_scale).exp();
    }
}

/// φ_n(y) for n = 0..=n_max.
pub fn hermite_functions(n_max: usize, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    hermite_functions_into(y, &mut out);
    out
}

/// Returns (ln|φ_{n-1}(y)|, φ_n(y)/φ_{n-1}(y)) for n ≥ 1, robust to
/// under- and overflow.
fn top_pair(n: usize, y: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut log_scale = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += LN_RESCALE;
        }
    }
    (prev.abs().ln() + log_scale - 0.5 * y * y, cur / prev)
}

/// Gauss–Hermite rule for ∫ g(y) e^{-y²} dy.
///
/// `scaled_weights` are w_i e^{y_i²}, so ∫ f(y) dy ≈ Σ W_i f(y_i) for
/// integrands f that are a polynomial times e^{-y²}.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut pos = vec![0.0; m];
        let mut wts = vec![0.0; m];
        let mut z: f64 = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * pos[0],
                3 => 1.91 * z - 0.91 * pos[1],
                _ => 2.0 * z - pos[i - 2],
            };
            if n % 2 == 1 && i == m - 1 {
                z = 0.0;
            }
            let mut log_prev = 0.0;
            for _ in 0..200 {
                let (lp, ratio) = top_pair(n, z);
                log_prev = lp;
                // φ_n' = √(2n) φ_{n-1} − z φ_n, so Newton's step is
                // φ_n/φ_n' = ratio / (√(2n) − z·ratio).
                let dz = ratio / ((2.0 * nf).sqrt() - z * ratio);
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    log_prev = top_pair(n, z).0;
                    break;
                }
            }
            pos[i] = z;
            wts[i] = (-2.0 * log_prev - nf.ln()).exp();
        }
        let mut nodes = Vec::with_capacity(n);
        let mut scaled_weights = Vec::with_capacity(n);
        for i in 0..m {
            nodes.push(-pos[i]);
            scaled_weights.push(wts[i]);
        }
        for i in (0..n / 2).rev() {
            nodes.push(pos[i]);
            scaled_weights.push(wts[i]);
        }
        GaussHermite { nodes, scaled_weights }
    }

    /// Standard weights w_i = W_i e^{-y_i²}.
    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().zip(&self.scaled_weights).map(|(y, w)| w * (-y * y).exp()).collect()
    }

    /// ∫ f(x) dx for f shaped like a polynomial times e^{-((x−center)/scale)²}.
    pub fn integrate<T, F>(&self, center: f64, scale: f64, mut f: F) -> T
    where
        T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        let mut acc = T::default();
        for (y, w) in self.nodes.iter().zip(&self.scaled_weights) {
            acc = acc + f(center + scale * y) * (w * scale);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_order_closed_forms() {
        for &y in &[-2.3, -0.4, 0.0, 0.7, 3.1] {
            let f = hermite_functions(3, y);
            let g = (-0.5 * y * y).exp() * PI.powf(-0.25);
            assert_relative_eq!(f[0], g, epsilon = 1e-15);
            assert_relative_eq!(f[1], 2f64.sqrt() * y * g, epsilon = 1e-15);
            assert_relative_eq!(f[2], (2.0 * y * y - 1.0) / 2f64.sqrt() * g, epsilon = 1e-15);
            assert_relative_eq!(f[3], (2.0 * y * y * y - 3.0 * y) / 3f64.sqrt() * g, epsilon = 1e-15);
        }
    }

    #[test]
    fn peak_value() {
        assert_relative_eq!(hermite_functions(0, 0.0)[0], 0.751_125_544_464_942_5, epsilon = 1e-15);
    }

    #[test]
    fn no_overflow_at_high_order() {
        let f = hermite_functions(1000, 40.0);
        assert!(f.iter().all(|v| v.is_finite()));
        // Near the turning point √(2n+1) the top functions are O(n^{-1/12}).
        assert!(f[1000].abs() > 1e-3 && f[1000].abs() < 1.0);
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn rule_integrates_moments() {
        for n in [1usize, 2, 5, 20, 61, 240] {
            let gh = GaussHermite::new(n);
            let w = gh.weights();
            let sum: f64 = w.iter().sum();
            assert_relative_eq!(sum, PI.sqrt(), max_relative = 1e-12);
            if n >= 3 {
                let m2: f64 = gh.nodes.iter().zip(&w).map(|(x, w)| w * x * x).sum();
                assert_relative_eq!(m2, PI.sqrt() / 2.0, max_relative = 1e-12);
            }
            assert!(gh.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn known_largest_root() {
        let gh = GaussHermite::new(20);
        assert_relative_eq!(*gh.nodes.last().unwrap(), 5.387_480_890_011_233, epsilon = 1e-12);
    }

    #[test]
    fn hermite_orthonormality() {
        let n_max = 60;
        let gh = GaussHermite::new(2 * n_max + 2);
        let rows: Vec<Vec<f64>> = gh.nodes.iter().map(|&y| hermite_functions(n_max, y)).collect();
        for n in 0..=n_max {
            for m in 0..=n_max {
                let s: f64 = rows.iter().zip(&gh.scaled_weights).map(|(r, w)| w * r[n] * r[m]).sum();
                let want = if n == m { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-10, "<{n}|{m}> = {s}");
            }
        }
    }
}
