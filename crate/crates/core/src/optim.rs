//! First-order minimizer for smooth convex duals.
//!
//! Gradient descent with an Armijo backtracking line search. The trial step
//! of each iteration is the Barzilai-Borwein step from the previous pair of
//! iterates, which is then halved until sufficient decrease holds.

use crate::math::{dot, inf_norm};

/// Stopping rule and line-search parameters for the dual minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once the gradient infinity-norm is at or below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Trial step used on the first iteration.
    pub initial_step: f64,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
    /// Step multiplier applied on each backtracking rejection.
    pub backtrack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_iterations: 10_000,
            initial_step: 1.0,
            armijo: 1e-4,
            backtrack: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(crate::Error::invalid("solver tolerance must be > 0"));
        }
        if self.max_iterations < 1 {
            return Err(crate::Error::invalid("solver max_iterations must be >= 1"));
        }
        if !(self.initial_step > 0.0) || !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(crate::Error::invalid("invalid line-search parameters"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(crate::Error::invalid("backtrack factor must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Minimization {
    pub point: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f`, which returns `(value, gradient)` at a point.
pub fn minimize<F>(mut f: F, start: Vec<f64>, cfg: &SolverConfig) -> Minimization
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = start;
    let (mut fx, mut g) = f(&x);
    let mut gnorm = inf_norm(&g);
    let mut step = cfg.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;

    while gnorm > cfg.tolerance && iterations < cfg.max_iterations {
        if let Some((px, pg)) = &prev {
            let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-10, 1e10);
            } else {
                step = (step * 2.0).min(1e10);
            }
        }
        let gg = dot(&g, &g);
        let mut accepted = None;
        let mut t = step;
        // 80 halvings take any sane step below f64 resolution of x.
        for _ in 0..80 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let (fc, gc) = f(&cand);
            let sufficient = fc <= fx - cfg.armijo * t * gg;
            // Near the optimum the decrease drops below the resolution of f;
            // fall back to requiring a smaller gradient there.
            let flat = (fc - fx).abs() <= 1e-13 * fx.abs().max(1.0) && inf_norm(&gc) < gnorm;
            if fc.is_finite() && (sufficient || flat) {
                accepted = Some((cand, fc, gc));
                break;
            }
            t *= cfg.backtrack;
        }
        iterations += 1;
        let Some((cand, fc, gc)) = accepted else {
            // No decrease representable: the iterate is as good as it gets.
            break;
        };
        step = t;
        prev = Some((std::mem::replace(&mut x, cand), std::mem::replace(&mut g, gc)));
        fx = fc;
        gnorm = inf_norm(&g);
    }

    Minimization {
        converged: gnorm <= cfg.tolerance,
        point: x,
        value: fx,
        grad_norm: gnorm,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_ill_conditioned_quadratic() {
        let scales = [1.0, 10.0, 300.0];
        let res = minimize(
            |x| {
                let v = x.iter().zip(&scales).map(|(a, s)| 0.5 * s * (a - 1.0).powi(2)).sum();
                let g = x.iter().zip(&scales).map(|(a, s)| s * (a - 1.0)).collect();
                (v, g)
            },
            vec![0.0; 3],
            &SolverConfig::default(),
        );
        assert!(res.converged);
        assert!(res.point.iter().all(|p| (p - 1.0).abs() < 1e-5));
    }

    #[test]
    fn reports_non_convergence() {
        // Linear objective: unbounded below, gradient never vanishes.
        let cfg = SolverConfig {
            max_iterations: 20,
            ..SolverConfig::default()
        };
        let res = minimize(|x| (-x[0], vec![-1.0]), vec![0.0], &cfg);
        assert!(!res.converged);
        assert!(res.iterations <= 20);
    }
}
