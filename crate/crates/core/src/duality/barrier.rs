//! Log-barrier Newton solver for the epigraph programs behind the smooth duals.
//!
//! Both the Q-function objective and the value-parametrized dual reduce to
//!
//! ```text
//! min  <c, z> + t        s.t.  eps log sum_a U exp(rho(s,a)/eps) <= eps log(1 + t/eps)  for all s
//! min  <c, z> + pen(rho)                                               (quadratic penalties)
//! ```
//!
//! with `rho = r + B z` affine, plus optional ordering constraints
//! `z_i < z_j`. The exponential constraint `eps (sum_a U e^{rho/eps} - 1) <= t`
//! is kept in log form, which is close to linear and far better conditioned.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::regularizers::Objective;

const BARRIER_GROWTH: f64 = 10.0;
const BARRIER_MAX_STAGES: usize = 40;
const NEWTON_MAX_STEPS: usize = 200;
const NEWTON_TOL: f64 = 1e-12;
const ARMIJO: f64 = 0.25;
const MIN_STEP: f64 = 1e-14;
/// Temperature ratio between consecutive continuation stages.
const CONTINUATION_RATIO: f64 = 2.0;
/// Loose on purpose: warm starts close to the boundary condition the next
/// stage badly.
const CONTINUATION_TOL: f64 = 1e-3;

#[derive(Clone)]
pub(crate) struct Epigraph<'a> {
    obj: &'a Objective,
    eps: f64,
    n_a: usize,
    cost: Vec<f64>,
    offset: &'a [f64],
    /// One sparse row of `B` per state-action pair.
    rows: Vec<Vec<(usize, f64)>>,
    /// Pairs `(i, j)` constrained to `z_i < z_j`.
    ordered: Vec<(usize, usize)>,
    entropic: bool,
}

pub(crate) struct BarrierSolution {
    /// Minimizer over the `z` block (without `t`).
    pub z: Vec<f64>,
    pub newton_steps: usize,
    pub certified: bool,
}

impl<'a> Epigraph<'a> {
    /// `obj` must be penalty-form; its reward is the offset of `rho`.
    pub(crate) fn new(
        obj: &'a Objective,
        cost: Vec<f64>,
        rows: Vec<Vec<(usize, f64)>>,
        ordered: Vec<(usize, usize)>,
    ) -> Self {
        Self {
            obj,
            eps: obj.epsilon().expect("penalty-form objectives carry epsilon"),
            n_a: obj.shape().1,
            cost,
            offset: obj.reward().expect("penalty-form objectives carry a reward").as_slice(),
            rows,
            ordered,
            entropic: matches!(obj, Objective::EntropySac { .. }),
        }
    }

    fn n_vars(&self) -> usize {
        self.cost.len()
    }

    fn dim(&self) -> usize {
        self.n_vars() + usize::from(self.entropic)
    }

    fn n_constraints(&self) -> usize {
        self.ordered.len() + if self.entropic { self.rows.len() / self.n_a } else { 0 }
    }

    fn rho(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(self.offset)
            .map(|(row, r)| r + row.iter().map(|(i, c)| c * z[*i]).sum::<f64>())
            .collect()
    }

    /// `eps log sum_a U exp(rho(s,a)/eps)` per state.
    fn log_partitions(&self, rho: &[f64]) -> Vec<f64> {
        rho.chunks(self.n_a)
            .map(|row| {
                let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = row.iter().map(|h| ((h - top) / self.eps).exp()).sum();
                top + self.eps * (sum / self.n_a as f64).ln()
            })
            .collect()
    }

    /// `eps log(1 + t/eps)`.
    fn budget(&self, t: f64) -> Option<f64> {
        (t > -self.eps).then(|| self.eps * (t / self.eps).ln_1p())
    }

    /// Curvature weight of the quadratic penalty at pair `x`.
    fn penalty_weight(&self, x: usize) -> f64 {
        match self.obj {
            Objective::Tsallis2 { epsilon, .. } => 1.0 / (2.0 * epsilon),
            Objective::Buffer { epsilon, nu, .. } => 2.0 * nu.as_slice()[x] / epsilon,
            _ => unreachable!("only quadratic penalties"),
        }
    }

    /// Minimizes from `start`, which must satisfy the ordering constraints
    /// strictly, until the barrier bound `(#constraints + lambda^2 / 2) / tau`
    /// is below `tol`, with `lambda` the Newton decrement at the last iterate.
    ///
    /// The entropic start is exponential in `max rho / eps`, so residuals
    /// far above `eps` are first absorbed at a temperature of their own size,
    /// which is then halved down to `eps` with warm starts.
    pub(crate) fn solve(&self, start: &[f64], tol: f64) -> Result<BarrierSolution> {
        let mut z = start.to_vec();
        let mut newton_steps = 0;
        if self.entropic {
            let mut stage_eps = self.rho(start).into_iter().fold(0.0, f64::max);
            while stage_eps > CONTINUATION_RATIO * self.eps {
                let stage = Epigraph {
                    eps: stage_eps,
                    ..self.clone()
                };
                let solution = stage.solve_at_temperature(&z, CONTINUATION_TOL)?;
                z = solution.z;
                newton_steps += solution.newton_steps;
                stage_eps /= CONTINUATION_RATIO;
            }
        }
        let mut solution = self.solve_at_temperature(&z, tol)?;
        solution.newton_steps += newton_steps;
        Ok(solution)
    }

    fn solve_at_temperature(&self, start: &[f64], tol: f64) -> Result<BarrierSolution> {
        let mut z = start.to_vec();
        if self.entropic {
            let worst = self
                .log_partitions(&self.rho(&z))
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            z.push(self.eps * (worst / self.eps + 1.0).exp_m1());
        }
        let mut tau = 1.0;
        let mut newton_steps = 0;
        let mut certified = false;
        for _ in 0..BARRIER_MAX_STAGES {
            let (steps, half_decrement) = self.center(&mut z, tau)?;
            newton_steps += steps;
            // Suboptimality bound of an approximately centered point.
            if (self.n_constraints() as f64 + half_decrement) / tau < tol {
                certified = true;
                break;
            }
            tau *= BARRIER_GROWTH;
        }
        z.truncate(self.n_vars());
        Ok(BarrierSolution {
            z,
            newton_steps,
            certified,
        })
    }

    /// `tau f0 - sum log(-f_i)`, or `None` outside the domain.
    fn barrier(&self, z: &[f64], tau: f64) -> Option<f64> {
        let rho = self.rho(z);
        let mut f0: f64 = self.cost.iter().zip(z).map(|(c, v)| c * v).sum();
        let mut logs = 0.0;
        for &(i, j) in &self.ordered {
            let slack = z[j] - z[i];
            if !(slack > 0.0) {
                return None;
            }
            logs += slack.ln();
        }
        if self.entropic {
            let t = z[self.n_vars()];
            f0 += t;
            let budget = self.budget(t)?;
            for lse in self.log_partitions(&rho) {
                let slack = budget - lse;
                if !(slack > 0.0) {
                    return None;
                }
                logs += slack.ln();
            }
        } else {
            f0 += self.obj.penalty_conjugate(&rho).ok()?;
        }
        let value = tau * f0 - logs;
        value.is_finite().then_some(value)
    }

    fn gradient_hessian(&self, z: &[f64], tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (i, c) in self.cost.iter().enumerate() {
            grad[i] += tau * c;
        }
        for &(i, j) in &self.ordered {
            let slack = z[j] - z[i];
            grad[i] += 1.0 / slack;
            grad[j] -= 1.0 / slack;
            let h = 1.0 / (slack * slack);
            hess[(i, i)] += h;
            hess[(j, j)] += h;
            hess[(i, j)] -= h;
            hess[(j, i)] -= h;
        }
        let rho = self.rho(z);
        let add_outer = |hess: &mut DMatrix<f64>, a: &[(usize, f64)], w: f64| {
            for (i, ci) in a {
                for (j, cj) in a {
                    hess[(*i, *j)] += w * ci * cj;
                }
            }
        };
        if self.entropic {
            // c_s = lse_s(rho) - eps log(1 + t/eps) < 0.
            let eps = self.eps;
            let t_idx = n - 1;
            let t = z[t_idx];
            grad[t_idx] += tau;
            let budget = self.budget(t).expect("iterate is interior");
            let lse = self.log_partitions(&rho);
            for (s, row) in rho.chunks(self.n_a).enumerate() {
                let slack = budget - lse[s];
                let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = row.iter().map(|h| ((h - top) / eps).exp()).collect();
                let total: f64 = w.iter().sum();
                let mut dc: Vec<(usize, f64)> = Vec::new();
                for a in 0..self.n_a {
                    let x = s * self.n_a + a;
                    let p = w[a] / total;
                    dc.extend(self.rows[x].iter().map(|(i, c)| (*i, p * c)));
                    add_outer(&mut hess, &self.rows[x], p / eps / slack);
                }
                add_outer(&mut hess, &dc, -1.0 / eps / slack);
                dc.push((t_idx, -eps / (eps + t)));
                hess[(t_idx, t_idx)] += eps / ((eps + t) * (eps + t)) / slack;
                for (i, c) in &dc {
                    grad[*i] += c / slack;
                }
                add_outer(&mut hess, &dc, 1.0 / (slack * slack));
            }
        } else {
            for (x, row) in self.rows.iter().enumerate() {
                let h = self.penalty_weight(x);
                for (i, c) in row {
                    grad[*i] += tau * h * rho[x] * c;
                }
                add_outer(&mut hess, row, tau * h);
            }
        }
        (grad, hess)
    }

    /// Damped Newton on the barrier objective. Returns the number of steps
    /// and half the squared Newton decrement at the final iterate.
    fn center(&self, z: &mut Vec<f64>, tau: f64) -> Result<(usize, f64)> {
        let mut current = self
            .barrier(z, tau)
            .ok_or(Error::Singular("barrier start is infeasible"))?;
        for step in 1..=NEWTON_MAX_STEPS {
            let (grad, hess) = self.gradient_hessian(z, tau);
            let (direction, exact) = match hess.clone().cholesky() {
                Some(chol) => (-chol.solve(&grad), true),
                None => (
                    -hess.lu().solve(&grad).ok_or(Error::Singular("barrier Newton step"))?,
                    false,
                ),
            };
            let decrement = -grad.dot(&direction);
            if decrement.is_nan() || (!exact && decrement <= 0.0) {
                return Ok((step, f64::INFINITY));
            }
            if decrement <= 2.0 * NEWTON_TOL {
                return Ok((step, decrement.max(0.0) / 2.0));
            }
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = z.iter().zip(direction.iter()).map(|(a, d)| a + t * d).collect();
                if let Some(value) = self.barrier(&trial, tau) {
                    if value <= current - ARMIJO * t * decrement {
                        *z = trial;
                        current = value;
                        break;
                    }
                }
                t *= 0.5;
                if t < MIN_STEP {
                    // Rounding floor reached at this barrier weight.
                    return Ok((step, decrement / 2.0));
                }
            }
        }
        let (grad, hess) = self.gradient_hessian(z, tau);
        let half_decrement = hess
            .cholesky()
            .map_or(f64::INFINITY, |chol| grad.dot(&chol.solve(&grad)) / 2.0);
        Ok((NEWTON_MAX_STEPS, half_decrement))
    }
}
