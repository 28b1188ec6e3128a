use minilp::{ComparisonOp, OptimizationDirection, Problem, Solution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::OccupancyMeasure;
use crate::metric::MetricSpec;

/// Masses below this are treated as outside the support.
const SUPPORT_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportResult {
    /// Optimal cost under ground cost `L d`.
    pub cost: f64,
    /// An L-Lipschitz witness `h` with `<h, mu> - <h, nu> = cost`.
    pub potential: Vec<f64>,
}

pub(crate) fn solve_lp(problem: &Problem, context: &str) -> Result<Solution> {
    problem.solve().map_err(|e| Error::Lp(format!("{context}: {e}")))
}

/// Exact optimal transport between two distributions on `X` with ground cost
/// `L d(x, y)`, which on a finite metric space equals the Lipschitz IPM
/// `sup_{Lip(h) <= L} <h, mu - nu>`.
///
/// The cost comes from the primal transport program on the supports. The
/// witness comes from the Kantorovich-Rubinstein dual program, then is
/// replaced by its L-Lipschitz envelope `min_y h(y) + L d(x, y)` so that the
/// Lipschitz bound holds exactly rather than to solver tolerance.
pub fn transport_distance(
    mu: &OccupancyMeasure,
    nu: &OccupancyMeasure,
    metric: &MetricSpec,
) -> Result<TransportResult> {
    let n = mu.len();
    if nu.len() != n || metric.len() != n {
        return Err(Error::InvalidMetric(format!(
            "transport between measures of size {} and {} under a metric on {} points",
            n,
            nu.len(),
            metric.len()
        )));
    }
    let (a, b) = (mu.as_slice(), nu.as_slice());
    if a == b {
        return Ok(TransportResult {
            cost: 0.0,
            potential: vec![0.0; n],
        });
    }
    let scale = a.iter().sum::<f64>() / b.iter().sum::<f64>();

    let sources: Vec<usize> = (0..n).filter(|&x| a[x] > SUPPORT_TOL).collect();
    let sinks: Vec<usize> = (0..n).filter(|&y| b[y] > SUPPORT_TOL).collect();
    let mut primal = Problem::new(OptimizationDirection::Minimize);
    let plan: Vec<Vec<_>> = sources
        .iter()
        .map(|&x| {
            sinks
                .iter()
                .map(|&y| primal.add_var(metric.cost(x, y), (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    for (i, &x) in sources.iter().enumerate() {
        let row: Vec<_> = plan[i].iter().map(|&v| (v, 1.0)).collect();
        primal.add_constraint(row.as_slice(), ComparisonOp::Eq, a[x]);
    }
    for (j, &y) in sinks.iter().enumerate() {
        let col: Vec<_> = plan.iter().map(|row| (row[j], 1.0)).collect();
        primal.add_constraint(col.as_slice(), ComparisonOp::Eq, b[y] * scale);
    }
    let cost = solve_lp(&primal, "transport plan")?.objective().max(0.0);

    let mut dual = Problem::new(OptimizationDirection::Maximize);
    let h: Vec<_> = (0..n)
        .map(|x| {
            // Potentials are defined up to a constant; pin the first.
            let bounds = if x == 0 {
                (0.0, 0.0)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            dual.add_var(a[x] - b[x] * scale, bounds)
        })
        .collect();
    for x in 0..n {
        for y in 0..n {
            if x != y {
                dual.add_constraint(&[(h[x], 1.0), (h[y], -1.0)][..], ComparisonOp::Le, metric.cost(x, y));
            }
        }
    }
    let solution = solve_lp(&dual, "transport potential")?;
    let raw: Vec<f64> = h.iter().map(|&v| *solution.var_value(v)).collect();
    let potential = (0..n)
        .map(|x| (0..n).map(|y| raw[y] + metric.cost(x, y)).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(TransportResult { cost, potential })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_metric(points: &[f64], l: f64) -> MetricSpec {
        let n = points.len();
        let dist = (0..n * n).map(|k| (points[k / n] - points[k % n]).abs()).collect();
        MetricSpec::new(n, dist, l).unwrap()
    }

    fn measure(values: Vec<f64>) -> OccupancyMeasure {
        let n = values.len();
        OccupancyMeasure::new(1, n, values).unwrap()
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let m = line_metric(&[0.0, 1.0, 3.0], 1.0);
        let mu = measure(vec![0.2, 0.3, 0.5]);
        let res = transport_distance(&mu, &mu, &m).unwrap();
        assert_eq!(res.cost, 0.0);
        assert!(res.potential.iter().all(|&h| h == res.potential[0]));
    }

    #[test]
    fn point_masses_pay_the_distance() {
        let m = line_metric(&[0.0, 1.0, 3.0], 2.0);
        let res = transport_distance(&measure(vec![1.0, 0.0, 0.0]), &measure(vec![0.0, 0.0, 1.0]), &m).unwrap();
        assert!((res.cost - 6.0).abs() < 1e-12);
        assert!((res.potential[0] - res.potential[2] - 6.0).abs() < 1e-9);
        assert!(m.is_lipschitz(&res.potential));
    }

    #[test]
    fn one_dimensional_closed_form() {
        // On the line, W1 is the integral of the CDF difference.
        let points = [0.0, 0.5, 2.0, 2.5];
        let m = line_metric(&points, 1.0);
        let mu = measure(vec![0.4, 0.1, 0.3, 0.2]);
        let nu = measure(vec![0.1, 0.2, 0.2, 0.5]);
        let mut cdf = 0.0;
        let mut expected = 0.0;
        for i in 0..3 {
            cdf += mu.as_slice()[i] - nu.as_slice()[i];
            expected += cdf.abs() * (points[i + 1] - points[i]);
        }
        let res = transport_distance(&mu, &nu, &m).unwrap();
        assert!((res.cost - expected).abs() < 1e-9);
        let witness: f64 = (0..4)
            .map(|x| res.potential[x] * (mu.as_slice()[x] - nu.as_slice()[x]))
            .sum();
        assert!((witness - res.cost).abs() < 1e-9);
    }
}
