//! Ground metrics on the flattened state-action space.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Slack allowed in symmetry and triangle-inequality checks.
pub const METRIC_TOL: f64 = 1e-9;

/// Slack allowed when testing whether a function is L-Lipschitz.
pub const LIPSCHITZ_TOL: f64 = 1e-7;

/// Spaces up to this size have every triple checked; larger ones are sampled.
const EXHAUSTIVE_TRIPLES: usize = 64;
const SAMPLED_TRIPLES: usize = 200_000;

/// A metric `d` on `X = S x A` (indexed row-major, `x = s * n_actions + a`)
/// together with a Lipschitz bound `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    n: usize,
    dist: Vec<f64>,
    lipschitz_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct MetricFile {
    dist: Vec<Vec<f64>>,
    lipschitz_bound: f64,
}

impl MetricSpec {
    pub fn new(n: usize, dist: Vec<f64>, lipschitz_bound: f64) -> Result<Self> {
        if n == 0 || dist.len() != n * n {
            return Err(Error::InvalidMetric(format!(
                "expected {n} x {n} distances, found {} entries",
                dist.len()
            )));
        }
        if !(lipschitz_bound > 0.0 && lipschitz_bound.is_finite()) {
            return Err(Error::InvalidMetric(format!(
                "lipschitz bound {lipschitz_bound} must be positive"
            )));
        }
        let spec = Self {
            n,
            dist,
            lipschitz_bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_nested(dist: Vec<Vec<f64>>, lipschitz_bound: f64) -> Result<Self> {
        let n = dist.len();
        if dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidMetric("distance matrix must be square".into()));
        }
        Self::new(n, dist.into_iter().flatten().collect(), lipschitz_bound)
    }

    /// `d((s,a), (s',a')) = w_state [s != s'] + w_action [a != a']`.
    pub fn product_discrete(
        n_states: usize,
        n_actions: usize,
        w_state: f64,
        w_action: f64,
        lipschitz_bound: f64,
    ) -> Result<Self> {
        if !(w_state >= 0.0 && w_action >= 0.0) {
            return Err(Error::InvalidMetric("weights must be nonnegative".into()));
        }
        let n = n_states * n_actions;
        let mut dist = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                let (sx, ax) = (x / n_actions, x % n_actions);
                let (sy, ay) = (y / n_actions, y % n_actions);
                let mut d = 0.0;
                if sx != sy {
                    d += w_state;
                }
                if ax != ay {
                    d += w_action;
                }
                dist[x * n + y] = d;
            }
        }
        Self::new(n, dist, lipschitz_bound)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Transport cost `L d(x, y)`.
    #[inline]
    pub fn cost(&self, x: usize, y: usize) -> f64 {
        self.lipschitz_bound * self.dist(x, y)
    }

    /// Largest violation of `|h(x) - h(y)| <= L d(x, y)` over all pairs.
    pub fn lipschitz_violation(&self, h: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for x in 0..self.n {
            for y in 0..x {
                worst = worst.max((h[x] - h[y]).abs() - self.cost(x, y));
            }
        }
        worst
    }

    pub fn is_lipschitz(&self, h: &[f64]) -> bool {
        h.len() == self.n && self.lipschitz_violation(h) <= LIPSCHITZ_TOL
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for x in 0..n {
            if self.dist(x, x) != 0.0 {
                return Err(Error::InvalidMetric(format!(
                    "d({x},{x}) = {} is not zero",
                    self.dist(x, x)
                )));
            }
            for y in 0..n {
                let d = self.dist(x, y);
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(Error::InvalidMetric(format!(
                        "d({x},{y}) = {d} is negative or not finite"
                    )));
                }
                if (d - self.dist(y, x)).abs() > METRIC_TOL {
                    return Err(Error::InvalidMetric(format!("d({x},{y}) != d({y},{x})")));
                }
            }
        }
        let violated = |x: usize, y: usize, z: usize| self.dist(x, z) > self.dist(x, y) + self.dist(y, z) + METRIC_TOL;
        let report = |x, y, z| {
            Err(Error::InvalidMetric(format!(
                "triangle inequality fails on ({x},{y},{z})"
            )))
        };
        if n <= EXHAUSTIVE_TRIPLES {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        if violated(x, y, z) {
                            return report(x, y, z);
                        }
                    }
                }
            }
        } else {
            let mut rng = seeded(0x6d65_7472_6963);
            for _ in 0..SAMPLED_TRIPLES {
                let (x, y, z) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
                if violated(x, y, z) {
                    return report(x, y, z);
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Serialize for MetricSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MetricFile {
            dist: self.dist.chunks(self.n).map(<[f64]>::to_vec).collect(),
            lipschitz_bound: self.lipschitz_bound,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MetricSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = MetricFile::deserialize(deserializer)?;
        Self::from_nested(file.dist, file.lipschitz_bound).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_metric_is_valid() {
        let m = MetricSpec::product_discrete(3, 2, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(m.len(), 6);
        assert_eq!(m.dist(0, 1), 0.5);
        assert_eq!(m.dist(0, 2), 1.0);
        assert_eq!(m.dist(0, 3), 1.5);
        assert_eq!(m.cost(0, 3), 3.0);
    }

    #[test]
    fn rejects_non_metrics() {
        assert!(MetricSpec::from_nested(vec![vec![0.0, 1.0], vec![2.0, 0.0]], 1.0).is_err());
        assert!(MetricSpec::from_nested(vec![vec![1.0, 1.0], vec![1.0, 0.0]], 1.0).is_err());
        assert!(MetricSpec::from_nested(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0.0).is_err());
        let broken = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(MetricSpec::from_nested(broken, 1.0).is_err());
    }

    #[test]
    fn lipschitz_check() {
        let m = MetricSpec::from_nested(vec![vec![0.0, 2.0], vec![2.0, 0.0]], 0.5).unwrap();
        assert!(m.is_lipschitz(&[0.0, 1.0]));
        assert!(!m.is_lipschitz(&[0.0, 1.001]));
        assert!((m.lipschitz_violation(&[0.0, 1.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn json_roundtrip() {
        let m = MetricSpec::product_discrete(2, 2, 1.0, 1.0, 1.0).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(MetricSpec::from_json(&text).unwrap(), m);
    }
}
