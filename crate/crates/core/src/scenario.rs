//! Named data-generating scenarios, looked up at runtime by name.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{MatinarError, Result};
use crate::linalg::RealMatrix;
use crate::process::{check_stationary, ModelParams};
use crate::thinning::RngStream;

/// A source of true parameters for simulation studies.
pub trait Scenario: Send + Sync {
    fn name(&self) -> &str;
    fn description(&self) -> String;
    /// The true parameters. Fixed scenarios ignore `rng`.
    fn params(&self, rng: &mut RngStream) -> Result<ModelParams>;
    /// Whether [`Scenario::params`] depends on the random stream.
    fn is_random(&self) -> bool {
        false
    }
}

/// `A = Ã / ‖Ã‖_F` with `Ã = [[.2, .4], [.4, .2]]`, `B = [[.5, .3], [.3, .5]]`,
/// `Λ` all ones.
pub fn scenario_a() -> ModelParams {
    let a_tilde = RealMatrix::from_row_slice(2, 2, &[0.2, 0.4, 0.4, 0.2]);
    let a = &a_tilde / a_tilde.norm();
    let b = RealMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.5]);
    ModelParams::new(vec![a], vec![b], RealMatrix::from_element(2, 2, 1.0))
        .expect("valid built-in scenario")
}

pub struct FixedScenario {
    name: String,
    description: String,
    params: ModelParams,
}

impl FixedScenario {
    pub fn new(name: &str, description: &str, params: ModelParams) -> Self {
        FixedScenario {
            name: name.into(),
            description: description.into(),
            params,
        }
    }
}

impl Scenario for FixedScenario {
    fn name(&self) -> &str {
        &self.name
    }
    fn description(&self) -> String {
        self.description.clone()
    }
    fn params(&self, _rng: &mut RngStream) -> Result<ModelParams> {
        Ok(self.params.clone())
    }
}

/// Uniform(0, 1) entries for every `A_l` and `B_l`, each `A_l` normalised,
/// redrawn until the companion matrix has spectral radius below one.
pub struct RandomCoefficients {
    name: String,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    /// Common innovation mean.
    pub lambda: f64,
    pub max_draws: usize,
}

impl RandomCoefficients {
    pub fn new(name: &str, m: usize, n: usize, p: usize) -> Self {
        RandomCoefficients {
            name: name.into(),
            m,
            n,
            p,
            lambda: 1.0,
            max_draws: 100_000,
        }
    }
}

impl Scenario for RandomCoefficients {
    fn name(&self) -> &str {
        &self.name
    }
    fn description(&self) -> String {
        format!(
            "random U(0,1) coefficients, {}x{}, order {}, Lambda = {}, redrawn until stationary",
            self.m, self.n, self.p, self.lambda
        )
    }
    fn is_random(&self) -> bool {
        true
    }
    fn params(&self, rng: &mut RngStream) -> Result<ModelParams> {
        let lambda = RealMatrix::from_element(self.m, self.n, self.lambda);
        for _ in 0..self.max_draws {
            let mut a = Vec::with_capacity(self.p);
            let mut b = Vec::with_capacity(self.p);
            for _ in 0..self.p {
                let al = RealMatrix::from_fn(self.m, self.m, |_, _| rng.random::<f64>());
                a.push(&al / al.norm());
                b.push(RealMatrix::from_fn(self.n, self.n, |_, _| {
                    rng.random::<f64>()
                }));
            }
            let params = ModelParams::new(a, b, lambda.clone())?;
            if check_stationary(&params)?.stationary {
                return Ok(params);
            }
        }
        Err(MatinarError::NoConvergence {
            iterations: self.max_draws,
            context: format!(
                "drawing stationary coefficients for scenario '{}'",
                self.name
            ),
        })
    }
}

/// A named slot whose definition is not available.
pub struct UnavailableScenario {
    name: String,
}

impl Scenario for UnavailableScenario {
    fn name(&self) -> &str {
        &self.name
    }
    fn description(&self) -> String {
        "definition unavailable".into()
    }
    fn params(&self, _rng: &mut RngStream) -> Result<ModelParams> {
        Err(MatinarError::ScenarioUnavailable(self.name.clone()))
    }
}

pub struct ScenarioRegistry {
    scenarios: BTreeMap<String, Box<dyn Scenario>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        ScenarioRegistry {
            scenarios: BTreeMap::new(),
        }
    }

    /// `A`; random-coefficient generators `D` (order 1, 2x2), `random-p1`,
    /// `random-p2`; unavailable slots `B`, `C`, `E`, `F`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(FixedScenario::new(
            "A",
            "2x2 order-1 model with symmetric A and B, Lambda all ones",
            scenario_a(),
        )));
        r.register(Box::new(RandomCoefficients::new("D", 2, 2, 1)));
        r.register(Box::new(RandomCoefficients::new("random-p1", 2, 2, 1)));
        r.register(Box::new(RandomCoefficients::new("random-p2", 2, 2, 2)));
        for name in ["B", "C", "E", "F"] {
            r.register(Box::new(UnavailableScenario { name: name.into() }));
        }
        r
    }

    pub fn register(&mut self, scenario: Box<dyn Scenario>) {
        self.scenarios.insert(scenario.name().to_string(), scenario);
    }

    pub fn names(&self) -> Vec<&str> {
        self.scenarios.keys().map(|k| k.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scenario> {
        self.scenarios
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| MatinarError::Unknown {
                kind: "scenario",
                name: name.into(),
                available: self.names().join(", "),
            })
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_a_values() {
        let p = scenario_a();
        assert!((p.a()[0].norm() - 1.0).abs() < 1e-15);
        assert!((p.a()[0][(0, 1)] - 0.4 / 0.4f64.sqrt()).abs() < 1e-15);
        let r = check_stationary(&p).unwrap().radius;
        assert!((r - 0.7589).abs() < 1e-4);
    }

    #[test]
    fn random_draws_are_stationary_normalised_and_reproducible() {
        // 2x2 order 2 accepts about 2% of draws, 2x3 order 1 about 16%
        let shapes = [
            RandomCoefficients::new("x", 2, 2, 2),
            RandomCoefficients::new("y", 2, 3, 1),
        ];
        for k in 0..20 {
            let s = &shapes[k as usize % 2];
            let p = s.params(&mut RngStream::new(9, k)).unwrap();
            assert!(p.is_normalized(1e-12));
            assert!(check_stationary(&p).unwrap().stationary);
            assert!(p
                .a()
                .iter()
                .chain(p.b())
                .all(|x| x.iter().all(|v| (0.0..=1.0).contains(v))));
            assert_eq!(p, s.params(&mut RngStream::new(9, k)).unwrap());
        }
    }

    #[test]
    fn registry_lookup_and_unavailable_slots() {
        let r = ScenarioRegistry::builtin();
        let mut rng = RngStream::new(0, 0);
        assert_eq!(r.get("A").unwrap().params(&mut rng).unwrap(), scenario_a());
        for name in ["B", "C", "E", "F"] {
            let err = r.get(name).unwrap().params(&mut rng).unwrap_err();
            assert!(err.to_string().contains("scenario definition unavailable"));
        }
        assert!(r.get("Z").is_err());
        assert!(r.get("random-p2").unwrap().is_random());
    }
}
