//! Reference Lagrangians and metric fields with their expected verdicts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::expr::LagrangianAst;
use crate::lagrangian::{Domain, LagrangianSpec, Reversibility};
use crate::metric::{HopfField, MetricSource};

pub const NAMES: [&str; 7] = [
    "minkowski2",
    "minkowski3",
    "beem3",
    "beem2",
    "randers4",
    "hopf4",
    "odd_perturbed",
];

/// Minkowski plus a small odd cubic-over-norm term: 2-homogeneous, smooth
/// off the origin and not reversible.
pub const ODD_PERTURBED_DSL: &str = "0.5*(-v0^2+v1^2+v2^2) + beta*v1^3/sqrt(v0^2+v1^2+v2^2)";

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BETA: f64 = 0.1;

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Stated for this example in the source literature.
    Published,
    /// Follows from textbook facts about the formula.
    Classical,
    /// Established numerically by this crate.
    Computed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation<T> {
    pub value: T,
    pub provenance: Provenance,
}

fn expect<T>(value: T, provenance: Provenance) -> Option<Expectation<T>> {
    Some(Expectation { value, provenance })
}

/// A family parameter whose admissible range is certified at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub name: String,
    pub default: f64,
    /// A value known to be admissible, where bisection starts.
    pub lower: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectedVerdicts {
    /// `VALID_LORENTZ_FINSLER`, a witness label, or `NON_FINSLER`.
    pub validity: Option<Expectation<String>>,
    pub reversible: Option<Expectation<Reversibility>>,
    pub timelike_components: Option<Expectation<usize>>,
    /// Whether the Euler identities hold.
    pub finsler: Option<Expectation<bool>>,
    pub parameter: Option<ParameterRange>,
}

#[derive(Debug, Clone)]
pub enum Fixture {
    Lagrangian(LagrangianSpec),
    Field(HopfField),
}

pub type Family = fn(f64) -> Result<LagrangianSpec>;

#[derive(Debug, Clone)]
pub struct CatalogueEntry {
    pub name: String,
    pub description: String,
    pub fixture: Fixture,
    pub expected: ExpectedVerdicts,
    family: Option<Family>,
}

impl CatalogueEntry {
    /// Wraps a user-supplied Lagrangian with no expectations.
    pub fn custom(spec: LagrangianSpec, description: &str) -> Self {
        CatalogueEntry {
            name: spec.name(),
            description: description.to_string(),
            fixture: Fixture::Lagrangian(spec),
            expected: ExpectedVerdicts::default(),
            family: None,
        }
    }

    pub fn spec(&self) -> Option<&LagrangianSpec> {
        match &self.fixture {
            Fixture::Lagrangian(s) => Some(s),
            Fixture::Field(_) => None,
        }
    }

    pub fn metric_source(&self) -> &dyn MetricSource {
        match &self.fixture {
            Fixture::Lagrangian(s) => s,
            Fixture::Field(f) => f,
        }
    }

    pub fn dimension(&self) -> usize {
        self.metric_source().source_dimension()
    }

    pub fn dsl_text(&self) -> Option<String> {
        self.spec().and_then(|s| s.dsl_text())
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        self.spec().map(|s| s.parameters()).unwrap_or_default()
    }

    /// `1/2 (-p0^2 + p1^2 + ...)` for the flat entries, where the dual
    /// Hamiltonian is known in closed form.
    pub fn classical_hamiltonian(&self, p: &[f64]) -> Option<f64> {
        if !self.name.starts_with("minkowski") || p.len() != self.dimension() {
            return None;
        }
        Some(0.5 * (p[1..].iter().map(|x| x * x).sum::<f64>() - p[0] * p[0]))
    }

    /// The one-parameter family this entry belongs to.
    pub fn family(&self) -> Option<Family> {
        self.family
    }

    /// Rebuilds the fixture with overridden parameters.
    pub fn with_parameters(mut self, params: &BTreeMap<String, f64>) -> Result<Self> {
        if params.is_empty() {
            return Ok(self);
        }
        let mut current = self.parameters();
        for (k, v) in params {
            if !current.contains_key(k) {
                return Err(LabError::UnboundParameter(format!("{k} (not a parameter of {})", self.name)));
            }
            current.insert(k.clone(), *v);
        }
        let spec = match self.name.as_str() {
            "beem3" => LagrangianSpec::beem3(current["alpha"])?,
            "beem2" => LagrangianSpec::beem2(current["alpha"])?,
            "randers4" => LagrangianSpec::randers4(current["a"], current["b"])?,
            "odd_perturbed" => odd_perturbed(current["beta"])?,
            _ => return Err(LabError::precondition(format!("{} has no parameters", self.name))),
        };
        self.fixture = Fixture::Lagrangian(spec);
        Ok(self)
    }
}

/// The constructed non-reversible fixture with parameter `beta`.
pub fn odd_perturbed(beta: f64) -> Result<LagrangianSpec> {
    if !beta.is_finite() {
        return Err(LabError::precondition("parameter beta must be finite"));
    }
    let ast = LagrangianAst::parse(ODD_PERTURBED_DSL, 3)?.with_param("beta", beta);
    let reversible = if beta == 0.0 { Reversibility::Yes } else { Reversibility::No };
    LagrangianSpec::from_ast("odd_perturbed", ast, Domain::AllNonzero, reversible)
}

fn valid(p: Provenance) -> Option<Expectation<String>> {
    expect("VALID_LORENTZ_FINSLER".to_string(), p)
}

pub fn get(name: &str) -> Result<CatalogueEntry> {
    use Provenance::*;
    let entry = match name {
        "minkowski2" | "minkowski3" => {
            let n = if name == "minkowski2" { 2 } else { 3 };
            CatalogueEntry {
                name: name.to_string(),
                description: format!("flat Lorentz-Minkowski space of dimension {}", n + 1),
                fixture: Fixture::Lagrangian(LagrangianSpec::minkowski(n)?),
                expected: ExpectedVerdicts {
                    validity: valid(Classical),
                    reversible: expect(Reversibility::Yes, Classical),
                    timelike_components: expect(2, Classical),
                    finsler: expect(true, Classical),
                    parameter: None,
                },
                family: None,
            }
        }
        "beem3" => CatalogueEntry {
            name: name.to_string(),
            description: "Minkowski form bent by a bump factor that vanishes on the axes; dimension 3".into(),
            fixture: Fixture::Lagrangian(LagrangianSpec::beem3(DEFAULT_ALPHA)?),
            expected: ExpectedVerdicts {
                validity: valid(Published),
                reversible: expect(Reversibility::Yes, Classical),
                timelike_components: expect(2, Published),
                finsler: expect(true, Computed),
                parameter: Some(ParameterRange {
                    name: "alpha".into(),
                    default: DEFAULT_ALPHA,
                    lower: 0.0,
                    provenance: Computed,
                }),
            },
            family: Some(LagrangianSpec::beem3),
        },
        "beem2" => CatalogueEntry {
            name: name.to_string(),
            description: "the 1+1 version of the bump-factor Lagrangian".into(),
            fixture: Fixture::Lagrangian(LagrangianSpec::beem2(DEFAULT_ALPHA)?),
            expected: ExpectedVerdicts {
                validity: valid(Published),
                reversible: expect(Reversibility::Yes, Classical),
                timelike_components: expect(2, Computed),
                finsler: expect(true, Computed),
                parameter: Some(ParameterRange {
                    name: "alpha".into(),
                    default: DEFAULT_ALPHA,
                    lower: 0.0,
                    provenance: Computed,
                }),
            },
            family: Some(LagrangianSpec::beem2),
        },
        "randers4" => CatalogueEntry {
            name: name.to_string(),
            description: "Randers-type Lagrangian, defined only inside the cone v0^2 > v1^2+v2^2+v3^2".into(),
            fixture: Fixture::Lagrangian(LagrangianSpec::randers4(1.0, 0.5)?),
            expected: ExpectedVerdicts {
                validity: expect("DOMAIN_WITNESS".into(), Published),
                reversible: expect(Reversibility::No, Classical),
                timelike_components: None,
                finsler: expect(true, Computed),
                parameter: None,
            },
            family: None,
        },
        "hopf4" => CatalogueEntry {
            name: name.to_string(),
            description: "Lorentzian metric on R^4 built from the Hopf fibration; not the Hessian of any Lagrangian".into(),
            fixture: Fixture::Field(HopfField),
            expected: ExpectedVerdicts {
                validity: expect("NON_FINSLER".into(), Published),
                reversible: expect(Reversibility::Unknown, Classical),
                timelike_components: expect(0, Published),
                finsler: expect(false, Published),
                parameter: None,
            },
            family: None,
        },
        "odd_perturbed" => CatalogueEntry {
            name: name.to_string(),
            description: "Minkowski plus beta*v1^3/|v|, a non-reversible Lorentz-Finsler fixture".into(),
            fixture: Fixture::Lagrangian(odd_perturbed(DEFAULT_BETA)?),
            expected: ExpectedVerdicts {
                validity: valid(Computed),
                reversible: expect(Reversibility::No, Computed),
                timelike_components: expect(2, Computed),
                finsler: expect(true, Computed),
                parameter: Some(ParameterRange {
                    name: "beta".into(),
                    default: DEFAULT_BETA,
                    lower: 0.0,
                    provenance: Computed,
                }),
            },
            family: Some(odd_perturbed),
        },
        other => return Err(LabError::UnknownName(other.to_string())),
    };
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::beem_validity_scan;

    #[test]
    fn every_name_resolves() {
        for n in NAMES {
            let e = get(n).unwrap();
            assert_eq!(e.name, n);
        }
        assert!(matches!(get("kerr"), Err(LabError::UnknownName(_))));
    }

    #[test]
    fn minkowski2_entry() {
        let e = get("minkowski2").unwrap();
        assert_eq!(e.dimension(), 3);
        assert_eq!(e.expected.timelike_components.as_ref().unwrap().value, 2);
        assert_eq!(e.expected.reversible.as_ref().unwrap().value, Reversibility::Yes);
    }

    #[test]
    fn hopf_entry_is_a_field() {
        let e = get("hopf4").unwrap();
        assert!(e.spec().is_none());
        assert_eq!(e.dimension(), 4);
        assert!(!e.expected.finsler.as_ref().unwrap().value);
    }

    #[test]
    fn parameters_can_be_overridden() {
        let e = get("beem3").unwrap();
        assert_eq!(e.parameters()["alpha"], DEFAULT_ALPHA);
        let e = e.with_parameters(&[("alpha".to_string(), 0.2)].into_iter().collect()).unwrap();
        assert_eq!(e.parameters()["alpha"], 0.2);
        assert!(get("minkowski2")
            .unwrap()
            .with_parameters(&[("alpha".to_string(), 0.2)].into_iter().collect())
            .is_err());
    }

    #[test]
    fn odd_perturbed_is_valid_and_not_reversible() {
        let spec = odd_perturbed(DEFAULT_BETA).unwrap();
        assert!(beem_validity_scan(&spec, 2000, 3).is_valid());
        let v = [1.0, 0.5, 0.2];
        let neg = [-1.0, -0.5, -0.2];
        assert!((spec.eval_f64(&v).unwrap() - spec.eval_f64(&neg).unwrap()).abs() > 1e-3);
        assert_eq!(spec.dsl_text().unwrap(), LagrangianAst::parse(ODD_PERTURBED_DSL, 3).unwrap().with_param("beta", 0.1).to_text());
    }
}
