//! Run configuration: a JSON file overridden flag by flag.

use gflab::association::{Claim, EpsilonGrid};
use gflab::functionals::{default_test_functions, TestFunction, TestFunctionSpec};
use gflab::mollifier::{Mollifier, MollifierSpec};
use gflab::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierConfig {
    /// number of vanishing moments
    pub q: u32,
    pub s: u32,
    pub l: f64,
    /// seed of the first family; families use seed, seed+1, …
    pub seed: u64,
    pub families: u32,
    /// no free coefficients (symmetric polynomial factor)
    #[serde(default)]
    pub plain: bool,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self { q: 2, s: 10, l: 1.0, seed: 1, families: 3, plain: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiSelection {
    /// names from the built-in set
    Named(Vec<String>),
    /// explicit test functions
    Specs(Vec<TestFunctionSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub claim: Option<String>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub p: Option<u32>,
    #[serde(default)]
    pub q: Option<u32>,
    #[serde(default)]
    pub mollifier: MollifierConfig,
    #[serde(default = "default_psis")]
    pub psis: PsiSelection,
    #[serde(default)]
    pub grid: EpsilonGrid,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_psis() -> PsiSelection {
    PsiSelection::Named(default_test_functions().iter().map(|p| p.name().to_string()).collect())
}

fn default_tol() -> f64 {
    1e-3
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            claim: None,
            a: None,
            b: None,
            p: None,
            q: None,
            mollifier: MollifierConfig::default(),
            psis: default_psis(),
            grid: EpsilonGrid::default(),
            tol: default_tol(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))
    }

    pub fn claim(&self) -> Result<Claim> {
        let name = self.claim.as_deref().ok_or_else(|| Error::Config("no claim given (use --claim)".into()))?;
        let claim = Claim::from_parts(name, self.a, self.b, self.p, self.q)?;
        claim.validate()?;
        Ok(claim)
    }

    pub fn mollifiers(&self) -> Result<Vec<Arc<Mollifier>>> {
        let m = &self.mollifier;
        if m.families == 0 {
            return Err(Error::Config("at least one mollifier family is required".into()));
        }
        (0..u64::from(m.families))
            .map(|k| {
                let mut spec = MollifierSpec::new(m.q, m.s, m.l, m.seed.wrapping_add(k))?;
                if m.plain {
                    spec = spec.with_extra(0);
                }
                Mollifier::build(&spec).map(Arc::new)
            })
            .collect()
    }

    pub fn psis(&self) -> Result<Vec<TestFunction>> {
        match &self.psis {
            PsiSelection::Named(names) => {
                let all = default_test_functions();
                names
                    .iter()
                    .map(|n| {
                        all.iter().find(|p| p.name() == n).cloned().ok_or_else(|| {
                            let known: Vec<&str> = all.iter().map(TestFunction::name).collect();
                            Error::Config(format!("unknown test function {n:?}; known: {}", known.join(", ")))
                        })
                    })
                    .collect()
            }
            PsiSelection::Specs(specs) => specs.iter().map(TestFunction::from_spec).collect(),
        }
    }
}
