//! Named model configurations: a coupled kernel, its initial distribution
//! and a test function, assembled from a declarative spec.

use serde::{Deserialize, Serialize};

use crate::couplings::{Ar1Kernel, CouplingKind, FiniteKernel, GibbsKernel, MrthKernel};
use crate::error::{Error, Result};
use crate::kernel::{CoupledKernel, InitialDistribution, NormalInit, UniformStates};
use crate::models::{Ar1Model, CauchyNormalModel, FiniteChainModel};
use crate::testfn::{Identity, Powers, StateTable, TestFunction};

/// States that can be written to and read from a single real column.
pub trait StateValue: Sized + Clone + PartialEq + std::fmt::Debug + Send + Sync {
    fn from_f64(v: f64) -> Result<Self>;
    fn to_f64(&self) -> f64;
}

impl StateValue for f64 {
    fn from_f64(v: f64) -> Result<Self> {
        Ok(v)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl StateValue for usize {
    fn from_f64(v: f64) -> Result<Self> {
        if v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::param("state", format!("`{v}` is not a state index")))
        }
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

/// Values of h on each finite state: one number per state, or one row each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HValues {
    Scalar(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

/// Model section of a configuration. Which keys apply depends on `name`:
///
/// - `ar1`: `phi` (0.99), `sigma` (1), `init_sd` (4)
/// - `cauchy-gibbs`, `cauchy-mrth`: `observations` ([-8, 8, 17]),
///   `prior_variance` (100), `proposal_sd` (10, MRTH only), `init_mean` (0),
///   `init_sd` (1)
/// - `finite`: `matrix` (inline rows) or `matrix_file` (CSV with header
///   `to_0,...`), `h_values`; chains start uniformly over the states
///
/// `test_function` is `identity`, `square`, or `powers:p1,p2,...` for real
/// states and `table` or `column:j` for finite chains.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub phi: Option<f64>,
    pub sigma: Option<f64>,
    pub observations: Option<Vec<f64>>,
    pub prior_variance: Option<f64>,
    pub proposal_sd: Option<f64>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub matrix_file: Option<String>,
    pub h_values: Option<HValues>,
    pub init_mean: Option<f64>,
    pub init_sd: Option<f64>,
    pub test_function: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSpec {
    pub kind: Option<String>,
    /// Switching distance of `switch-to-crn-composite`.
    pub threshold: Option<f64>,
}

impl CouplingSpec {
    fn resolve(&self, default: CouplingKind) -> Result<CouplingKind> {
        let Some(kind) = &self.kind else {
            return Ok(default);
        };
        let mut k: CouplingKind = kind.parse()?;
        if let (CouplingKind::SwitchToCrnComposite { threshold }, Some(t)) = (&mut k, self.threshold) {
            if !(t > 0.0) {
                return Err(Error::param("coupling.threshold", "must be positive"));
            }
            *threshold = t;
        }
        Ok(k)
    }
}

/// A continuous model ready to simulate.
pub struct RealBundle<K> {
    pub kernel: K,
    pub init: NormalInit,
    pub h: Box<dyn TestFunction<f64>>,
}

pub struct FiniteBundle {
    pub kernel: FiniteKernel,
    pub init: UniformStates,
    pub h: StateTable,
}

pub enum ModelBundle {
    Ar1(RealBundle<Ar1Kernel>),
    CauchyGibbs(RealBundle<GibbsKernel>),
    CauchyMrth(RealBundle<MrthKernel>),
    Finite(FiniteBundle),
}

/// Generic operation over any bundle.
pub trait BundleOp {
    type Output;
    fn run<K>(
        self,
        kernel: &K,
        init: &dyn InitialDistribution<K::State>,
        h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue;
}

impl ModelBundle {
    pub fn apply<O: BundleOp>(&self, op: O) -> O::Output {
        match self {
            ModelBundle::Ar1(b) => op.run(&b.kernel, &b.init, b.h.as_ref()),
            ModelBundle::CauchyGibbs(b) => op.run(&b.kernel, &b.init, b.h.as_ref()),
            ModelBundle::CauchyMrth(b) => op.run(&b.kernel, &b.init, b.h.as_ref()),
            ModelBundle::Finite(b) => op.run(&b.kernel, &b.init, &b.h),
        }
    }

    pub fn label(&self) -> String {
        use crate::kernel::MarkovKernel;
        match self {
            ModelBundle::Ar1(b) => b.kernel.label(),
            ModelBundle::CauchyGibbs(b) => b.kernel.label(),
            ModelBundle::CauchyMrth(b) => b.kernel.label(),
            ModelBundle::Finite(b) => b.kernel.label(),
        }
    }

    /// The AR(1) parameters when this is an AR(1) bundle.
    pub fn ar1(&self) -> Option<&Ar1Model> {
        match self {
            ModelBundle::Ar1(b) => Some(&b.kernel.model),
            _ => None,
        }
    }

    pub fn ar1_kernel(&self) -> Option<&Ar1Kernel> {
        match self {
            ModelBundle::Ar1(b) => Some(&b.kernel),
            _ => None,
        }
    }

    pub fn finite(&self) -> Option<&FiniteChainModel> {
        match self {
            ModelBundle::Finite(b) => Some(&b.kernel.model),
            _ => None,
        }
    }
}

fn real_test_function(name: Option<&str>) -> Result<Box<dyn TestFunction<f64>>> {
    match name.unwrap_or("identity") {
        "identity" | "x" => Ok(Box::new(Identity)),
        "square" | "x2" => Ok(Box::new(Powers(vec![2]))),
        other => {
            if let Some(list) = other.strip_prefix("powers:") {
                let ps = list
                    .split(',')
                    .map(|p| p.trim().parse::<i32>())
                    .collect::<std::result::Result<Vec<i32>, _>>()
                    .map_err(|e| Error::param("test_function", format!("bad exponent list `{list}`: {e}")))?;
                if ps.is_empty() {
                    return Err(Error::param("test_function", "empty exponent list"));
                }
                Ok(Box::new(Powers(ps)))
            } else {
                Err(Error::param(
                    "test_function",
                    format!("unknown test function `{other}` for a real-valued model"),
                ))
            }
        }
    }
}

fn finite_test_function(name: Option<&str>, table: StateTable) -> Result<StateTable> {
    match name.unwrap_or("table") {
        "table" => Ok(table),
        other => match other.strip_prefix("column:").map(str::parse::<usize>) {
            Some(Ok(j)) if j < table.arity() => Ok(table.column(j)),
            _ => Err(Error::param(
                "test_function",
                format!("unknown test function `{other}` for a finite chain; use table or column:j"),
            )),
        },
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

/// Assemble a bundle. `base_dir` resolves a relative `matrix_file`.
pub fn build_bundle(
    model: &ModelSpec,
    coupling: &CouplingSpec,
    base_dir: Option<&std::path::Path>,
) -> Result<ModelBundle> {
    let tf = model.test_function.as_deref();
    match model.name.as_str() {
        "ar1" => {
            let m = Ar1Model::new(model.phi.unwrap_or(0.99), model.sigma.unwrap_or(1.0))?;
            let kernel = Ar1Kernel::new(m, coupling.resolve(CouplingKind::ReflectionMaximal)?)?;
            Ok(ModelBundle::Ar1(RealBundle {
                kernel,
                init: NormalInit {
                    mean: model.init_mean.unwrap_or(0.0),
                    sd: positive("init_sd", model.init_sd.unwrap_or(4.0))?,
                },
                h: real_test_function(tf)?,
            }))
        }
        "cauchy-gibbs" | "cauchy-mrth" => {
            let d = CauchyNormalModel::default();
            let m = CauchyNormalModel::new(
                model.observations.clone().unwrap_or_else(|| d.observations().to_vec()),
                model.prior_variance.unwrap_or(d.prior_variance()),
                model.proposal_sd.unwrap_or(d.mrth_proposal_sd()),
            )?;
            let init = NormalInit {
                mean: model.init_mean.unwrap_or(0.0),
                sd: positive("init_sd", model.init_sd.unwrap_or(1.0))?,
            };
            let h = real_test_function(tf)?;
            if model.name == "cauchy-gibbs" {
                let kernel = GibbsKernel::new(m, coupling.resolve(CouplingKind::MaximalRejection)?)?;
                Ok(ModelBundle::CauchyGibbs(RealBundle { kernel, init, h }))
            } else {
                let kernel = MrthKernel::new(m, coupling.resolve(CouplingKind::ReflectionMaximal)?)?;
                Ok(ModelBundle::CauchyMrth(RealBundle { kernel, init, h }))
            }
        }
        "finite" => {
            let rows = match (&model.matrix, &model.matrix_file) {
                (Some(rows), None) => rows.clone(),
                (None, Some(path)) => {
                    let p = std::path::Path::new(path);
                    let full = match base_dir {
                        Some(dir) if p.is_relative() => dir.join(p),
                        _ => p.to_path_buf(),
                    };
                    let file = std::fs::File::open(&full)
                        .map_err(|e| Error::Parse(format!("cannot open {}: {e}", full.display())))?;
                    FiniteChainModel::read_matrix_csv(file)?
                }
                _ => {
                    return Err(Error::param(
                        "matrix",
                        "a finite chain needs exactly one of `matrix` or `matrix_file`",
                    ))
                }
            };
            let n = rows.len();
            let table = match &model.h_values {
                None => StateTable::scalar((0..n).map(|i| i as f64).collect()),
                Some(HValues::Scalar(v)) => StateTable::scalar(v.clone()),
                Some(HValues::Rows(r)) => {
                    let d = r.first().map_or(0, Vec::len);
                    if d == 0 || r.iter().any(|row| row.len() != d) {
                        return Err(Error::param("h_values", "rows must be non-empty and of equal length"));
                    }
                    StateTable::new(r.iter().flatten().copied().collect(), d)
                }
            };
            let fm = FiniteChainModel::new(rows, table.clone())?;
            let h = finite_test_function(tf, table)?;
            let kernel = FiniteKernel::new(fm, coupling.resolve(CouplingKind::MaximalRejection)?)?;
            Ok(ModelBundle::Finite(FiniteBundle {
                kernel,
                init: UniformStates(n),
                h,
            }))
        }
        "" => Err(Error::param("model.name", "no model given")),
        other => Err(Error::param(
            "model.name",
            format!("unknown model `{other}`; expected ar1, cauchy-gibbs, cauchy-mrth or finite"),
        )),
    }
}
