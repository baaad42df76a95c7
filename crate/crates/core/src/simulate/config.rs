use std::path::Path;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::{DeadzoneSpec, MirrorMap};
use crate::error::{Error, Result};
use crate::kernel_rf::{KernelConfig, VariantName};
use crate::systems::{default_a, BenchmarkKind, ControlBenchmark, HamiltonianSpec, MomentumMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Lti,
    Quartic,
    Nbody,
    /// Linear truth `x' = A x` observed by a continuous adaptive predictor.
    Predictor,
    /// Linear truth sampled every `dt_meas` with the `beta` contraction update.
    Sampling,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    /// `u = 0`.
    #[default]
    None,
    /// `u = h(x)`, the uncertainty cancelled exactly.
    Exact,
    Parametric,
    Nonparametric,
    Nn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationConfig {
    #[serde(default)]
    pub law: LawKind,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Scale the random-feature learning rate by `1/K`, so that the law
    /// approaches the kernel law with the same `gamma` as `K` grows.
    #[serde(default = "default_true")]
    pub normalize_gain: bool,
    #[serde(default)]
    pub deadzone: DeadzoneSpec,
    #[serde(default)]
    pub mirror: MirrorMap,
    /// Hidden width of the network law.
    #[serde(default = "default_width")]
    pub width: usize,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            law: LawKind::None,
            gamma: default_gamma(),
            normalize_gain: true,
            deadzone: DeadzoneSpec::None,
            mirror: MirrorMap::Euclidean,
            width: default_width(),
        }
    }
}

/// Extra knobs of the `m`-body experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NBodyOptions {
    #[serde(default = "default_sigma_w")]
    pub sigma_w: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
    #[serde(default = "default_momentum_scale")]
    pub momentum_scale: f64,
    #[serde(default = "default_box")]
    pub box_size: f64,
    #[serde(default)]
    pub momentum_mode: MomentumMode,
    /// Seed of the initial configuration, fixed across trials.
    #[serde(default)]
    pub ic_seed: u64,
}

impl Default for NBodyOptions {
    fn default() -> Self {
        let h = HamiltonianSpec::new(2, 1);
        Self {
            sigma_w: h.sigma_w,
            floor: h.floor,
            min_separation: h.min_separation,
            momentum_scale: h.momentum_scale,
            box_size: h.box_size,
            momentum_mode: h.momentum_mode,
            ic_seed: 0,
        }
    }
}

/// Experiment description shared by every subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub system: SystemKind,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub trials: usize,
    /// Keep every `decimate`-th record (the final step is always kept).
    #[serde(default = "default_one")]
    pub decimate: usize,
    /// Fraction of the horizon used for final-window statistics.
    #[serde(default = "default_window")]
    pub final_window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_meas: Option<f64>,
    /// Added to every coordinate of the default initial state (plant for
    /// control runs, estimate for prediction runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_offset: Option<f64>,
    /// Initial truth state for the linear prediction systems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// System matrix rows; defaults to the shipped benchmark matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub adaptation: AdaptationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub nbody: NBodyOptions,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_one() -> usize {
    1
}
fn default_window() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_width() -> usize {
    32
}
fn default_sigma_w() -> f64 {
    1.0
}
fn default_floor() -> f64 {
    1e-3
}
fn default_min_separation() -> f64 {
    0.5
}
fn default_momentum_scale() -> f64 {
    0.3
}
fn default_box() -> f64 {
    2.0
}

/// Seed of trial `index`, a pure function of the master seed.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of integration steps, `floor(horizon / dt)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }

    pub fn matrix_a(&self) -> Result<DMatrix<f64>> {
        match &self.a {
            None => match self.system {
                SystemKind::Predictor => Ok(DMatrix::from_element(1, 1, -1.0)),
                _ => Ok(default_a()),
            },
            Some(rows) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("matrix a must be square and nonempty".into()));
                }
                Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
            }
        }
    }

    pub fn benchmark(&self) -> Result<ControlBenchmark> {
        let kind = match self.system {
            SystemKind::Lti => BenchmarkKind::LtiStable,
            SystemKind::Quartic => BenchmarkKind::QuarticUnstable,
            other => return Err(Error::Config(format!("{other:?} is not a control benchmark"))),
        };
        ControlBenchmark::new(kind, self.matrix_a()?)
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        let (m, d) = match (self.m, self.d) {
            (Some(m), Some(d)) => (m, d),
            _ => return Err(Error::Config("nbody runs need m and d".into())),
        };
        let o = &self.nbody;
        let spec = HamiltonianSpec {
            m,
            d,
            k_gain: self.k_gain.unwrap_or(1.0),
            sigma_w: o.sigma_w,
            floor: o.floor,
            min_separation: o.min_separation,
            momentum_scale: o.momentum_scale,
            box_size: o.box_size,
            momentum_mode: o.momentum_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// State dimension of the configured system.
    pub fn state_dim(&self) -> Result<usize> {
        match self.system {
            SystemKind::Nbody => Ok(self.hamiltonian()?.state_dim()),
            _ => Ok(self.matrix_a()?.nrows()),
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        if self.horizon < self.dt {
            return Err(Error::Config("horizon must be at least dt".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.decimate == 0 {
            return Err(Error::Config("decimate must be at least 1".into()));
        }
        if !(self.final_window > 0.0 && self.final_window <= 1.0) {
            return Err(Error::Config("final_window must lie in (0, 1]".into()));
        }
        let ad = &self.adaptation;
        positive("gamma", ad.gamma)?;
        ad.deadzone.validate()?;
        ad.mirror.validate()?;
        let n = self.state_dim()?;
        if let Some(cfg_n) = self.n {
            if cfg_n != n {
                return Err(Error::Config(format!("n = {cfg_n} but the system has dimension {n}")));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != n {
                return Err(Error::Config(format!("x0 has length {}, expected {n}", x0.len())));
            }
        }
        match self.system {
            SystemKind::Lti | SystemKind::Quartic => {
                self.benchmark()?;
                match ad.law {
                    LawKind::Parametric | LawKind::Nonparametric => self.check_kernel(n, n)?,
                    LawKind::Nn if ad.width == 0 => return Err(Error::Config("network width must be positive".into())),
                    _ => {}
                }
            }
            SystemKind::Predictor => {
                let a = self.matrix_a()?;
                if !a.iter().all(|v| v.is_finite()) {
                    return Err(Error::Config("matrix a must be finite".into()));
                }
                positive("zeta", self.zeta.ok_or_else(|| Error::Config("predictor runs need zeta".into()))?)?;
                if ad.law != LawKind::Parametric {
                    return Err(Error::Config("predictor runs use the parametric law".into()));
                }
                self.check_kernel(n, n)?;
            }
            SystemKind::Nbody => {
                let spec = self.hamiltonian()?;
                if ad.law != LawKind::Parametric {
                    return Err(Error::Config("nbody runs use the parametric law".into()));
                }
                let k = self.kernel.as_ref().ok_or_else(|| Error::Config("nbody runs need a kernel section".into()))?;
                if k.variant != VariantName::Symplectic {
                    return Err(Error::Config("nbody runs need the symplectic kernel".into()));
                }
                if k.n != spec.state_dim() {
                    return Err(Error::Config(format!(
                        "kernel n = {} but the {}-body state has dimension {}",
                        k.n,
                        spec.m,
                        spec.state_dim()
                    )));
                }
                if k.k == 0 {
                    return Err(Error::Config("feature count K must be at least 1".into()));
                }
                if (k.sigma - 1.0 / spec.sigma_w).abs() > 1e-12 * k.sigma {
                    return Err(Error::Config("kernel sigma must equal 1 / nbody.sigma_w".into()));
                }
            }
            SystemKind::Sampling => {
                let a = self.matrix_a()?;
                ControlBenchmark::new(BenchmarkKind::LtiStable, a)?;
                let beta = self.beta.ok_or_else(|| Error::Config("sampling runs need beta".into()))?;
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::Config(format!("beta must lie in (0, 1), got {beta}")));
                }
                let dm = self.dt_meas.ok_or_else(|| Error::Config("sampling runs need dt_meas".into()))?;
                positive("dt_meas", dm)?;
                if self.horizon < dm {
                    return Err(Error::Config("horizon must be at least dt_meas".into()));
                }
            }
        }
        Ok(())
    }

    fn check_kernel(&self, n: usize, d: usize) -> Result<()> {
        let k = self.kernel.as_ref().ok_or_else(|| Error::Config("this law needs a kernel section".into()))?;
        let spec = k.to_spec()?;
        if spec.n() != n || spec.d() != d {
            return Err(Error::Config(format!(
                "kernel maps R^{} to R^{}, system needs R^{n} to R^{d}",
                spec.n(),
                spec.d()
            )));
        }
        if self.adaptation.law == LawKind::Parametric && spec.is_translation_invariant() && k.k == 0 {
            return Err(Error::Config("feature count K must be at least 1".into()));
        }
        Ok(())
    }
}
