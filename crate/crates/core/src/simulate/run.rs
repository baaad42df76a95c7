use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{trial_seed, LawKind, SimConfig, SystemKind};
use super::metrics::{Divergence, MetricRecord, MetricsSeries};
use crate::adaptation::{AdaptState, MirrorMap, NNParams, TrajectoryTape};
use crate::error::{Error, Result};
use crate::kernel_rf::{FeatureBank, LinearFeatures, OperatorKernelSpec};
use crate::systems::{
    build_predictor, learned_field_into, matrix_exp, symplectic_predictor_rhs_into, DiscretePredictorSpec,
    LyapunovCertificate,
};

/// State norms above this flag a run as divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// `state += dt * rhs(state, t)`, one evaluation of `rhs`.
pub fn step_euler(rhs: impl FnOnce(&[f64], f64) -> Vec<f64>, state: &mut [f64], t: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    let f = rhs(state, t);
    if f.len() != state.len() {
        return Err(Error::DimensionMismatch { what: "rhs", expected: state.len(), got: f.len() });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    state.iter_mut().zip(&f).for_each(|(x, f)| *x += dt * f);
    Ok(())
}

fn axpy(x: &mut [f64], dt: f64, f: &[f64]) {
    x.iter_mut().zip(f).for_each(|(x, f)| *x += dt * f);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Why a state is unusable, if it is.
fn divergence_reason(x: &[f64]) -> Option<String> {
    if x.iter().any(|v| !v.is_finite()) {
        return Some("non-finite state".into());
    }
    let r = norm(x);
    (r > DIVERGENCE_NORM).then(|| format!("state norm {r:e} above {DIVERGENCE_NORM:e}"))
}

struct Recorder {
    every: usize,
    last: usize,
    records: Vec<MetricRecord>,
}

impl Recorder {
    fn new(cfg: &SimConfig, steps: usize) -> Self {
        Self { every: cfg.decimate, last: steps, records: Vec::with_capacity(steps / cfg.decimate + 2) }
    }

    fn wants(&self, i: usize) -> bool {
        i.is_multiple_of(self.every) || i == self.last
    }
}

fn bank_for(cfg: &SimConfig, seed: u64) -> Result<FeatureBank> {
    let mut k = cfg.kernel.clone().ok_or_else(|| Error::Config("missing kernel section".into()))?;
    k.seed = seed;
    k.build_bank()
}

/// Model features and the effective learning rate for parametric laws.
fn model_features(cfg: &SimConfig, seed: u64) -> Result<(Arc<dyn LinearFeatures>, f64)> {
    let kcfg = cfg.kernel.as_ref().ok_or_else(|| Error::Config("missing kernel section".into()))?;
    let spec = kcfg.to_spec()?;
    let gamma = cfg.adaptation.gamma;
    if spec.is_translation_invariant() {
        let bank = bank_for(cfg, seed)?;
        let k = bank.k() as f64;
        let gain = if cfg.adaptation.normalize_gain { gamma / k } else { gamma };
        Ok((Arc::new(bank), gain))
    } else {
        match spec.variant {
            crate::kernel_rf::KernelVariant::FiniteFeature(map) => Ok((Arc::new(map), gamma)),
            _ => unreachable!("only finite-feature kernels lack a spectral measure"),
        }
    }
}

enum Law {
    Zero,
    Exact,
    Parametric { features: Arc<dyn LinearFeatures>, state: AdaptState, gain: f64, rate: Vec<f64> },
    Tape { tape: TrajectoryTape, kernel: OperatorKernelSpec, gamma: f64 },
    Nn { params: NNParams, gamma: f64, rate: Vec<f64> },
}

/// Closed-loop tracking run of the `lti` or `quartic` benchmark.
pub fn run_control(cfg: &SimConfig) -> Result<MetricsSeries> {
    run_control_observed(cfg, |_, _| {})
}

/// [`run_control`] that also hands `(t, x)` to `observe` at every step,
/// whether or not the step is recorded.
pub fn run_control_observed(cfg: &SimConfig, mut observe: impl FnMut(f64, &[f64])) -> Result<MetricsSeries> {
    cfg.validate()?;
    let bench = cfg.benchmark()?;
    let cert = LyapunovCertificate::from_matrix(&bench.a)?;
    let n = bench.n();
    let dt = cfg.dt;
    let steps = cfg.steps();
    let ad = &cfg.adaptation;
    let mut law = match ad.law {
        LawKind::None => Law::Zero,
        LawKind::Exact => Law::Exact,
        LawKind::Parametric => {
            let (features, gain) = model_features(cfg, cfg.seed)?;
            let m = features.feature_dim();
            Law::Parametric {
                state: AdaptState::zeros(0, m, MirrorMap::Euclidean, ad.mirror)?,
                features,
                gain,
                rate: vec![0.0; m],
            }
        }
        LawKind::Nonparametric => Law::Tape {
            tape: TrajectoryTape::new(n, n, dt)?,
            kernel: cfg.kernel.as_ref().expect("validated").to_spec()?,
            gamma: ad.gamma,
        },
        LawKind::Nn => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let params = NNParams::init(n, ad.width, n, &mut rng);
            let p = params.num_params();
            Law::Nn { params, gamma: ad.gamma, rate: vec![0.0; p] }
        }
    };

    let mut x = bench.initial_state(cfg.initial_offset.unwrap_or(0.5));
    let mut rec = Recorder::new(cfg, steps);
    let (mut xd, mut e, mut u, mut h, mut f, mut v) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut divergence = None;
    for i in 0..=steps {
        let t = i as f64 * dt;
        observe(t, &x);
        bench.desired(t, &mut xd);
        e.iter_mut().zip(x.iter().zip(&xd)).for_each(|(e, (x, d))| *e = x - d);
        let grad = (&cert.p * nalgebra::DVector::from_column_slice(&e)).data.as_vec().clone();
        let q = 0.5 * e.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
        let slope = ad.deadzone.slope_unchecked(q);
        bench.uncertainty(&x, &mut h);
        match &law {
            Law::Zero => u.fill(0.0),
            Law::Exact => u.copy_from_slice(&h),
            Law::Parametric { features, state, .. } => features.apply(&x, state.alpha_m(), &mut u),
            Law::Tape { tape, kernel, .. } => tape.input(kernel, &x, &mut u)?,
            Law::Nn { params, .. } => u.copy_from_slice(params.forward(&x)?.as_slice()),
        }
        if rec.wants(i) {
            rec.records.push(MetricRecord {
                t,
                tracking_error: norm(&e),
                input_norm: norm(&u),
                interp_error: dist(&u, &h),
                lyapunov: q,
            });
        }
        if i == steps {
            break;
        }
        bench.rhs_into(&x, &u, t, &mut f);
        match &mut law {
            Law::Zero | Law::Exact => {}
            Law::Parametric { features, state, gain, rate } => {
                v.iter_mut().zip(&grad).for_each(|(v, g)| *v = -*gain * slope * g);
                features.apply_transpose(&x, &v, rate);
                state.step(&[], rate, dt)?;
            }
            Law::Tape { tape, gamma, .. } => {
                v.iter_mut().zip(&grad).for_each(|(v, g)| *v = -*gamma * slope * g);
                tape.push(t, &x, &v)?;
            }
            Law::Nn { params, gamma, rate } => {
                v.iter_mut().zip(&grad).for_each(|(v, g)| *v = slope * g);
                params.rate_from_output_gradient(&x, &v, *gamma, rate);
                params.step(rate, dt)?;
            }
        }
        axpy(&mut x, dt, &f);
        if let Some(reason) = divergence_reason(&x) {
            divergence = Some(Divergence { t: t + dt, reason });
            break;
        }
    }
    let final_params = match law {
        Law::Parametric { state, .. } => state.alpha_m().to_vec(),
        Law::Nn { params, .. } => params.flatten(),
        _ => Vec::new(),
    };
    Ok(MetricsSeries { seed: cfg.seed, records: rec.records, divergence, final_params })
}

/// Continuous-time prediction run: `predictor` (linear truth) or `nbody`.
pub fn run_prediction(cfg: &SimConfig) -> Result<MetricsSeries> {
    cfg.validate()?;
    match cfg.system {
        SystemKind::Predictor => run_linear_prediction(cfg),
        SystemKind::Nbody => run_nbody(cfg),
        other => Err(Error::Config(format!("{other:?} is not a prediction system"))),
    }
}

fn run_linear_prediction(cfg: &SimConfig) -> Result<MetricsSeries> {
    let a = cfg.matrix_a()?;
    let n = a.nrows();
    let (features, gain) = model_features(cfg, cfg.seed)?;
    let pred = build_predictor(features, cfg.zeta.expect("validated"))?
        .with_gamma(gain)?
        .with_deadzone(cfg.adaptation.deadzone)?;
    let mut state = AdaptState::zeros(0, pred.model_dim(), MirrorMap::Euclidean, cfg.adaptation.mirror)?;
    let mut x = cfg.x0.clone().unwrap_or_else(|| vec![1.0; n]);
    let offset = cfg.initial_offset.unwrap_or(0.0);
    let mut xhat: Vec<f64> = x.iter().map(|v| v + offset).collect();
    let dt = cfg.dt;
    let steps = cfg.steps();
    let mut rec = Recorder::new(cfg, steps);
    let (mut fhat, mut xdot_hat, mut rate_m) = (vec![0.0; n], vec![0.0; n], vec![0.0; pred.model_dim()]);
    let mut divergence = None;
    let apply_a = |v: &[f64]| -> Vec<f64> { (&a * nalgebra::DVector::from_column_slice(v)).data.as_vec().clone() };
    for i in 0..=steps {
        let t = i as f64 * dt;
        if rec.wants(i) {
            pred.model_field(&state, &xhat, t, &mut fhat);
            rec.records.push(MetricRecord {
                t,
                tracking_error: dist(&xhat, &x),
                input_norm: norm(&fhat),
                interp_error: dist(&fhat, &apply_a(&xhat)),
                lyapunov: pred.energy(&xhat, &x),
            });
        }
        if i == steps {
            break;
        }
        pred.rhs_into(&state, &xhat, &x, t, &mut xdot_hat, &mut [], &mut rate_m)?;
        let f = apply_a(&x);
        axpy(&mut xhat, dt, &xdot_hat);
        state.step(&[], &rate_m, dt)?;
        axpy(&mut x, dt, &f);
        if let Some(reason) = divergence_reason(&xhat).or_else(|| divergence_reason(&x)) {
            divergence = Some(Divergence { t: t + dt, reason });
            break;
        }
    }
    Ok(MetricsSeries { seed: cfg.seed, records: rec.records, divergence, final_params: state.alpha_m().to_vec() })
}

fn run_nbody(cfg: &SimConfig) -> Result<MetricsSeries> {
    let spec = cfg.hamiltonian()?;
    let bank = bank_for(cfg, cfg.seed)?;
    let k = bank.k();
    let gamma = if cfg.adaptation.normalize_gain { cfg.adaptation.gamma / k as f64 } else { cfg.adaptation.gamma };
    let n = spec.state_dim();
    let md = spec.md();
    let mut x = spec.initial_state(cfg.nbody.ic_seed)?;
    let offset = cfg.initial_offset.unwrap_or(0.0);
    let mut xhat: Vec<f64> = x.iter().map(|v| v + offset).collect();
    let mut weights = vec![0.0; k];
    let (mut drift, mut rate, mut f) = (vec![0.0; n], vec![0.0; k], vec![0.0; n]);
    let (mut learned, mut fhat_true) = (vec![0.0; n], vec![0.0; n]);
    let dt = cfg.dt;
    let steps = cfg.steps();
    let mut rec = Recorder::new(cfg, steps);
    let mut divergence = None;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let r = spec.min_distance(&x[..md]);
        if !(r >= spec.floor) {
            let err = Error::Singularity { distance: r, floor: spec.floor };
            divergence = Some(Divergence { t, reason: err.to_string() });
            break;
        }
        if rec.wants(i) {
            learned_field_into(&spec, &bank, &weights, &xhat, &mut learned);
            spec.vector_field(&xhat, &mut fhat_true);
            rec.records.push(MetricRecord {
                t,
                tracking_error: dist(&xhat, &x),
                input_norm: norm(&learned),
                interp_error: dist(&learned, &fhat_true),
                lyapunov: dist(&xhat, &x).powi(2),
            });
        }
        if i == steps {
            break;
        }
        symplectic_predictor_rhs_into(&spec, &bank, &weights, gamma, &xhat, &x, &mut drift, &mut rate);
        spec.vector_field(&x, &mut f);
        axpy(&mut xhat, dt, &drift);
        axpy(&mut weights, dt, &rate);
        axpy(&mut x, dt, &f);
        if let Some(reason) = divergence_reason(&xhat).or_else(|| divergence_reason(&x)) {
            divergence = Some(Divergence { t: t + dt, reason });
            break;
        }
    }
    Ok(MetricsSeries { seed: cfg.seed, records: rec.records, divergence, final_params: weights })
}

const REEXCITE_REL: f64 = 1e-6;

/// Measurement-by-measurement energies of a sampling run.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingRun {
    pub series: MetricsSeries,
    /// `(E_i, E_{i+1})` per measurement interval.
    pub energies: Vec<(f64, f64)>,
    /// `2 lambda_max(sym A)`
    pub lambda_bar: f64,
    pub beta: f64,
    pub dt_meas: f64,
}

impl SamplingRun {
    /// Fraction of intervals with `E_{i+1} <= beta exp(lambda_bar dt) E_i`.
    pub fn bound_holds_fraction(&self) -> f64 {
        let factor = self.beta * (self.lambda_bar * self.dt_meas).exp();
        let ok = self.energies.iter().filter(|(a, b)| *b <= factor * a).count();
        ok as f64 / self.energies.len().max(1) as f64
    }
}

/// Linear truth `x' = A x` sampled every `dt_meas`; the estimate flows open
/// loop with the exact flow `exp(A dt_meas)` and is then blended toward the
/// measurement. The estimate is re-excited whenever the error falls below
/// `1e-6` of the state magnitudes, where rounding in `xhat - x` would
/// otherwise swamp the contraction being measured.
pub fn run_sampling(cfg: &SimConfig) -> Result<SamplingRun> {
    cfg.validate()?;
    if cfg.system != SystemKind::Sampling {
        return Err(Error::Config("run_sampling needs system \"sampling\"".into()));
    }
    let a = cfg.matrix_a()?;
    let n = a.nrows();
    let spec = DiscretePredictorSpec::new(cfg.beta.expect("validated"))?;
    let dtm = cfg.dt_meas.expect("validated");
    let flow = matrix_exp(&a, dtm);
    let sym = (&a + a.transpose()) * 0.5;
    let lambda_bar = 2.0 * sym.symmetric_eigenvalues().max();
    let count = (cfg.horizon / dtm * (1.0 + 1e-12)).floor() as usize;
    let offset = cfg.initial_offset.unwrap_or(0.5);
    let mut x = cfg.x0.clone().unwrap_or_else(|| vec![1.0; n]);
    let mut xhat: Vec<f64> = x.iter().map(|v| v + offset).collect();
    let propagate = |v: &[f64]| -> Vec<f64> { (&flow * nalgebra::DVector::from_column_slice(v)).data.as_vec().clone() };
    let mut energies = Vec::with_capacity(count);
    let mut records = Vec::with_capacity(count + 1);
    for i in 0..count {
        if dist(&xhat, &x) <= REEXCITE_REL * (norm(&x) + norm(&xhat)) {
            xhat = x.iter().map(|v| v + offset).collect();
        }
        let x_next = propagate(&x);
        let step = crate::systems::discrete_sampling_step(&spec, &xhat, &x, &x_next, |s, _| propagate(s), dtm)?;
        records.push(MetricRecord {
            t: i as f64 * dtm,
            tracking_error: step.energy_before.sqrt(),
            input_norm: 0.0,
            interp_error: 0.0,
            lyapunov: step.energy_before,
        });
        energies.push((step.energy_before, step.energy_after));
        xhat = step.xhat;
        x = x_next;
    }
    let e = dist(&xhat, &x);
    records.push(MetricRecord {
        t: count as f64 * dtm,
        tracking_error: e,
        input_norm: 0.0,
        interp_error: 0.0,
        lyapunov: e * e,
    });
    Ok(SamplingRun {
        series: MetricsSeries { seed: cfg.seed, records, divergence: None, final_params: Vec::new() },
        energies,
        lambda_bar,
        beta: spec.beta,
        dt_meas: dtm,
    })
}

/// Dispatches on the configured system.
pub fn run_single(cfg: &SimConfig) -> Result<MetricsSeries> {
    match cfg.system {
        SystemKind::Lti | SystemKind::Quartic => run_control(cfg),
        SystemKind::Predictor | SystemKind::Nbody => run_prediction(cfg),
        SystemKind::Sampling => Ok(run_sampling(cfg)?.series),
    }
}

/// `trials` independent runs with seeds from [`trial_seed`], in trial order.
/// A trial that fails outright is returned as an error in its slot.
pub fn run_trials(cfg: &SimConfig) -> Result<Vec<Result<MetricsSeries>>> {
    cfg.validate()?;
    Ok((0..cfg.trials).into_par_iter().map(|i| run_single(&cfg.with_seed(trial_seed(cfg.seed, i)))).collect())
}
