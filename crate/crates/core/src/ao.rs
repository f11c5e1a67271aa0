//! Alternating optimization of covariances and RIS phases for one weight
//! vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, RMat};
use crate::rate::{best_allocation, common_rate, private_rates, project_proper, Allocation, CovarianceSet, Signaling};
use crate::region::{Access, SchemeConfig};
use crate::solver::{normalize_phases, solve_covariance_surrogate, solve_ris_surrogate, SolveStatus, SolverSettings};
use crate::surrogate::{
    build_common_cov_bound, build_common_phase_bound, build_private_cov_bound, build_private_phase_bound, linearize_unit_modulus,
};
use crate::wl_model::{ComplexScene, IqiProfile, RealLink, RisPhases, Transceiver};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AoSettings {
    pub max_iter: usize,
    /// Relative improvement below which an iteration counts as stalled.
    pub rel_tol: f64,
    /// Consecutive stalled iterations before stopping.
    pub patience: usize,
    /// Slack of the linearized unit-modulus constraint.
    pub epsilon: f64,
    /// Extra runs from random starting points; the best run is kept.
    pub restarts: usize,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            rel_tol: 1e-5,
            patience: 3,
            epsilon: 0.01,
            restarts: 0,
            seed: 0,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AoState {
    pub iteration: usize,
    pub cov: CovarianceSet,
    pub theta: RisPhases,
    /// Exact `max_{r_c split} min_k r_k / alpha_k` at the current iterate.
    pub objective: f64,
    /// Objective after every completed iteration, starting with the initial point.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegionPoint {
    pub scheme: String,
    pub alpha: Vec<f64>,
    pub rates: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Everything that stays fixed during one AO run.
pub struct AoContext<'a> {
    scene: ComplexScene,
    transceiver: Transceiver,
    signaling: Signaling,
    rate_splitting: bool,
    alpha: &'a [f64],
}

impl<'a> AoContext<'a> {
    pub fn new(scene: &ComplexScene, profile: &IqiProfile, scheme: &SchemeConfig, alpha: &'a [f64]) -> Result<Self> {
        let rate_splitting = match scheme.access {
            Access::Tin => false,
            Access::OneLayerRs => true,
            Access::TdmaTs => return Err(Error::Config("time sharing is not an alternating-optimization scheme".into())),
        };
        let sum: f64 = alpha.iter().sum();
        if alpha.len() != scene.users() || alpha.iter().any(|a| !(*a >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("weights {alpha:?} are not a distribution over {} users", scene.users())));
        }
        let scene = if scheme.ris {
            scene.clone()
        } else {
            ComplexScene::without_ris(scene.direct.clone(), scene.noise_power, scene.power_budget)
        };
        let transceiver = Transceiver::new(&scene, profile)?;
        Ok(Self {
            scene,
            transceiver,
            signaling: scheme.signaling,
            rate_splitting,
            alpha,
        })
    }

    pub fn has_ris(&self) -> bool {
        self.scene.ris_elements() > 0
    }

    pub fn links(&self, theta: &RisPhases) -> Result<Vec<RealLink>> {
        self.transceiver.links(&self.scene, theta)
    }

    /// Exact rates and best common-rate split at a given point.
    pub fn evaluate(&self, cov: &CovarianceSet, theta: &RisPhases) -> Result<(Vec<f64>, f64, Allocation)> {
        let links = self.links(theta)?;
        let private = private_rates(&links, cov)?;
        let common = if self.rate_splitting { common_rate(&links, cov)? } else { 0.0 };
        let alloc = best_allocation(&private, common, self.alpha);
        Ok((private, common, alloc))
    }

    pub fn initial_state(&self) -> Result<AoState> {
        let cov = CovarianceSet::uniform(
            self.scene.users(),
            self.scene.bs_antennas(),
            self.scene.power_budget,
            self.rate_splitting,
        );
        self.state_at(cov, RisPhases::ones(self.scene.ris_elements()))
    }

    /// Random covariances using the full budget and random phases.
    pub fn random_state(&self, rng: &mut ChaCha8Rng) -> Result<AoState> {
        let n = 2 * self.scene.bs_antennas();
        let mut draw = |weight: f64| {
            let a = RMat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = symmetrize(&(&a * a.transpose() + RMat::identity(n, n) * 0.1));
            let p = match self.signaling {
                Signaling::Proper => project_proper(&p),
                Signaling::Improper => p,
            };
            let w = weight * rng.gen_range(0.2..1.0);
            (p.clone() / p.trace(), w)
        };
        let users = self.scene.users();
        let mut cov = CovarianceSet::zeros(users, n / 2);
        let (common, wc) = if self.rate_splitting { draw(1.0) } else { (RMat::zeros(n, n), 0.0) };
        let privates: Vec<(RMat, f64)> = (0..users).map(|_| draw(1.0)).collect();
        let total = wc + privates.iter().map(|p| p.1).sum::<f64>();
        let power = self.scene.power_budget;
        cov.common = common * (power * wc / total);
        for (k, (p, w)) in privates.into_iter().enumerate() {
            cov.private[k] = p * (power * w / total);
        }
        let angles: Vec<f64> = (0..self.scene.ris_elements())
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        self.state_at(cov, RisPhases::from_angles(&angles))
    }

    pub fn state_at(&self, mut cov: CovarianceSet, theta: RisPhases) -> Result<AoState> {
        if !self.rate_splitting {
            cov.common = RMat::zeros(cov.dim(), cov.dim());
        }
        cov.validate(self.scene.power_budget)?;
        let (_, _, alloc) = self.evaluate(&cov, &theta)?;
        cov.common_alloc = alloc.shares;
        Ok(AoState {
            iteration: 0,
            cov,
            theta,
            objective: alloc.objective,
            trace: vec![alloc.objective],
        })
    }

    fn covariance_step(&self, state: &AoState, solver: &SolverSettings) -> Result<(CovarianceSet, f64)> {
        let links = self.links(&state.theta)?;
        let users = self.scene.users();
        let private = (0..users)
            .map(|k| build_private_cov_bound(&links, &state.cov, k))
            .collect::<Result<Vec<_>>>()?;
        let common = if self.rate_splitting {
            (0..users)
                .map(|k| build_common_cov_bound(&links, &state.cov, k))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let (mut cov, _) = solve_covariance_surrogate(
            &private,
            &common,
            self.scene.power_budget,
            self.signaling,
            self.alpha,
            &state.cov,
            solver,
        )?;
        let (_, _, alloc) = self.evaluate(&cov, &state.theta)?;
        cov.common_alloc = alloc.shares;
        Ok((cov, alloc.objective))
    }

    fn ris_step(&self, cov: &CovarianceSet, theta_prev: &RisPhases, epsilon: f64, solver: &SolverSettings) -> Result<RisPhases> {
        let links = self.links(theta_prev)?;
        let users = self.scene.users();
        let maps: Vec<_> = (0..users).map(|k| self.transceiver.ris_map(&self.scene, k)).collect();
        let private = (0..users)
            .map(|k| build_private_phase_bound(&maps[k], &links[k].noise, cov, theta_prev, k))
            .collect::<Result<Vec<_>>>()?;
        let common = if self.rate_splitting && cov.common.trace() > 0.0 {
            (0..users)
                .map(|k| build_common_phase_bound(&maps[k], &links[k].noise, cov, theta_prev, k))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let cuts = linearize_unit_modulus(theta_prev, epsilon)?;
        let (hat, _) = solve_ris_surrogate(&private, &common, &cuts, self.alpha, solver)?;
        Ok(normalize_phases(&hat, theta_prev))
    }

}

/// One covariance update followed, when the scheme has an RIS, by one phase
/// update that is kept only if the exact objective does not drop.
pub fn ao_iterate(ctx: &AoContext<'_>, state: &AoState, settings: &AoSettings) -> Result<AoState> {
    let iteration = state.iteration + 1;
    let mut next = state.clone();
    next.iteration = iteration;

    let (cov, objective) = ctx.covariance_step(state, &settings.solver).map_err(|e| e.at_iteration(iteration))?;
    // the previous point is feasible for the surrogate, so a drop here is solver round-off
    if objective >= state.objective {
        next.cov = cov;
        next.objective = objective;
    }

    if ctx.has_ris() {
        let theta = ctx
            .ris_step(&next.cov, &next.theta, settings.epsilon, &settings.solver)
            .map_err(|e| e.at_iteration(iteration))?;
        if theta != next.theta {
            let (_, _, alloc) = ctx.evaluate(&next.cov, &theta).map_err(|e| e.at_iteration(iteration))?;
            if alloc.objective >= next.objective {
                next.theta = theta;
                next.objective = alloc.objective;
                next.cov.common_alloc = alloc.shares;
            }
        }
    }
    next.trace.push(next.objective);
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub state: AoState,
    pub status: SolveStatus,
    pub private: Vec<f64>,
    pub common: f64,
    /// Exact per-user rates `r_pk + r_ck`.
    pub rates: Vec<f64>,
}

impl AoOutcome {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn point(&self, scheme: &SchemeConfig, alpha: &[f64]) -> RegionPoint {
        RegionPoint {
            scheme: scheme.label(),
            alpha: alpha.to_vec(),
            rates: self.rates.clone(),
            converged: self.converged(),
            iterations: self.state.iteration,
        }
    }
}

/// Iterates from `init` until the relative improvement stays below
/// `rel_tol` for `patience` iterations or `max_iter` is reached.
pub fn iterate_from(ctx: &AoContext<'_>, init: AoState, settings: &AoSettings) -> Result<AoOutcome> {
    let mut state = init;
    let mut stalled = 0;
    let mut status = SolveStatus::MaxIter;
    if ctx.scene.power_budget == 0.0 {
        status = SolveStatus::Converged;
    }
    while status != SolveStatus::Converged && state.iteration < settings.max_iter {
        let next = ao_iterate(ctx, &state, settings)?;
        let gain = (next.objective - state.objective) / state.objective.abs().max(1e-12);
        stalled = if gain < settings.rel_tol { stalled + 1 } else { 0 };
        state = next;
        if stalled >= settings.patience {
            status = SolveStatus::Converged;
        }
    }
    let (private, common, alloc) = ctx.evaluate(&state.cov, &state.theta)?;
    let rates = private.iter().zip(&alloc.shares).map(|(p, s)| p + s).collect();
    Ok(AoOutcome {
        state,
        status,
        private,
        common,
        rates,
    })
}

/// Runs the alternating optimization for one weight vector.
///
/// `init` overrides the uniform white starting point. With
/// `settings.restarts > 0`, additional seeded random starts are tried and
/// the run with the largest objective is returned.
pub fn run_ao(
    scene: &ComplexScene,
    profile: &IqiProfile,
    scheme: &SchemeConfig,
    alpha: &[f64],
    init: Option<(CovarianceSet, RisPhases)>,
    settings: &AoSettings,
) -> Result<AoOutcome> {
    let ctx = AoContext::new(scene, profile, scheme, alpha)?;
    let start = match init {
        Some((cov, theta)) => ctx.state_at(cov, theta)?,
        None => ctx.initial_state()?,
    };
    let mut best = iterate_from(&ctx, start, settings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.restarts {
        let start = ctx.random_state(&mut rng)?;
        let run = iterate_from(&ctx, start, settings)?;
        if run.state.objective > best.state.objective {
            best = run;
        }
    }
    Ok(best)
}
