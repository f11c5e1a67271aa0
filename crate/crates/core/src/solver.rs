//! Log-barrier interior-point solver for the two convex surrogate problems.
//!
//! Both problems are written in epigraph form: maximize `r` subject to
//! `bound_pk + r_ck >= alpha_k r`, `sum_j r_cj <= bound_ck` for every `k`,
//! `r_ck >= 0`, and the block-specific constraints (PSD covariances and the
//! power budget, or `|theta_n| <= 1` and the linearized unit-modulus cuts).
//! Every constraint function is concave, so `-log` of it is convex and the
//! centering steps are damped Newton steps with backtracking.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{logdet_inverse_spd, min_eigenvalue, stack_re_im, symmetrize, unstack_re_im, RMat, C64, HALF_LOG2};
use crate::rate::{best_allocation, CovarianceSet, Signaling};
use crate::surrogate::{CovarianceSurrogate, PhaseSurrogate, QuadraticModel, UnitModulusCut};
use crate::wl_model::RisPhases;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverSettings {
    /// Stop once the barrier duality gap `m / t` is below this (bits/s/Hz).
    pub gap_tol: f64,
    pub max_newton: usize,
    pub mu: f64,
    pub t0: f64,
    /// Centering stops when half the squared Newton decrement is below this
    /// or below `0.01 t gap_tol`, whichever is larger.
    pub newton_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            max_newton: 200,
            mu: 20.0,
            t0: 1.0,
            newton_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub objective: f64,
    pub iterations: usize,
    pub feasibility_residual: f64,
    pub gap: f64,
    pub status: SolveStatus,
}

struct Barrier {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    derivs: bool,
}

impl Barrier {
    fn new(n: usize, derivs: bool) -> Self {
        Self {
            value: 0.0,
            grad: DVector::zeros(if derivs { n } else { 0 }),
            hess: DMatrix::zeros(if derivs { n } else { 0 }, if derivs { n } else { 0 }),
            derivs,
        }
    }

    /// Adds `-log g` given the gradient (and Hessian, if non-zero) of `g`.
    /// Returns `false` when `g` is not strictly positive.
    fn add_neg_log(&mut self, g: f64, dg: &[(usize, f64)], d2g: &[(usize, usize, f64)]) -> bool {
        if !(g > 0.0) || !g.is_finite() {
            return false;
        }
        self.value -= g.ln();
        if self.derivs {
            for &(i, v) in dg {
                self.grad[i] -= v / g;
            }
            let g2 = g * g;
            for &(i, vi) in dg {
                for &(j, vj) in dg {
                    self.hess[(i, j)] += vi * vj / g2;
                }
            }
            for &(i, j, v) in d2g {
                self.hess[(i, j)] -= v / g;
            }
        }
        true
    }
}

trait BarrierProblem {
    fn dim(&self) -> usize;
    /// Barrier parameter: number of scalar constraints plus PSD block sizes.
    fn degree(&self) -> f64;
    fn objective_index(&self) -> usize;
    fn barrier(&self, x: &DVector<f64>, derivs: bool) -> Option<Barrier>;
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let rhs = -grad;
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    let scale = hess.diagonal().amax().max(1.0);
    let mut reg = 1e-12 * scale;
    for _ in 0..12 {
        let h = hess + DMatrix::identity(hess.nrows(), hess.ncols()) * reg;
        if let Some(ch) = h.cholesky() {
            return Some(ch.solve(&rhs));
        }
        reg *= 100.0;
    }
    None
}

fn barrier_maximize<P: BarrierProblem>(problem: &P, x0: DVector<f64>, settings: &SolverSettings) -> Result<(DVector<f64>, f64, usize, SolveStatus)> {
    let ri = problem.objective_index();
    let m = problem.degree();
    let mut x = x0;
    if problem.barrier(&x, false).is_none() {
        return Err(Error::Infeasible("starting point is not strictly feasible".into()));
    }
    let mut t = settings.t0;
    let mut newton = 0usize;
    let mut status = SolveStatus::Converged;
    'outer: loop {
        loop {
            let b = problem
                .barrier(&x, true)
                .ok_or_else(|| Error::Infeasible("iterate left the barrier domain".into()))?;
            let mut grad = b.grad;
            grad[ri] -= t;
            let Some(step) = newton_direction(&b.hess, &grad) else {
                break;
            };
            let slope = grad.dot(&step);
            // centering error in objective units is about lambda^2 / (2t)
            if -slope / 2.0 <= settings.newton_tol.max(0.01 * t * settings.gap_tol) {
                break;
            }
            if newton >= settings.max_newton {
                status = SolveStatus::MaxIter;
                break 'outer;
            }
            newton += 1;
            let f0 = -t * x[ri] + b.value;
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-14 {
                let cand = &x + &step * s;
                if let Some(v) = problem.barrier(&cand, false) {
                    if -t * cand[ri] + v.value <= f0 + 0.01 * s * slope {
                        x = cand;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved {
                // no representable descent left at this t
                break;
            }
        }
        if m / t <= settings.gap_tol {
            break;
        }
        t *= settings.mu;
    }
    Ok((x, m / t, newton, status))
}

/// Orthonormal (Frobenius) basis of the admissible covariance subspace.
#[derive(Debug, Clone)]
pub struct MatrixBasis {
    n: usize,
    elems: Vec<RMat>,
}

impl MatrixBasis {
    /// All real symmetric `n x n` matrices.
    pub fn symmetric(n: usize) -> Self {
        let mut elems = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let mut e = RMat::zeros(n, n);
                if i == j {
                    e[(i, i)] = 1.0;
                } else {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    e[(i, j)] = s;
                    e[(j, i)] = s;
                }
                elems.push(e);
            }
        }
        Self { n, elems }
    }

    /// Symmetric `2m x 2m` matrices `[[A, -B], [B, A]]` (`A` symmetric, `B`
    /// skew): real images of proper complex covariances.
    pub fn proper(n: usize) -> Self {
        assert!(n % 2 == 0, "proper covariances have even real dimension");
        let m = n / 2;
        let mut elems = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in i..m {
                let mut e = RMat::zeros(n, n);
                let v = if i == j { 0.5f64.sqrt() } else { 0.5 };
                for (a, b) in [(i, j), (j, i)] {
                    e[(a, b)] = v;
                    e[(a + m, b + m)] = v;
                }
                elems.push(e);
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                let mut e = RMat::zeros(n, n);
                // B = (e_i e_j^T - e_j e_i^T) / 2 placed as [[0, -B], [B, 0]]
                e[(i + m, j)] = 0.5;
                e[(j + m, i)] = -0.5;
                e[(i, j + m)] = -0.5;
                e[(j, i + m)] = 0.5;
                elems.push(e);
            }
        }
        Self { n, elems }
    }

    pub fn for_signaling(signaling: Signaling, n: usize) -> Self {
        match signaling {
            Signaling::Proper => Self::proper(n),
            Signaling::Improper => Self::symmetric(n),
        }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elements(&self) -> &[RMat] {
        &self.elems
    }

    pub fn compose(&self, coeffs: &[f64]) -> RMat {
        let mut out = RMat::zeros(self.n, self.n);
        for (e, &c) in self.elems.iter().zip(coeffs) {
            if c != 0.0 {
                out += e * c;
            }
        }
        out
    }

    pub fn coords(&self, p: &RMat) -> Vec<f64> {
        self.elems.iter().map(|e| e.dot(p)).collect()
    }
}

/// Users with a rate-profile constraint.
fn active_users(alpha: &[f64]) -> Vec<usize> {
    (0..alpha.len()).filter(|&k| alpha[k] > 0.0).collect()
}

fn validate_alpha(alpha: &[f64]) -> Result<()> {
    let sum: f64 = alpha.iter().sum();
    if alpha.iter().any(|a| !(*a >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("weights must be non-negative and sum to 1, got {alpha:?}")));
    }
    Ok(())
}

struct CovarianceProblem<'a> {
    private: &'a [CovarianceSurrogate],
    common: &'a [CovarianceSurrogate],
    alpha: &'a [f64],
    power: f64,
    basis: &'a MatrixBasis,
    with_common: bool,
    active: Vec<usize>,
    traces: Vec<f64>,
}

impl CovarianceProblem<'_> {
    fn blocks(&self) -> usize {
        self.private.len() + usize::from(self.with_common)
    }

    fn nb(&self) -> usize {
        self.basis.len()
    }

    fn common_block(&self) -> Option<usize> {
        self.with_common.then_some(0)
    }

    fn private_block(&self, k: usize) -> usize {
        k + usize::from(self.with_common)
    }

    fn share_index(&self, k: usize) -> Option<usize> {
        if !self.with_common {
            return None;
        }
        self.active
            .iter()
            .position(|&u| u == k)
            .map(|i| self.blocks() * self.nb() + i)
    }

    fn shares(&self) -> usize {
        if self.with_common {
            self.active.len()
        } else {
            0
        }
    }

    fn matrices(&self, x: &DVector<f64>) -> Vec<RMat> {
        let nb = self.nb();
        (0..self.blocks())
            .map(|b| self.basis.compose(&x.as_slice()[b * nb..(b + 1) * nb]))
            .collect()
    }

    /// Value and derivatives of one covariance surrogate at the block matrices.
    fn surrogate_terms(
        &self,
        s: &CovarianceSurrogate,
        mats: &[RMat],
        derivs: bool,
    ) -> Option<(f64, Vec<(usize, f64)>, Vec<(usize, usize, f64)>)> {
        let nb = self.nb();
        let concave_blocks: Vec<usize> = self
            .common_block()
            .filter(|_| s.includes_common())
            .into_iter()
            .chain((0..self.private.len()).map(|k| self.private_block(k)))
            .collect();
        let mut total = RMat::zeros(s.channel.ncols(), s.channel.ncols());
        for &b in &concave_blocks {
            total += &mats[b];
        }
        let arg = symmetrize(&(&s.noise + &s.channel * total * s.channel.transpose()));
        let (ld, inv) = logdet_inverse_spd(&arg).ok()?;
        let mut value = ld * HALF_LOG2 + s.constant;
        for k in 0..self.private.len() {
            if s.is_linearized(k) {
                value -= s.linear.dot(&mats[self.private_block(k)]);
            }
        }
        if !derivs {
            return Some((value, Vec::new(), Vec::new()));
        }
        let m = symmetrize(&(s.channel.transpose() * inv * &s.channel));
        let me: Vec<RMat> = self.basis.elements().iter().map(|e| &m * e).collect();
        let mut dg = Vec::new();
        for &b in &concave_blocks {
            for (a, w) in me.iter().enumerate() {
                dg.push((b * nb + a, w.trace() * HALF_LOG2));
            }
        }
        for k in 0..self.private.len() {
            if s.is_linearized(k) {
                let b = self.private_block(k);
                for (a, e) in self.basis.elements().iter().enumerate() {
                    dg.push((b * nb + a, -s.linear.dot(e)));
                }
            }
        }
        let mut gram = DMatrix::zeros(nb, nb);
        for a in 0..nb {
            for c in a..nb {
                let v = me[a].dot(&me[c].transpose());
                gram[(a, c)] = v;
                gram[(c, a)] = v;
            }
        }
        let mut d2g = Vec::with_capacity(concave_blocks.len().pow(2) * nb * nb);
        for &b1 in &concave_blocks {
            for &b2 in &concave_blocks {
                for a in 0..nb {
                    for c in 0..nb {
                        d2g.push((b1 * nb + a, b2 * nb + c, -gram[(a, c)] * HALF_LOG2));
                    }
                }
            }
        }
        Some((value, dg, d2g))
    }
}

/// Merges duplicate gradient indices so `add_neg_log` sees each once.
fn compact(dg: Vec<(usize, f64)>, n: usize) -> Vec<(usize, f64)> {
    let mut dense = vec![0.0; n];
    let mut seen = vec![false; n];
    for (i, v) in dg {
        dense[i] += v;
        seen[i] = true;
    }
    (0..n).filter(|&i| seen[i]).map(|i| (i, dense[i])).collect()
}

impl BarrierProblem for CovarianceProblem<'_> {
    fn dim(&self) -> usize {
        self.blocks() * self.nb() + self.shares() + 1
    }

    fn degree(&self) -> f64 {
        let n = self.basis.n as f64;
        let common = if self.with_common { self.private.len() } else { 0 };
        self.blocks() as f64 * n + 1.0 + self.shares() as f64 + self.active.len() as f64 + common as f64
    }

    fn objective_index(&self) -> usize {
        self.dim() - 1
    }

    fn barrier(&self, x: &DVector<f64>, derivs: bool) -> Option<Barrier> {
        let n = self.dim();
        let nb = self.nb();
        let ri = self.objective_index();
        let mut b = Barrier::new(n, derivs);
        let mats = self.matrices(x);

        for (blk, p) in mats.iter().enumerate() {
            let (ld, inv) = logdet_inverse_spd(p).ok()?;
            b.value -= ld;
            if derivs {
                let w: Vec<RMat> = self.basis.elements().iter().map(|e| &inv * e).collect();
                for a in 0..nb {
                    b.grad[blk * nb + a] -= w[a].trace();
                    for c in 0..nb {
                        b.hess[(blk * nb + a, blk * nb + c)] += w[a].dot(&w[c].transpose());
                    }
                }
            }
        }

        let used: f64 = (0..self.blocks())
            .map(|blk| {
                (0..nb)
                    .map(|a| self.traces[a] * x[blk * nb + a])
                    .sum::<f64>()
            })
            .sum();
        let budget_grad: Vec<(usize, f64)> = (0..self.blocks() * nb).map(|i| (i, -self.traces[i % nb])).collect();
        if !b.add_neg_log(self.power - used, &budget_grad, &[]) {
            return None;
        }

        let share_sum: f64 = (0..self.shares()).map(|i| x[self.blocks() * nb + i]).sum();
        for i in 0..self.shares() {
            let idx = self.blocks() * nb + i;
            if !b.add_neg_log(x[idx], &[(idx, 1.0)], &[]) {
                return None;
            }
        }

        for &k in &self.active {
            let (v, mut dg, d2g) = self.surrogate_terms(&self.private[k], &mats, derivs)?;
            let mut g = v - self.alpha[k] * x[ri];
            dg.push((ri, -self.alpha[k]));
            if let Some(si) = self.share_index(k) {
                g += x[si];
                dg.push((si, 1.0));
            }
            if !b.add_neg_log(g, &compact(dg, n), &d2g) {
                return None;
            }
        }

        if self.with_common {
            for s in self.common {
                let (v, mut dg, d2g) = self.surrogate_terms(s, &mats, derivs)?;
                for i in 0..self.shares() {
                    dg.push((self.blocks() * nb + i, -1.0));
                }
                if !b.add_neg_log(v - share_sum, &compact(dg, n), &d2g) {
                    return None;
                }
            }
        }
        Some(b)
    }
}

/// Covariance update: maximizes the surrogate min-weighted rate over the
/// covariances and the common-rate split.
///
/// `common_bounds` empty means treating interference as noise: `P_c` and
/// every `r_ck` are pinned to zero. `start` is the expansion point.
pub fn solve_covariance_surrogate(
    private_bounds: &[CovarianceSurrogate],
    common_bounds: &[CovarianceSurrogate],
    power: f64,
    signaling: Signaling,
    alpha: &[f64],
    start: &CovarianceSet,
    settings: &SolverSettings,
) -> Result<(CovarianceSet, SolveReport)> {
    validate_alpha(alpha)?;
    let users = private_bounds.len();
    if alpha.len() != users || start.users() != users {
        return Err(Error::Config("weights, bounds and covariances disagree on the user count".into()));
    }
    if !common_bounds.is_empty() && common_bounds.len() != users {
        return Err(Error::Config("need one common bound per user".into()));
    }
    start.validate(power)?;
    let n = start.dim();
    let basis = MatrixBasis::for_signaling(signaling, n);
    let traces: Vec<f64> = basis.elements().iter().map(|e| e.trace()).collect();
    let active = active_users(alpha);

    let attempt = |with_common: bool| -> Option<(CovarianceProblem<'_>, DVector<f64>)> {
        let problem = CovarianceProblem {
            private: private_bounds,
            common: common_bounds,
            alpha,
            power,
            basis: &basis,
            with_common,
            active: active.clone(),
            traces: traces.clone(),
        };
        let blocks = problem.blocks();
        let white = RMat::identity(n, n) * (power / blocks as f64 / n as f64);
        for lambda in [0.1, 1e-2, 1e-3, 1e-4, 1e-6] {
            let shrink = 1.0 - lambda * 1e-3;
            let blend = |p: &RMat| (p * (1.0 - lambda) + &white * lambda) * shrink;
            let mut x = Vec::with_capacity(problem.dim());
            let mut cov = start.clone();
            if with_common {
                cov.common = blend(&start.common);
                x.extend(basis.coords(&cov.common));
            }
            for (k, p) in start.private.iter().enumerate() {
                cov.private[k] = blend(p);
                x.extend(basis.coords(&cov.private[k]));
            }
            let private_vals: Vec<f64> = private_bounds.iter().map(|s| s.value(&cov)).collect::<Result<_>>().ok()?;
            let mut shares = vec![0.0; users];
            if with_common {
                let c = common_bounds
                    .iter()
                    .map(|s| s.value(&cov))
                    .collect::<Result<Vec<f64>>>()
                    .ok()?
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                if !(c > 1e-12) {
                    continue;
                }
                for &k in &active {
                    shares[k] = 0.5 * c / active.len() as f64;
                    x.push(shares[k]);
                }
            }
            let r0 = active
                .iter()
                .map(|&k| (private_vals[k] + shares[k]) / alpha[k])
                .fold(f64::INFINITY, f64::min);
            x.push(r0 - 0.1 * r0.abs() - 1.0);
            let x = DVector::from_vec(x);
            if problem.barrier(&x, false).is_some() {
                return Some((problem, x));
            }
        }
        None
    };

    let wants_common = !common_bounds.is_empty();
    let (problem, x0) = match attempt(wants_common) {
        Some(v) => v,
        // no strictly positive common rate to split: fall back to TIN for this step
        None if wants_common => attempt(false).ok_or_else(|| Error::Infeasible("no strictly feasible start for the covariance update".into()))?,
        None => return Err(Error::Infeasible("no strictly feasible start for the covariance update".into())),
    };

    let (x, gap, iterations, status) = barrier_maximize(&problem, x0, settings)?;
    let mats = problem.matrices(&x);
    let mut out = CovarianceSet::zeros(users, n / 2);
    if let Some(b) = problem.common_block() {
        out.common = mats[b].clone();
    }
    for k in 0..users {
        out.private[k] = mats[problem.private_block(k)].clone();
        if let Some(si) = problem.share_index(k) {
            out.common_alloc[k] = x[si];
        }
    }
    let residual = std::iter::once(&out.common)
        .chain(&out.private)
        .map(|p| (-min_eigenvalue(p)).max(0.0))
        .fold((out.total_power() - power).max(0.0), f64::max);
    let status = if status == SolveStatus::Converged && (residual > 1e-7 || gap > 1e-5) {
        SolveStatus::MaxIter
    } else {
        status
    };
    Ok((
        out,
        SolveReport {
            objective: x[problem.objective_index()],
            iterations,
            feasibility_residual: residual,
            gap,
            status,
        },
    ))
}

struct PhaseProblem<'a> {
    private: Vec<QuadraticModel>,
    common: Vec<QuadraticModel>,
    cuts: &'a [UnitModulusCut],
    alpha: &'a [f64],
    active: Vec<usize>,
    with_common: bool,
}

impl PhaseProblem<'_> {
    fn zdim(&self) -> usize {
        2 * self.cuts.len()
    }

    fn shares(&self) -> usize {
        if self.with_common {
            self.active.len()
        } else {
            0
        }
    }

    fn quad_terms(&self, q: &QuadraticModel, z: &[f64], derivs: bool) -> (f64, Vec<(usize, f64)>, Vec<(usize, usize, f64)>) {
        let v = q.eval(z);
        if !derivs {
            return (v, Vec::new(), Vec::new());
        }
        let g = q.grad(z);
        let d = self.zdim();
        let dg = (0..d).map(|i| (i, g[i])).collect();
        let mut d2g = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let h = q.hessian[(i, j)];
                if h != 0.0 {
                    d2g.push((i, j, h));
                }
            }
        }
        (v, dg, d2g)
    }
}

impl BarrierProblem for PhaseProblem<'_> {
    fn dim(&self) -> usize {
        self.zdim() + self.shares() + 1
    }

    fn degree(&self) -> f64 {
        let common = if self.with_common { self.common.len() } else { 0 };
        (2 * self.cuts.len() + self.shares() + self.active.len() + common) as f64
    }

    fn objective_index(&self) -> usize {
        self.dim() - 1
    }

    fn barrier(&self, x: &DVector<f64>, derivs: bool) -> Option<Barrier> {
        let n = self.dim();
        let d = self.zdim();
        let nr = self.cuts.len();
        let ri = self.objective_index();
        let z = &x.as_slice()[..d];
        let mut b = Barrier::new(n, derivs);

        for (i, cut) in self.cuts.iter().enumerate() {
            let (re, im) = (z[i], z[i + nr]);
            let g = 1.0 - re * re - im * im;
            if !b.add_neg_log(g, &[(i, -2.0 * re), (i + nr, -2.0 * im)], &[(i, i, -2.0), (i + nr, i + nr, -2.0)]) {
                return None;
            }
            let g = cut.slack(C64::new(re, im));
            if !b.add_neg_log(g, &[(i, 2.0 * cut.anchor.re), (i + nr, 2.0 * cut.anchor.im)], &[]) {
                return None;
            }
        }

        let share_sum: f64 = (0..self.shares()).map(|i| x[d + i]).sum();
        for i in 0..self.shares() {
            if !b.add_neg_log(x[d + i], &[(d + i, 1.0)], &[]) {
                return None;
            }
        }

        for (pos, &k) in self.active.iter().enumerate() {
            let (v, mut dg, d2g) = self.quad_terms(&self.private[k], z, derivs);
            let mut g = v - self.alpha[k] * x[ri];
            dg.push((ri, -self.alpha[k]));
            if self.with_common {
                g += x[d + pos];
                dg.push((d + pos, 1.0));
            }
            if !b.add_neg_log(g, &dg, &d2g) {
                return None;
            }
        }

        if self.with_common {
            for q in &self.common {
                let (v, mut dg, d2g) = self.quad_terms(q, z, derivs);
                for i in 0..self.shares() {
                    dg.push((d + i, -1.0));
                }
                if !b.add_neg_log(v - share_sum, &dg, &d2g) {
                    return None;
                }
            }
        }
        Some(b)
    }
}

/// Objective of the phase surrogate problem at the expansion point.
fn anchor_objective(private: &[PhaseSurrogate], common: &[PhaseSurrogate], alpha: &[f64]) -> f64 {
    let p: Vec<f64> = private.iter().map(PhaseSurrogate::anchor_rate).collect();
    let c = common.iter().map(PhaseSurrogate::anchor_rate).fold(f64::INFINITY, f64::min);
    best_allocation(&p, if common.is_empty() { 0.0 } else { c }, alpha).objective
}

/// RIS update: maximizes the surrogate min-weighted rate over relaxed phases.
///
/// Returns the raw (not yet normalized) phases. When the surrogate cannot
/// improve on the expansion point the previous phases are returned as is.
pub fn solve_ris_surrogate(
    private_bounds: &[PhaseSurrogate],
    common_bounds: &[PhaseSurrogate],
    cuts: &[UnitModulusCut],
    alpha: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<C64>, SolveReport)> {
    validate_alpha(alpha)?;
    let users = private_bounds.len();
    if alpha.len() != users || (!common_bounds.is_empty() && common_bounds.len() != users) {
        return Err(Error::Config("weights and phase bounds disagree on the user count".into()));
    }
    let previous: Vec<C64> = cuts.iter().map(|c| c.anchor).collect();
    let baseline = anchor_objective(private_bounds, common_bounds, alpha);
    let unchanged = |iterations| {
        (
            previous.clone(),
            SolveReport {
                objective: baseline,
                iterations,
                feasibility_residual: 0.0,
                gap: 0.0,
                status: SolveStatus::Converged,
            },
        )
    };
    if cuts.is_empty() {
        return Ok(unchanged(0));
    }
    if let Some(b) = private_bounds.iter().chain(common_bounds).find(|b| b.dim() != 2 * cuts.len()) {
        return Err(Error::Config(format!("phase bound over {} reals but {} cuts", b.dim(), cuts.len())));
    }
    let private: Vec<QuadraticModel> = private_bounds.iter().map(PhaseSurrogate::quadratic).collect();
    let common: Vec<QuadraticModel> = common_bounds.iter().map(PhaseSurrogate::quadratic).collect();
    let active = active_users(alpha);
    if private
        .iter()
        .enumerate()
        .filter(|(k, _)| active.contains(k))
        .map(|(_, q)| q)
        .chain(&common)
        .all(|q| q.is_constant(1e-14))
    {
        return Ok(unchanged(0));
    }

    let epsilon = cuts[0].epsilon;
    let z0: Vec<f64> = stack_re_im(&previous).iter().map(|v| v * (1.0 - 0.25 * epsilon)).collect();
    let build = |with_common: bool| -> Option<(PhaseProblem<'_>, DVector<f64>)> {
        let problem = PhaseProblem {
            private: private.clone(),
            common: common.clone(),
            cuts,
            alpha,
            active: active.clone(),
            with_common,
        };
        let mut x = z0.clone();
        let mut shares = vec![0.0; users];
        if with_common {
            let c = common.iter().map(|q| q.eval(&z0)).fold(f64::INFINITY, f64::min);
            if !(c > 1e-12) {
                return None;
            }
            for &k in &active {
                shares[k] = 0.5 * c / active.len() as f64;
                x.push(shares[k]);
            }
        }
        let r0 = active
            .iter()
            .map(|&k| (private[k].eval(&z0) + shares[k]) / alpha[k])
            .fold(f64::INFINITY, f64::min);
        x.push(r0 - 0.1 * r0.abs() - 1.0);
        let x = DVector::from_vec(x);
        problem.barrier(&x, false).is_some().then_some((problem, x))
    };
    let (problem, x0) = match build(!common.is_empty()).or_else(|| build(false)) {
        Some(v) => v,
        None => return Err(Error::Infeasible("no strictly feasible start for the RIS update".into())),
    };
    let (x, gap, iterations, status) = barrier_maximize(&problem, x0, settings)?;
    let objective = x[problem.objective_index()];
    if objective <= baseline + 1e-9 {
        return Ok(unchanged(iterations));
    }
    let theta = unstack_re_im(&x.as_slice()[..problem.zdim()]);
    let residual = theta
        .iter()
        .zip(cuts)
        .map(|(t, c)| (t.norm_sqr() - 1.0).max(-c.slack(*t)).max(0.0))
        .fold(0.0, f64::max);
    Ok((
        theta,
        SolveReport {
            objective,
            iterations,
            feasibility_residual: residual,
            gap,
            status: if status == SolveStatus::Converged && gap > 1e-5 { SolveStatus::MaxIter } else { status },
        },
    ))
}

/// Projects relaxed phases back onto the unit circle; a zero entry keeps the
/// previous phase.
pub fn normalize_phases(theta_hat: &[C64], previous: &RisPhases) -> RisPhases {
    RisPhases(
        theta_hat
            .iter()
            .zip(&previous.0)
            .map(|(t, p)| {
                let r = t.norm();
                if r > 1e-12 && r.is_finite() {
                    t / r
                } else {
                    *p
                }
            })
            .collect(),
    )
}
