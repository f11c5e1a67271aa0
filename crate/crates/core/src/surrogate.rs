//! Concave minorizers of the decoding rates.
//!
//! * In the covariances: keep the concave log-det `r_1` and replace the
//!   subtracted log-det `r_2` by its tangent plane at the expansion point.
//! * In the RIS phases: the quadratic-over-linear minorizer of
//!   `ln det(I + Y^-1 V V^T)` around `(V̄, Ȳ)`, which is a concave quadratic
//!   in `[Re theta; Im theta]` because the real channel is affine in it.
//! * The reverse-convex half of `|theta_n| = 1` linearized around the
//!   previous phases and relaxed by `epsilon`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{logdet_inverse_spd, logdet_spd, psd_sqrt, symmetrize, trace_product, RMat, C64, HALF_LOG2};
use crate::rate::CovarianceSet;
use crate::wl_model::{RealLink, RisChannelMap, RisPhases};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Private(usize),
    Common(usize),
}

impl RateKind {
    pub fn user(self) -> usize {
        match self {
            RateKind::Private(k) | RateKind::Common(k) => k,
        }
    }
}

/// `r_1(P) + constant - sum_j tr(linear P_j)`.
///
/// For a private bound the concave part sums all private covariances and
/// the linear part covers `j != k`; for a common bound the concave part also
/// includes `P_c` and the linear part covers every private covariance.
#[derive(Debug, Clone)]
pub struct CovarianceSurrogate {
    pub kind: RateKind,
    pub channel: RMat,
    pub noise: RMat,
    /// Tangent of `r_2`, already scaled to bits.
    pub linear: RMat,
    pub constant: f64,
}

impl CovarianceSurrogate {
    pub fn includes_common(&self) -> bool {
        matches!(self.kind, RateKind::Common(_))
    }

    pub fn is_linearized(&self, j: usize) -> bool {
        match self.kind {
            RateKind::Private(k) => j != k,
            RateKind::Common(_) => true,
        }
    }

    fn concave_argument(&self, cov: &CovarianceSet) -> RMat {
        let mut total = cov.private_sum();
        if self.includes_common() {
            total += &cov.common;
        }
        symmetrize(&(&self.noise + &self.channel * total * self.channel.transpose()))
    }

    pub fn value(&self, cov: &CovarianceSet) -> Result<f64> {
        let concave = logdet_spd(&self.concave_argument(cov))? * HALF_LOG2;
        let linear: f64 = cov
            .private
            .iter()
            .enumerate()
            .filter(|(j, _)| self.is_linearized(*j))
            .map(|(_, p)| trace_product(&self.linear, p))
            .sum();
        Ok(concave + self.constant - linear)
    }

    /// Gradients with respect to `P_c` and each `P_j`.
    pub fn gradient(&self, cov: &CovarianceSet) -> Result<(RMat, Vec<RMat>)> {
        let (_, inv) = logdet_inverse_spd(&self.concave_argument(cov))?;
        let m = symmetrize(&(self.channel.transpose() * inv * &self.channel)) * HALF_LOG2;
        let n = cov.dim();
        let common = if self.includes_common() { m.clone() } else { RMat::zeros(n, n) };
        let private = (0..cov.users())
            .map(|j| if self.is_linearized(j) { &m - &self.linear } else { m.clone() })
            .collect();
        Ok((common, private))
    }
}

fn tangent(link: &RealLink, linearized: RMat) -> Result<(f64, RMat)> {
    let ybar = symmetrize(&(&link.noise + &link.channel * linearized * link.channel.transpose()));
    let (ld, inv) = logdet_inverse_spd(&ybar)
        .map_err(|e| Error::Conditioning(format!("interference covariance: {e}")))?;
    let lin = symmetrize(&(link.channel.transpose() * inv * &link.channel)) * HALF_LOG2;
    Ok((ld * HALF_LOG2, lin))
}

/// Minorizer of `r_pk` tight at `cov_prev`.
pub fn build_private_cov_bound(links: &[RealLink], cov_prev: &CovarianceSet, k: usize) -> Result<CovarianceSurrogate> {
    let link = &links[k];
    let others = cov_prev
        .private
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .fold(RMat::zeros(cov_prev.dim(), cov_prev.dim()), |acc, (_, p)| acc + p);
    let (r2, linear) = tangent(link, others)?;
    let offset: f64 = cov_prev
        .private
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, p)| trace_product(&linear, p))
        .sum();
    Ok(CovarianceSurrogate {
        kind: RateKind::Private(k),
        channel: link.channel.clone(),
        noise: link.noise.clone(),
        linear,
        constant: offset - r2,
    })
}

/// Minorizer of the common rate decodable at user `k`, tight at `cov_prev`.
pub fn build_common_cov_bound(links: &[RealLink], cov_prev: &CovarianceSet, k: usize) -> Result<CovarianceSurrogate> {
    let link = &links[k];
    let (r2, linear) = tangent(link, cov_prev.private_sum())?;
    let offset: f64 = cov_prev.private.iter().map(|p| trace_product(&linear, p)).sum();
    Ok(CovarianceSurrogate {
        kind: RateKind::Common(k),
        channel: link.channel.clone(),
        noise: link.noise.clone(),
        linear,
        constant: offset - r2,
    })
}

/// `constant + gradient^T z + z^T hessian z / 2`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub constant: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl QuadraticModel {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        self.constant + self.gradient.dot(&z) + 0.5 * z.dot(&(&self.hessian * &z))
    }

    pub fn grad(&self, z: &[f64]) -> DVector<f64> {
        &self.gradient + &self.hessian * DVector::from_column_slice(z)
    }

    pub fn is_constant(&self, tol: f64) -> bool {
        self.gradient.amax() <= tol && self.hessian.amax() <= tol
    }
}

/// Minorizer of a rate in the RIS phases with the covariances frozen.
#[derive(Debug, Clone)]
pub struct PhaseSurrogate {
    pub kind: RateKind,
    map: RisChannelMap,
    noise: RMat,
    /// `P^{1/2}` of the decoded message.
    signal_sqrt: RMat,
    /// Covariances acting as interference in `Y`.
    interference: RMat,
    anchor: Vec<f64>,
    anchor_rate: f64,
    anchor_channel: RMat,
    vbar: RMat,
    ybar_inv: RMat,
    correction: RMat,
    anchor_trace: f64,
}

impl PhaseSurrogate {
    fn new(
        kind: RateKind,
        map: &RisChannelMap,
        noise: &RMat,
        signal: &RMat,
        interference: RMat,
        theta_prev: &RisPhases,
    ) -> Result<Self> {
        let signal_sqrt = psd_sqrt(signal);
        let anchor = theta_prev.to_real();
        let hbar = map.eval(&anchor);
        let vbar = &hbar * &signal_sqrt;
        let ybar = symmetrize(&(noise + &hbar * &interference * hbar.transpose()));
        let (ld_y, ybar_inv) = logdet_inverse_spd(&ybar)
            .map_err(|e| Error::Conditioning(format!("frozen interference covariance: {e}")))?;
        let total = symmetrize(&(&vbar * vbar.transpose() + &ybar));
        let (ld_t, total_inv) = logdet_inverse_spd(&total)?;
        let correction = symmetrize(&(&ybar_inv - total_inv));
        let anchor_trace = trace_product(&(&vbar * vbar.transpose()), &ybar_inv);
        Ok(Self {
            kind,
            map: map.clone(),
            noise: noise.clone(),
            signal_sqrt,
            interference,
            anchor,
            anchor_rate: ((ld_t - ld_y) * HALF_LOG2).max(0.0),
            anchor_channel: hbar,
            vbar,
            ybar_inv,
            correction,
            anchor_trace,
        })
    }

    /// Exact rate at the expansion point.
    pub fn anchor_rate(&self) -> f64 {
        self.anchor_rate
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Bound evaluated term by term from `V = H(theta) P^{1/2}` and `Y`.
    pub fn value_real(&self, z: &[f64]) -> f64 {
        let h = self.map.eval(z);
        let v = &h * &self.signal_sqrt;
        let y = &self.noise + &h * &self.interference * h.transpose();
        let vvy = &v * v.transpose() + y;
        self.anchor_rate - HALF_LOG2 * self.anchor_trace - HALF_LOG2 * trace_product(&self.correction.transpose(), &vvy)
            + 2.0 * HALF_LOG2 * trace_product(&self.vbar.transpose(), &(&self.ybar_inv * v))
    }

    pub fn value(&self, theta: &[C64]) -> f64 {
        self.value_real(&crate::linalg::stack_re_im(theta))
    }

    /// Exact rate at `z`, for comparisons against the bound.
    pub fn exact_rate_real(&self, z: &[f64]) -> Result<f64> {
        let h = self.map.eval(z);
        let y = symmetrize(&(&self.noise + &h * &self.interference * h.transpose()));
        let signal = &self.signal_sqrt * &self.signal_sqrt;
        let t = symmetrize(&(&y + &h * signal * h.transpose()));
        Ok(((logdet_spd(&t)? - logdet_spd(&y)?) * HALF_LOG2).max(0.0))
    }

    /// Expansion of the bound as an explicit concave quadratic in `z`.
    pub fn quadratic(&self) -> QuadraticModel {
        let d = self.dim();
        let signal = &self.signal_sqrt * &self.signal_sqrt;
        let total = symmetrize(&(&signal + &self.interference));
        let a0 = &self.map.base;
        let slopes = &self.map.slopes;
        let corr = &self.correction;

        let a0_total = a0 * &total;
        let const_quad = trace_product(&(corr * &a0_total), &a0.transpose()) + trace_product(corr, &self.noise);
        let corr_b: Vec<RMat> = slopes.iter().map(|b| corr * b).collect();
        let b_total: Vec<RMat> = slopes.iter().map(|b| b * &total).collect();
        let mut q1 = DVector::zeros(d);
        let mut q2 = DMatrix::zeros(d, d);
        for m in 0..d {
            // tr(D B_m Q A0^T) = <D B_m, A0 Q>
            q1[m] = corr_b[m].dot(&a0_total);
            for l in m..d {
                let v = corr_b[m].dot(&b_total[l]);
                q2[(m, l)] = v;
                q2[(l, m)] = v;
            }
        }
        // tr(Ȳ^-1 H(z) P_s H̄^T) = <Ȳ^-1, H(z) P_s H̄^T>
        let right = &signal * self.anchor_channel.transpose();
        let lin0 = trace_product(&self.ybar_inv, &(a0 * &right));
        let lin1 = DVector::from_iterator(d, slopes.iter().map(|b| trace_product(&self.ybar_inv, &(b * &right))));

        QuadraticModel {
            constant: self.anchor_rate - HALF_LOG2 * self.anchor_trace - HALF_LOG2 * const_quad + 2.0 * HALF_LOG2 * lin0,
            gradient: (lin1 - q1 * 1.0) * (2.0 * HALF_LOG2),
            hessian: q2 * (-2.0 * HALF_LOG2),
        }
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }
}

/// Phase minorizer of `r_pk` with `P_k` frozen at `cov.private[k]`.
pub fn build_private_phase_bound(
    map: &RisChannelMap,
    noise: &RMat,
    cov: &CovarianceSet,
    theta_prev: &RisPhases,
    k: usize,
) -> Result<PhaseSurrogate> {
    let interference = cov
        .private
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .fold(RMat::zeros(cov.dim(), cov.dim()), |acc, (_, p)| acc + p);
    PhaseSurrogate::new(RateKind::Private(k), map, noise, &cov.private[k], interference, theta_prev)
}

/// Phase minorizer of the common rate at user `k`.
pub fn build_common_phase_bound(
    map: &RisChannelMap,
    noise: &RMat,
    cov: &CovarianceSet,
    theta_prev: &RisPhases,
    k: usize,
) -> Result<PhaseSurrogate> {
    PhaseSurrogate::new(RateKind::Common(k), map, noise, &cov.common, cov.private_sum(), theta_prev)
}

/// `2 Re{anchor^* theta} - |anchor|^2 >= 1 - epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitModulusCut {
    pub anchor: C64,
    pub epsilon: f64,
}

impl UnitModulusCut {
    /// Affine under-estimate of `|theta|^2`.
    pub fn lhs(&self, theta: C64) -> f64 {
        2.0 * (self.anchor.conj() * theta).re - self.anchor.norm_sqr()
    }

    pub fn slack(&self, theta: C64) -> f64 {
        self.lhs(theta) - (1.0 - self.epsilon)
    }

    pub fn is_satisfied(&self, theta: C64) -> bool {
        self.slack(theta) >= 0.0
    }
}

pub fn linearize_unit_modulus(theta_prev: &RisPhases, epsilon: f64) -> Result<Vec<UnitModulusCut>> {
    if !(epsilon > 0.0) {
        return Err(Error::Validation(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(theta_prev
        .0
        .iter()
        .map(|&anchor| UnitModulusCut { anchor, epsilon })
        .collect())
}
