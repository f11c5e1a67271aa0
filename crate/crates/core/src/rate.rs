//! Common/private decoding rates of 1-layer rate splitting over real-decomposed links.
//!
//! Users decode the common message first, treating every private message as
//! noise, cancel it and then decode their own private message. All rates are
//! in bits/s/Hz; the `1/2` in front of each real log-det compensates for the
//! doubled real dimension.

use crate::error::{Error, Result};
use crate::linalg::{complex_structure, inverse_spd, logdet_spd, min_eigenvalue, symmetrize, RMat, HALF_LOG2};
use crate::wl_model::RealLink;

/// Eigenvalue tolerance for PSD checks.
pub const PSD_TOL: f64 = 1e-9;

/// Real transmit covariances of the common and private messages plus the
/// common-rate split `r_ck`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub common: RMat,
    pub private: Vec<RMat>,
    pub common_alloc: Vec<f64>,
}

impl CovarianceSet {
    pub fn zeros(users: usize, bs_antennas: usize) -> Self {
        let n = 2 * bs_antennas;
        Self {
            common: RMat::zeros(n, n),
            private: vec![RMat::zeros(n, n); users],
            common_alloc: vec![0.0; users],
        }
    }

    /// White covariances splitting `power` evenly over the private messages
    /// and, if `with_common`, the common message.
    pub fn uniform(users: usize, bs_antennas: usize, power: f64, with_common: bool) -> Self {
        let n = 2 * bs_antennas;
        let messages = users + usize::from(with_common);
        let white = RMat::identity(n, n) * (power / messages as f64 / n as f64);
        Self {
            common: if with_common { white.clone() } else { RMat::zeros(n, n) },
            private: vec![white; users],
            common_alloc: vec![0.0; users],
        }
    }

    pub fn users(&self) -> usize {
        self.private.len()
    }

    pub fn dim(&self) -> usize {
        self.common.nrows()
    }

    pub fn total_power(&self) -> f64 {
        self.common.trace() + self.private.iter().map(|p| p.trace()).sum::<f64>()
    }

    pub fn private_sum(&self) -> RMat {
        self.private
            .iter()
            .fold(RMat::zeros(self.dim(), self.dim()), |acc, p| acc + p)
    }

    pub fn validate(&self, power_budget: f64) -> Result<()> {
        let n = self.dim();
        if self.common_alloc.len() != self.users() {
            return Err(Error::Config("common-rate allocation length differs from user count".into()));
        }
        for (name, p) in std::iter::once(("common", &self.common))
            .chain(self.private.iter().map(|p| ("private", p)))
        {
            if p.shape() != (n, n) {
                return Err(Error::Config(format!("{name} covariance has shape {:?}", p.shape())));
            }
            let asym = (p - p.transpose()).abs().max();
            if asym > 1e-9 * (1.0 + p.abs().max()) {
                return Err(Error::Validation(format!("{name} covariance is not symmetric ({asym:e})")));
            }
            let lo = min_eigenvalue(p);
            if lo < -PSD_TOL {
                return Err(Error::Validation(format!("{name} covariance has eigenvalue {lo:e}")));
            }
        }
        let total = self.total_power();
        if total > power_budget + PSD_TOL {
            return Err(Error::ConstraintViolation(format!(
                "total power {total} exceeds budget {power_budget}"
            )));
        }
        if let Some(r) = self.common_alloc.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::Validation(format!("negative common-rate share {r}")));
        }
        Ok(())
    }
}

/// Proper (circular) versus improper Gaussian signaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signaling {
    Proper,
    Improper,
}

/// `H P H^T`.
pub fn received_covariance(link: &RealLink, p: &RMat) -> RMat {
    symmetrize(&(&link.channel * p * link.channel.transpose()))
}

fn half_log2_ratio(numerator: &RMat, denominator: &RMat) -> Result<f64> {
    Ok(((logdet_spd(numerator)? - logdet_spd(denominator)?) * HALF_LOG2).max(0.0))
}

/// Rate at which user `k` can decode the common message.
pub fn common_rate_at_user(link: &RealLink, cov: &CovarianceSet) -> Result<f64> {
    let interference = &link.noise + received_covariance(link, &cov.private_sum());
    let total = &interference + received_covariance(link, &cov.common);
    half_log2_ratio(&total, &interference)
}

/// `min_k` of the per-user common rates.
pub fn common_rate(links: &[RealLink], cov: &CovarianceSet) -> Result<f64> {
    links
        .iter()
        .map(|l| common_rate_at_user(l, cov))
        .try_fold(f64::INFINITY, |acc, r| r.map(|r| acc.min(r)))
}

/// Rate of user `k`'s private message after the common message is cancelled.
pub fn private_rate(link: &RealLink, cov: &CovarianceSet, k: usize) -> Result<f64> {
    let interference = cov
        .private
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .fold(link.noise.clone(), |acc, (_, p)| acc + received_covariance(link, p));
    let total = &interference + received_covariance(link, &cov.private[k]);
    half_log2_ratio(&total, &interference)
}

pub fn private_rates(links: &[RealLink], cov: &CovarianceSet) -> Result<Vec<f64>> {
    links
        .iter()
        .enumerate()
        .map(|(k, l)| private_rate(l, cov, k))
        .collect()
}

/// `r_pk + r_ck`, after checking the split of the common rate.
pub fn user_total_rate(links: &[RealLink], cov: &CovarianceSet, k: usize) -> Result<f64> {
    let rc = common_rate(links, cov)?;
    let used: f64 = cov.common_alloc.iter().sum();
    if cov.common_alloc.iter().any(|r| *r < 0.0) {
        return Err(Error::ConstraintViolation("negative common-rate share".into()));
    }
    if used > rc + 1e-9 {
        return Err(Error::ConstraintViolation(format!(
            "common-rate shares sum to {used} but the common rate is {rc}"
        )));
    }
    Ok(private_rate(&links[k], cov, k)? + cov.common_alloc[k])
}

/// Gradient of `private_rate(k)` with respect to `P_j`, as the symmetric
/// matrix `G` with `d r = tr(G dP_j)`.
pub fn private_rate_gradient(link: &RealLink, cov: &CovarianceSet, k: usize, j: usize) -> Result<RMat> {
    let h = &link.channel;
    let all = &link.noise + received_covariance(link, &cov.private_sum());
    let through_total = h.transpose() * inverse_spd(&all)? * h;
    if j == k {
        return Ok(symmetrize(&through_total) * HALF_LOG2);
    }
    let interference = &all - received_covariance(link, &cov.private[k]);
    let through_interference = h.transpose() * inverse_spd(&interference)? * h;
    Ok(symmetrize(&(through_total - through_interference)) * HALF_LOG2)
}

/// `(P + J P J^T) / 2`: the closest matrix that is the real image of a proper
/// complex covariance.
pub fn project_proper(p: &RMat) -> RMat {
    let j = complex_structure(p.nrows() / 2);
    symmetrize(&((p + &j * p * j.transpose()) * 0.5))
}

pub fn is_proper(p: &RMat, tol: f64) -> bool {
    let j = complex_structure(p.nrows() / 2);
    (&j * p * j.transpose() - p).abs().max() <= tol * (1.0 + p.abs().max())
}

/// Best split of the common rate for the rate profile `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// `max r` such that `r_pk + r_ck >= alpha_k r` for every user with `alpha_k > 0`.
    pub objective: f64,
    pub shares: Vec<f64>,
}

/// Solves `max r s.t. r_pk + r_ck >= alpha_k r, sum r_ck <= common, r_ck >= 0`
/// in closed form. Users with `alpha_k = 0` are unconstrained and get no share.
pub fn best_allocation(private: &[f64], common: f64, alpha: &[f64]) -> Allocation {
    assert_eq!(private.len(), alpha.len());
    let common = common.max(0.0);
    let mut active: Vec<(f64, f64)> = private
        .iter()
        .zip(alpha)
        .filter(|(_, &a)| a > 0.0)
        .map(|(&p, &a)| (p / a, a))
        .collect();
    if active.is_empty() {
        return Allocation {
            objective: 0.0,
            shares: vec![0.0; private.len()],
        };
    }
    active.sort_by(|a, b| a.0.total_cmp(&b.0));
    // sum_k max(0, alpha_k r - r_pk) is piecewise linear with kinks at r_pk / alpha_k
    let mut r = active[0].0;
    let mut slope = 0.0;
    let mut remaining = common;
    let mut i = 0;
    loop {
        while i < active.len() && active[i].0 <= r {
            slope += active[i].1;
            i += 1;
        }
        if i == active.len() {
            r += remaining / slope;
            break;
        }
        let cost = slope * (active[i].0 - r);
        if cost >= remaining {
            r += remaining / slope;
            break;
        }
        remaining -= cost;
        r = active[i].0;
    }
    let shares = private
        .iter()
        .zip(alpha)
        .map(|(&p, &a)| if a > 0.0 { (a * r - p).max(0.0) } else { 0.0 })
        .collect();
    Allocation { objective: r, shares }
}
