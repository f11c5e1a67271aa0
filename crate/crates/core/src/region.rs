//! Rate-region sweeps over weight vectors and the time-sharing baseline.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::ao::{run_ao, AoOutcome, AoSettings, RegionPoint};
use crate::linalg::RMat;
use crate::error::{Error, Result};
use crate::rate::{CovarianceSet, Signaling};
use crate::wl_model::{ComplexScene, IqiProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Tin,
    OneLayerRs,
    TdmaTs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeConfig {
    pub signaling: Signaling,
    pub access: Access,
    pub ris: bool,
}

impl SchemeConfig {
    pub const fn new(signaling: Signaling, access: Access, ris: bool) -> Self {
        Self { signaling, access, ris }
    }

    pub const TS: Self = Self::new(Signaling::Improper, Access::TdmaTs, false);

    /// `PT`, `IT`, `PR`, `IR`, optionally suffixed `_IR` when the RIS is on,
    /// or `TS`.
    pub fn label(&self) -> String {
        if self.access == Access::TdmaTs {
            return if self.ris { "TS_IR".into() } else { "TS".into() };
        }
        let s = match self.signaling {
            Signaling::Proper => 'P',
            Signaling::Improper => 'I',
        };
        let a = if self.access == Access::Tin { 'T' } else { 'R' };
        format!("{s}{a}{}", if self.ris { "_IR" } else { "" })
    }

    /// Whether every point of `other` is feasible for `self`.
    pub fn contains(&self, other: &SchemeConfig) -> bool {
        let signaling = self.signaling == other.signaling || self.signaling == Signaling::Improper;
        let access = self.access == other.access || (self.access == Access::OneLayerRs && other.access == Access::Tin);
        signaling && access && self.ris == other.ris && self.access != Access::TdmaTs
    }
}

impl fmt::Display for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SchemeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let label = s.trim().to_ascii_uppercase();
        let (base, ris) = match label.strip_suffix("_IR") {
            Some(b) => (b, true),
            None => (label.as_str(), false),
        };
        if base == "TS" {
            return Ok(Self { ris, ..Self::TS });
        }
        let unknown = || Error::Parse(format!("unknown scheme `{s}` (expected PT, IT, PR, IR, TS, optionally with _IR)"));
        let mut chars = base.chars();
        let (Some(sig), Some(acc), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(unknown());
        };
        let signaling = match sig {
            'P' => Signaling::Proper,
            'I' => Signaling::Improper,
            _ => return Err(unknown()),
        };
        let access = match acc {
            'T' => Access::Tin,
            'R' => Access::OneLayerRs,
            _ => return Err(unknown()),
        };
        Ok(Self::new(signaling, access, ris))
    }
}

impl serde::Serialize for SchemeConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> serde::Deserialize<'de> for SchemeConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Share of the budget moved to the common message when an interference-
/// as-noise solution seeds a rate-splitting run.
const COMMON_SEED: f64 = 0.1;

/// Budget share of the single active private message in the common-heavy
/// starts of rate-splitting runs.
const CORNER_PRIVATE: f64 = 0.01;

/// Solves `scheme` at one weight vector from the default start and from the
/// final iterates of every scheme nested inside it, keeping the best run.
/// Rate-splitting schemes are also started with most of the budget on the
/// common message and a single active private message, once per user; these
/// reach the superposition-coding corner that interference-as-noise starts
/// miss when one user carries most of the weight.
///
/// Each nested scheme is solved the same way first, so the returned
/// objective is never below that of any nested scheme.
pub fn solve_point(
    scene: &ComplexScene,
    profile: &IqiProfile,
    scheme: &SchemeConfig,
    alpha: &[f64],
    settings: &AoSettings,
) -> Result<AoOutcome> {
    let order = [
        (Signaling::Proper, Access::Tin),
        (Signaling::Improper, Access::Tin),
        (Signaling::Proper, Access::OneLayerRs),
        (Signaling::Improper, Access::OneLayerRs),
    ]
    .map(|(s, a)| SchemeConfig::new(s, a, scheme.ris));
    let mut solved: Vec<(SchemeConfig, AoOutcome)> = Vec::new();
    for current in order.into_iter().filter(|s| scheme.contains(s)) {
        let mut best = run_ao(scene, profile, &current, alpha, None, settings)?;
        for (inner, out) in &solved {
            if !current.contains(inner) {
                continue;
            }
            if out.state.objective > best.state.objective {
                best = out.clone();
            }
            let mut cov = out.state.cov.clone();
            if current.access == Access::OneLayerRs && inner.access == Access::Tin {
                let n = cov.dim();
                let power: f64 = cov.total_power();
                cov.common = RMat::identity(n, n) * (COMMON_SEED * power / n as f64);
                for p in &mut cov.private {
                    *p *= 1.0 - COMMON_SEED;
                }
            }
            let run = run_ao(scene, profile, &current, alpha, Some((cov, out.state.theta.clone())), settings)?;
            if run.state.objective > best.state.objective {
                best = run;
            }
        }
        if current.access == Access::OneLayerRs {
            let users = scene.users();
            let n = 2 * scene.bs_antennas();
            for k in 0..users {
                let mut cov = CovarianceSet::zeros(users, scene.bs_antennas());
                cov.common = RMat::identity(n, n) * ((1.0 - CORNER_PRIVATE) * scene.power_budget / n as f64);
                cov.private[k] = RMat::identity(n, n) * (CORNER_PRIVATE * scene.power_budget / n as f64);
                let run = run_ao(scene, profile, &current, alpha, Some((cov, best.state.theta.clone())), settings)?;
                if run.state.objective > best.state.objective {
                    best = run;
                }
            }
        }
        solved.push((current, best));
    }
    solved
        .pop()
        .map(|(_, out)| out)
        .ok_or_else(|| Error::Config(format!("{scheme} is not an alternating-optimization scheme")))
}

/// Weight vectors `(a, 1 - a)` with `a` evenly spaced in `[0, 1]`.
pub fn alpha_grid(users: usize, n_alpha: usize) -> Result<Vec<Vec<f64>>> {
    match users {
        1 => Ok(vec![vec![1.0]]),
        2 if n_alpha >= 2 => Ok((0..n_alpha)
            .map(|i| {
                let a = i as f64 / (n_alpha - 1) as f64;
                vec![a, 1.0 - a]
            })
            .collect()),
        2 => Err(Error::Validation(format!("need at least 2 weight vectors, got {n_alpha}"))),
        k => Err(Error::Config(format!("weight sweeps are implemented for 2 users, scene has {k}"))),
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub point: RegionPoint,
    /// Objective after each outer iteration.
    pub trace: Vec<f64>,
    /// Exact `max min_k r_k / alpha_k` at the final iterate.
    pub objective: f64,
    pub error: Option<String>,
}

/// Solves every weight vector independently with [`solve_point`].
///
/// Points are solved in parallel and returned in weight order; a failing
/// point is kept with zero rates and its error message.
pub fn sweep_region(
    scene: &ComplexScene,
    profile: &IqiProfile,
    scheme: &SchemeConfig,
    n_alpha: usize,
    settings: &AoSettings,
) -> Result<Vec<SweepPoint>> {
    if scheme.access == Access::TdmaTs {
        return Ok(tdma_timesharing(scene, profile, scheme.ris, n_alpha, settings)?.segment);
    }
    let grid = alpha_grid(scene.users(), n_alpha)?;
    Ok(grid
        .par_iter()
        .map(|alpha| match solve_point(scene, profile, scheme, alpha, settings) {
            Ok(out) => SweepPoint {
                point: out.point(scheme, alpha),
                trace: out.state.trace.clone(),
                objective: out.state.objective,
                error: None,
            },
            Err(e) => SweepPoint {
                point: RegionPoint {
                    scheme: scheme.label(),
                    alpha: alpha.clone(),
                    rates: vec![0.0; alpha.len()],
                    converged: false,
                    iterations: 0,
                },
                trace: Vec::new(),
                objective: 0.0,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct TimeSharing {
    /// Single-user maximum rates `R_k*`.
    pub single_user: Vec<f64>,
    /// `(tau R_1*, (1 - tau) R_2*)` from `tau = 1` down to `tau = 0`.
    pub segment: Vec<SweepPoint>,
}

impl TimeSharing {
    /// `max min_k r_k / alpha_k` over the time-sharing segment.
    pub fn objective(&self, alpha: &[f64]) -> f64 {
        let denom: f64 = alpha.iter().zip(&self.single_user).map(|(a, r)| a / r).sum();
        if denom > 0.0 {
            1.0 / denom
        } else {
            0.0
        }
    }
}

/// Time sharing between the single-user optima, each user served alone
/// with full power (and its own RIS configuration when `ris` is set).
pub fn tdma_timesharing(
    scene: &ComplexScene,
    profile: &IqiProfile,
    ris: bool,
    n_tau: usize,
    settings: &AoSettings,
) -> Result<TimeSharing> {
    if scene.users() != 2 {
        return Err(Error::Config("time sharing is implemented for 2 users".into()));
    }
    if n_tau < 2 {
        return Err(Error::Validation(format!("need at least 2 time-sharing points, got {n_tau}")));
    }
    let single = SchemeConfig::new(Signaling::Improper, Access::Tin, ris);
    let single_user = (0..2)
        .into_par_iter()
        .map(|k| {
            let out = run_ao(
                &scene.select_users(&[k]),
                &profile.select_users(&[k]),
                &single,
                &[1.0],
                None,
                settings,
            )?;
            Ok(out.rates[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let label = SchemeConfig { ris, ..SchemeConfig::TS }.label();
    let segment = (0..n_tau)
        .map(|i| {
            let tau = 1.0 - i as f64 / (n_tau - 1) as f64;
            let rates = vec![tau * single_user[0], (1.0 - tau) * single_user[1]];
            let sum: f64 = rates.iter().sum();
            let alpha = if sum > 0.0 { rates.iter().map(|r| r / sum).collect() } else { vec![tau, 1.0 - tau] };
            let objective = if sum > 0.0 { sum } else { 0.0 };
            SweepPoint {
                point: RegionPoint {
                    scheme: label.clone(),
                    alpha,
                    rates,
                    converged: true,
                    iterations: 0,
                },
                trace: Vec::new(),
                objective,
                error: None,
            }
        })
        .collect();
    Ok(TimeSharing { single_user, segment })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for label in ["PT", "IT", "PR", "IR", "PT_IR", "IT_IR", "PR_IR", "IR_IR", "TS"] {
            let scheme: SchemeConfig = label.parse().unwrap();
            assert_eq!(scheme.label(), label);
        }
        assert!("XR".parse::<SchemeConfig>().is_err());
        assert!("PRR".parse::<SchemeConfig>().is_err());
    }

    #[test]
    fn nesting_relation() {
        let s = |l: &str| l.parse::<SchemeConfig>().unwrap();
        assert!(s("IR").contains(&s("PT")));
        assert!(s("IT").contains(&s("PT")));
        assert!(s("PR").contains(&s("PT")));
        assert!(!s("PR").contains(&s("IT")));
        assert!(!s("IR").contains(&s("IR_IR")));
    }

    #[test]
    fn alpha_grid_endpoints() {
        let g = alpha_grid(2, 2).unwrap();
        assert_eq!(g, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let g = alpha_grid(2, 21).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[10][0] - 0.5).abs() < 1e-15);
        assert!(alpha_grid(2, 1).is_err());
        assert!(alpha_grid(3, 5).is_err());
    }

    #[test]
    fn time_sharing_segment() {
        let ts = TimeSharing {
            single_user: vec![2.0, 4.0],
            segment: Vec::new(),
        };
        // ray (1/2, 1/2) meets the segment r1/2 + r2/4 = 1 at r1 = r2 = 4/3
        assert!((ts.objective(&[0.5, 0.5]) - 8.0 / 3.0).abs() < 1e-12);
        assert!((ts.objective(&[1.0, 0.0]) - 2.0).abs() < 1e-12);
    }
}
