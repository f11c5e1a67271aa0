//! Widely-linear I/Q-imbalance transceiver model and real decomposition.
//!
//! Every antenna branch with amplitude imbalance `a` and phase imbalance `phi`
//! is modelled as
//!
//! ```text
//! transmitter:  V1 = (1 + a e^{+j phi}) / 2,   V2 = (1 - a e^{-j phi}) / 2
//! receiver:     G1 = (1 + a e^{-j phi}) / 2,   G2 = (1 - a e^{+j phi}) / 2
//! ```
//!
//! so a transmitted vector becomes `V1 x + V2 x*` and a received vector
//! `G1 y + G2 y*`. Both reduce to the identity at `(a, phi) = (1, 0)`.
//!
//! Complex vectors are turned into real ones by stacking `[Re; Im]`, and every
//! widely-linear map becomes an ordinary real matrix in that basis.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{real_embed, stack_re_im, symmetrize, widely_linear, CMat, RMat, C64};

/// Imbalance parameters for the antenna branches of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceIqi {
    pub amplitude: Vec<f64>,
    /// Radians.
    pub phase: Vec<f64>,
}

impl DeviceIqi {
    pub fn perfect(antennas: usize) -> Self {
        Self {
            amplitude: vec![1.0; antennas],
            phase: vec![0.0; antennas],
        }
    }

    pub fn uniform(antennas: usize, amplitude: f64, phase: f64) -> Self {
        Self {
            amplitude: vec![amplitude; antennas],
            phase: vec![phase; antennas],
        }
    }

    pub fn antennas(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_perfect(&self) -> bool {
        self.amplitude.iter().all(|&a| a == 1.0) && self.phase.iter().all(|&p| p == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitude.len() != self.phase.len() {
            return Err(Error::Config(format!(
                "{} amplitude entries but {} phase entries",
                self.amplitude.len(),
                self.phase.len()
            )));
        }
        if let Some(a) = self.amplitude.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::Validation(format!("IQI amplitude must be positive, got {a}")));
        }
        // |phi| < 90 degrees keeps the branch invertible (|G1| > |G2|).
        if let Some(p) = self.phase.iter().find(|p| !(p.abs() < FRAC_PI_2)) {
            return Err(Error::Validation(format!(
                "IQI phase must lie strictly inside (-pi/2, pi/2), got {p}"
            )));
        }
        Ok(())
    }
}

/// Transmitter and per-user receiver imbalance parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct IqiProfile {
    pub tx: DeviceIqi,
    pub rx: Vec<DeviceIqi>,
}

impl IqiProfile {
    pub fn perfect(users: usize, bs_antennas: usize, user_antennas: usize) -> Self {
        Self {
            tx: DeviceIqi::perfect(bs_antennas),
            rx: vec![DeviceIqi::perfect(user_antennas); users],
        }
    }

    /// Same imbalance on every branch; `tx` and `rx` are `(amplitude, phase)`.
    pub fn symmetric(
        users: usize,
        bs_antennas: usize,
        user_antennas: usize,
        tx: (f64, f64),
        rx: (f64, f64),
    ) -> Self {
        Self {
            tx: DeviceIqi::uniform(bs_antennas, tx.0, tx.1),
            rx: vec![DeviceIqi::uniform(user_antennas, rx.0, rx.1); users],
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.tx.is_perfect() && self.rx.iter().all(DeviceIqi::is_perfect)
    }

    pub fn validate(&self) -> Result<()> {
        self.tx.validate()?;
        self.rx.iter().try_for_each(DeviceIqi::validate)
    }

    /// Profile restricted to a subset of users.
    pub fn select_users(&self, users: &[usize]) -> Self {
        Self {
            tx: self.tx.clone(),
            rx: users.iter().map(|&k| self.rx[k].clone()).collect(),
        }
    }
}

/// Complex diagonal imbalance matrices.
#[derive(Debug, Clone)]
pub struct IqiMatrices {
    pub v1: CMat,
    pub v2: CMat,
    pub gamma1: Vec<CMat>,
    pub gamma2: Vec<CMat>,
}

impl IqiMatrices {
    /// Real image of `x -> V1 x + V2 x*`.
    pub fn tx_map(&self) -> RMat {
        widely_linear(&self.v1, &self.v2)
    }

    /// Real image of `y -> G1 y + G2 y*` at user `k`.
    pub fn rx_map(&self, k: usize) -> RMat {
        widely_linear(&self.gamma1[k], &self.gamma2[k])
    }
}

pub fn build_iqi_matrices(profile: &IqiProfile) -> Result<IqiMatrices> {
    profile.validate()?;
    let half = C64::new(0.5, 0.0);
    let one = C64::new(1.0, 0.0);
    let diag = |d: &DeviceIqi, f: &dyn Fn(f64, f64) -> C64| {
        let entries: Vec<C64> = d
            .amplitude
            .iter()
            .zip(&d.phase)
            .map(|(&a, &p)| f(a, p))
            .collect();
        CMat::from_diagonal(&nalgebra::DVector::from_vec(entries))
    };
    let v1 = diag(&profile.tx, &|a, p| half * (one + C64::from_polar(a, p)));
    let v2 = diag(&profile.tx, &|a, p| half * (one - C64::from_polar(a, -p)));
    let gamma1 = profile
        .rx
        .iter()
        .map(|d| diag(d, &|a, p| half * (one + C64::from_polar(a, -p))))
        .collect();
    let gamma2 = profile
        .rx
        .iter()
        .map(|d| diag(d, &|a, p| half * (one - C64::from_polar(a, p))))
        .collect();
    Ok(IqiMatrices { v1, v2, gamma1, gamma2 })
}

/// Complex channel matrices of one broadcast scene.
///
/// `bs_ris` may have zero rows, in which case there is no RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexScene {
    /// `F_k`: `N_u x N_BS` direct links.
    pub direct: Vec<CMat>,
    /// `G_k`: `N_u x N_RIS` RIS-to-user links.
    pub ris_user: Vec<CMat>,
    /// `G`: `N_RIS x N_BS` BS-to-RIS link.
    pub bs_ris: CMat,
    pub noise_power: f64,
    pub power_budget: f64,
}

impl ComplexScene {
    /// Scene with direct links only.
    pub fn without_ris(direct: Vec<CMat>, noise_power: f64, power_budget: f64) -> Self {
        let n_u = direct.first().map_or(0, |f| f.nrows());
        let n_bs = direct.first().map_or(0, |f| f.ncols());
        let users = direct.len();
        Self {
            direct,
            ris_user: vec![CMat::zeros(n_u, 0); users],
            bs_ris: CMat::zeros(0, n_bs),
            noise_power,
            power_budget,
        }
    }

    pub fn users(&self) -> usize {
        self.direct.len()
    }

    pub fn bs_antennas(&self) -> usize {
        self.bs_ris.ncols()
    }

    pub fn user_antennas(&self) -> usize {
        self.direct.first().map_or(0, |f| f.nrows())
    }

    pub fn ris_elements(&self) -> usize {
        self.bs_ris.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.users();
        if k == 0 {
            return Err(Error::Config("scene has no users".into()));
        }
        if self.ris_user.len() != k {
            return Err(Error::Config(format!(
                "{} direct links but {} RIS links",
                k,
                self.ris_user.len()
            )));
        }
        let (n_u, n_bs, n_ris) = (self.user_antennas(), self.bs_antennas(), self.ris_elements());
        for (i, (f, g)) in self.direct.iter().zip(&self.ris_user).enumerate() {
            if f.shape() != (n_u, n_bs) {
                return Err(Error::Config(format!(
                    "direct link {i} is {:?}, expected {:?}",
                    f.shape(),
                    (n_u, n_bs)
                )));
            }
            if g.shape() != (n_u, n_ris) {
                return Err(Error::Config(format!(
                    "RIS link {i} is {:?}, expected {:?}",
                    g.shape(),
                    (n_u, n_ris)
                )));
            }
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::Validation(format!("noise power must be positive, got {}", self.noise_power)));
        }
        if !(self.power_budget >= 0.0) || !self.power_budget.is_finite() {
            return Err(Error::Validation(format!("power budget must be non-negative, got {}", self.power_budget)));
        }
        Ok(())
    }

    pub fn select_users(&self, users: &[usize]) -> Self {
        Self {
            direct: users.iter().map(|&k| self.direct[k].clone()).collect(),
            ris_user: users.iter().map(|&k| self.ris_user[k].clone()).collect(),
            bs_ris: self.bs_ris.clone(),
            noise_power: self.noise_power,
            power_budget: self.power_budget,
        }
    }
}

/// RIS reflection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases(pub Vec<C64>);

impl RisPhases {
    pub fn ones(n: usize) -> Self {
        Self(vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        Self(angles.iter().map(|&a| C64::from_polar(1.0, a)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_feasible(&self) -> bool {
        self.0.iter().all(|t| (t.norm() - 1.0).abs() <= 1e-12)
    }

    /// `[Re theta; Im theta]`.
    pub fn to_real(&self) -> Vec<f64> {
        stack_re_im(&self.0)
    }
}

/// `H_k(theta) = G_k diag(theta) G + F_k`.
pub fn compose_effective_channel(scene: &ComplexScene, theta: &RisPhases, k: usize) -> Result<CMat> {
    if k >= scene.users() {
        return Err(Error::Config(format!("user {k} out of range ({} users)", scene.users())));
    }
    let g_k = &scene.ris_user[k];
    if theta.len() != scene.ris_elements() || g_k.ncols() != theta.len() {
        return Err(Error::Config(format!(
            "RIS has {} elements but {} phases were given",
            scene.ris_elements(),
            theta.len()
        )));
    }
    if g_k.nrows() != scene.direct[k].nrows() || scene.bs_ris.ncols() != scene.direct[k].ncols() {
        return Err(Error::Config(format!("channel dimensions of user {k} are inconsistent")));
    }
    let mut h = scene.direct[k].clone();
    for (n, &t) in theta.0.iter().enumerate() {
        h += (g_k.column(n) * scene.bs_ris.row(n)) * t;
    }
    Ok(h)
}

/// Real-decomposed effective link of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLink {
    /// `2 N_u x 2 N_BS`.
    pub channel: RMat,
    /// `2 N_u x 2 N_u` covariance of the effective (possibly improper) noise.
    pub noise: RMat,
}

/// Real decomposition of `y = G1 (H (V1 x + V2 x*) + n) + G2 (H (V1 x + V2 x*) + n)*`
/// for proper white noise `n` of variance `noise_power`.
pub fn real_decompose(
    h: &CMat,
    v1: &CMat,
    v2: &CMat,
    gamma1: &CMat,
    gamma2: &CMat,
    noise_power: f64,
) -> Result<RealLink> {
    let (n_u, n_bs) = h.shape();
    if v1.shape() != (n_bs, n_bs) || v2.shape() != (n_bs, n_bs) {
        return Err(Error::Config("transmit IQI matrices do not match the channel".into()));
    }
    if gamma1.shape() != (n_u, n_u) || gamma2.shape() != (n_u, n_u) {
        return Err(Error::Config("receive IQI matrices do not match the channel".into()));
    }
    let tx = widely_linear(v1, v2);
    let rx = widely_linear(gamma1, gamma2);
    Ok(RealLink {
        channel: &rx * real_embed(h) * tx,
        noise: noise_covariance(&rx, noise_power),
    })
}

/// `[Re n; Im n]` has covariance `sigma2/2 I`, so the receiver image `R`
/// yields `sigma2/2 R R^T`.
fn noise_covariance(rx: &RMat, noise_power: f64) -> RMat {
    symmetrize(&(rx * rx.transpose() * (0.5 * noise_power)))
}

/// Transceiver model bound to a scene: caches the real IQI images.
#[derive(Debug, Clone)]
pub struct Transceiver {
    pub iqi: IqiMatrices,
    tx: RMat,
    rx: Vec<RMat>,
    noise: Vec<RMat>,
}

impl Transceiver {
    pub fn new(scene: &ComplexScene, profile: &IqiProfile) -> Result<Self> {
        scene.validate()?;
        if profile.rx.len() != scene.users()
            || profile.tx.antennas() != scene.bs_antennas()
            || profile.rx.iter().any(|d| d.antennas() != scene.user_antennas())
        {
            return Err(Error::Config("IQI profile does not match the scene dimensions".into()));
        }
        let iqi = build_iqi_matrices(profile)?;
        let tx = iqi.tx_map();
        let rx: Vec<RMat> = (0..scene.users()).map(|k| iqi.rx_map(k)).collect();
        let noise = rx.iter().map(|r| noise_covariance(r, scene.noise_power)).collect();
        Ok(Self { iqi, tx, rx, noise })
    }

    pub fn link(&self, h: &CMat, k: usize) -> RealLink {
        RealLink {
            channel: &self.rx[k] * real_embed(h) * &self.tx,
            noise: self.noise[k].clone(),
        }
    }

    pub fn links(&self, scene: &ComplexScene, theta: &RisPhases) -> Result<Vec<RealLink>> {
        (0..scene.users())
            .map(|k| Ok(self.link(&compose_effective_channel(scene, theta, k)?, k)))
            .collect()
    }

    /// Real-affine dependence of user `k`'s real channel on `[Re theta; Im theta]`.
    pub fn ris_map(&self, scene: &ComplexScene, k: usize) -> RisChannelMap {
        let n_ris = scene.ris_elements();
        let wrap = |m: &CMat| &self.rx[k] * real_embed(m) * &self.tx;
        let j = C64::new(0.0, 1.0);
        let outer: Vec<CMat> = (0..n_ris)
            .map(|n| scene.ris_user[k].column(n) * scene.bs_ris.row(n))
            .collect();
        let slopes = outer
            .iter()
            .map(wrap)
            .chain(outer.iter().map(|x| wrap(&(x * j))))
            .collect();
        RisChannelMap {
            base: wrap(&scene.direct[k]),
            slopes,
        }
    }
}

/// `z -> base + sum_m z_m slopes[m]` with `z = [Re theta; Im theta]`.
#[derive(Debug, Clone)]
pub struct RisChannelMap {
    pub base: RMat,
    pub slopes: Vec<RMat>,
}

impl RisChannelMap {
    pub fn eval(&self, z: &[f64]) -> RMat {
        debug_assert_eq!(z.len(), self.slopes.len());
        let mut h = self.base.clone();
        for (s, &zm) in self.slopes.iter().zip(z) {
            if zm != 0.0 {
                h += s * zm;
            }
        }
        h
    }

    pub fn eval_phases(&self, theta: &[C64]) -> RMat {
        self.eval(&stack_re_im(theta))
    }

    pub fn dim(&self) -> usize {
        self.slopes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_structure, frobenius, min_eigenvalue};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar(z: C64) -> CMat {
        CMat::from_element(1, 1, z)
    }

    fn random_cmat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat {
        CMat::from_fn(m, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
    }

    #[test]
    fn effective_channel_without_ris_path_is_direct() {
        let f = scalar(c(-1.3992, 0.0292));
        let mut scene = ComplexScene::without_ris(vec![f.clone()], 1.0, 10.0);
        scene.bs_ris = CMat::from_element(1, 1, c(0.7, 0.1));
        scene.ris_user = vec![CMat::zeros(1, 1)];
        let h = compose_effective_channel(&scene, &RisPhases::from_angles(&[1.3]), 0).unwrap();
        assert_eq!(h, f);
    }

    #[test]
    fn effective_channel_cancels() {
        let scene = ComplexScene {
            direct: vec![scalar(c(1.0, 0.0))],
            ris_user: vec![scalar(c(1.0, 0.0))],
            bs_ris: scalar(c(1.0, 0.0)),
            noise_power: 1.0,
            power_budget: 1.0,
        };
        let h = compose_effective_channel(&scene, &RisPhases::from_angles(&[std::f64::consts::PI]), 0).unwrap();
        assert!(h[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn effective_channel_rejects_bad_dims() {
        let scene = ComplexScene::without_ris(vec![scalar(c(1.0, 0.0))], 1.0, 1.0);
        let err = compose_effective_channel(&scene, &RisPhases::ones(2), 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn effective_channel_is_affine_per_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scene = ComplexScene {
            direct: vec![random_cmat(&mut rng, 2, 2)],
            ris_user: vec![random_cmat(&mut rng, 2, 4)],
            bs_ris: random_cmat(&mut rng, 4, 2),
            noise_power: 1.0,
            power_budget: 1.0,
        };
        let base = RisPhases::from_angles(&[0.1, 0.7, -0.3, 2.0]);
        let (a, b) = (c(0.3, -0.8), c(-1.1, 0.4));
        let at = |t: C64| {
            let mut th = base.clone();
            th.0[2] = t;
            compose_effective_channel(&scene, &th, 0).unwrap()
        };
        let mid = at(a * 0.25 + b * 0.75);
        let blend = at(a) * c(0.25, 0.0) + at(b) * c(0.75, 0.0);
        assert!((mid - blend).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn perfect_profile_gives_identity_matrices() {
        let m = build_iqi_matrices(&IqiProfile::perfect(2, 2, 1)).unwrap();
        assert_eq!(m.v1, CMat::identity(2, 2));
        assert_eq!(m.v2, CMat::zeros(2, 2));
        assert_eq!(m.gamma1[1], CMat::identity(1, 1));
        assert_eq!(m.gamma2[0], CMat::zeros(1, 1));
    }

    #[test]
    fn iqi_closed_form_single_antenna() {
        let phi = 5f64.to_radians();
        let profile = IqiProfile {
            tx: DeviceIqi::uniform(1, 1.1, phi),
            rx: vec![DeviceIqi::perfect(1)],
        };
        let m = build_iqi_matrices(&profile).unwrap();
        // independent evaluation with cos/sin
        let v1 = c(0.5 * (1.0 + 1.1 * phi.cos()), 0.5 * 1.1 * phi.sin());
        let v2 = c(0.5 * (1.0 - 1.1 * phi.cos()), 0.5 * 1.1 * phi.sin());
        assert!((m.v1[(0, 0)] - v1).norm() < 1e-15);
        assert!((m.v2[(0, 0)] - v2).norm() < 1e-15);
        // in-phase branch passes unchanged, quadrature branch is a e^{j phi}
        let s = m.v1[(0, 0)] + m.v2[(0, 0)].conj();
        let d = m.v1[(0, 0)] - m.v2[(0, 0)].conj();
        assert!((s - c(1.0, 0.0)).norm() < 1e-15);
        assert!((d - C64::from_polar(1.1, phi)).norm() < 1e-15);
    }

    #[test]
    fn iqi_per_antenna_independence() {
        let profile = IqiProfile {
            tx: DeviceIqi {
                amplitude: vec![1.0, 0.9],
                phase: vec![0.0, -3f64.to_radians()],
            },
            rx: vec![DeviceIqi::perfect(1)],
        };
        let m = build_iqi_matrices(&profile).unwrap();
        let single = build_iqi_matrices(&IqiProfile {
            tx: DeviceIqi::uniform(1, 0.9, -3f64.to_radians()),
            rx: vec![DeviceIqi::perfect(1)],
        })
        .unwrap();
        assert_eq!(m.v1[(0, 0)], c(1.0, 0.0));
        assert_eq!(m.v2[(0, 0)], c(0.0, 0.0));
        assert_eq!(m.v1[(1, 1)], single.v1[(0, 0)]);
        assert_eq!(m.v2[(1, 1)], single.v2[(0, 0)]);
        assert_eq!(m.v1[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn non_positive_amplitude_rejected() {
        let profile = IqiProfile::symmetric(1, 1, 1, (0.0, 0.0), (1.0, 0.0));
        assert!(matches!(build_iqi_matrices(&profile), Err(Error::Validation(_))));
    }

    #[test]
    fn multiplication_by_j_rotates() {
        let eye = CMat::identity(1, 1);
        let zero = CMat::zeros(1, 1);
        let link = real_decompose(&scalar(c(0.0, 1.0)), &eye, &zero, &eye, &zero, 1.0).unwrap();
        assert_eq!(link.channel, RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        assert_eq!(link.noise, RMat::identity(2, 2) * 0.5);
    }

    fn rotate(x: &[C64], v1: &CMat, v2: &CMat) -> Vec<C64> {
        let xv = nalgebra::DVector::from_column_slice(x);
        let out = v1 * &xv + v2 * xv.map(|z| z.conj());
        out.iter().copied().collect()
    }

    #[test]
    fn widely_linear_equivalence_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (n_u, n_bs) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
            let profile = IqiProfile {
                tx: DeviceIqi {
                    amplitude: (0..n_bs).map(|_| rng.gen_range(0.7..1.3)).collect(),
                    phase: (0..n_bs).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                },
                rx: vec![DeviceIqi {
                    amplitude: (0..n_u).map(|_| rng.gen_range(0.7..1.3)).collect(),
                    phase: (0..n_u).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                }],
            };
            let m = build_iqi_matrices(&profile).unwrap();
            let h = random_cmat(&mut rng, n_u, n_bs);
            let link = real_decompose(&h, &m.v1, &m.v2, &m.gamma1[0], &m.gamma2[0], 1.0).unwrap();
            let x: Vec<C64> = (0..n_bs)
                .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let xt = rotate(&x, &m.v1, &m.v2);
            let y: Vec<C64> = (&h * nalgebra::DVector::from_column_slice(&xt)).iter().copied().collect();
            let direct = stack_re_im(&rotate(&y, &m.gamma1[0], &m.gamma2[0]));
            let real = &link.channel * nalgebra::DVector::from_vec(stack_re_im(&x));
            let scale = direct.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, b) in direct.iter().zip(real.iter()) {
                assert!((a - b).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    /// Sample covariance of `[Re w; Im w]`, `w = G1 n + G2 n*`, with its
    /// per-entry standard errors.
    fn monte_carlo_noise(g1: C64, g2: C64, sigma2: f64, samples: usize, seed: u64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (sigma2 / 2.0).sqrt();
        let mut sum = [[0.0; 2]; 2];
        let mut sum_sq = [[0.0; 2]; 2];
        for _ in 0..samples {
            let n = c(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal));
            let w = g1 * n + g2 * n.conj();
            let v = [w.re, w.im];
            for i in 0..2 {
                for j in 0..2 {
                    let p = v[i] * v[j];
                    sum[i][j] += p;
                    sum_sq[i][j] += p * p;
                }
            }
        }
        let nf = samples as f64;
        let mut mean = [[0.0; 2]; 2];
        let mut se = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                mean[i][j] = sum[i][j] / nf;
                let var = sum_sq[i][j] / nf - mean[i][j] * mean[i][j];
                se[i][j] = (var / nf).sqrt();
            }
        }
        (mean, se)
    }

    #[test]
    fn improper_noise_matches_monte_carlo() {
        let profile = IqiProfile::symmetric(1, 1, 1, (1.0, 0.0), (1.2, 10f64.to_radians()));
        let m = build_iqi_matrices(&profile).unwrap();
        let eye = CMat::identity(1, 1);
        let link = real_decompose(&eye, &m.v1, &m.v2, &m.gamma1[0], &m.gamma2[0], 1.0).unwrap();
        let (mean, se) = monte_carlo_noise(m.gamma1[0][(0, 0)], m.gamma2[0][(0, 0)], 1.0, 1_000_000, 5);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (link.noise[(i, j)] - mean[i][j]).abs() <= 3.0 * se[i][j],
                    "entry ({i},{j}): closed form {} vs sample {} (se {})",
                    link.noise[(i, j)],
                    mean[i][j],
                    se[i][j]
                );
            }
        }
        // the noise really is improper here
        assert!((link.noise[(0, 0)] - link.noise[(1, 1)]).abs() > 1e-3 || link.noise[(0, 1)].abs() > 1e-3);
    }

    #[test]
    fn noise_pd_and_proper_with_perfect_devices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(1..=3);
            let d = DeviceIqi {
                amplitude: (0..n).map(|_| rng.gen_range(0.2..3.0)).collect(),
                phase: (0..n).map(|_| rng.gen_range(-1.4..1.4)).collect(),
            };
            let m = build_iqi_matrices(&IqiProfile { tx: DeviceIqi::perfect(1), rx: vec![d] }).unwrap();
            let cn = noise_covariance(&m.rx_map(0), 2.0);
            assert!(min_eigenvalue(&cn) > 0.0);
            assert!(frobenius(&(&cn - cn.transpose())) < 1e-15);
        }
        let m = build_iqi_matrices(&IqiProfile::perfect(1, 1, 3)).unwrap();
        let cn = noise_covariance(&m.rx_map(0), 0.7);
        let j = complex_structure(3);
        assert!(frobenius(&(&j * &cn - &cn * &j)) < 1e-15);
        assert_eq!(cn, RMat::identity(6, 6) * 0.35);
    }

    #[test]
    fn ris_map_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let scene = ComplexScene {
            direct: vec![random_cmat(&mut rng, 2, 2), random_cmat(&mut rng, 2, 2)],
            ris_user: vec![random_cmat(&mut rng, 2, 3), random_cmat(&mut rng, 2, 3)],
            bs_ris: random_cmat(&mut rng, 3, 2),
            noise_power: 1.0,
            power_budget: 1.0,
        };
        let profile = IqiProfile::symmetric(2, 2, 2, (1.1, 0.1), (0.9, -0.2));
        let tr = Transceiver::new(&scene, &profile).unwrap();
        let theta = RisPhases(vec![c(0.3, 0.4), c(-0.9, 0.1), c(0.0, 0.5)]);
        for k in 0..2 {
            let direct = tr.link(&compose_effective_channel(&scene, &theta, k).unwrap(), k).channel;
            let mapped = tr.ris_map(&scene, k).eval_phases(&theta.0);
            assert!(frobenius(&(direct - mapped)) < 1e-12);
        }
    }
}
