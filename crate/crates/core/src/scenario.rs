//! Scenario construction: fixed channel realizations, seeded geometric
//! fading, and the experiment configuration document.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ao::AoSettings;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::region::SchemeConfig;
use crate::wl_model::{ComplexScene, DeviceIqi, IqiProfile};

const REALIZATIONS: [(&str, &str); 5] = [
    ("C1", include_str!("../data/realizations/C1.toml")),
    ("C2", include_str!("../data/realizations/C2.toml")),
    ("C3", include_str!("../data/realizations/C3.toml")),
    ("C4", include_str!("../data/realizations/C4.toml")),
    ("C5", include_str!("../data/realizations/C5.toml")),
];

pub fn available_realizations() -> Vec<&'static str> {
    REALIZATIONS.iter().map(|(n, _)| *n).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationFile {
    #[allow(dead_code)]
    description: String,
    direct: Vec<MatrixFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl MatrixFile {
    fn to_matrix(&self) -> Result<CMat> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        if rows == 0
            || self.im.len() != rows
            || self.re.iter().chain(&self.im).any(|r| r.len() != cols)
        {
            return Err(Error::Parse("realization matrix has ragged or mismatched rows".into()));
        }
        Ok(CMat::from_fn(rows, cols, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }
}

/// Direct links of a named realization with unit noise power and a 10 dB
/// budget; no RIS.
pub fn load_fixed_realization(name: &str) -> Result<ComplexScene> {
    let text = REALIZATIONS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::UnknownRealization {
            name: name.to_string(),
            available: available_realizations().join(", "),
        })?;
    let file: RealizationFile = toml::from_str(text).map_err(|e| Error::Parse(format!("realization {name}: {e}")))?;
    let direct = file.direct.iter().map(MatrixFile::to_matrix).collect::<Result<Vec<_>>>()?;
    let scene = ComplexScene::without_ris(direct, 1.0, db_to_linear(10.0));
    scene.validate()?;
    Ok(scene)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    /// Direct links from a shipped realization; RIS links, if any, are drawn
    /// from the geometry with `seed`.
    Fixed { realization: String, seed: u64 },
    Generative {
        seed: u64,
        users: usize,
        bs_antennas: usize,
        user_antennas: usize,
    },
}

/// Amplitude and phase imbalance shared by all antennas of a side.
///
/// The default transmitter has amplitude imbalance only. Any transmit phase
/// offset gives the widely-linear map a real direction with gain above one,
/// which improper signaling can exploit to radiate more than the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqiConfig {
    pub tx_amplitude: f64,
    pub tx_phase_deg: f64,
    pub rx_amplitude: f64,
    pub rx_phase_deg: f64,
}

impl IqiConfig {
    pub fn perfect() -> Self {
        Self {
            tx_amplitude: 1.0,
            tx_phase_deg: 0.0,
            rx_amplitude: 1.0,
            rx_phase_deg: 0.0,
        }
    }

    pub fn profile(&self, users: usize, bs_antennas: usize, user_antennas: usize) -> IqiProfile {
        IqiProfile {
            tx: DeviceIqi::uniform(bs_antennas, self.tx_amplitude, self.tx_phase_deg.to_radians()),
            rx: vec![DeviceIqi::uniform(user_antennas, self.rx_amplitude, self.rx_phase_deg.to_radians()); users],
        }
    }
}

impl Default for IqiConfig {
    fn default() -> Self {
        Self {
            tx_amplitude: 0.8,
            tx_phase_deg: 0.0,
            rx_amplitude: 0.8,
            rx_phase_deg: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingConfig {
    /// Rician factor of the RIS links; `inf` keeps only the LoS component.
    pub rician_k: f64,
    pub ris_path_loss: f64,
    pub direct_path_loss: f64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            rician_k: 3.0,
            ris_path_loss: 3.2,
            direct_path_loss: 3.0,
        }
    }
}

/// Planar positions in meters; path gains are `(d / 1 m)^-exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub bs: [f64; 2],
    pub ris: [f64; 2],
    pub users: Vec<[f64; 2]>,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs: [0.0, 0.0],
            ris: [3.0, 2.0],
            users: vec![[4.0, 1.0], [5.0, 0.5]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schemes: Vec<SchemeConfig>,
    pub alpha_points: usize,
    pub ts_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            schemes: ["PT", "IT", "PR", "IR"].iter().map(|s| s.parse().unwrap()).collect(),
            alpha_points: 21,
            ts_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub power_db: f64,
    pub noise_power: f64,
    pub ris_elements: usize,
    /// Perfect transceivers when false, `iqi` otherwise.
    pub impaired: bool,
    pub channels: ChannelSource,
    pub iqi: IqiConfig,
    pub fading: FadingConfig,
    pub geometry: Geometry,
    pub sweep: SweepConfig,
    pub ao: AoSettings,
}

impl ScenarioConfig {
    /// A shipped realization at 10 dB with unit noise and no RIS.
    pub fn fixed(realization: &str) -> Self {
        Self {
            power_db: 10.0,
            noise_power: 1.0,
            ris_elements: 0,
            impaired: false,
            channels: ChannelSource::Fixed {
                realization: realization.to_string(),
                seed: 0,
            },
            iqi: IqiConfig::default(),
            fading: FadingConfig::default(),
            geometry: Geometry::default(),
            sweep: SweepConfig::default(),
            ao: AoSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn power_linear(&self) -> f64 {
        db_to_linear(self.power_db)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.power_db.is_finite() && self.power_db != f64::NEG_INFINITY {
            return Err(Error::Validation(format!("power must be finite dB or -inf, got {}", self.power_db)));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::Validation(format!("noise power must be positive, got {}", self.noise_power)));
        }
        if !(self.fading.rician_k >= 0.0) {
            return Err(Error::Validation(format!("Rician factor must be non-negative, got {}", self.fading.rician_k)));
        }
        if let ChannelSource::Generative { users, bs_antennas, user_antennas, .. } = self.channels {
            if users == 0 || bs_antennas == 0 || user_antennas == 0 {
                return Err(Error::Validation("generative dimensions must be positive".into()));
            }
        }
        if self.sweep.alpha_points < 2 || self.sweep.ts_points < 2 {
            return Err(Error::Validation("sweeps need at least 2 points".into()));
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<ComplexScene> {
        self.validate()?;
        let power = self.power_linear();
        match &self.channels {
            ChannelSource::Fixed { realization, seed } => {
                let mut scene = load_fixed_realization(realization)?;
                scene.noise_power = self.noise_power;
                scene.power_budget = power;
                if self.ris_elements > 0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    attach_ris(&mut scene, self, &mut rng)?;
                }
                Ok(scene)
            }
            ChannelSource::Generative { .. } => generate_scene(self),
        }
    }

    pub fn profile(&self, scene: &ComplexScene) -> IqiProfile {
        let iqi = if self.impaired { self.iqi.clone() } else { IqiConfig::perfect() };
        iqi.profile(scene.users(), scene.bs_antennas(), scene.user_antennas())
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> Result<f64> {
    let d = (a[0] - b[0]).hypot(a[1] - b[1]);
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Validation(format!("nodes at {a:?} and {b:?} coincide")));
    }
    Ok(d)
}

/// Half-wavelength uniform linear array response toward `to` seen from `from`.
fn steering(n: usize, from: [f64; 2], to: [f64; 2]) -> CMat {
    let angle = (to[1] - from[1]).atan2(to[0] - from[0]);
    CMat::from_fn(n, 1, |i, _| C64::from_polar(1.0, std::f64::consts::PI * i as f64 * angle.sin()))
}

fn circular(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
    })
}

/// `sqrt(beta) (sqrt(K/(K+1)) LoS + sqrt(1/(K+1)) CN(0, 1))`.
fn rician(rng: &mut ChaCha8Rng, los: CMat, k_factor: f64, gain: f64) -> CMat {
    let (rows, cols) = los.shape();
    let nlos = circular(rng, rows, cols);
    let (w_los, w_nlos) = if k_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k_factor / (k_factor + 1.0)).sqrt(), (1.0 / (k_factor + 1.0)).sqrt())
    };
    (los * C64::from(w_los) + nlos * C64::from(w_nlos)) * C64::from(gain.sqrt())
}

fn attach_ris(scene: &mut ComplexScene, config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<()> {
    let g = &config.geometry;
    if g.users.len() != scene.users() {
        return Err(Error::Config(format!(
            "geometry lists {} users, scene has {}",
            g.users.len(),
            scene.users()
        )));
    }
    let n = config.ris_elements;
    let f = &config.fading;
    let d0 = distance(g.bs, g.ris)?;
    let los = steering(n, g.ris, g.bs) * steering(scene.bs_antennas(), g.bs, g.ris).adjoint();
    scene.bs_ris = rician(rng, los, f.rician_k, d0.powf(-f.ris_path_loss));
    scene.ris_user = g
        .users
        .iter()
        .map(|&u| {
            let d = distance(g.ris, u)?;
            let los = steering(scene.user_antennas(), u, g.ris) * steering(n, g.ris, u).adjoint();
            Ok(rician(rng, los, f.rician_k, d.powf(-f.ris_path_loss)))
        })
        .collect::<Result<_>>()?;
    Ok(())
}

/// Draws a full scene: Rayleigh direct links and Rician RIS links with
/// distance-based path loss. Deterministic in the configured seed.
pub fn generate_scene(config: &ScenarioConfig) -> Result<ComplexScene> {
    let ChannelSource::Generative {
        seed,
        users,
        bs_antennas,
        user_antennas,
    } = config.channels
    else {
        return Err(Error::Config("scene generation needs generative mode".into()));
    };
    let g = &config.geometry;
    if g.users.len() != users {
        return Err(Error::Config(format!("geometry lists {} users, config has {users}", g.users.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direct = g
        .users
        .iter()
        .map(|&u| {
            let gain = distance(g.bs, u)?.powf(-config.fading.direct_path_loss);
            Ok(circular(&mut rng, user_antennas, bs_antennas) * C64::from(gain.sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scene = ComplexScene::without_ris(direct, config.noise_power, config.power_linear());
    if config.ris_elements > 0 {
        attach_ris(&mut scene, config, &mut rng)?;
    }
    scene.validate()?;
    Ok(scene)
}
