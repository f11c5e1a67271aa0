//! Invariant suites runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ao::AoSettings;
use crate::error::Result;
use crate::linalg::{stack_re_im, symmetrize, CMat, RMat, C64};
use crate::rate::{common_rate_at_user, private_rate, CovarianceSet};
use crate::region::{alpha_grid, solve_point, SchemeConfig};
use crate::scenario::{load_fixed_realization, IqiConfig};
use crate::surrogate::{
    build_common_cov_bound, build_common_phase_bound, build_private_cov_bound, build_private_phase_bound, CovarianceSurrogate,
};
use crate::wl_model::{build_iqi_matrices, ComplexScene, DeviceIqi, IqiProfile, RisPhases, Transceiver};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

pub const SUITES: [&str; 4] = ["widely-linear", "surrogates", "monotonicity", "all"];

pub fn run_suite(suite: &str) -> Result<Vec<Check>> {
    match suite {
        "widely-linear" => widely_linear_suite(),
        "surrogates" => surrogate_suite(),
        "monotonicity" => monotonicity_suite(),
        "all" => {
            let mut all = widely_linear_suite()?;
            all.extend(surrogate_suite()?);
            all.extend(monotonicity_suite()?);
            Ok(all)
        }
        other => Err(crate::error::Error::Config(format!(
            "unknown suite `{other}` (available: {})",
            SUITES.join(", ")
        ))),
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_cmat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat {
    CMat::from_fn(m, n, |_, _| C64::new(gaussian(rng), gaussian(rng)))
}

fn random_device(rng: &mut ChaCha8Rng, n: usize) -> DeviceIqi {
    DeviceIqi {
        amplitude: (0..n).map(|_| rng.gen_range(0.7..1.3)).collect(),
        phase: (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
    }
}

fn widely_linear_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n_u, n_bs) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let profile = IqiProfile {
            tx: random_device(&mut rng, n_bs),
            rx: vec![random_device(&mut rng, n_u)],
        };
        let h = random_cmat(&mut rng, n_u, n_bs);
        let scene = ComplexScene::without_ris(vec![h.clone()], 1.0, 1.0);
        let link = Transceiver::new(&scene, &profile)?.link(&h, 0);
        let m = build_iqi_matrices(&profile)?;
        let x = random_cmat(&mut rng, n_bs, 1);
        let xt = &m.v1 * &x + &m.v2 * x.conjugate();
        let y = &h * xt;
        let out = &m.gamma1[0] * &y + &m.gamma2[0] * y.conjugate();
        let expected = stack_re_im(out.as_slice());
        let got = &link.channel * nalgebra::DVector::from_vec(stack_re_im(x.as_slice()));
        let scale = expected.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (a, b) in expected.iter().zip(got.iter()) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    let scene = ComplexScene::without_ris(vec![CMat::identity(2, 2)], 0.7, 1.0);
    let tr = Transceiver::new(&scene, &IqiProfile::perfect(1, 2, 2))?;
    let noise = tr.link(&scene.direct[0], 0).noise;
    let expected = RMat::identity(4, 4) * 0.35;
    let exact = noise == expected;
    Ok(vec![
        Check::new("widely-linear equivalence (100 inputs)", worst <= 1e-12, format!("max relative error {worst:e}")),
        Check::new("perfect-device noise is (sigma^2/2) I", exact, format!("max deviation {:e}", (&noise - &expected).amax())),
    ])
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> RMat {
    let a = RMat::from_fn(n, n, |_, _| gaussian(rng));
    symmetrize(&(&a * a.transpose() / n as f64))
}

fn random_cov(rng: &mut ChaCha8Rng, users: usize, n: usize) -> CovarianceSet {
    CovarianceSet {
        common: random_psd(rng, n),
        private: (0..users).map(|_| random_psd(rng, n)).collect(),
        common_alloc: vec![0.0; users],
    }
}

fn cov_exact(b: &CovarianceSurrogate, links: &[crate::wl_model::RealLink], cov: &CovarianceSet) -> Result<f64> {
    match b.kind {
        crate::surrogate::RateKind::Private(k) => private_rate(&links[k], cov, k),
        crate::surrogate::RateKind::Common(k) => common_rate_at_user(&links[k], cov),
    }
}

fn surrogate_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut tight, mut above, mut grad): (f64, f64, f64) = (0.0, f64::NEG_INFINITY, 0.0);
    for _ in 0..20 {
        let mut scene = ComplexScene::without_ris(vec![random_cmat(&mut rng, 2, 2), random_cmat(&mut rng, 2, 2)], 1.0, 10.0);
        scene.bs_ris = random_cmat(&mut rng, 4, 2) * C64::from(0.3);
        scene.ris_user = (0..2).map(|_| random_cmat(&mut rng, 2, 4) * C64::from(0.3)).collect();
        let iqi = IqiConfig::default().profile(2, 2, 2);
        let tr = Transceiver::new(&scene, &iqi)?;
        let theta = RisPhases::from_angles(&(0..4).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>());
        let links = tr.links(&scene, &theta)?;
        let cov = random_cov(&mut rng, 2, 4);

        let mut bounds = Vec::new();
        for k in 0..2 {
            bounds.push(build_private_cov_bound(&links, &cov, k)?);
            bounds.push(build_common_cov_bound(&links, &cov, k)?);
        }
        for b in &bounds {
            tight = tight.max((b.value(&cov)? - cov_exact(b, &links, &cov)?).abs());
        }
        for _ in 0..500 {
            let sample = random_cov(&mut rng, 2, 4);
            for b in &bounds {
                above = above.max(b.value(&sample)? - cov_exact(b, &links, &sample)?);
            }
        }
        // surrogate gradient against central differences of the exact rate
        let h = 1e-6;
        for b in &bounds {
            let (_, g) = b.gradient(&cov)?;
            for (i, j) in [(0, 0), (1, 2), (3, 1)] {
                let mut e = RMat::zeros(4, 4);
                e[(i, j)] += 0.5;
                e[(j, i)] += 0.5;
                let mut plus = cov.clone();
                let mut minus = cov.clone();
                plus.private[0] += &e * h;
                minus.private[0] -= &e * h;
                let fd = (cov_exact(b, &links, &plus)? - cov_exact(b, &links, &minus)?) / (2.0 * h);
                let analytic = g[0].dot(&e);
                grad = grad.max((fd - analytic).abs() / analytic.abs().max(1.0));
            }
        }

        for k in 0..2 {
            let map = tr.ris_map(&scene, k);
            for b in [
                build_private_phase_bound(&map, &links[k].noise, &cov, &theta, k)?,
                build_common_phase_bound(&map, &links[k].noise, &cov, &theta, k)?,
            ] {
                let z0 = theta.to_real();
                tight = tight.max((b.value_real(&z0) - b.exact_rate_real(&z0)?).abs());
                for _ in 0..500 {
                    let z: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    above = above.max(b.value_real(&z) - b.exact_rate_real(&z)?);
                }
            }
        }
    }
    Ok(vec![
        Check::new("surrogates tight at the expansion point", tight <= 1e-9, format!("max gap {tight:e}")),
        Check::new("surrogates minorize (20 instances x 500 samples)", above <= 1e-9, format!("max excess {above:e}")),
        Check::new("surrogate gradients match the rate", grad <= 1e-5, format!("max relative error {grad:e}")),
    ])
}

fn monotonicity_suite() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let settings = AoSettings::default();
    for name in ["C1", "C2", "C3", "C4", "C5"] {
        let scene = load_fixed_realization(name)?;
        let profile = IqiConfig::default().profile(2, scene.bs_antennas(), scene.user_antennas());
        let mut worst: f64 = 0.0;
        for alpha in alpha_grid(2, 5)? {
            for scheme in ["PR", "IR"] {
                let scheme: SchemeConfig = scheme.parse()?;
                let out = solve_point(&scene, &profile, &scheme, &alpha, &settings)?;
                for w in out.state.trace.windows(2) {
                    worst = worst.max(w[0] - w[1]);
                }
            }
        }
        checks.push(Check::new(
            &format!("monotone objective traces on {name}"),
            worst <= 1e-8,
            format!("largest decrease {worst:e}"),
        ));
    }
    Ok(checks)
}
