//! Population anthropometrics: log-normal height and mass, BMI filtering,
//! truncated-normal mesh scaling and KL alignment against a target.

use std::fmt;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal};
use thiserror::Error;

use crate::data_model::{KvConfig, KvError, TriMesh, DM3_PER_M3};

/// Draws per acceptance window when rejecting on BMI.
const REJECTION_WINDOW: usize = 1000;
/// Minimum accepted draws per window (rejection rate above 99% fails).
const MIN_ACCEPTED_PER_WINDOW: usize = REJECTION_WINDOW / 100;
/// Rejection attempts for a truncated normal before inverting the CDF.
const TRUNCATED_MAX_TRIES: usize = 1000;

#[derive(Debug, Error)]
pub enum AnthroError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("infeasible model: BMI rejection rate above 99% over {REJECTION_WINDOW} draws")]
    Infeasible,
    #[error("value must be positive, got {0}")]
    NonPositive(f64),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("bins must be positive")]
    NoBins,
    #[error("target mass in the histogram support is numerically 0")]
    TargetMassZero,
    #[error(transparent)]
    Config(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, AnthroError> {
        let p = Self { mu, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with the given median.
    pub fn with_median(median: f64, sigma: f64) -> Self {
        Self {
            mu: median.ln(),
            sigma,
        }
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    fn validate(&self) -> Result<(), AnthroError> {
        if !(self.mu.is_finite() && self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(AnthroError::InvalidModel(format!(
                "log-normal needs finite mu and sigma > 0, got ({}, {})",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }

    fn distribution(&self) -> LogNormal {
        LogNormal::new(self.mu, self.sigma).expect("validated log-normal")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenderModel {
    /// kg
    pub mass: LogNormalParams,
    /// m
    pub height: LogNormalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnthropometricModel {
    pub male: GenderModel,
    pub female: GenderModel,
    /// Probability of drawing a female.
    pub gender_mix: f64,
    /// Accepted BMI range in kg/m².
    pub bmi_range: [f64; 2],
    /// kg/m³
    pub body_density: f64,
}

impl Default for AnthropometricModel {
    fn default() -> Self {
        Self {
            male: GenderModel {
                mass: LogNormalParams::with_median(78.0, 0.16),
                height: LogNormalParams::with_median(1.76, 0.038),
            },
            female: GenderModel {
                mass: LogNormalParams::with_median(65.0, 0.17),
                height: LogNormalParams::with_median(1.63, 0.040),
            },
            gender_mix: 0.5,
            bmi_range: [10.0, 50.0],
            body_density: 1000.0,
        }
    }
}

const MODEL_KEYS: &[&str] = &[
    "male.height.mu",
    "male.height.sigma",
    "male.mass.mu",
    "male.mass.sigma",
    "female.height.mu",
    "female.height.sigma",
    "female.mass.mu",
    "female.mass.sigma",
    "gender_mix",
    "bmi.lo",
    "bmi.hi",
    "body_density",
];

impl AnthropometricModel {
    pub fn gender(&self, g: Gender) -> &GenderModel {
        match g {
            Gender::Male => &self.male,
            Gender::Female => &self.female,
        }
    }

    pub fn validate(&self) -> Result<(), AnthroError> {
        for g in [&self.male, &self.female] {
            g.mass.validate()?;
            g.height.validate()?;
        }
        if !(0.0..=1.0).contains(&self.gender_mix) {
            return Err(AnthroError::InvalidModel(format!("gender_mix {} not in [0,1]", self.gender_mix)));
        }
        let [lo, hi] = self.bmi_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(AnthroError::InvalidModel(format!("bmi range [{lo}, {hi}] is empty")));
        }
        if !(self.body_density.is_finite() && self.body_density > 0.0) {
            return Err(AnthroError::InvalidModel(format!("body_density {} must be > 0", self.body_density)));
        }
        Ok(())
    }

    /// Defaults overridden by the keys present in `cfg`; unknown keys fail.
    pub fn from_config(cfg: &KvConfig) -> Result<Self, AnthroError> {
        cfg.check_keys(|k| MODEL_KEYS.contains(&k))?;
        let d = Self::default();
        let gender = |name: &str, g: &GenderModel| -> Result<GenderModel, KvError> {
            Ok(GenderModel {
                height: LogNormalParams {
                    mu: cfg.get_or(&format!("{name}.height.mu"), g.height.mu)?,
                    sigma: cfg.get_or(&format!("{name}.height.sigma"), g.height.sigma)?,
                },
                mass: LogNormalParams {
                    mu: cfg.get_or(&format!("{name}.mass.mu"), g.mass.mu)?,
                    sigma: cfg.get_or(&format!("{name}.mass.sigma"), g.mass.sigma)?,
                },
            })
        };
        let model = Self {
            male: gender("male", &d.male)?,
            female: gender("female", &d.female)?,
            gender_mix: cfg.get_or("gender_mix", d.gender_mix)?,
            bmi_range: [cfg.get_or("bmi.lo", d.bmi_range[0])?, cfg.get_or("bmi.hi", d.bmi_range[1])?],
            body_density: cfg.get_or("body_density", d.body_density)?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_config(&self) -> KvConfig {
        let mut cfg = KvConfig::new();
        for (name, g) in [("male", &self.male), ("female", &self.female)] {
            cfg.set(format!("{name}.height.mu"), g.height.mu);
            cfg.set(format!("{name}.height.sigma"), g.height.sigma);
            cfg.set(format!("{name}.mass.mu"), g.mass.mu);
            cfg.set(format!("{name}.mass.sigma"), g.mass.sigma);
        }
        cfg.set("gender_mix", self.gender_mix);
        cfg.set("bmi.lo", self.bmi_range[0]);
        cfg.set("bmi.hi", self.bmi_range[1]);
        cfg.set("body_density", self.body_density);
        cfg
    }

    /// Log-normal BMI implied by independent height and mass for one gender.
    pub fn bmi_distribution(&self, g: Gender) -> LogNormalParams {
        let m = self.gender(g);
        LogNormalParams {
            mu: m.mass.mu - 2.0 * m.height.mu,
            sigma: (m.mass.sigma.powi(2) + 4.0 * m.height.sigma.powi(2)).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonSample {
    pub gender: Gender,
    pub height_m: f64,
    pub mass_kg: f64,
    pub bmi: f64,
    pub volume_dm3: f64,
}

/// Uniform draw in the open interval (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    Normal::standard().inverse_cdf(open_unit(rng))
}

fn draw_lognormal(p: &LogNormalParams, rng: &mut impl Rng) -> f64 {
    (p.mu + p.sigma * standard_normal(rng)).exp()
}

pub fn sample_population(model: &AnthropometricModel, n: usize, seed: u64) -> Result<Vec<PersonSample>, AnthroError> {
    model.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let (mut draws, mut accepted) = (0usize, 0usize);
    while out.len() < n {
        let gender = if open_unit(&mut rng) < model.gender_mix {
            Gender::Female
        } else {
            Gender::Male
        };
        let g = model.gender(gender);
        let height_m = draw_lognormal(&g.height, &mut rng);
        let mass_kg = draw_lognormal(&g.mass, &mut rng);
        let bmi = mass_kg / (height_m * height_m);
        draws += 1;
        if (model.bmi_range[0]..=model.bmi_range[1]).contains(&bmi) {
            accepted += 1;
            out.push(PersonSample {
                gender,
                height_m,
                mass_kg,
                bmi,
                volume_dm3: volume_from_mass_unchecked(mass_kg, model.body_density) * DM3_PER_M3,
            });
        }
        if draws == REJECTION_WINDOW {
            if accepted < MIN_ACCEPTED_PER_WINDOW && out.len() < n {
                return Err(AnthroError::Infeasible);
            }
            draws = 0;
            accepted = 0;
        }
    }
    Ok(out)
}

fn check_positive(x: f64) -> Result<f64, AnthroError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(AnthroError::NonPositive(x))
    }
}

fn volume_from_mass_unchecked(mass_kg: f64, density: f64) -> f64 {
    mass_kg / density
}

/// kg from m³.
pub fn mass_from_volume(volume_m3: f64, density: f64) -> Result<f64, AnthroError> {
    Ok(check_positive(volume_m3)? * check_positive(density)?)
}

/// m³ from kg.
pub fn volume_from_mass(mass_kg: f64, density: f64) -> Result<f64, AnthroError> {
    Ok(volume_from_mass_unchecked(check_positive(mass_kg)?, check_positive(density)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    pub fn validate(&self) -> Result<(), AnthroError> {
        let finite = [self.mean, self.std, self.lower, self.upper].iter().all(|v| v.is_finite());
        if !(finite && self.std > 0.0 && self.lower > 0.0 && self.lower < self.upper) {
            return Err(AnthroError::InvalidModel(format!("bad truncated normal {self:?}")));
        }
        Ok(())
    }

    /// Analytic mean of the truncated distribution.
    pub fn truncated_mean(&self) -> f64 {
        let n = Normal::standard();
        let a = (self.lower - self.mean) / self.std;
        let b = (self.upper - self.mean) / self.std;
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        self.mean + self.std * (pdf(a) - pdf(b)) / (n.cdf(b) - n.cdf(a))
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        for _ in 0..TRUNCATED_MAX_TRIES {
            let x = self.mean + self.std * standard_normal(rng);
            if (self.lower..=self.upper).contains(&x) {
                return x;
            }
        }
        // Narrow or far-tail windows: invert the CDF restricted to the window.
        let n = Normal::standard();
        let lo = n.cdf((self.lower - self.mean) / self.std);
        let hi = n.cdf((self.upper - self.mean) / self.std);
        let u = lo + (hi - lo) * open_unit(rng);
        (self.mean + self.std * n.inverse_cdf(u)).clamp(self.lower, self.upper)
    }
}

/// Per-axis scaling factors: α (x), β (y), γ (z, height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub alpha: TruncatedNormal,
    pub beta: TruncatedNormal,
    pub gamma: TruncatedNormal,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        let width = TruncatedNormal {
            mean: 1.0,
            std: 0.08,
            lower: 0.8,
            upper: 1.25,
        };
        Self {
            alpha: width,
            beta: width,
            gamma: TruncatedNormal {
                mean: 1.0,
                std: 0.04,
                lower: 0.9,
                upper: 1.1,
            },
        }
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<(), AnthroError> {
        self.alpha.validate()?;
        self.beta.validate()?;
        self.gamma.validate()
    }

    pub fn from_config(cfg: &KvConfig) -> Result<Self, AnthroError> {
        const FIELDS: [&str; 4] = ["mean", "std", "lower", "upper"];
        cfg.check_keys(|k| {
            k.split_once('.')
                .is_some_and(|(axis, f)| ["alpha", "beta", "gamma"].contains(&axis) && FIELDS.contains(&f))
        })?;
        let d = Self::default();
        let axis = |name: &str, t: &TruncatedNormal| -> Result<TruncatedNormal, KvError> {
            Ok(TruncatedNormal {
                mean: cfg.get_or(&format!("{name}.mean"), t.mean)?,
                std: cfg.get_or(&format!("{name}.std"), t.std)?,
                lower: cfg.get_or(&format!("{name}.lower"), t.lower)?,
                upper: cfg.get_or(&format!("{name}.upper"), t.upper)?,
            })
        };
        let out = Self {
            alpha: axis("alpha", &d.alpha)?,
            beta: axis("beta", &d.beta)?,
            gamma: axis("gamma", &d.gamma)?,
        };
        out.validate()?;
        Ok(out)
    }
}

/// One `(α, β, γ)` triple; deterministic per seed.
pub fn sample_scaling(cfg: &ScalingConfig, seed: u64) -> Result<(f64, f64, f64), AnthroError> {
    cfg.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    Ok(sample_scaling_with(cfg, &mut rng))
}

/// Draw from a caller-owned generator, for bulk sampling.
pub fn sample_scaling_with(cfg: &ScalingConfig, rng: &mut impl Rng) -> (f64, f64, f64) {
    let a = cfg.alpha.sample(rng);
    let b = cfg.beta.sample(rng);
    let c = cfg.gamma.sample(rng);
    (a, b, c)
}

pub fn apply_scaling(mesh: &TriMesh, alpha: f64, beta: f64, gamma: f64) -> Result<TriMesh, AnthroError> {
    let f = Vector3::new(check_positive(alpha)?, check_positive(beta)?, check_positive(gamma)?);
    Ok(mesh.map_vertices(|v| v.component_mul(&f)))
}

/// Apply fresh scaling factors to every sample: height by γ, volume and
/// mass by αβγ, BMI recomputed.
pub fn rescale_population(
    samples: &[PersonSample],
    cfg: &ScalingConfig,
    density: f64,
    seed: u64,
) -> Result<Vec<PersonSample>, AnthroError> {
    cfg.validate()?;
    check_positive(density)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    Ok(samples
        .iter()
        .map(|s| {
            let (a, b, c) = sample_scaling_with(cfg, &mut rng);
            let volume_dm3 = s.volume_dm3 * a * b * c;
            let height_m = s.height_m * c;
            let mass_kg = volume_dm3 / DM3_PER_M3 * density;
            PersonSample {
                gender: s.gender,
                height_m,
                mass_kg,
                bmi: mass_kg / (height_m * height_m),
                volume_dm3,
            }
        })
        .collect())
}

/// `Σ p ln(p/q)` over bins with `p > 0`. Inputs need not be normalised.
pub fn histogram_kl(p: &[f64], q: &[f64]) -> f64 {
    let ps: f64 = p.iter().sum();
    let qs: f64 = q.iter().sum();
    let mut acc = crate::numeric::NeumaierSum::new();
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            let (pn, qn) = (pi / ps, qi / qs);
            if qn <= 0.0 {
                return f64::INFINITY;
            }
            acc.add(pn * (pn / qn).ln());
        }
    }
    acc.value().max(0.0)
}

/// Histogram KL divergence (nats) of `samples` from the log-normal target,
/// with `bins` equal-width bins over the sample range.
pub fn kl_divergence(samples: &[f64], target: &LogNormalParams, bins: usize) -> Result<f64, AnthroError> {
    if samples.len() < 2 {
        return Err(AnthroError::TooFewSamples(samples.len()));
    }
    if bins == 0 {
        return Err(AnthroError::NoBins);
    }
    target.validate()?;
    for &s in samples {
        check_positive(s)?;
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &s in samples {
        let i = if width > 0.0 {
            (((s - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[i] += 1.0;
    }
    let dist = target.distribution();
    let edge = |i: usize| if i == bins { hi } else { lo + width * i as f64 };
    let q: Vec<f64> = (0..bins).map(|i| (dist.cdf(edge(i + 1)) - dist.cdf(edge(i))).max(0.0)).collect();
    let mass: f64 = q.iter().sum();
    if !(mass > f64::MIN_POSITIVE) {
        return Err(AnthroError::TargetMassZero);
    }
    Ok(histogram_kl(&counts, &q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub kl_before: f64,
    pub kl_after: f64,
    /// Relative reduction `(before - after) / before`; positive when the
    /// divergence decreases.
    pub reduction: f64,
}

impl AlignmentReport {
    /// Signed percentage change of the divergence, negative on decrease.
    pub fn pct_change(&self) -> f64 {
        -100.0 * self.reduction
    }

    /// `metric,before,after,pct_change` row.
    pub fn csv_row(&self, metric: &str) -> String {
        format!("{metric},{},{},{}", self.kl_before, self.kl_after, self.pct_change())
    }
}

pub const ALIGNMENT_CSV_HEADER: &str = "metric,before,after,pct_change";

pub fn alignment_report(
    before: &[f64],
    after: &[f64],
    target: &LogNormalParams,
    bins: usize,
) -> Result<AlignmentReport, AnthroError> {
    let kl_before = kl_divergence(before, target, bins)?;
    let kl_after = kl_divergence(after, target, bins)?;
    let reduction = if kl_before == kl_after {
        0.0
    } else {
        (kl_before - kl_after) / kl_before
    };
    Ok(AlignmentReport {
        kl_before,
        kl_after,
        reduction,
    })
}
