//! Synthetic patient-structured benchmarks.
//!
//! Each patient gets one class and a fixed displacement from that class mean;
//! every image of the patient is an isotropic Gaussian draw around
//! `class mean + patient offset`. With `patient_offset_scale = 0` the patient
//! carries no information beyond the class.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ClassLabel, DatasetSplit, PatientId, Sample, SampleId};
use crate::{seed, Error, Result};

/// How many images each patient contributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImagesPerPatient {
    /// Every patient has exactly `count` images.
    Uniform { count: usize },
    /// Discrete Pareto counts: `floor(min * u^(-1/skew))` clamped to `max`.
    /// Smaller `skew` means a heavier tail.
    HeavyTailed { min: usize, max: usize, skew: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    pub num_patients: usize,
    pub images_per_patient: ImagesPerPatient,
    pub feature_dim: usize,
    /// Distance of each class mean from the origin.
    pub class_separation: f64,
    /// Typical norm of the per-patient displacement.
    pub patient_offset_scale: f64,
    /// Share of each class's patients held out for the test split.
    pub test_fraction_of_patients: f64,
    pub noise_scale: f64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_classes < 2 {
            return bad(format!("num_classes must be >= 2, got {}", self.num_classes));
        }
        if self.num_patients < self.num_classes {
            return bad(format!(
                "num_patients ({}) must be >= num_classes ({})",
                self.num_patients, self.num_classes
            ));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return bad(format!("class_separation must be > 0, got {}", self.class_separation));
        }
        if !(self.patient_offset_scale >= 0.0 && self.patient_offset_scale.is_finite()) {
            return bad(format!(
                "patient_offset_scale must be >= 0, got {}",
                self.patient_offset_scale
            ));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale must be > 0, got {}", self.noise_scale));
        }
        let f = self.test_fraction_of_patients;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("test_fraction_of_patients must be in (0, 1), got {f}"));
        }
        match self.images_per_patient {
            ImagesPerPatient::Uniform { count: 0 } => {
                bad("images_per_patient.count must be positive".into())
            }
            ImagesPerPatient::HeavyTailed { min, max, skew }
                if min == 0 || max < min || !(skew > 0.0 && skew.is_finite()) =>
            {
                bad(format!(
                    "heavy-tailed images_per_patient needs 1 <= min <= max and skew > 0, got min={min}, max={max}, skew={skew}"
                ))
            }
            _ => Ok(()),
        }
    }

    /// Named configurations used by the CLI and the test suites.
    ///
    /// - `balanced`: 3 classes, 60 patients with 8 images each.
    /// - `skewed`: 3 classes, 60 patients with heavy-tailed image counts and
    ///   patient offsets much larger than the image noise.
    /// - `skewed-control`: `skewed` with the patient offsets switched off.
    /// - `abundant`: 1800 patients with 2 images each, enough for twenty
    ///   128-sample rounds with a distinct patient in every slot.
    pub fn preset(name: &str) -> Result<Self> {
        let skewed = SyntheticConfig {
            num_classes: 3,
            num_patients: 60,
            images_per_patient: ImagesPerPatient::HeavyTailed {
                min: 1,
                max: 60,
                skew: 0.8,
            },
            feature_dim: 8,
            class_separation: 2.5,
            patient_offset_scale: 2.0,
            test_fraction_of_patients: 0.2,
            noise_scale: 0.25,
        };
        Ok(match name {
            "balanced" => SyntheticConfig {
                images_per_patient: ImagesPerPatient::Uniform { count: 8 },
                patient_offset_scale: 0.75,
                noise_scale: 0.5,
                ..skewed
            },
            "skewed" => skewed,
            "skewed-control" => SyntheticConfig {
                patient_offset_scale: 0.0,
                ..skewed
            },
            "abundant" => SyntheticConfig {
                num_patients: 1800,
                images_per_patient: ImagesPerPatient::Uniform { count: 2 },
                patient_offset_scale: 0.75,
                noise_scale: 0.5,
                ..skewed
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (expected one of: {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }
}

pub const PRESETS: &[&str] = &["balanced", "skewed", "skewed-control", "abundant"];

fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn image_count<R: Rng>(rng: &mut R, dist: &ImagesPerPatient) -> usize {
    match *dist {
        ImagesPerPatient::Uniform { count } => count,
        ImagesPerPatient::HeavyTailed { min, max, skew } => {
            // u in (0, 1]
            let u = 1.0 - rng.random::<f64>();
            let raw = (min as f64) * u.powf(-1.0 / skew);
            (raw.floor() as usize).clamp(min, max)
        }
    }
}

/// Draws a patient-structured split. A pure function of `(cfg, seed)`.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<DatasetSplit> {
    cfg.validate()?;
    let mut rng = seed::rng(seed);
    let d = cfg.feature_dim;

    let class_means: Vec<Vec<f64>> = (0..cfg.num_classes)
        .map(|_| {
            let v = gaussian_vec(&mut rng, d, 1.0);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x * cfg.class_separation / norm).collect()
        })
        .collect();

    // Patients are dealt to classes round-robin so every class is populated.
    let offset_sd = cfg.patient_offset_scale / (d as f64).sqrt();
    let mut patients = Vec::with_capacity(cfg.num_patients);
    for p in 0..cfg.num_patients {
        let class = p % cfg.num_classes;
        let offset = gaussian_vec(&mut rng, d, offset_sd);
        let count = image_count(&mut rng, &cfg.images_per_patient);
        let center: Vec<f64> = class_means[class]
            .iter()
            .zip(&offset)
            .map(|(m, o)| m + o)
            .collect();
        let images: Vec<Vec<f64>> = (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + cfg.noise_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        patients.push((class, images));
    }

    let mut held_out = vec![false; cfg.num_patients];
    for class in 0..cfg.num_classes {
        let mut members: Vec<usize> = (class..cfg.num_patients).step_by(cfg.num_classes).collect();
        members.shuffle(&mut rng);
        let n = members.len();
        let take = if n < 2 {
            0
        } else {
            ((cfg.test_fraction_of_patients * n as f64).round() as usize).clamp(1, n - 1)
        };
        for &p in &members[..take] {
            held_out[p] = true;
        }
    }
    if !held_out.iter().any(|&h| h) {
        return Err(Error::Config(
            "configuration leaves the test split without patients".into(),
        ));
    }

    let width = cfg.num_patients.to_string().len();
    let mut next_id = 0u64;
    let mut pool = Vec::new();
    let mut test = Vec::new();
    for (p, (class, images)) in patients.into_iter().enumerate() {
        let patient = PatientId::new(format!("P{p:0width$}"));
        for features in images {
            let s = Sample::new(SampleId(next_id), patient.clone(), features, ClassLabel(class));
            next_id += 1;
            if held_out[p] {
                test.push(s);
            } else {
                pool.push(s);
            }
        }
    }
    DatasetSplit::new(pool, test, cfg.num_classes)
}
