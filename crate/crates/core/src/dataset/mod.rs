//! Patient-grouped data model.
//!
//! A [`DatasetSplit`] holds an unlabeled pool, which doubles as the simulated
//! oracle, and a test set drawn from a disjoint patient cohort. Labels of pool
//! samples are only reachable through [`DatasetSplit::reveal_label`].

mod csv_io;
mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use csv_io::{load_dataset, read_dataset, write_dataset, CsvSchema};
pub use synthetic::{generate_synthetic, ImagesPerPatient, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u64);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque patient token, the only EMR field the engine consumes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatientId(pub String);

impl PatientId {
    pub fn new(id: impl Into<String>) -> Self {
        PatientId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PatientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub usize);

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One scan, represented by its feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: SampleId,
    pub patient: PatientId,
    pub features: Vec<f64>,
    label: ClassLabel,
}

impl Sample {
    pub fn new(id: SampleId, patient: PatientId, features: Vec<f64>, label: ClassLabel) -> Self {
        Sample {
            id,
            patient,
            features,
            label,
        }
    }

    pub(crate) fn label(&self) -> ClassLabel {
        self.label
    }
}

/// Which side of a split a sample lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Pool,
    Test,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Pool => "pool",
            SplitKind::Test => "test",
        }
    }
}

/// Resolves the patient of a pool sample.
pub trait PatientLookup {
    fn patient_of(&self, id: SampleId) -> Option<&PatientId>;
}

impl PatientLookup for HashMap<SampleId, PatientId> {
    fn patient_of(&self, id: SampleId) -> Option<&PatientId> {
        self.get(&id)
    }
}

impl PatientLookup for BTreeMap<SampleId, PatientId> {
    fn patient_of(&self, id: SampleId) -> Option<&PatientId> {
        self.get(&id)
    }
}

/// Pool plus patient-disjoint test set. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pool: Vec<Sample>,
    test: Vec<Sample>,
    num_classes: usize,
    feature_dim: usize,
    pool_index: HashMap<SampleId, usize>,
}

impl DatasetSplit {
    /// Builds a split, rejecting any invariant violation.
    pub fn new(pool: Vec<Sample>, test: Vec<Sample>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if pool.is_empty() {
            return Err(Error::InvalidData("pool split is empty".into()));
        }
        if test.is_empty() {
            return Err(Error::InvalidData("test split is empty".into()));
        }
        let feature_dim = pool[0].features.len();
        if feature_dim == 0 {
            return Err(Error::InvalidData("samples have no features".into()));
        }

        let mut ids = HashSet::with_capacity(pool.len() + test.len());
        for s in pool.iter().chain(test.iter()) {
            if s.features.len() != feature_dim {
                return Err(Error::InvalidData(format!(
                    "sample {} has {} features, expected {feature_dim}",
                    s.id,
                    s.features.len()
                )));
            }
            if let Some(x) = s.features.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "sample {} has non-finite feature {x}",
                    s.id
                )));
            }
            if s.label.0 >= num_classes {
                return Err(Error::InvalidData(format!(
                    "sample {} has label {} outside [0, {num_classes})",
                    s.id, s.label
                )));
            }
            if !ids.insert(s.id) {
                return Err(Error::InvalidData(format!("duplicate sample id {}", s.id)));
            }
        }

        let pool_patients: HashSet<&PatientId> = pool.iter().map(|s| &s.patient).collect();
        if let Some(s) = test.iter().find(|s| pool_patients.contains(&s.patient)) {
            return Err(Error::Disjointness(s.patient.clone()));
        }

        let pool_index = pool.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        Ok(DatasetSplit {
            pool,
            test,
            num_classes,
            feature_dim,
            pool_index,
        })
    }

    pub fn pool(&self) -> &[Sample] {
        &self.pool
    }

    pub fn test(&self) -> &[Sample] {
        &self.test
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn pool_sample(&self, id: SampleId) -> Option<&Sample> {
        self.pool_index.get(&id).map(|&i| &self.pool[i])
    }

    /// Position of `id` within [`pool`](Self::pool).
    pub fn pool_position(&self, id: SampleId) -> Option<usize> {
        self.pool_index.get(&id).copied()
    }

    /// Simulated oracle: ground-truth label of a pool sample. Test samples are
    /// not served.
    pub fn reveal_label(&self, id: SampleId) -> Result<ClassLabel> {
        self.pool_sample(id)
            .map(Sample::label)
            .ok_or(Error::UnknownSample(id))
    }

    /// Test features paired with their labels, for evaluation.
    pub fn test_examples(&self) -> impl Iterator<Item = (&[f64], ClassLabel)> + '_ {
        self.test.iter().map(|s| (s.features.as_slice(), s.label))
    }

    pub fn pool_patient_count(&self) -> usize {
        patient_distribution(&self.pool).len()
    }

    pub fn test_patient_count(&self) -> usize {
        patient_distribution(&self.test).len()
    }

    pub(crate) fn samples_with_kind(&self) -> impl Iterator<Item = (&Sample, SplitKind)> + '_ {
        self.pool
            .iter()
            .map(|s| (s, SplitKind::Pool))
            .chain(self.test.iter().map(|s| (s, SplitKind::Test)))
    }
}

impl PatientLookup for DatasetSplit {
    fn patient_of(&self, id: SampleId) -> Option<&PatientId> {
        self.pool_sample(id).map(|s| &s.patient)
    }
}

/// Number of samples per patient. Counts sum to `pool.len()`.
pub fn patient_distribution(pool: &[Sample]) -> BTreeMap<PatientId, usize> {
    let mut counts = BTreeMap::new();
    for s in pool {
        *counts.entry(s.patient.clone()).or_insert(0) += 1;
    }
    counts
}

/// Applies `(x - mu) / sigma` to every coordinate of every sample.
pub fn normalize_features(split: DatasetSplit, mu: f64, sigma: f64) -> Result<DatasetSplit> {
    if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(Error::config(format!(
            "normalization needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
        )));
    }
    let DatasetSplit {
        mut pool,
        mut test,
        num_classes,
        ..
    } = split;
    for s in pool.iter_mut().chain(test.iter_mut()) {
        for x in s.features.iter_mut() {
            *x = (*x - mu) / sigma;
        }
    }
    DatasetSplit::new(pool, test, num_classes)
}

/// Mean and std of OCT scan intensities.
pub const OCT_NORMALIZATION: (f64, f64) = (0.1987, 0.0786);
/// Mean and std of chest X-ray intensities.
pub const XRAY_NORMALIZATION: (f64, f64) = (0.4823, 0.0379);

/// The growing training set: pool ids in insertion order with revealed labels.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    members: Vec<(SampleId, ClassLabel)>,
    seen: HashSet<SampleId>,
}

impl LabeledSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queries the oracle for `id` and appends it.
    pub fn reveal_and_push(&mut self, split: &DatasetSplit, id: SampleId) -> Result<()> {
        if self.seen.contains(&id) {
            return Err(Error::usage(format!("sample {id} is already labeled")));
        }
        let label = split.reveal_label(id)?;
        self.seen.insert(id);
        self.members.push((id, label));
        Ok(())
    }

    pub fn contains(&self, id: SampleId) -> bool {
        self.seen.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[(SampleId, ClassLabel)] {
        &self.members
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample(id: u64, patient: &str, features: Vec<f64>, label: usize) -> Sample {
        Sample::new(SampleId(id), PatientId::new(patient), features, ClassLabel(label))
    }

    fn tiny_split() -> DatasetSplit {
        DatasetSplit::new(
            vec![
                sample(0, "A", vec![0.0, 1.0], 0),
                sample(1, "A", vec![1.0, 0.0], 2),
                sample(2, "B", vec![2.0, 0.5], 1),
            ],
            vec![sample(3, "C", vec![0.5, 0.5], 1)],
            3,
        )
        .unwrap()
    }

    #[test]
    fn patient_distribution_counts() {
        let pool = vec![
            sample(0, "A", vec![0.0], 0),
            sample(1, "A", vec![0.0], 0),
            sample(2, "B", vec![0.0], 1),
        ];
        let d = patient_distribution(&pool);
        assert_eq!(d.len(), 2);
        assert_eq!(d[&PatientId::new("A")], 2);
        assert_eq!(d[&PatientId::new("B")], 1);
        assert!(patient_distribution(&[]).is_empty());

        let many: Vec<_> = (0..1000).map(|i| sample(i, "A", vec![0.0], 0)).collect();
        let d = patient_distribution(&many);
        assert_eq!(d.len(), 1);
        assert_eq!(d[&PatientId::new("A")], 1000);
    }

    #[test]
    fn oracle_serves_pool_only() {
        let split = tiny_split();
        assert_eq!(split.reveal_label(SampleId(1)).unwrap(), ClassLabel(2));
        assert_eq!(split.reveal_label(SampleId(1)).unwrap(), ClassLabel(2));
        assert!(matches!(
            split.reveal_label(SampleId(3)),
            Err(Error::UnknownSample(SampleId(3)))
        ));
        assert!(split.reveal_label(SampleId(99)).is_err());
    }

    #[test]
    fn split_rejects_violations() {
        let err = DatasetSplit::new(
            vec![sample(0, "A", vec![0.0], 0)],
            vec![sample(1, "A", vec![0.0], 1)],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Disjointness(ref p) if p.as_str() == "A"));

        let dup = DatasetSplit::new(
            vec![sample(0, "A", vec![0.0], 0)],
            vec![sample(0, "B", vec![0.0], 1)],
            2,
        );
        assert!(matches!(dup, Err(Error::InvalidData(_))));

        let nan = DatasetSplit::new(
            vec![sample(0, "A", vec![f64::NAN], 0)],
            vec![sample(1, "B", vec![0.0], 1)],
            2,
        );
        assert!(matches!(nan, Err(Error::InvalidData(_))));

        let label = DatasetSplit::new(
            vec![sample(0, "A", vec![0.0], 2)],
            vec![sample(1, "B", vec![0.0], 1)],
            2,
        );
        assert!(matches!(label, Err(Error::InvalidData(_))));

        let empty = DatasetSplit::new(vec![], vec![sample(1, "B", vec![0.0], 1)], 2);
        assert!(matches!(empty, Err(Error::InvalidData(_))));
    }

    #[test]
    fn normalization() {
        let split = tiny_split();
        assert_eq!(normalize_features(split.clone(), 0.0, 1.0).unwrap(), split);

        let flat = DatasetSplit::new(
            vec![sample(0, "A", vec![0.3, 0.3], 0)],
            vec![sample(1, "B", vec![0.3, 0.3], 1)],
            2,
        )
        .unwrap();
        let z = normalize_features(flat, 0.3, 2.0).unwrap();
        assert!(z
            .pool()
            .iter()
            .chain(z.test())
            .all(|s| s.features.iter().all(|&x| x == 0.0)));

        let (mu, sigma) = OCT_NORMALIZATION;
        let one = DatasetSplit::new(
            vec![sample(0, "A", vec![0.2773], 0)],
            vec![sample(1, "B", vec![0.2773], 1)],
            2,
        )
        .unwrap();
        let n = normalize_features(one, mu, sigma).unwrap();
        assert!((n.pool()[0].features[0] - 1.0).abs() < 1e-12);
        assert!((n.test()[0].features[0] - 1.0).abs() < 1e-12);

        assert!(matches!(
            normalize_features(split.clone(), 0.0, 0.0),
            Err(Error::Config(_))
        ));
        assert!(normalize_features(split, 0.0, -1.0).is_err());
    }

    #[test]
    fn labeled_set_rejects_repeats() {
        let split = tiny_split();
        let mut set = LabeledSet::new();
        set.reveal_and_push(&split, SampleId(0)).unwrap();
        set.reveal_and_push(&split, SampleId(2)).unwrap();
        assert!(set.reveal_and_push(&split, SampleId(0)).is_err());
        assert!(set.reveal_and_push(&split, SampleId(3)).is_err());
        assert_eq!(set.members(), &[(SampleId(0), ClassLabel(0)), (SampleId(2), ClassLabel(1))]);
    }
}
