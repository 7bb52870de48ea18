//! Patient-identity plug-ins for any acquisition strategy.
//!
//! [`constrain_unique_patients`] turns an informativeness ranking into a batch
//! in which no two samples share a patient. [`select_badge_unique_patients`]
//! enforces the same rule inside BADGE's sequential seeding.
//! [`decal_initialize`] builds the first labeled set from distinct patients.
//!
//! Uniqueness is per batch. When the candidates run out of distinct patients
//! the batch is still filled to size and the number of relaxed slots is
//! reported in [`QueryBatch::relaxed_count`].

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use crate::acquisition::{kmeanspp_seed, sorted_by_id, Ranking};
use crate::dataset::{patient_distribution, PatientId, PatientLookup, Sample, SampleId};
use crate::learner::GradientEmbedding;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryBatch {
    pub members: Vec<SampleId>,
    /// Slots filled after distinct patients ran out.
    pub relaxed_count: usize,
}

impl QueryBatch {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn lookup<P: PatientLookup + ?Sized>(patients: &P, id: SampleId) -> Result<&PatientId> {
    patients
        .patient_of(id)
        .ok_or_else(|| Error::usage(format!("no patient recorded for sample {id}")))
}

/// Walks `ranking` in order and keeps a sample only if its patient is not in
/// the batch yet. Skipped samples backfill, best-ranked first, when the
/// ranking is exhausted before `k` distinct patients are found.
pub fn constrain_unique_patients<P: PatientLookup + ?Sized>(
    ranking: &Ranking,
    patients: &P,
    k: usize,
) -> Result<QueryBatch> {
    if k == 0 {
        return Err(Error::usage("batch size must be at least 1"));
    }
    if k > ranking.len() {
        return Err(Error::usage(format!(
            "cannot fill a batch of {k} from a ranking of {}",
            ranking.len()
        )));
    }
    let mut seen_ids = HashSet::with_capacity(ranking.len());
    let mut seen_patients: HashSet<&PatientId> = HashSet::with_capacity(k);
    let mut members = Vec::with_capacity(k);
    let mut skipped = Vec::new();
    for &id in ranking.ids() {
        if !seen_ids.insert(id) {
            return Err(Error::usage(format!("ranking lists sample {id} twice")));
        }
        let patient = lookup(patients, id)?;
        if members.len() < k && seen_patients.insert(patient) {
            members.push(id);
        } else if members.len() < k {
            skipped.push(id);
        }
    }
    let relaxed_count = k - members.len();
    members.extend(skipped.into_iter().take(relaxed_count));
    Ok(QueryBatch {
        members,
        relaxed_count,
    })
}

/// BADGE seeding in which candidates whose patient is already in the batch
/// carry no sampling mass.
pub fn select_badge_unique_patients<P: PatientLookup + ?Sized>(
    embeddings: &[(SampleId, GradientEmbedding)],
    patients: &P,
    k: usize,
    seed: u64,
) -> Result<QueryBatch> {
    if k > embeddings.len() {
        return Err(Error::usage(format!(
            "cannot select {k} of {} embeddings",
            embeddings.len()
        )));
    }
    let sorted = sorted_by_id(embeddings);
    let patient_of: Vec<&PatientId> = sorted
        .iter()
        .map(|(id, _)| lookup(patients, *id))
        .collect::<Result<_>>()?;
    let points: Vec<&[f64]> = sorted.iter().map(|(_, g)| g.0.as_slice()).collect();

    // Patients already in the batch. Maintained incrementally from the picks
    // the seeding loop reports back through `picked`.
    let mut in_batch: HashSet<&PatientId> = HashSet::new();
    let mut synced = 0;
    let picks = kmeanspp_seed(&points, k, seed, |i, picked| {
        while synced < picked.len() {
            in_batch.insert(patient_of[picked[synced]]);
            synced += 1;
        }
        !in_batch.contains(patient_of[i])
    });
    let relaxed_count = picks.iter().filter(|p| p.relaxed).count();
    Ok(QueryBatch {
        members: picks.into_iter().map(|p| sorted[p.index].0).collect(),
        relaxed_count,
    })
}

/// One sample from each of `n` distinct patients drawn uniformly. If the pool
/// has fewer than `n` patients the rest are uniform draws from the remaining
/// samples, counted in `relaxed_count`.
pub fn decal_initialize(pool: &[Sample], n: usize, seed: u64) -> Result<QueryBatch> {
    if n == 0 {
        return Err(Error::usage("initial set size must be at least 1"));
    }
    if n > pool.len() {
        return Err(Error::usage(format!(
            "cannot draw {n} initial samples from a pool of {}",
            pool.len()
        )));
    }
    let distribution = patient_distribution(pool);
    log::debug!(
        "pool has {} patients; largest patient holds {} samples",
        distribution.len(),
        distribution.values().max().copied().unwrap_or(0)
    );

    let mut by_patient: Vec<(&PatientId, Vec<usize>)> = distribution
        .keys()
        .map(|p| (p, Vec::with_capacity(distribution[p])))
        .collect();
    {
        let slot: std::collections::HashMap<&PatientId, usize> =
            by_patient.iter().enumerate().map(|(i, (p, _))| (*p, i)).collect();
        for (i, s) in pool.iter().enumerate() {
            by_patient[slot[&s.patient]].1.push(i);
        }
    }

    let mut rng = seed::rng(seed);
    let unique = n.min(by_patient.len());
    let chosen_patients = index::sample(&mut rng, by_patient.len(), unique);
    let mut taken = vec![false; pool.len()];
    let mut members = Vec::with_capacity(n);
    for p in chosen_patients {
        let samples = &by_patient[p].1;
        let i = samples[rng.random_range(0..samples.len())];
        taken[i] = true;
        members.push(pool[i].id);
    }

    let relaxed_count = n - unique;
    if relaxed_count > 0 {
        let rest: Vec<usize> = (0..pool.len()).filter(|&i| !taken[i]).collect();
        for j in index::sample(&mut rng, rest.len(), relaxed_count) {
            members.push(pool[rest[j]].id);
        }
    }
    Ok(QueryBatch {
        members,
        relaxed_count,
    })
}

/// Uniform sample of `n` pool ids, patients ignored.
pub fn random_initialize(pool: &[Sample], n: usize, seed: u64) -> Result<QueryBatch> {
    if n > pool.len() {
        return Err(Error::usage(format!(
            "cannot draw {n} initial samples from a pool of {}",
            pool.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let members = index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].id)
        .collect();
    Ok(QueryBatch {
        members,
        relaxed_count: 0,
    })
}
