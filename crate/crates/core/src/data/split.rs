use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::manifest::{DatasetManifest, ManifestEntry, Split};

/// What must not be shared between the train and test splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disjointness {
    ByTransmitter,
    ByScene,
    Random,
}

impl Disjointness {
    fn key(self, e: &ManifestEntry) -> String {
        match self {
            Disjointness::ByTransmitter => e.transmitter.clone(),
            Disjointness::ByScene => e.scene.clone(),
            Disjointness::Random => e.path.to_string_lossy().into_owned(),
        }
    }
}

/// Assigns `test_count` entries to test and `train_count` to train, leaving
/// the rest unassigned.
///
/// Entries are grouped by the disjointness key and the groups are visited in
/// a seeded random order. The test split is filled first; a group touched by
/// the test split never contributes to train, so a partially used group's
/// remainder stays unassigned.
pub fn split(
    manifest: &DatasetManifest,
    train_count: usize,
    test_count: usize,
    disjointness: Disjointness,
    seed: u64,
) -> Result<DatasetManifest> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        let key = disjointness.key(e);
        let g = *index.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    // Sort so the result does not depend on entry order in the manifest.
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    for (_, members) in &mut groups {
        members.sort_by(|&a, &b| manifest.entries[a].path.cmp(&manifest.entries[b].path));
        members.shuffle(&mut rng);
    }

    let mut tags: Vec<Option<Split>> = vec![None; manifest.entries.len()];
    let mut groups = groups.into_iter().map(|(_, m)| m);
    for (split, want) in [(Split::Test, test_count), (Split::Train, train_count)] {
        let mut need = want;
        while need > 0 {
            let Some(members) = groups.next() else {
                return Err(Error::Data(format!(
                    "cannot place {train_count} train and {test_count} test maps out of {} \
                     under {disjointness:?} disjointness",
                    manifest.entries.len()
                )));
            };
            for &i in members.iter().take(need) {
                tags[i] = Some(split);
            }
            need -= need.min(members.len());
        }
    }

    let mut out = manifest.clone();
    for (e, tag) in out.entries.iter_mut().zip(tags) {
        e.split = tag;
    }
    Ok(out)
}
