use std::collections::BTreeMap;

use crate::error::{FusionError, Result};
use crate::instance::FusionInstance;
use crate::model::SourcePair;

/// Minimum co-observed objects before a pair is modeled.
pub const DEFAULT_MIN_OVERLAP: usize = 5;

/// Source pairs that co-observe at least `min_overlap` objects.
///
/// Each returned pair gets a copying weight once registered on a
/// [`WeightVector`](crate::model::WeightVector). On an object where both
/// sources report the same value, the weight is added to the score of every
/// *other* candidate, so a positive weight discounts the pair's agreement.
pub fn add_copying_features(instance: &FusionInstance, min_overlap: usize) -> Result<Vec<SourcePair>> {
    if min_overlap == 0 {
        return Err(FusionError::InvalidInput("min_overlap must be at least 1".into()));
    }
    let mut overlap: BTreeMap<SourcePair, usize> = BTreeMap::new();
    for o in 0..instance.n_objects() {
        let claims = instance.claims(o);
        for (i, a) in claims.iter().enumerate() {
            for b in &claims[i + 1..] {
                *overlap.entry(SourcePair::new(a.source, b.source)).or_default() += 1;
            }
        }
    }
    Ok(overlap
        .into_iter()
        .filter(|&(_, n)| n >= min_overlap)
        .map(|(p, _)| p)
        .collect())
}
