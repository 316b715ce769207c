//! Fusion instances: sources, objects, their observations and source features.

use std::collections::{BTreeMap, HashMap};

use crate::error::{FusionError, Result};

/// A single claim made by a source about an object, with the value stored as
/// an index into the object's domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Claim {
    pub source: usize,
    pub value: usize,
}

/// Immutable bundle of sources, objects, observations, per-object candidate
/// domains and the source feature matrix.
///
/// Domains hold the distinct observed values of each object in order of first
/// appearance; there is no wildcard candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInstance {
    sources: Vec<String>,
    objects: Vec<String>,
    domains: Vec<Vec<String>>,
    claims: Vec<Vec<Claim>>,
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    // (object, value) per source, derived from `claims`
    by_source: Vec<Vec<(usize, usize)>>,
}

impl FusionInstance {
    pub fn builder(feature_names: Vec<String>) -> InstanceBuilder {
        InstanceBuilder::new(feature_names)
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_observations(&self) -> usize {
        self.claims.iter().map(Vec::len).sum()
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature_row(&self, source: usize) -> &[f64] {
        &self.features[source]
    }

    pub fn domain(&self, object: usize) -> &[String] {
        &self.domains[object]
    }

    /// Observations on `object`, in stored order.
    pub fn claims(&self, object: usize) -> &[Claim] {
        &self.claims[object]
    }

    /// `(object, value index)` pairs observed by `source`, ordered by object.
    pub fn source_claims(&self, source: usize) -> &[(usize, usize)] {
        &self.by_source[source]
    }

    pub fn source_index(&self, id: &str) -> Option<usize> {
        self.sources.iter().position(|s| s == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o == id)
    }

    /// Value index reported by `source` for `object`, if any.
    pub fn claim_of(&self, object: usize, source: usize) -> Option<usize> {
        self.claims[object]
            .iter()
            .find(|c| c.source == source)
            .map(|c| c.value)
    }

    pub fn value_index(&self, object: usize, value: &str) -> Option<usize> {
        self.domains[object].iter().position(|v| v == value)
    }

    /// Keep only the observations accepted by `keep`; objects left without
    /// observations are dropped. Sources and features are retained.
    pub fn filter_claims(&self, mut keep: impl FnMut(usize, Claim) -> bool) -> Result<Self> {
        let mut b = InstanceBuilder::new(self.feature_names.clone());
        for (s, name) in self.sources.iter().enumerate() {
            b.add_source(name, self.features[s].clone())?;
        }
        for (o, claims) in self.claims.iter().enumerate() {
            for &c in claims {
                if keep(o, c) {
                    b.add_observation(
                        &self.objects[o],
                        &self.sources[c.source],
                        &self.domains[o][c.value],
                    )?;
                }
            }
        }
        b.build()
    }

    /// Copy of the instance with a different feature matrix.
    pub fn with_features(&self, names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_features(&names, &rows, self.sources.len())?;
        Ok(Self {
            feature_names: names,
            features: rows,
            ..self.clone()
        })
    }
}

fn validate_features(names: &[String], rows: &[Vec<f64>], n_sources: usize) -> Result<()> {
    if rows.len() != n_sources {
        return Err(FusionError::InvalidInput(format!(
            "feature matrix has {} rows for {} sources",
            rows.len(),
            n_sources
        )));
    }
    for row in rows {
        if row.len() != names.len() {
            return Err(FusionError::InvalidInput(format!(
                "feature row has {} entries, expected {}",
                row.len(),
                names.len()
            )));
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return Err(FusionError::NonFinite(format!("feature value {x}")));
        }
    }
    Ok(())
}

/// Incremental, name-keyed construction of a [`FusionInstance`].
///
/// Sources are indexed in order of registration: explicitly added sources
/// first, then sources first seen in an observation (with an all-zero feature
/// row). Objects are indexed by first observation.
#[derive(Debug, Clone)]
pub struct InstanceBuilder {
    feature_names: Vec<String>,
    sources: Vec<String>,
    source_ids: HashMap<String, usize>,
    features: Vec<Vec<f64>>,
    objects: Vec<String>,
    object_ids: HashMap<String, usize>,
    domains: Vec<Vec<String>>,
    claims: Vec<Vec<Claim>>,
}

impl InstanceBuilder {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self {
            feature_names,
            sources: Vec::new(),
            source_ids: HashMap::new(),
            features: Vec::new(),
            objects: Vec::new(),
            object_ids: HashMap::new(),
            domains: Vec::new(),
            claims: Vec::new(),
        }
    }

    /// Register a source with its feature row.
    pub fn add_source(&mut self, id: &str, features: Vec<f64>) -> Result<usize> {
        if self.source_ids.contains_key(id) {
            return Err(FusionError::InvalidInput(format!("duplicate source `{id}`")));
        }
        if features.len() != self.feature_names.len() {
            return Err(FusionError::InvalidInput(format!(
                "source `{id}` has {} feature values, expected {}",
                features.len(),
                self.feature_names.len()
            )));
        }
        if let Some(x) = features.iter().find(|x| !x.is_finite()) {
            return Err(FusionError::NonFinite(format!("feature value {x} for source `{id}`")));
        }
        let idx = self.sources.len();
        self.sources.push(id.to_string());
        self.source_ids.insert(id.to_string(), idx);
        self.features.push(features);
        Ok(idx)
    }

    fn source_or_insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.source_ids.get(id) {
            return i;
        }
        let idx = self.sources.len();
        self.sources.push(id.to_string());
        self.source_ids.insert(id.to_string(), idx);
        self.features.push(vec![0.0; self.feature_names.len()]);
        idx
    }

    pub fn add_observation(&mut self, object: &str, source: &str, value: &str) -> Result<()> {
        let s = self.source_or_insert(source);
        let o = match self.object_ids.get(object) {
            Some(&o) => o,
            None => {
                let o = self.objects.len();
                self.objects.push(object.to_string());
                self.object_ids.insert(object.to_string(), o);
                self.domains.push(Vec::new());
                self.claims.push(Vec::new());
                o
            }
        };
        if self.claims[o].iter().any(|c| c.source == s) {
            return Err(FusionError::DuplicateObservation {
                object: object.to_string(),
                source_id: source.to_string(),
            });
        }
        let domain = &mut self.domains[o];
        let v = match domain.iter().position(|d| d == value) {
            Some(v) => v,
            None => {
                domain.push(value.to_string());
                domain.len() - 1
            }
        };
        self.claims[o].push(Claim { source: s, value: v });
        Ok(())
    }

    pub fn build(self) -> Result<FusionInstance> {
        if let Some(o) = self.claims.iter().position(Vec::is_empty) {
            return Err(FusionError::EmptyObject(self.objects[o].clone()));
        }
        validate_features(&self.feature_names, &self.features, self.sources.len())?;
        let mut by_source = vec![Vec::new(); self.sources.len()];
        for (o, claims) in self.claims.iter().enumerate() {
            for c in claims {
                by_source[c.source].push((o, c.value));
            }
        }
        Ok(FusionInstance {
            sources: self.sources,
            objects: self.objects,
            domains: self.domains,
            claims: self.claims,
            feature_names: self.feature_names,
            features: self.features,
            by_source,
        })
    }
}

/// Known true values for a subset of objects, stored as domain indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    labels: BTreeMap<usize, usize>,
}

impl GroundTruth {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build from `(object index, value)` pairs. Every value must be one some
    /// source reported for that object.
    pub fn new<'a>(
        instance: &FusionInstance,
        labels: impl IntoIterator<Item = (usize, &'a str)>,
    ) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (o, value) in labels {
            if o >= instance.n_objects() {
                return Err(FusionError::UnknownObject(format!("#{o}")));
            }
            let v = instance
                .value_index(o, value)
                .ok_or_else(|| FusionError::LabelOutsideDomain {
                    object: instance.objects()[o].clone(),
                    value: value.to_string(),
                })?;
            out.insert(o, v);
        }
        Ok(Self { labels: out })
    }

    /// Build directly from domain indices.
    pub fn from_indices(
        instance: &FusionInstance,
        labels: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (o, v) in labels {
            if o >= instance.n_objects() || v >= instance.domain(o).len() {
                return Err(FusionError::InvalidInput(format!("label ({o}, {v}) out of range")));
            }
            out.insert(o, v);
        }
        Ok(Self { labels: out })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, object: usize) -> Option<usize> {
        self.labels.get(&object).copied()
    }

    pub fn contains(&self, object: usize) -> bool {
        self.labels.contains_key(&object)
    }

    /// `(object, value index)` in object order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels.iter().map(|(&o, &v)| (o, v))
    }

    /// Restrict to the given objects.
    pub fn restrict(&self, objects: &[usize]) -> Self {
        let labels = objects
            .iter()
            .filter_map(|&o| self.labels.get(&o).map(|&v| (o, v)))
            .collect();
        Self { labels }
    }

    /// Remap labels onto another instance that shares object and value names.
    pub fn transfer(&self, from: &FusionInstance, to: &FusionInstance) -> Self {
        let labels = self
            .iter()
            .filter_map(|(o, v)| {
                let o2 = to.object_index(&from.objects()[o])?;
                let v2 = to.value_index(o2, &from.domain(o)[v])?;
                Some((o2, v2))
            })
            .collect();
        Self { labels }
    }
}
