//! CSV file formats.
//!
//! * `observations.csv`: `object_id,source_id,value`
//! * `features.csv`: `source_id,<feature_1>,...,<feature_K>` (optional)
//! * `truth.csv`: `object_id,value` (optional)
//!
//! All fields are trimmed at ingestion; values are otherwise compared as exact
//! strings. Errors name the file, the line and the violated rule.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use crate::error::{FusionError, Result};
use crate::instance::{FusionInstance, GroundTruth, InstanceBuilder};
use crate::simulation::SimOutput;

#[derive(Debug, Clone, Default)]
pub struct InputPaths {
    pub observations: PathBuf,
    pub features: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> FusionError {
    FusionError::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| FusionError::Io(format!("{}: {e}", path.display())))?;
    Ok(ReaderBuilder::new().trim(Trim::All).from_reader(file))
}

fn expect_header(path: &Path, reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<StringRecord> {
    let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let ok = header.len() >= expected.len()
        && expected.iter().zip(header.iter()).all(|(e, h)| *e == h);
    if !ok {
        return Err(parse_err(
            path,
            1,
            format!("header must start with `{}`", expected.join(",")),
        ));
    }
    Ok(header)
}

/// Rows of a features file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub sources: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Read a features file on its own; duplicate source ids are rejected.
pub fn load_features(path: &Path) -> Result<FeatureTable> {
    let mut reader = open(path)?;
    let header = expect_header(path, &mut reader, &["source_id"])?;
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut table = FeatureTable { names, sources: Vec::new(), rows: Vec::new() };
    let mut seen = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = line_of(&rec);
        let k = table.names.len();
        if rec.len() != k + 1 {
            return Err(parse_err(path, line, format!("expected {} columns", k + 1)));
        }
        let mut row = Vec::with_capacity(k);
        for (j, field) in rec.iter().skip(1).enumerate() {
            let x: f64 = field.parse().map_err(|_| {
                parse_err(path, line, format!("feature `{}` value `{field}` is not numeric", table.names[j]))
            })?;
            if !x.is_finite() {
                return Err(parse_err(path, line, format!("feature `{}` is not finite", table.names[j])));
            }
            row.push(x);
        }
        if !seen.insert(rec[0].to_string()) {
            return Err(parse_err(path, line, format!("duplicate source `{}`", &rec[0])));
        }
        table.sources.push(rec[0].to_string());
        table.rows.push(row);
    }
    Ok(table)
}

fn read_features(path: &Path) -> Result<InstanceBuilder> {
    let table = load_features(path)?;
    let mut builder = InstanceBuilder::new(table.names);
    for (id, row) in table.sources.iter().zip(table.rows) {
        builder.add_source(id, row)?;
    }
    Ok(builder)
}

fn read_observations(path: &Path, builder: &mut InstanceBuilder) -> Result<()> {
    let mut reader = open(path)?;
    expect_header(path, &mut reader, &["object_id", "source_id", "value"])?;
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(parse_err(path, line, "expected 3 columns"));
        }
        builder
            .add_observation(&rec[0], &rec[1], &rec[2])
            .map_err(|e| parse_err(path, line, e.to_string()))?;
    }
    Ok(())
}

fn read_truth(path: &Path, instance: &FusionInstance) -> Result<GroundTruth> {
    let mut reader = open(path)?;
    expect_header(path, &mut reader, &["object_id", "value"])?;
    let mut labels: Vec<(usize, String)> = Vec::new();
    let mut seen = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = line_of(&rec);
        if rec.len() != 2 {
            return Err(parse_err(path, line, "expected 2 columns"));
        }
        let o = instance
            .object_index(&rec[0])
            .ok_or_else(|| parse_err(path, line, format!("object `{}` has no observations", &rec[0])))?;
        if !seen.insert(o) {
            return Err(parse_err(path, line, format!("duplicate label for object `{}`", &rec[0])));
        }
        if instance.value_index(o, &rec[1]).is_none() {
            return Err(parse_err(
                path,
                line,
                format!("label `{}` for object `{}` was not reported by any source", &rec[1], &rec[0]),
            ));
        }
        labels.push((o, rec[1].to_string()));
    }
    GroundTruth::new(instance, labels.iter().map(|(o, v)| (*o, v.as_str())))
}

/// Load and validate an instance and, when given, its ground truth.
pub fn load_instance(paths: &InputPaths) -> Result<(FusionInstance, Option<GroundTruth>)> {
    let mut builder = match &paths.features {
        Some(p) => read_features(p)?,
        None => InstanceBuilder::new(Vec::new()),
    };
    read_observations(&paths.observations, &mut builder)?;
    let instance = builder
        .build()
        .map_err(|e| parse_err(&paths.observations, 0, e.to_string()))?;
    let truth = paths
        .truth
        .as_deref()
        .map(|p| read_truth(p, &instance))
        .transpose()?;
    Ok((instance, truth))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| FusionError::Io(format!("{}: {e}", path.display())))?;
    Ok(WriterBuilder::new().from_writer(file))
}

pub fn write_observations(path: &Path, instance: &FusionInstance) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["object_id", "source_id", "value"])?;
    for o in 0..instance.n_objects() {
        for c in instance.claims(o) {
            w.write_record([
                instance.objects()[o].as_str(),
                instance.sources()[c.source].as_str(),
                instance.domain(o)[c.value].as_str(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_features(path: &Path, instance: &FusionInstance) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["source_id".to_string()];
    header.extend(instance.feature_names().iter().cloned());
    w.write_record(&header)?;
    for (s, name) in instance.sources().iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(instance.feature_row(s).iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_truth(path: &Path, instance: &FusionInstance, truth: &GroundTruth) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["object_id", "value"])?;
    for (o, v) in truth.iter() {
        w.write_record([instance.objects()[o].as_str(), instance.domain(o)[v].as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Write a generated instance as `observations.csv`, `features.csv`,
/// `truth.csv` and `sources.csv` (true accuracies) under `dir`.
pub fn write_simulation(dir: &Path, sim: &SimOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let inst = &sim.instance;
    write_observations(&dir.join("observations.csv"), inst)?;
    write_features(&dir.join("features.csv"), inst)?;
    write_truth(&dir.join("truth.csv"), inst, &sim.truth)?;
    let mut w = writer(&dir.join("sources.csv"))?;
    w.write_record(["source_id", "true_accuracy"])?;
    for (s, a) in sim.true_accuracies.iter().enumerate() {
        w.write_record([inst.sources()[s].clone(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Paths of a directory written by [`write_simulation`].
pub fn simulation_paths(dir: &Path) -> InputPaths {
    InputPaths {
        observations: dir.join("observations.csv"),
        features: Some(dir.join("features.csv")),
        truth: Some(dir.join("truth.csv")),
    }
}
