//! The run manifest: row counts per stage, written as `stage\tmetric\tvalue`.
//!
//! Each stage replaces its own section and leaves the others untouched, so
//! stages can be re-run individually while the manifest stays consistent.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::formats::{create_writer, for_each_record_line, MANIFEST_HEADER};

#[derive(Debug, Default, Clone)]
pub struct Manifest {
    entries: BTreeMap<(String, String), u64>,
}

impl Manifest {
    pub fn load_or_default(path: &Path) -> Result<Manifest> {
        let mut manifest = Manifest::default();
        if !path.exists() {
            return Ok(manifest);
        }
        for_each_record_line(path, MANIFEST_HEADER, |line_no, line| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                bail!("manifest line {line_no}: expected 3 fields");
            }
            let value: u64 = fields[2]
                .parse()
                .with_context(|| format!("manifest line {line_no}: bad value"))?;
            manifest
                .entries
                .insert((fields[0].to_string(), fields[1].to_string()), value);
            Ok(())
        })?;
        Ok(manifest)
    }

    /// Drop every entry of `stage` before the stage rewrites its section.
    pub fn clear_stage(&mut self, stage: &str) {
        self.entries.retain(|(s, _), _| s != stage);
    }

    pub fn set(&mut self, stage: &str, metric: &str, value: u64) {
        self.entries
            .insert((stage.to_string(), metric.to_string()), value);
    }

    pub fn get(&self, stage: &str, metric: &str) -> Option<u64> {
        self.entries
            .get(&(stage.to_string(), metric.to_string()))
            .copied()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = create_writer(path)?;
        writeln!(out, "{MANIFEST_HEADER}")?;
        for ((stage, metric), value) in &self.entries {
            writeln!(out, "{stage}\t{metric}\t{value}")?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_sections_are_replaced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.tsv");
        let mut m = Manifest::default();
        m.set("ingest", "rows_in", 10);
        m.set("sentiment", "slots", 4);
        m.write(&path).unwrap();

        let mut reloaded = Manifest::load_or_default(&path).unwrap();
        reloaded.clear_stage("ingest");
        reloaded.set("ingest", "rows_in", 12);
        reloaded.write(&path).unwrap();

        let last = Manifest::load_or_default(&path).unwrap();
        assert_eq!(last.get("ingest", "rows_in"), Some(12));
        assert_eq!(last.get("sentiment", "slots"), Some(4));
    }
}
