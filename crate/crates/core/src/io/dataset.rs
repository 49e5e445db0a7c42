//! Dataset directories: `inputs.dstp`, `labels.dstp` and a `manifest.txt`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::config::DataConfig;
use crate::io::synth::Dataset;
use crate::io::tensor::{write_atomic, TensorFile};

pub const INPUTS: &str = "inputs.dstp";
pub const LABELS: &str = "labels.dstp";
pub const MANIFEST: &str = "manifest.txt";

pub fn save_dataset(dir: &Path, data: &Dataset, origin: Option<&DataConfig>) -> Result<()> {
    fs::create_dir_all(dir)?;
    TensorFile::from_tensor(&data.inputs)?.write(&dir.join(INPUTS))?;
    TensorFile::from_labels(&data.labels)?.write(&dir.join(LABELS))?;
    let shape: Vec<String> = data.inputs.dims().iter().map(|d| d.to_string()).collect();
    let mut manifest = format!(
        "classes = {}\nsamples = {}\nshape = {}\n",
        data.classes,
        data.len(),
        shape.join("x")
    );
    if let Some(cfg) = origin {
        let exp = crate::io::config::Experiment {
            data: *cfg,
            ..Default::default()
        };
        for (k, v) in exp
            .entries()
            .into_iter()
            .filter(|(k, _)| k.starts_with("data."))
        {
            manifest.push_str(&format!("{k} = {v}\n"));
        }
    }
    write_atomic(&dir.join(MANIFEST), manifest.as_bytes())
}

/// Loads a dataset directory. The class count comes from the manifest when
/// present, else from the largest label.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let inputs = TensorFile::read(&dir.join(INPUTS))?.to_tensor()?;
    let labels = TensorFile::read(&dir.join(LABELS))?.to_labels()?;
    let manifest = dir.join(MANIFEST);
    let classes = if manifest.exists() {
        fs::read_to_string(&manifest)?
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == "classes")
            .map(|(_, v)| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad class count {:?}", v.trim())))
            })
            .transpose()?
            .ok_or_else(|| Error::Format("manifest lacks a class count".into()))?
    } else {
        labels.iter().max().map_or(0, |m| m + 1)
    };
    Dataset::new(inputs, labels, classes)
}
