//! Checkpoint container.
//!
//! Layout:
//!
//! ```text
//! magic   8 bytes  "GRUCKPT1"
//! hlen    u64 LE   length of the JSON header
//! header  hlen bytes of UTF-8 JSON (config echo, sizes, epoch, accuracy,
//!         and the tensor manifest)
//! data    every tensor of the manifest, in order, row-major f64 LE
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::{GruParams, TensorSpec};
use super::train::Checkpoint;
use super::GruConfig;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GRUCKPT1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub task: Task,
    pub config: GruConfig,
    pub vocab_size: usize,
    pub n_classes: usize,
    pub epoch: usize,
    pub dev_accuracy: f64,
    pub tensors: Vec<TensorSpec>,
}

impl CheckpointHeader {
    pub fn new<T: Scalar>(task: Task, config: &GruConfig, checkpoint: &Checkpoint<T>) -> Self {
        CheckpointHeader {
            task,
            config: config.clone(),
            vocab_size: checkpoint.params.vocab_size(),
            n_classes: checkpoint.params.n_classes(),
            epoch: checkpoint.epoch,
            dev_accuracy: checkpoint.dev_accuracy,
            tensors: checkpoint.params.manifest(),
        }
    }
}

pub fn write_checkpoint_to<T: Scalar, W: Write>(
    task: Task,
    config: &GruConfig,
    checkpoint: &Checkpoint<T>,
    mut writer: W,
) -> Result<()> {
    let header = CheckpointHeader::new(task, config, checkpoint);
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    writer.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    writer
        .write_all(&(json.len() as u64).to_le_bytes())
        .map_err(io)?;
    writer.write_all(&json).map_err(io)?;
    for (_, tensor) in checkpoint.params.tensors() {
        for x in tensor {
            writer.write_all(&x.as_f64().to_le_bytes()).map_err(io)?;
        }
    }
    writer.flush().map_err(io)
}

pub fn write_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    task: Task,
    config: &GruConfig,
    checkpoint: &Checkpoint<T>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint_to(task, config, checkpoint, BufWriter::new(file))
}

pub fn read_checkpoint_from<T: Scalar, R: Read>(
    mut reader: R,
) -> Result<(CheckpointHeader, Checkpoint<T>)> {
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let mut len = [0u8; 8];
    reader.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    reader.read_exact(&mut json).map_err(io)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let mut data = Vec::with_capacity(header.tensors.len());
    let mut buf = [0u8; 8];
    for spec in &header.tensors {
        let mut tensor = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            reader.read_exact(&mut buf).map_err(io)?;
            tensor.push(T::lit(f64::from_le_bytes(buf)));
        }
        data.push(tensor);
    }
    if reader.read(&mut buf).map_err(io)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after tensor data".into()));
    }
    let params = GruParams::from_tensors(&header.tensors, data)?;
    if params.vocab_size() != header.vocab_size || params.n_classes() != header.n_classes {
        return Err(Error::Checkpoint(
            "header sizes disagree with the tensor manifest".into(),
        ));
    }
    let checkpoint = Checkpoint {
        epoch: header.epoch,
        params,
        dev_accuracy: header.dev_accuracy,
    };
    Ok((header, checkpoint))
}

pub fn read_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(CheckpointHeader, Checkpoint<T>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint_from(BufReader::new(file))
}
