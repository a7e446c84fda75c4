//! Checkpoint directory format: `metadata.toml` (human-readable),
//! `params.bin` (little-endian f64 array with a magic header), `vocab.txt`
//! (one word per id line).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::encoder::model::{ModelDims, Params};
use crate::encoder::train::{Encoder, FitState, TrainConfig, TrainReport};
use crate::encoder::vocab::Vocab;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RNLI";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    dims: ModelDims,
    report: TrainReport,
    config: TrainConfig,
}

/// Persist a fitted encoder into `dir` (created if missing).
pub fn save(encoder: &Encoder, dir: &Path) -> Result<()> {
    let state = encoder.state()?;
    fs::create_dir_all(dir)?;

    let meta = Metadata {
        format_version: FORMAT_VERSION,
        dims: state.params.dims,
        report: state.report.clone(),
        config: encoder.config().clone(),
    };
    let toml_text = toml::to_string_pretty(&meta)
        .map_err(|e| Error::Data(format!("cannot serialize checkpoint metadata: {e}")))?;
    fs::write(dir.join("metadata.toml"), toml_text)?;

    let flat = state.params.flatten();
    let mut bin = Vec::with_capacity(16 + flat.len() * 8);
    bin.write_all(MAGIC)?;
    bin.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    bin.write_u64::<LittleEndian>(flat.len() as u64)?;
    for v in &flat {
        bin.write_f64::<LittleEndian>(*v)?;
    }
    fs::write(dir.join("params.bin"), bin)?;

    fs::write(dir.join("vocab.txt"), state.vocab.words().join("\n"))?;
    Ok(())
}

/// Load a checkpoint directory back into a ready-to-predict encoder.
pub fn load(dir: &Path) -> Result<Encoder> {
    let meta_path = dir.join("metadata.toml");
    if !meta_path.exists() {
        return Err(Error::Config(format!(
            "{} is not a checkpoint directory (no metadata.toml)",
            dir.display()
        )));
    }
    let meta: Metadata = toml::from_str(&fs::read_to_string(&meta_path)?)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "unsupported checkpoint format version {}",
            meta.format_version
        )));
    }

    let words: Vec<String> = fs::read_to_string(dir.join("vocab.txt"))?
        .lines()
        .map(str::to_string)
        .collect();
    let vocab = Vocab::from_words(words);
    if vocab.len() != meta.dims.vocab {
        return Err(Error::Data(format!(
            "vocab.txt has {} ids but metadata declares {}",
            vocab.len(),
            meta.dims.vocab
        )));
    }

    let mut file = fs::File::open(dir.join("params.bin"))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data("params.bin has a bad magic header".into()));
    }
    let version = file.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "unsupported params.bin version {version}"
        )));
    }
    let count = file.read_u64::<LittleEndian>()? as usize;
    let mut flat = vec![0.0f64; count];
    for v in flat.iter_mut() {
        *v = file.read_f64::<LittleEndian>()?;
    }

    let mut params = Params::zeros_like(&Params::init(
        meta.dims,
        &mut crate::rng::seeded("checkpoint-shape", 0, b""),
    )?);
    params.assign_from_flat(&flat)?;

    Ok(Encoder::restore(
        meta.config,
        FitState {
            params,
            vocab,
            report: meta.report,
        },
    ))
}
