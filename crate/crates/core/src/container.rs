//! Binary model container: magic bytes, format version, a JSON header
//! describing the model and a bincode payload holding the bulk data.
//!
//! Layout: `b"LMSB"`, `u32` version, `u32` header length, header bytes,
//! payload bytes (all integers little-endian).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LMSB";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<H> {
    kind: String,
    header: H,
}

pub fn write<H: Serialize, P: Serialize>(path: &Path, kind: &str, header: &H, payload: &P) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let head = serde_json::to_vec(&Envelope {
        kind: kind.to_string(),
        header,
    })?;
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(head.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&head).map_err(io)?;
    bincode::serialize_into(&mut w, payload).map_err(|e| Error::Container(format!("{}: {e}", path.display())))?;
    w.flush().map_err(io)
}

/// Reads only the JSON header.
pub fn read_header<H: DeserializeOwned>(path: &Path, kind: &str) -> Result<H> {
    let mut r = open(path)?;
    read_envelope(&mut r, path, kind)
}

pub fn read<H: DeserializeOwned, P: DeserializeOwned>(path: &Path, kind: &str) -> Result<(H, P)> {
    let mut r = open(path)?;
    let header = read_envelope(&mut r, path, kind)?;
    let payload =
        bincode::deserialize_from(&mut r).map_err(|e| Error::Container(format!("{}: {e}", path.display())))?;
    Ok((header, payload))
}

/// The model kind recorded in the container at `path`.
pub fn kind(path: &Path) -> Result<String> {
    #[derive(Deserialize)]
    struct Kind {
        kind: String,
    }
    let mut r = open(path)?;
    let head = read_head(&mut r, path)?;
    Ok(serde_json::from_slice::<Kind>(&head)?.kind)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn read_head(r: &mut impl Read, path: &Path) -> Result<Vec<u8>> {
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Container(format!("{}: not a model container", path.display())));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Container(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    r.read_exact(&mut word).map_err(io)?;
    let mut head = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut head).map_err(io)?;
    Ok(head)
}

fn read_envelope<H: DeserializeOwned>(r: &mut impl Read, path: &Path, kind: &str) -> Result<H> {
    let env: Envelope<H> = serde_json::from_slice(&read_head(r, path)?)?;
    if env.kind != kind {
        return Err(Error::Container(format!(
            "{}: expected a {kind} model, found {}",
            path.display(),
            env.kind
        )));
    }
    Ok(env.header)
}
