//! Bank persistence: line-delimited UTF-8, one header record then one record
//! per entry, with a content checksum so truncation and tampering surface as
//! `CorruptBank` instead of silent drift.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use std::path::Path;

use super::bank::{MemoryBank, MemoryEntry};
use super::MemoryError;

const BANK_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BankHeader {
    version: u32,
    next_id: u64,
    event_clock: u64,
    entries: usize,
    checksum: String,
}

fn entry_lines(bank: &MemoryBank) -> Result<Vec<String>, MemoryError> {
    bank.iter()
        .map(|e| serde_json::to_string(e).map_err(|e| MemoryError::CorruptBank(e.to_string())))
        .collect()
}

fn checksum(lines: &[String]) -> String {
    let mut hasher = Sha256::new();
    for line in lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    format!("{:x}", hasher.finalize())
}

/// Writes a bank. `load_bank(save_bank(b))` is observationally identical to
/// `b`: same ids, texts, histories, order, `next_id`, `event_clock`.
pub fn save_bank<W: Write>(bank: &MemoryBank, dest: &mut W) -> Result<(), MemoryError> {
    let lines = entry_lines(bank)?;
    let header = BankHeader {
        version: BANK_FORMAT_VERSION,
        next_id: bank.next_id(),
        event_clock: bank.event_clock(),
        entries: lines.len(),
        checksum: checksum(&lines),
    };
    writeln!(
        dest,
        "{}",
        serde_json::to_string(&header).map_err(|e| MemoryError::CorruptBank(e.to_string()))?
    )?;
    for line in lines {
        writeln!(dest, "{line}")?;
    }
    Ok(())
}

/// Reads a bank back, verifying version, entry count, and checksum.
pub fn load_bank<R: BufRead>(src: &mut R) -> Result<MemoryBank, MemoryError> {
    let mut lines = src.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| MemoryError::CorruptBank("empty bank file".into()))??;
    let header: BankHeader = serde_json::from_str(&header_line)
        .map_err(|e| MemoryError::CorruptBank(format!("bad header: {e}")))?;
    if header.version != BANK_FORMAT_VERSION {
        return Err(MemoryError::CorruptBank(format!(
            "unsupported bank version {}",
            header.version
        )));
    }

    let mut entry_texts = Vec::with_capacity(header.entries);
    for line in lines {
        entry_texts.push(line?);
    }
    if entry_texts.len() != header.entries {
        return Err(MemoryError::CorruptBank(format!(
            "expected {} entries, found {}",
            header.entries,
            entry_texts.len()
        )));
    }
    if checksum(&entry_texts) != header.checksum {
        return Err(MemoryError::CorruptBank("checksum mismatch".into()));
    }

    let entries: Vec<MemoryEntry> = entry_texts
        .iter()
        .map(|line| {
            serde_json::from_str(line).map_err(|e| MemoryError::CorruptBank(format!("bad entry: {e}")))
        })
        .collect::<Result<_, _>>()?;
    MemoryBank::from_parts(entries, header.next_id, header.event_clock)
}

pub fn save_bank_path(bank: &MemoryBank, path: impl AsRef<Path>) -> Result<(), MemoryError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    save_bank(bank, &mut file)
}

pub fn load_bank_path(path: impl AsRef<Path>) -> Result<MemoryBank, MemoryError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    load_bank(&mut file)
}
