//! Append-only block log: one canonical JSON block per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::canonical::block_line;
use super::types::Block;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("block log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("block log line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("block log line {line}: expected height {expected}, found {found}")]
    Gap { line: usize, expected: u64, found: u64 },
    #[error("block log line {line}: parent hash does not match previous block")]
    BrokenLink { line: usize },
    #[error("block log line {line}: block hash does not match contents")]
    BadHash { line: usize },
}

#[derive(Debug)]
pub struct BlockLog {
    path: PathBuf,
    file: File,
}

impl BlockLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(BlockLog { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, block: &Block) -> Result<(), LogError> {
        let mut line = block_line(block);
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }

    pub fn read_all(&self) -> Result<Vec<Block>, LogError> {
        read_blocks(&self.path)
    }
}

/// Reads and link-checks a block log. A missing file is an empty chain.
pub fn read_blocks(path: impl AsRef<Path>) -> Result<Vec<Block>, LogError> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let mut blocks: Vec<Block> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let block: Block = serde_json::from_str(&line).map_err(|source| LogError::Parse { line: lineno, source })?;
        if !block.hash_is_valid() {
            return Err(LogError::BadHash { line: lineno });
        }
        if let Some(prev) = blocks.last() {
            if block.height != prev.height + 1 {
                return Err(LogError::Gap { line: lineno, expected: prev.height + 1, found: block.height });
            }
            if block.parent_hash != prev.block_hash {
                return Err(LogError::BrokenLink { line: lineno });
            }
        }
        blocks.push(block);
    }
    Ok(blocks)
}
