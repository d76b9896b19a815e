use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::harness::{LogDraft, LogRecord, RecordSink, SinkError};

/// Append-only JSONL decision log. Each record is written and flushed before
/// its id is returned; after the first write failure every append fails.
pub struct JsonlLog {
    path: Option<PathBuf>,
    out: Box<dyn Write + Send>,
    last_id: u64,
    failed: bool,
}

impl std::fmt::Debug for JsonlLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonlLog")
            .field("path", &self.path)
            .field("last_id", &self.last_id)
            .field("failed", &self.failed)
            .finish()
    }
}

impl JsonlLog {
    /// Opens `path` for appending, continuing ids after the last readable
    /// record. Returns the records already on disk.
    pub fn open(path: &Path) -> std::io::Result<(Self, Vec<LogRecord>)> {
        let existing = match File::open(path) {
            Ok(f) => read_existing(f)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // A torn final line from a crash would otherwise glue onto the next record.
        if std::fs::metadata(path)?.len() > 0 && !ends_with_newline(path)? {
            file.write_all(b"\n")?;
        }
        let last_id = existing.iter().map(|r| r.id).max().unwrap_or(0);
        Ok((
            Self {
                path: Some(path.to_path_buf()),
                out: Box::new(file),
                last_id,
                failed: false,
            },
            existing,
        ))
    }

    /// Log over any writer; ids start after `last_id`.
    pub fn with_writer(out: Box<dyn Write + Send>, last_id: u64) -> Self {
        Self {
            path: None,
            out,
            last_id,
            failed: false,
        }
    }

    pub fn last_id(&self) -> u64 {
        self.last_id
    }

    pub fn failed(&self) -> bool {
        self.failed
    }
}

fn ends_with_newline(path: &Path) -> std::io::Result<bool> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = File::open(path)?;
    f.seek(SeekFrom::End(-1))?;
    let mut b = [0u8; 1];
    f.read_exact(&mut b)?;
    Ok(b[0] == b'\n')
}

fn read_existing(file: File) -> std::io::Result<Vec<LogRecord>> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogRecord>(&line) {
            Ok(r) => records.push(r),
            Err(e) => log::warn!("decision log line {} unreadable, skipped: {e}", i + 1),
        }
    }
    Ok(records)
}

impl RecordSink for JsonlLog {
    fn append(&mut self, draft: LogDraft) -> Result<LogRecord, SinkError> {
        if self.failed {
            return Err(SinkError::Degraded);
        }
        let record = draft.into_record(self.last_id + 1);
        let mut line = record.to_json_line();
        line.push('\n');
        match self.out.write_all(line.as_bytes()).and_then(|()| self.out.flush()) {
            Ok(()) => {
                self.last_id = record.id;
                Ok(record)
            }
            Err(e) => {
                self.failed = true;
                Err(SinkError::Io(e))
            }
        }
    }
}
