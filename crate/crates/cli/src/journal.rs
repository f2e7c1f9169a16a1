//! Append-only journal of completed laundering jobs, used to resume interrupted runs.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// One completed laundered id per line. Only newline-terminated lines count, so a
/// line torn by a crash is ignored and its job redone.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    done: HashSet<String>,
    file: Mutex<File>,
}

impl Journal {
    /// Opens (creating if needed) the journal; `fresh` discards previous entries.
    pub fn open(path: &Path, fresh: bool) -> io::Result<Self> {
        let mut done = HashSet::new();
        if !fresh && path.exists() {
            let text = fs::read_to_string(path)?;
            let complete = match text.rfind('\n') {
                Some(i) => &text[..=i],
                None => "",
            };
            done.extend(complete.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string));
            if complete.len() != text.len() {
                // Drop the torn tail so later appends start on a fresh line.
                fs::write(path, complete)?;
            }
        }
        let file = if fresh {
            File::create(path)?
        } else {
            OpenOptions::new().create(true).append(true).open(path)?
        };
        Ok(Self { path: path.to_path_buf(), done, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn is_done(&self, id: &str) -> bool {
        self.done.contains(id)
    }

    pub fn completed(&self) -> usize {
        self.done.len()
    }

    /// Appends `id`; called only after the job's output is fully on disk.
    pub fn record(&self, id: &str) -> io::Result<()> {
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(format!("{id}\n").as_bytes())?;
        f.flush()
    }
}
