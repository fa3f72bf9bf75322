//! Durable storage behind the repository.
//!
//! On-disk layout (one directory per workspace):
//!
//! ```text
//! <data_dir>/<workspace>/events.log       append-only event lines
//! <data_dir>/<workspace>/snapshot.json    {"seq": N, "state": {...}}, a cache
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;

use crate::knowledge::WorkspaceId;

pub const LOG_FILE: &str = "events.log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

pub trait Storage: Send + Sync {
    fn workspaces(&self) -> io::Result<Vec<WorkspaceId>>;

    fn create(&self, workspace: &WorkspaceId) -> io::Result<()>;

    fn read_log(&self, workspace: &WorkspaceId) -> io::Result<Vec<u8>>;

    /// Appends one record. Either the whole record is durable when this
    /// returns `Ok`, or the log is left as it was.
    fn append(&self, workspace: &WorkspaceId, record: &[u8]) -> io::Result<()>;

    /// Cuts the log back to `len` bytes (torn-tail recovery).
    fn truncate_log(&self, workspace: &WorkspaceId, len: u64) -> io::Result<()>;

    fn write_snapshot(&self, workspace: &WorkspaceId, bytes: &[u8]) -> io::Result<()>;

    fn read_snapshot(&self, workspace: &WorkspaceId) -> io::Result<Option<Vec<u8>>>;
}

/// Filesystem storage rooted at a data directory.
pub struct DirStorage {
    root: PathBuf,
    fsync: bool,
    handles: Mutex<BTreeMap<WorkspaceId, File>>,
}

impl DirStorage {
    pub fn open(root: impl Into<PathBuf>, fsync: bool) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        // Fail early when the directory is not writable.
        let probe = root.join(".write-probe");
        File::create(&probe)?;
        fs::remove_file(&probe)?;
        Ok(Self { root, fsync, handles: Mutex::new(BTreeMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, workspace: &WorkspaceId) -> PathBuf {
        self.root.join(workspace.as_str()).join(LOG_FILE)
    }

    fn snapshot_path(&self, workspace: &WorkspaceId) -> PathBuf {
        self.root.join(workspace.as_str()).join(SNAPSHOT_FILE)
    }
}

impl Storage for DirStorage {
    fn workspaces(&self) -> io::Result<Vec<WorkspaceId>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let Some(name) = entry.file_name().to_str().map(str::to_string) else { continue };
            if let Ok(id) = name.parse::<WorkspaceId>() {
                if entry.path().join(LOG_FILE).is_file() {
                    out.push(id);
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn create(&self, workspace: &WorkspaceId) -> io::Result<()> {
        fs::create_dir_all(self.root.join(workspace.as_str()))?;
        OpenOptions::new().create(true).append(true).open(self.log_path(workspace))?;
        Ok(())
    }

    fn read_log(&self, workspace: &WorkspaceId) -> io::Result<Vec<u8>> {
        fs::read(self.log_path(workspace))
    }

    fn append(&self, workspace: &WorkspaceId, record: &[u8]) -> io::Result<()> {
        let mut handles = self.handles.lock();
        if !handles.contains_key(workspace) {
            let file = OpenOptions::new().append(true).open(self.log_path(workspace))?;
            handles.insert(workspace.clone(), file);
        }
        let file = handles.get_mut(workspace).expect("handle inserted above");
        let before = file.metadata()?.len();
        let written = file.write_all(record).and_then(|_| if self.fsync { file.sync_data() } else { Ok(()) });
        if let Err(e) = written {
            let _ = file.set_len(before);
            return Err(e);
        }
        Ok(())
    }

    fn truncate_log(&self, workspace: &WorkspaceId, len: u64) -> io::Result<()> {
        self.handles.lock().remove(workspace);
        let file = OpenOptions::new().write(true).open(self.log_path(workspace))?;
        file.set_len(len)?;
        file.sync_all()
    }

    fn write_snapshot(&self, workspace: &WorkspaceId, bytes: &[u8]) -> io::Result<()> {
        let path = self.snapshot_path(workspace);
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            if self.fsync {
                f.sync_all()?;
            }
        }
        fs::rename(tmp, path)
    }

    fn read_snapshot(&self, workspace: &WorkspaceId) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.snapshot_path(workspace)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[derive(Default)]
struct MemoryWorkspace {
    log: Vec<u8>,
    snapshot: Option<Vec<u8>>,
}

/// In-memory storage with injectable append failures.
#[derive(Default)]
pub struct MemoryStorage {
    workspaces: Mutex<BTreeMap<WorkspaceId, MemoryWorkspace>>,
    failing_appends: AtomicUsize,
}

impl MemoryStorage {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes the next `n` appends fail without writing.
    pub fn fail_next_appends(&self, n: usize) {
        self.failing_appends.store(n, Ordering::SeqCst);
    }

    /// Overwrites a workspace's raw log bytes.
    pub fn set_log(&self, workspace: &WorkspaceId, bytes: Vec<u8>) {
        self.workspaces.lock().entry(workspace.clone()).or_default().log = bytes;
    }
}

impl Storage for MemoryStorage {
    fn workspaces(&self) -> io::Result<Vec<WorkspaceId>> {
        Ok(self.workspaces.lock().keys().cloned().collect())
    }

    fn create(&self, workspace: &WorkspaceId) -> io::Result<()> {
        self.workspaces.lock().entry(workspace.clone()).or_default();
        Ok(())
    }

    fn read_log(&self, workspace: &WorkspaceId) -> io::Result<Vec<u8>> {
        self.workspaces
            .lock()
            .get(workspace)
            .map(|w| w.log.clone())
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "no such workspace"))
    }

    fn append(&self, workspace: &WorkspaceId, record: &[u8]) -> io::Result<()> {
        let failing =
            self.failing_appends.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1)).is_ok();
        if failing {
            return Err(io::Error::other("injected storage failure"));
        }
        let mut map = self.workspaces.lock();
        let ws = map.get_mut(workspace).ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "no such workspace"))?;
        ws.log.extend_from_slice(record);
        Ok(())
    }

    fn truncate_log(&self, workspace: &WorkspaceId, len: u64) -> io::Result<()> {
        if let Some(ws) = self.workspaces.lock().get_mut(workspace) {
            ws.log.truncate(len as usize);
        }
        Ok(())
    }

    fn write_snapshot(&self, workspace: &WorkspaceId, bytes: &[u8]) -> io::Result<()> {
        self.workspaces.lock().entry(workspace.clone()).or_default().snapshot = Some(bytes.to_vec());
        Ok(())
    }

    fn read_snapshot(&self, workspace: &WorkspaceId) -> io::Result<Option<Vec<u8>>> {
        Ok(self.workspaces.lock().get(workspace).and_then(|w| w.snapshot.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dir_storage_appends_and_lists() {
        let dir = tempfile::tempdir().unwrap();
        let storage = DirStorage::open(dir.path(), false).unwrap();
        let ws: WorkspaceId = "alpha".parse().unwrap();
        storage.create(&ws).unwrap();
        storage.append(&ws, b"one\n").unwrap();
        storage.append(&ws, b"two\n").unwrap();
        assert_eq!(storage.read_log(&ws).unwrap(), b"one\ntwo\n");
        assert_eq!(storage.workspaces().unwrap(), vec![ws.clone()]);

        storage.truncate_log(&ws, 4).unwrap();
        storage.append(&ws, b"three\n").unwrap();
        assert_eq!(storage.read_log(&ws).unwrap(), b"one\nthree\n");

        assert_eq!(storage.read_snapshot(&ws).unwrap(), None);
        storage.write_snapshot(&ws, b"{}").unwrap();
        assert_eq!(storage.read_snapshot(&ws).unwrap().unwrap(), b"{}");
    }

    #[test]
    fn memory_storage_failure_leaves_log_untouched() {
        let storage = MemoryStorage::new();
        let ws: WorkspaceId = "w".parse().unwrap();
        storage.create(&ws).unwrap();
        storage.append(&ws, b"a\n").unwrap();
        storage.fail_next_appends(1);
        assert!(storage.append(&ws, b"b\n").is_err());
        assert_eq!(storage.read_log(&ws).unwrap(), b"a\n");
        storage.append(&ws, b"c\n").unwrap();
        assert_eq!(storage.read_log(&ws).unwrap(), b"a\nc\n");
    }
}
