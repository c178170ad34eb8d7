//! On-disk layout of a pipeline run.
//!
//! ```text
//! <root>/
//!   report/                  aggregate metrics
//!   .runtime/                wall-clock timings (not reproducible)
//!   <pair_id>/
//!     prompts/ transcripts/ tests/ logs/ verdicts/ report/
//! ```

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;
use walkdir::WalkDir;

use crate::corpus::ProgramPair;

pub const PAIR_SUBDIRS: [&str; 6] = ["prompts", "transcripts", "tests", "logs", "verdicts", "report"];

/// Directories skipped when copying an app into a working copy.
pub(crate) const COPY_EXCLUDES: [&str; 5] = ["target", "build", ".git", ".gradle", "out"];

/// Handle on one pair's subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairWorkspace {
    pub root: PathBuf,
    pub pair_id: String,
}

impl PairWorkspace {
    pub fn dir(&self, sub: &str) -> PathBuf {
        self.root.join(sub)
    }
    pub fn prompts(&self) -> PathBuf {
        self.dir("prompts")
    }
    pub fn transcripts(&self) -> PathBuf {
        self.dir("transcripts")
    }
    pub fn tests(&self) -> PathBuf {
        self.dir("tests")
    }
    pub fn logs(&self) -> PathBuf {
        self.dir("logs")
    }
    pub fn verdicts(&self) -> PathBuf {
        self.dir("verdicts")
    }
    pub fn report(&self) -> PathBuf {
        self.dir("report")
    }

    /// Directory holding everything about one generation task.
    pub fn task_dir(&self, task_id: &str) -> PathBuf {
        self.tests().join(task_id)
    }

    pub fn worktree(&self, task_id: &str) -> PathBuf {
        self.task_dir(task_id).join("worktree")
    }

    /// Per-pair directory for wall-clock data kept out of the
    /// reproducible tree.
    pub fn runtime(&self) -> PathBuf {
        let base = self.root.parent().unwrap_or(Path::new("."));
        base.join(".runtime").join(&self.pair_id)
    }

    /// Path relative to the pair root, with `/` separators.
    pub fn relative(&self, path: &Path) -> String {
        rel_string(path.strip_prefix(&self.root).unwrap_or(path))
    }
}

fn pair_locks() -> &'static Mutex<HashMap<String, Arc<Mutex<()>>>> {
    static LOCKS: OnceLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = OnceLock::new();
    LOCKS.get_or_init(Default::default)
}

/// Create (or re-open) the per-pair directory layout. Existing files are
/// left untouched; concurrent calls for the same pair are serialized.
pub fn init_workspace(pair: &ProgramPair, out_root: &Path) -> io::Result<PairWorkspace> {
    let lock = {
        let mut map = pair_locks().lock().unwrap_or_else(|e| e.into_inner());
        map.entry(pair.pair_id.clone()).or_default().clone()
    };
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
    let root = out_root.join(&pair.pair_id);
    for sub in PAIR_SUBDIRS {
        fs::create_dir_all(root.join(sub))?;
    }
    Ok(PairWorkspace {
        root,
        pair_id: pair.pair_id.clone(),
    })
}

pub fn rel_string(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Copy `src` into a fresh `dst`, replacing whatever was there.
pub fn fresh_copy(src: &Path, dst: &Path) -> io::Result<()> {
    if dst.exists() {
        fs::remove_dir_all(dst)?;
    }
    fs::create_dir_all(dst)?;
    let walker = WalkDir::new(src).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !(e.file_type().is_dir() && COPY_EXCLUDES.contains(&e.file_name().to_string_lossy().as_ref()))
    });
    for entry in walker {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry.path().strip_prefix(src).expect("walkdir stays under root");
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target)?;
        } else if entry.file_type().is_file() {
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

/// Write pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> io::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AttackCategory, BuildSystem, ExemplarTest, VulnerabilityRecord};
    use crate::signature::validate_signature;
    use tempfile::TempDir;

    fn pair(id: &str) -> ProgramPair {
        ProgramPair {
            pair_id: id.into(),
            app_root: PathBuf::from("/nonexistent"),
            build_system: BuildSystem::Plain,
            lib: "lib 1".into(),
            report_dirs: vec![],
            vulnerability: VulnerabilityRecord {
                vuln_id: "X-1".into(),
                attack_category: AttackCategory::OTH,
                vulnerable_api_list: vec![validate_signature("A.b()").unwrap()],
                affected_versions: "lib 1".into(),
            },
            exemplar: ExemplarTest {
                test_function_name: "t".into(),
                test_source: "void t() {}".into(),
                origin_note: String::new(),
            },
        }
    }

    #[test]
    fn creates_six_subdirectories() {
        let out = TempDir::new().unwrap();
        let ws = init_workspace(&pair("demo-a"), out.path()).unwrap();
        let mut found: Vec<_> = fs::read_dir(&ws.root)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        found.sort();
        let mut expected: Vec<_> = PAIR_SUBDIRS.iter().map(|s| s.to_string()).collect();
        expected.sort();
        assert_eq!(found, expected);
    }

    #[test]
    fn idempotent_and_keeps_files() {
        let out = TempDir::new().unwrap();
        let ws = init_workspace(&pair("demo-a"), out.path()).unwrap();
        fs::write(ws.logs().join("keep.txt"), "data").unwrap();
        let again = init_workspace(&pair("demo-a"), out.path()).unwrap();
        assert_eq!(ws, again);
        assert_eq!(fs::read_to_string(again.logs().join("keep.txt")).unwrap(), "data");
    }

    #[test]
    fn pairs_get_disjoint_subtrees() {
        let out = TempDir::new().unwrap();
        let a = init_workspace(&pair("demo-a"), out.path()).unwrap();
        let b = init_workspace(&pair("demo-b"), out.path()).unwrap();
        assert!(!a.root.starts_with(&b.root) && !b.root.starts_with(&a.root));
        assert_eq!(a.root.file_name().unwrap(), "demo-a");
    }

    #[test]
    fn fresh_copy_skips_build_outputs() {
        let src = TempDir::new().unwrap();
        fs::create_dir_all(src.path().join("src/main")).unwrap();
        fs::create_dir_all(src.path().join("target/classes")).unwrap();
        fs::write(src.path().join("src/main/A.java"), "class A {}").unwrap();
        fs::write(src.path().join("target/classes/A.class"), "x").unwrap();
        let dst = TempDir::new().unwrap();
        let wt = dst.path().join("wt");
        fresh_copy(src.path(), &wt).unwrap();
        assert!(wt.join("src/main/A.java").is_file());
        assert!(!wt.join("target").exists());
    }
}
