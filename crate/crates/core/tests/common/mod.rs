#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use povgen_core::backends::{load_backends, Backends, InvocationLimiter};
use povgen_core::corpus::{load_manifest, Manifest, ProgramPair};
use povgen_core::harness::{Toolchain, ToolchainConfig};
use povgen_core::pipeline::PipelineOptions;

pub fn testdata() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata")
}

pub fn corpus() -> PathBuf {
    testdata().join("corpus")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn manifest() -> Manifest {
    load_manifest(&corpus().join("manifest.toml")).expect("fixture manifest")
}

pub fn pair(id: &str) -> ProgramPair {
    manifest().pairs.into_iter().find(|p| p.pair_id == id).expect("fixture pair")
}

pub fn backends() -> Backends {
    load_backends(&corpus().join("backends.toml"), InvocationLimiter::new(4)).expect("fixture backends")
}

pub fn limiter() -> Arc<InvocationLimiter> {
    InvocationLimiter::new(4)
}

fn fake(canned: &str, reports: &str) -> Toolchain {
    let script = testdata().join("bin/fake-build.sh");
    Toolchain {
        steps: vec![vec![
            "sh".into(),
            script.to_string_lossy().into_owned(),
            canned.into(),
            "{simple_class}".into(),
            reports.into(),
        ]],
        report_dirs: if reports == "-" { vec![] } else { vec![reports.into()] },
    }
}

/// Toolchains that replay canned build output instead of running a JVM.
pub fn fake_toolchains() -> ToolchainConfig {
    ToolchainConfig {
        maven: fake("src/test/resources/pov-fake", "target/surefire-reports"),
        gradle: fake("src/test/resources/pov-fake", "build/test-results/test"),
        plain: fake("test/pov-fake", "-"),
    }
}

pub fn options(workspace: &Path) -> PipelineOptions {
    let mut o = PipelineOptions::new(workspace);
    o.harness.toolchains = fake_toolchains();
    o
}

/// Compare against a checked-in golden; `UPDATE_GOLDEN=1` rewrites it.
pub fn assert_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("golden {} unreadable ({e}); rerun with UPDATE_GOLDEN=1", path.display()));
    assert!(expected == actual, "{name} differs from golden:\n--- expected\n{expected}\n--- actual\n{actual}");
}

/// Every file under `root` except wall-clock timings, as relative path
/// to contents.
pub fn tree(root: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.file_name() != ".runtime")
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect()
}
