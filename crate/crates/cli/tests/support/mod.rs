#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use povgen_core::harness::{Toolchain, ToolchainConfig};
use serde::Serialize;

pub fn core_testdata() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/testdata")
}

pub fn core_golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden")
}

pub fn corpus() -> PathBuf {
    core_testdata().join("corpus")
}

#[derive(Serialize)]
struct Config {
    manifest: PathBuf,
    backends: PathBuf,
    toolchain: ToolchainConfig,
}

fn fake(canned: &str, reports: &str) -> Toolchain {
    let script = core_testdata().join("bin/fake-build.sh");
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

/// Config file pointing at the fixture corpus, with build toolchains that
/// replay canned output instead of running a JVM.
pub fn write_config(dir: &Path) -> PathBuf {
    let cfg = Config {
        manifest: corpus().join("manifest.toml"),
        backends: corpus().join("backends.toml"),
        toolchain: ToolchainConfig {
            maven: fake("src/test/resources/pov-fake", "target/surefire-reports"),
            gradle: fake("src/test/resources/pov-fake", "build/test-results/test"),
            plain: fake("test/pov-fake", "-"),
        },
    };
    let path = dir.join("povgen.toml");
    fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    path
}

pub fn povgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_povgen"))
        .args(args)
        .env_remove("POVGEN_LOG")
        .output()
        .expect("povgen runs")
}

/// Every file under `root` except wall-clock timings.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.file_name() != ".runtime")
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}
