use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Directory holding the freshly built `libacidp_ffi.a`.
fn static_lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let found = [deps.parent().unwrap(), deps]
        .into_iter()
        .find(|d| d.join("libacidp_ffi.a").exists())
        .expect("static library next to the test binary");
    found.to_path_buf()
}

fn compile(out: &Path) {
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(manifest_dir().join("tests/c/smoke.c"))
        .arg(static_lib_dir().join("libacidp_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(out)
        .status()
        .expect("C compiler runs");
    assert!(status.success(), "C build failed");
}

#[test]
fn header_is_current() {
    let header = std::fs::read_to_string(manifest_dir().join("include/acidp.h")).unwrap();
    let source = std::fs::read_to_string(manifest_dir().join("src/lib.rs")).unwrap();
    for line in source.lines() {
        let line = line.trim();
        let rest = line
            .strip_prefix("pub unsafe extern \"C\" fn ")
            .or_else(|| line.strip_prefix("pub extern \"C\" fn "));
        if let Some(rest) = rest {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        }
    }
}

#[test]
fn c_program_links_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    compile(&exe);
    let csv = dir.path().join("trace.csv");
    let out = Command::new(&exe).arg(&csv).output().unwrap();
    assert!(
        out.status.success(),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with(&format!("acidp {} regret ", env!("CARGO_PKG_VERSION"))), "{stdout}");
    let trace = acidp::TrialTrace::load(&csv).unwrap();
    assert_eq!(trace.len(), 200);
}
