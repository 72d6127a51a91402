//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is available.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "carmichael.h"

int main(void) {
    CmForm *f = NULL;
    if (cm_form_ukl(3, 3, &f) != CM_STATUS_OK) return 1;
    bool ok = false;
    if (cm_verify(f, &ok) != CM_STATUS_OK || !ok) return 2;
    uint64_t hits[8];
    size_t len = 0;
    if (cm_search_hits(f, 1, 10, 1, hits, 8, &len) != CM_STATUS_OK) return 3;
    char *line = NULL;
    if (cm_form_to_string(f, &line) != CM_STATUS_OK) return 4;
    printf("%s|%zu|%llu\n", line, len, (unsigned long long)hits[0]);
    cm_string_free(line);
    cm_form_free(f);
    if (cm_form_wk(2, &f) != CM_STATUS_INVALID_ARGUMENT) return 5;
    if (strlen(cm_last_error()) == 0) return 6;
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    let name = if cfg!(windows) { "carmichael_ffi.lib" } else { "libcarmichael_ffi.a" };
    [deps.parent()?.join(name), deps.join(name)].into_iter().find(|p| p.exists())
}

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok()?.status.success().then_some(cc)
}

#[test]
fn c_program_links_and_runs() {
    let (Some(cc), Some(lib)) = (compiler(), static_lib()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg("-std=c11")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ukl:3,3 3 1 6,12,18|2|1\n");
}
