//! Shared helpers for the acceptance suite in `tests/acceptance.rs`.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Duration;

use dsfl_learn::idx::data_dir_from_env;
use dsfl_learn::Mnist;

/// Writes one verdict line to stderr, bypassing test output capture, then
/// asserts.
pub fn report(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id} [{verdict}] {name} ({:.1} s): {detail}\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
}

/// `$DSFL_DATA_DIR`, else `data/mnist` at the workspace root.
pub fn data_dir() -> PathBuf {
    data_dir_from_env().unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

/// MNIST, loaded once. Panics with the searched path if absent.
pub fn mnist() -> &'static Mnist {
    static DATA: OnceLock<Mnist> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = data_dir();
        Mnist::load(&dir).unwrap_or_else(|e| {
            panic!("MNIST not found in {} ({e}); run scripts/fetch_mnist.sh or set DSFL_DATA_DIR", dir.display())
        })
    })
}
