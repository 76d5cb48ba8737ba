#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use dsfl_learn::idx::data_dir_from_env;
use dsfl_learn::Mnist;

pub fn data_dir() -> PathBuf {
    data_dir_from_env().unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

/// MNIST, loaded once per test binary. Panics with the searched path if absent.
pub fn mnist() -> &'static Mnist {
    static DATA: OnceLock<Mnist> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = data_dir();
        Mnist::load(&dir).unwrap_or_else(|e| {
            panic!("MNIST not found in {} ({e}); run scripts/fetch_mnist.sh or set DSFL_DATA_DIR", dir.display())
        })
    })
}
