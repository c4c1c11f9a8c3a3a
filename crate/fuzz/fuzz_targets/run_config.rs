#![no_main]
use ensy::cli::{RunConfig, RunFile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = RunFile::from_toml_str(s) {
        let _ = RunConfig::try_from(file);
    }
});
