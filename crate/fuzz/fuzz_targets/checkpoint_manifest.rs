#![no_main]

use libfuzzer_sys::fuzz_target;
use qhaq_core::agent::CheckpointManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = CheckpointManifest::parse(text) {
        for t in &m.tensors {
            assert!(!t.file.contains('/') && !t.file.contains('\\') && !t.file.starts_with('.'));
        }
    }
});
