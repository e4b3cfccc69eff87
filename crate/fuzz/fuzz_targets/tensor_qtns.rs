#![no_main]

use libfuzzer_sys::fuzz_target;
use qhaq_core::quant::TensorF32;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = TensorF32::from_bytes(data) {
        assert_eq!(t.to_bytes(), data);
    }
});
