#![no_main]

use libfuzzer_sys::fuzz_target;
use qhaq_core::policy::QuantPolicy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = QuantPolicy::parse(text) {
        assert_eq!(QuantPolicy::parse(&p.to_json()).unwrap(), p);
    }
});
