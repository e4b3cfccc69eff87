#![no_main]

use libfuzzer_sys::fuzz_target;
use qhaq_core::search::SearchConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = SearchConfig::parse(text) {
        let again = SearchConfig::parse(&cfg.to_json()).expect("serialized config parses");
        assert_eq!(again, cfg);
    }
});
