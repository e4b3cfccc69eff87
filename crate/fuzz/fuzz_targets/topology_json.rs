#![no_main]

use libfuzzer_sys::fuzz_target;
use qhaq_core::model::{build_observations, parse_topology};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = parse_topology(text) {
        let again = parse_topology(&model.to_json()).expect("serialized model parses");
        assert_eq!(again.layers, model.layers);
        if let Ok(obs) = build_observations(&model) {
            assert!(obs.iter().all(|o| o.values.iter().all(|v| (0.0..=1.0).contains(v))));
        }
    }
});
