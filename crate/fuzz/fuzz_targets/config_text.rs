#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudopar::pipeline::parse_config_text;
use pseudopar::MiningConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_config_text(text) {
        let _ = MiningConfig::from_entries(entries.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    }
});
