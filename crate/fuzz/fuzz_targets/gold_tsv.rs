#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudopar::GoldPairSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(gold) = GoldPairSet::parse_tsv(text) {
        assert_eq!(GoldPairSet::parse_tsv(&gold.to_tsv()).expect("own output parses"), gold);
    }
});
