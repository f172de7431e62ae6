#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudopar::scoring::{parse_scored_tsv, scored_pairs_to_tsv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pairs) = parse_scored_tsv(text) {
        let again = parse_scored_tsv(&scored_pairs_to_tsv(&pairs)).expect("own output parses");
        assert_eq!(again.len(), pairs.len());
        for (a, b) in again.iter().zip(&pairs) {
            assert_eq!((a.src_id, a.tgt_id), (b.src_id, b.tgt_id));
        }
    }
});
