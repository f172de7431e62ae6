#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudopar::Corpus;

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = Corpus::from_bytes(data, "x") {
        let again = Corpus::from_bytes(corpus.to_text().as_bytes(), "x").expect("own output parses");
        assert_eq!(again, corpus);
    }
});
