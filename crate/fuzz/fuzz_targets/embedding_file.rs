#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudopar::EmbeddingFile;

// Anything that decodes must re-encode to the same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(file) = EmbeddingFile::decode(data) {
        assert_eq!(file.encode(), data);
    }
});
