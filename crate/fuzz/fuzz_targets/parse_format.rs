#![no_main]
use libfuzzer_sys::fuzz_target;
use phaselab::experiments::Format;

fuzz_target!(|data: &[u8]| {
    if let Ok(name) = std::str::from_utf8(data) {
        if let Some(format) = Format::parse(name) {
            assert!(Format::ALL.contains(&format));
        }
    }
});
