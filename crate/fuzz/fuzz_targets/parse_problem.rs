#![no_main]
use libfuzzer_sys::fuzz_target;
use phaselab::problem_io::{parse_problem_text, write_problem_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(record) = parse_problem_text(text) else {
        return;
    };
    // whatever parses must serialize, and the serialized form is a fixed point
    let first = write_problem_text(&record).expect("parsed record serializes");
    let reparsed = parse_problem_text(&first).expect("serialized record parses");
    let second = write_problem_text(&reparsed).expect("reparsed record serializes");
    assert_eq!(first, second);
    let _ = record.into_problem();
});
