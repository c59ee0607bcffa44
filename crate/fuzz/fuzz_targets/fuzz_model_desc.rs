#![no_main]

use libfuzzer_sys::fuzz_target;
use mbinception::graph::parse_model_desc;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(graph) = parse_model_desc(text) {
        // Accepted graphs round-trip through the writer.
        let desc = graph.to_desc();
        let again = parse_model_desc(&desc).expect("rendered description must parse");
        assert_eq!(again, graph);
    }
});
