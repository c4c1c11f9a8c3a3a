//! Dataset CSV ingestion against a fixed mixed schema. Anything that parses
//! must survive a write/read round trip unchanged.

#![no_main]
use ensy::data::{Dataset, Schema};
use libfuzzer_sys::fuzz_target;

const SCHEMA: &str = r#"
[target]
name = "label"
classes = ["a", "b", "c"]

[[feature]]
name = "x"
kind = "numeric"
min = -10.0
max = 10.0
bound_policy = "clamp"

[[feature]]
name = "y"
kind = "numeric"

[[feature]]
name = "mode"
kind = "categorical"
categories = ["walk", "bike", "car"]
"#;

fuzz_target!(|data: &[u8]| {
    let schema = Schema::from_toml_str(SCHEMA).unwrap();
    let Ok(d) = Dataset::from_csv_reader(data, schema) else {
        return;
    };
    let mut buf = Vec::new();
    d.to_csv_writer(&mut buf).unwrap();
    let back = Dataset::from_csv_reader(buf.as_slice(), d.shared_schema()).unwrap();
    assert_eq!(back.rows(), d.rows());
});
