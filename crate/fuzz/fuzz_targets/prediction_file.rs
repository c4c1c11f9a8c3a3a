//! External prediction files, resolved against a small test set.

#![no_main]
use ensy::data::Schema;
use ensy::validator::PredictionTable;
use libfuzzer_sys::fuzz_target;

const SCHEMA: &str = "[target]\nname = \"label\"\nclasses = [\"a\", \"b\"]\n\n[[feature]]\nname = \"x\"\nkind = \"numeric\"\n";

fuzz_target!(|data: &[u8]| {
    let schema = Schema::from_toml_str(SCHEMA).unwrap();
    if let Ok(table) = PredictionTable::from_csv_reader(data) {
        for n in [0, 1, 3, 8] {
            if let Ok(labels) = table.labels_for(n, &schema) {
                assert_eq!(labels.len(), n);
                assert!(labels.iter().all(|l| schema.has_class(l)));
            }
        }
    }
});
