#![no_main]
use ensy::data::{Dataset, Schema};
use ensy::pipeline::AugmentPlan;
use libfuzzer_sys::fuzz_target;

const SCHEMA: &str = "[target]\nname = \"label\"\nclasses = [\"a\", \"b\", \"c\"]\n\n[[feature]]\nname = \"x\"\nkind = \"numeric\"\n";
const DATA: &str = "x,label\n1,a\n2,a\n3,a\n4,b\n5,c\n";

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let d =
        Dataset::from_csv_reader(DATA.as_bytes(), Schema::from_toml_str(SCHEMA).unwrap()).unwrap();
    if let Ok(plan) = AugmentPlan::parse(s, &d, 0) {
        plan.validate(d.schema()).expect("parsed plans validate");
    }
});
