#![no_main]
use ensy::data::Schema;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(schema) = Schema::from_toml_str(s) {
        let again =
            Schema::from_toml_str(&schema.to_toml_string()).expect("emitted schema reparses");
        assert_eq!(again, schema);
    }
});
