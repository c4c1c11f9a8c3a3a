#![no_main]
use ensy::validator::ClassifierSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = s.parse::<ClassifierSpec>() {
        let again: ClassifierSpec = spec.to_string().parse().expect("display form reparses");
        assert_eq!(again, spec);
    }
});
