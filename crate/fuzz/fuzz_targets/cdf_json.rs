#![no_main]
use ensy::catsampler::EmpiricalCdf;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(d) = EmpiricalCdf::from_json(s) else {
        return;
    };
    assert_eq!(d.cdf().last().copied(), Some(1.0));
    for r in [0.0, 1e-12, 0.5, 0.999_999, 1.0] {
        assert!(d.categories().iter().any(|c| c == d.category_for(r)));
    }
    let _ = d.sample(8, 1);
});
