#![no_main]

use errvar_cli::number::{format_number, MAX_PRECISION};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: (u64, u8)| {
    let x = f64::from_bits(data.0);
    let precision = 1 + data.1 as usize % MAX_PRECISION;
    let s = format_number(x, precision);
    if !x.is_finite() {
        return;
    }
    let back: f64 = s.parse().expect("formatted numbers parse");
    assert_eq!(format_number(back, precision), s);
    if precision == MAX_PRECISION {
        assert_eq!(back, x);
    }
});
