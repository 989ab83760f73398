#![no_main]

use errvar_cli::Report;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = Report::parse_machine(text) {
        // the first emission is canonical; from then on it is a fixed point
        let canonical = report.to_machine();
        let again = Report::parse_machine(&canonical).expect("canonical report parses");
        assert_eq!(canonical, again.to_machine());
        let _ = report.to_human();
    }
});
