//! Pins the first 100 draws of a reference stream so that any change to the
//! key derivation or the float conversion is caught across builds.
//! Regenerate with `UPDATE_GOLDEN=1 cargo test --test sampling_golden`.

use scenario_cert::sampling::{SeededStream, TRAIN};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/stream_seed42_train0.txt");

fn render() -> String {
    let mut s = SeededStream::new(42, TRAIN, 0);
    let mut out = String::from("# seed=42 namespace=train index=0; columns: counter raw_u64 uniform01_bits\n");
    for i in 0..100 {
        let mut probe = s.clone();
        let raw = probe.next_u64();
        let u = s.standard_uniform();
        out.push_str(&format!("{i} {raw:016x} {:016x}\n", u.to_bits()));
    }
    out
}

#[test]
fn first_hundred_draws_match_golden_file() {
    let got = render();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(GOLDEN, &got).unwrap();
    }
    let want = std::fs::read_to_string(GOLDEN).expect("golden file present");
    assert_eq!(got, want);
}
