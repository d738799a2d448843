use std::fs::File;
use std::io::{BufReader, Write};

use nongauss_timetag::stream::REORDER_TOLERANCE_PS;
use nongauss_timetag::*;
use proptest::prelude::*;

fn records() -> impl Strategy<Value = Vec<ClickRecord>> {
    proptest::collection::vec((0u8..3, 0u64..1 << 40), 0..400)
        .prop_map(|v| v.into_iter().map(|(c, t)| ClickRecord::new(c, t)).collect())
}

fn round_trip(s: &ClickStream, format: Format) -> ClickStream {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write_stream(f.as_file_mut(), s, format).unwrap();
    f.as_file_mut().flush().unwrap();
    parse_stream(BufReader::new(File::open(f.path()).unwrap()), format).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn files_round_trip(recs in records()) {
        let s = ClickStream::from_records(recs).unwrap();
        prop_assert_eq!(&round_trip(&s, Format::Binary), &s);
        prop_assert_eq!(&round_trip(&s, Format::Csv), &s);
    }

    #[test]
    fn small_reordering_is_repaired(mut ts in proptest::collection::vec(0u64..1 << 30, 2..200)) {
        ts.sort_unstable();
        let mut text = String::from("channel,t_ps\n");
        // Swap neighbours closer than the tolerance.
        for w in ts.chunks(2) {
            let (a, b) = (w[0], *w.last().unwrap());
            let (first, second) = if b - a < REORDER_TOLERANCE_PS { (b, a) } else { (a, b) };
            text.push_str(&format!("0,{first}\n"));
            if w.len() == 2 {
                text.push_str(&format!("1,{second}\n"));
            }
        }
        let s = parse_stream(text.as_bytes(), Format::Csv).unwrap();
        prop_assert!(s.records().windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(s.len(), ts.len());
    }
}

#[test]
fn large_reordering_is_an_order_error() {
    let text = format!("channel,t_ps\n0,{}\n1,5\n", 10 * REORDER_TOLERANCE_PS);
    assert!(matches!(parse_stream(text.as_bytes(), Format::Csv), Err(TimetagError::Order { index: 1, .. })));
}
