use std::io::Write;

use dynpanel::pipeline::{estimate, Estimator, PipelineConfig};
use dynpanel::{build_design, read_csv_panel, Error};

fn write_csv(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

#[test]
fn shuffled_rows_give_identical_estimates() {
    let mut rows = Vec::new();
    for (i, u) in ["zeta", "alpha", "mid", "beta"].iter().enumerate() {
        for t in 0..6 {
            let d = ((i * 5 + t * 3) % 4) as f64;
            let y = 2.0 * d + i as f64 + 0.3 * t as f64 + ((i * 7 + t) % 3) as f64 * 0.1;
            rows.push(format!("{u},{},{d},{y}", 2000 + t));
        }
    }
    let sorted = format!("unit,period,d,y\n{}\n", rows.join("\n"));
    rows.reverse();
    rows.swap(1, 7);
    let shuffled = format!("unit,period,d,y\n{}\n", rows.join("\n"));
    let (a, b) = (write_csv(&sorted), write_csv(&shuffled));
    let pa = read_csv_panel(a.path()).unwrap();
    let pb = read_csv_panel(b.path()).unwrap();
    assert_eq!(pa, pb);
    let cfg = PipelineConfig::default();
    let ea = estimate(&build_design(&pa, "y", &["d"], 1).unwrap(), Estimator::Fe, &cfg, 0).unwrap();
    let eb = estimate(&build_design(&pb, "y", &["d"], 1).unwrap(), Estimator::Fe, &cfg, 0).unwrap();
    assert_eq!(ea, eb);
}

#[test]
fn malformed_files_are_rejected() {
    let unbalanced = write_csv("unit,period,y\na,1,1.0\na,2,2.0\nb,1,0.5\n");
    assert!(matches!(read_csv_panel(unbalanced.path()).unwrap_err(), Error::UnbalancedPanel { .. }));
    let dup = write_csv("unit,period,y\na,1,1.0\na,1,2.0\n");
    assert!(matches!(read_csv_panel(dup.path()).unwrap_err(), Error::DuplicateCell { .. }));
    let text = write_csv("unit,period,y\na,1,abc\n");
    assert!(matches!(read_csv_panel(text.path()).unwrap_err(), Error::NonNumericValue { .. }));
}
