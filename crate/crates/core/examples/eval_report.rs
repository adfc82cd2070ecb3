//! Metrics from a confusion matrix in binary, macro and weighted averaging,
//! the JSON report, and the comparison table against published figures.

use std::error::Error;

use iot_anomaly::eval::{confusion, metrics, EvalReport, MetricMode, RunMetadata};
use iot_anomaly::kdd::Category;

fn main() -> Result<(), Box<dyn Error>> {
    // Rows: normal, dos, probe, r2l, u2r.
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    let table = [
        [1900, 20, 10, 60, 10],
        [15, 7800, 5, 0, 0],
        [8, 4, 70, 0, 0],
        [12, 0, 0, 10, 0],
        [1, 0, 0, 0, 0],
    ];
    for (t, row) in table.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            truth.extend(std::iter::repeat(t).take(n));
            predicted.extend(std::iter::repeat(p).take(n));
        }
    }

    let cm = confusion(&truth, &predicted, Category::COUNT)?;
    println!("binary collapse: {:?}", cm.binary().counts);
    for mode in MetricMode::ALL {
        let m = metrics(&cm, mode)?;
        println!(
            "{:<9} acc {:.4} p {:.4} r {:.4} f1 {:.4}{}",
            mode.name(),
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            if m.zero_division { "  (a 0/0 rate was set to 0)" } else { "" }
        );
    }

    let report = EvalReport::build(
        &truth,
        &predicted,
        RunMetadata {
            model: "ensemble".into(),
            test_rows: truth.len(),
            ..Default::default()
        },
    )?;
    print!("{report}");
    if let Some(tables) = report.reference_tables(0.015) {
        print!("{tables}");
    }
    let json = report.to_json();
    println!("report JSON: {} bytes, starts {}", json.len(), &json[..40].replace('\n', " "));
    Ok(())
}
