//! Fit the two preprocessing variants on a training split and look at what
//! they produce: label codes for the classifiers, one-hot indicators for the
//! autoencoder, all min-max scaled to [0, 1].

use std::error::Error;

use iot_anomaly::kdd::{parse_unlabelled, split_train_test, SplitSpec};
use iot_anomaly::preprocess::{EncodingKind, Preprocessor};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig::new(20_000, 2))?;
    let (train, test) = split_train_test(&ds, &SplitSpec::new(0.8, 2)?)?;

    for (kind, l2) in [(EncodingKind::Label, false), (EncodingKind::OneHot, true)] {
        let pre = Preprocessor::fit(&train, kind, l2, false)?;
        let m = pre.transform(&test)?;
        let (lo, hi) = m
            .values()
            .iter()
            .fold((f32::MAX, f32::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        println!(
            "{kind:?}: {} features, {} test rows, values in [{lo:.3}, {hi:.3}], l2 rows: {l2}",
            m.n_cols(),
            m.n_rows()
        );
        println!("  first columns: {:?}", &m.columns[..6]);
    }

    // Unseen categorical tokens: strict mode refuses, lenient mode encodes them.
    let mut pre = Preprocessor::fit(&train, EncodingKind::Label, false, false)?;
    let line = train.records[0].to_line().replacen(&*train.records[0].service, "gopher_v9", 1);
    let record = parse_unlabelled(line.rsplit_once(',').unwrap().0, 0)?;
    match pre.transform_record(&record) {
        Ok(_) => println!("strict: accepted"),
        Err(e) => println!("strict: {e}"),
    }
    pre.encoder.lenient = true;
    let row = pre.transform_record(&record)?;
    println!("lenient: service column -> {:.4}", row[2]);
    Ok(())
}
