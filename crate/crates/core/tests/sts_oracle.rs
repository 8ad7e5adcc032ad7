//! Bag-of-words STS scores checked against values computed beforehand by an
//! independent script (regex gazetteer + word counts).

use namebias::bench::{bundled_triplets, run_sts, sts_vocabulary};
use namebias::{AnonymizationStrategy, Anonymizer, BackendSpec, Embedder, Gazetteer};

const NONE: [(f64, f64); 10] = [
    (0.8098070611453292, 0.568080147306206),
    (0.6827887419989189, 0.21320071635561047),
    (0.7163228607126888, 0.5416390355463555),
    (0.5862068965517242, 0.34081145827384396),
    (0.39936153191543583, 0.5619514869490164),
    (0.2300789234172203, 0.6109598099719177),
    (0.5005173307126191, 0.6110100926607787),
    (0.441261304060914, 0.361092690364237),
    (0.4216370213557839, 0.4743416490252569),
    (0.3508232077228117, 0.6531972647421808),
];

const REMOVE: [(f64, f64); 10] = [
    (0.9661932579793266, 0.45883146774112343),
    (0.7071067811865475, 0.1843024451936214),
    (0.7453862417234768, 0.5261042808091513),
    (0.7999999999999998, 0.24806946917841693),
    (0.42874646285627205, 0.5170876899950192),
    (0.36980013081681945, 0.3042903097250923),
    (0.6009819973837496, 0.5511070751355519),
    (0.4530923774308793, 0.3032392174315614),
    (0.5009794328681195, 0.37573457465108967),
    (0.3849001794597505, 0.6236095644623235),
];

fn run(strategy: AnonymizationStrategy) -> namebias::bench::TaskReport {
    let g = Gazetteer::bundled();
    let triplets = bundled_triplets();
    let e = Embedder::new(BackendSpec::bag_of_words(sts_vocabulary(&triplets))).unwrap();
    run_sts(&triplets, &e, &Anonymizer::new(strategy, &g)).unwrap()
}

fn assert_scores(report: &namebias::bench::TaskReport, expected: &[(f64, f64)]) {
    assert_eq!(report.details.len(), expected.len());
    for (row, (p, n)) in report.details.iter().zip(expected) {
        assert!((row.values["positive"] - p).abs() < 1e-12, "{} positive", row.id);
        assert!((row.values["negative"] - n).abs() < 1e-12, "{} negative", row.id);
    }
}

#[test]
fn vocabulary_size() {
    assert_eq!(sts_vocabulary(&bundled_triplets()).len(), 362);
}

#[test]
fn original_texts() {
    let r = run(AnonymizationStrategy::None);
    assert_scores(&r, &NONE);
    assert_eq!(r.metric("auc_roc"), Some(0.53));
}

#[test]
fn removal() {
    let r = run(AnonymizationStrategy::Remove);
    assert_scores(&r, &REMOVE);
    assert_eq!(r.metric("auc_roc"), Some(0.74));
}
