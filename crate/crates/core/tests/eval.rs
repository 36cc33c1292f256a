use amc_core::dataset::{IqRecord, C32, SNR_GRID};
use amc_core::eval::{accuracy_by_snr, evaluate, Classifier, EvalReport, ReportFormat};
use amc_core::model::LabelMap;
use amc_core::{Result, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Knows the answer: one-hot on the record's family.
struct Oracle;

impl Classifier for Oracle {
    fn input_len(&self) -> usize {
        4
    }
    fn class_count(&self) -> usize {
        5
    }
    fn classify(&mut self, records: &[&IqRecord]) -> Result<Vec<Vec<f64>>> {
        Ok(records
            .iter()
            .map(|r| (0..5).map(|c| if c == r.family as usize { 1.0 } else { 0.0 }).collect())
            .collect())
    }
}

fn grid_records() -> Vec<IqRecord> {
    let mut out = Vec::new();
    for snr in SNR_GRID {
        for (i, v) in Variant::ALL.into_iter().enumerate() {
            out.push(IqRecord {
                samples: vec![C32::new(1.0, 0.0); 4],
                modulation: v.into(),
                family: v.family().id(),
                channel: (i % 5) as u8,
                snr_db: snr,
                seed: i as u64,
            });
        }
    }
    out
}

#[test]
fn perfect_oracle_scores_one_everywhere() {
    let recs = grid_records();
    let refs: Vec<&IqRecord> = recs.iter().collect();
    let report = evaluate(&mut Oracle, &refs, &LabelMap::families(), 7).unwrap();
    let acc = report.accuracy_by_snr();
    assert_eq!(acc.len(), 20);
    assert!(acc.values().all(|&a| a == 1.0));
    let text = report.to_structured();
    let accuracy_rows = text.lines().skip_while(|l| *l != "snr_db,accuracy,support").skip(1).take_while(|l| !l.starts_with('[')).count();
    assert_eq!(accuracy_rows, 20);
}

#[test]
fn chance_level_for_random_guesses() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
    let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
    let acc = accuracy_by_snr(&vec![0; n], &truth, &pred).unwrap();
    assert!((0.17..=0.23).contains(&acc[&0]), "{}", acc[&0]);
}

#[test]
fn trace_over_total_and_rows_sum_to_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut r = EvalReport::new(LabelMap::families().names().to_vec(), "family");
    for snr in SNR_GRID {
        let truth: Vec<usize> = (0..200).map(|_| rng.random_range(0..5)).collect();
        let pred: Vec<usize> = truth.iter().map(|&t| if rng.random_bool(0.7) { t } else { rng.random_range(0..5) }).collect();
        r.add(&vec![snr; 200], &truth, &pred).unwrap();
        let direct = accuracy_by_snr(&vec![snr; 200], &truth, &pred).unwrap()[&snr];
        assert!((r.accuracy(snr).unwrap() - direct).abs() < 1e-12);
        let support = r.support(snr).unwrap();
        for c in 0..5 {
            assert_eq!(support[c], truth.iter().filter(|&&t| t == c).count() as u64);
        }
    }
}

#[test]
fn merge_is_elementwise_sum() {
    let names = LabelMap::families().names().to_vec();
    let mut a = EvalReport::new(names.clone(), "family");
    let mut b = EvalReport::new(names.clone(), "family");
    let mut both = EvalReport::new(names, "family");
    let (t1, p1, s1) = (vec![0, 1, 2, 3], vec![0, 1, 1, 4], vec![0, 0, 2, 2]);
    let (t2, p2, s2) = (vec![4, 4, 0], vec![4, 3, 0], vec![2, 4, 4]);
    a.add(&s1, &t1, &p1).unwrap();
    b.add(&s2, &t2, &p2).unwrap();
    both.add(&s1, &t1, &p1).unwrap();
    both.add(&s2, &t2, &p2).unwrap();
    a.merge(&b).unwrap();
    assert_eq!(a, both);
}

#[test]
fn emission_is_deterministic_and_round_trips() {
    let recs = grid_records();
    let refs: Vec<&IqRecord> = recs.iter().collect();
    let mut report = evaluate(&mut Oracle, &refs, &LabelMap::families(), 64).unwrap();
    report.dataset_hash = "d".repeat(64);
    report.model_hash = "m".repeat(64);
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    report.write(&p1, ReportFormat::Structured, false).unwrap();
    report.write(&p2, ReportFormat::Structured, false).unwrap();
    let text = std::fs::read_to_string(&p1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&p2).unwrap());
    assert_eq!(EvalReport::parse(&text).unwrap(), report);
    assert!(report.to_table(true).contains("100.0"));
}
