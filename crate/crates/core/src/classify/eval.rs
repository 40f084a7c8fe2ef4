use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ClassifyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold instances.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f1_micro: f64,
    /// Unweighted mean over classes that occur in gold or predictions.
    pub f1_macro: f64,
    /// Mean weighted by gold support.
    pub f1_weighted: f64,
    pub accuracy: f64,
    pub per_class_f1: BTreeMap<String, f64>,
    pub per_class: BTreeMap<String, ClassScores>,
    /// Row and column order of `confusion`.
    pub class_names: Vec<String>,
    /// `confusion[i][j]` counts gold class `i` predicted as class `j`.
    pub confusion: Vec<Vec<u64>>,
    pub n_test: usize,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and aggregate F1. Labels missing from `class_names` are appended
/// in sorted order so nothing is dropped from the confusion matrix.
pub fn evaluate_f1<S: AsRef<str>, T: AsRef<str>>(
    pred: &[S],
    gold: &[S],
    class_names: &[T],
) -> Result<EvalReport, ClassifyError> {
    if pred.len() != gold.len() {
        return Err(ClassifyError::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    let mut names: Vec<String> = class_names.iter().map(|s| s.as_ref().to_string()).collect();
    let mut extra: Vec<String> = pred
        .iter()
        .chain(gold)
        .map(|s| s.as_ref())
        .filter(|s| !names.iter().any(|n| n == s))
        .map(str::to_string)
        .collect();
    extra.sort();
    extra.dedup();
    names.extend(extra);
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let k = names.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (p, g) in pred.iter().zip(gold) {
        confusion[index[g.as_ref()]][index[p.as_ref()]] += 1;
    }
    let n = pred.len() as u64;
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();

    let mut per_class = BTreeMap::new();
    let (mut macro_sum, mut macro_n, mut weighted) = (0.0, 0usize, 0.0);
    for (i, name) in names.iter().enumerate() {
        let tp = confusion[i][i];
        let support: u64 = confusion[i].iter().sum();
        let predicted: u64 = (0..k).map(|r| confusion[r][i]).sum();
        let (p, r) = (ratio(tp, predicted), ratio(tp, support));
        let score = f1(p, r);
        if support > 0 || predicted > 0 {
            macro_sum += score;
            macro_n += 1;
        }
        weighted += score * support as f64;
        per_class.insert(
            name.clone(),
            ClassScores {
                precision: p,
                recall: r,
                f1: score,
                support,
            },
        );
    }
    let accuracy = ratio(correct, n);
    Ok(EvalReport {
        // Single-label: micro precision = micro recall = accuracy.
        f1_micro: accuracy,
        f1_macro: macro_sum / macro_n as f64,
        f1_weighted: weighted / n as f64,
        accuracy,
        per_class_f1: per_class.iter().map(|(k, v)| (k.clone(), v.f1)).collect(),
        per_class,
        class_names: names,
        confusion,
        n_test: pred.len(),
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Confusion matrix with gold classes as rows and predictions as columns.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for n in &self.class_names {
            write!(out, ",{}", csv_field(n)).unwrap();
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            out.push_str(&csv_field(name));
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_two_class_example() {
        let r = evaluate_f1(&["A", "B", "B", "B"], &["A", "A", "B", "B"], &["A", "B"]).unwrap();
        assert!((r.per_class_f1["A"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class_f1["B"] - 0.8).abs() < 1e-12);
        assert!((r.f1_macro - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
        assert!((r.f1_weighted - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
        assert!((r.f1_micro - 0.75).abs() < 1e-12);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn perfect_prediction() {
        let y = ["x", "y", "z", "x"];
        let r = evaluate_f1(&y, &y, &["x", "y", "z"]).unwrap();
        assert_eq!((r.f1_micro, r.f1_macro, r.f1_weighted), (1.0, 1.0, 1.0));
        assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn unseen_labels_are_appended_and_absent_classes_skip_macro() {
        let r = evaluate_f1(&["a", "q"], &["a", "a"], &["a", "b"]).unwrap();
        assert_eq!(r.class_names, vec!["a", "b", "q"]);
        // b appears nowhere; the macro mean covers a and q only.
        assert!((r.f1_macro - (2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors_and_exports() {
        assert!(matches!(
            evaluate_f1(&["a"], &["a", "b"], &["a"]),
            Err(ClassifyError::LengthMismatch { .. })
        ));
        assert!(matches!(evaluate_f1::<&str, &str>(&[], &[], &[]), Err(ClassifyError::EmptyInput)));
        let r = evaluate_f1(&["a", "b,c"], &["a", "a"], &["a", "b,c"]).unwrap();
        assert_eq!(r.confusion_csv(), "gold\\pred,a,\"b,c\"\na,1,1\n\"b,c\",0,0\n");
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    fn labelled_pairs() -> impl Strategy<Value = Vec<(u8, u8)>> {
        prop::collection::vec((0u8..4, 0u8..4), 1..60)
    }

    proptest! {
        #[test]
        fn report_is_permutation_invariant(pairs in labelled_pairs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let names = ["0", "1", "2", "3"];
            let to = |v: &[(u8, u8)]| -> (Vec<String>, Vec<String>) {
                (v.iter().map(|p| p.0.to_string()).collect(), v.iter().map(|p| p.1.to_string()).collect())
            };
            let (p, g) = to(&pairs);
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut crate::util::rng(seed));
            let (ps, gs) = to(&shuffled);
            prop_assert_eq!(evaluate_f1(&p, &g, &names).unwrap(), evaluate_f1(&ps, &gs, &names).unwrap());
        }

        #[test]
        fn micro_f1_is_accuracy_and_scores_are_bounded(pairs in labelled_pairs()) {
            let p: Vec<String> = pairs.iter().map(|x| x.0.to_string()).collect();
            let g: Vec<String> = pairs.iter().map(|x| x.1.to_string()).collect();
            let r = evaluate_f1(&p, &g, &["0", "1", "2", "3"]).unwrap();
            let acc = pairs.iter().filter(|x| x.0 == x.1).count() as f64 / pairs.len() as f64;
            prop_assert!((r.f1_micro - acc).abs() < 1e-12);
            // Oracle for micro-F1 from pooled counts.
            let tp: u64 = (0..r.class_names.len()).map(|i| r.confusion[i][i]).sum();
            let fp_fn: u64 = r.confusion.iter().flatten().sum::<u64>() - tp;
            let micro = 2.0 * tp as f64 / (2.0 * tp as f64 + 2.0 * fp_fn as f64);
            prop_assert!((r.f1_micro - micro).abs() < 1e-12);
            for v in [r.f1_micro, r.f1_macro, r.f1_weighted] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(r.confusion.iter().flatten().sum::<u64>() as usize, r.n_test);
        }
    }
}
