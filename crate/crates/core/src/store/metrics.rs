use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(truth: &[usize], pred: &[usize], classes: Vec<String>) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Shape {
                expected: truth.len(),
                got: pred.len(),
            });
        }
        let k = classes.len();
        let mut counts = vec![vec![0; k]; k];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= k || p >= k {
                return Err(Error::Label(format!(
                    "class index {} outside {k} classes",
                    t.max(p)
                )));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> usize {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Accuracy and macro-averaged precision, recall and F1, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<String>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Classes absent from both the truth and the predictions are left out of
/// the macro averages. A class that is never predicted gets precision 0 and
/// a warning.
pub fn compute_metrics(
    truth: &[usize],
    pred: &[usize],
    classes: Vec<String>,
) -> Result<MetricsReport> {
    if truth.is_empty() {
        return Err(Error::Domain("metrics over an empty evaluation set".into()));
    }
    let cm = ConfusionMatrix::new(truth, pred, classes)?;
    let mut per_class = Vec::new();
    let mut warnings = Vec::new();
    let (mut sp, mut sr, mut sf, mut m) = (0.0, 0.0, 0.0, 0usize);
    for (c, name) in cm.classes.iter().enumerate() {
        let (tp, support, predicted) = (cm.counts[c][c], cm.support(c), cm.predicted(c));
        if support == 0 && predicted == 0 {
            continue;
        }
        if predicted == 0 {
            warnings.push(format!(
                "class {name} was never predicted; precision set to 0"
            ));
        }
        let (p, r) = (ratio(tp, predicted), ratio(tp, support));
        let f1 = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class: name.clone(),
            precision: 100.0 * p,
            recall: 100.0 * r,
            f1: 100.0 * f1,
            support,
        });
        sp += p;
        sr += r;
        sf += f1;
        m += 1;
    }
    let correct: usize = (0..cm.classes.len()).map(|c| cm.counts[c][c]).sum();
    let m = m as f64;
    Ok(MetricsReport {
        accuracy: 100.0 * ratio(correct, cm.total()),
        precision: 100.0 * sp / m,
        recall: 100.0 * sr / m,
        f1: 100.0 * sf / m,
        per_class,
        confusion: cm,
        warnings,
    })
}
