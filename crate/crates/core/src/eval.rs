//! Confusion matrices and per-class precision, recall, F-measure and accuracy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[a][p]` is the number of records of actual class `a` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and their harmonic mean. Any 0/0 yields 0.
pub fn precision_recall_f(bc: &BinaryCounts) -> (f64, f64, f64) {
    let precision = ratio(bc.tp, bc.tp + bc.fp);
    let recall = ratio(bc.tp, bc.tp + bc.fn_);
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f)
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    /// Tallies label indices into a `k`-class matrix.
    pub fn from_indices(classes: Vec<String>, actual: &[usize], predicted: &[usize]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::Length {
                expected: actual.len(),
                got: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::new(classes);
        let k = cm.classes.len();
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= k || p >= k {
                return Err(Error::UnknownLabel(format!("class index {}", a.max(p))));
            }
            cm.counts[a][p] += 1;
        }
        Ok(cm)
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("confusion counts must be K x K".into()));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    fn class_index(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::UnknownLabel(class.to_string()))
    }

    /// One-vs-rest counts for `class`.
    pub fn binary_counts(&self, class: &str) -> Result<BinaryCounts> {
        Ok(self.binary_counts_at(self.class_index(class)?))
    }

    pub fn binary_counts_at(&self, c: usize) -> BinaryCounts {
        let k = self.classes.len();
        let tp = self.counts[c][c];
        let fp = (0..k).filter(|&a| a != c).map(|a| self.counts[a][c]).sum();
        let fn_ = (0..k).filter(|&p| p != c).map(|p| self.counts[c][p]).sum();
        let tn = self.total() - tp - fp - fn_;
        BinaryCounts { tp, fp, tn, fn_ }
    }

    /// trace / total.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(self.trace() as f64 / total as f64)
    }

    /// (TP + FN) / total for one class: the share of records whose actual
    /// class is `class`.
    pub fn prevalence(&self, class: &str) -> Result<f64> {
        let bc = self.binary_counts(class)?;
        Ok(ratio(bc.tp + bc.fn_, bc.total()))
    }
}

/// Builds a matrix from string labels against a fixed catalog.
pub fn confusion_matrix<A: AsRef<str>, P: AsRef<str>>(
    actual: &[A],
    predicted: &[P],
    catalog: &[String],
) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::Length {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    let index = |l: &str| {
        catalog
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let a: Vec<usize> = actual.iter().map(|l| index(l.as_ref())).collect::<Result<_>>()?;
    let p: Vec<usize> = predicted.iter().map(|l| index(l.as_ref())).collect::<Result<_>>()?;
    ConfusionMatrix::from_indices(catalog.to_vec(), &a, &p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub support: u64,
    /// Precision or recall fell back to the 0/0 convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassReport>,
    pub accuracy: f64,
    #[serde(rename = "macro")]
    pub macro_avg: MacroAverage,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_matrix(cm: ConfusionMatrix) -> Result<Self> {
        let accuracy = cm.accuracy()?;
        let classes: Vec<ClassReport> = (0..cm.classes().len())
            .map(|c| {
                let bc = cm.binary_counts_at(c);
                let (precision, recall, f_measure) = precision_recall_f(&bc);
                ClassReport {
                    class: cm.classes()[c].clone(),
                    precision,
                    recall,
                    f_measure,
                    support: bc.tp + bc.fn_,
                    degenerate: bc.tp + bc.fp == 0 || bc.tp + bc.fn_ == 0,
                }
            })
            .collect();
        let k = classes.len().max(1) as f64;
        let macro_avg = MacroAverage {
            precision: classes.iter().map(|c| c.precision).sum::<f64>() / k,
            recall: classes.iter().map(|c| c.recall).sum::<f64>() / k,
            f_measure: classes.iter().map(|c| c.f_measure).sum::<f64>() / k,
        };
        Ok(EvalReport {
            classes,
            accuracy,
            macro_avg,
            confusion: cm,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("report: {e}")))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .classes
            .iter()
            .map(|c| c.class.len())
            .max()
            .unwrap_or(5)
            .max(9);
        writeln!(
            f,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            "class", "precision", "recall", "f_measure", "support"
        )?;
        for c in &self.classes {
            writeln!(
                f,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}{}",
                c.class,
                c.precision,
                c.recall,
                c.f_measure,
                c.support,
                if c.degenerate { "  (degenerate)" } else { "" }
            )?;
        }
        writeln!(
            f,
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
            "macro avg", self.macro_avg.precision, self.macro_avg.recall, self.macro_avg.f_measure
        )?;
        writeln!(f, "accuracy {:.4} ({} / {})", self.accuracy, self.confusion.trace(), self.confusion.total())?;
        writeln!(f)?;
        writeln!(f, "confusion matrix (rows = actual, columns = predicted)")?;
        let cell = self
            .confusion
            .counts()
            .iter()
            .flatten()
            .map(|n| n.to_string().len())
            .max()
            .unwrap_or(1)
            .max(3);
        for (i, row) in self.confusion.counts().iter().enumerate() {
            write!(f, "{:<width$}", self.confusion.classes()[i])?;
            for n in row {
                write!(f, " {n:>cell$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
