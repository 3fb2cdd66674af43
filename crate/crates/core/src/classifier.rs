//! Multinomial softmax regression trained by plain SGD, with classes that can
//! be registered mid-stream.

use std::io::{BufRead, Write};

use crate::domain::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierState {
    /// Row-major, one row of `dim + 1` weights per class; the last column is
    /// the bias.
    weights: Vec<f64>,
    classes: Vec<Label>,
    dim: usize,
    learning_rate: f64,
}

impl ClassifierState {
    /// Zero-initialized classifier over `classes`.
    pub fn new(dim: usize, classes: Vec<Label>, learning_rate: f64) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &classes {
            if !seen.insert(*c) {
                return Err(Error::DuplicateLabel(c.to_string()));
            }
        }
        Ok(Self {
            weights: vec![0.0; classes.len() * (dim + 1)],
            classes,
            dim,
            learning_rate,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_registered(&self, label: Label) -> bool {
        self.classes.contains(&label)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, class: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.weights[class * w..(class + 1) * w]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn class_index(&self, label: Label) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::UnregisteredLabel(label.to_string()))
    }

    /// `w_c · [x; 1]` for every registered class.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let w = self.dim + 1;
        self.weights
            .chunks_exact(w)
            .map(|row| {
                row[..self.dim]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + row[self.dim]
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(softmax(&self.logits(x)))
    }

    /// Most probable registered label; ties go to the lowest registry index.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let p = self.predict_proba(x)?;
        Ok(self.classes[argmax(&p)])
    }

    /// Cross-entropy `-ln p_y(x)`.
    pub fn loss(&self, x: &[f64], y: Label) -> Result<f64> {
        let yi = self.class_index(y)?;
        self.check_dim(x)?;
        let z = self.logits(x);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        Ok(lse - z[yi])
    }

    /// Gradient of [`loss`](Self::loss) with respect to the flattened weights.
    pub fn loss_gradient(&self, x: &[f64], y: Label) -> Result<Vec<f64>> {
        let yi = self.class_index(y)?;
        let p = self.predict_proba(x)?;
        let w = self.dim + 1;
        let mut g = vec![0.0; self.weights.len()];
        for (c, row) in g.chunks_exact_mut(w).enumerate() {
            let coef = p[c] - if c == yi { 1.0 } else { 0.0 };
            for (gi, xi) in row[..self.dim].iter_mut().zip(x) {
                *gi = coef * xi;
            }
            row[self.dim] = coef;
        }
        Ok(g)
    }

    /// One SGD step on the cross-entropy of `(x, y)`.
    pub fn learn(&mut self, x: &[f64], y: Label) -> Result<()> {
        let g = self.loss_gradient(x, y)?;
        let lr = self.learning_rate;
        for (w, gi) in self.weights.iter_mut().zip(g) {
            *w -= lr * gi;
        }
        Ok(())
    }

    /// Registers a new class with a zero weight row.
    pub fn add_class(&mut self, label: Label) -> Result<()> {
        if self.is_registered(label) {
            return Err(Error::DuplicateLabel(label.to_string()));
        }
        self.classes.push(label);
        self.weights.extend(std::iter::repeat_n(0.0, self.dim + 1));
        Ok(())
    }

    /// Writes the model as text: a header line, then one line per class with
    /// the label followed by its `dim + 1` weights at 17 significant digits.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "softmax classes={} dim={} lr={:.16e}",
            self.classes.len(),
            self.dim,
            self.learning_rate
        )?;
        for (c, label) in self.classes.iter().enumerate() {
            write!(out, "{label}")?;
            for w in self.row(c) {
                write!(out, " {w:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty model file".into(),
        })?;
        let header = header?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("softmax") {
            return Err(Error::Parse {
                line: 1,
                message: "missing 'softmax' header".into(),
            });
        }
        let mut n_classes = None;
        let mut dim = None;
        let mut lr = None;
        for f in fields {
            let bad = || Error::Parse {
                line: 1,
                message: format!("bad header field {f:?}"),
            };
            let (k, v) = f.split_once('=').ok_or_else(bad)?;
            match k {
                "classes" => n_classes = Some(v.parse::<usize>().map_err(|_| bad())?),
                "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
                "lr" => lr = Some(v.parse::<f64>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let (n_classes, dim, lr) = match (n_classes, dim, lr) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "header needs classes, dim and lr".into(),
                })
            }
        };
        let mut classes = Vec::with_capacity(n_classes);
        let mut weights = Vec::with_capacity(n_classes * (dim + 1));
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 1;
            let mut fields = line.split_whitespace();
            let label: Label = fields
                .next()
                .unwrap_or_default()
                .parse()
                .map_err(|e: Error| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
            let row: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("bad weight {f:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != dim + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} weights, got {}", dim + 1, row.len()),
                });
            }
            classes.push(label);
            weights.extend(row);
        }
        if classes.len() != n_classes {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "header declares {n_classes} classes, found {}",
                    classes.len()
                ),
            });
        }
        let mut state = Self::new(dim, classes, lr)?;
        state.weights = weights;
        Ok(state)
    }
}

/// Numerically stable softmax (max-logit subtraction).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_class(dim: usize) -> ClassifierState {
        ClassifierState::new(dim, vec![Label::Known(0), Label::Known(1)], 0.01).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform() {
        let s = ClassifierState::new(3, (0..4).map(Label::Known).collect(), 0.01).unwrap();
        for p in s.predict_proba(&[1.0, -2.0, 7.0]).unwrap() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[3.0, 3.0]), vec![0.5, 0.5]);
        let p = softmax(&[1.0, 0.0]);
        assert_abs_diff_eq!(p[0], 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(p[1], 0.2689, epsilon = 1e-4);
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn predict_ties_go_to_first() {
        let s = two_class(2);
        assert_eq!(s.predict(&[5.0, 5.0]).unwrap(), Label::Known(0));
        let mut s = two_class(1);
        s.weights_mut().copy_from_slice(&[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.predict(&[1.0]).unwrap(), Label::Known(0));
        assert_eq!(s.predict(&[-1.0]).unwrap(), Label::Known(1));
    }

    #[test]
    fn learn_hand_gradient() {
        let mut s = two_class(2);
        s.learn(&[1.0, 0.0], Label::Known(0)).unwrap();
        assert_abs_diff_eq!(s.row(0)[0], 0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(s.row(0)[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.row(0)[2], 0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(s.row(1)[0], -0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(s.row(1)[2], -0.005, epsilon = 1e-15);
    }

    #[test]
    fn learn_with_zero_rate_is_a_no_op() {
        let mut s = ClassifierState::new(2, vec![Label::Known(0), Label::Known(1)], 0.0).unwrap();
        s.weights_mut()
            .copy_from_slice(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let before = s.clone();
        s.learn(&[1.0, 2.0], Label::Known(1)).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn learn_rejects_unregistered() {
        let mut s = two_class(2);
        assert!(matches!(
            s.learn(&[1.0, 0.0], Label::Unknown),
            Err(Error::UnregisteredLabel(_))
        ));
        assert!(s.learn(&[1.0], Label::Known(0)).is_err());
    }

    #[test]
    fn add_class_appends_zero_row() {
        let mut s = two_class(2);
        s.learn(&[1.0, 2.0], Label::Known(0)).unwrap();
        let old = s.weights().to_vec();
        s.add_class(Label::Unknown).unwrap();
        assert_eq!(s.n_classes(), 3);
        assert_eq!(&s.weights()[..6], &old[..]);
        let x = [0.3, -0.7];
        let p = s.predict_proba(&x).unwrap();
        let z = s.logits(&x);
        assert_eq!(z[2], 0.0);
        let expect = 1.0 / (z[0].exp() + z[1].exp() + 1.0);
        assert_abs_diff_eq!(p[2], expect, epsilon = 1e-12);
        assert!(matches!(
            s.add_class(Label::Unknown),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn learning_new_class_raises_its_probability() {
        let mut s = two_class(2);
        s.learn(&[1.0, 1.0], Label::Known(0)).unwrap();
        s.add_class(Label::Unknown).unwrap();
        let x = [4.0, -1.0];
        let before = s.predict_proba(&x).unwrap()[2];
        s.learn(&x, Label::Unknown).unwrap();
        assert!(s.predict_proba(&x).unwrap()[2] > before);
    }

    #[test]
    fn separable_points_are_fit() {
        let pts = [
            ([2.0, 1.0], 0),
            ([1.5, 2.5], 0),
            ([3.0, 0.5], 0),
            ([-1.0, -2.0], 1),
            ([-2.5, -0.5], 1),
            ([-0.5, -3.0], 1),
        ];
        let mut s = two_class(2);
        for _ in 0..200 {
            for (x, y) in &pts {
                s.learn(x, Label::Known(*y)).unwrap();
            }
        }
        let acc = pts
            .iter()
            .filter(|(x, y)| s.predict(x).unwrap() == Label::Known(*y))
            .count();
        assert_eq!(acc, pts.len());
    }

    #[test]
    fn dump_load_round_trip_is_exact() {
        let mut s = ClassifierState::new(3, vec![Label::Known(0), Label::Known(1)], 0.01).unwrap();
        s.add_class(Label::Unknown).unwrap();
        for (i, w) in s.weights_mut().iter_mut().enumerate() {
            *w = (i as f64 * 0.1).sin() / 3.0 + 1e-300 * i as f64;
        }
        let mut buf = Vec::new();
        s.dump(&mut buf).unwrap();
        let back = ClassifierState::load(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn load_reports_bad_rows() {
        let text = "softmax classes=2 dim=1 lr=0.01\n0 1.0 2.0\n1 1.0\n";
        assert!(matches!(
            ClassifierState::load(text.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
