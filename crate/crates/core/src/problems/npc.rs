//! Neyman-Pearson classification: minimize the loss of one class (or the
//! overall loss) while bounding per-class losses.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomsub::BoxDomain;
use crate::linalg::{axpy, dot, norm_sq};
use crate::oracle::{ConstrainedProblem, ConvexFunction, Oracle, Quadratic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpcMode {
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NpcHyper {
    /// Ridge weight on the binary objective.
    pub rho: f64,
    /// Loss bound for class -1 in binary mode.
    pub kappa: f64,
    /// Per-class loss bounds in multiclass mode; a single entry is broadcast.
    pub class_kappa: Vec<f64>,
    /// Radius of the weight ball.
    pub radius: f64,
}

impl Default for NpcHyper {
    fn default() -> Self {
        NpcHyper {
            rho: 0.01,
            kappa: 0.5,
            class_kappa: vec![0.8],
            radius: 7.0,
        }
    }
}

/// Samples in rows, labels `{-1, +1}` (binary) or `1..=J` (multiclass).
#[derive(Debug, Clone, PartialEq)]
pub struct NpcDataset {
    pub n: usize,
    pub d: usize,
    /// Row-major `n x d`.
    pub features: Vec<f64>,
    pub labels: Vec<i64>,
}

impl NpcDataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn count(&self, label: i64) -> usize {
        self.labels.iter().filter(|&&y| y == label).count()
    }

    /// Feature rows with the given label, concatenated.
    fn rows_with(&self, label: i64) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.n {
            if self.labels[i] == label {
                out.extend_from_slice(self.row(i));
            }
        }
        out
    }
}

/// Reads a comma-separated file whose last column is an integer label.
/// Row numbers in errors are 1-based and count the header line.
pub fn read_npc_csv(path: &Path, has_header: bool) -> Result<NpcDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Ingest {
            row: 0,
            message: e.to_string(),
        })?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut d = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1 + usize::from(has_header);
        let rec = rec.map_err(|e| Error::Ingest {
            row,
            message: e.to_string(),
        })?;
        if rec.len() < 2 {
            return Err(Error::Ingest {
                row,
                message: "need at least one feature and a label".into(),
            });
        }
        let width = rec.len() - 1;
        match d {
            None => d = Some(width),
            Some(w) if w != width => {
                return Err(Error::Ingest {
                    row,
                    message: format!("expected {} features, found {width}", w),
                })
            }
            _ => {}
        }
        for field in rec.iter().take(width) {
            let v: f64 = field.parse().map_err(|_| Error::Ingest {
                row,
                message: format!("bad feature value {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    row,
                    message: format!("non-finite feature value {field:?}"),
                });
            }
            features.push(v);
        }
        let label = &rec[width];
        let y: i64 = label
            .parse()
            .or_else(|_| {
                label
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0)
                    .map(|v| v as i64)
                    .ok_or(())
            })
            .map_err(|_| Error::Ingest {
                row,
                message: format!("bad label {label:?}"),
            })?;
        labels.push(y);
    }
    let d = d.ok_or(Error::Ingest {
        row: 0,
        message: "no data rows".into(),
    })?;
    Ok(NpcDataset {
        n: labels.len(),
        d,
        features,
        labels,
    })
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `(1/n) sum_i log(1 + exp(sign * x_i . w)) + (rho/2) ||w||^2` over the rows
/// of one class.
fn logistic_mean(rows: &[f64], d: usize, sign: f64, rho: f64, w: &[f64]) -> (f64, Vec<f64>) {
    let n = rows.len() / d;
    let mut value = 0.0;
    let mut grad = vec![0.0; d];
    for x in rows.chunks_exact(d) {
        let t = sign * dot(x, w);
        value += softplus(t);
        axpy(sign * sigmoid(t), x, &mut grad);
    }
    let inv = 1.0 / n as f64;
    value *= inv;
    for (g, wi) in grad.iter_mut().zip(w) {
        *g = *g * inv + rho * wi;
    }
    (value + 0.5 * rho * norm_sq(w), grad)
}

/// Mean class-1 logistic loss plus a ridge term.
pub struct BinaryObjective {
    rows: Vec<f64>,
    d: usize,
    rho: f64,
}

impl ConvexFunction for BinaryObjective {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok(logistic_mean(&self.rows, self.d, 1.0, self.rho, w))
    }
}

/// Mean class-(-1) logistic loss minus `kappa`.
pub struct BinaryConstraintLoss {
    rows: Vec<f64>,
    d: usize,
    kappa: f64,
}

impl ConvexFunction for BinaryConstraintLoss {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = logistic_mean(&self.rows, self.d, -1.0, 0.0, w);
        Ok((v - self.kappa, g))
    }
}

/// Mean cross-entropy of the samples in `rows` (labels `classes`, 0-based)
/// under a softmax model with stacked weights `W = [w_1; ...; w_J]`.
struct CrossEntropy {
    data: Arc<NpcDataset>,
    /// Indices of the samples included and their 0-based class.
    samples: Vec<(usize, usize)>,
    classes: usize,
    offset: f64,
}

impl ConvexFunction for CrossEntropy {
    fn dim(&self) -> usize {
        self.classes * self.data.d
    }

    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.data.d;
        let j_count = self.classes;
        let mut value = 0.0;
        let mut grad = vec![0.0; j_count * d];
        let mut scores = vec![0.0; j_count];
        for &(i, yi) in &self.samples {
            let x = self.data.row(i);
            for (j, s) in scores.iter_mut().enumerate() {
                *s = dot(x, &w[j * d..(j + 1) * d]);
            }
            let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
            let lse = mx + z.ln();
            value += lse - scores[yi];
            for j in 0..j_count {
                let pj = (scores[j] - lse).exp();
                let coef = pj - if j == yi { 1.0 } else { 0.0 };
                axpy(coef, x, &mut grad[j * d..(j + 1) * d]);
            }
        }
        let inv = 1.0 / self.samples.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok((value * inv - self.offset, grad))
    }
}

fn ball(dim: usize, radius: f64) -> Oracle {
    // ||w||^2 - r^2 = 0.5 w^T (2I) w - r^2
    Oracle::new(
        "ball",
        Quadratic::diagonal(&vec![2.0; dim], vec![0.0; dim], -radius * radius),
    )
}

fn check_hyper(h: &NpcHyper) -> Result<()> {
    if !(h.radius > 0.0) || !(h.rho >= 0.0) || !h.kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "NPC hyperparameters need radius > 0, rho >= 0 and finite kappa, got {h:?}"
        )));
    }
    Ok(())
}

/// Builds the NPC problem. The ball `||w|| <= r` is the last constraint and
/// the box is `[-r, r]^dim`.
pub fn npc_problem(data: &NpcDataset, mode: NpcMode, hyper: &NpcHyper) -> Result<ConstrainedProblem> {
    check_hyper(hyper)?;
    let d = data.d;
    match mode {
        NpcMode::Binary => {
            if let Some((i, y)) = data.labels.iter().enumerate().find(|(_, y)| **y != 1 && **y != -1) {
                return Err(Error::Ingest {
                    row: i + 1,
                    message: format!("binary labels must be -1 or 1, got {y}"),
                });
            }
            for label in [1, -1] {
                if data.count(label) == 0 {
                    return Err(Error::Ingest {
                        row: 0,
                        message: format!("class {label} is empty"),
                    });
                }
            }
            let f = Oracle::new(
                "class+1-loss",
                BinaryObjective {
                    rows: data.rows_with(1),
                    d,
                    rho: hyper.rho,
                },
            );
            let g = Oracle::new(
                "class-1-loss",
                BinaryConstraintLoss {
                    rows: data.rows_with(-1),
                    d,
                    kappa: hyper.kappa,
                },
            );
            ConstrainedProblem::new(
                format!("npc-binary-n{}-d{d}", data.n),
                f,
                vec![g, ball(d, hyper.radius)],
                BoxDomain::cube(d, -hyper.radius, hyper.radius)?,
            )
        }
        NpcMode::Multiclass => {
            let classes = data.labels.iter().cloned().max().unwrap_or(0);
            if let Some((i, y)) = data.labels.iter().enumerate().find(|(_, y)| **y < 1) {
                return Err(Error::Ingest {
                    row: i + 1,
                    message: format!("multiclass labels must be 1..J, got {y}"),
                });
            }
            if classes < 2 {
                return Err(Error::Ingest {
                    row: 0,
                    message: "need at least two classes".into(),
                });
            }
            let classes = classes as usize;
            let kappas: Vec<f64> = match hyper.class_kappa.len() {
                1 => vec![hyper.class_kappa[0]; classes],
                k if k == classes => hyper.class_kappa.clone(),
                k => {
                    return Err(Error::InvalidParameter(format!(
                        "class_kappa has {k} entries for {classes} classes"
                    )))
                }
            };
            let shared = Arc::new(data.clone());
            let all: Vec<(usize, usize)> = data
                .labels
                .iter()
                .enumerate()
                .map(|(i, &y)| (i, y as usize - 1))
                .collect();
            let f = Oracle::new(
                "cross-entropy",
                CrossEntropy {
                    data: shared.clone(),
                    samples: all.clone(),
                    classes,
                    offset: 0.0,
                },
            );
            let mut g = Vec::with_capacity(classes + 1);
            for (j, &kappa) in kappas.iter().enumerate() {
                let samples: Vec<(usize, usize)> = all.iter().cloned().filter(|s| s.1 == j).collect();
                if samples.is_empty() {
                    return Err(Error::Ingest {
                        row: 0,
                        message: format!("class {} is empty", j + 1),
                    });
                }
                g.push(Oracle::new(
                    format!("class{}-loss", j + 1),
                    CrossEntropy {
                        data: shared.clone(),
                        samples,
                        classes,
                        offset: kappa,
                    },
                ));
            }
            let dim = classes * d;
            g.push(ball(dim, hyper.radius));
            ConstrainedProblem::new(
                format!("npc-multiclass-n{}-d{d}-j{classes}", data.n),
                f,
                g,
                BoxDomain::cube(dim, -hyper.radius, hyper.radius)?,
            )
        }
    }
}

pub fn load_npc(path: &Path, has_header: bool, mode: NpcMode, hyper: &NpcHyper) -> Result<ConstrainedProblem> {
    npc_problem(&read_npc_csv(path, has_header)?, mode, hyper)
}

/// Gaussian blobs: class `j` is centered at `separation * e_j` (cycling over
/// coordinates) with unit variance. Labels are `{-1, 1}` for two binary
/// classes, `1..=classes` otherwise.
pub fn blobs(seed: u64, per_class: usize, d: usize, classes: usize, separation: f64, mode: NpcMode) -> NpcDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(per_class * classes * d);
    let mut labels = Vec::with_capacity(per_class * classes);
    for j in 0..classes {
        let label = match mode {
            NpcMode::Binary => {
                if j == 0 {
                    1
                } else {
                    -1
                }
            }
            NpcMode::Multiclass => j as i64 + 1,
        };
        for _ in 0..per_class {
            for k in 0..d {
                let center = if k == j % d.max(1) { separation } else { 0.0 };
                let noise: f64 = StandardNormal.sample(&mut rng);
                features.push(center + noise);
            }
            labels.push(label);
        }
    }
    NpcDataset {
        n: labels.len(),
        d,
        features,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn binary_at_zero_is_log_two() {
        let data = blobs(1, 10, 3, 2, 2.0, NpcMode::Binary);
        let p = npc_problem(&data, NpcMode::Binary, &NpcHyper::default()).unwrap();
        let ev = p.evaluate(&[0.0; 3]).unwrap();
        assert!((ev.objective() - 2f64.ln()).abs() < 1e-15);
        assert!((ev.constraints()[0] - (2f64.ln() - 0.5)).abs() < 1e-15);
        assert_eq!(ev.constraints()[1], -49.0);
    }

    #[test]
    fn multiclass_at_zero_is_log_j() {
        let data = blobs(2, 5, 2, 3, 3.0, NpcMode::Multiclass);
        let p = npc_problem(&data, NpcMode::Multiclass, &NpcHyper::default()).unwrap();
        assert_eq!(p.dim(), 6);
        let ev = p.evaluate(&[0.0; 6]).unwrap();
        for j in 0..3 {
            assert!((ev.constraints()[j] - (3f64.ln() - 0.8)).abs() < 1e-14);
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn csv_errors_carry_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,y\n1.0,2.0,1\n3.0,oops,-1").unwrap();
        match read_npc_csv(f.path(), true) {
            Err(Error::Ingest { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected ingest error, got {other:?}"),
        }
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0,2.0,1\n3.0,4.0,1").unwrap();
        let data = read_npc_csv(f.path(), false).unwrap();
        assert!(matches!(
            npc_problem(&data, NpcMode::Binary, &NpcHyper::default()),
            Err(Error::Ingest { .. })
        ));
    }
}
