//! Straightforward reference implementations used to produce and check
//! golden values. Nothing here calls the library's numeric kernels; only
//! the seeded random draws are taken from it.

#![allow(dead_code)]

use std::path::PathBuf;

use cnnelm::dataset::{load_csv, Label, Manifest, RadioMap};
use cnnelm::elm::init_hidden;
use cnnelm::featurizer::{init_featurizer, FeaturizerOverrides};

pub type Mat = Vec<Vec<f64>>;

pub fn to_rows(m: &cnnelm::DenseMatrix) -> Mat {
    m.row_iter().map(|r| r.to_vec()).collect()
}

/// Powed transform followed by per-feature unit norm, both fitted on
/// `train`.
pub fn preprocess(train: &Mat, test: &Mat) -> (Mat, Mat) {
    let mut min = 0.0f64;
    for row in train {
        for &v in row {
            if v != 0.0 && v < min {
                min = v;
            }
        }
    }
    let e = std::f64::consts::E;
    let pw = |m: &Mat| -> Mat {
        m.iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        if v == 0.0 {
                            0.0
                        } else {
                            let x = (v - min) / (-min);
                            x.clamp(0.0, 1.0).powf(e)
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let ptr = pw(train);
    let pte = pw(test);
    let d = ptr[0].len();
    let norms: Vec<f64> = (0..d)
        .map(|j| ptr.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect();
    let scale = |m: Mat| -> Mat {
        m.into_iter()
            .map(|row| {
                row.into_iter()
                    .zip(&norms)
                    .map(|(v, &n)| if n > 0.0 { v / n } else { v })
                    .collect()
            })
            .collect()
    };
    (scale(ptr), scale(pte))
}

/// 1-NN by sorting all distances; ties go to the earlier row.
pub fn nearest_neighbour(train: &Mat, labels: &[Label], query: &Mat) -> Vec<Label> {
    query
        .iter()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            labels[d[0].1]
        })
        .collect()
}

/// Same-padded stride-1 convolution with `filters[tap][f]`, |.|, pairwise
/// average pooling and channel-last flattening.
pub fn conv_features(x: &Mat, filters: &[Vec<f64>], bias: &[f64]) -> Mat {
    let k = filters.len();
    let nf = bias.len();
    let pad = (k - 1) / 2;
    x.iter()
        .map(|row| {
            let n = row.len();
            let at = |i: isize| -> f64 {
                if i < 0 || i as usize >= n {
                    0.0
                } else {
                    row[i as usize]
                }
            };
            let conv: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..nf)
                        .map(|f| {
                            let mut s = bias[f];
                            for (t, tap) in filters.iter().enumerate() {
                                s += at(i as isize + t as isize - pad as isize) * tap[f];
                            }
                            s.abs()
                        })
                        .collect()
                })
                .collect();
            let mut out = Vec::with_capacity(n / 2 * nf);
            for j in 0..n / 2 {
                for f in 0..nf {
                    out.push((conv[2 * j][f] + conv[2 * j + 1][f]) / 2.0);
                }
            }
            out
        })
        .collect()
}

pub fn hidden(x: &Mat, w: &Mat, b: &[f64]) -> Mat {
    x.iter()
        .map(|row| {
            (0..b.len())
                .map(|i| {
                    let z: f64 = row.iter().zip(w).map(|(xk, wk)| xk * wk[i]).sum::<f64>() + b[i];
                    z.tanh()
                })
                .collect()
        })
        .collect()
}

/// Least-squares solution of `[H; I/sqrt(c)] beta = [T; 0]` by Householder
/// QR, i.e. the ridge solution with shift 1/c.
pub fn ridge_qr(h: &Mat, t: &Mat, c: f64) -> Mat {
    let n = h.len();
    let l = h[0].len();
    let m = t[0].len();
    let rows = n + l;
    let mut a: Mat = h.clone();
    let mut b: Mat = t.clone();
    let s = (1.0 / c).sqrt();
    for i in 0..l {
        let mut r = vec![0.0; l];
        r[i] = s;
        a.push(r);
        b.push(vec![0.0; m]);
    }
    for k in 0..l {
        let norm = (k..rows).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..l {
            let dot: f64 = (k..rows).map(|i| v[i - k] * a[i][j]).sum();
            let f = 2.0 * dot / vv;
            for i in k..rows {
                a[i][j] -= f * v[i - k];
            }
        }
        for j in 0..m {
            let dot: f64 = (k..rows).map(|i| v[i - k] * b[i][j]).sum();
            let f = 2.0 * dot / vv;
            for i in k..rows {
                b[i][j] -= f * v[i - k];
            }
        }
    }
    let mut beta = vec![vec![0.0; m]; l];
    for j in 0..m {
        for i in (0..l).rev() {
            let mut s = b[i][j];
            for p in i + 1..l {
                s -= a[i][p] * beta[p][j];
            }
            beta[i][j] = s / a[i][i];
        }
    }
    beta
}

/// `H^T H beta - H^T T + beta / c`, half the gradient of the ridge objective.
pub fn ridge_gradient(h: &Mat, t: &Mat, beta: &Mat, c: f64) -> Mat {
    let l = beta.len();
    let m = beta[0].len();
    let resid: Mat = h
        .iter()
        .zip(t)
        .map(|(hr, tr)| {
            (0..m)
                .map(|j| hr.iter().zip(beta).map(|(x, br)| x * br[j]).sum::<f64>() - tr[j])
                .collect()
        })
        .collect();
    (0..l)
        .map(|i| {
            (0..m)
                .map(|j| {
                    h.iter()
                        .zip(&resid)
                        .map(|(hr, rr)| hr[i] * rr[j])
                        .sum::<f64>()
                        + beta[i][j] / c
                })
                .collect()
        })
        .collect()
}

pub fn one_hot(labels: &[Label], classes: &[Label]) -> Mat {
    labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .map(|c| if c == l { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Full pipeline: preprocessing, optional convolutional features, ELM fit
/// by QR and argmax decoding. Returns test-set predictions.
pub fn elm_predict(
    train: &RadioMap,
    test: &RadioMap,
    hidden_count: usize,
    c: f64,
    seed: u64,
    with_conv: bool,
) -> Vec<Label> {
    let (mut xtr, mut xte) = preprocess(&to_rows(&train.rss), &to_rows(&test.rss));
    if with_conv {
        let spec = init_featurizer(seed, train.n_aps(), &FeaturizerOverrides::default()).unwrap();
        let filters: Mat = (0..spec.kernel_size)
            .map(|t| spec.filters[t * spec.n_filters..(t + 1) * spec.n_filters].to_vec())
            .collect();
        xtr = conv_features(&xtr, &filters, &spec.filter_bias);
        xte = conv_features(&xte, &filters, &spec.filter_bias);
    }
    let (w, b) = init_hidden(seed, xtr[0].len(), hidden_count);
    let w = to_rows(&w);
    let labels = train.labels();
    let mut classes = labels.clone();
    classes.sort();
    classes.dedup();
    let beta = ridge_qr(&hidden(&xtr, &w, &b), &one_hot(&labels, &classes), c);
    hidden(&xte, &w, &b)
        .iter()
        .map(|hr| {
            let scores: Vec<f64> = (0..classes.len())
                .map(|j| hr.iter().zip(&beta).map(|(x, br)| x * br[j]).sum())
                .collect();
            let mut best = 0;
            for j in 1..scores.len() {
                if scores[j] > scores[best] {
                    best = j;
                }
            }
            classes[best]
        })
        .collect()
}

pub fn floor_hit(pred: &[Label], truth: &[Label]) -> f64 {
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.floor == t.floor)
        .count();
    100.0 * hits as f64 / truth.len() as f64
}

pub fn building_hit(pred: &[Label], truth: &[Label]) -> f64 {
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.building == t.building)
        .count();
    100.0 * hits as f64 / truth.len() as f64
}

/// Train/test maps for a public dataset under `$CNNELM_DATA_DIR/<NAME>/`,
/// if present. A `manifest.json` next to the CSVs describes the columns;
/// without one the UJIIndoorLoc layout is assumed.
pub fn real_dataset(name: &str) -> Option<(RadioMap, RadioMap)> {
    let root = PathBuf::from(std::env::var_os("CNNELM_DATA_DIR")?);
    let dir = root.join(name);
    let train = dir.join("train.csv");
    let test = dir.join("test.csv");
    if !train.exists() || !test.exists() {
        return None;
    }
    let manifest_path = dir.join("manifest.json");
    let manifest = if manifest_path.exists() {
        Manifest::from_file(&manifest_path).expect("valid manifest")
    } else {
        Manifest::uji()
    };
    Some((
        load_csv(&train, &manifest, name).expect("train file loads"),
        load_csv(&test, &manifest, name).expect("test file loads"),
    ))
}
