//! Extreme learning machine over joint (building, floor) classes.
//!
//! Hidden weights are uniform in (-1, 1), drawn neuron by neuron (the
//! neuron's input-weight column, then its bias). A model with `L` neurons
//! is therefore the first `L` neurons of any larger model with the same
//! seed, which [`sweep_hidden`] relies on.
//!
//! Output weights solve the ridge normal equations
//! `(HᵀH + I/c) β = HᵀT` through a Cholesky factorization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::eval::{hit_rate, Field};
use crate::linalg::{gram, matmul, t_matmul, Cholesky, DenseMatrix};

const HIDDEN_STREAM: u64 = 0x0e1f_4a11;

/// Sorted list of the (building, floor) classes seen in training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassCodebook {
    classes: Vec<Label>,
}

impl ClassCodebook {
    pub fn from_labels(labels: &[Label]) -> Self {
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        Self { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn index_of(&self, label: &Label) -> Option<usize> {
        self.classes.binary_search(label).ok()
    }

    pub fn label(&self, index: usize) -> Label {
        self.classes[index]
    }
}

/// Seeded input weights `d x L` and biases `L`.
pub fn init_hidden(seed: u64, d: usize, hidden: usize) -> (DenseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(HIDDEN_STREAM);
    let mut draw = || loop {
        let v: f64 = rng.random_range(-1.0..1.0);
        if v != -1.0 {
            break v;
        }
    };
    let mut w = DenseMatrix::zeros(d, hidden);
    let mut b = Vec::with_capacity(hidden);
    for i in 0..hidden {
        for k in 0..d {
            w.set(k, i, draw());
        }
        b.push(draw());
    }
    (w, b)
}

/// Hyperbolic tangent sigmoid, `2 / (1 + exp(-2z)) - 1`.
#[inline]
pub fn tansig(z: f64) -> f64 {
    if z > 20.0 {
        1.0
    } else if z < -20.0 {
        -1.0
    } else {
        2.0 / (1.0 + (-2.0 * z).exp()) - 1.0
    }
}

/// `H[j][i] = tansig(w_i · x_j + b_i)`.
pub fn hidden_map(x: &DenseMatrix, w: &DenseMatrix, b: &[f64]) -> Result<DenseMatrix> {
    if x.cols() != w.rows() || w.cols() != b.len() {
        return Err(Error::Shape(format!(
            "features {:?}, weights {:?}, {} biases",
            x.shape(),
            w.shape(),
            b.len()
        )));
    }
    let mut h = matmul(x, w)?;
    for r in 0..h.rows() {
        for (v, bi) in h.row_mut(r).iter_mut().zip(b) {
            *v = tansig(*v + bi);
        }
    }
    Ok(h)
}

/// One-hot target rows.
pub fn encode_targets(labels: &[Label], codebook: &ClassCodebook) -> Result<DenseMatrix> {
    let m = codebook.len();
    let mut t = DenseMatrix::zeros(labels.len(), m);
    for (r, l) in labels.iter().enumerate() {
        let c = codebook.index_of(l).ok_or(Error::UnseenLabel {
            building: l.building,
            floor: l.floor,
        })?;
        t.set(r, c, 1.0);
    }
    Ok(t)
}

fn check_c(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Config(format!(
            "regularization c must be positive and finite, got {c}"
        )));
    }
    Ok(())
}

/// Factor of `HᵀH + I/c` together with `HᵀT`.
fn normal_equations(h: &DenseMatrix, t: &DenseMatrix, c: f64) -> Result<(Cholesky, DenseMatrix)> {
    check_c(c)?;
    if h.rows() != t.rows() {
        return Err(Error::Shape(format!(
            "H has {} rows, T has {}",
            h.rows(),
            t.rows()
        )));
    }
    let mut a = gram(h);
    a.add_diagonal(1.0 / c);
    let rhs = t_matmul(h, t)?;
    Ok((Cholesky::factor(&a)?, rhs))
}

/// Output weights `β = (HᵀH + I/c)⁻¹ HᵀT`.
pub fn fit(h: &DenseMatrix, t: &DenseMatrix, c: f64) -> Result<DenseMatrix> {
    let (chol, rhs) = normal_equations(h, t, c)?;
    chol.solve(&rhs)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn decode(scores: &DenseMatrix, codebook: &ClassCodebook) -> Vec<Label> {
    scores
        .row_iter()
        .map(|row| codebook.label(argmax(row)))
        .collect()
}

/// Per-tensor symmetric 8-bit quantization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTensor {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<i8>,
    pub scale: f64,
}

impl QuantizedTensor {
    /// `scale = max|x| / 127`, `q = round(x / scale)` (half away from zero),
    /// clamped to ±127. An all-zero tensor gets scale 1.
    pub fn quantize(rows: usize, cols: usize, data: &[f64]) -> Self {
        let max_abs = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if max_abs > 0.0 { max_abs / 127.0 } else { 1.0 };
        let values = data
            .iter()
            .map(|&x| (x / scale).round().clamp(-127.0, 127.0) as i8)
            .collect();
        Self {
            rows,
            cols,
            values,
            scale,
        }
    }

    pub fn from_matrix(m: &DenseMatrix) -> Self {
        Self::quantize(m.rows(), m.cols(), m.as_slice())
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.values.iter().map(|&q| q as f64 * self.scale).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedWeights {
    pub w: QuantizedTensor,
    pub b: QuantizedTensor,
    pub beta: QuantizedTensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    pub w: DenseMatrix,
    pub b: Vec<f64>,
    pub beta: DenseMatrix,
    pub c: f64,
    pub hidden: usize,
    pub codebook: ClassCodebook,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantized: Option<QuantizedWeights>,
}

impl ElmModel {
    pub fn train(
        x: &DenseMatrix,
        labels: &[Label],
        hidden: usize,
        c: f64,
        seed: u64,
    ) -> Result<Self> {
        check_c(c)?;
        if hidden == 0 {
            return Err(Error::Config("hidden-neuron count must be positive".into()));
        }
        if x.rows() == 0 {
            return Err(Error::Empty("training features".into()));
        }
        if labels.len() != x.rows() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                x.rows(),
                labels.len()
            )));
        }
        let codebook = ClassCodebook::from_labels(labels);
        let (w, b) = init_hidden(seed, x.cols(), hidden);
        let h = hidden_map(x, &w, &b)?;
        let t = encode_targets(labels, &codebook)?;
        let beta = fit(&h, &t, c)?;
        Ok(Self {
            w,
            b,
            beta,
            c,
            hidden,
            codebook,
            seed,
            quantized: None,
        })
    }

    pub fn input_width(&self) -> usize {
        self.w.rows()
    }

    fn check_width(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.input_width(),
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn scores(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_width(x)?;
        matmul(&hidden_map(x, &self.w, &self.b)?, &self.beta)
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        Ok(decode(&self.scores(x)?, &self.codebook))
    }

    /// Attaches 8-bit copies of `w`, `b` and `beta`.
    pub fn quantize(mut self) -> Self {
        self.quantized = Some(QuantizedWeights {
            w: QuantizedTensor::from_matrix(&self.w),
            b: QuantizedTensor::quantize(1, self.b.len(), &self.b),
            beta: QuantizedTensor::from_matrix(&self.beta),
        });
        self
    }

    /// Scores from the 8-bit weights. Each neuron accumulates
    /// `Σ x_k · q_ki` over the integer weights and rescales once.
    pub fn scores_quantized(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_width(x)?;
        let q = self.quantized.as_ref().ok_or(Error::NotQuantized)?;
        let (d, l, m) = (self.input_width(), self.hidden, self.codebook.len());
        let mut scores = DenseMatrix::zeros(x.rows(), m);
        let mut acc = vec![0.0; l];
        let mut out = vec![0.0; m];
        for r in 0..x.rows() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (k, &xk) in x.row(r).iter().enumerate().take(d) {
                if xk == 0.0 {
                    continue;
                }
                let wq = &q.w.values[k * l..(k + 1) * l];
                for (a, &qi) in acc.iter_mut().zip(wq) {
                    *a += xk * qi as f64;
                }
            }
            out.iter_mut().for_each(|o| *o = 0.0);
            for i in 0..l {
                let h = tansig(acc[i] * q.w.scale + q.b.values[i] as f64 * q.b.scale);
                let bq = &q.beta.values[i * m..(i + 1) * m];
                for (o, &qc) in out.iter_mut().zip(bq) {
                    *o += h * qc as f64;
                }
            }
            for (c, o) in out.iter().enumerate() {
                scores.set(r, c, o * q.beta.scale);
            }
        }
        Ok(scores)
    }

    pub fn predict_quantized(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        Ok(decode(&self.scores_quantized(x)?, &self.codebook))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub hidden: usize,
    pub floor_hit: f64,
    pub building_hit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub selected: usize,
    pub points: Vec<SweepPoint>,
}

/// Hidden-layer sizes visited by a sweep: `5, 5 + step, ...` up to `l_max`.
pub fn sweep_grid(l_max: usize, step: usize) -> Result<Vec<usize>> {
    if step == 0 || l_max < 5 {
        return Err(Error::Config(format!(
            "sweep needs step >= 1 and l_max >= 5 (got step {step}, l_max {l_max})"
        )));
    }
    Ok((5..=l_max).step_by(step).collect())
}

/// Trains one model per grid size on `train` and scores floor hit rate on
/// `validation`. Picks the smallest size with the best floor hit rate.
///
/// All candidates share one hidden layer and one Cholesky factorization:
/// each is bitwise identical to `ElmModel::train` at that size.
#[allow(clippy::too_many_arguments)]
pub fn sweep_hidden(
    train_x: &DenseMatrix,
    train_labels: &[Label],
    val_x: &DenseMatrix,
    val_labels: &[Label],
    c: f64,
    l_max: usize,
    step: usize,
    seed: u64,
) -> Result<SweepResult> {
    check_c(c)?;
    let grid = sweep_grid(l_max, step)?;
    if val_x.rows() == 0 || val_labels.is_empty() {
        return Err(Error::Empty("validation set".into()));
    }
    if train_x.rows() == 0 {
        return Err(Error::Empty("training features".into()));
    }
    let widest = *grid.last().expect("grid is non-empty");
    let codebook = ClassCodebook::from_labels(train_labels);
    let (w, b) = init_hidden(seed, train_x.cols(), widest);
    let h = hidden_map(train_x, &w, &b)?;
    let t = encode_targets(train_labels, &codebook)?;
    let (chol, rhs) = normal_equations(&h, &t, c)?;
    let h_val = hidden_map(val_x, &w, &b)?;

    let mut points = Vec::with_capacity(grid.len());
    for &l in &grid {
        let beta = chol.solve_leading(l, &rhs.leading_block(l, rhs.cols()))?;
        let scores = matmul(&h_val.leading_cols(l), &beta)?;
        let predicted = decode(&scores, &codebook);
        let floor_hit = hit_rate(&predicted, val_labels, Field::Floor)?
            .expect("floor hit rate is always defined");
        let building_hit = hit_rate(&predicted, val_labels, Field::Building)?;
        log::info!("sweep L={l}: floor hit {floor_hit:.2}%");
        points.push(SweepPoint {
            hidden: l,
            floor_hit,
            building_hit,
        });
    }
    let selected = points
        .iter()
        .fold(None::<&SweepPoint>, |best, p| match best {
            Some(b) if b.floor_hit >= p.floor_hit => Some(b),
            _ => Some(p),
        })
        .expect("at least one candidate")
        .hidden;
    Ok(SweepResult { selected, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (DenseMatrix, Vec<Label>) {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let labels = vec![
            Label::new(Some(0), 0),
            Label::new(Some(0), 1),
            Label::new(Some(1), 0),
            Label::new(Some(1), 1),
        ];
        (x, labels)
    }

    #[test]
    fn codebook_is_sorted_bijection() {
        let cb = ClassCodebook::from_labels(&[
            Label::new(Some(1), 0),
            Label::new(Some(0), 2),
            Label::new(Some(0), 1),
            Label::new(Some(1), 0),
        ]);
        assert_eq!(cb.len(), 3);
        assert_eq!(cb.label(0), Label::new(Some(0), 1));
        for i in 0..cb.len() {
            assert_eq!(cb.index_of(&cb.label(i)), Some(i));
        }
    }

    #[test]
    fn init_hidden_is_seeded_and_bounded() {
        let (w1, b1) = init_hidden(3, 7, 5);
        let (w2, b2) = init_hidden(3, 7, 5);
        assert_eq!((&w1, &b1), (&w2, &b2));
        assert_eq!(w1.shape(), (7, 5));
        assert!(w1.as_slice().iter().chain(&b1).all(|v| v.abs() < 1.0));
        // smaller layers are prefixes of larger ones
        let (w3, b3) = init_hidden(3, 7, 9);
        assert_eq!(w3.leading_cols(5), w1);
        assert_eq!(&b3[..5], &b1[..]);
    }

    #[test]
    fn tansig_values() {
        assert_eq!(tansig(0.0), 0.0);
        assert!((tansig(1.0) - 0.761_594_155_955_764_9).abs() < 1e-15);
        for z in [0.3, 1.7, 5.0, 19.0] {
            assert!((tansig(-z) + tansig(z)).abs() < 1e-15);
        }
        assert_eq!(tansig(800.0), 1.0);
        assert_eq!(tansig(-800.0), -1.0);
    }

    #[test]
    fn hidden_map_cases() {
        let x = DenseMatrix::new(2, 3, vec![1.0, 0.0, 0.0, 0.5, 0.5, 0.5]).unwrap();
        let h = hidden_map(&x, &DenseMatrix::zeros(3, 4), &[0.0; 4]).unwrap();
        assert!(h.as_slice().iter().all(|&v| v == 0.0));
        let w = DenseMatrix::new(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let h = hidden_map(&x, &w, &[0.0]).unwrap();
        assert!((h.get(0, 0) - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert!(hidden_map(&x, &w, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn one_hot_targets() {
        let cb = ClassCodebook::from_labels(&[Label::new(Some(0), 0), Label::new(Some(0), 1)]);
        let t = encode_targets(&[Label::new(Some(0), 1)], &cb).unwrap();
        assert_eq!(t.row(0), &[0.0, 1.0]);
        assert!(matches!(
            encode_targets(&[Label::new(Some(9), 9)], &cb),
            Err(Error::UnseenLabel {
                building: Some(9),
                floor: 9
            })
        ));
    }

    #[test]
    fn fit_limits() {
        let t = DenseMatrix::new(3, 2, vec![1.0, -2.0, 0.5, 3.0, 0.0, 4.0]).unwrap();
        let h = DenseMatrix::identity(3);
        let c = 1e12;
        let beta = fit(&h, &t, c).unwrap();
        let k = c / (c + 1.0);
        for (b, v) in beta.as_slice().iter().zip(t.as_slice()) {
            assert!((b - v * k).abs() < 1e-12);
        }
        let tiny = fit(&h, &t, 1e-12).unwrap();
        assert!(tiny.max_abs() < 1e-11);
        assert!(fit(&h, &t, 0.0).is_err());
    }

    #[test]
    fn argmax_tie_takes_lowest() {
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    #[test]
    fn recovers_toy_training_labels() {
        let (x, labels) = toy();
        let model = ElmModel::train(&x, &labels, 8, 1e6, 11).unwrap();
        assert_eq!(model.predict(&x).unwrap(), labels);
        let empty = DenseMatrix::zeros(0, 4);
        assert!(model.predict(&empty).unwrap().is_empty());
        assert!(model.predict(&DenseMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn quantize_rule() {
        let q = QuantizedTensor::quantize(1, 3, &[0.0, -1.0, 0.5]);
        assert_eq!(q.values, vec![0, -127, 64]);
        assert_eq!(q.scale, 1.0 / 127.0);
        let z = QuantizedTensor::quantize(1, 2, &[0.0, 0.0]);
        assert_eq!((z.values, z.scale), (vec![0, 0], 1.0));
    }

    #[test]
    fn quantized_path_requires_weights_and_matches_toy() {
        let (x, labels) = toy();
        let model = ElmModel::train(&x, &labels, 8, 1e6, 11).unwrap();
        assert!(matches!(
            model.predict_quantized(&x),
            Err(Error::NotQuantized)
        ));
        let q = model.quantize();
        assert_eq!(q.predict_quantized(&x).unwrap(), labels);
    }

    #[test]
    fn lossless_quantization_matches_float_path() {
        let (x, labels) = toy();
        let mut model = ElmModel::train(&x, &labels, 6, 1e3, 2).unwrap();
        // snap every tensor onto its own quantization grid
        let snap = |m: &DenseMatrix| {
            let q = QuantizedTensor::from_matrix(m);
            DenseMatrix::new(m.rows(), m.cols(), q.dequantize()).unwrap()
        };
        model.w = snap(&model.w);
        model.beta = snap(&model.beta);
        let bq = QuantizedTensor::quantize(1, model.b.len(), &model.b);
        model.b = bq.dequantize();
        let model = model.quantize();
        let q = model.quantized.as_ref().unwrap();
        assert_eq!(q.w.dequantize(), model.w.as_slice());
        let probe =
            DenseMatrix::new(5, 4, (0..20).map(|i| ((i * 13) % 7) as f64 / 7.0).collect()).unwrap();
        assert_eq!(
            model.predict(&probe).unwrap(),
            model.predict_quantized(&probe).unwrap()
        );
    }

    #[test]
    fn sweep_grid_and_validation() {
        assert_eq!(sweep_grid(15, 5).unwrap(), vec![5, 10, 15]);
        assert!(sweep_grid(4, 5).is_err());
        let (x, labels) = toy();
        let empty = DenseMatrix::zeros(0, 4);
        assert!(matches!(
            sweep_hidden(&x, &labels, &empty, &[], 1.0, 15, 5, 0),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn sweep_prefers_smallest_on_ties() {
        let (x, labels) = toy();
        let res = sweep_hidden(&x, &labels, &x, &labels, 1e6, 15, 5, 4).unwrap();
        assert_eq!(res.points.len(), 3);
        // every size recovers the separable toy set perfectly
        assert!(res.points.iter().all(|p| p.floor_hit == 100.0));
        assert_eq!(res.selected, 5);
    }
}
