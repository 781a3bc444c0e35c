//! Fixed 1-D convolutional front end: conv (same padding, stride 1),
//! absolute value, average pooling (valid padding), flatten.
//!
//! Filters are drawn once from a seeded generator and never trained.
//! Tensors are channel-last: `[sample][position][filter]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const FILTER_STREAM: u64 = 0x0f11_7e25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerSpec {
    pub n_filters: usize,
    pub kernel_size: usize,
    pub conv_padding: Padding,
    pub conv_stride: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub pool_padding: Padding,
    pub pool_mode: PoolMode,
    pub seed: u64,
    /// `kernel_size x 1 x n_filters`, tap-major.
    pub filters: Vec<f64>,
    pub filter_bias: Vec<f64>,
}

/// Optional replacements for the default layer parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerOverrides {
    pub n_filters: Option<usize>,
    pub kernel_size: Option<usize>,
    /// Externally supplied weights, tap-major; skips random init.
    pub filters: Option<Vec<f64>>,
    pub filter_bias: Option<Vec<f64>>,
}

/// Bound of the uniform filter initialization.
pub fn init_limit(kernel_size: usize, n_filters: usize) -> f64 {
    (6.0 / (kernel_size + n_filters) as f64).sqrt()
}

pub fn init_featurizer(
    seed: u64,
    n_aps: usize,
    overrides: &FeaturizerOverrides,
) -> Result<FeaturizerSpec> {
    let n_filters = overrides.n_filters.unwrap_or(2);
    let kernel_size = overrides.kernel_size.unwrap_or(3);
    if n_filters == 0 {
        return Err(Error::Config("featurizer needs at least one filter".into()));
    }
    if kernel_size.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "kernel size {kernel_size} is even; same padding needs an odd kernel"
        )));
    }
    if kernel_size > n_aps {
        return Err(Error::Config(format!(
            "kernel size {kernel_size} exceeds input width {n_aps}"
        )));
    }
    let pool_size = 2;
    if n_aps < pool_size {
        return Err(Error::Config(format!(
            "input width {n_aps} is smaller than the pooling window"
        )));
    }
    let n_weights = kernel_size * n_filters;
    let filters = match &overrides.filters {
        Some(f) if f.len() != n_weights => {
            return Err(Error::Config(format!(
                "{} filter weights supplied, expected {n_weights}",
                f.len()
            )))
        }
        Some(f) => f.clone(),
        None => {
            let limit = init_limit(kernel_size, n_filters);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(FILTER_STREAM);
            (0..n_weights)
                .map(|_| rng.random_range(-limit..limit))
                .collect()
        }
    };
    let filter_bias = match &overrides.filter_bias {
        Some(b) if b.len() != n_filters => {
            return Err(Error::Config(format!(
                "{} filter biases supplied, expected {n_filters}",
                b.len()
            )))
        }
        Some(b) => b.clone(),
        None => vec![0.0; n_filters],
    };
    Ok(FeaturizerSpec {
        n_filters,
        kernel_size,
        conv_padding: Padding::Same,
        conv_stride: 1,
        pool_size,
        pool_stride: 2,
        pool_padding: Padding::Valid,
        pool_mode: PoolMode::Avg,
        seed,
        filters,
        filter_bias,
    })
}

impl FeaturizerSpec {
    pub fn filter(&self, tap: usize, f: usize) -> f64 {
        self.filters[tap * self.n_filters + f]
    }

    pub fn pooled_len(&self, n: usize) -> usize {
        if n < self.pool_size {
            0
        } else {
            (n - self.pool_size) / self.pool_stride + 1
        }
    }

    /// Feature width produced for `n` input APs.
    pub fn output_width(&self, n: usize) -> usize {
        self.pooled_len(n) * self.n_filters
    }

    fn check(&self) -> Result<()> {
        if self.kernel_size.is_multiple_of(2)
            || self.filters.len() != self.kernel_size * self.n_filters
            || self.filter_bias.len() != self.n_filters
            || self.conv_stride != 1
            || self.pool_size == 0
            || self.pool_stride == 0
        {
            return Err(Error::Config("inconsistent featurizer parameters".into()));
        }
        Ok(())
    }
}

/// Dense `[sample][position][channel]` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub samples: usize,
    pub len: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(samples: usize, len: usize, channels: usize) -> Self {
        Self {
            samples,
            len,
            channels,
            data: vec![0.0; samples * len * channels],
        }
    }

    pub fn get(&self, s: usize, p: usize, c: usize) -> f64 {
        self.data[(s * self.len + p) * self.channels + c]
    }

    fn sample(&self, s: usize) -> &[f64] {
        let w = self.len * self.channels;
        &self.data[s * w..(s + 1) * w]
    }

    fn sample_mut(&mut self, s: usize) -> &mut [f64] {
        let w = self.len * self.channels;
        &mut self.data[s * w..(s + 1) * w]
    }

    /// Inverse of [`batch_flatten`].
    pub fn from_matrix(m: &DenseMatrix, channels: usize) -> Result<Self> {
        if channels == 0 || !m.cols().is_multiple_of(channels) {
            return Err(Error::Shape(format!(
                "width {} is not a multiple of {channels} channels",
                m.cols()
            )));
        }
        Ok(Self {
            samples: m.rows(),
            len: m.cols() / channels,
            channels,
            data: m.as_slice().to_vec(),
        })
    }
}

fn conv_row(x: &[f64], spec: &FeaturizerSpec, out: &mut [f64]) {
    let n = x.len();
    let f = spec.n_filters;
    let pad = spec.kernel_size / 2;
    for p in 0..n {
        let o = &mut out[p * f..(p + 1) * f];
        o.copy_from_slice(&spec.filter_bias);
        for tap in 0..spec.kernel_size {
            let Some(src) = (p + tap).checked_sub(pad).filter(|&i| i < n) else {
                continue;
            };
            let xv = x[src];
            for (c, ov) in o.iter_mut().enumerate() {
                *ov += xv * spec.filter(tap, c);
            }
        }
    }
}

fn pool_row(t: &[f64], len: usize, channels: usize, spec: &FeaturizerSpec, out: &mut [f64]) {
    let m = spec.pooled_len(len);
    let inv = 1.0 / spec.pool_size as f64;
    for q in 0..m {
        let start = q * spec.pool_stride;
        for c in 0..channels {
            let mut s = 0.0;
            for k in 0..spec.pool_size {
                s += t[(start + k) * channels + c];
            }
            out[q * channels + c] = s * inv;
        }
    }
}

/// Cross-correlation along the AP axis with zero padding, stride 1.
pub fn conv1d_same(x: &DenseMatrix, spec: &FeaturizerSpec) -> Result<Tensor3> {
    spec.check()?;
    let mut out = Tensor3::zeros(x.rows(), x.cols(), spec.n_filters);
    for s in 0..x.rows() {
        conv_row(x.row(s), spec, out.sample_mut(s));
    }
    Ok(out)
}

pub fn abs_activation(t: &Tensor3) -> Tensor3 {
    Tensor3 {
        data: t.data.iter().map(|v| v.abs()).collect(),
        ..*t
    }
}

/// Non-overlapping window means; a trailing partial window is dropped.
pub fn avg_pool1d_valid(t: &Tensor3, spec: &FeaturizerSpec) -> Result<Tensor3> {
    if t.len < spec.pool_size {
        return Err(Error::Shape(format!(
            "sequence length {} is shorter than pool size {}",
            t.len, spec.pool_size
        )));
    }
    let m = spec.pooled_len(t.len);
    let mut out = Tensor3::zeros(t.samples, m, t.channels);
    for s in 0..t.samples {
        pool_row(t.sample(s), t.len, t.channels, spec, out.sample_mut(s));
    }
    Ok(out)
}

/// Position-major, channel-minor flattening of each sample.
pub fn batch_flatten(t: &Tensor3) -> DenseMatrix {
    DenseMatrix::new(t.samples, t.len * t.channels, t.data.clone())
        .expect("tensor buffer matches its shape")
}

/// Full feature block. Runs the same row kernels as the individual stages,
/// one sample at a time.
pub fn featurize(x: &DenseMatrix, spec: &FeaturizerSpec) -> Result<DenseMatrix> {
    spec.check()?;
    let n = x.cols();
    if n < spec.pool_size {
        return Err(Error::Shape(format!(
            "input width {n} is shorter than pool size {}",
            spec.pool_size
        )));
    }
    let f = spec.n_filters;
    let width = spec.output_width(n);
    let mut conv = vec![0.0; n * f];
    let mut out = vec![0.0; x.rows() * width];
    for s in 0..x.rows() {
        conv_row(x.row(s), spec, &mut conv);
        conv.iter_mut().for_each(|v| *v = v.abs());
        pool_row(&conv, n, f, spec, &mut out[s * width..(s + 1) * width]);
    }
    DenseMatrix::new(x.rows(), width, out)
}
