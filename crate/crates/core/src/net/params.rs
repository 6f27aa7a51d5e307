use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{MAX_PATCH_K, MIN_PATCH_K};
use crate::error::{Error, Result};

/// Feature width entering the encoder: 3 direction, 1 offset, 2 descriptors.
pub const FEATURE_WIDTH: usize = 6;
pub const ENCODER_LAYERS: usize = 4;
pub const FFN_HIDDEN: usize = 24;
pub const RBF_HIDDEN: usize = 32;
pub const DESCRIPTOR_MLP: [usize; 3] = [16, 8, 1];
pub const DECODER_MLP: [usize; 4] = [256, 64, 32, 1];
pub const DEFAULT_HEADS: usize = 2;

/// Architecture hyperparameters stored alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    pub k: usize,
    pub heads: usize,
}

impl Hyper {
    pub fn new(k: usize) -> Result<Self> {
        Self::with_heads(k, DEFAULT_HEADS)
    }

    pub fn with_heads(k: usize, heads: usize) -> Result<Self> {
        if k % 2 != 0 || !(MIN_PATCH_K..=MAX_PATCH_K).contains(&k) {
            return Err(Error::ModelShape(format!(
                "k must be even and within [{MIN_PATCH_K}, {MAX_PATCH_K}], got {k}"
            )));
        }
        if heads == 0 || FEATURE_WIDTH % heads != 0 {
            return Err(Error::ModelShape(format!(
                "{heads} heads do not divide width {FEATURE_WIDTH}"
            )));
        }
        Ok(Self { k, heads })
    }

    /// Neighbors per RBF group.
    pub fn group_size(&self) -> usize {
        self.k / 2
    }

    pub fn head_width(&self) -> usize {
        FEATURE_WIDTH / self.heads
    }
}

/// Name, shape and flat offset of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn weight<'a>(&self, data: &'a [f64]) -> &'a [f64] {
        &data[self.w..self.w + self.fan_in * self.fan_out]
    }

    pub fn bias<'a>(&self, data: &'a [f64]) -> &'a [f64] {
        &data[self.b..self.b + self.fan_out]
    }

    /// Weight and bias gradient slices; the bias is registered right after
    /// the weight.
    pub fn grads<'a>(&self, grad: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64]) {
        grad[self.w..self.b + self.fan_out].split_at_mut(self.fan_in * self.fan_out)
    }

    pub fn forward(&self, data: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
        super::layers::linear_forward(x, rows, self.weight(data), self.bias(data), self.fan_in, self.fan_out)
    }

    pub fn backward(&self, data: &[f64], grad: &mut [f64], x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        let (dw, db) = self.grads(grad);
        super::layers::linear_backward(x, self.weight(data), dy, self.fan_in, self.fan_out, dw, db, dx);
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Norm {
    pub gain: usize,
    pub bias: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct RbfBranch {
    pub fc_euc: Linear,
    pub fc_cos: Linear,
    pub mlp_euc: [Linear; 3],
    pub mlp_cos: [Linear; 3],
}

#[derive(Debug, Clone)]
pub(crate) struct EncoderLayer {
    pub ln1: Norm,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ln2: Norm,
    pub ff1: Linear,
    pub ff2: Linear,
}

/// Tensor layout and typed offsets for one hyperparameter setting.
#[derive(Debug)]
pub(crate) struct Arch {
    pub hyper: Hyper,
    pub groups: [RbfBranch; 2],
    pub layers: Vec<EncoderLayer>,
    pub decoder: [Linear; 4],
    pub tensors: Vec<TensorInfo>,
    pub total: usize,
    norms: Vec<Norm>,
}

struct Registry {
    tensors: Vec<TensorInfo>,
    total: usize,
    norms: Vec<Norm>,
}

impl Registry {
    fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.total;
        self.total += shape.iter().product::<usize>();
        self.tensors.push(TensorInfo { name, shape, offset });
        offset
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Linear {
        let w = self.push(format!("{prefix}.weight"), vec![fan_out, fan_in]);
        let b = self.push(format!("{prefix}.bias"), vec![fan_out]);
        Linear { w, b, fan_in, fan_out }
    }

    fn norm(&mut self, prefix: &str, width: usize) -> Norm {
        let gain = self.push(format!("{prefix}.gain"), vec![width]);
        let bias = self.push(format!("{prefix}.bias"), vec![width]);
        let n = Norm { gain, bias, width };
        self.norms.push(n);
        n
    }

    fn mlp(&mut self, prefix: &str, fan_in: usize) -> [Linear; 3] {
        let [a, b, c] = DESCRIPTOR_MLP;
        [
            self.linear(&format!("{prefix}.0"), fan_in, a),
            self.linear(&format!("{prefix}.1"), a, b),
            self.linear(&format!("{prefix}.2"), b, c),
        ]
    }
}

impl Arch {
    pub fn new(hyper: Hyper) -> Self {
        let mut reg = Registry {
            tensors: Vec::new(),
            total: 0,
            norms: Vec::new(),
        };
        let m = hyper.group_size();
        let groups = ["first", "second"].map(|g| RbfBranch {
            fc_euc: reg.linear(&format!("rbf.{g}.fc_euc"), m, RBF_HIDDEN),
            fc_cos: reg.linear(&format!("rbf.{g}.fc_cos"), m, RBF_HIDDEN),
            mlp_euc: reg.mlp(&format!("rbf.{g}.mlp_euc"), 2 * RBF_HIDDEN),
            mlp_cos: reg.mlp(&format!("rbf.{g}.mlp_cos"), 2 * RBF_HIDDEN),
        });
        let w = FEATURE_WIDTH;
        let layers = (0..ENCODER_LAYERS)
            .map(|l| {
                let p = format!("encoder.{l}");
                EncoderLayer {
                    ln1: reg.norm(&format!("{p}.ln1"), w),
                    q: reg.linear(&format!("{p}.attn.q"), w, w),
                    k: reg.linear(&format!("{p}.attn.k"), w, w),
                    v: reg.linear(&format!("{p}.attn.v"), w, w),
                    o: reg.linear(&format!("{p}.attn.o"), w, w),
                    ln2: reg.norm(&format!("{p}.ln2"), w),
                    ff1: reg.linear(&format!("{p}.ffn.0"), w, FFN_HIDDEN),
                    ff2: reg.linear(&format!("{p}.ffn.1"), FFN_HIDDEN, w),
                }
            })
            .collect();
        let [d0, d1, d2, d3] = DECODER_MLP;
        let decoder = [
            reg.linear("decoder.0", w * hyper.k, d0),
            reg.linear("decoder.1", d0, d1),
            reg.linear("decoder.2", d1, d2),
            reg.linear("decoder.3", d2, d3),
        ];
        Arch {
            hyper,
            groups,
            layers,
            decoder,
            tensors: reg.tensors,
            total: reg.total,
            norms: reg.norms,
        }
    }

    pub fn find(&self, name: &str) -> Option<&TensorInfo> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// All learnable tensors in one flat buffer with a named layout.
#[derive(Debug, Clone)]
pub struct ModelParameters {
    pub(crate) arch: Arc<Arch>,
    pub(crate) data: Vec<f64>,
}

impl PartialEq for ModelParameters {
    fn eq(&self, other: &Self) -> bool {
        self.arch.hyper == other.arch.hyper && self.data == other.data
    }
}

impl ModelParameters {
    /// Every tensor zero except layer-norm gains, which are one.
    pub fn zeros(hyper: Hyper) -> Self {
        let arch = Arc::new(Arch::new(hyper));
        let mut data = vec![0.0; arch.total];
        for n in &arch.norms {
            data[n.gain..n.gain + n.width].fill(1.0);
        }
        Self { arch, data }
    }

    /// Glorot-uniform weights, zero biases, unit layer-norm gains.
    pub fn init(hyper: Hyper, seed: u64) -> Self {
        let mut params = Self::zeros(hyper);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = params.arch.clone();
        for t in &arch.tensors {
            if t.shape.len() == 2 {
                let bound = (6.0 / (t.shape[0] + t.shape[1]) as f64).sqrt();
                for v in &mut params.data[t.range()] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        params
    }

    /// Rebuilds parameters from named tensors, checking names and shapes
    /// against the layout for `hyper`.
    pub fn from_tensors(hyper: Hyper, tensors: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let mut params = Self::zeros(hyper);
        let arch = params.arch.clone();
        if tensors.len() != arch.tensors.len() {
            return Err(Error::ModelShape(format!(
                "expected {} tensors, got {}",
                arch.tensors.len(),
                tensors.len()
            )));
        }
        for (info, (name, shape, values)) in arch.tensors.iter().zip(tensors) {
            if info.name != name || info.shape != shape || values.len() != info.len() {
                return Err(Error::ModelShape(format!(
                    "tensor {name} {shape:?} does not match expected {} {:?}",
                    info.name, info.shape
                )));
            }
            params.data[info.range()].copy_from_slice(&values);
        }
        params.check_finite()?;
        Ok(params)
    }

    pub fn hyper(&self) -> Hyper {
        self.arch.hyper
    }

    pub fn k(&self) -> usize {
        self.arch.hyper.k
    }

    pub fn param_count(&self) -> usize {
        self.arch.total
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&TensorInfo, &[f64])> {
        self.arch.tensors.iter().map(|t| (t, &self.data[t.range()]))
    }

    pub fn tensor_infos(&self) -> &[TensorInfo] {
        &self.arch.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.arch.find(name).map(|t| &self.data[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.arch.find(name)?.range();
        Some(&mut self.data[range])
    }

    /// Flat view of every parameter in registry order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Fails with a shape error unless the model was built for `k` neighbors.
    pub fn ensure_k(&self, k: usize) -> Result<()> {
        if self.k() != k {
            return Err(Error::ModelShape(format!(
                "model expects k={}, run uses k={k}",
                self.k()
            )));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.tensors().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
            Some((t, _)) => Err(Error::Numerical(format!("tensor {} is not finite", t.name))),
            None => Ok(()),
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            arch: self.arch.clone(),
            data: vec![0.0; self.arch.total],
        }
    }
}

/// Gradient buffer with the same layout as [`ModelParameters`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) arch: Arc<Arch>,
    pub(crate) data: Vec<f64>,
}

impl Gradients {
    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.arch.find(name).map(|t| &self.data[t.range()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn tensor_infos(&self) -> &[TensorInfo] {
        &self.arch.tensors
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(0.0);
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&g| g == 0.0)
    }
}
