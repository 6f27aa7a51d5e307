use std::sync::Arc;

use super::layers::{layer_norm_backward, layer_norm_forward, relu, relu_backward, sigmoid, softmax_rows, NormCache};
use super::params::{EncoderLayer, Gradients, Linear, ModelParameters, Norm, RbfBranch, FEATURE_WIDTH, RBF_HIDDEN};
use crate::cloud::{SurfacePatch, Vec3};
use crate::error::{Error, Result};
use crate::rbf::{distance_matrices, DistanceMatrices};

const W: usize = FEATURE_WIDTH;

/// Neighbor group served by an RBF descriptor branch: the nearest k/2
/// neighbors, or the next k/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    First,
    Second,
}

impl Group {
    fn index(self) -> usize {
        match self {
            Group::First => 0,
            Group::Second => 1,
        }
    }
}

/// Per-neighbor scalar descriptors from one RBF branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptors {
    pub euc: Vec<f64>,
    pub cos: Vec<f64>,
}

/// A `rows x 6` row-major matrix: the encoder's token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(rows: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || data.len() != rows * W {
            return Err(Error::ModelShape(format!(
                "feature map needs {rows} x {W} values, got {}",
                data.len()
            )));
        }
        Ok(Self { rows, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * W..(r + 1) * W]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Reorders rows: output row `i` is input row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let data = perm.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Self { rows: self.rows, data }
    }
}

fn ensure_finite(values: &[f64], stage: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite activation in {stage}")))
    }
}

fn check_grads(params: &ModelParameters, grads: &Gradients) -> Result<()> {
    if Arc::ptr_eq(&params.arch, &grads.arch) || params.arch.hyper == grads.arch.hyper {
        Ok(())
    } else {
        Err(Error::ModelShape("gradient buffer belongs to a different model".into()))
    }
}

// ---------------------------------------------------------------- RBF branch

#[derive(Debug, Clone)]
struct MlpTrace {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    out: Vec<f64>,
}

fn mlp_forward(mlp: &[Linear; 3], data: &[f64], x: &[f64], rows: usize) -> MlpTrace {
    let z1 = mlp[0].forward(data, x, rows);
    let a1 = relu(&z1);
    let z2 = mlp[1].forward(data, &a1, rows);
    let a2 = relu(&z2);
    let out = mlp[2].forward(data, &a2, rows);
    MlpTrace { z1, a1, z2, a2, out }
}

fn mlp_backward(mlp: &[Linear; 3], data: &[f64], grad: &mut [f64], x: &[f64], t: &MlpTrace, dout: &[f64], dx: &mut [f64]) {
    let mut da2 = vec![0.0; t.a2.len()];
    mlp[2].backward(data, grad, &t.a2, dout, Some(&mut da2));
    relu_backward(&t.z2, &mut da2);
    let mut da1 = vec![0.0; t.a1.len()];
    mlp[1].backward(data, grad, &t.a1, &da2, Some(&mut da1));
    relu_backward(&t.z1, &mut da1);
    mlp[0].backward(data, grad, x, &da1, Some(dx));
}

/// Cached forward pass of one RBF descriptor branch.
#[derive(Debug, Clone)]
pub struct BranchTrace {
    group: Group,
    matrices: DistanceMatrices,
    hidden: Vec<f64>,
    euc: MlpTrace,
    cos: MlpTrace,
}

impl BranchTrace {
    pub fn descriptors(&self) -> Descriptors {
        Descriptors {
            euc: self.euc.out.clone(),
            cos: self.cos.out.clone(),
        }
    }

    /// Accumulates parameter gradients for upstream descriptor gradients.
    pub fn backward(&self, params: &ModelParameters, d_euc: &[f64], d_cos: &[f64], grads: &mut Gradients) -> Result<()> {
        check_grads(params, grads)?;
        let m = self.matrices.m;
        if d_euc.len() != m || d_cos.len() != m {
            return Err(Error::ModelShape(format!("expected {m} descriptor gradients")));
        }
        let branch = &params.arch.groups[self.group.index()];
        branch_backward(branch, &params.data, &mut grads.data, self, d_euc, d_cos);
        Ok(())
    }
}

fn branch_forward(branch: &RbfBranch, data: &[f64], group: Group, matrices: DistanceMatrices) -> BranchTrace {
    let m = matrices.m;
    let ge = branch.fc_euc.forward(data, &matrices.euc, m);
    let gc = branch.fc_cos.forward(data, &matrices.cos, m);
    let mut hidden = Vec::with_capacity(m * 2 * RBF_HIDDEN);
    for a in 0..m {
        hidden.extend_from_slice(&ge[a * RBF_HIDDEN..(a + 1) * RBF_HIDDEN]);
        hidden.extend_from_slice(&gc[a * RBF_HIDDEN..(a + 1) * RBF_HIDDEN]);
    }
    let euc = mlp_forward(&branch.mlp_euc, data, &hidden, m);
    let cos = mlp_forward(&branch.mlp_cos, data, &hidden, m);
    BranchTrace {
        group,
        matrices,
        hidden,
        euc,
        cos,
    }
}

fn branch_backward(branch: &RbfBranch, data: &[f64], grad: &mut [f64], t: &BranchTrace, d_euc: &[f64], d_cos: &[f64]) {
    let m = t.matrices.m;
    let mut dh = vec![0.0; t.hidden.len()];
    mlp_backward(&branch.mlp_euc, data, grad, &t.hidden, &t.euc, d_euc, &mut dh);
    mlp_backward(&branch.mlp_cos, data, grad, &t.hidden, &t.cos, d_cos, &mut dh);
    let mut dge = Vec::with_capacity(m * RBF_HIDDEN);
    let mut dgc = Vec::with_capacity(m * RBF_HIDDEN);
    for row in dh.chunks_exact(2 * RBF_HIDDEN) {
        dge.extend_from_slice(&row[..RBF_HIDDEN]);
        dgc.extend_from_slice(&row[RBF_HIDDEN..]);
    }
    branch.fc_euc.backward(data, grad, &t.matrices.euc, &dge, None);
    branch.fc_cos.backward(data, grad, &t.matrices.cos, &dgc, None);
}

/// Traced RBF branch over precomputed basis matrices.
pub fn rbf_branch_traced(params: &ModelParameters, group: Group, matrices: DistanceMatrices) -> Result<BranchTrace> {
    let m = params.arch.hyper.group_size();
    if matrices.m != m {
        return Err(Error::ModelShape(format!(
            "RBF branch expects {m} neighbors, got {}",
            matrices.m
        )));
    }
    let branch = &params.arch.groups[group.index()];
    let t = branch_forward(branch, &params.data, group, matrices);
    ensure_finite(&t.euc.out, "RBF descriptor")?;
    ensure_finite(&t.cos.out, "RBF descriptor")?;
    Ok(t)
}

/// Learned surface descriptors `(f_euc, f_cos)` for one group of neighbors.
pub fn rbf_dos_forward(dvecs: &[Vec3], scale: f64, params: &ModelParameters, group: Group) -> Result<Descriptors> {
    let m = params.arch.hyper.group_size();
    if dvecs.len() != m {
        return Err(Error::ModelShape(format!("RBF branch expects {m} neighbors, got {}", dvecs.len())));
    }
    Ok(rbf_branch_traced(params, group, distance_matrices(dvecs, scale)?)?.descriptors())
}

// ------------------------------------------------------------------ features

/// Builds the `k x 6` token matrix `[d/s, |d.v|/s, f_euc, f_cos]`, rows in
/// patch order.
pub fn assemble_features(patch: &SurfacePatch, first: &Descriptors, second: &Descriptors) -> Result<FeatureMap> {
    let k = patch.k();
    let m = k / 2;
    if k % 2 != 0 || [&first.euc, &first.cos, &second.euc, &second.cos].iter().any(|d| d.len() != m) {
        return Err(Error::ModelShape(format!(
            "descriptor groups must each hold k/2 = {m} values"
        )));
    }
    let s = patch.scale;
    let mut data = Vec::with_capacity(k * W);
    for j in 0..k {
        let (group, a) = if j < m { (first, j) } else { (second, j - m) };
        let d = patch.dvecs[j];
        data.extend_from_slice(&[d.x / s, d.y / s, d.z / s, patch.offsets[j] / s, group.euc[a], group.cos[a]]);
    }
    FeatureMap::new(k, data)
}

// ------------------------------------------------------------------- encoder

/// Cached forward pass of one pre-norm encoder layer.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    layer: usize,
    rows: usize,
    ln1: NormCache,
    y1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    attn: Vec<f64>,
    ln2: NormCache,
    y2: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    out: Vec<f64>,
}

impl EncoderTrace {
    pub fn output(&self) -> FeatureMap {
        FeatureMap {
            rows: self.rows,
            data: self.out.clone(),
        }
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. the layer input.
    pub fn backward(&self, params: &ModelParameters, dy: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        check_grads(params, grads)?;
        if dy.len() != self.out.len() {
            return Err(Error::ModelShape("encoder gradient has the wrong length".into()));
        }
        let layer = &params.arch.layers[self.layer];
        Ok(encoder_backward(layer, params.arch.hyper.heads, &params.data, &mut grads.data, self, dy))
    }
}

fn norm_forward(n: &Norm, data: &[f64], x: &[f64]) -> (Vec<f64>, NormCache) {
    layer_norm_forward(x, n.width, &data[n.gain..n.gain + n.width], &data[n.bias..n.bias + n.width])
}

fn norm_backward(n: &Norm, data: &[f64], grad: &mut [f64], cache: &NormCache, dy: &[f64], dx: &mut [f64]) {
    let (dgain, dbias) = grad[n.gain..n.bias + n.width].split_at_mut(n.width);
    layer_norm_backward(cache, &data[n.gain..n.gain + n.width], dy, n.width, dgain, dbias, dx);
}

fn encoder_forward(layer: &EncoderLayer, layer_idx: usize, heads: usize, data: &[f64], x: &[f64]) -> EncoderTrace {
    let rows = x.len() / W;
    let hw = W / heads;
    let inv = 1.0 / (hw as f64).sqrt();

    let (y1, ln1) = norm_forward(&layer.ln1, data, x);
    let q = layer.q.forward(data, &y1, rows);
    let k = layer.k.forward(data, &y1, rows);
    let v = layer.v.forward(data, &y1, rows);

    let mut probs = vec![0.0; heads * rows * rows];
    let mut attn = vec![0.0; rows * W];
    for h in 0..heads {
        let c0 = h * hw;
        let p = &mut probs[h * rows * rows..(h + 1) * rows * rows];
        for i in 0..rows {
            for j in 0..rows {
                let mut s = 0.0;
                for c in c0..c0 + hw {
                    s += q[i * W + c] * k[j * W + c];
                }
                p[i * rows + j] = s * inv;
            }
        }
        softmax_rows(p, rows);
        for i in 0..rows {
            for j in 0..rows {
                let pij = p[i * rows + j];
                for c in c0..c0 + hw {
                    attn[i * W + c] += pij * v[j * W + c];
                }
            }
        }
    }
    let proj = layer.o.forward(data, &attn, rows);
    let x1: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a + b).collect();

    let (y2, ln2) = norm_forward(&layer.ln2, data, &x1);
    let z = layer.ff1.forward(data, &y2, rows);
    let r = relu(&z);
    let f = layer.ff2.forward(data, &r, rows);
    let out = x1.iter().zip(&f).map(|(a, b)| a + b).collect();

    EncoderTrace {
        layer: layer_idx,
        rows,
        ln1,
        y1,
        q,
        k,
        v,
        probs,
        attn,
        ln2,
        y2,
        z,
        r,
        out,
    }
}

fn encoder_backward(layer: &EncoderLayer, heads: usize, data: &[f64], grad: &mut [f64], t: &EncoderTrace, dy: &[f64]) -> Vec<f64> {
    let rows = t.rows;
    let hw = W / heads;
    let inv = 1.0 / (hw as f64).sqrt();

    // Feed-forward residual branch.
    let mut dx1 = dy.to_vec();
    let mut dr = vec![0.0; t.r.len()];
    layer.ff2.backward(data, grad, &t.r, dy, Some(&mut dr));
    relu_backward(&t.z, &mut dr);
    let mut dy2 = vec![0.0; t.y2.len()];
    layer.ff1.backward(data, grad, &t.y2, &dr, Some(&mut dy2));
    norm_backward(&layer.ln2, data, grad, &t.ln2, &dy2, &mut dx1);

    // Attention residual branch.
    let mut dx = dx1.clone();
    let mut dattn = vec![0.0; t.attn.len()];
    layer.o.backward(data, grad, &t.attn, &dx1, Some(&mut dattn));
    let mut dq = vec![0.0; t.q.len()];
    let mut dk = vec![0.0; t.k.len()];
    let mut dv = vec![0.0; t.v.len()];
    let mut dp = vec![0.0; rows];
    for h in 0..heads {
        let c0 = h * hw;
        let p = &t.probs[h * rows * rows..(h + 1) * rows * rows];
        for i in 0..rows {
            for j in 0..rows {
                let mut s = 0.0;
                for c in c0..c0 + hw {
                    s += dattn[i * W + c] * t.v[j * W + c];
                    dv[j * W + c] += p[i * rows + j] * dattn[i * W + c];
                }
                dp[j] = s;
            }
            let pr = &p[i * rows..(i + 1) * rows];
            let centre: f64 = pr.iter().zip(&dp).map(|(a, b)| a * b).sum();
            for j in 0..rows {
                let ds = pr[j] * (dp[j] - centre) * inv;
                if ds == 0.0 {
                    continue;
                }
                for c in c0..c0 + hw {
                    dq[i * W + c] += ds * t.k[j * W + c];
                    dk[j * W + c] += ds * t.q[i * W + c];
                }
            }
        }
    }
    let mut dy1 = vec![0.0; t.y1.len()];
    layer.q.backward(data, grad, &t.y1, &dq, Some(&mut dy1));
    layer.k.backward(data, grad, &t.y1, &dk, Some(&mut dy1));
    layer.v.backward(data, grad, &t.y1, &dv, Some(&mut dy1));
    norm_backward(&layer.ln1, data, grad, &t.ln1, &dy1, &mut dx);
    dx
}

/// Traced forward pass of encoder layer `layer` on any number of rows.
pub fn encoder_layer_traced(params: &ModelParameters, layer: usize, x: &FeatureMap) -> Result<EncoderTrace> {
    let l = params
        .arch
        .layers
        .get(layer)
        .ok_or_else(|| Error::ModelShape(format!("no encoder layer {layer}")))?;
    let t = encoder_forward(l, layer, params.arch.hyper.heads, &params.data, &x.data);
    ensure_finite(&t.out, "encoder")?;
    Ok(t)
}

/// The full encoder stack; row count is free since there is no positional term.
pub fn transformer_forward(x: &FeatureMap, params: &ModelParameters) -> Result<FeatureMap> {
    let mut cur = x.clone();
    for l in 0..params.arch.layers.len() {
        cur = encoder_layer_traced(params, l, &cur)?.output();
    }
    Ok(cur)
}

// ------------------------------------------------------------------- decoder

/// Cached forward pass of the decoder MLP.
#[derive(Debug, Clone)]
pub struct DecoderTrace {
    input: Vec<f64>,
    z: [Vec<f64>; 3],
    a: [Vec<f64>; 3],
    prob: f64,
}

impl DecoderTrace {
    pub fn probability(&self) -> f64 {
        self.prob
    }

    /// Accumulates parameter gradients for `de = dL/de`; returns the gradient
    /// w.r.t. the (flattened) decoder input.
    pub fn backward(&self, params: &ModelParameters, de: f64, grads: &mut Gradients) -> Result<Vec<f64>> {
        check_grads(params, grads)?;
        Ok(decoder_backward(&params.arch.decoder, &params.data, &mut grads.data, self, de))
    }
}

fn decoder_forward_inner(dec: &[Linear; 4], data: &[f64], x: &[f64]) -> DecoderTrace {
    let z0 = dec[0].forward(data, x, 1);
    let a0 = relu(&z0);
    let z1 = dec[1].forward(data, &a0, 1);
    let a1 = relu(&z1);
    let z2 = dec[2].forward(data, &a1, 1);
    let a2 = relu(&z2);
    let logit = dec[3].forward(data, &a2, 1)[0];
    DecoderTrace {
        input: x.to_vec(),
        z: [z0, z1, z2],
        a: [a0, a1, a2],
        prob: sigmoid(logit),
    }
}

fn decoder_backward(dec: &[Linear; 4], data: &[f64], grad: &mut [f64], t: &DecoderTrace, de: f64) -> Vec<f64> {
    let dlogit = [de * t.prob * (1.0 - t.prob)];
    let mut da = vec![0.0; t.a[2].len()];
    dec[3].backward(data, grad, &t.a[2], &dlogit, Some(&mut da));
    for l in (0..3).rev() {
        relu_backward(&t.z[l], &mut da);
        let input = if l == 0 { &t.input } else { &t.a[l - 1] };
        let mut dx = vec![0.0; input.len()];
        dec[l].backward(data, grad, input, &da, Some(&mut dx));
        da = dx;
    }
    da
}

pub fn decoder_traced(params: &ModelParameters, x: &FeatureMap) -> Result<DecoderTrace> {
    let k = params.arch.hyper.k;
    if x.rows != k {
        return Err(Error::ModelShape(format!("decoder expects {k} rows, got {}", x.rows)));
    }
    let t = decoder_forward_inner(&params.arch.decoder, &params.data, &x.data);
    if !t.prob.is_finite() || t.a.iter().any(|a| a.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical("non-finite activation in decoder".into()));
    }
    Ok(t)
}

/// Flattens the token matrix and maps it to an edge probability in (0, 1).
pub fn decoder_forward(x: &FeatureMap, params: &ModelParameters) -> Result<f64> {
    Ok(decoder_traced(params, x)?.probability())
}

// ----------------------------------------------------------------- composite

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct Trace {
    branches: [BranchTrace; 2],
    features: FeatureMap,
    layers: Vec<EncoderTrace>,
    decoder: DecoderTrace,
}

impl Trace {
    pub fn output(&self) -> f64 {
        self.decoder.prob
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    /// Accumulates `dL/dtheta` into `grads` given `upstream = dL/de`.
    pub fn backward(&self, params: &ModelParameters, upstream: f64, grads: &mut Gradients) -> Result<()> {
        check_grads(params, grads)?;
        if !upstream.is_finite() {
            return Err(Error::Numerical("non-finite upstream gradient".into()));
        }
        if upstream == 0.0 {
            return Ok(());
        }
        let arch = &params.arch;
        let data = &params.data;
        let g = &mut grads.data;
        let mut dx = decoder_backward(&arch.decoder, data, g, &self.decoder, upstream);
        for t in self.layers.iter().rev() {
            dx = encoder_backward(&arch.layers[t.layer], arch.hyper.heads, data, g, t, &dx);
        }
        let m = arch.hyper.group_size();
        for (gi, branch) in self.branches.iter().enumerate() {
            let rows = &dx[gi * m * W..(gi + 1) * m * W];
            let d_euc: Vec<f64> = rows.chunks_exact(W).map(|r| r[4]).collect();
            let d_cos: Vec<f64> = rows.chunks_exact(W).map(|r| r[5]).collect();
            branch_backward(&arch.groups[gi], data, g, branch, &d_euc, &d_cos);
        }
        Ok(())
    }
}

/// Full forward pass keeping every intermediate for backpropagation.
pub fn forward_traced(patch: &SurfacePatch, params: &ModelParameters) -> Result<Trace> {
    let k = params.k();
    if patch.k() != k {
        return Err(Error::ModelShape(format!("patch has k={}, model expects k={k}", patch.k())));
    }
    let m = k / 2;
    let first = distance_matrices(&patch.dvecs[..m], patch.scale)?;
    let second = distance_matrices(&patch.dvecs[m..], patch.scale)?;
    let branches = [
        rbf_branch_traced(params, Group::First, first)?,
        rbf_branch_traced(params, Group::Second, second)?,
    ];
    let features = assemble_features(patch, &branches[0].descriptors(), &branches[1].descriptors())?;
    ensure_finite(&features.data, "feature map")?;
    let mut layers = Vec::with_capacity(params.arch.layers.len());
    let mut cur = features.clone();
    for l in 0..params.arch.layers.len() {
        let t = encoder_layer_traced(params, l, &cur)?;
        cur = t.output();
        layers.push(t);
    }
    let decoder = decoder_traced(params, &cur)?;
    Ok(Trace {
        branches,
        features,
        layers,
        decoder,
    })
}

/// Edge probability for one patch.
pub fn forward(patch: &SurfacePatch, params: &ModelParameters) -> Result<f64> {
    Ok(forward_traced(patch, params)?.output())
}

/// Stateful forward/backward pair: `backward` consumes the cached forward.
#[derive(Debug)]
pub struct Session<'a> {
    params: &'a ModelParameters,
    cache: Option<Trace>,
}

impl<'a> Session<'a> {
    pub fn new(params: &'a ModelParameters) -> Self {
        Self { params, cache: None }
    }

    pub fn forward(&mut self, patch: &SurfacePatch) -> Result<f64> {
        let trace = forward_traced(patch, self.params)?;
        let e = trace.output();
        self.cache = Some(trace);
        Ok(e)
    }

    pub fn backward(&mut self, upstream: f64, grads: &mut Gradients) -> Result<()> {
        let trace = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        trace.backward(self.params, upstream, grads)
    }
}
