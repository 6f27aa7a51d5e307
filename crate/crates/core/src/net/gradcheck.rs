//! Central finite-difference verification of analytic parameter gradients.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{
    decoder_forward, decoder_traced, encoder_layer_traced, forward, forward_traced, rbf_branch_traced, rbf_dos_forward,
    FeatureMap, Gradients, Group, Hyper, ModelParameters, ENCODER_LAYERS,
};
use crate::cloud::{SurfacePatch, Vec3};
use crate::error::Result;
use crate::rbf::distance_matrices;

/// Step used for the central difference.
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted relative error between analytic and numeric gradients.
pub const MAX_REL_ERR: f64 = 1e-4;
/// Magnitude below which a gradient is compared absolutely rather than
/// relatively. Central differences at `FD_STEP` carry rounding noise of
/// roughly `eps * |loss| / FD_STEP`, about 1e-10 to 1e-9 here, so exactly
/// zero gradients (e.g. attention key biases) would otherwise fail.
pub const REL_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= MAX_REL_ERR
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        if other.max_rel_err > self.max_rel_err || self.worst.is_none() {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst;
        }
    }
}

/// Compares `analytic` against central differences of `loss` for every
/// parameter whose tensor name satisfies `select`.
pub fn check_parameters(
    params: &ModelParameters,
    analytic: &Gradients,
    select: impl Fn(&str) -> bool,
    loss: impl Fn(&ModelParameters) -> Result<f64> + Sync,
) -> Result<GradCheckReport> {
    let targets: Vec<(&str, usize, usize)> = params
        .tensor_infos()
        .iter()
        .filter(|t| select(&t.name))
        .flat_map(|t| t.range().enumerate().map(move |(n, idx)| (t.name.as_str(), n, idx)))
        .collect();
    let partials = targets
        .par_chunks(256)
        .map(|chunk| {
            let mut probe = params.clone();
            let mut report = GradCheckReport::default();
            for &(name, n, idx) in chunk {
                let orig = probe.data[idx];
                probe.data[idx] = orig + FD_STEP;
                let up = loss(&probe)?;
                probe.data[idx] = orig - FD_STEP;
                let down = loss(&probe)?;
                probe.data[idx] = orig;
                let numeric = (up - down) / (2.0 * FD_STEP);
                let a = analytic.data[idx];
                let err = relative_error(a, numeric);
                report.checked += 1;
                if err > report.max_rel_err || report.worst.is_none() {
                    report.max_rel_err = report.max_rel_err.max(err);
                    report.worst = Some((name.to_string(), n, a, numeric));
                }
            }
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = GradCheckReport::default();
    for p in partials {
        report.merge(p);
    }
    Ok(report)
}

/// Same as [`check_parameters`] for a gradient w.r.t. an input vector.
pub fn check_input(
    input: &[f64],
    analytic: &[f64],
    loss: impl Fn(&[f64]) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut probe = input.to_vec();
    let mut report = GradCheckReport::default();
    for i in 0..input.len() {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let up = loss(&probe)?;
        probe[i] = orig - FD_STEP;
        let down = loss(&probe)?;
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if err > report.max_rel_err || report.worst.is_none() {
            report.max_rel_err = report.max_rel_err.max(err);
            report.worst = Some(("input".into(), i, analytic[i], numeric));
        }
    }
    Ok(report)
}

/// Micro-model fixture: k=4 parameters with every entry (biases and
/// layer-norm terms included) randomly perturbed, plus a random patch.
pub fn micro_fixture(seed: u64) -> Result<(ModelParameters, SurfacePatch)> {
    let hyper = Hyper::new(4)?;
    let mut params = ModelParameters::init(hyper, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    for v in params.as_mut_slice() {
        *v += rng.random_range(-0.1..0.1);
    }
    let mut dvecs: Vec<Vec3> = (0..hyper.k)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.3..0.3),
            )
        })
        .collect();
    dvecs.sort_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()));
    let normal = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 1.0).normalize();
    let patch = SurfacePatch::from_parts(0, (1..=hyper.k).collect(), dvecs, normal)?;
    Ok((params, patch))
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn weighted(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// Runs every gradient check on one micro-model: each RBF branch, each
/// encoder layer and the decoder in isolation (parameters and layer input,
/// under a random linear read-out), and the full forward pass composed
/// with BCE. The BCE target alternates with the seed parity.
pub fn micro_model_checks(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let (params, patch) = micro_fixture(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    let m = params.hyper().group_size();
    let mut out = Vec::new();

    for (group, dvecs, name) in [
        (Group::First, &patch.dvecs[..m], "rbf.first"),
        (Group::Second, &patch.dvecs[m..], "rbf.second"),
    ] {
        let we = random_weights(&mut rng, m);
        let wc = random_weights(&mut rng, m);
        let trace = rbf_branch_traced(&params, group, distance_matrices(dvecs, patch.scale)?)?;
        let mut grads = params.zero_gradients();
        trace.backward(&params, &we, &wc, &mut grads)?;
        let prefix = format!("{name}.");
        let report = check_parameters(&params, &grads, |t| t.starts_with(&prefix), |p| {
            let d = rbf_dos_forward(dvecs, patch.scale, p, group)?;
            Ok(weighted(&d.euc, &we) + weighted(&d.cos, &wc))
        })?;
        out.push((name.to_string(), report));
    }

    let features = forward_traced(&patch, &params)?.features().clone();
    let mut x = features;
    for layer in 0..ENCODER_LAYERS {
        let readout = random_weights(&mut rng, x.as_slice().len());
        let trace = encoder_layer_traced(&params, layer, &x)?;
        let mut grads = params.zero_gradients();
        let dx = trace.backward(&params, &readout, &mut grads)?;
        let prefix = format!("encoder.{layer}.");
        let layer_loss = |p: &ModelParameters, input: &FeatureMap| -> Result<f64> {
            Ok(weighted(encoder_layer_traced(p, layer, input)?.output().as_slice(), &readout))
        };
        let mut report = check_parameters(&params, &grads, |t| t.starts_with(&prefix), |p| layer_loss(p, &x))?;
        report.merge(check_input(x.as_slice(), &dx, |input| {
            layer_loss(&params, &FeatureMap::new(x.rows(), input.to_vec())?)
        })?);
        out.push((format!("encoder.{layer}"), report));
        x = trace.output();
    }

    let c = rng.random_range(0.5..2.0);
    let trace = decoder_traced(&params, &x)?;
    let mut grads = params.zero_gradients();
    let dx = trace.backward(&params, c, &mut grads)?;
    let mut report = check_parameters(&params, &grads, |t| t.starts_with("decoder."), |p| {
        Ok(c * decoder_forward(&x, p)?)
    })?;
    report.merge(check_input(x.as_slice(), &dx, |input| {
        Ok(c * decoder_forward(&FeatureMap::new(x.rows(), input.to_vec())?, &params)?)
    })?);
    out.push(("decoder".to_string(), report));

    {
        let target = (seed % 2) as f64;
        let trace = forward_traced(&patch, &params)?;
        let (_, de) = crate::train::bce_loss(trace.output(), target)?;
        let mut grads = params.zero_gradients();
        trace.backward(&params, de, &mut grads)?;
        let report = check_parameters(&params, &grads, |_| true, |p| {
            Ok(crate::train::bce_loss(forward(&patch, p)?, target)?.0)
        })?;
        out.push((format!("end_to_end.target{target}"), report));
    }
    Ok(out)
}
