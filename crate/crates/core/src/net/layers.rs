//! Dense kernels on row-major slices. Backward functions accumulate (`+=`)
//! into their gradient outputs.

pub(crate) const LN_EPS: f64 = 1e-5;

/// `y[r] = W x[r] + b` for `rows` inputs; `W` is `fan_out x fan_in`.
pub(crate) fn linear_forward(x: &[f64], rows: usize, w: &[f64], b: &[f64], fan_in: usize, fan_out: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows * fan_in);
    debug_assert_eq!(w.len(), fan_in * fan_out);
    let mut y = Vec::with_capacity(rows * fan_out);
    for xr in x.chunks_exact(fan_in) {
        for (wo, bo) in w.chunks_exact(fan_in).zip(b) {
            y.push(bo + dot(wo, xr));
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    fan_in: usize,
    fan_out: usize,
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    for (xr, dyr) in x.chunks_exact(fan_in).zip(dy.chunks_exact(fan_out)) {
        for ((dwo, dbo), &g) in dw.chunks_exact_mut(fan_in).zip(db.iter_mut()).zip(dyr) {
            if g == 0.0 {
                continue;
            }
            *dbo += g;
            axpy(g, xr, dwo);
        }
    }
    if let Some(dx) = dx {
        for (dxr, dyr) in dx.chunks_exact_mut(fan_in).zip(dy.chunks_exact(fan_out)) {
            for (wo, &g) in w.chunks_exact(fan_in).zip(dyr) {
                if g != 0.0 {
                    axpy(g, wo, dxr);
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

/// Zeroes gradient entries whose pre-activation was not positive.
pub(crate) fn relu_backward(z: &[f64], grad: &mut [f64]) {
    for (g, &v) in grad.iter_mut().zip(z) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-row layer-norm statistics kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct NormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm_forward(x: &[f64], width: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, NormCache) {
    let rows = x.len() / width;
    let mut y = Vec::with_capacity(x.len());
    let mut xhat = Vec::with_capacity(x.len());
    let mut rstd = Vec::with_capacity(rows);
    for xr in x.chunks_exact(width) {
        let mean = xr.iter().sum::<f64>() / width as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd.push(r);
        for (i, v) in xr.iter().enumerate() {
            let h = (v - mean) * r;
            xhat.push(h);
            y.push(gain[i] * h + bias[i]);
        }
    }
    (y, NormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    cache: &NormCache,
    gain: &[f64],
    dy: &[f64],
    width: usize,
    dgain: &mut [f64],
    dbias: &mut [f64],
    dx: &mut [f64],
) {
    let n = width as f64;
    let mut dxhat = vec![0.0; width];
    for (((xh, dyr), dxr), &r) in cache
        .xhat
        .chunks_exact(width)
        .zip(dy.chunks_exact(width))
        .zip(dx.chunks_exact_mut(width))
        .zip(&cache.rstd)
    {
        for i in 0..width {
            dgain[i] += dyr[i] * xh[i];
            dbias[i] += dyr[i];
            dxhat[i] = dyr[i] * gain[i];
        }
        let mean_d = dxhat.iter().sum::<f64>() / n;
        let mean_dx = dot(&dxhat, xh) / n;
        for i in 0..width {
            dxr[i] += r * (dxhat[i] - mean_d - xh[i] * mean_dx);
        }
    }
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(s: &mut [f64], width: usize) {
    for row in s.chunks_exact_mut(width) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize) -> f64 {
        let h = 1e-5;
        let mut p = x.to_vec();
        p[i] += h;
        let up = f(&p);
        p[i] -= 2.0 * h;
        (up - f(&p)) / (2.0 * h)
    }

    #[test]
    fn linear_gradients() {
        let x = [0.3, -1.2, 0.7, 2.0, 0.1, -0.4];
        let w = [0.5, -0.2, 0.1, 0.9, 0.3, -0.7, 0.25, 0.4, 0.6, -0.3, 0.8, 0.15];
        let b = [0.05, -0.1, 0.2, 0.0];
        let up = [1.0, -2.0, 0.5, 0.3, 0.7, -0.1, 0.2, 1.1];
        let loss = |x: &[f64], w: &[f64]| dot(&linear_forward(x, 2, w, &b, 3, 4), &up);
        let mut dw = vec![0.0; 12];
        let mut db = vec![0.0; 4];
        let mut dx = vec![0.0; 6];
        linear_backward(&x, &w, &up, 3, 4, &mut dw, &mut db, Some(&mut dx));
        for i in 0..12 {
            assert!((dw[i] - fd(|w| loss(&x, w), &w, i)).abs() < 1e-8);
        }
        for i in 0..6 {
            assert!((dx[i] - fd(|x| loss(x, &w), &x, i)).abs() < 1e-8);
        }
        assert!((db[0] - (1.0 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn layer_norm_gradients() {
        let x = [0.3, -1.2, 0.7, 2.0, 0.1, -0.4, 1.5, 0.2, -0.9, 0.0, 0.6, 0.35];
        let g = [1.1, 0.9, -0.5, 1.0, 0.3, 2.0];
        let b = [0.0, 0.1, 0.2, -0.3, 0.0, 0.5];
        let up: Vec<f64> = (0..12).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let loss = |x: &[f64], g: &[f64]| dot(&layer_norm_forward(x, 6, g, &b).0, &up);
        let (_, cache) = layer_norm_forward(&x, 6, &g, &b);
        let (mut dg, mut db, mut dx) = (vec![0.0; 6], vec![0.0; 6], vec![0.0; 12]);
        layer_norm_backward(&cache, &g, &up, 6, &mut dg, &mut db, &mut dx);
        for i in 0..12 {
            assert!((dx[i] - fd(|x| loss(x, &g), &x, i)).abs() < 1e-7, "dx[{i}]");
        }
        for i in 0..6 {
            assert!((dg[i] - fd(|g| loss(&x, g), &g, i)).abs() < 1e-7, "dg[{i}]");
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(10.0) - 0.999_954_602_131_297_6).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut s = vec![1000.0, 1001.0, 999.0, -3.0, 0.0, 3.0];
        softmax_rows(&mut s, 3);
        assert!((s[..3].iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(s[1] > s[0] && s[0] > s[2]);
    }
}
