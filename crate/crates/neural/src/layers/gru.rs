use rand_chacha::ChaCha8Rng;

use super::{Layer, Param};
use crate::error::{NnError, Result};
use crate::linalg::gemm;
use crate::tensor::Tensor;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights of a single GRU cell. Gate blocks are laid out `[update | reset | candidate]`:
/// `w` is `(input, 3 * units)`, `u` is `(units, 3 * units)`, `b` is `3 * units`.
#[derive(Clone, Debug)]
pub struct GruParams {
    pub input: usize,
    pub units: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

/// One GRU step on a single example:
///
/// ```text
/// z  = sigmoid(W_z x + U_z h + b_z)
/// r  = sigmoid(W_r x + U_r h + b_r)
/// h~ = tanh(W_h x + U_h (r * h) + b_h)
/// h' = (1 - z) * h + z * h~
/// ```
pub fn gru_cell(x: &[f64], h_prev: &[f64], p: &GruParams) -> Result<Vec<f64>> {
    let (i, u) = (p.input, p.units);
    if x.len() != i || h_prev.len() != u || p.w.len() != i * 3 * u || p.u.len() != u * 3 * u || p.b.len() != 3 * u {
        return Err(NnError::Shape(format!(
            "gru_cell: x {} / h {} incompatible with input {i}, units {u}",
            x.len(),
            h_prev.len()
        )));
    }
    let affine = |gate: usize, j: usize, hvec: &[f64]| -> (f64, f64) {
        let col = gate * u + j;
        let wx: f64 = (0..i).map(|k| x[k] * p.w[k * 3 * u + col]).sum();
        let uh: f64 = (0..u).map(|k| hvec[k] * p.u[k * 3 * u + col]).sum();
        (wx + p.b[col], uh)
    };
    let mut z = vec![0.0; u];
    let mut r = vec![0.0; u];
    for j in 0..u {
        let (a, h) = affine(0, j, h_prev);
        z[j] = sigmoid(a + h);
        let (a, h) = affine(1, j, h_prev);
        r[j] = sigmoid(a + h);
    }
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    Ok((0..u)
        .map(|j| {
            let (a, h) = affine(2, j, &rh);
            let cand = (a + h).tanh();
            (1.0 - z[j]) * h_prev[j] + z[j] * cand
        })
        .collect())
}

/// Batched GRU layer over `(batch, time, channels)` input with zero initial state.
/// Emits either the full hidden sequence `(batch, time, units)` or the final
/// state `(batch, units)`.
#[derive(Debug)]
pub struct Gru {
    input: usize,
    units: usize,
    return_sequences: bool,
    w: Param,
    u: Param,
    b: Param,
    cache: Option<Cache>,
}

#[derive(Debug)]
struct Cache {
    x: Tensor,
    // Per time step, each `(batch, units)`.
    h_prev: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
}

impl Gru {
    pub fn new(prefix: &str, input: usize, units: usize, return_sequences: bool, rng: &mut ChaCha8Rng) -> Self {
        Self {
            input,
            units,
            return_sequences,
            w: Param::glorot(format!("{prefix}.w"), input * 3 * units, input, 3 * units, rng),
            u: Param::glorot(format!("{prefix}.u"), units * 3 * units, units, 3 * units, rng),
            b: Param::zeros(format!("{prefix}.b"), 3 * units),
            cache: None,
        }
    }

    pub fn from_params(p: GruParams, return_sequences: bool) -> Self {
        let units = p.units;
        Self {
            input: p.input,
            units,
            return_sequences,
            w: Param { name: "gru.w".into(), grad: vec![0.0; p.w.len()], value: p.w },
            u: Param { name: "gru.u".into(), grad: vec![0.0; p.u.len()], value: p.u },
            b: Param { name: "gru.b".into(), grad: vec![0.0; p.b.len()], value: p.b },
            cache: None,
        }
    }

    pub fn cell_params(&self) -> GruParams {
        GruParams {
            input: self.input,
            units: self.units,
            w: self.w.value.clone(),
            u: self.u.value.clone(),
            b: self.b.value.clone(),
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    fn run(&self, x: &Tensor, mut cache: Option<&mut Cache>) -> Result<Tensor> {
        let (bsz, t, c) = x.dims3()?;
        if c != self.input {
            return Err(NnError::Shape(format!("gru expects {} channels, got {c}", self.input)));
        }
        let u = self.units;
        let g = 3 * u;
        let mut xw = Vec::with_capacity(bsz * t * g);
        for _ in 0..bsz * t {
            xw.extend_from_slice(&self.b.value);
        }
        gemm(false, false, bsz * t, g, c, 1.0, x.data(), c, &self.w.value, g, 1.0, &mut xw, g);

        let mut h = vec![0.0; bsz * u];
        let mut hu = vec![0.0; bsz * 2 * u];
        let mut rh = vec![0.0; bsz * u];
        let mut hn = vec![0.0; bsz * u];
        let mut seq_out = if self.return_sequences { vec![0.0; bsz * t * u] } else { Vec::new() };
        for s in 0..t {
            gemm(false, false, bsz, 2 * u, u, 1.0, &h, u, &self.u.value, g, 0.0, &mut hu, 2 * u);
            let mut z = vec![0.0; bsz * u];
            let mut r = vec![0.0; bsz * u];
            for bi in 0..bsz {
                let xrow = &xw[(bi * t + s) * g..(bi * t + s + 1) * g];
                for j in 0..u {
                    let k = bi * u + j;
                    z[k] = sigmoid(xrow[j] + hu[bi * 2 * u + j]);
                    r[k] = sigmoid(xrow[u + j] + hu[bi * 2 * u + u + j]);
                    rh[k] = r[k] * h[k];
                }
            }
            gemm(false, false, bsz, u, u, 1.0, &rh, u, &self.u.value[2 * u..], g, 0.0, &mut hn, u);
            let mut n = vec![0.0; bsz * u];
            let mut h_new = vec![0.0; bsz * u];
            for bi in 0..bsz {
                let xrow = &xw[(bi * t + s) * g..(bi * t + s + 1) * g];
                for j in 0..u {
                    let k = bi * u + j;
                    n[k] = (xrow[2 * u + j] + hn[k]).tanh();
                    h_new[k] = (1.0 - z[k]) * h[k] + z[k] * n[k];
                }
            }
            if self.return_sequences {
                for bi in 0..bsz {
                    seq_out[(bi * t + s) * u..(bi * t + s + 1) * u].copy_from_slice(&h_new[bi * u..(bi + 1) * u]);
                }
            }
            let h_prev = std::mem::replace(&mut h, h_new);
            if let Some(cache) = cache.as_deref_mut() {
                cache.h_prev.push(h_prev);
                cache.z.push(z);
                cache.r.push(r);
                cache.n.push(n);
            }
        }
        if self.return_sequences {
            Tensor::new(vec![bsz, t, u], seq_out)
        } else {
            Tensor::new(vec![bsz, u], h)
        }
    }
}

impl Layer for Gru {
    fn name(&self) -> &str {
        "gru"
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, None)
    }

    fn forward_train(&mut self, x: &Tensor, _rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let mut cache = Cache { x: x.clone(), h_prev: Vec::new(), z: Vec::new(), r: Vec::new(), n: Vec::new() };
        let out = self.run(x, Some(&mut cache))?;
        self.cache = Some(cache);
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        let (bsz, t, c) = cache.x.dims3()?;
        let u = self.units;
        let g = 3 * u;
        let expected: &[usize] = if self.return_sequences { &[bsz, t, u] } else { &[bsz, u] };
        if grad_out.shape() != expected {
            return Err(NnError::Shape("gru gradient shape mismatch".into()));
        }
        let gy = grad_out.data();
        let mut dxw = vec![0.0; bsz * t * g];
        let mut dh = vec![0.0; bsz * u];
        let mut dan = vec![0.0; bsz * u];
        let mut dzr = vec![0.0; bsz * 2 * u];
        let mut drh = vec![0.0; bsz * u];
        let mut rh = vec![0.0; bsz * u];
        for s in (0..t).rev() {
            if self.return_sequences {
                for bi in 0..bsz {
                    for j in 0..u {
                        dh[bi * u + j] += gy[(bi * t + s) * u + j];
                    }
                }
            } else if s == t - 1 {
                for (d, v) in dh.iter_mut().zip(gy) {
                    *d += v;
                }
            }
            let (hp, z, r, n) = (&cache.h_prev[s], &cache.z[s], &cache.r[s], &cache.n[s]);
            let mut dhp = vec![0.0; bsz * u];
            for bi in 0..bsz {
                for j in 0..u {
                    let k = bi * u + j;
                    let dn = dh[k] * z[k];
                    let dz = dh[k] * (n[k] - hp[k]);
                    dhp[k] = dh[k] * (1.0 - z[k]);
                    dan[k] = dn * (1.0 - n[k] * n[k]);
                    dzr[bi * 2 * u + j] = dz * z[k] * (1.0 - z[k]);
                    rh[k] = r[k] * hp[k];
                }
            }
            // Candidate path: h~ depends on U_h (r * h_prev).
            gemm(false, true, bsz, u, u, 1.0, &dan, u, &self.u.value[2 * u..], g, 0.0, &mut drh, u);
            gemm(true, false, u, u, bsz, 1.0, &rh, u, &dan, u, 1.0, &mut self.u.grad[2 * u..], g);
            for bi in 0..bsz {
                for j in 0..u {
                    let k = bi * u + j;
                    let dr = drh[k] * hp[k];
                    dhp[k] += drh[k] * r[k];
                    dzr[bi * 2 * u + u + j] = dr * r[k] * (1.0 - r[k]);
                }
            }
            gemm(true, false, u, 2 * u, bsz, 1.0, hp, u, &dzr, 2 * u, 1.0, &mut self.u.grad, g);
            gemm(false, true, bsz, u, 2 * u, 1.0, &dzr, 2 * u, &self.u.value, g, 1.0, &mut dhp, u);
            for bi in 0..bsz {
                let row = &mut dxw[(bi * t + s) * g..(bi * t + s + 1) * g];
                row[..2 * u].copy_from_slice(&dzr[bi * 2 * u..(bi + 1) * 2 * u]);
                row[2 * u..].copy_from_slice(&dan[bi * u..(bi + 1) * u]);
            }
            dh = dhp;
        }
        gemm(true, false, c, g, bsz * t, 1.0, cache.x.data(), c, &dxw, g, 1.0, &mut self.w.grad, g);
        for row in dxw.chunks_exact(g) {
            for (acc, v) in self.b.grad.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut dx = vec![0.0; bsz * t * c];
        gemm(false, true, bsz * t, c, g, 1.0, &dxw, g, &self.w.value, g, 0.0, &mut dx, c);
        Tensor::new(vec![bsz, t, c], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.u, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}
