//! Batched forward/backward through an [`Mlp`] with dual channels.
//!
//! Activations of a layer are stored as a `neurons x (channels * batch)`
//! row-major block: channel `c` of point `b` for neuron `n` lives at
//! `n * C * B + c * B + b`. Channel 0 is the value, 1 and 2 the spatial
//! gradient, 3..6 the Hessian `(xx, xy, yy)` in second-order mode. With this
//! layout every dense step is one GEMM over all channels at once, and the
//! recorded layer blocks act as the tape for the reverse sweep.

use super::mlp::{count_second_order_pass, Mlp};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DerivOrder {
    First,
    Second,
}

impl DerivOrder {
    pub fn channels(self) -> usize {
        match self {
            DerivOrder::First => 3,
            DerivOrder::Second => 6,
        }
    }
}

pub const CH_VALUE: usize = 0;
pub const CH_X: usize = 1;
pub const CH_Y: usize = 2;
pub const CH_XX: usize = 3;
pub const CH_XY: usize = 4;
pub const CH_YY: usize = 5;

/// Recorded forward pass of one network over a batch of points.
#[derive(Clone, Debug, Default)]
pub struct BatchTrace {
    order: Option<DerivOrder>,
    batch: usize,
    /// `z[0]` is the seeded input, `z[l]` the output of layer `l`.
    z: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers (`a[l]` feeds `z[l + 1]`).
    a: Vec<Vec<f64>>,
}

impl BatchTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn order(&self) -> DerivOrder {
        self.order.unwrap_or(DerivOrder::First)
    }

    pub fn channels(&self) -> usize {
        self.order().channels()
    }

    /// Output block `n_out x C x B`.
    pub fn output(&self) -> &[f64] {
        self.z.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Channel `c` of output `o` at point `b`.
    pub fn output_at(&self, o: usize, c: usize, b: usize) -> f64 {
        let cb = self.channels() * self.batch;
        self.output()[o * cb + c * self.batch + b]
    }
}

/// Reusable scratch for the reverse sweep.
#[derive(Clone, Debug, Default)]
pub struct BackwardScratch {
    upstream: Vec<f64>,
    pre: Vec<f64>,
}

/// `c = alpha * a * b + beta * c` on row-major blocks, with optional
/// transposition of `a` or `b` expressed through strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_transposed { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_transposed { (1, k) } else { (n, 1) };
    // SAFETY: bounds asserted above; strides describe dense row-major blocks
    // of exactly those sizes and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Forward all `points` (only the first coordinate is used for 1-D
    /// networks), recording every layer into `trace`.
    pub fn forward_batch_into(
        &self,
        points: &[[f64; 2]],
        order: DerivOrder,
        trace: &mut BatchTrace,
    ) -> Result<()> {
        let d = self.input_dim();
        if d > 2 {
            return Err(Error::structural(format!(
                "batched evaluation supports 1 or 2 inputs, network has {d}"
            )));
        }
        if order == DerivOrder::Second {
            count_second_order_pass();
        }
        let bsz = points.len();
        let ch = order.channels();
        let cb = ch * bsz;
        let n_layers = self.num_layers();
        trace.order = Some(order);
        trace.batch = bsz;
        trace.z.resize_with(n_layers + 1, Vec::new);
        trace.a.resize_with(n_layers.saturating_sub(1), Vec::new);

        let z0 = &mut trace.z[0];
        z0.clear();
        z0.resize(d * cb, 0.0);
        for (i, p) in points.iter().enumerate() {
            z0[i] = p[0];
            z0[CH_X * bsz + i] = 1.0;
            if d == 2 {
                z0[cb + i] = p[1];
                z0[cb + CH_Y * bsz + i] = 1.0;
            }
        }

        let params = self.params();
        for (l, layer) in self.layers().into_iter().enumerate() {
            let hidden = l + 1 < n_layers;
            let (prev, rest) = trace.z.split_at_mut(l + 1);
            let input = &prev[l];
            let target = if hidden {
                &mut trace.a[l]
            } else {
                &mut rest[0]
            };
            target.clear();
            target.resize(layer.fan_out * cb, 0.0);
            gemm(
                layer.fan_out,
                layer.fan_in,
                cb,
                &params[layer.weights..layer.bias],
                false,
                input,
                false,
                0.0,
                target,
            );
            for m in 0..layer.fan_out {
                let bias = params[layer.bias + m];
                for v in &mut target[m * cb..m * cb + bsz] {
                    *v += bias;
                }
            }
            if hidden {
                let pre = &trace.a[l];
                let out = &mut rest[0];
                out.clear();
                out.resize(layer.fan_out * cb, 0.0);
                for m in 0..layer.fan_out {
                    activate(
                        &pre[m * cb..(m + 1) * cb],
                        &mut out[m * cb..(m + 1) * cb],
                        bsz,
                        order,
                    );
                }
            }
        }
        Ok(())
    }

    pub fn forward_batch(&self, points: &[[f64; 2]], order: DerivOrder) -> Result<BatchTrace> {
        let mut trace = BatchTrace::default();
        self.forward_batch_into(points, order, &mut trace)?;
        Ok(trace)
    }

    /// Reverse sweep: given the adjoint of the output block (same layout as
    /// [`BatchTrace::output`]), accumulate `d loss / d params` into `grad`.
    pub fn backward_batch(
        &self,
        trace: &BatchTrace,
        output_adjoint: &[f64],
        grad: &mut [f64],
        scratch: &mut BackwardScratch,
    ) -> Result<()> {
        let bsz = trace.batch;
        let order = trace.order();
        let cb = order.channels() * bsz;
        let n_layers = self.num_layers();
        if trace.z.len() != n_layers + 1 {
            return Err(Error::structural("trace was recorded for a different network"));
        }
        if output_adjoint.len() != self.output_dim() * cb {
            return Err(Error::structural(format!(
                "output adjoint has {} entries, expected {}",
                output_adjoint.len(),
                self.output_dim() * cb
            )));
        }
        if grad.len() != self.num_params() {
            return Err(Error::structural("gradient buffer has the wrong length"));
        }
        let params = self.params();
        scratch.upstream.clear();
        scratch.upstream.extend_from_slice(output_adjoint);

        for l in (0..n_layers).rev() {
            let layer = self.layer(l);
            let hidden = l + 1 < n_layers;
            // adjoint of the pre-activation of layer l
            if hidden {
                let pre = &trace.a[l];
                let post = &trace.z[l + 1];
                scratch.pre.clear();
                scratch.pre.resize(layer.fan_out * cb, 0.0);
                for m in 0..layer.fan_out {
                    let r = m * cb..(m + 1) * cb;
                    activate_backward(
                        &pre[r.clone()],
                        &post[r.clone()],
                        &scratch.upstream[r.clone()],
                        &mut scratch.pre[r],
                        bsz,
                        order,
                    );
                }
            } else {
                std::mem::swap(&mut scratch.pre, &mut scratch.upstream);
            }
            let abar = &scratch.pre;
            let input = &trace.z[l];
            gemm(
                layer.fan_out,
                cb,
                layer.fan_in,
                abar,
                false,
                input,
                true,
                1.0,
                &mut grad[layer.weights..layer.bias],
            );
            for m in 0..layer.fan_out {
                grad[layer.bias + m] += abar[m * cb..m * cb + bsz].iter().sum::<f64>();
            }
            if l > 0 {
                scratch.upstream.clear();
                scratch.upstream.resize(layer.fan_in * cb, 0.0);
                gemm(
                    layer.fan_in,
                    layer.fan_out,
                    cb,
                    &params[layer.weights..layer.bias],
                    true,
                    abar,
                    false,
                    0.0,
                    &mut scratch.upstream,
                );
            }
        }
        Ok(())
    }
}

#[inline]
fn activate(pre: &[f64], out: &mut [f64], bsz: usize, order: DerivOrder) {
    let (a0, rest) = pre.split_at(bsz);
    let (ax, rest) = rest.split_at(bsz);
    let ay = &rest[..bsz];
    let (z0, rest) = out.split_at_mut(bsz);
    let (zx, rest) = rest.split_at_mut(bsz);
    let (zy, rest) = rest.split_at_mut(bsz);
    for b in 0..bsz {
        let t = a0[b].tanh();
        let t1 = 1.0 - t * t;
        z0[b] = t;
        zx[b] = t1 * ax[b];
        zy[b] = t1 * ay[b];
    }
    if order == DerivOrder::Second {
        let axx = &pre[3 * bsz..4 * bsz];
        let axy = &pre[4 * bsz..5 * bsz];
        let ayy = &pre[5 * bsz..6 * bsz];
        let (zxx, rest) = rest.split_at_mut(bsz);
        let (zxy, zyy) = rest.split_at_mut(bsz);
        for b in 0..bsz {
            let t = z0[b];
            let t1 = 1.0 - t * t;
            let t2 = -2.0 * t * t1;
            zxx[b] = t2 * ax[b] * ax[b] + t1 * axx[b];
            zxy[b] = t2 * ax[b] * ay[b] + t1 * axy[b];
            zyy[b] = t2 * ay[b] * ay[b] + t1 * ayy[b];
        }
    }
}

#[inline]
fn activate_backward(
    pre: &[f64],
    post: &[f64],
    upstream: &[f64],
    out: &mut [f64],
    bsz: usize,
    order: DerivOrder,
) {
    let ax = &pre[bsz..2 * bsz];
    let ay = &pre[2 * bsz..3 * bsz];
    let t = &post[..bsz];
    let g0 = &upstream[..bsz];
    let gx = &upstream[bsz..2 * bsz];
    let gy = &upstream[2 * bsz..3 * bsz];
    let (o0, rest) = out.split_at_mut(bsz);
    let (ox, rest) = rest.split_at_mut(bsz);
    let (oy, rest) = rest.split_at_mut(bsz);
    for b in 0..bsz {
        let t1 = 1.0 - t[b] * t[b];
        let t2 = -2.0 * t[b] * t1;
        o0[b] = g0[b] * t1 + t2 * (gx[b] * ax[b] + gy[b] * ay[b]);
        ox[b] = gx[b] * t1;
        oy[b] = gy[b] * t1;
    }
    if order == DerivOrder::Second {
        let axx = &pre[3 * bsz..4 * bsz];
        let axy = &pre[4 * bsz..5 * bsz];
        let ayy = &pre[5 * bsz..6 * bsz];
        let gxx = &upstream[3 * bsz..4 * bsz];
        let gxy = &upstream[4 * bsz..5 * bsz];
        let gyy = &upstream[5 * bsz..6 * bsz];
        let (oxx, rest) = rest.split_at_mut(bsz);
        let (oxy, oyy) = rest.split_at_mut(bsz);
        for b in 0..bsz {
            let tb = t[b];
            let t1 = 1.0 - tb * tb;
            let t2 = -2.0 * tb * t1;
            let t3 = -2.0 * t1 * t1 + 4.0 * tb * tb * t1;
            let (x, y) = (ax[b], ay[b]);
            o0[b] += gxx[b] * (t3 * x * x + t2 * axx[b])
                + gxy[b] * (t3 * x * y + t2 * axy[b])
                + gyy[b] * (t3 * y * y + t2 * ayy[b]);
            ox[b] += 2.0 * t2 * x * gxx[b] + t2 * y * gxy[b];
            oy[b] += 2.0 * t2 * y * gyy[b] + t2 * x * gxy[b];
            oxx[b] = gxx[b] * t1;
            oxy[b] = gxy[b] * t1;
            oyy[b] = gyy[b] * t1;
        }
    }
}
