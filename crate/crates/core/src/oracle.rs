//! Slow reference implementations used by the test suites and `selftest`.
//! Everything here is written for clarity, in f64, with plain index loops.

use rustfft::num_complex::Complex;

use crate::kernels::ConvSpec;
use crate::tensor::RealTensor;

fn bias_at(bias: Option<&RealTensor<f64>>, o: usize) -> f64 {
    bias.map_or(0.0, |b| b.data()[o])
}

/// Direct 1D convolution (cross-correlation) with zero padding.
pub fn conv1d(x: &RealTensor<f64>, spec: &ConvSpec, w: &RealTensor<f64>, bias: Option<&RealTensor<f64>>) -> Vec<Vec<f64>> {
    let (cin, len) = (x.shape()[0], x.shape()[1]);
    assert_eq!(cin, spec.in_channels);
    let (k, s, d, p) = (spec.kernel[0], spec.stride[0], spec.dilation[0], spec.padding[0]);
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    let lout = (len + 2 * p - d * (k - 1) - 1) / s + 1;
    let mut y = vec![vec![0.0; lout]; spec.out_channels];
    for o in 0..spec.out_channels {
        let g = o / cout_g;
        for t in 0..lout {
            let mut acc = bias_at(bias, o);
            for ic in 0..cin_g {
                for j in 0..k {
                    let pos = (t * s + j * d) as isize - p as isize;
                    if pos >= 0 && (pos as usize) < len {
                        acc += w.data()[(o * cin_g + ic) * k + j] * x.data()[(g * cin_g + ic) * len + pos as usize];
                    }
                }
            }
            y[o][t] = acc;
        }
    }
    y
}

/// Direct 2D convolution over `[C, H, W]`, result flattened `[C_out][H_out * W_out]`.
pub fn conv2d(x: &RealTensor<f64>, spec: &ConvSpec, w: &RealTensor<f64>, bias: Option<&RealTensor<f64>>) -> (Vec<Vec<f64>>, usize, usize) {
    let (cin, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    assert_eq!(cin, spec.in_channels);
    let [kh, kw] = [spec.kernel[0], spec.kernel[1]];
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    let out_dim = |n: usize, a: usize| (n + 2 * spec.padding[a] - spec.dilation[a] * (spec.kernel[a] - 1) - 1) / spec.stride[a] + 1;
    let (ho, wo) = (out_dim(h, 0), out_dim(wd, 1));
    let mut y = vec![vec![0.0; ho * wo]; spec.out_channels];
    for o in 0..spec.out_channels {
        let g = o / cout_g;
        for r in 0..ho {
            for c in 0..wo {
                let mut acc = bias_at(bias, o);
                for ic in 0..cin_g {
                    for i in 0..kh {
                        for j in 0..kw {
                            let pr = (r * spec.stride[0] + i * spec.dilation[0]) as isize - spec.padding[0] as isize;
                            let pc = (c * spec.stride[1] + j * spec.dilation[1]) as isize - spec.padding[1] as isize;
                            if pr < 0 || pc < 0 || pr as usize >= h || pc as usize >= wd {
                                continue;
                            }
                            let wv = w.data()[((o * cin_g + ic) * kh + i) * kw + j];
                            acc += wv * x.data()[((g * cin_g + ic) * h + pr as usize) * wd + pc as usize];
                        }
                    }
                }
                y[o][r * wo + c] = acc;
            }
        }
    }
    (y, ho, wo)
}

/// The forward convolution whose adjoint is the transposed convolution `spec`.
pub fn adjoint_spec(spec: &ConvSpec) -> ConvSpec {
    let mut f = spec.clone();
    f.in_channels = spec.out_channels;
    f.out_channels = spec.in_channels;
    f.bias = false;
    f
}

/// Transposed convolution computed as the matrix transpose of [`conv1d`]:
/// column `(o, l)` of the forward operator is found by convolving the unit
/// impulse at `(o, l)`.
pub fn conv_transpose1d(x: &RealTensor<f64>, spec: &ConvSpec, w: &RealTensor<f64>, bias: Option<&RealTensor<f64>>) -> Vec<Vec<f64>> {
    let (cin, lin) = (x.shape()[0], x.shape()[1]);
    assert_eq!(cin, spec.in_channels);
    let fwd = adjoint_spec(spec);
    let lout = (lin - 1) * spec.stride[0] + spec.dilation[0] * (spec.kernel[0] - 1) + 1 - 2 * spec.padding[0];
    let mut y = vec![vec![0.0; lout]; spec.out_channels];
    for o in 0..spec.out_channels {
        for l in 0..lout {
            let mut e = RealTensor::zeros(&[spec.out_channels, lout]);
            e.data_mut()[o * lout + l] = 1.0;
            let col = conv1d(&e, &fwd, w, None);
            let mut acc = bias_at(bias, o);
            for c in 0..cin {
                for t in 0..lin {
                    acc += col[c][t] * x.data()[c * lin + t];
                }
            }
            y[o][l] = acc;
        }
    }
    y
}

/// Direct O(N^2) DFT of a real sequence, bins `0..=N/2`.
pub fn rdft(x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            x.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (t, &v)| {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                acc + Complex::new(v * ang.cos(), v * ang.sin())
            })
        })
        .collect()
}

/// Centered STFT with reflect padding, periodic Hann window and a direct DFT;
/// returns `[frame][bin]`.
pub fn stft(x: &[f64], n_fft: usize, hop: usize) -> Vec<Vec<Complex<f64>>> {
    let half = (n_fft / 2) as isize;
    let n = x.len() as isize;
    let reflect = |mut i: isize| {
        while i < 0 || i >= n {
            if i < 0 {
                i = -i;
            }
            if i >= n {
                i = 2 * (n - 1) - i;
            }
        }
        i as usize
    };
    let window: Vec<f64> =
        (0..n_fft).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos()).collect();
    let frames = 1 + x.len() / hop;
    (0..frames)
        .map(|m| {
            let seg: Vec<f64> = (0..n_fft)
                .map(|i| {
                    let idx = (m * hop) as isize + i as isize - half;
                    window[i] * if n == 1 { x[0] } else { x[reflect(idx)] }
                })
                .collect();
            rdft(&seg)
        })
        .collect()
}

/// FMS by the textbook formula on a single `[F, T]` map.
pub fn fms(x: &[Vec<f64>], w: f64, b: f64) -> Vec<Vec<f64>> {
    let f = x.len() as f64;
    let t = x[0].len();
    let gates: Vec<f64> = (0..t)
        .map(|j| {
            let a = x.iter().map(|row| row[j]).sum::<f64>() / f;
            1.0 / (1.0 + (-(w * a + b)).exp())
        })
        .collect();
    x.iter().map(|row| row.iter().zip(&gates).map(|(v, s)| v * s + v).collect()).collect()
}

/// `sum_i a_i b_i` over flattened nested vectors.
pub fn inner(a: &[Vec<f64>], b: &[f64]) -> f64 {
    a.iter().flatten().zip(b).map(|(x, y)| x * y).sum()
}
