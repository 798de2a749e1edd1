//! Direct-definition transforms and convolutions.

use std::f64::consts::PI;

/// `X[k] = sum_n x[n] e^{-2 pi i k n / N}` for `k = 0..=N/2`, as (re, im).
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    let table = twiddles(n);
    (0..=n / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &v) in x.iter().enumerate() {
                let (c, s) = table[(k * t) % n];
                re += v * c;
                im -= v * s;
            }
            (re, im)
        })
        .collect()
}

/// Real signal of length `2 * (bins - 1)` whose half spectrum is `spec`,
/// treating the spectrum as Hermitian. Imaginary parts of the DC and
/// Nyquist bins are ignored.
pub fn naive_idft(spec: &[(f64, f64)]) -> Vec<f64> {
    let n = 2 * (spec.len() - 1);
    let table = twiddles(n);
    (0..n)
        .map(|t| {
            let mut acc = spec[0].0 + spec[n / 2].0 * if t % 2 == 0 { 1.0 } else { -1.0 };
            for (k, &(re, im)) in spec.iter().enumerate().take(n / 2).skip(1) {
                let (c, s) = table[(k * t) % n];
                acc += 2.0 * (re * c - im * s);
            }
            acc / n as f64
        })
        .collect()
}

fn twiddles(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect()
}

/// Same-length cross-correlation with zero padding.
/// `x` is T×C_in, `w[o][i][j]` has odd width `k`; output is T×C_out, no activation.
pub fn naive_conv1d(x: &[Vec<f64>], w: &[Vec<Vec<f64>>], bias: &[f64]) -> Vec<Vec<f64>> {
    let t_len = x.len();
    let k = w.first().and_then(|o| o.first()).map_or(1, Vec::len);
    let half = (k / 2) as isize;
    let mut out = vec![vec![0.0; w.len()]; t_len];
    for t in 0..t_len {
        for (o, w_o) in w.iter().enumerate() {
            let mut acc = bias[o];
            for (i, w_oi) in w_o.iter().enumerate() {
                for (j, &wv) in w_oi.iter().enumerate() {
                    let s = t as isize + j as isize - half;
                    if s >= 0 && (s as usize) < t_len {
                        acc += wv * x[s as usize][i];
                    }
                }
            }
            out[t][o] = acc;
        }
    }
    out
}

/// Same-size 2-D cross-correlation with zero padding over channel planes.
/// `x[i][t][f]`, `w[o][i][dt][df]`; output `y[o][t][f]`.
pub fn naive_conv2d(x: &[Vec<Vec<f64>>], w: &[Vec<Vec<Vec<f64>>>], bias: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let rows = x.first().map_or(0, Vec::len);
    let cols = x.first().and_then(|p| p.first()).map_or(0, Vec::len);
    let mut y = vec![vec![vec![0.0; cols]; rows]; w.len()];
    for (o, w_o) in w.iter().enumerate() {
        for t in 0..rows {
            for f in 0..cols {
                let mut acc = bias[o];
                for (i, w_oi) in w_o.iter().enumerate() {
                    let kt = w_oi.len() as isize;
                    for (dt, w_row) in w_oi.iter().enumerate() {
                        let kf = w_row.len() as isize;
                        for (df, &wv) in w_row.iter().enumerate() {
                            let st = t as isize + dt as isize - kt / 2;
                            let sf = f as isize + df as isize - kf / 2;
                            if st >= 0 && sf >= 0 && (st as usize) < rows && (sf as usize) < cols {
                                acc += wv * x[i][st as usize][sf as usize];
                            }
                        }
                    }
                }
                y[o][t][f] = acc;
            }
        }
    }
    y
}

/// Value at output sample `pos` of a per-frame sequence `values` sampled at
/// frame centers `(t + 0.5) * shift`, by straight-line interpolation between
/// neighbouring centers and holding the end values outside them.
pub fn scalar_interp(values: &[f64], shift: usize, pos: usize) -> f64 {
    let first_center = shift as f64 / 2.0;
    let p = pos as f64;
    if p <= first_center {
        return values[0];
    }
    let last_center = first_center + (values.len() - 1) as f64 * shift as f64;
    if p >= last_center {
        return values[values.len() - 1];
    }
    // find the pair of centers bracketing p
    let mut t = 0;
    while first_center + (t + 1) as f64 * shift as f64 <= p {
        t += 1;
    }
    let c0 = first_center + t as f64 * shift as f64;
    let frac = (p - c0) / shift as f64;
    values[t] + frac * (values[t + 1] - values[t])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_of_delta_and_constant() {
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        assert!(naive_dft(&x)
            .iter()
            .all(|&(r, i)| (r - 1.0).abs() < 1e-12 && i.abs() < 1e-12));
        let c = naive_dft(&[2.0; 8]);
        assert!((c[0].0 - 16.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|&(r, i)| r.abs() < 1e-12 && i.abs() < 1e-12));
    }

    #[test]
    fn idft_inverts_dft() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let back = naive_idft(&naive_dft(&x));
        assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn conv_identity_and_constant() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let id = vec![
            vec![vec![0.0, 1.0, 0.0], vec![0.0; 3]],
            vec![vec![0.0; 3], vec![0.0, 1.0, 0.0]],
        ];
        assert_eq!(naive_conv1d(&x, &id, &[0.0, 0.0]), x);
        let ones = vec![vec![vec![1.0; 3]; 2]];
        let y = naive_conv1d(&x, &ones, &[0.5]);
        assert_eq!(y, vec![vec![10.5], vec![21.5], vec![18.5]]);
    }

    #[test]
    fn conv2d_delta_kernel() {
        let x = vec![vec![vec![1.0, 2.0], vec![3.0, 4.0]]];
        let w = vec![vec![vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]]];
        assert_eq!(naive_conv2d(&x, &w, &[0.0]), x);
    }

    #[test]
    fn interpolation() {
        let v = [0.0, 10.0, 20.0];
        assert_eq!(scalar_interp(&v, 100, 0), 0.0);
        assert_eq!(scalar_interp(&v, 100, 50), 0.0);
        assert!((scalar_interp(&v, 100, 100) - 5.0).abs() < 1e-12);
        assert!((scalar_interp(&v, 100, 150) - 10.0).abs() < 1e-12);
        assert_eq!(scalar_interp(&v, 100, 299), 20.0);
    }
}
