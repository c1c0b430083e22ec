//! Brute-force reference implementations for cross-checking `dicke-core`.
//!
//! Nothing here shares code with the production crate: couplings come from an
//! explicit contraction of the dyadic Green tensor, the master equation is
//! solved by exponentiating its dense `4^N x 4^N` Liouvillian, and the
//! single-atom optical Bloch equations are integrated with a plain RK4 loop.
//! Everything is `f64` and written for clarity over speed.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C = Complex64;
pub type Mat = DMatrix<C>;

const TAU: f64 = std::f64::consts::TAU;

/// Free-space dyadic Green tensor at separation `r` (units of the wavelength),
/// with `k = 2 pi`.
pub fn green_tensor(r: [f64; 3]) -> [[C; 3]; 3] {
    let k = TAU;
    let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let u = [r[0] / d, r[1] / d, r[2] / d];
    let kr = k * d;
    let i = C::i();
    let pre = (i * kr).exp() / (4.0 * std::f64::consts::PI * k * k * d * d * d);
    let a = C::new(kr * kr - 1.0, kr);
    let b = C::new(3.0 - kr * kr, -3.0 * kr);
    let mut g = [[C::new(0.0, 0.0); 3]; 3];
    for (p, row) in g.iter_mut().enumerate() {
        for (q, x) in row.iter_mut().enumerate() {
            let delta = if p == q { 1.0 } else { 0.0 };
            *x = pre * (a * delta + b * u[p] * u[q]);
        }
    }
    g
}

/// `(gamma, j)` for two atoms at separation `r` sharing dipole `d`:
/// `gamma = 6 pi / k d*.Im G.d`, `j = -3 pi / k d*.Re G.d`.
pub fn green_pair(r: [f64; 3], d: [C; 3]) -> (f64, f64) {
    let g = green_tensor(r);
    let k = TAU;
    let (mut im, mut re) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
    for p in 0..3 {
        for q in 0..3 {
            im += d[p].conj() * g[p][q].im * d[q];
            re += d[p].conj() * g[p][q].re * d[q];
        }
    }
    (6.0 * std::f64::consts::PI / k * im.re, -3.0 * std::f64::consts::PI / k * re.re)
}

/// Coupling matrices `(gamma, j)` of a configuration, diagonal `gamma = 1`, `j = 0`.
pub fn couplings(positions: &[[f64; 3]], d: [C; 3]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = positions.len();
    let mut gamma = DMatrix::<f64>::identity(n, n);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for m in 0..n {
        for q in 0..n {
            if m != q {
                let r = [0, 1, 2].map(|c| positions[q][c] - positions[m][c]);
                let (g, jj) = green_pair(r, d);
                gamma[(m, q)] = g;
                j[(m, q)] = jj;
            }
        }
    }
    (gamma, j)
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Lowering operator of atom `n` in an `n_atoms` register. Single-atom basis
/// is `(g, e)`; in the product the last factor is atom 0, so bit `n` of a
/// basis index is the state of atom `n`.
pub fn lowering(n_atoms: usize, n: usize) -> Mat {
    let id = Mat::identity(2, 2);
    let mut s = Mat::zeros(2, 2);
    s[(0, 1)] = C::new(1.0, 0.0);
    let mut out = Mat::identity(1, 1);
    for atom in (0..n_atoms).rev() {
        out = kron(&out, if atom == n { &s } else { &id });
    }
    out
}

/// Drive parameters for the dense propagator.
#[derive(Debug, Clone, Copy)]
pub struct Drive {
    pub rabi: f64,
    pub detuning: f64,
    pub k_hat: [f64; 3],
    pub t_off: f64,
}

/// Hamiltonian with the drive on or off.
pub fn hamiltonian(positions: &[[f64; 3]], j: &DMatrix<f64>, drive: &Drive, on: bool) -> Mat {
    let n = positions.len();
    let dim = 1 << n;
    let lows: Vec<Mat> = (0..n).map(|k| lowering(n, k)).collect();
    let mut h = Mat::zeros(dim, dim);
    for m in 0..n {
        let up = lows[m].adjoint();
        h -= &up * &lows[m] * C::new(drive.detuning, 0.0);
        for q in 0..n {
            if m != q {
                h += &up * &lows[q] * C::new(j[(m, q)], 0.0);
            }
        }
        if on {
            let phase = TAU * (0..3).map(|c| drive.k_hat[c] * positions[m][c]).sum::<f64>();
            let w = C::from_polar(0.5 * drive.rabi, phase);
            h += &up * w + &lows[m] * w.conj();
        }
    }
    h
}

/// Column-stacking Liouvillian: `vec(A X B) = (B^T kron A) vec(X)`.
pub fn liouvillian(h: &Mat, gamma: &DMatrix<f64>, n_atoms: usize) -> Mat {
    let dim = h.nrows();
    let id = Mat::identity(dim, dim);
    let i = C::i();
    let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * (-i);
    let lows: Vec<Mat> = (0..n_atoms).map(|k| lowering(n_atoms, k)).collect();
    for m in 0..n_atoms {
        for q in 0..n_atoms {
            let g = gamma[(m, q)];
            if g == 0.0 {
                continue;
            }
            let up_m = lows[m].adjoint();
            let num = &up_m * &lows[q];
            // s_q rho s_m^+  -  1/2 {s_m^+ s_q, rho}
            let jump = kron(&up_m.transpose(), &lows[q]);
            let anti = kron(&id, &num) + kron(&num.transpose(), &id);
            l += (jump - anti * C::new(0.5, 0.0)) * C::new(g, 0.0);
        }
    }
    l
}

fn vec_of(rho: &Mat) -> Mat {
    let d = rho.nrows();
    Mat::from_iterator(d * d, 1, rho.iter().copied())
}

fn unvec(v: &Mat, d: usize) -> Mat {
    Mat::from_iterator(d, d, v.iter().copied())
}

/// Density matrices at `times`, starting from all atoms in the ground state
/// at `t = 0`, computed as `exp(L t)` piecewise across switch-off.
pub fn dense_evolve(positions: &[[f64; 3]], d: [C; 3], drive: &Drive, times: &[f64]) -> Vec<Mat> {
    let n = positions.len();
    assert!(n <= 3, "dense oracle is limited to three atoms");
    let dim = 1 << n;
    let (gamma, j) = couplings(positions, d);
    let l_on = liouvillian(&hamiltonian(positions, &j, drive, true), &gamma, n);
    let l_off = liouvillian(&hamiltonian(positions, &j, drive, false), &gamma, n);
    let mut rho0 = Mat::zeros(dim, dim);
    rho0[(0, 0)] = C::new(1.0, 0.0);
    let v0 = vec_of(&rho0);
    let v_off = (&l_on * C::new(drive.t_off, 0.0)).exp() * &v0;
    times
        .iter()
        .map(|&t| {
            let v = if t <= drive.t_off {
                (&l_on * C::new(t, 0.0)).exp() * &v0
            } else {
                (&l_off * C::new(t - drive.t_off, 0.0)).exp() * &v_off
            };
            unvec(&v, dim)
        })
        .collect()
}

/// Mean excited-state population of a register state.
pub fn excited_fraction(rho: &Mat) -> f64 {
    let dim = rho.nrows();
    let n = dim.trailing_zeros() as usize;
    (0..dim).map(|i| rho[(i, i)].re * i.count_ones() as f64).sum::<f64>() / n as f64
}

/// Single-atom optical Bloch equations, `(rho_ee, Re rho_eg, Im rho_eg)`,
/// integrated with classical RK4 at fixed step `h`; returns `rho_ee` at `times`.
/// Starts in the ground state; the drive stays on throughout.
pub fn bloch_excited(rabi: f64, detuning: f64, times: &[f64], h: f64) -> Vec<f64> {
    let f = |y: [f64; 3]| -> [f64; 3] {
        let (w, x, p) = (y[0], y[1], y[2]);
        // d rho_ee = -rho_ee - i Omega/2 (rho_ge - rho_eg) = -rho_ee - Omega Im(rho_eg)
        // d rho_eg = i Delta rho_eg - i Omega/2 (1 - 2 rho_ee) - rho_eg / 2
        [
            -w - rabi * p,
            -detuning * p - 0.5 * x,
            detuning * x - 0.5 * rabi * (1.0 - 2.0 * w) - 0.5 * p,
        ]
    };
    let mut y = [0.0; 3];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-14 {
            let dt = h.min(target - t);
            let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
            let k1 = f(y);
            let k2 = f(add(y, k1, 0.5 * dt));
            let k3 = f(add(y, k2, 0.5 * dt));
            let k4 = f(add(y, k3, dt));
            for c in 0..3 {
                y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            t += dt;
        }
        out.push(y[0]);
    }
    out
}

/// Closed-form steady-state excited population for saturation `s = 2 Omega^2`.
pub fn bloch_steady_state(rabi: f64, detuning: f64) -> f64 {
    let s = 2.0 * rabi * rabi;
    0.5 * s / (1.0 + s + 4.0 * detuning * detuning)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dicke_limit_and_far_field() {
        let z = [C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)];
        let (g, _) = green_pair([1e-3, 0.0, 0.0], z);
        assert!((g - 1.0).abs() < 1e-4);
        let (g, j) = green_pair([1.0, 0.0, 0.0], z);
        assert!((g - 3.0 / (8.0 * std::f64::consts::PI.powi(2))).abs() < 1e-12);
        assert!((j + 0.116_342_625_965_809_08).abs() < 1e-12);
    }

    #[test]
    fn trace_preserved_and_steady_state() {
        let drive = Drive { rabi: 75f64.sqrt() / 2f64.sqrt(), detuning: 0.0, k_hat: [0.0, 1.0, 0.0], t_off: 1e9 };
        let z = [C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)];
        let rho = dense_evolve(&[[0.0; 3]], z, &drive, &[40.0]);
        assert!((rho[0].trace().re - 1.0).abs() < 1e-12);
        assert!((excited_fraction(&rho[0]) - bloch_steady_state(drive.rabi, 0.0)).abs() < 1e-10);
        let ode = bloch_excited(drive.rabi, 0.0, &[40.0], 1e-3);
        assert!((ode[0] - bloch_steady_state(drive.rabi, 0.0)).abs() < 1e-10);
    }
}
