//! Dipole-dipole couplings mediated by the free-space electromagnetic field.
//!
//! For two atoms separated by `r` (in units of `lambda0`), with shared unit
//! dipole `d` and `xi = 2 pi |r|`, the contracted Green tensor gives
//!
//! ```text
//! gamma_mn = 3/2 Im F,   j_mn = -3/4 Re F,
//! F = e^{i xi} / xi^3 [ (xi^2 + i xi - 1) |d|^2 + (3 - 3 i xi - xi^2) |r^.d|^2 ]
//! ```
//!
//! normalised so that `gamma_nn = 1` (rates in `Gamma0`).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{dot3, norm3, scale3, sub3, Cplx, Real, Vec3};

/// Pairs closer than this (in `lambda0`) are rejected.
pub const MIN_SEPARATION: f64 = 1e-6;

/// Below this value of `k r` the dissipative kernel switches to its Taylor series.
const SERIES_CUTOFF: f64 = 0.05;

/// Complex unit dipole orientation shared by all atoms.
pub type Dipole<T> = [Cplx<T>; 3];

/// Linearly polarised dipole along `axis` (normalised here).
pub fn linear_dipole<T: Real>(axis: Vec3<T>) -> Result<Dipole<T>> {
    let n = norm3(&axis);
    if !(n > T::zero()) {
        return Err(Error::Domain("dipole axis must be nonzero".into()));
    }
    Ok(axis.map(|c| Cplx::new(c / n, T::zero())))
}

/// Circular dipole `(e1 - i e2) / sqrt 2` about `quantization`, with
/// `(e1, e2, q)` right handed.
pub fn sigma_minus_dipole<T: Real>(quantization: Vec3<T>) -> Result<Dipole<T>> {
    circular(quantization, -T::one())
}

/// Circular dipole `(e1 + i e2) / sqrt 2` about `quantization`.
pub fn sigma_plus_dipole<T: Real>(quantization: Vec3<T>) -> Result<Dipole<T>> {
    circular(quantization, T::one())
}

fn circular<T: Real>(quantization: Vec3<T>, handedness: T) -> Result<Dipole<T>> {
    let n = norm3(&quantization);
    if !(n > T::zero()) {
        return Err(Error::Domain("quantization axis must be nonzero".into()));
    }
    let q = scale3(&quantization, T::one() / n);
    // seed with the coordinate axis least aligned with q
    let mut seed = [T::zero(); 3];
    let imin = (0..3)
        .min_by(|&a, &b| q[a].abs().partial_cmp(&q[b].abs()).unwrap())
        .unwrap();
    seed[imin] = T::one();
    let proj = dot3(&seed, &q);
    let e1 = sub3(&seed, &scale3(&q, proj));
    let e1 = scale3(&e1, T::one() / norm3(&e1));
    // e2 = q x e1
    let e2 = [
        q[1] * e1[2] - q[2] * e1[1],
        q[2] * e1[0] - q[0] * e1[2],
        q[0] * e1[1] - q[1] * e1[0],
    ];
    let s = T::FRAC_1_SQRT_2();
    Ok([0, 1, 2].map(|i| Cplx::new(e1[i] * s, handedness * e2[i] * s)))
}

fn dipole_norm_sqr<T: Real>(d: &Dipole<T>) -> T {
    d.iter().map(|c| c.norm_sqr()).sum()
}

/// Atom positions (in `lambda0`) plus the shared dipole orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomConfiguration<T> {
    positions: Vec<Vec3<T>>,
    dipole: Dipole<T>,
}

impl<T: Real> AtomConfiguration<T> {
    pub fn new(positions: Vec<Vec3<T>>, dipole: Dipole<T>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Domain("configuration needs at least one atom".into()));
        }
        let tol = T::of(1e-12).max(T::epsilon() * T::of(64.0));
        let dn = dipole_norm_sqr(&dipole).sqrt();
        if !((dn - T::one()).abs() <= tol) {
            return Err(Error::Domain(format!("dipole must be unit norm, got {dn}")));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Domain("positions must be finite".into()));
        }
        let cfg = Self { positions, dipole };
        if let Some((m, n, r)) = cfg.closest_pair() {
            if r.to_f64_lossless() <= MIN_SEPARATION {
                return Err(Error::Singularity {
                    first: m,
                    second: n,
                    separation: r.to_f64_lossless(),
                    min_separation: MIN_SEPARATION,
                });
            }
        }
        Ok(cfg)
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vec3<T>] {
        &self.positions
    }

    pub fn dipole(&self) -> &Dipole<T> {
        &self.dipole
    }

    /// Indices and distance of the closest pair, `None` for a single atom.
    pub fn closest_pair(&self) -> Option<(usize, usize, T)> {
        let mut best: Option<(usize, usize, T)> = None;
        for m in 0..self.positions.len() {
            for n in (m + 1)..self.positions.len() {
                let r = norm3(&sub3(&self.positions[n], &self.positions[m]));
                if best.is_none_or(|(_, _, b)| r < b) {
                    best = Some((m, n, r));
                }
            }
        }
        best
    }
}

/// Dissipative (`gamma`) and coherent (`j`) coupling matrices, row-major, in `Gamma0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices<T> {
    n: usize,
    gamma: Vec<T>,
    j: Vec<T>,
}

impl<T: Real> CouplingMatrices<T> {
    /// Builds from explicit row-major matrices. Checks shape, symmetry and the
    /// unit diagonal of `gamma`.
    pub fn from_parts(n: usize, gamma: Vec<T>, j: Vec<T>) -> Result<Self> {
        if gamma.len() != n * n || j.len() != n * n {
            return Err(Error::Dimension(format!(
                "coupling matrices must be {n}x{n}, got {} and {} entries",
                gamma.len(),
                j.len()
            )));
        }
        for a in 0..n {
            if gamma[a * n + a] != T::one() || j[a * n + a] != T::zero() {
                return Err(Error::Domain("gamma_nn must be 1 and j_nn 0".into()));
            }
            for b in 0..a {
                if gamma[a * n + b] != gamma[b * n + a] || j[a * n + b] != j[b * n + a] {
                    return Err(Error::Domain(format!("couplings not symmetric at ({a}, {b})")));
                }
            }
        }
        Ok(Self { n, gamma, j })
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn gamma(&self, m: usize, n: usize) -> T {
        self.gamma[m * self.n + n]
    }

    #[inline]
    pub fn j(&self, m: usize, n: usize) -> T {
        self.j[m * self.n + n]
    }

    pub fn gamma_matrix(&self) -> &[T] {
        &self.gamma
    }

    pub fn j_matrix(&self) -> &[T] {
        &self.j
    }

    /// Smallest eigenvalue of `gamma` (computed in double precision).
    pub fn gamma_min_eigenvalue(&self) -> f64 {
        let m = nalgebra::DMatrix::from_fn(self.n, self.n, |a, b| self.gamma(a, b).to_f64_lossless());
        m.symmetric_eigenvalues().min()
    }
}

/// `(gamma_mn, j_mn)` for one pair.
pub fn pair_coupling<T: Real>(separation: &Vec3<T>, dipole: &Dipole<T>) -> Result<(T, T)> {
    let r = norm3(separation);
    if !(r.to_f64_lossless() > 0.0) {
        return Err(Error::Singularity {
            first: 0,
            second: 1,
            separation: 0.0,
            min_separation: MIN_SEPARATION,
        });
    }
    let u = scale3(separation, T::one() / r);
    let a = dipole_norm_sqr(dipole);
    let ud = Cplx::new(u[0], T::zero()) * dipole[0]
        + Cplx::new(u[1], T::zero()) * dipole[1]
        + Cplx::new(u[2], T::zero()) * dipole[2];
    let b = ud.norm_sqr();

    let xi = T::TAU() * r;
    let (s, c) = xi.sin_cos();
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;

    let (im_a, im_b) = if xi.to_f64_lossless() < SERIES_CUTOFF {
        let xi4 = xi2 * xi2;
        let xi6 = xi4 * xi2;
        (
            T::of(2.0 / 3.0) - T::of(2.0 / 15.0) * xi2 + xi4 / T::of(140.0) - xi6 / T::of(5670.0),
            xi2 / T::of(15.0) - xi4 / T::of(210.0) + xi6 / T::of(7560.0),
        )
    } else {
        (
            (xi2 * s + xi * c - s) / xi3,
            (T::of(3.0) * s - T::of(3.0) * xi * c - xi2 * s) / xi3,
        )
    };
    let re_a = (xi2 * c - xi * s - c) / xi3;
    let re_b = (T::of(3.0) * c + T::of(3.0) * xi * s - xi2 * c) / xi3;

    let gamma = T::of(1.5) * (a * im_a + b * im_b);
    let j = -T::of(0.75) * (a * re_a + b * re_b);
    Ok((gamma, j))
}

/// Assembles all pairwise couplings for a configuration.
pub fn build_couplings<T: Real>(config: &AtomConfiguration<T>) -> Result<CouplingMatrices<T>> {
    let n = config.n_atoms();
    let pos = config.positions();
    let dipole = config.dipole();
    let rows: Vec<Vec<(T, T)>> = (0..n)
        .into_par_iter()
        .map(|m| {
            ((m + 1)..n)
                .map(|k| {
                    pair_coupling(&sub3(&pos[k], &pos[m]), dipole).map_err(|_| Error::Singularity {
                        first: m,
                        second: k,
                        separation: norm3(&sub3(&pos[k], &pos[m])).to_f64_lossless(),
                        min_separation: MIN_SEPARATION,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut gamma = vec![T::zero(); n * n];
    let mut j = vec![T::zero(); n * n];
    for m in 0..n {
        gamma[m * n + m] = T::one();
        for (off, &(g, jj)) in rows[m].iter().enumerate() {
            let k = m + 1 + off;
            gamma[m * n + k] = g;
            gamma[k * n + m] = g;
            j[m * n + k] = jj;
            j[k * n + m] = jj;
        }
    }
    Ok(CouplingMatrices { n, gamma, j })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const Z: Vec3<f64> = [0.0, 0.0, 1.0];

    // Independent contraction of the explicit dyadic Green tensor, evaluated offline:
    // separation (1/3, 0, 0), dipole z.
    const GOLDEN_THIRD_GAMMA: f64 = 0.307_866_603_794_038_3;
    const GOLDEN_THIRD_J: f64 = 0.286_303_550_982_980_8;

    #[test]
    fn dicke_limit() {
        let d = linear_dipole(Z).unwrap();
        for sep in [[1e-4f64, 0.0, 0.0], [0.0, 0.0, 1e-4], [3e-5, 4e-5, 5e-5]] {
            let (g, _) = pair_coupling(&sep, &d).unwrap();
            assert!((g - 1.0).abs() < 1e-6, "{g}");
        }
        let circ = sigma_minus_dipole([0.0, 1.0, 0.0]).unwrap();
        let (g, _) = pair_coupling(&[1e-4f64, 0.0, 0.0], &circ).unwrap();
        assert!((g - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_wavelength_transverse() {
        let d = linear_dipole(Z).unwrap();
        let (g, _) = pair_coupling(&[1.0, 0.0, 0.0], &d).unwrap();
        assert!((g - 3.0 / (8.0 * PI * PI)).abs() < 1e-12, "{g}");
    }

    #[test]
    fn third_wavelength_golden_pair() {
        let d = linear_dipole(Z).unwrap();
        let (g, j) = pair_coupling(&[1.0 / 3.0, 0.0, 0.0], &d).unwrap();
        assert!((g - GOLDEN_THIRD_GAMMA).abs() < 1e-12);
        assert!((j - GOLDEN_THIRD_J).abs() < 1e-12);
    }

    #[test]
    fn series_matches_closed_form_at_cutoff() {
        let d = linear_dipole([0.3, 0.4, 0.5]).unwrap();
        let r = SERIES_CUTOFF / (2.0 * PI);
        let u = [0.6, 0.0, 0.8];
        let (below, _) = pair_coupling(&scale3(&u, r * (1.0 - 1e-9)), &d).unwrap();
        let (above, _) = pair_coupling(&scale3(&u, r * (1.0 + 1e-9)), &d).unwrap();
        assert!((below - above).abs() < 1e-11, "{below} {above}");
    }

    #[test]
    fn zero_separation_is_singular() {
        let d = linear_dipole(Z).unwrap();
        assert!(matches!(pair_coupling(&[0.0; 3], &d), Err(Error::Singularity { .. })));
    }

    #[test]
    fn single_atom() {
        let cfg = AtomConfiguration::new(vec![[0.0; 3]], linear_dipole(Z).unwrap()).unwrap();
        let c = build_couplings(&cfg).unwrap();
        assert_eq!(c.gamma_matrix(), &[1.0]);
        assert_eq!(c.j_matrix(), &[0.0]);
    }

    #[test]
    fn pair_matrices_match_golden() {
        let cfg = AtomConfiguration::new(
            vec![[0.0; 3], [1.0 / 3.0, 0.0, 0.0]],
            linear_dipole(Z).unwrap(),
        )
        .unwrap();
        let c = build_couplings(&cfg).unwrap();
        assert!((c.gamma(0, 1) - GOLDEN_THIRD_GAMMA).abs() < 1e-12);
        assert_eq!(c.gamma(0, 1), c.gamma(1, 0));
        assert!((c.j(1, 0) - GOLDEN_THIRD_J).abs() < 1e-12);
        assert_eq!(c.j(0, 0), 0.0);
    }

    #[test]
    fn equilateral_triangle_is_symmetric() {
        let a = 1.0 / 3.0;
        let pos = vec![[0.0, 0.0, 0.0], [a, 0.0, 0.0], [a / 2.0, a * 3f64.sqrt() / 2.0, 0.0]];
        let cfg = AtomConfiguration::new(pos, linear_dipole(Z).unwrap()).unwrap();
        let c = build_couplings(&cfg).unwrap();
        // dipole perpendicular to the plane: every pair matches the golden pair
        for (m, n) in [(0, 1), (0, 2), (1, 2)] {
            assert!((c.gamma(m, n) - GOLDEN_THIRD_GAMMA).abs() < 1e-12);
            assert!((c.j(m, n) - GOLDEN_THIRD_J).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_atoms_rejected_with_pair() {
        let d = linear_dipole(Z).unwrap();
        let err = AtomConfiguration::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 1e-8]], d)
            .unwrap_err();
        assert!(matches!(err, Error::Singularity { first: 1, second: 2, .. }), "{err}");
        assert!(AtomConfiguration::<f64>::new(vec![], d).is_err());
        let bad = [Cplx::new(1.0, 0.0), Cplx::new(1.0, 0.0), Cplx::new(0.0, 0.0)];
        assert!(AtomConfiguration::new(vec![[0.0; 3]], bad).is_err());
    }

    #[test]
    fn circular_dipole_is_unit_and_transverse() {
        for q in [[0.0f64, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, -2.0]] {
            let d = sigma_minus_dipole(q).unwrap();
            assert!((dipole_norm_sqr(&d) - 1.0).abs() < 1e-14);
            let n = norm3(&q);
            let qd: Cplx<f64> = (0..3).map(|i| d[i] * (q[i] / n)).sum();
            assert!(qd.norm() < 1e-14);
        }
    }

    #[test]
    fn asymptotics() {
        let d = linear_dipole(Z).unwrap();
        // far field: |gamma| bounded by the 1/kr envelope
        for r in [10.0, 50.0, 200.0] {
            let (g, _) = pair_coupling(&[r, 0.0, 0.0], &d).unwrap();
            assert!(g.abs() <= 1.5 / (2.0 * PI * r) * 1.01, "{r} {g}");
        }
        // near field: j (kr)^3 -> -3/4 (-1) for a transverse dipole
        let scaled = |r: f64| {
            let (_, j) = pair_coupling(&[r, 0.0, 0.0], &d).unwrap();
            j * (2.0 * PI * r).powi(3)
        };
        assert!((scaled(1e-4) - 0.75).abs() < 1e-6);
        // along the dipole: (1 - 3) -> -3/2
        let (_, j) = pair_coupling(&[0.0, 0.0, 1e-4], &d).unwrap();
        assert!((j * (2.0 * PI * 1e-4f64).powi(3) + 1.5).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};

        fn rotation(axis: Vec3<f64>, angle: f64) -> [[f64; 3]; 3] {
            let n = norm3(&axis);
            let [x, y, z] = scale3(&axis, 1.0 / n);
            let (s, c) = angle.sin_cos();
            let t = 1.0 - c;
            [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ]
        }

        fn apply(r: &[[f64; 3]; 3], v: &Vec3<f64>) -> Vec3<f64> {
            [dot3(&r[0], v), dot3(&r[1], v), dot3(&r[2], v)]
        }

        proptest! {
            #[test]
            fn reversal_symmetry(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
                                 qx in -1.0f64..1.0, qy in 0.1f64..1.0) {
                prop_assume!((x * x + y * y + z * z).sqrt() > 1e-3);
                let d = sigma_minus_dipole([qx, qy, 0.3]).unwrap();
                let a = pair_coupling(&[x, y, z], &d).unwrap();
                let b = pair_coupling(&[-x, -y, -z], &d).unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn rotation_invariance(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0,
                                   dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in 0.1f64..1.0,
                                   ax in -1.0f64..1.0, ay in -1.0f64..1.0, angle in 0.0f64..6.3) {
                prop_assume!((x * x + y * y + z * z).sqrt() > 0.05);
                let dv = [dx, dy, dz];
                let rot = rotation([ax, ay, 1.0], angle);
                let (g0, j0) = pair_coupling(&[x, y, z], &linear_dipole(dv).unwrap()).unwrap();
                let (g1, j1) = pair_coupling(&apply(&rot, &[x, y, z]),
                                             &linear_dipole(apply(&rot, &dv)).unwrap()).unwrap();
                prop_assert!((g0 - g1).abs() <= 1e-12 * (1.0 + g0.abs()));
                prop_assert!((j0 - j1).abs() <= 1e-12 * (1.0 + j0.abs()));
            }

            #[test]
            fn gamma_bounded(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
                prop_assume!((x * x + y * y + z * z).sqrt() > 1e-5);
                let d = sigma_minus_dipole([0.0, 1.0, 0.0]).unwrap();
                let (g, _) = pair_coupling(&[x, y, z], &d).unwrap();
                prop_assert!(g.abs() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn gamma_psd_for_random_clouds() {
            let d = sigma_minus_dipole([0.0, 1.0, 0.0]).unwrap();
            let mut worst = f64::INFINITY;
            for seed in 0..1000u64 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let n = rng.random_range(2..=8);
                let pos: Vec<Vec3<f64>> = (0..n)
                    .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)])
                    .collect();
                let Ok(cfg) = AtomConfiguration::new(pos, d) else { continue };
                let c = build_couplings(&cfg).unwrap();
                worst = worst.min(c.gamma_min_eigenvalue());
            }
            assert!(worst >= -1e-10, "{worst}");
        }
    }
}
