//! Neural tangent kernel blocks, the semi-norm dynamics matrix and the
//! linearised residual dynamics.
//!
//! Under gradient flow on `β ℓ_boundary + γ ℓ_semi` with a frozen kernel,
//! the boundary residual obeys `ė = −K_bb D e` where `D = (2/N) I` for the
//! L² term alone and `D = M = (2/N + 4) I − 2(P + P⁻¹)` once the adjacent
//! pairs of the semi-norm are added (`P` the cyclic shift). Spectra of
//! `K_bb M` are taken through the symmetric similar matrix
//! `M^{1/2} K_bb M^{1/2}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Tape;
use crate::error::{bail, Result};
use crate::linalg::{sym_eigen, Matrix};
use crate::math::{self, TAU};
use crate::model::Mlp;
use crate::Point;

/// Rows are parameter gradients of the network output at each point.
pub fn boundary_jacobian(net: &Mlp, points: &[Point]) -> Matrix {
    let p = net.num_params();
    let mut j = Matrix::zeros(points.len(), p);
    for (i, &x) in points.iter().enumerate() {
        let mut tape = Tape::new();
        let taped = net.register(&mut tape);
        let u = taped.forward_value(&mut tape, x);
        let g = tape.grad_params(u).expect("output lives on its own tape");
        j.row_mut(i).copy_from_slice(&g);
    }
    j
}

/// Rows are parameter gradients of the network Laplacian at each point.
pub fn residual_jacobian(net: &Mlp, points: &[Point]) -> Matrix {
    let p = net.num_params();
    let mut j = Matrix::zeros(points.len(), p);
    for (i, &x) in points.iter().enumerate() {
        let mut tape = Tape::new();
        let taped = net.register(&mut tape);
        let d = taped.forward_dual2(&mut tape, x);
        let lap = d.laplacian(&mut tape);
        let g = tape.grad_params(lap).expect("output lives on its own tape");
        j.row_mut(i).copy_from_slice(&g);
    }
    j
}

/// `K_bb`, and the residual blocks when interior points are given.
#[derive(Clone, Debug)]
pub struct KernelBlocks {
    pub jb: Matrix,
    pub jr: Option<Matrix>,
    pub kbb: Matrix,
    pub krr: Option<Matrix>,
    pub kbr: Option<Matrix>,
}

impl KernelBlocks {
    pub fn assemble(net: &Mlp, boundary: &[Point], interior: Option<&[Point]>) -> Self {
        let jb = boundary_jacobian(net, boundary);
        let kbb = jb.gram();
        match interior {
            None => Self { jb, jr: None, kbb, krr: None, kbr: None },
            Some(pts) => {
                let jr = residual_jacobian(net, pts);
                let krr = jr.gram();
                let kbr = jb.matmul(&jr.transpose()).expect("shared parameter count");
                Self { jb, jr: Some(jr), kbb, krr: Some(krr), kbr: Some(kbr) }
            }
        }
    }

    /// The full kernel `[[K_bb, K_br], [K_rb, K_rr]]`.
    pub fn full(&self) -> Matrix {
        let (Some(krr), Some(kbr)) = (&self.krr, &self.kbr) else {
            return self.kbb.clone();
        };
        let (nb, nr) = (self.kbb.rows(), krr.rows());
        Matrix::from_fn(nb + nr, nb + nr, |i, j| match (i < nb, j < nb) {
            (true, true) => self.kbb[(i, j)],
            (true, false) => kbr[(i, j - nb)],
            (false, true) => kbr[(j, i - nb)],
            (false, false) => krr[(i - nb, j - nb)],
        })
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 3 {
        bail!(Config, "dynamics matrix needs N_b ≥ 3, got {n}");
    }
    Ok(())
}

/// First row of the circulant dynamics matrix. With `skip_pairs` the skip
/// terms of the semi-norm are included as well (not the matrix used in the
/// kernel dominance argument).
fn m_stencil(n: usize, skip_pairs: bool) -> Vec<f64> {
    let mut row = vec![0.0; n];
    let diag = if skip_pairs { 8.0 } else { 4.0 };
    row[0] += 2.0 / n as f64 + diag;
    row[1] -= 2.0;
    row[n - 1] -= 2.0;
    if skip_pairs {
        row[2 % n] -= 2.0;
        row[(n - 2) % n] -= 2.0;
    }
    row
}

fn circulant(first_row: &[f64]) -> Matrix {
    let n = first_row.len();
    Matrix::from_fn(n, n, |i, j| first_row[(j + n - i) % n])
}

/// `M = (2/N + 4) I − 2(P + P⁻¹)`.
pub fn build_m(n: usize) -> Result<Matrix> {
    check_size(n)?;
    Ok(circulant(&m_stencil(n, false)))
}

/// `M` plus the skip-pair contribution `4 I − 2(P² + P⁻²)`.
pub fn build_m_with_skip_pairs(n: usize) -> Result<Matrix> {
    check_size(n)?;
    Ok(circulant(&m_stencil(n, true)))
}

/// Closed-form eigenvalues of [`build_m`] (or the skip-pair variant),
/// indexed by Fourier mode `k = 0 … N−1`.
pub fn m_eigenvalues(n: usize, skip_pairs: bool) -> Result<Vec<f64>> {
    check_size(n)?;
    Ok((0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            let base = 2.0 / n as f64 + 4.0 - 4.0 * math::cos(a);
            if skip_pairs {
                base + 4.0 - 4.0 * math::cos(2.0 * a)
            } else {
                base
            }
        })
        .collect())
}

/// `M^{1/2}` from the circulant eigendecomposition: entry `(i, j)` is
/// `(1/N) Σ_k √λ_k cos(2πk(i − j)/N)`.
pub fn m_sqrt(n: usize, skip_pairs: bool) -> Result<Matrix> {
    let lambda = m_eigenvalues(n, skip_pairs)?;
    let row: Vec<f64> = (0..n)
        .map(|j| {
            let s: f64 = lambda
                .iter()
                .enumerate()
                .map(|(k, l)| math::sqrt(*l) * math::cos(TAU * ((k * j) % n) as f64 / n as f64))
                .sum();
            s / n as f64
        })
        .collect();
    Ok(circulant(&row))
}

/// Descending spectra of `K_bb / N` (PINN) and `K_bb M` (TRPINN).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectra {
    pub lambda_p: Vec<f64>,
    pub lambda_h: Vec<f64>,
}

impl Spectra {
    /// `λ_h − λ_p` per index.
    pub fn diff(&self) -> Vec<f64> {
        self.lambda_h.iter().zip(&self.lambda_p).map(|(h, p)| h - p).collect()
    }
}

fn check_kernel(k: &Matrix) -> Result<()> {
    if k.rows() != k.cols() {
        bail!(Data, "kernel must be square, got {}×{}", k.rows(), k.cols());
    }
    let scale = k.as_slice().iter().fold(1.0f64, |m, v| m.max(math::abs(*v)));
    let asym = k.max_asymmetry();
    if asym > 1e-10 * scale {
        bail!(Data, "kernel asymmetry {asym:e} exceeds tolerance");
    }
    Ok(())
}

pub fn spectrum_compare(kbb: &Matrix, top_k: usize, skip_pairs: bool) -> Result<Spectra> {
    check_kernel(kbb)?;
    let n = kbb.rows();
    if top_k == 0 || top_k > n {
        bail!(Config, "top_k must lie in 1..={n}, got {top_k}");
    }
    let mut lambda_p = sym_eigen(&kbb.scaled(1.0 / n as f64))?.values;
    let s = m_sqrt(n, skip_pairs)?;
    let sks = s.matmul(kbb)?.matmul(&s)?;
    let mut lambda_h = sym_eigen(&sks)?.values;
    lambda_p.truncate(top_k);
    lambda_h.truncate(top_k);
    Ok(Spectra { lambda_p, lambda_h })
}

/// Residual weighting of the boundary block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    /// `(2/N_b) I`.
    Pinn,
    /// `M`, optionally with the skip pairs.
    Trpinn { skip_pairs: bool },
}

/// Exact solution of `ṙ = −K D r` on the given time grid, where `D` is
/// block diagonal with the boundary weighting of `scaling` on the first
/// `n_b` entries and `(2/N_r) I` on the rest. Uses the eigendecomposition
/// of `D^{1/2} K D^{1/2}`.
pub fn simulate_dynamics(k: &Matrix, n_b: usize, scaling: Scaling, r0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_kernel(k)?;
    let n = k.rows();
    if n_b == 0 || n_b > n || r0.len() != n {
        bail!(Structural, "kernel {n}×{n}, boundary block {n_b}, initial residual {}", r0.len());
    }
    let d_half = d_sqrt(n, n_b, scaling)?;
    let d_half_inv = invert_spd(&d_half)?;
    let sym = d_half.matmul(k)?.matmul(&d_half)?;
    let kmin = sym_eigen(k)?.values.last().copied().unwrap_or(0.0);
    let scale = k.as_slice().iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    if kmin < -1e-10 * scale.max(1.0) {
        bail!(Data, "kernel is not positive semi-definite (eigenvalue {kmin:e})");
    }
    let eig = sym_eigen(&sym)?;
    let q = &eig.vectors;
    let c0 = q.transpose().matvec(&d_half.matvec(r0));
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let c: Vec<f64> = c0.iter().zip(&eig.values).map(|(c, l)| c * math::exp(-l * t)).collect();
        out.push(d_half_inv.matvec(&q.matvec(&c)));
    }
    Ok(out)
}

fn d_sqrt(n: usize, n_b: usize, scaling: Scaling) -> Result<Matrix> {
    let n_r = n - n_b;
    let mut d = Matrix::zeros(n, n);
    match scaling {
        Scaling::Pinn => {
            for i in 0..n_b {
                d[(i, i)] = math::sqrt(2.0 / n_b as f64);
            }
        }
        Scaling::Trpinn { skip_pairs } => {
            let s = m_sqrt(n_b, skip_pairs)?;
            for i in 0..n_b {
                for j in 0..n_b {
                    d[(i, j)] = s[(i, j)];
                }
            }
        }
    }
    for i in n_b..n {
        d[(i, i)] = math::sqrt(2.0 / n_r as f64);
    }
    Ok(d)
}

fn invert_spd(a: &Matrix) -> Result<Matrix> {
    let e = sym_eigen(a)?;
    if e.values.iter().any(|&l| !(l > 0.0)) {
        bail!(Data, "weighting matrix is not positive definite");
    }
    let inv: Vec<f64> = e.values.iter().map(|l| 1.0 / l).collect();
    e.vectors.matmul(&Matrix::diagonal(&inv))?.matmul(&e.vectors.transpose())
}

/// Euclidean norms of each residual vector.
pub fn residual_norms(traj: &[Vec<f64>]) -> Vec<f64> {
    traj.iter().map(|r| math::sqrt(r.iter().map(|v| v * v).sum())).collect()
}

/// The weighting matrix `D` itself (for explicit integrators and tests).
pub fn weighting(n: usize, n_b: usize, scaling: Scaling) -> Result<Matrix> {
    if n_b == 0 || n_b > n {
        bail!(Structural, "boundary block {n_b} does not fit a system of size {n}");
    }
    let n_r = n - n_b;
    let mut d = Matrix::zeros(n, n);
    match scaling {
        Scaling::Pinn => (0..n_b).for_each(|i| d[(i, i)] = 2.0 / n_b as f64),
        Scaling::Trpinn { skip_pairs } => {
            let m = if skip_pairs { build_m_with_skip_pairs(n_b)? } else { build_m(n_b)? };
            for i in 0..n_b {
                for j in 0..n_b {
                    d[(i, j)] = m[(i, j)];
                }
            }
        }
    }
    (n_b..n).for_each(|i| d[(i, i)] = 2.0 / n_r as f64);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_boundary, sample_interior, BoundaryMethod};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, rank, |_, _| rng.gen::<f64>() - 0.5).gram()
    }

    #[test]
    fn m_for_four_points() {
        let m = build_m(4).unwrap();
        for i in 0..4 {
            let row: Vec<f64> = (0..4).map(|j| m[(i, (i + j) % 4)]).collect();
            assert_eq!(row, vec![4.5, -2.0, 0.0, -2.0]);
        }
        assert!(build_m(2).is_err());
    }

    #[test]
    fn m_spectrum_matches_closed_form() {
        for n in [4, 51, 201] {
            for skip in [false, true] {
                let m = if skip { build_m_with_skip_pairs(n) } else { build_m(n) }.unwrap();
                assert_eq!(m.max_asymmetry(), 0.0);
                let mut want = m_eigenvalues(n, skip).unwrap();
                want.sort_by(|a, b| b.total_cmp(a));
                let got = sym_eigen(&m).unwrap().values;
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-10, "n={n}: {g} vs {w}");
                }
                let min = *got.last().unwrap();
                assert!((min - 2.0 / n as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn m_sqrt_squares_to_m() {
        for n in [3, 8, 21] {
            let s = m_sqrt(n, false).unwrap();
            let m2 = s.matmul(&s).unwrap();
            let m = build_m(n).unwrap();
            for (a, b) in m2.as_slice().iter().zip(m.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_kernel_spectra() {
        let n = 12;
        let s = spectrum_compare(&Matrix::identity(n), n, false).unwrap();
        assert!(s.lambda_p.iter().all(|l| (l - 1.0 / n as f64).abs() < 1e-14));
        let mut want = m_eigenvalues(n, false).unwrap();
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in s.lambda_h.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_kernel() {
        let v = [1.0, -2.0, 0.5, 3.0, 1.0];
        let k = Matrix::from_fn(5, 5, |i, j| v[i] * v[j]);
        let s = spectrum_compare(&k, 5, false).unwrap();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        assert!((s.lambda_p[0] - norm2 / 5.0).abs() < 1e-12);
        assert!(s.lambda_p[1..].iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn dominance_on_random_kernels() {
        for seed in 0..20 {
            let n = 10 + seed as usize;
            let k = random_psd(n, 1 + seed as usize % n, seed);
            let s = spectrum_compare(&k, n, false).unwrap();
            let tol = 1e-12 * s.lambda_h[0].max(1.0);
            assert!(s.diff().iter().all(|d| *d >= -tol), "seed {seed}: {:?}", s.diff());
        }
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let mut k = Matrix::identity(4);
        k[(0, 1)] = 1e-6;
        assert!(matches!(spectrum_compare(&k, 4, false), Err(crate::Error::Data(_))));
        assert!(matches!(spectrum_compare(&Matrix::identity(4), 5, false), Err(crate::Error::Config(_))));
    }

    #[test]
    fn jacobian_of_linear_model() {
        // u = θ x1
        let net = Mlp::from_flat(&[2, 1], vec![0.7, 0.0, 0.0]).unwrap();
        let b = sample_boundary(BoundaryMethod::Randomized, 9, 1).unwrap();
        let j = boundary_jacobian(&net, &b.points);
        for (i, p) in b.points.iter().enumerate() {
            assert_eq!(j.row(i), &[p[0], p[1], 1.0]);
        }
    }

    #[test]
    fn output_bias_column_is_ones() {
        let net = Mlp::zeros(&[2, 5, 5, 1]).unwrap();
        let b = sample_boundary(BoundaryMethod::Linspace, 7, 0).unwrap();
        let j = boundary_jacobian(&net, &b.points);
        let last = net.num_params() - 1;
        assert!((0..7).all(|i| j[(i, last)] == 1.0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut net = Mlp::init(&[2, 6, 6, 1], 4).unwrap();
        net.params_mut().iter_mut().enumerate().for_each(|(i, p)| *p += 0.1 * libm::sin(i as f64));
        let b = sample_boundary(BoundaryMethod::Uniform, 5, 2).unwrap();
        let j = boundary_jacobian(&net, &b.points);
        let h = 1e-6;
        for k in 0..net.num_params() {
            let (mut up, mut dn) = (net.clone(), net.clone());
            up.params_mut()[k] += h;
            dn.params_mut()[k] -= h;
            for (i, &x) in b.points.iter().enumerate() {
                let fd = (up.forward(x) - dn.forward(x)) / (2.0 * h);
                assert!((fd - j[(i, k)]).abs() < 1e-6);
            }
        }
        let k = j.gram();
        assert_eq!(k.max_asymmetry(), 0.0);
        let e = sym_eigen(&k).unwrap();
        assert!(*e.values.last().unwrap() > -1e-10 * e.values[0]);
    }

    #[test]
    fn jacobian_matches_batched_backward() {
        use crate::model::{Jet, JetBatch};
        let net = Mlp::init(&[2, 6, 6, 1], 5).unwrap();
        let b = sample_boundary(BoundaryMethod::Linspace, 4, 0).unwrap();
        let j = boundary_jacobian(&net, &b.points);
        let batch = JetBatch::forward(&net, &b.points, Jet::Value);
        for i in 0..4 {
            let mut adj = vec![0.0; 4];
            adj[i] = 1.0;
            let mut g = vec![0.0; net.num_params()];
            batch.backward(&net, Some(&adj), None, &mut g);
            for (a, e) in g.iter().zip(j.row(i)) {
                assert!((a - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_dynamics() {
        let k = Matrix::from_rows(1, 1, vec![3.0]).unwrap();
        let times = [0.0, 0.1, 0.5, 1.0];
        let traj = simulate_dynamics(&k, 1, Scaling::Pinn, &[2.0], &times).unwrap();
        for (r, t) in traj.iter().zip(times) {
            assert!((r[0] - 2.0 * libm::exp(-6.0 * t)).abs() < 1e-13);
        }
    }

    fn euler(k: &Matrix, d: &Matrix, r0: &[f64], t_end: f64, dt: f64) -> Vec<f64> {
        let kd = k.matmul(d).unwrap();
        let mut r = r0.to_vec();
        let steps = libm::round(t_end / dt) as usize;
        for _ in 0..steps {
            let dr = kd.matvec(&r);
            r.iter_mut().zip(dr).for_each(|(ri, di)| *ri -= dt * di);
        }
        r
    }

    #[test]
    fn eigen_solution_matches_euler() {
        let net = Mlp::init(&[2, 6, 6, 1], 6).unwrap();
        let b = sample_boundary(BoundaryMethod::Randomized, 6, 3).unwrap();
        let interior = sample_interior(3, 4).unwrap();
        let blocks = KernelBlocks::assemble(&net, &b.points, Some(&interior.points));
        let k = blocks.full();
        let r0: Vec<f64> = (0..9).map(|i| libm::sin(i as f64 + 1.0)).collect();
        for scaling in [Scaling::Pinn, Scaling::Trpinn { skip_pairs: false }] {
            let exact = simulate_dynamics(&k, 6, scaling, &r0, &[1.0]).unwrap();
            let d = weighting(9, 6, scaling).unwrap();
            let approx = euler(&k, &d, &r0, 1.0, 1e-4);
            for (a, e) in approx.iter().zip(&exact[0]) {
                assert!((a - e).abs() < 1e-3, "{scaling:?}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn trpinn_decays_faster_in_shared_frame() {
        // a circulant kernel commutes with M, so both flows share eigenvectors
        let n = 16;
        let row: Vec<f64> = (0..n).map(|j| libm::exp(-(((j.min(n - j)) as f64).powi(2)) / 4.0)).collect();
        let k = circulant(&row);
        let r0: Vec<f64> = (0..n).map(|i| libm::cos(0.7 * i as f64) + 0.3).collect();
        let times: Vec<f64> = (0..=20).map(|i| 0.05 * i as f64).collect();
        let p = residual_norms(&simulate_dynamics(&k, n, Scaling::Pinn, &r0, &times).unwrap());
        let h = residual_norms(&simulate_dynamics(&k, n, Scaling::Trpinn { skip_pairs: false }, &r0, &times).unwrap());
        assert!(p.iter().zip(&h).all(|(p, h)| *h <= *p + 1e-12));
    }

    #[test]
    fn non_psd_kernel_rejected() {
        let k = Matrix::diagonal(&[1.0, -1.0, 2.0]);
        assert!(matches!(simulate_dynamics(&k, 3, Scaling::Pinn, &[1.0; 3], &[0.0]), Err(crate::Error::Data(_))));
    }
}
