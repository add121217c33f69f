//! Receive polarization of one BS with everything else fixed.
//!
//! As a function of `varpi_m` the MSE is
//! `g = v^H R v + 2 Re((rho + c)^H v) + sum_{i != m, k} (v^H F_im v)(v^H D_imk v)`
//! up to a constant. Lifting `v_bar = (v, 1)` and `V = v_bar v_bar^H` turns the
//! quadratic part into `tr(J V)` and the quartic part into `x^H G x` with
//! `x = vec(V)`. The quartic term is majorized by its largest eigenvalue,
//! the convex surrogate is minimized over the relaxed set
//! `{V >= 0, diag(V) = 1}` and a unit-modulus vector is recovered by Gaussian
//! randomization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{adjoint2, mat2_vec, ChannelSet, Pol2, PolarizationMode};
use crate::error::{Result, SolverError};
use crate::numerics::{
    hermitian_eig, max_eig_general, unit_phase, unvec, vec, CMatrix, CVector, Eigen, HermitianMatrix, ONE,
};
use crate::objective::DecisionVars;
use crate::scene::complex_normal;

type V2 = [Complex64; 2];

fn outer(x: &V2, y: &V2) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, c| x[r] * y[c].conj())
}

fn col(x: &V2) -> CVector {
    CVector::from_column_slice(x)
}

fn pad3(a: &CMatrix) -> CMatrix {
    let mut p = CMatrix::zeros(3, 3);
    p.view_mut((0, 0), (2, 2)).copy_from(a);
    p
}

fn quad(v: &V2, a: &CMatrix) -> Complex64 {
    col(v).dotc(&(a * col(v)))
}

#[derive(Debug, Clone)]
pub struct VarpiSubproblemData {
    pub bs: usize,
    /// `eps[i][j][k]`, with the cross-link factor and `varpi_m` pulled out.
    pub eps: Vec<Vec<Vec<V2>>>,
    pub e: CMatrix,
    pub d_mm: CMatrix,
    pub n: CMatrix,
    pub r: HermitianMatrix,
    pub rho: CVector,
    pub c: CVector,
    /// `(F_im, D_imk)` pairs of the quartic term.
    pub quartic: Vec<(CMatrix, CMatrix)>,
    pub j: HermitianMatrix,
    pub g: CMatrix,
    pub lam_max_g: f64,
}

impl VarpiSubproblemData {
    pub fn build(vars: &DecisionVars, ch: &ChannelSet, m_idx: usize) -> Result<Self> {
        let (b, k) = (ch.cells(), ch.users_per_cell());
        let bk = (b * k) as f64;
        let pol = &vars.pol;
        let eps: Vec<Vec<Vec<V2>>> = (0..b)
            .map(|i| {
                let w = vars.w.column(i);
                (0..b)
                    .map(|j| {
                        let u = ch.bs_gen_adj(i, j).adjoint() * w;
                        (0..k)
                            .map(|kk| {
                                let s = u.dotc(&ch.h_gen[j][kk]) * vars.a[j * k + kk];
                                let am = mat2_vec(&ch.a_user[j][kk], &pol.m[j][kk]);
                                [am[0] * s, am[1] * s]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let m = m_idx;
        let a_bs = |i: usize, j: usize| -> &Pol2 { ch.a_bs[i][j].as_ref().expect("inter-BS link") };
        let scale = Complex64::new(-1.0 / bk, 0.0);

        let mut d_mm = CMatrix::zeros(2, 2);
        let mut c = CVector::zeros(2);
        for e in &eps[m][m] {
            d_mm += outer(e, e);
            c += col(e) * scale;
        }
        let mut n = CMatrix::zeros(2, 2);
        let mut rho = CVector::zeros(2);
        let mut e_mat = CMatrix::zeros(2, 2);
        let mut quartic = Vec::new();
        for j in (0..b).filter(|&j| j != m) {
            let av = mat2_vec(a_bs(m, j), &pol.varpi[j]);
            for e in &eps[m][j] {
                let s = col(&pol.varpi[j]).dotc(&col(e));
                let nv = [av[0] * s, av[1] * s];
                n += outer(&nv, &nv);
                rho += col(&nv) * scale;
            }
        }
        for i in (0..b).filter(|&i| i != m) {
            let fv = mat2_vec(&adjoint2(a_bs(i, m)), &pol.varpi[i]);
            let f = outer(&fv, &fv);
            for e in &eps[i][m] {
                e_mat += outer(e, &fv) * scale;
                quartic.push((f.clone(), outer(e, e)));
            }
        }
        let r = HermitianMatrix::from_hermitian_part(&(&e_mat + e_mat.adjoint() + &d_mm + &n));
        let lin = &rho + &c;
        let mut jm = pad3(r.as_matrix());
        for t in 0..2 {
            jm[(t, 2)] = lin[t];
            jm[(2, t)] = lin[t].conj();
        }
        let j = HermitianMatrix::from_hermitian_part(&jm);
        let mut g = CMatrix::zeros(9, 9);
        for (f, d) in &quartic {
            let vf = vec(&pad3(f).adjoint());
            let vd = vec(&pad3(d).adjoint());
            g += vf * vd.adjoint();
        }
        let lam_max_g = if quartic.is_empty() {
            0.0
        } else {
            let lam = max_eig_general(&g)?;
            let tol = 1e-9 * lam.norm().max(1.0);
            if lam.im.abs() > tol || lam.re < -tol {
                return Err(SolverError::SpectralBound { bs: m, re: lam.re, im: lam.im });
            }
            lam.re.max(0.0)
        };
        Ok(VarpiSubproblemData { bs: m, eps, e: e_mat, d_mm, n, r, rho, c, quartic, j, g, lam_max_g })
    }

    /// The varpi-dependent part of the MSE.
    pub fn g_value(&self, v: &V2) -> f64 {
        let lin = &self.rho + &self.c;
        let mut val = quad(v, self.r.as_matrix()).re + 2.0 * lin.dotc(&col(v)).re;
        for (f, d) in &self.quartic {
            val += quad(v, f).re * quad(v, d).re;
        }
        val
    }

    /// Majorization constant. Any value `>= lambda_max(G)` keeps the
    /// surrogate an upper bound; the floor relative to `|J|` keeps the
    /// relaxed subproblem well scaled when `G` is negligible.
    pub fn lambda(&self) -> f64 {
        self.lam_max_g.max(1e-9).max(1e-4 * self.j.as_matrix().norm())
    }

    /// Linear coefficient of the convex surrogate around `x_t`.
    pub fn q(&self, x_t: &CVector) -> CVector {
        let lam = Complex64::new(self.lambda(), 0.0);
        (&self.g * x_t) * Complex64::new(2.0, 0.0) - x_t * (lam * 2.0) + vec(&self.j.as_matrix().adjoint())
    }

    /// `lambda ||x||^2 + Re(x^H q)` for the lifted matrix `v`.
    pub fn surrogate_linear_part(&self, v: &CMatrix, q: &CVector) -> f64 {
        let x = vec(v);
        self.lambda() * x.norm_squared() + x.dotc(q).re
    }

    /// The full surrogate `h(x | x_t)`, equal to `g` at `x = x_t` when the
    /// lifted point is rank one.
    pub fn surrogate(&self, v: &CMatrix, x_t: &CVector) -> f64 {
        let q = self.q(x_t);
        let lam = Complex64::new(self.lambda(), 0.0);
        let cst = x_t.dotc(&(x_t * lam - &self.g * x_t)).re;
        self.surrogate_linear_part(v, &q) + cst
    }
}

pub fn lift(v: &V2) -> CMatrix {
    let bar = CVector::from_vec(vec![v[0], v[1], ONE]);
    &bar * bar.adjoint()
}

fn psd_part(a: &CMatrix) -> Result<CMatrix> {
    let e = hermitian_eig(&HermitianMatrix::from_hermitian_part(a))?;
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (t, &l) in e.values.iter().enumerate() {
        if l > 0.0 {
            let v = e.vectors.column(t);
            out += v * v.adjoint() * Complex64::new(l, 0.0);
        }
    }
    Ok(out)
}

/// Unit diagonal and PSD exactly: clip negative eigenvalues, then rescale
/// by `D^-1/2 (.) D^-1/2`.
fn clean_correlation(y: &CMatrix) -> Result<CMatrix> {
    let n = y.nrows();
    let p = psd_part(y)?;
    let d: Vec<f64> = (0..n).map(|t| p[(t, t)].re.max(1e-300).sqrt()).collect();
    let out = CMatrix::from_fn(n, n, |r, c| if r == c { ONE } else { p[(r, c)] / (d[r] * d[c]) });
    Ok(HermitianMatrix::from_hermitian_part(&out).into_matrix())
}

/// Dykstra's alternating projections onto the PSD cone and the unit-diagonal
/// affine set. The tolerance is relative to the size of `c`.
fn dykstra_correlation(c: &CMatrix, tol: f64, max_sweeps: usize) -> Result<(CMatrix, bool)> {
    let n = c.nrows();
    let tol = tol * c.norm().max(1.0);
    let mut y = c.clone();
    let mut ds = CMatrix::zeros(n, n);
    let mut converged = false;
    for _ in 0..max_sweeps {
        let r = &y - &ds;
        let x = psd_part(&r)?;
        ds = &x - &r;
        let mut y_next = x.clone();
        for t in 0..n {
            y_next[(t, t)] = ONE;
        }
        let step = (&y_next - &y).norm();
        let gap = (&y_next - &x).norm();
        y = y_next;
        if step <= tol && gap <= tol {
            converged = true;
            break;
        }
    }
    Ok((clean_correlation(&y)?, converged))
}

/// Nearest matrix to `c` in `{V >= 0, diag(V) = 1}`.
///
/// Semismooth Newton on the dual `min_y 1/2 ||P_S(c + Diag y)||^2 - sum y`,
/// whose gradient is `diag(P_S(c + Diag y)) - 1`. Falls back to Dykstra if
/// Newton stalls.
fn project_correlation(c: &CMatrix) -> Result<(CMatrix, bool)> {
    let n = c.nrows();
    let c = HermitianMatrix::from_hermitian_part(c).into_matrix();
    // Rounding in the eigendecomposition of c limits the attainable accuracy.
    let tol = 1e-13 + 1e-14 * c.norm();
    let mut y = DVector::from_fn(n, |t, _| 1.0 - c[(t, t)].re);
    let eval = |y: &DVector<f64>| -> Result<(Eigen, CMatrix, DVector<f64>, f64)> {
        let mut x = c.clone();
        for t in 0..n {
            x[(t, t)] += y[t];
        }
        let e = hermitian_eig(&HermitianMatrix::from_hermitian_part(&x))?;
        let mut v = CMatrix::zeros(n, n);
        for (t, &l) in e.values.iter().enumerate() {
            if l > 0.0 {
                let col = e.vectors.column(t);
                v += col * col.adjoint() * Complex64::new(l, 0.0);
            }
        }
        let grad = DVector::from_fn(n, |t, _| v[(t, t)].re - 1.0);
        let theta = 0.5 * v.norm_squared() - y.sum();
        Ok((e, v, grad, theta))
    };
    let (mut e, mut v, mut grad, mut theta) = eval(&y)?;
    for _ in 0..100 {
        if grad.amax() <= tol {
            return Ok((clean_correlation(&v)?, true));
        }
        // Generalized Jacobian of y -> diag(P_S(c + Diag y)).
        let lam = &e.values;
        let omega = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (lam[i], lam[j]);
            if a > 0.0 && b > 0.0 {
                1.0
            } else if a <= 0.0 && b <= 0.0 {
                0.0
            } else {
                (a.max(0.0) - b.max(0.0)) / (a - b)
            }
        });
        let p = &e.vectors;
        let jac = DMatrix::from_fn(n, n, |l, k| {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    s += p[(l, i)] * p[(k, i)].conj() * p[(k, j)] * p[(l, j)].conj() * omega[(i, j)];
                }
            }
            s.re
        });
        // Mixed eigenvalue pairs give curvature of order 1/||c||; the
        // regularization must stay below that.
        let mu = grad.norm().min(1e-6) / c.norm().max(1.0);
        let sys = jac + DMatrix::identity(n, n) * mu;
        let Some(dir) = sys.lu().solve(&(-&grad)) else { break };
        let slope = grad.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let y_new = &y + &dir * t;
            let next = eval(&y_new)?;
            // At large scale theta is dominated by rounding; a smaller
            // residual is then the usable progress measure.
            if next.3 <= theta + 1e-4 * t * slope || next.2.norm() <= (1.0 - 1e-4 * t) * grad.norm() {
                y = y_new;
                (e, v, grad, theta) = next;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if grad.amax() <= 1e3 * tol {
        return Ok((clean_correlation(&v)?, true));
    }
    dykstra_correlation(&c, DYKSTRA_TOL, DYKSTRA_SWEEPS)
}

#[derive(Debug, Clone)]
pub struct P44Solution {
    pub v: HermitianMatrix,
    pub converged: bool,
    pub iterations: usize,
    /// Scale-free stationarity residual `||V - Proj(V - grad / s)||_F` with
    /// `s = max(||herm(Q)||_F, 2 lambda)`.
    pub kkt_residual: f64,
}

const DYKSTRA_TOL: f64 = 1e-10;
const DYKSTRA_SWEEPS: usize = 500;

/// Minimizes `lambda ||vec V||^2 + Re(vec(V)^H q(x_t))` over Hermitian PSD
/// `V` with unit diagonal by projected gradient with step
/// `1 / (2 lambda + 1e-9)`.
pub fn solve_p44(data: &VarpiSubproblemData, x_t: &CVector, tol: f64) -> Result<P44Solution> {
    let lam = data.lambda();
    let q = data.q(x_t);
    let qh = HermitianMatrix::from_hermitian_part(&unvec(&q, 3)).into_matrix();
    let grad = |v: &CMatrix| v * Complex64::new(2.0 * lam, 0.0) + &qh;
    let eta = 1.0 / (2.0 * lam + 1e-9);
    let mut v = clean_correlation(&unvec(x_t, 3))?;
    let mut converged = false;
    let mut iterations = 0;
    // Rounding in the projected point grows with the step times |Q|.
    let floor = 1e-13 * (eta * qh.norm()).max(1.0);
    for _ in 0..500 {
        iterations += 1;
        let (next, ok) = project_correlation(&(&v - grad(&v) * Complex64::new(eta, 0.0)))?;
        let change = (&next - &v).norm();
        v = next;
        if ok && change <= tol.max(floor) {
            converged = true;
            break;
        }
    }
    let scale = qh.norm().max(2.0 * lam);
    let kkt_residual = if scale > 0.0 {
        let (p, _) = project_correlation(&(&v - grad(&v) * Complex64::new(1.0 / scale, 0.0)))?;
        (&p - &v).norm()
    } else {
        0.0
    };
    Ok(P44Solution { v: HermitianMatrix::from_hermitian_part(&v), converged, iterations, kkt_residual })
}

/// Draws unit-modulus candidates from `CN(0, V)` and returns the best of
/// them and the incumbent under the true `g`.
pub fn gaussian_randomize<R: Rng + ?Sized>(
    v: &HermitianMatrix,
    data: &VarpiSubproblemData,
    n_samples: usize,
    incumbent: V2,
    rng: &mut R,
) -> Result<(V2, f64)> {
    let e = hermitian_eig(v)?;
    let n = v.order();
    let factor = CMatrix::from_fn(n, n, |r, c| e.vectors[(r, c)] * e.values[c].max(0.0).sqrt());
    let mut best = incumbent;
    let mut best_g = data.g_value(&incumbent);
    for _ in 0..n_samples {
        let z = CVector::from_fn(n, |_, _| complex_normal(rng, 1.0));
        let xi = &factor * z;
        let rot = unit_phase(xi[2]).conj();
        let cand = [unit_phase(xi[0]) * rot, unit_phase(xi[1]) * rot];
        let g = data.g_value(&cand);
        if g < best_g {
            best_g = g;
            best = cand;
        }
    }
    Ok((best, best_g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarpiReport {
    /// Iterations per BS.
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

/// Sweeps the BSs, each time iterating the relaxed convex surrogate and
/// randomization from the current `varpi_m` until `g` changes by at most
/// `tol` relative or `t_max` iterations.
pub fn update_varpi<R: Rng + ?Sized>(
    vars: &DecisionVars,
    ch: &ChannelSet,
    tol: f64,
    t_max: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<(Vec<V2>, VarpiReport)> {
    let b = ch.cells();
    let mut work = vars.clone();
    let mut report = VarpiReport { iterations: vec![0; b], converged: vec![true; b] };
    if ch.mode == PolarizationMode::Single {
        return Ok((work.pol.varpi, report));
    }
    for m in 0..b {
        let data = VarpiSubproblemData::build(&work, ch, m)?;
        let mut cur = work.pol.varpi[m];
        let mut g = data.g_value(&cur);
        let mut converged = false;
        let mut it = 0;
        while it < t_max {
            it += 1;
            let x_t = vec(&lift(&cur));
            let sol = solve_p44(&data, &x_t, 1e-12)?;
            let (next, g_next) = gaussian_randomize(&sol.v, &data, n_samples, cur, rng)?;
            let delta = g - g_next;
            cur = next;
            g = g_next;
            if delta <= tol * g.abs().max(1e-12) {
                converged = true;
                break;
            }
        }
        work.pol.varpi[m] = cur;
        report.iterations[m] = it;
        report.converged[m] = converged;
    }
    Ok((work.pol.varpi, report))
}
