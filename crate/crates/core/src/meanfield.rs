//! Mean-field ODE systems for the single-type and two-type models.
//!
//! Densities are tracked for each occupied state; the empty density is one
//! minus their sum. For the single-type model with state u = (u+, u-):
//!
//! ```text
//! u+' = lambda p u+ (1 - u+ - u-) - u+
//! u-' = lambda q u+ (1 - u+ - u-) - u-
//! ```
//!
//! and for the two-type model with u = (u+1, u-1, u+2, u-2), u0 = 1 - sum:
//!
//! ```text
//! u+i' = lambda_i p_i u+i u0 - u+i
//! u-i' = lambda_i q_i u+i u0 - u-i
//! ```
//!
//! Closed-form fixed points, Jacobian spectra, and the Dulac criterion are
//! implemented directly; a numeric eigensolver and a numeric characteristic
//! polynomial serve as independent cross-checks.

use crate::sim::ModelParams;
use crate::{Error, Result};
use nalgebra::{Complex, Matrix4};

/// Single-type mean-field system.
#[derive(Debug, Clone, Copy)]
pub struct SingleTypeField {
    pub lambda: f64,
    pub p: f64,
}

/// Two-type mean-field system; birth rates must be finite.
#[derive(Debug, Clone, Copy)]
pub struct TwoTypeField {
    pub params: ModelParams,
}

/// Qualitative long-run prediction of the two-type mean-field system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfOutcome {
    /// Both types die out: lambda_i p_i <= 1 for both.
    Extinction,
    /// Type 1 excludes type 2: lambda_1 p_1 > max(1, lambda_2 p_2).
    Type1Wins,
    /// Type 2 excludes type 1.
    Type2Wins,
    /// lambda_1 p_1 = lambda_2 p_2 > 1: a segment of coexistence points.
    CoexistenceSegment,
}

/// Fixed points of the two-type system.
#[derive(Debug, Clone)]
pub struct FixedPoints {
    /// The all-empty state, always present.
    pub trivial: [f64; 4],
    /// Type-1 boundary point, present iff lambda_1 p_1 > 1.
    pub q1: Option<[f64; 4]>,
    /// Type-2 boundary point, present iff lambda_2 p_2 > 1.
    pub q2: Option<[f64; 4]>,
    /// Whether the interior coexistence segment exists
    /// (lambda_1 p_1 = lambda_2 p_2 > 1).
    pub coexistence_segment: bool,
}

impl SingleTypeField {
    pub fn new(lambda: f64, p: f64) -> Result<SingleTypeField> {
        if !(lambda >= 0.0) || lambda.is_infinite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("p must lie in [0,1], got {p}")));
        }
        Ok(SingleTypeField { lambda, p })
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn rhs(&self, u: [f64; 2]) -> [f64; 2] {
        let empty = 1.0 - u[0] - u[1];
        [
            self.lambda * self.p * u[0] * empty - u[0],
            self.lambda * self.q() * u[0] * empty - u[1],
        ]
    }

    pub fn jacobian(&self, u: [f64; 2]) -> [[f64; 2]; 2] {
        let lp = self.lambda * self.p;
        let lq = self.lambda * self.q();
        let s = 1.0 - 2.0 * u[0] - u[1];
        [[lp * s - 1.0, -lp * u[0]], [lq * s, -lq * u[0] - 1.0]]
    }

    /// Trace and determinant of the Jacobian. The determinant always equals
    /// -(trace) - 1 for this system, at every state.
    pub fn trace_det(&self, u: [f64; 2]) -> (f64, f64) {
        let j = self.jacobian(u);
        let t = j[0][0] + j[1][1];
        let d = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        (t, d)
    }

    /// The interior fixed point Q = (1 - 1/(lambda p)) (p, q), present iff
    /// lambda p > 1.
    pub fn interior_fixed_point(&self) -> Option<[f64; 2]> {
        let lp = self.lambda * self.p;
        if lp > 1.0 {
            let scale = 1.0 - 1.0 / lp;
            Some([scale * self.p, scale * self.q()])
        } else {
            None
        }
    }

    /// Eigenvalues at the all-empty state: {lambda p - 1, -1}.
    pub fn spectrum_origin(&self) -> [f64; 2] {
        [self.lambda * self.p - 1.0, -1.0]
    }

    /// Eigenvalues at the interior fixed point: {1 - lambda p, -1}.
    /// Only meaningful when the point exists (lambda p > 1).
    pub fn spectrum_interior(&self) -> [f64; 2] {
        [1.0 - self.lambda * self.p, -1.0]
    }

    /// Divergence of phi * rhs for the Dulac function phi = 1/(u+ u-):
    /// -lambda p / u- - lambda q (1 - u+) / u-^2, negative on the open
    /// simplex interior, which rules out periodic orbits there.
    pub fn dulac_divergence(&self, u: [f64; 2]) -> Result<f64> {
        if !(u[0] > 0.0 && u[1] > 0.0 && u[0] + u[1] < 1.0) {
            return Err(Error::invalid(format!(
                "Dulac divergence needs an interior point, got ({}, {})",
                u[0], u[1]
            )));
        }
        let lp = self.lambda * self.p;
        let lq = self.lambda * self.q();
        Ok(-lp / u[1] - lq * (1.0 - u[0]) / (u[1] * u[1]))
    }
}

impl TwoTypeField {
    pub fn new(params: ModelParams) -> Result<TwoTypeField> {
        params.validate()?;
        if params.has_infinite_rate() {
            return Err(Error::invalid("mean-field systems need finite birth rates"));
        }
        Ok(TwoTypeField { params })
    }

    pub fn rhs(&self, u: [f64; 4]) -> [f64; 4] {
        let p = &self.params;
        let u0 = 1.0 - u[0] - u[1] - u[2] - u[3];
        [
            p.lambda1 * p.p1 * u[0] * u0 - u[0],
            p.lambda1 * p.q1() * u[0] * u0 - u[1],
            p.lambda2 * p.p2 * u[2] * u0 - u[2],
            p.lambda2 * p.q2() * u[2] * u0 - u[3],
        ]
    }

    pub fn jacobian(&self, u: [f64; 4]) -> [[f64; 4]; 4] {
        let p = &self.params;
        let u0 = 1.0 - u[0] - u[1] - u[2] - u[3];
        let l1p = p.lambda1 * p.p1;
        let l1q = p.lambda1 * p.q1();
        let l2p = p.lambda2 * p.p2;
        let l2q = p.lambda2 * p.q2();
        [
            [l1p * (u0 - u[0]) - 1.0, -l1p * u[0], -l1p * u[0], -l1p * u[0]],
            [l1q * (u0 - u[0]), -l1q * u[0] - 1.0, -l1q * u[0], -l1q * u[0]],
            [-l2p * u[2], -l2p * u[2], l2p * (u0 - u[2]) - 1.0, -l2p * u[2]],
            [-l2q * u[2], -l2q * u[2], l2q * (u0 - u[2]), -l2q * u[2] - 1.0],
        ]
    }

    pub fn fixed_points(&self) -> FixedPoints {
        let p = &self.params;
        let l1p = p.lambda1 * p.p1;
        let l2p = p.lambda2 * p.p2;
        let q1 = (l1p > 1.0).then(|| {
            let s = 1.0 - 1.0 / l1p;
            [s * p.p1, s * p.q1(), 0.0, 0.0]
        });
        let q2 = (l2p > 1.0).then(|| {
            let s = 1.0 - 1.0 / l2p;
            [0.0, 0.0, s * p.p2, s * p.q2()]
        });
        FixedPoints {
            trivial: [0.0; 4],
            q1,
            q2,
            coexistence_segment: l1p == l2p && l1p > 1.0,
        }
    }

    /// Point on the coexistence segment: theta Q1 + (1-theta) Q2.
    /// Meaningful when the segment exists.
    pub fn p_theta(&self, theta: f64) -> Result<[f64; 4]> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid(format!("theta must lie in [0,1], got {theta}")));
        }
        let fps = self.fixed_points();
        if !fps.coexistence_segment {
            return Err(Error::invalid(
                "coexistence segment requires lambda1 p1 = lambda2 p2 > 1",
            ));
        }
        let q1 = fps.q1.unwrap();
        let q2 = fps.q2.unwrap();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = theta * q1[i] + (1.0 - theta) * q2[i];
        }
        Ok(out)
    }

    /// Direction of the coexistence segment, Q1 - Q2; the Jacobian at any
    /// P_theta annihilates it.
    pub fn segment_direction(&self) -> Result<[f64; 4]> {
        let fps = self.fixed_points();
        if !fps.coexistence_segment {
            return Err(Error::invalid(
                "coexistence segment requires lambda1 p1 = lambda2 p2 > 1",
            ));
        }
        let q1 = fps.q1.unwrap();
        let q2 = fps.q2.unwrap();
        Ok([q1[0] - q2[0], q1[1] - q2[1], q1[2] - q2[2], q1[3] - q2[3]])
    }

    /// Closed-form spectrum at Q1: {-1, -1, 1 - lambda1 p1,
    /// lambda2 p2 / (lambda1 p1) - 1}. Requires lambda1 p1 > 1.
    pub fn spectrum_q1_closed(&self) -> Result<[f64; 4]> {
        let p = &self.params;
        let l1p = p.lambda1 * p.p1;
        if l1p <= 1.0 {
            return Err(Error::invalid("Q1 exists only when lambda1 p1 > 1"));
        }
        Ok([-1.0, -1.0, 1.0 - l1p, p.lambda2 * p.p2 / l1p - 1.0])
    }

    /// Closed-form spectrum at Q2, by type symmetry.
    pub fn spectrum_q2_closed(&self) -> Result<[f64; 4]> {
        let p = &self.params;
        let l2p = p.lambda2 * p.p2;
        if l2p <= 1.0 {
            return Err(Error::invalid("Q2 exists only when lambda2 p2 > 1"));
        }
        Ok([-1.0, -1.0, 1.0 - l2p, p.lambda1 * p.p1 / l2p - 1.0])
    }

    /// Closed-form characteristic polynomial at any coexistence point:
    /// X (X+1)^2 (X - alpha) with alpha = 1 - lambda1 p1, returned as
    /// coefficients [c1, c2, c3, c4] of X^4 + c1 X^3 + c2 X^2 + c3 X + c4.
    pub fn charpoly_ptheta_closed(&self) -> Result<[f64; 4]> {
        let fps = self.fixed_points();
        if !fps.coexistence_segment {
            return Err(Error::invalid(
                "coexistence segment requires lambda1 p1 = lambda2 p2 > 1",
            ));
        }
        let alpha = 1.0 - self.params.lambda1 * self.params.p1;
        Ok([2.0 - alpha, 1.0 - 2.0 * alpha, -alpha, 0.0])
    }

    /// Outcome classification by the signs of lambda_i p_i - 1.
    pub fn classify_outcome(&self) -> MfOutcome {
        let p = &self.params;
        let l1p = p.lambda1 * p.p1;
        let l2p = p.lambda2 * p.p2;
        if l1p <= 1.0 && l2p <= 1.0 {
            MfOutcome::Extinction
        } else if l1p == l2p {
            MfOutcome::CoexistenceSegment
        } else if l1p > l2p {
            MfOutcome::Type1Wins
        } else {
            MfOutcome::Type2Wins
        }
    }

    /// Residual of the invariant-subspace relations q_i u+i = p_i u-i,
    /// maximum absolute value over both types.
    pub fn gamma2_residual(&self, u: [f64; 4]) -> f64 {
        let p = &self.params;
        let r1 = p.q1() * u[0] - p.p1 * u[1];
        let r2 = p.q2() * u[2] - p.p2 * u[3];
        r1.abs().max(r2.abs())
    }
}

/// Numeric eigenvalues of a 4x4 Jacobian, sorted by real part then
/// imaginary part. Serves as the oracle for the closed-form spectra.
pub fn numeric_eigenvalues4(j: [[f64; 4]; 4]) -> Vec<Complex<f64>> {
    let m = Matrix4::from_fn(|r, c| j[r][c]);
    let mut eigs: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    eigs
}

/// Numeric characteristic polynomial of a 4x4 matrix via the
/// Faddeev-LeVerrier recurrence: coefficients [c1, c2, c3, c4] of
/// det(X I - A) = X^4 + c1 X^3 + c2 X^2 + c3 X + c4.
pub fn charpoly4(j: [[f64; 4]; 4]) -> [f64; 4] {
    let a = Matrix4::from_fn(|r, c| j[r][c]);
    let mut m = a;
    let mut coeffs = [0.0f64; 4];
    coeffs[0] = -m.trace();
    for k in 1..4 {
        m = a * (m + Matrix4::identity() * coeffs[k - 1]);
        coeffs[k] = -m.trace() / (k as f64 + 1.0);
    }
    coeffs
}

/// One recorded mean-field trajectory.
#[derive(Debug, Clone)]
pub struct OdeRun<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

impl<const N: usize> OdeRun<N> {
    pub fn terminal(&self) -> [f64; N] {
        *self.states.last().expect("integration records at least the initial state")
    }
}

/// Fixed-step RK4 integration with a simplex guard.
///
/// Every recorded state must have nonnegative coordinates summing to at
/// most 1, within 1e-9; tiny violations are clamped, larger ones abort with
/// an invariant violation. States are recorded every `record_every` steps
/// plus the final state.
pub fn integrate<const N: usize>(
    f: impl Fn([f64; N]) -> [f64; N],
    u0: [f64; N],
    t_end: f64,
    h: f64,
    record_every: usize,
) -> Result<OdeRun<N>> {
    const TOL: f64 = 1e-9;
    if !(h > 0.0) || !(t_end >= 0.0) || t_end.is_infinite() {
        return Err(Error::invalid(format!("bad integration span: t_end={t_end}, h={h}")));
    }
    if record_every == 0 {
        return Err(Error::invalid("record_every must be >= 1"));
    }
    let check = |u: &mut [f64; N], t: f64| -> Result<()> {
        let mut sum = 0.0;
        for x in u.iter_mut() {
            if *x < -TOL || x.is_nan() {
                return Err(Error::violation(format!(
                    "simplex constraint violated at t={t}: coordinate {x}"
                )));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
            sum += *x;
        }
        if sum > 1.0 + TOL {
            return Err(Error::violation(format!(
                "simplex constraint violated at t={t}: sum {sum}"
            )));
        }
        Ok(())
    };

    let steps = (t_end / h).ceil() as usize;
    let mut u = u0;
    check(&mut u, 0.0)?;
    let mut times = Vec::with_capacity(steps / record_every + 2);
    let mut states = Vec::with_capacity(steps / record_every + 2);
    times.push(0.0);
    states.push(u);
    let axpy = |u: &[f64; N], k: &[f64; N], c: f64| {
        let mut out = *u;
        for i in 0..N {
            out[i] += c * k[i];
        }
        out
    };
    for step in 0..steps {
        let t = step as f64 * h;
        let dt = (t_end - t).min(h);
        let k1 = f(u);
        let k2 = f(axpy(&u, &k1, dt / 2.0));
        let k3 = f(axpy(&u, &k2, dt / 2.0));
        let k4 = f(axpy(&u, &k3, dt));
        for i in 0..N {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = (t + dt).min(t_end);
        check(&mut u, t_next)?;
        if (step + 1) % record_every == 0 || step + 1 == steps {
            times.push(t_next);
            states.push(u);
        }
    }
    Ok(OdeRun { times, states })
}

/// Scan the open simplex on a uniform grid for residual minima and polish
/// candidates with Newton's method; returns the distinct interior fixed
/// points found. Used to check that no interior fixed points exist beyond
/// the closed-form ones (away from the degenerate coexistence case).
pub fn interior_fixed_points_scan<const N: usize>(
    f: impl Fn([f64; N]) -> [f64; N],
    jac: impl Fn([f64; N]) -> [[f64; N]; N],
    mesh: usize,
) -> Vec<[f64; N]> {
    let mut candidates: Vec<[f64; N]> = Vec::new();
    let threshold = 4.0 / mesh as f64;
    let mut idx = [0usize; N];
    'outer: loop {
        let mut point = [0.0f64; N];
        let mut sum = 0.0;
        for i in 0..N {
            point[i] = idx[i] as f64 / mesh as f64;
            sum += point[i];
        }
        let interior = idx.iter().all(|&i| i >= 1) && sum < 1.0 - 0.5 / mesh as f64;
        if interior {
            let r = f(point);
            let norm = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if norm < threshold {
                candidates.push(point);
            }
        }
        // Advance the mixed-radix counter over the grid.
        for i in (0..N).rev() {
            idx[i] += 1;
            if idx[i] <= mesh {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }

    let mut found: Vec<[f64; N]> = Vec::new();
    for start in candidates {
        if let Some(root) = newton_polish(&f, &jac, start) {
            let interior = root.iter().all(|&x| x > 1e-9)
                && root.iter().sum::<f64>() < 1.0 - 1e-9;
            if interior && !found.iter().any(|r| dist_inf(r, &root) < 1e-6) {
                found.push(root);
            }
        }
    }
    found
}

fn dist_inf<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Solve a small dense linear system by Gaussian elimination with partial
/// pivoting; returns None when the matrix is numerically singular.
fn solve_linear<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for k in row + 1..N {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn newton_polish<const N: usize>(
    f: &impl Fn([f64; N]) -> [f64; N],
    jac: &impl Fn([f64; N]) -> [[f64; N]; N],
    mut u: [f64; N],
) -> Option<[f64; N]> {
    for _ in 0..50 {
        let r = f(u);
        let norm = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm < 1e-13 {
            return Some(u);
        }
        let mut rhs = [0.0f64; N];
        for i in 0..N {
            rhs[i] = -r[i];
        }
        let delta = solve_linear(jac(u), rhs)?;
        for i in 0..N {
            u[i] += delta[i];
        }
        if u.iter().any(|x| x.is_nan()) {
            return None;
        }
    }
    None
}
