//! Continuous-time LTI SISO systems: realization, transfer function, normal
//! form, and simulation.
//!
//! The normal form splits the state into output derivatives
//! `xi = [y, y', ..., y^(r-1)]` and hidden states `eta` with
//!
//! ```text
//! xi'  = A1 xi + A2 eta + B1 u
//! eta' = A3 y  + A4 eta
//! y^(r) = A_xi xi + A_eta eta + b_lead u
//! ```
//!
//! where `A4` is the companion matrix of the transfer-function numerator.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode;
use crate::poly;
use crate::trajectory::{Signal, Trajectory};

/// Default relative tolerance for rank and zero tests.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative tolerance for verifying the block pattern of the transformed dynamics.
const STRUCTURE_RTOL: f64 = 1e-6;

/// `x' = A x + B u`, `y = C x`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "A is {n}x{n} but B has {} rows and C has {} columns",
                b.len(),
                c.len()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state-space matrices"));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Markov-type product `C A^k B`.
    pub fn markov(&self, k: usize) -> f64 {
        (self.output_row(k) * &self.b)[0]
    }

    /// Row vector `C A^k`.
    pub fn output_row(&self, k: usize) -> RowDVector<f64> {
        let mut row = self.c.clone();
        for _ in 0..k {
            row = &row * &self.a;
        }
        row
    }

    /// Controller canonical realization of a transfer function.
    pub fn controller_canonical(tf: &TransferFunction) -> Result<Self> {
        let n = tf.den.len() - 1;
        let a = poly::companion(&tf.den)?;
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let mut c = RowDVector::zeros(n);
        for (j, v) in tf.num.iter().enumerate() {
            c[j] = *v;
        }
        Self::new(a, b, c)
    }

    /// Same system in coordinates `z = T x`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::TransformConstruction("similarity transform is singular".into()))?;
        Self::new(t * &self.a * &t_inv, t * &self.b, &self.c * &t_inv)
    }
}

/// Serializable description of a state-space system: `a` row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StateSpaceFile {
    pub fn build(&self) -> Result<StateSpace> {
        let n = self.a.len();
        if let Some(row) = self.a.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!("A has {n} rows but a row of length {}", row.len())));
        }
        let flat: Vec<f64> = self.a.iter().flatten().copied().collect();
        StateSpace::new(
            DMatrix::from_row_slice(n, n, &flat),
            DVector::from_column_slice(&self.b),
            RowDVector::from_row_slice(&self.c),
        )
    }
}

impl From<&StateSpace> for StateSpaceFile {
    fn from(sys: &StateSpace) -> Self {
        Self {
            a: sys.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: sys.b.iter().copied().collect(),
            c: sys.c.iter().copied().collect(),
        }
    }
}

/// `G(s) = num(s) / den(s)` with ascending-power coefficients and monic `den`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub r: usize,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.len() < 2 {
            return Err(Error::Dimension("transfer function needs a numerator and a denominator of degree >= 1".into()));
        }
        let lead_den = *den.last().unwrap();
        if lead_den == 0.0 {
            return Err(Error::Domain("denominator leading coefficient is zero".into()));
        }
        let lead_num = *num.last().unwrap();
        if lead_num == 0.0 {
            return Err(Error::Domain("numerator leading coefficient is zero".into()));
        }
        if num.len() >= den.len() {
            return Err(Error::Domain("transfer function must be strictly proper".into()));
        }
        let den: Vec<f64> = den.iter().map(|c| c / lead_den).collect();
        let num: Vec<f64> = num.iter().map(|c| c / lead_den).collect();
        let r = den.len() - num.len();
        Ok(Self { num, den, r })
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    /// `b_{n-r}`, the leading numerator coefficient.
    pub fn lead(&self) -> f64 {
        *self.num.last().unwrap()
    }

    pub fn eval(&self, s: nalgebra::Complex<f64>) -> nalgebra::Complex<f64> {
        poly::eval_complex(&self.num, s) / poly::eval_complex(&self.den, s)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num[0] / self.den[0]
    }

    pub fn zeros(&self) -> Result<Vec<nalgebra::Complex<f64>>> {
        poly::roots(&self.num)
    }

    pub fn poles(&self) -> Result<Vec<nalgebra::Complex<f64>>> {
        poly::roots(&self.den)
    }
}

/// Normal-form decomposition `[xi; eta] = S x`.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub s: DMatrix<f64>,
    pub s_inv: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub a3: DVector<f64>,
    pub a4: DMatrix<f64>,
    pub a_xi: RowDVector<f64>,
    pub a_eta: RowDVector<f64>,
    pub b_lead: f64,
    pub r: usize,
    /// Numerator coefficients `b_0 ... b_{n-r}`.
    pub num: Vec<f64>,
}

impl NormalForm {
    pub fn order(&self) -> usize {
        self.s.nrows()
    }

    /// Number of hidden states, `n - r`.
    pub fn hidden_dim(&self) -> usize {
        self.order() - self.r
    }

    /// Splits an original-coordinate state into `(xi, eta)`.
    pub fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let z = &self.s * x;
        let r = self.r;
        (z.rows(0, r).into_owned(), z.rows(r, self.hidden_dim()).into_owned())
    }

    /// Inverse of [`split`](Self::split).
    pub fn join(&self, xi: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(self.order());
        z.rows_mut(0, self.r).copy_from(xi);
        z.rows_mut(self.r, self.hidden_dim()).copy_from(eta);
        &self.s_inv * z
    }

    /// Eigenvalues of the zero-dynamics block.
    pub fn zero_dynamics_spectrum(&self) -> Result<Vec<nalgebra::Complex<f64>>> {
        let mut ev = poly::eigenvalues(&self.a4)?;
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(ev)
    }

    pub fn is_minimum_phase(&self, tol: f64) -> Result<bool> {
        is_hurwitz(&self.a4, tol)
    }

    /// Full normal-form state matrix `[[A1, A2], [A3 e1', A4]]`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let (n, r) = (self.order(), self.r);
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (r, r)).copy_from(&self.a1);
        m.view_mut((0, r), (r, n - r)).copy_from(&self.a2);
        for i in 0..n - r {
            m[(r + i, 0)] = self.a3[i];
        }
        m.view_mut((r, r), (n - r, n - r)).copy_from(&self.a4);
        m
    }

    pub fn block_input(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.order());
        b.rows_mut(0, self.r).copy_from(&self.b1);
        b
    }
}

/// Smallest `i >= 1` with `|C A^(i-1) B| > tol |C A^(i-1)| |B|`.
pub fn relative_degree(sys: &StateSpace, tol: f64) -> Result<usize> {
    let n = sys.order();
    let bn = sys.b.norm();
    let mut row = sys.c.clone();
    for i in 1..=n {
        let g = (&row * &sys.b)[0];
        let threshold = tol * row.norm() * bn;
        if g.abs() > threshold {
            return Ok(i);
        }
        row = &row * &sys.a;
    }
    Err(Error::DegenerateSystem)
}

/// Transfer function by the Faddeev–LeVerrier recursion.
///
/// `adj(sI - A) = sum_k M_k s^(n-k)` with `M_1 = I`, `M_k = A M_(k-1) + c_(n-k+1) I`,
/// so the numerator coefficient of `s^(n-k)` is `C M_k B`.
pub fn transfer_function(sys: &StateSpace) -> Result<TransferFunction> {
    let n = sys.order();
    let r = relative_degree(sys, DEFAULT_TOL)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut den = vec![0.0; n + 1];
    den[n] = 1.0;
    let mut num = vec![0.0; n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = &sys.a * &m + &eye * den[n - k + 1];
        num[n - k] = (&sys.c * &m * &sys.b)[0];
        let am = &sys.a * &m;
        den[n - k] = -am.trace() / k as f64;
    }
    if num.iter().chain(den.iter()).any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned("non-finite polynomial coefficients".into()));
    }
    let lead = sys.markov(r - 1);
    let scale = num.iter().fold(lead.abs(), |acc, v| acc.max(v.abs()));
    for (j, v) in num.iter().enumerate().skip(n - r + 1) {
        if v.abs() > 1e-8 * scale {
            return Err(Error::IllConditioned(format!(
                "numerator coefficient of s^{j} = {v:e} should vanish for relative degree {r}"
            )));
        }
    }
    if (num[n - r] - lead).abs() > 1e-8 * scale {
        return Err(Error::IllConditioned(format!(
            "leading numerator coefficient {} disagrees with CA^(r-1)B = {lead}",
            num[n - r]
        )));
    }
    num.truncate(n - r + 1);
    num[n - r] = lead;
    Ok(TransferFunction { num, den, r })
}

/// True iff every eigenvalue has real part `< -tol`.
pub fn is_hurwitz(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(poly::spectral_abscissa(m)? < -tol)
}

/// True iff every numerator root has real part `< -tol`.
pub fn is_minimum_phase(tf: &TransferFunction, tol: f64) -> Result<bool> {
    Ok(tf.zeros()?.iter().all(|z| z.re < -tol))
}

/// Builds the normal form.
///
/// The output-derivative rows of `S` are `C, CA, ..., CA^(r-1)`. The hidden
/// rows are the first `n - r` coordinates of the controller canonical form,
/// reached through the controllability matrices of both realizations.
pub fn normal_form(sys: &StateSpace, tol: f64) -> Result<NormalForm> {
    let n = sys.order();
    let r = relative_degree(sys, tol)?;
    let tf = transfer_function(sys)?;
    let h = n - r;

    let mut s = DMatrix::zeros(n, n);
    for i in 0..r {
        s.set_row(i, &sys.output_row(i));
    }
    if h > 0 {
        let ccf = StateSpace::controller_canonical(&tf)?;
        let wc = controllability(sys);
        let wc_ccf = controllability(&ccf);
        let wc_inv = wc.try_inverse().ok_or_else(|| {
            Error::TransformConstruction("realization is not controllable".into())
        })?;
        let to_ccf = wc_ccf * wc_inv;
        for i in 0..h {
            s.set_row(r + i, &to_ccf.row(i));
        }
    }
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::TransformConstruction("S is singular".into()))?;
    if s_inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::TransformConstruction("S inverse is not finite".into()));
    }

    let at = &s * sys.a() * &s_inv;
    let bt = &s * sys.b();
    let scale = 1.0 + at.amax();
    let check = |v: f64, expected: f64, what: &str| -> Result<()> {
        if (v - expected).abs() > STRUCTURE_RTOL * scale.max(expected.abs()) {
            return Err(Error::NormalFormMismatch(format!("{what}: {v:e} vs expected {expected:e}")));
        }
        Ok(())
    };

    let b_lead = tf.lead();
    let a4 = poly::companion(&tf.num)?;
    let mut a3 = DVector::zeros(h);
    if h > 0 {
        a3[h - 1] = 1.0 / b_lead;
    }

    for i in 0..r - 1 {
        for j in 0..n {
            let expected = if j == i + 1 { 1.0 } else { 0.0 };
            check(at[(i, j)], expected, &format!("xi row {i} column {j}"))?;
        }
        check(bt[i], 0.0, &format!("B1 row {i}"))?;
    }
    check(bt[r - 1], b_lead, "B1 last row")?;
    for i in 0..h {
        check(bt[r + i], 0.0, &format!("eta input row {i}"))?;
        check(at[(r + i, 0)], a3[i], &format!("A3 row {i}"))?;
        for j in 1..r {
            check(at[(r + i, j)], 0.0, &format!("eta row {i} depends on xi{}", j + 1))?;
        }
        for j in 0..h {
            check(at[(r + i, r + j)], a4[(i, j)], &format!("A4 ({i},{j})"))?;
        }
    }

    let a_xi = RowDVector::from_iterator(r, at.row(r - 1).iter().take(r).copied());
    let a_eta = RowDVector::from_iterator(h, at.row(r - 1).iter().skip(r).copied());
    let mut a1 = DMatrix::zeros(r, r);
    for i in 0..r - 1 {
        a1[(i, i + 1)] = 1.0;
    }
    a1.set_row(r - 1, &a_xi);
    let mut a2 = DMatrix::zeros(r, h);
    a2.set_row(r - 1, &a_eta);
    let mut b1 = DVector::zeros(r);
    b1[r - 1] = b_lead;

    Ok(NormalForm { s, s_inv, a1, a2, b1, a3, a4, a_xi, a_eta, b_lead, r, num: tf.num })
}

fn controllability(sys: &StateSpace) -> DMatrix<f64> {
    let n = sys.order();
    let mut w = DMatrix::zeros(n, n);
    let mut col = sys.b.clone();
    for j in 0..n {
        w.set_column(j, &col);
        col = &sys.a * col;
    }
    w
}

/// Channel name of state component `i` (zero-based).
pub fn state_channel(i: usize) -> String {
    format!("x{}", i + 1)
}

/// Fixed-step RK4 simulation from `x0`, returning channels `u, x1..xn, y`.
pub fn simulate<S: Signal + ?Sized>(
    sys: &StateSpace,
    u: &S,
    x0: &DVector<f64>,
    dt: f64,
    duration: f64,
) -> Result<Trajectory> {
    simulate_from(sys, u, x0, 0.0, dt, duration)
}

/// As [`simulate`], starting at time `t0`.
pub fn simulate_from<S: Signal + ?Sized>(
    sys: &StateSpace,
    u: &S,
    x0: &DVector<f64>,
    t0: f64,
    dt: f64,
    duration: f64,
) -> Result<Trajectory> {
    let n = sys.order();
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has {} entries, system order is {n}", x0.len())));
    }
    if !(dt > 0.0) || !(duration >= dt) {
        return Err(Error::Domain(format!("need dt > 0 and duration >= dt (dt={dt}, duration={duration})")));
    }
    let steps = (duration / dt).round() as usize;
    let states = ode::integrate_linear(&sys.a, &sys.b, |t| u.value(t), x0, t0, dt, steps)
        .map_err(|t| Error::SimulationDiverged { t })?;
    let mut samples = DMatrix::zeros(steps + 1, n + 2);
    for (k, x) in states.iter().enumerate() {
        samples[(k, 0)] = u.value(t0 + k as f64 * dt);
        for i in 0..n {
            samples[(k, 1 + i)] = x[i];
        }
        samples[(k, n + 1)] = (&sys.c * x)[0];
    }
    let mut channels = vec!["u".to_string()];
    channels.extend((0..n).map(state_channel));
    channels.push("y".into());
    Trajectory::new(dt, t0, channels, samples)
}

/// Output of the exact zero-order-hold discretization under a unit step at
/// `t = 0`, sampled at `-pre*dt, ..., post*dt`, starting from rest.
pub fn step_response_samples(sys: &StateSpace, dt: f64, pre: usize, post: usize) -> Vec<f64> {
    let n = sys.order();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * dt));
    aug.view_mut((0, n), (n, 1)).copy_from(&(sys.b() * dt));
    let e = aug.exp();
    let phi = e.view((0, 0), (n, n)).into_owned();
    let gamma = DVector::from_iterator(n, e.column(n).iter().take(n).copied());
    let mut out = vec![0.0; pre + 1];
    let mut x = DVector::zeros(n);
    for _ in 0..post {
        x = &phi * x + &gamma;
        out.push((&sys.c * &x)[0]);
    }
    out
}

/// Relative degree from a step-response experiment: the smallest derivative
/// order whose finite-difference estimate jumps at the step by more than
/// `jump_ratio` times its largest one-sample change away from the step.
pub fn identify_relative_degree_from_step(sys: &StateSpace, dt: f64, jump_ratio: f64) -> Result<usize> {
    let n = sys.order();
    let pre = n + 8;
    let post = 2 * n + 24;
    let y = step_response_samples(sys, dt, pre, post);
    let zero = pre;
    for order in 1..=n {
        let diff = |m: usize| -> f64 { forward_difference(&y, m, order) / dt.powi(order as i32) };
        // Estimates that only touch samples on one side of the step.
        let before = diff(zero - order);
        let after = diff(zero);
        let jump = (after - before).abs();
        let mut variation = 0.0f64;
        for m in 0..zero - order {
            variation = variation.max((diff(m + 1) - diff(m)).abs());
        }
        for m in zero..zero + post - 2 * order - 1 {
            variation = variation.max((diff(m + 1) - diff(m)).abs());
        }
        let floor = f64::EPSILON * y.iter().fold(0.0f64, |a, v| a.max(v.abs())) / dt.powi(order as i32);
        if jump > jump_ratio * variation.max(floor) {
            return Ok(order);
        }
    }
    Err(Error::IdentificationInconclusive { max_order: n })
}

/// `k`-th forward difference of `y` at index `m`.
fn forward_difference(y: &[f64], m: usize, k: usize) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for i in 0..=k {
        let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * y[m + i];
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Physical parameters of the two-mass spring-damper example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoMassParams {
    pub m1: f64,
    pub m2: f64,
    pub k1: f64,
    pub c1: f64,
    pub k2: f64,
    pub c2: f64,
    /// Actuator gain on mass 2.
    pub gain: f64,
}

impl Default for TwoMassParams {
    fn default() -> Self {
        Self { m1: 10.0, m2: 5.0, k1: 110.0, c1: 68.0, k2: 75.0, c2: 60.0, gain: 55.0 }
    }
}

impl TwoMassParams {
    /// State `[x1, x1', x2, x2']`, force on mass 2, output `x2`.
    pub fn state_space(&self) -> StateSpace {
        let Self { m1, m2, k1, c1, k2, c2, gain } = *self;
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            -(k1 + k2) / m1, -(c1 + c2) / m1, k2 / m1, c2 / m1,
            0.0, 0.0, 0.0, 1.0,
            k2 / m2, c2 / m2, -k2 / m2, -c2 / m2,
        ]);
        let b = DVector::from_column_slice(&[0.0, 0.0, 0.0, gain / m2]);
        let c = RowDVector::from_row_slice(&[0.0, 0.0, 1.0, 0.0]);
        StateSpace::new(a, b, c).expect("example parameters are finite")
    }
}

/// The two-mass spring-damper example system with its nominal parameters.
pub fn build_example_system() -> StateSpace {
    TwoMassParams::default().state_space()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> StateSpace {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let mut c = RowDVector::zeros(n);
        c[0] = 1.0;
        StateSpace::new(a, b, c).unwrap()
    }

    fn first_order_lag() -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, -2.0),
            DVector::from_element(1, 1.0),
            RowDVector::from_element(1, 2.0),
        )
        .unwrap()
    }

    #[test]
    fn example_matrices() {
        let sys = build_example_system();
        assert_eq!(sys.b()[3], 11.0);
        let row4: Vec<f64> = sys.a().row(3).iter().copied().collect();
        assert_eq!(row4, vec![15.0, 12.0, -15.0, -12.0]);
        assert_eq!(sys.markov(0), 0.0);
        assert_eq!(sys.markov(1), 11.0);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let a = DMatrix::zeros(2, 2);
        assert!(StateSpace::new(a.clone(), DVector::zeros(3), RowDVector::zeros(2)).is_err());
        assert!(StateSpace::new(DMatrix::zeros(2, 3), DVector::zeros(2), RowDVector::zeros(2)).is_err());
        let mut bad = a;
        bad[(0, 0)] = f64::INFINITY;
        assert!(StateSpace::new(bad, DVector::zeros(2), RowDVector::zeros(2)).is_err());
    }

    #[test]
    fn relative_degrees() {
        assert_eq!(relative_degree(&build_example_system(), DEFAULT_TOL).unwrap(), 2);
        for n in 1..=6 {
            assert_eq!(relative_degree(&chain(n), DEFAULT_TOL).unwrap(), n);
        }
        let direct = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            DVector::from_column_slice(&[1.0, 10.0]),
            RowDVector::from_row_slice(&[1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(direct.markov(0), 11.0);
        assert_eq!(relative_degree(&direct, DEFAULT_TOL).unwrap(), 1);
        let dead = StateSpace::new(DMatrix::zeros(2, 2), DVector::zeros(2), RowDVector::zeros(2)).unwrap();
        assert!(matches!(relative_degree(&dead, DEFAULT_TOL), Err(Error::DegenerateSystem)));
    }

    #[test]
    fn example_transfer_function() {
        let tf = transfer_function(&build_example_system()).unwrap();
        assert_eq!(tf.r, 2);
        assert_eq!(tf.num.len(), 3);
        assert_eq!(tf.lead(), 11.0);
        // num = 11/10 (10 s^2 + 128 s + 185)
        assert!((tf.num[1] - 140.8).abs() < 1e-9);
        assert!((tf.num[0] - 203.5).abs() < 1e-9);
        let zeros = tf.zeros().unwrap();
        let disc = (128.0f64.powi(2) - 4.0 * 10.0 * 185.0).sqrt();
        assert!((zeros[0].re - (-128.0 - disc) / 20.0).abs() < 1e-9);
        assert!((zeros[1].re - (-128.0 + disc) / 20.0).abs() < 1e-9);
        assert!((zeros[0].re + 11.1392).abs() < 1e-4 && (zeros[1].re + 1.6608).abs() < 1e-4);
    }

    #[test]
    fn decoupled_modes_transfer_function() {
        let sys = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
            RowDVector::from_row_slice(&[1.0, 0.0]),
        )
        .unwrap();
        let tf = transfer_function(&sys).unwrap();
        assert_eq!(tf.den, vec![1.0, 2.0, 1.0]);
        // (s+1)/(s+1)^2 in unreduced form
        assert_eq!(tf.num, vec![1.0, 1.0]);
        assert_eq!(tf.r, 1);
    }

    #[test]
    fn hurwitz_and_minimum_phase() {
        let sys = build_example_system();
        assert!(is_hurwitz(sys.a(), DEFAULT_TOL).unwrap());
        assert!(!is_hurwitz(&DMatrix::zeros(3, 3), DEFAULT_TOL).unwrap());
        let tf = transfer_function(&sys).unwrap();
        assert!(is_minimum_phase(&tf, DEFAULT_TOL).unwrap());
        let rhp = TransferFunction::new(vec![-1.0, 1.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!(!is_minimum_phase(&rhp, DEFAULT_TOL).unwrap());
        let none = TransferFunction::new(vec![1.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!(is_minimum_phase(&none, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn example_normal_form() {
        let nf = normal_form(&build_example_system(), DEFAULT_TOL).unwrap();
        assert_eq!(nf.r, 2);
        assert_eq!(nf.b_lead, 11.0);
        assert!((nf.a_xi[1] + 12.0).abs() < 1e-9, "A_xi = {}", nf.a_xi);
        assert!(nf.is_minimum_phase(DEFAULT_TOL).unwrap());
        let ev = nf.zero_dynamics_spectrum().unwrap();
        assert!((ev[0].re + 11.1392).abs() < 1e-4 && (ev[1].re + 1.6608).abs() < 1e-4);
        // rows of S
        let sys = build_example_system();
        assert_eq!(nf.s.row(0), sys.c().rows(0, 1));
        assert_eq!(nf.s.row(1), sys.output_row(1).rows(0, 1));
    }

    #[test]
    fn full_relative_degree_has_no_hidden_states() {
        let nf = normal_form(&chain(3), DEFAULT_TOL).unwrap();
        assert_eq!(nf.r, 3);
        assert_eq!(nf.hidden_dim(), 0);
        assert_eq!(nf.a4.nrows(), 0);
        assert_eq!(nf.a_eta.len(), 0);
    }

    #[test]
    fn uncontrollable_realization_is_rejected() {
        let sys = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            DVector::from_column_slice(&[1.0, 0.0]),
            RowDVector::from_row_slice(&[1.0, 1.0]),
        )
        .unwrap();
        assert!(normal_form(&sys, DEFAULT_TOL).is_err());
    }

    #[test]
    fn rest_stays_at_rest() {
        let sys = build_example_system();
        let tr = simulate(&sys, &|_t: f64| 0.0, &DVector::zeros(4), 0.01, 1.0).unwrap();
        assert_eq!(tr.len(), 101);
        assert!(tr.channel("y").unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn step_settles_to_dc_gain() {
        let sys = build_example_system();
        let tf = transfer_function(&sys).unwrap();
        let tr = simulate(&sys, &|_t: f64| 1.0, &DVector::zeros(4), 0.01, 30.0).unwrap();
        let y = tr.channel("y").unwrap();
        assert!((y.last().unwrap() - tf.dc_gain()).abs() < 1e-9 * tf.dc_gain().abs().max(1.0));
    }

    #[test]
    fn step_identification() {
        assert_eq!(identify_relative_degree_from_step(&build_example_system(), 1e-3, 5.0).unwrap(), 2);
        assert_eq!(identify_relative_degree_from_step(&first_order_lag(), 1e-3, 5.0).unwrap(), 1);
        assert_eq!(identify_relative_degree_from_step(&chain(3), 1e-3, 5.0).unwrap(), 3);
    }

    #[test]
    fn forward_difference_of_cubic() {
        let y: Vec<f64> = (0..8).map(|i| (i as f64).powi(3)).collect();
        assert_eq!(forward_difference(&y, 2, 3), 6.0);
        assert_eq!(forward_difference(&y, 0, 4), 0.0);
    }

    #[test]
    fn state_space_file_round_trip() {
        let sys = build_example_system();
        let file = StateSpaceFile::from(&sys);
        assert_eq!(file.build().unwrap(), sys);
        let ragged = StateSpaceFile { a: vec![vec![1.0, 0.0], vec![1.0]], b: vec![1.0, 0.0], c: vec![0.0, 1.0] };
        assert!(matches!(ragged.build(), Err(Error::Dimension(_))));
    }
}
