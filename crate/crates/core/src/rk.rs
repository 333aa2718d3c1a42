//! Adaptive Dormand-Prince 5(4) for second-order scalar ODEs
//! `v'' = f(t, v, v')`, with dense output.
//!
//! Accepted steps store `(t, v, v', v'')`; evaluation between nodes uses the
//! two-point Taylor (quintic Hermite) interpolant, which matches value,
//! first and second derivative at both ends. That keeps the interpolated
//! ODE residual at `O(h^4)`, small enough for the residual diagnostics the
//! solvers report.

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step limit {limit} exceeded at t = {t}")]
    StepLimit { t: f64, limit: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn with_tolerance(tol: f64, max_step: f64) -> Self {
        Self { rtol: tol, atol: tol, max_step, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub t: f64,
    pub v: f64,
    pub vp: f64,
    pub vpp: f64,
}

/// Dense solution of a second-order scalar ODE on `[start, end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    nodes: Vec<Node>,
}

impl Trajectory {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn start(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].t
    }

    pub fn last(&self) -> Node {
        self.nodes[self.nodes.len() - 1]
    }

    fn interval_of(&self, t: f64) -> usize {
        // rightmost node with nodes[i].t <= t, clamped to a valid interval
        match self.nodes.binary_search_by(|n| n.t.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.nodes.len() - 2),
        }
    }

    /// Interpolated `(v, v')` at `t` (clamped to the covered range).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (v, vp, _) = self.eval_full(t);
        (v, vp)
    }

    /// Interpolated `(v, v', v'')` at `t`.
    pub fn eval_full(&self, t: f64) -> (f64, f64, f64) {
        let t = t.clamp(self.start(), self.end());
        let i = self.interval_of(t);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = b.t - a.t;
        if h == 0.0 {
            return (a.v, a.vp, a.vpp);
        }
        let tau = (t - a.t) / h;
        let c0 = a.v;
        let c1 = h * a.vp;
        let c2 = 0.5 * h * h * a.vpp;
        let aa = b.v - (c0 + c1 + c2);
        let bb = h * b.vp - (c1 + 2.0 * c2);
        let cc = h * h * b.vpp - 2.0 * c2;
        let c3 = 10.0 * aa - 4.0 * bb + 0.5 * cc;
        let c4 = -15.0 * aa + 7.0 * bb - cc;
        let c5 = 6.0 * aa - 3.0 * bb + 0.5 * cc;
        let v = c0 + tau * (c1 + tau * (c2 + tau * (c3 + tau * (c4 + tau * c5))));
        let vp = (c1 + tau * (2.0 * c2 + tau * (3.0 * c3 + tau * (4.0 * c4 + tau * 5.0 * c5)))) / h;
        let vpp = (2.0 * c2 + tau * (6.0 * c3 + tau * (12.0 * c4 + tau * 20.0 * c5))) / (h * h);
        (v, vp, vpp)
    }

    /// Maximum of `|v''_interp - f(t, v_interp, v'_interp)|` over interval
    /// midpoints: the ODE residual of the dense interpolant.
    pub fn ode_residual_max(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let mut worst = 0.0f64;
        for w in self.nodes.windows(2) {
            let tm = 0.5 * (w[0].t + w[1].t);
            let (v, vp, vpp) = self.eval_full(tm);
            worst = worst.max((vpp - f(tm, v, vp)).abs());
        }
        worst
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `v'' = f(t, v, v')` from `(t0, v0, vp0)` to `t_end`.
/// `stop` may end the integration early after an accepted step.
pub fn integrate_second_order(
    f: impl Fn(f64, f64, f64) -> f64,
    t0: f64,
    v0: f64,
    vp0: f64,
    t_end: f64,
    opts: &IntegratorOptions,
    mut stop: Option<&mut dyn FnMut(&Node) -> bool>,
) -> Result<Trajectory, OdeError> {
    assert!(t_end > t0);
    let rhs = |t: f64, y: [f64; 2]| [y[1], f(t, y[0], y[1])];
    let mut t = t0;
    let mut y = [v0, vp0];
    let mut dy = rhs(t, y);
    let mut nodes = vec![Node { t, v: y[0], vp: y[1], vpp: dy[1] }];
    let mut h = opts.max_step.min(t_end - t0);
    let mut steps = 0usize;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(OdeError::StepLimit { t, limit: opts.max_steps });
        }
        steps += 1;
        h = h.min(t_end - t).min(opts.max_step);
        if h <= f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }
        let mut k = [[0.0f64; 2]; 7];
        k[0] = dy;
        for stage in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(stage) {
                let a = if stage < 6 { A[stage - 1][j] } else { B5[j] };
                ys[0] += h * a * kj[0];
                ys[1] += h * a * kj[1];
            }
            k[stage] = rhs(t + C[stage] * h, ys);
        }
        let mut y5 = y;
        let mut y4 = y;
        for (j, kj) in k.iter().enumerate() {
            y5[0] += h * B5[j] * kj[0];
            y5[1] += h * B5[j] * kj[1];
            y4[0] += h * B4[j] * kj[0];
            y4[1] += h * B4[j] * kj[1];
        }
        if !(y5[0].is_finite() && y5[1].is_finite()) {
            return Err(OdeError::NonFinite { t });
        }
        let mut err = 0.0f64;
        for i in 0..2 {
            let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((y5[i] - y4[i]).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            dy = rhs(t, y);
            let node = Node { t, v: y[0], vp: y[1], vpp: dy[1] };
            nodes.push(node);
            if let Some(pred) = stop.as_deref_mut() {
                if pred(&node) {
                    break;
                }
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(Trajectory { nodes })
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RootError {
    #[error("root not bracketed: f({a}) = {fa}, f({b}) = {fb}")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root refinement exceeded {0} iterations")]
    IterationLimit(usize),
}

/// Brent's method on `[a, b]` with a sign change.
pub fn brent_root(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64, RootError> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = b - a;
    for _ in 0..max_iter {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if fb == 0.0 {
            return Ok(b);
        }
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(RootError::IterationLimit(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_accuracy() {
        // v'' = -v, v(0)=1, v'(0)=0 -> cos(t)
        let opts = IntegratorOptions::with_tolerance(1e-12, 0.1);
        let traj =
            integrate_second_order(|_, v, _| -v, 0.0, 1.0, 0.0, 10.0, &opts, None).unwrap();
        let (v, vp) = traj.eval(10.0);
        assert_relative_eq!(v, 10.0f64.cos(), epsilon = 1e-10);
        assert_relative_eq!(vp, -10.0f64.sin(), epsilon = 1e-10);
        // dense output is accurate between nodes
        for &t in &[0.05, 1.234, 3.14159, 7.7, 9.99] {
            let (v, vp) = traj.eval(t);
            assert_relative_eq!(v, t.cos(), epsilon = 1e-9);
            assert_relative_eq!(vp, -t.sin(), epsilon = 1e-9);
        }
        let res = traj.ode_residual_max(|_, v, _| -v);
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn quintic_interpolant_is_exact_on_quintics() {
        // v(t) = t^5 satisfies v'' = 20 t^3; interpolation must be exact
        let nodes = vec![
            Node { t: 1.0, v: 1.0, vp: 5.0, vpp: 20.0 },
            Node { t: 2.0, v: 32.0, vp: 80.0, vpp: 160.0 },
        ];
        let traj = Trajectory { nodes };
        for &t in &[1.0, 1.25, 1.5, 1.9, 2.0] {
            let (v, vp, vpp) = traj.eval_full(t);
            assert_relative_eq!(v, t.powi(5), max_relative = 1e-13);
            assert_relative_eq!(vp, 5.0 * t.powi(4), max_relative = 1e-13);
            assert_relative_eq!(vpp, 20.0 * t.powi(3), max_relative = 1e-12);
        }
    }

    #[test]
    fn stop_predicate_halts_early() {
        let opts = IntegratorOptions::with_tolerance(1e-10, 0.05);
        let mut hit = |n: &Node| n.v > 2.0;
        let traj = integrate_second_order(
            |_, v, _| v,
            0.0,
            1.0,
            1.0,
            10.0,
            &opts,
            Some(&mut hit),
        )
        .unwrap();
        assert!(traj.end() < 1.0); // e^t reaches 2 at t = ln 2
        assert!(traj.last().v > 2.0);
    }

    #[test]
    fn brent_finds_cosine_root() {
        let r = brent_root(|x: f64| x.cos(), 1.0, 2.0, 1e-15, 80).unwrap();
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, epsilon = 1e-14);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        assert!(matches!(
            brent_root(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12, 80),
            Err(RootError::NotBracketed { .. })
        ));
    }
}
