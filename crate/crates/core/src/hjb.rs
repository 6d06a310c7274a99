//! Verification machinery around the dynamic-programming equation: the
//! Hamiltonian and its maximizer, a pointwise residual checker for candidate
//! value surfaces, and a 4th-order backward integrator for the Riccati system
//! that serves as an independent oracle against the closed form.

use crate::closed_form;
use crate::params::Params;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HjbError {
    #[error("degenerate grid: {0}")]
    GridError(String),
    #[error("riccati integration blew up at t={t}: |{coeff}| = {value:.3e} exceeds bound {bound:.3e}")]
    BlowUp { t: f64, coeff: &'static str, value: f64, bound: f64 },
}

/// Arguments of the reduced one-dimensional Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianInput {
    /// Position x.
    pub x: f64,
    /// First derivative of the candidate value function (q).
    pub grad: f64,
    /// Second derivative of the candidate value function (Q).
    pub hess: f64,
    /// Candidate trading rate v.
    pub v: f64,
}

/// Reduced current-value Hamiltonian at (x, q, Q; v):
/// m^2 Q / 2 - v q - g(x, m q, 0, v), a concave quadratic in v.
pub fn hamiltonian(p: &Params, input: &HamiltonianInput) -> f64 {
    let HamiltonianInput { x, grad: q, hess, v } = *input;
    let m2 = p.m() * p.m();
    let driver = p.eta_l1() * v * v
        + 0.5 * p.lambda2() * m2 * q * q
        + (p.gamma() * x - 2.0 * p.lambda1() * p.v_bar()) * v
        - (p.gamma() * m2 - p.lambda1() * p.v_bar() * p.v_bar());
    0.5 * m2 * hess - v * q - driver
}

/// Unique maximizer of the Hamiltonian in v; independent of the curvature.
pub fn hamiltonian_maximizer(p: &Params, x: f64, q: f64) -> f64 {
    -(q + p.gamma() * x - 2.0 * p.lambda1() * p.v_bar()) / (2.0 * p.eta_l1())
}

/// A candidate value surface supplying w and its derivatives.
pub trait CandidateSurface {
    fn value(&self, t: f64, x: f64) -> f64;
    fn dt(&self, t: f64, x: f64) -> f64;
    fn dx(&self, t: f64, x: f64) -> f64;
    fn dxx(&self, t: f64, x: f64) -> f64;
}

/// The closed-form quadratic surface with analytic derivatives.
///
/// The time derivative differentiates the quadratic ansatz, with the
/// coefficient derivatives taken from the Riccati right-hand sides evaluated
/// at the closed-form coefficients; the independent check that the closed
/// form actually solves those ODEs is [`integrate_riccati`].
#[derive(Debug, Clone)]
pub struct ClosedFormSurface<'a> {
    p: &'a Params,
}

impl<'a> ClosedFormSurface<'a> {
    pub fn new(p: &'a Params) -> Self {
        ClosedFormSurface { p }
    }
}

/// Riccati right-hand sides (da/dt, db/dt, dc/dt) at coefficients (a, b, c).
pub fn riccati_rhs(p: &Params, a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let _ = c; // autonomous in c
    let el = p.eta_l1();
    let m2l2 = p.m() * p.m() * p.lambda2();
    let g = p.gamma();
    let k = m2l2 - 1.0 / (2.0 * el);
    let da = k * a * a - 2.0 * m2l2 * g * a + m2l2 * g * g;
    let db = k * a * b - m2l2 * g * b + p.lambda1() * p.v_bar() / el * a;
    let dc = 0.5 * k * b * b + p.lambda1() * p.v_bar() / el * b - 0.5 * p.m() * p.m() * a
        - 0.5 * p.m() * p.m() * g
        + p.lambda1() * p.v_bar() * p.v_bar()
        - p.lambda1() * p.lambda1() * p.v_bar() * p.v_bar() / el;
    (da, db, dc)
}

impl CandidateSurface for ClosedFormSurface<'_> {
    fn value(&self, t: f64, x: f64) -> f64 {
        let k = closed_form::coefficients_unchecked(self.p, t);
        0.5 * k.a_minus_gamma * x * x + k.b * x + k.c
    }

    fn dt(&self, t: f64, x: f64) -> f64 {
        let k = closed_form::coefficients_unchecked(self.p, t);
        let (da, db, dc) = riccati_rhs(self.p, k.a, k.b, k.c);
        0.5 * da * x * x + db * x + dc
    }

    fn dx(&self, t: f64, x: f64) -> f64 {
        let k = closed_form::coefficients_unchecked(self.p, t);
        k.a_minus_gamma * x + k.b
    }

    fn dxx(&self, t: f64, _x: f64) -> f64 {
        closed_form::coefficients_unchecked(self.p, t).a_minus_gamma
    }
}

/// Additive perturbation w + amp * x^2, derivatives adjusted accordingly.
pub struct PerturbedSurface<S> {
    pub inner: S,
    pub amplitude: f64,
}

impl<S: CandidateSurface> CandidateSurface for PerturbedSurface<S> {
    fn value(&self, t: f64, x: f64) -> f64 {
        self.inner.value(t, x) + self.amplitude * x * x
    }

    fn dt(&self, t: f64, x: f64) -> f64 {
        self.inner.dt(t, x)
    }

    fn dx(&self, t: f64, x: f64) -> f64 {
        self.inner.dx(t, x) + 2.0 * self.amplitude * x
    }

    fn dxx(&self, t: f64, x: f64) -> f64 {
        self.inner.dxx(t, x) + 2.0 * self.amplitude
    }
}

/// Values of an arbitrary surface sampled on a uniform grid; derivatives by
/// 4th-order centered differences, one-sided 4th-order stencils at the edges.
pub struct GridSurface {
    grid: Grid,
    /// Row-major values, w[it * nx + ix].
    values: Vec<f64>,
}

impl GridSurface {
    /// Sample `f(t, x)` on `grid`. The grid must be at least 6x6 so the
    /// one-sided 4th-order boundary stencils fit.
    pub fn sample(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> GridSurface {
        assert!(grid.nt >= 6 && grid.nx >= 6, "grid too coarse for 4th-order stencils");
        let mut values = Vec::with_capacity(grid.nt * grid.nx);
        for it in 0..grid.nt {
            let t = grid.t(it);
            for ix in 0..grid.nx {
                values.push(f(t, grid.x(ix)));
            }
        }
        GridSurface { grid: grid.clone(), values }
    }

    fn w(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.grid.nx + ix]
    }

    fn index_of(&self, t: f64, x: f64) -> (usize, usize) {
        let it = ((t - self.grid.t_min) / self.grid.dt()).round() as usize;
        let ix = ((x - self.grid.x_min) / self.grid.dx()).round() as usize;
        (it.min(self.grid.nt - 1), ix.min(self.grid.nx - 1))
    }

    /// 4th-order first derivative along one axis with boundary stencils.
    fn d1(&self, it: usize, ix: usize, axis_t: bool, h: f64) -> f64 {
        let n = if axis_t { self.grid.nt } else { self.grid.nx };
        let at = |j: usize| if axis_t { self.w(j, ix) } else { self.w(it, j) };
        let i = if axis_t { it } else { ix };
        let val = if i >= 2 && i + 2 < n {
            (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / 12.0
        } else if i + 4 < n && i < 2 {
            // forward one-sided, order 4
            (-25.0 * at(i) + 48.0 * at(i + 1) - 36.0 * at(i + 2) + 16.0 * at(i + 3) - 3.0 * at(i + 4)) / 12.0
        } else {
            // backward one-sided, order 4
            (25.0 * at(i) - 48.0 * at(i - 1) + 36.0 * at(i - 2) - 16.0 * at(i - 3) + 3.0 * at(i - 4)) / 12.0
        };
        val / h
    }

    /// 4th-order second derivative in x with boundary stencils.
    fn d2x(&self, it: usize, ix: usize) -> f64 {
        let n = self.grid.nx;
        let at = |j: usize| self.w(it, j);
        let h2 = self.grid.dx() * self.grid.dx();
        let val = if ix >= 2 && ix + 2 < n {
            (-at(ix - 2) + 16.0 * at(ix - 1) - 30.0 * at(ix) + 16.0 * at(ix + 1) - at(ix + 2)) / 12.0
        } else if ix < 2 {
            (45.0 * at(ix) - 154.0 * at(ix + 1) + 214.0 * at(ix + 2) - 156.0 * at(ix + 3)
                + 61.0 * at(ix + 4)
                - 10.0 * at(ix + 5))
                / 12.0
        } else {
            (45.0 * at(ix) - 154.0 * at(ix - 1) + 214.0 * at(ix - 2) - 156.0 * at(ix - 3)
                + 61.0 * at(ix - 4)
                - 10.0 * at(ix - 5))
                / 12.0
        };
        val / h2
    }
}

impl CandidateSurface for GridSurface {
    fn value(&self, t: f64, x: f64) -> f64 {
        let (it, ix) = self.index_of(t, x);
        self.w(it, ix)
    }

    fn dt(&self, t: f64, x: f64) -> f64 {
        let (it, ix) = self.index_of(t, x);
        self.d1(it, ix, true, self.grid.dt())
    }

    fn dx(&self, t: f64, x: f64) -> f64 {
        let (it, ix) = self.index_of(t, x);
        self.d1(it, ix, false, self.grid.dx())
    }

    fn dxx(&self, t: f64, x: f64) -> f64 {
        let (it, ix) = self.index_of(t, x);
        self.d2x(it, ix)
    }
}

/// Uniform evaluation grid over [t_min, t_max] x [x_min, x_max].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub nt: usize,
    pub nx: usize,
}

impl Grid {
    pub fn validate(&self) -> Result<(), HjbError> {
        if self.nt < 2 || self.nx < 2 {
            return Err(HjbError::GridError(format!("need nt, nx >= 2 (got {} x {})", self.nt, self.nx)));
        }
        if !(self.t_max > self.t_min) || !(self.x_max > self.x_min) {
            return Err(HjbError::GridError("empty ranges".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.nt - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn t(&self, it: usize) -> f64 {
        self.t_min + it as f64 * self.dt()
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }
}

/// Pointwise residual report for a candidate surface.
#[derive(Debug, Clone, PartialEq)]
pub struct HjbResidualReport {
    pub grid: Grid,
    pub max_abs_residual: f64,
    /// Max over the grid of |residual| / max(|individual terms|); the terms
    /// cancel by construction, so normalizing by the sum would divide by ~0.
    pub max_rel_residual: f64,
    pub worst_t: f64,
    pub worst_x: f64,
}

/// Evaluate w_t + m^2/2 w_xx - lambda2 m^2/2 w_x^2 + gamma m^2 - lambda1 v_bar^2
/// + (w_x + gamma x - 2 lambda1 v_bar)^2 / (4(eta+lambda1)) pointwise.
pub fn hjb_residual<S: CandidateSurface>(p: &Params, surface: &S, grid: &Grid) -> Result<HjbResidualReport, HjbError> {
    grid.validate()?;
    let m2 = p.m() * p.m();
    let mut report = HjbResidualReport {
        grid: grid.clone(),
        max_abs_residual: 0.0,
        max_rel_residual: 0.0,
        worst_t: grid.t_min,
        worst_x: grid.x_min,
    };
    for it in 0..grid.nt {
        let t = grid.t(it);
        for ix in 0..grid.nx {
            let x = grid.x(ix);
            let wt = surface.dt(t, x);
            let wx = surface.dx(t, x);
            let wxx = surface.dxx(t, x);
            let terms = [
                wt,
                0.5 * m2 * wxx,
                -0.5 * p.lambda2() * m2 * wx * wx,
                p.gamma() * m2 - p.lambda1() * p.v_bar() * p.v_bar(),
                {
                    let s = wx + p.gamma() * x - 2.0 * p.lambda1() * p.v_bar();
                    s * s / (4.0 * p.eta_l1())
                },
            ];
            let residual: f64 = terms.iter().sum();
            let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE);
            let rel = residual.abs() / scale;
            if residual.abs() > report.max_abs_residual {
                report.max_abs_residual = residual.abs();
            }
            if rel > report.max_rel_residual {
                report.max_rel_residual = rel;
                report.worst_t = t;
                report.worst_x = x;
            }
        }
    }
    Ok(report)
}

/// Sampled backward solution of the Riccati system on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// Ascending times, t[0] = 0, t[steps] = T.
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Magnitude bound signalling a blow-up (inadmissible parameters).
const RICCATI_BOUND: f64 = 1e30;

/// Classical RK4 integration of the Riccati system backward from t = T
/// (terminal values -2 beta + gamma, 0, 0), run as an initial-value problem
/// in tau = T - t. Samples on a uniform grid of `steps` intervals.
pub fn integrate_riccati(p: &Params, steps: usize) -> Result<RiccatiSolution, HjbError> {
    if steps < 10 {
        return Err(HjbError::GridError(format!("need at least 10 steps (got {steps})")));
    }
    let h = p.horizon() / steps as f64;
    // d/dtau = -d/dt
    let f = |y: [f64; 3]| {
        let (da, db, dc) = riccati_rhs(p, y[0], y[1], y[2]);
        [-da, -db, -dc]
    };
    let mut y = [-2.0 * p.beta() + p.gamma(), 0.0, 0.0];
    let mut a = vec![0.0; steps + 1];
    let mut b = vec![0.0; steps + 1];
    let mut c = vec![0.0; steps + 1];
    let mut times = vec![0.0; steps + 1];
    // index by t ascending: tau = k*h corresponds to t = T - k*h, slot steps - k
    a[steps] = y[0];
    b[steps] = y[1];
    c[steps] = y[2];
    times[steps] = p.horizon();
    for k in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1], y[2] + 0.5 * h * k1[2]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1], y[2] + 0.5 * h * k2[2]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2]]);
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = p.horizon() - (k + 1) as f64 * h;
        for (name, v) in [("a", y[0]), ("b", y[1]), ("c", y[2])] {
            if !v.is_finite() || v.abs() > RICCATI_BOUND {
                return Err(HjbError::BlowUp { t, coeff: name, value: v, bound: RICCATI_BOUND });
            }
        }
        let slot = steps - (k + 1);
        a[slot] = y[0];
        b[slot] = y[1];
        c[slot] = y[2];
        times[slot] = if slot == 0 { 0.0 } else { t };
    }
    Ok(RiccatiSolution { times, a, b, c })
}
