//! Pairwise decomposition for box-constrained QPs with one equality.
//!
//! Solves
//!
//! ```text
//! min_z  1/2 z'Qz + p'z   s.t.  s'z = 0,  0 <= z_t <= C_t
//! ```
//!
//! where `Q_ts = s_t s_u K(x_idx(t), x_idx(u))`. Several variables may share
//! one sample (the two multipliers of an epsilon-insensitive fit), so the
//! kernel is addressed through `index`. Each step picks the maximal violating
//! variable, pairs it by second-order gain and minimises the two-variable
//! subproblem in closed form.

use nalgebra::DMatrix;

const TAU: f64 = 1e-12;

/// Problem data. `kernel` is indexed by sample, variables by `index`.
#[derive(Clone, Debug)]
pub struct BoxQp<'a> {
    pub kernel: &'a DMatrix<f64>,
    pub index: Vec<usize>,
    pub sign: Vec<f64>,
    pub linear: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxQp<'_> {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    #[inline]
    fn k(&self, t: usize, u: usize) -> f64 {
        self.kernel[(self.index[t], self.index[u])]
    }
}

/// Outcome of one decomposition step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    /// The maximal KKT violation is below the tolerance.
    Converged { violation: f64 },
    /// Variables `i` and `j` were updated.
    Updated { i: usize, j: usize, violation: f64 },
}

#[derive(Clone, Debug)]
pub struct PairwiseSolver<'a> {
    qp: BoxQp<'a>,
    z: Vec<f64>,
    grad: Vec<f64>,
    /// scratch, one entry per sample
    delta_f: Vec<f64>,
    iterations: usize,
}

impl<'a> PairwiseSolver<'a> {
    /// Starts from `z = 0`, which is always feasible.
    pub fn new(qp: BoxQp<'a>) -> Self {
        let n = qp.len();
        debug_assert!(qp.sign.len() == n && qp.linear.len() == n && qp.upper.len() == n);
        let grad = qp.linear.clone();
        let samples = qp.kernel.nrows();
        PairwiseSolver {
            qp,
            z: vec![0.0; n],
            grad,
            delta_f: vec![0.0; samples],
            iterations: 0,
        }
    }

    pub fn solution(&self) -> &[f64] {
        &self.z
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn problem(&self) -> &BoxQp<'a> {
        &self.qp
    }

    /// `1/2 z'Qz + p'z` at the current iterate.
    pub fn objective(&self) -> f64 {
        self.z
            .iter()
            .zip(self.grad.iter().zip(&self.qp.linear))
            .map(|(z, (g, p))| z * (g + p))
            .sum::<f64>()
            * 0.5
    }

    #[inline]
    fn in_up(&self, t: usize) -> bool {
        if self.qp.sign[t] > 0.0 {
            self.z[t] < self.qp.upper[t]
        } else {
            self.z[t] > 0.0
        }
    }

    #[inline]
    fn in_low(&self, t: usize) -> bool {
        if self.qp.sign[t] > 0.0 {
            self.z[t] > 0.0
        } else {
            self.z[t] < self.qp.upper[t]
        }
    }

    /// Maximal violating variable and its second-order partner, plus the
    /// current maximal violation.
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let n = self.z.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if self.in_up(t) {
                let v = -self.qp.sign[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin_side = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        let kii = i_sel.map(|i| self.qp.k(i, i));
        for t in 0..n {
            if !self.in_low(t) {
                continue;
            }
            let v = self.qp.sign[t] * self.grad[t];
            if v >= gmin_side {
                gmin_side = v;
            }
            if let (Some(i), Some(kii)) = (i_sel, kii) {
                let diff = gmax + v;
                if diff > 0.0 {
                    let mut quad = kii + self.qp.k(t, t) - 2.0 * self.qp.k(i, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let gain = -diff * diff / quad;
                    if gain <= best {
                        best = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let violation = gmax + gmin_side;
        match (i_sel, j_sel) {
            (Some(i), Some(j)) => (Some((i, j)), violation),
            _ => (None, violation),
        }
    }

    /// Maximal KKT violation `max_up(-s G) + max_low(s G)`.
    pub fn violation(&self) -> f64 {
        self.select().1
    }

    /// Performs one pair update unless the violation is below `tol`.
    pub fn step(&mut self, tol: f64) -> Step {
        let (pair, violation) = self.select();
        let Some((i, j)) = pair.filter(|_| violation >= tol) else {
            return Step::Converged {
                violation: violation.max(0.0),
            };
        };
        self.update_pair(i, j);
        self.iterations += 1;
        #[cfg(debug_assertions)]
        self.debug_check_feasible();
        Step::Updated { i, j, violation }
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let qp = &self.qp;
        let (ci, cj) = (qp.upper[i], qp.upper[j]);
        let (si, sj) = (qp.sign[i], qp.sign[j]);
        let (old_i, old_j) = (self.z[i], self.z[j]);
        let mut quad = qp.k(i, i) + qp.k(j, j) - 2.0 * qp.k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        let (gi, gj) = (self.grad[i], self.grad[j]);
        let (mut zi, mut zj) = (old_i, old_j);
        if si != sj {
            let delta = (-gi - gj) / quad;
            let diff = zi - zj;
            zi += delta;
            zj += delta;
            if diff > 0.0 {
                if zj < 0.0 {
                    zj = 0.0;
                    zi = diff;
                }
            } else if zi < 0.0 {
                zi = 0.0;
                zj = -diff;
            }
            if diff > ci - cj {
                if zi > ci {
                    zi = ci;
                    zj = ci - diff;
                }
            } else if zj > cj {
                zj = cj;
                zi = cj + diff;
            }
        } else {
            let delta = (gi - gj) / quad;
            let sum = zi + zj;
            zi -= delta;
            zj += delta;
            if sum > ci {
                if zi > ci {
                    zi = ci;
                    zj = sum - ci;
                }
            } else if zj < 0.0 {
                zj = 0.0;
                zi = sum;
            }
            if sum > cj {
                if zj > cj {
                    zj = cj;
                    zi = sum - cj;
                }
            } else if zi < 0.0 {
                zi = 0.0;
                zj = sum;
            }
        }
        self.z[i] = zi;
        self.z[j] = zj;
        let di = si * (zi - old_i);
        let dj = sj * (zj - old_j);
        let col_i = qp.kernel.column(qp.index[i]);
        let col_j = qp.kernel.column(qp.index[j]);
        for (s, df) in self.delta_f.iter_mut().enumerate() {
            *df = col_i[s] * di + col_j[s] * dj;
        }
        for t in 0..self.grad.len() {
            self.grad[t] += self.qp.sign[t] * self.delta_f[self.qp.index[t]];
        }
    }

    #[cfg(debug_assertions)]
    fn debug_check_feasible(&self) {
        let scale: f64 = 1.0 + self.qp.upper.iter().map(|c| c.abs()).sum::<f64>();
        let eq: f64 = self.z.iter().zip(&self.qp.sign).map(|(z, s)| z * s).sum();
        debug_assert!(eq.abs() <= 1e-9 * scale, "equality drift {eq}");
        for (z, c) in self.z.iter().zip(&self.qp.upper) {
            debug_assert!(*z >= 0.0 && *z <= *c, "box violated: {z} not in [0, {c}]");
        }
    }

    /// Iterates until the violation drops below `tol` or `max_iter` updates
    /// have been made. Returns whether it converged.
    pub fn solve(&mut self, tol: f64, max_iter: usize) -> bool {
        while self.iterations < max_iter {
            if let Step::Converged { .. } = self.step(tol) {
                return true;
            }
        }
        self.violation() < tol
    }

    /// Offset `b` of `f = Σ_t s_t z_t K(x_t, ·) + b`: the mean of `-s_t G_t`
    /// over free variables, or the midpoint of the interval allowed by the
    /// bound variables when none are free.
    pub fn bias(&self) -> f64 {
        let mut free_sum = 0.0;
        let mut free_n = 0usize;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for t in 0..self.z.len() {
            let s = self.qp.sign[t];
            let r = -s * self.grad[t];
            let at_zero = self.z[t] <= 0.0;
            let at_cap = self.z[t] >= self.qp.upper[t];
            if !at_zero && !at_cap {
                free_sum += r;
                free_n += 1;
            } else if (s > 0.0 && at_zero) || (s < 0.0 && at_cap) {
                lower = lower.max(r);
            } else {
                upper = upper.min(r);
            }
        }
        if free_n > 0 {
            free_sum / free_n as f64
        } else if lower.is_finite() && upper.is_finite() {
            0.5 * (lower + upper)
        } else if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            0.0
        }
    }
}
