//! The global random variable `xi`, the gradient estimator of the momentum
//! field and the single-shot estimation-error models.
//!
//! Every error model in scope has the shape
//! `eps(q; xi) = g(xi) * d_q ln rho(q) * (1 + lambda * rho(q))`
//! where `g(xi)` is `xi / 2` for the standard error, an odd `gamma(xi)` for
//! the general family, and `lambda = 0` outside the modified model.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::grid::{derivative, first_derivative_line, partial_derivative, Axis, Field1D, Field2D};
use crate::preparation::{BipartitePreparation, Preparation};

/// Shape of the law of `xi`. All shapes have mean zero and variance `hbar^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum XiKind {
    /// `xi = +hbar` or `-hbar` with probability 1/2 each.
    TwoPoint,
    /// `xi ~ N(0, hbar^2)`.
    Gaussian,
    /// `xi ~ U[-sqrt(3) hbar, sqrt(3) hbar]`.
    Uniform,
}

impl XiKind {
    pub fn name(self) -> &'static str {
        match self {
            XiKind::TwoPoint => "two_point",
            XiKind::Gaussian => "gaussian",
            XiKind::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiDistribution {
    pub kind: XiKind,
    pub hbar: f64,
}

// Four-point Gauss rules, exact through degree 7.
const HERMITE4: [(f64, f64); 2] = [
    // (node^2, weight) for the standard normal: nodes^2 = 3 -+ sqrt(6).
    (0.550_510_257_216_821_9, 0.454_124_145_231_930_9),
    (5.449_489_742_783_178, 0.045_875_854_768_068_49),
];
const LEGENDRE4: [(f64, f64); 2] = [
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

impl XiDistribution {
    pub fn new(kind: XiKind, hbar: f64) -> Self {
        Self { kind, hbar }
    }

    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        self.hbar * self.hbar
    }

    /// Raw moment `E[xi^k]`.
    pub fn moment(&self, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let h = self.hbar.powi(k as i32);
        match self.kind {
            XiKind::TwoPoint => h,
            // (k - 1)!!
            XiKind::Gaussian => (1..k).step_by(2).map(f64::from).product::<f64>() * h,
            XiKind::Uniform => 3f64.sqrt().powi(k as i32) * h / f64::from(k + 1),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            XiKind::TwoPoint => {
                if rng.random_bool(0.5) {
                    self.hbar
                } else {
                    -self.hbar
                }
            }
            XiKind::Gaussian => Normal::new(0.0, self.hbar)
                .expect("hbar is positive")
                .sample(rng),
            XiKind::Uniform => {
                let a = 3f64.sqrt() * self.hbar;
                Uniform::new_inclusive(-a, a)
                    .expect("bounds are ordered")
                    .sample(rng)
            }
        }
    }

    /// Nodes and weights integrating polynomials in `xi` of degree <= 7 exactly
    /// against this law (the two-point law is reproduced exactly).
    pub fn quadrature(&self) -> Vec<(f64, f64)> {
        let h = self.hbar;
        match self.kind {
            XiKind::TwoPoint => vec![(-h, 0.5), (h, 0.5)],
            XiKind::Gaussian => {
                let mut rule = Vec::with_capacity(4);
                for &(x2, w) in HERMITE4.iter().rev() {
                    rule.push((-x2.sqrt() * h, w));
                }
                for &(x2, w) in &HERMITE4 {
                    rule.push((x2.sqrt() * h, w));
                }
                rule
            }
            XiKind::Uniform => {
                let a = 3f64.sqrt() * h;
                let mut rule = Vec::with_capacity(4);
                for &(x, w) in LEGENDRE4.iter().rev() {
                    rule.push((-x * a, 0.5 * w));
                }
                for &(x, w) in &LEGENDRE4 {
                    rule.push((x * a, 0.5 * w));
                }
                rule
            }
        }
    }
}

/// Odd strength functions `gamma(xi)` available to the general error model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gamma {
    /// `xi / 2`, the standard strength.
    HalfXi,
    /// `xi^3 / (2 hbar^2)`.
    HalfCubic,
}

impl Gamma {
    pub fn eval(self, xi: f64, hbar: f64) -> f64 {
        match self {
            Gamma::HalfXi => 0.5 * xi,
            Gamma::HalfCubic => 0.5 * xi * xi * xi / (hbar * hbar),
        }
    }

    /// `E[gamma(xi)^2]` under `dist`.
    pub fn second_moment(self, dist: &XiDistribution) -> f64 {
        match self {
            Gamma::HalfXi => 0.25 * dist.moment(2),
            Gamma::HalfCubic => 0.25 * dist.moment(6) / dist.hbar.powi(4),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gamma::HalfXi => "half_xi",
            Gamma::HalfCubic => "half_cubic",
        }
    }
}

/// Rule mapping `(rho, xi)` to the single-shot estimation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorModel {
    /// `(xi/2) d_q ln rho`.
    Standard,
    /// `gamma(xi) d_q ln rho`.
    GeneralGamma(Gamma),
    /// `(xi/2) (d_q rho / rho) (1 + lambda rho)`.
    LambdaModified { lambda: f64 },
}

impl ErrorModel {
    /// Multiplier of the score for a given `xi`.
    pub fn strength(&self, xi: f64, hbar: f64) -> f64 {
        match self {
            ErrorModel::Standard | ErrorModel::LambdaModified { .. } => 0.5 * xi,
            ErrorModel::GeneralGamma(g) => g.eval(xi, hbar),
        }
    }

    /// `E[strength(xi)^2]`.
    pub fn strength_second_moment(&self, dist: &XiDistribution) -> f64 {
        match self {
            ErrorModel::Standard | ErrorModel::LambdaModified { .. } => 0.25 * dist.moment(2),
            ErrorModel::GeneralGamma(g) => g.second_moment(dist),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            ErrorModel::LambdaModified { lambda } => *lambda,
            _ => 0.0,
        }
    }

    /// Strength linear in `xi`, so second moments only see `E[xi^2]`.
    pub fn is_linear_in_xi(&self) -> bool {
        !matches!(self, ErrorModel::GeneralGamma(Gamma::HalfCubic))
    }
}

impl fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorModel::Standard => write!(f, "standard"),
            ErrorModel::GeneralGamma(g) => write!(f, "general_gamma:{}", g.name()),
            ErrorModel::LambdaModified { lambda } => write!(f, "lambda:{lambda}"),
        }
    }
}

fn stencil_window(k: usize, n: usize) -> std::ops::Range<usize> {
    if k < 2 {
        0..5
    } else if k + 2 >= n {
        n - 5..n
    } else {
        k - 2..k + 3
    }
}

/// `d ln rho` along one line; zero where `rho <= floor`.
///
/// Differentiates `ln rho` wherever the whole stencil sees positive density
/// (exact for Gaussian lines) and falls back to `(d rho) / rho` elsewhere.
fn score_line(rho: &[f64], h: f64, floor: f64, out: &mut [f64]) {
    let n = rho.len();
    let log: Vec<f64> = rho
        .iter()
        .map(|&r| {
            if r > 0.0 {
                r.ln()
            } else {
                f64::MIN_POSITIVE.ln()
            }
        })
        .collect();
    let mut dlog = vec![0.0; n];
    let mut drho = vec![0.0; n];
    first_derivative_line(&log, h, &mut dlog);
    first_derivative_line(rho, h, &mut drho);
    for k in 0..n {
        out[k] = if rho[k] <= floor {
            0.0
        } else if stencil_window(k, n).all(|j| rho[j] > 0.0) {
            dlog[k]
        } else {
            drho[k] / rho[k]
        };
    }
}

/// The score `d_q ln rho(q)`, zero outside the support.
pub fn score(prep: &Preparation) -> Field1D {
    let rho = prep.density();
    let mut out = vec![0.0; rho.values().len()];
    score_line(
        rho.values(),
        prep.grid().spacing(),
        prep.phase_floor(),
        &mut out,
    );
    Field1D::new(*prep.grid(), out).expect("score is finite")
}

/// The estimator `p_bar(q) = d_q S(q)`.
pub fn estimator(prep: &Preparation) -> Field1D {
    derivative(prep.action()).expect("preparation grids satisfy the stencil width")
}

fn shaped_error(score: &Field1D, rho: &Field1D, strength: f64, lambda: f64) -> Field1D {
    score.zip_map(rho, |s, r| strength * s * (1.0 + lambda * r))
}

/// Single-shot estimation error `eps_p(q; xi)` for `model`.
pub fn error_field(prep: &Preparation, model: &ErrorModel, xi: f64) -> Field1D {
    shaped_error(
        &score(prep),
        prep.density(),
        model.strength(xi, prep.hbar()),
        model.lambda(),
    )
}

/// Tolerance on `int eps_p rho dq` for densities satisfying boundary decay.
pub const UNBIAS_TOL: f64 = 1e-8;

/// Momentum field `p(q; xi) = d_q S + eps_p(q; xi)`.
pub fn momentum_field(prep: &Preparation, model: &ErrorModel, xi: f64) -> Field1D {
    estimator(prep).zip_map(&error_field(prep, model, xi), |a, b| a + b)
}

/// `int eps_p(q; xi) rho(q) dq`; vanishes for densities decaying at the boundary.
pub fn weak_unbiasedness(prep: &Preparation, model: &ErrorModel, xi: f64) -> f64 {
    crate::grid::integrate_product(&error_field(prep, model, xi), prep.density())
}

/// `d_{q_j} ln rho(q1, q2)`, zero outside the support.
pub fn bipartite_score(prep: &BipartitePreparation, axis: Axis) -> Field2D {
    let rho = prep.density();
    let (n1, n2) = prep.grid().shape();
    let h = prep.grid().axis(axis).spacing();
    let floor = prep.phase_floor();
    let mut out = vec![0.0; n1 * n2];
    match axis {
        Axis::Second => {
            for i in 0..n1 {
                let line = &rho.values()[i * n2..(i + 1) * n2];
                score_line(line, h, floor, &mut out[i * n2..(i + 1) * n2]);
            }
        }
        Axis::First => {
            let mut buf = vec![0.0; n1];
            for j in 0..n2 {
                let line = rho.line(Axis::First, j);
                score_line(&line, h, floor, &mut buf);
                for i in 0..n1 {
                    out[i * n2 + j] = buf[i];
                }
            }
        }
    }
    Field2D::new(*prep.grid(), out).expect("score is finite")
}

/// Component-`j` estimator `d_{q_j} S(q1, q2)`.
pub fn bipartite_estimator(prep: &BipartitePreparation, axis: Axis) -> Field2D {
    partial_derivative(prep.action(), axis).expect("preparation grids satisfy the stencil width")
}

/// Component-`j` estimation error over the joint grid.
pub fn bipartite_error_field(
    prep: &BipartitePreparation,
    model: &ErrorModel,
    xi: f64,
    axis: Axis,
) -> Field2D {
    let strength = model.strength(xi, prep.hbar());
    let lambda = model.lambda();
    bipartite_score(prep, axis).zip_map(prep.density(), |s, r| strength * s * (1.0 + lambda * r))
}
