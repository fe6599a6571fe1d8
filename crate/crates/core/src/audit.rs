//! Estimation-independence audit for product preparations, and falsification
//! checks over finite candidate families for the error generator `G` and the
//! estimator map `F`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{bipartite_error_field, bipartite_estimator, ErrorModel};
use crate::grid::{partial_derivative, Axis, Field2D, Grid1D};
use crate::preparation::{build_gaussian, build_product, BipartitePreparation, GaussianSpec};

/// Normalized leakage above which independence is declared violated.
pub const LEAK_TOL: f64 = 1e-8;

/// Relative residual allowed by the additivity check.
pub const ADDITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Independent,
    Violated,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Independent => "independent",
            Verdict::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    /// Largest variation of either estimator along the other coordinate.
    pub estimator_leakage: f64,
    /// Largest variation of either error component along the other coordinate.
    pub error_leakage: f64,
    /// Per component: error leakage over the component's largest error magnitude.
    pub component_leakage: [f64; 2],
    /// `max_j component_leakage[j]`.
    pub normalized_leakage: f64,
    pub verdict: Verdict,
}

impl IndependenceReport {
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("estimator_leakage", self.estimator_leakage.to_string()),
            ("error_leakage", self.error_leakage.to_string()),
            ("leakage_1", self.component_leakage[0].to_string()),
            ("leakage_2", self.component_leakage[1].to_string()),
            ("normalized_leakage", self.normalized_leakage.to_string()),
            ("verdict", self.verdict.name().to_string()),
        ]
    }
}

/// Largest `max - min` of the component-`axis` field along the other
/// coordinate, restricted to the support.
pub fn variation_along_other(field: &Field2D, support: &[bool], axis: Axis) -> f64 {
    let (n1, n2) = field.grid().shape();
    let v = field.values();
    let (outer, inner) = match axis {
        Axis::First => (n1, n2),
        Axis::Second => (n2, n1),
    };
    let mut worst = 0.0_f64;
    for a in 0..outer {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for b in 0..inner {
            let k = match axis {
                Axis::First => a * n2 + b,
                Axis::Second => b * n2 + a,
            };
            if support[k] {
                lo = lo.min(v[k]);
                hi = hi.max(v[k]);
            }
        }
        if hi >= lo {
            worst = worst.max(hi - lo);
        }
    }
    worst
}

fn max_abs_on(field: &Field2D, support: &[bool]) -> f64 {
    field
        .values()
        .iter()
        .zip(support)
        .filter(|(_, &s)| s)
        .fold(0.0_f64, |m, (v, _)| m.max(v.abs()))
}

/// Audits a product preparation for estimation independence.
pub fn audit(
    prep: &BipartitePreparation,
    model: &ErrorModel,
    xi_samples: &[f64],
) -> Result<IndependenceReport> {
    if !prep.is_product() {
        return Err(Error::NotProduct);
    }
    if xi_samples.is_empty() {
        return Err(Error::InvalidParameter(
            "audit needs at least one xi sample".into(),
        ));
    }
    let support = prep.support();
    let mut estimator_leakage = 0.0_f64;
    let mut error_leakage = 0.0_f64;
    let mut component_leakage = [0.0; 2];
    for axis in [Axis::First, Axis::Second] {
        let p_bar = bipartite_estimator(prep, axis);
        estimator_leakage = estimator_leakage.max(variation_along_other(&p_bar, &support, axis));
        let (mut leak, mut scale) = (0.0_f64, 0.0_f64);
        for &xi in xi_samples {
            let eps = bipartite_error_field(prep, model, xi, axis);
            leak = leak.max(variation_along_other(&eps, &support, axis));
            scale = scale.max(max_abs_on(&eps, &support));
        }
        error_leakage = error_leakage.max(leak);
        component_leakage[axis.index()] = if scale > 0.0 { leak / scale } else { 0.0 };
    }
    let normalized_leakage = component_leakage[0].max(component_leakage[1]);
    Ok(IndependenceReport {
        estimator_leakage,
        error_leakage,
        component_leakage,
        normalized_leakage,
        verdict: if normalized_leakage <= LEAK_TOL {
            Verdict::Independent
        } else {
            Verdict::Violated
        },
    })
}

/// Audits every preparation in parallel, preserving order.
pub fn audit_corpus(
    preps: &[BipartitePreparation],
    model: &ErrorModel,
    xi_samples: &[f64],
) -> Vec<Result<IndependenceReport>> {
    preps
        .par_iter()
        .map(|p| audit(p, model, xi_samples))
        .collect()
}

/// Candidate generators `G(rho)` for the additivity equation
/// `G(rho_1 rho_2) = G(rho_1) + G(rho_2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GCandidate {
    GammaLog(f64),
    Linear,
    Square,
    Sqrt,
}

impl GCandidate {
    pub fn eval(self, rho: f64) -> f64 {
        match self {
            GCandidate::GammaLog(gamma) => gamma * rho.ln(),
            GCandidate::Linear => rho,
            GCandidate::Square => rho * rho,
            GCandidate::Sqrt => rho.sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GCandidate::GammaLog(_) => "gamma_ln_rho",
            GCandidate::Linear => "rho",
            GCandidate::Square => "rho_squared",
            GCandidate::Sqrt => "sqrt_rho",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditivityCheck {
    pub residual: f64,
    pub scale: f64,
    pub pass: bool,
}

/// Largest nodewise additivity residual of `g` over the product support.
pub fn functional_equation_check(
    g: GCandidate,
    prep: &BipartitePreparation,
) -> Result<AdditivityCheck> {
    let (a, b) = prep.factors().ok_or(Error::NotProduct)?;
    let (r1, r2) = (a.density().values(), b.density().values());
    let n2 = r2.len();
    let support = prep.support();
    let (mut residual, mut scale) = (0.0_f64, 0.0_f64);
    for (k, (&joint, _)) in prep
        .density()
        .values()
        .iter()
        .zip(&support)
        .enumerate()
        .filter(|(_, (_, &s))| s)
    {
        let (g12, g1, g2) = (g.eval(joint), g.eval(r1[k / n2]), g.eval(r2[k % n2]));
        residual = residual.max((g12 - g1 - g2).abs());
        scale = scale.max(g12.abs()).max(g1.abs()).max(g2.abs());
    }
    Ok(AdditivityCheck {
        residual,
        scale,
        pass: residual <= ADDITIVITY_TOL * scale,
    })
}

/// Candidate linear maps `F` producing the component-`j` estimator from `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FCandidate {
    /// `d_{q_j} S`.
    Partial,
    /// `S`.
    Identity,
    /// `q_j S`.
    PositionWeighted,
    /// `d_{q_j} S + d_{q_i} S`.
    CrossDerivative,
}

impl FCandidate {
    pub fn name(self) -> &'static str {
        match self {
            FCandidate::Partial => "partial",
            FCandidate::Identity => "identity",
            FCandidate::PositionWeighted => "position_weighted",
            FCandidate::CrossDerivative => "cross_derivative",
        }
    }

    /// Component-`axis` output over the joint grid.
    pub fn apply(self, action: &Field2D, axis: Axis) -> Field2D {
        let d = |ax| {
            partial_derivative(action, ax).expect("preparation grids satisfy the stencil width")
        };
        match self {
            FCandidate::Partial => d(axis),
            FCandidate::Identity => action.clone(),
            FCandidate::PositionWeighted => {
                let q = action.grid().axis(axis).nodes();
                let n2 = action.grid().second.len();
                let values = action
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let i = match axis {
                            Axis::First => k / n2,
                            Axis::Second => k % n2,
                        };
                        q[i] * s
                    })
                    .collect();
                Field2D::new(*action.grid(), values).expect("finite")
            }
            FCandidate::CrossDerivative => d(axis).zip_map(&d(axis.other()), |a, b| a + b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormCheck {
    /// Normalized variation along the other coordinate, per preparation.
    pub locality: Vec<f64>,
    /// Largest deviation from `p0_j` on the linear-phase fixture.
    pub classical_deviation: f64,
    pub pass: bool,
}

/// Linear-phase product fixture and its momenta.
pub fn classical_fixture() -> (BipartitePreparation, [f64; 2]) {
    let p0 = [1.5, -0.7];
    let g = Grid1D::symmetric(8.0, 256).expect("valid grid");
    let a = build_gaussian(GaussianSpec::new(0.0, 1.0, p0[0], 0.0), g, 1.0).expect("fixture");
    let b = build_gaussian(GaussianSpec::new(0.0, 1.0, p0[1], 0.0), g, 1.0).expect("fixture");
    (build_product(&a, &b).expect("fixture"), p0)
}

/// Passes iff `F` yields outputs independent of the other coordinate on every
/// preparation and reproduces the constant momentum on the classical fixture.
pub fn estimator_form_check(f: FCandidate, preps: &[BipartitePreparation]) -> Result<FormCheck> {
    let mut locality = Vec::with_capacity(preps.len());
    for prep in preps {
        if !prep.is_product() {
            return Err(Error::NotProduct);
        }
        let support = prep.support();
        let outputs = [Axis::First, Axis::Second].map(|axis| (axis, f.apply(prep.action(), axis)));
        // Momentum floor keeps phase-free outputs from normalizing roundoff by roundoff.
        let width = prep.grid().first.q_max().max(prep.grid().second.q_max())
            - prep.grid().first.q_min().min(prep.grid().second.q_min());
        let scale = outputs.iter().fold(prep.hbar() / width, |m, (_, out)| {
            m.max(max_abs_on(out, &support))
        });
        let worst = outputs
            .iter()
            .map(|(axis, out)| variation_along_other(out, &support, *axis))
            .fold(0.0_f64, f64::max);
        locality.push(worst / scale);
    }
    let (fixture, p0) = classical_fixture();
    let support = fixture.support();
    let mut classical_deviation = 0.0_f64;
    for axis in [Axis::First, Axis::Second] {
        let out = f.apply(fixture.action(), axis);
        for (v, _) in out.values().iter().zip(&support).filter(|(_, &s)| s) {
            classical_deviation = classical_deviation.max((v - p0[axis.index()]).abs());
        }
    }
    let local = locality.iter().all(|&l| l <= LEAK_TOL);
    Ok(FormCheck {
        pass: local && classical_deviation <= 1e-8,
        locality,
        classical_deviation,
    })
}
