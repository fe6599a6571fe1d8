//! Scalar diagnostics of a preparation under an error model: mean-squared
//! errors, Fisher information, dispersions, variances and the uncertainty
//! relations they imply, together with an independent evaluation of the
//! position and momentum moments directly from the wave function.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimation::{error_field, estimator, score, ErrorModel, XiDistribution, XiKind};
use crate::grid::{derivative, integrate, integrate_product, second_derivative, Field1D};
use crate::preparation::{wave_function, Preparation, WaveFunction};

/// Allowed negative slack of every inequality.
pub const RELATION_TOL: f64 = 1e-8;

/// Relative tolerance between the two routes to the momentum variance.
pub const VARIANCE_IDENTITY_TOL: f64 = 1e-6;

/// Relative tolerance between model-side and wave-function-side moments.
pub const ORACLE_TOL: f64 = 1e-5;

/// `J_q = int (d_q ln rho)^2 rho dq`.
pub fn fisher_information(prep: &Preparation) -> f64 {
    let s = score(prep);
    integrate(&s.zip_map(prep.density(), |s, r| s * s * r))
}

/// `q_o = int q rho dq`.
pub fn mean_position(prep: &Preparation) -> f64 {
    integrate(
        &prep
            .grid()
            .sample(|q| q)
            .zip_map(prep.density(), |q, r| q * r),
    )
}

/// `E_q^2 = int (q - q_o)^2 rho dq`.
pub fn ms_error_q(prep: &Preparation) -> f64 {
    let q0 = mean_position(prep);
    integrate(
        &prep
            .grid()
            .sample(|q| q - q0)
            .zip_map(prep.density(), |x, r| x * x * r),
    )
}

/// Mean of the estimator `int d_q S rho dq`.
pub fn mean_estimator(prep: &Preparation) -> f64 {
    integrate_product(&estimator(prep), prep.density())
}

/// `Delta_p^2`, the variance of the estimator under `rho`.
pub fn estimator_dispersion(prep: &Preparation) -> f64 {
    let p_bar = estimator(prep);
    let mean = integrate_product(&p_bar, prep.density());
    integrate(&p_bar.zip_map(prep.density(), |p, r| (p - mean) * (p - mean) * r))
}

/// Covariance between position and estimator, `int (q - q_o)(d_q S - <d_q S>) rho dq`.
pub fn covariance_qp(prep: &Preparation) -> f64 {
    let q0 = mean_position(prep);
    let p_bar = estimator(prep);
    let p0 = integrate_product(&p_bar, prep.density());
    let centered = prep
        .grid()
        .sample(|q| q - q0)
        .zip_map(&p_bar, |x, p| x * (p - p0));
    integrate_product(&centered, prep.density())
}

/// `E_p^2`, the mean-squared momentum estimation error averaged over `rho` and `xi`.
///
/// The two-point law is summed exactly. Continuous laws are reduced through
/// the second moment of the error strength.
pub fn ms_error_p(prep: &Preparation, model: &ErrorModel, xi: &XiDistribution) -> f64 {
    let mean_square = |x: f64| {
        let eps = error_field(prep, model, x);
        integrate(&eps.zip_map(prep.density(), |e, r| e * e * r))
    };
    let hbar = xi.hbar;
    match xi.kind {
        XiKind::TwoPoint => 0.5 * (mean_square(hbar) + mean_square(-hbar)),
        XiKind::Gaussian | XiKind::Uniform => {
            let unit = model.strength(hbar, prep.hbar());
            mean_square(hbar) * model.strength_second_moment(xi) / (unit * unit)
        }
    }
}

/// Correction functional of the modified error,
/// `C = (hbar^2 / 4) int (d_q rho / rho)^2 (2 lambda rho + lambda^2 rho^2) rho dq`.
pub fn c_functional(prep: &Preparation, lambda: f64) -> f64 {
    let hbar = prep.hbar();
    let s = score(prep);
    let integrand = s.zip_map(prep.density(), |s, r| {
        s * s * (2.0 * lambda * r + lambda * lambda * r * r) * r
    });
    0.25 * hbar * hbar * integrate(&integrand)
}

/// Position and momentum variances of the phase-space ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variances {
    /// Momentum variance from the phase-space moments.
    pub sigma_p2: f64,
    pub sigma_q2: f64,
    /// `E_p^2 + Delta_p^2`.
    pub sigma_p2_identity: f64,
    /// `2 Cov(eps, p_bar)` over the ensemble.
    pub cross_term: f64,
    pub p_mean: f64,
    pub q_mean: f64,
}

/// Variances of `(p, q)` computed directly from the phase-space law and via
/// the decomposition `sigma_p^2 = E_p^2 + Delta_p^2`; the two must agree.
pub fn variances(prep: &Preparation, model: &ErrorModel, xi: &XiDistribution) -> Result<Variances> {
    let rho = prep.density();
    let p_bar = estimator(prep);
    let p_bar_mean = integrate_product(&p_bar, rho);

    let (mut m1, mut m2, mut cross) = (0.0, 0.0, 0.0);
    for (x, w) in xi.quadrature() {
        let eps = error_field(prep, model, x);
        let p = p_bar.zip_map(&eps, |a, b| a + b);
        m1 += w * integrate_product(&p, rho);
        m2 += w * integrate(&p.zip_map(rho, |p, r| p * p * r));
        cross += w * integrate(
            &eps.zip_map(&p_bar, |e, pb| e * (pb - p_bar_mean))
                .zip_map(rho, |v, r| v * r),
        );
    }
    let sigma_p2 = m2 - m1 * m1;
    let sigma_q2 = ms_error_q(prep);
    let identity = ms_error_p(prep, model, xi) + estimator_dispersion(prep);
    let scale = identity.abs().max(prep.hbar() * prep.hbar() * f64::EPSILON);
    if (sigma_p2 - identity).abs() > VARIANCE_IDENTITY_TOL * scale {
        return Err(Error::ModelInconsistency(format!(
            "momentum variance {sigma_p2} differs from E_p^2 + Delta_p^2 = {identity}"
        )));
    }
    if (2.0 * cross).abs() > VARIANCE_IDENTITY_TOL * scale {
        return Err(Error::ModelInconsistency(format!(
            "error/estimator cross term {} does not vanish",
            2.0 * cross
        )));
    }
    Ok(Variances {
        sigma_p2,
        sigma_q2,
        sigma_p2_identity: identity,
        cross_term: 2.0 * cross,
        p_mean: m1,
        q_mean: mean_position(prep),
    })
}

/// Moments of `q` and `p = -i hbar d/dq` evaluated on the wave function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub sigma_q2: f64,
    pub sigma_p2: f64,
    /// `(1/2) <{q, p}> - <q><p>`.
    pub cov_qp: f64,
    /// Imaginary part of `<[q, p]>`; equals `hbar` for a normalized state.
    pub commutator_im: f64,
}

/// Wave-function-side moments by finite differences of `psi`.
pub fn quantum_oracle(psi: &WaveFunction, hbar: f64) -> Result<QuantumMoments> {
    let norm = psi.norm_sqr();
    if !((norm - 1.0).abs() <= 1e-6) {
        return Err(Error::WaveFunctionNotNormalized { norm });
    }
    let d = |f: &Field1D| derivative(f).expect("grid width");
    let dd = |f: &Field1D| second_derivative(f).expect("grid width");
    let (re, im) = (&psi.re, &psi.im);
    let (dre, dim) = (d(re), d(im));
    let (ddre, ddim) = (dd(re), dd(im));
    let density = psi.probability_density();
    let q = psi.grid().sample(|q| q);

    let mean_q = integrate_product(&q, &density);
    let q2 = integrate(&q.zip_map(&density, |q, r| q * q * r));
    // Re(psi* psi') and Im(psi* psi') at every node.
    let current = re
        .zip_map(&dim, |a, b| a * b)
        .zip_map(&im.zip_map(&dre, |a, b| a * b), |x, y| x - y);
    let half_drho = re
        .zip_map(&dre, |a, b| a * b)
        .zip_map(&im.zip_map(&dim, |a, b| a * b), |x, y| x + y);
    let mean_p = hbar * integrate(&current);
    let p2 = -hbar
        * hbar
        * integrate(
            &re.zip_map(&ddre, |a, b| a * b)
                .zip_map(&im.zip_map(&ddim, |a, b| a * b), |x, y| x + y),
        );
    let sym = hbar * integrate_product(&q, &current);
    let commutator_im = -2.0 * hbar * integrate_product(&q, &half_drho);
    Ok(QuantumMoments {
        mean_q,
        mean_p,
        sigma_q2: q2 - mean_q * mean_q,
        sigma_p2: p2 - mean_p * mean_p,
        cov_qp: sym - mean_q * mean_p,
        commutator_im,
    })
}

/// One inequality `lhs >= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relation {
    pub lhs: f64,
    pub rhs: f64,
}

impl Relation {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs }
    }

    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn holds(&self) -> bool {
        self.slack() >= -RELATION_TOL
    }
}

/// Schrödinger–Robertson relation and its two Cauchy–Schwarz legs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchrodingerRobertson {
    pub lhs: f64,
    /// `|<[q, p]>|^2 / 4 = hbar^2 / 4`.
    pub rhs_commutator: f64,
    /// `rhs_commutator + cov_qp^2`.
    pub rhs_full: f64,
    pub cov_qp: f64,
    /// `E_p^2 E_q^2 >= |<[q, p]>|^2 / 4`.
    pub robertson_leg: Relation,
    /// `Delta_p^2 E_q^2 >= cov_qp^2`.
    pub covariance_leg: Relation,
    /// Imaginary part of `<[q, p]>` recovered from the wave function.
    pub commutator_im: f64,
}

impl SchrodingerRobertson {
    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs_full
    }

    pub fn holds(&self) -> bool {
        self.slack() >= -RELATION_TOL && self.robertson_leg.holds() && self.covariance_leg.holds()
    }
}

/// Schrödinger–Robertson relation for the standard error model.
pub fn schrodinger_robertson(
    prep: &Preparation,
    model: &ErrorModel,
    xi: &XiDistribution,
) -> Result<SchrodingerRobertson> {
    if !matches!(model, ErrorModel::Standard) {
        return Err(Error::InvalidParameter(
            "the Schrödinger–Robertson chain is derived for the standard error model".into(),
        ));
    }
    let hbar = prep.hbar();
    let oracle = quantum_oracle(&wave_function(prep), hbar)?;
    if (oracle.commutator_im - hbar).abs() > ORACLE_TOL * hbar {
        return Err(Error::ModelInconsistency(format!(
            "<[q, p]> = {} i, expected {hbar} i",
            oracle.commutator_im
        )));
    }
    let v = variances(prep, model, xi)?;
    let e_p2 = ms_error_p(prep, model, xi);
    let e_q2 = v.sigma_q2;
    let delta_p2 = estimator_dispersion(prep);
    let cov = covariance_qp(prep);
    let rhs_commutator = 0.25 * hbar * hbar;
    Ok(SchrodingerRobertson {
        lhs: v.sigma_p2 * v.sigma_q2,
        rhs_commutator,
        rhs_full: rhs_commutator + cov * cov,
        cov_qp: cov,
        robertson_leg: Relation::new(e_p2 * e_q2, rhs_commutator),
        covariance_leg: Relation::new(delta_p2 * e_q2, cov * cov),
        commutator_im: oracle.commutator_im,
    })
}

/// Every diagnostic for one preparation under one error model and `xi` law.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport {
    pub hbar: f64,
    pub model: ErrorModel,
    pub xi: XiKind,
    pub e_p2: f64,
    pub e_q2: f64,
    pub j_q: f64,
    pub delta_p2: f64,
    pub c: f64,
    pub sigma_p2: f64,
    pub sigma_q2: f64,
    pub sigma_p2_identity: f64,
    pub cross_term: f64,
    pub q_mean: f64,
    pub p_mean: f64,
    pub cov_qp: f64,
    /// `int eps rho dq` at `xi = +hbar` and `xi = -hbar`.
    pub unbiasedness: [f64; 2],
    pub quantum: QuantumMoments,
    /// The variance identities are assumed, not derived, for the modified model.
    pub carry_over_assumed: bool,
}

impl UncertaintyReport {
    /// `E_q^2 >= 1 / J_q`.
    pub fn cramer_rao(&self) -> Relation {
        Relation::new(self.e_q2, 1.0 / self.j_q)
    }

    /// `E_p^2 E_q^2 >= hbar^2 / 4`.
    pub fn ms_tradeoff(&self) -> Relation {
        Relation::new(self.e_p2 * self.e_q2, 0.25 * self.hbar * self.hbar)
    }

    /// `E_p^2 - hbar^2 J_q / 4 - C`; zero for the standard and modified models.
    pub fn information_residual(&self) -> f64 {
        self.e_p2 - 0.25 * self.hbar * self.hbar * self.j_q - self.c
    }

    pub fn hk_lhs(&self) -> f64 {
        self.sigma_p2 * self.sigma_q2
    }

    /// `sigma_p^2 sigma_q^2 >= hbar^2/4 + Delta_p^2 E_q^2`.
    pub fn hk_intermediate(&self) -> Relation {
        Relation::new(
            self.hk_lhs(),
            0.25 * self.hbar * self.hbar + self.delta_p2 * self.e_q2,
        )
    }

    /// `sigma_p^2 sigma_q^2 >= hbar^2/4`.
    pub fn hk_final(&self) -> Relation {
        Relation::new(self.hk_lhs(), 0.25 * self.hbar * self.hbar)
    }

    /// `sigma_p^2 sigma_q^2 >= hbar^2/4 + Delta_p^2 E_q^2 + C / J_q`.
    pub fn modified_hk(&self) -> Relation {
        Relation::new(
            self.hk_lhs(),
            0.25 * self.hbar * self.hbar + self.delta_p2 * self.e_q2 + self.c / self.j_q,
        )
    }

    /// Names of every in-scope relation or identity that fails its tolerance.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let checks = [
            ("cramer_rao", self.cramer_rao()),
            ("hk_intermediate", self.hk_intermediate()),
            ("hk_final", self.hk_final()),
        ];
        for (name, rel) in checks {
            if !rel.holds() {
                out.push(format!("{name}: slack {}", rel.slack()));
            }
        }
        // The product bound needs E_p^2 >= hbar^2 J / 4, i.e. gamma no weaker than xi/2.
        if self
            .model
            .strength_second_moment(&XiDistribution::new(self.xi, self.hbar))
            >= 0.25 * self.hbar * self.hbar * (1.0 - 1e-12)
            && !self.ms_tradeoff().holds()
        {
            out.push(format!("ms_tradeoff: slack {}", self.ms_tradeoff().slack()));
        }
        // With lambda < 0 the correction may be negative and the chain through
        // E_q^2 >= 1/J_q reverses, so the modified bound is only asserted for lambda >= 0.
        if self.model.lambda() >= 0.0 && !self.modified_hk().holds() {
            out.push(format!("modified_hk: slack {}", self.modified_hk().slack()));
        }
        if matches!(
            self.model,
            ErrorModel::Standard | ErrorModel::LambdaModified { .. }
        ) {
            let scale = self.e_p2.abs().max(f64::MIN_POSITIVE);
            if self.information_residual().abs() > RELATION_TOL * scale {
                out.push(format!(
                    "information_identity: residual {}",
                    self.information_residual()
                ));
            }
            for (sign, u) in ["+", "-"].iter().zip(self.unbiasedness) {
                if u.abs() > crate::estimation::UNBIAS_TOL {
                    out.push(format!("weak_unbiasedness[xi={sign}hbar]: {u}"));
                }
            }
        }
        if self.model.lambda() > 0.0 && !(self.c > 0.0) {
            out.push(format!("c_positive: C = {}", self.c));
        }
        if matches!(self.model, ErrorModel::Standard) {
            let rel = |a: f64, b: f64| (a - b).abs() <= ORACLE_TOL * b.abs().max(1e-300);
            if !rel(self.sigma_p2, self.quantum.sigma_p2) {
                out.push(format!(
                    "oracle_sigma_p2: model {} vs wave function {}",
                    self.sigma_p2, self.quantum.sigma_p2
                ));
            }
            if !rel(self.sigma_q2, self.quantum.sigma_q2) {
                out.push(format!(
                    "oracle_sigma_q2: model {} vs wave function {}",
                    self.sigma_q2, self.quantum.sigma_q2
                ));
            }
        }
        out
    }

    /// Flat `key = value` record, one diagnostic per line.
    pub fn to_key_values(&self, prefix: &str) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(out, "{prefix}{key} = {value}");
        }
        out
    }

    /// Stable column names matching [`UncertaintyReport::entries`].
    pub fn keys() -> Vec<&'static str> {
        REPORT_KEYS.to_vec()
    }

    /// Stable `(key, value)` pairs in documented order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let hk_i = self.hk_intermediate();
        let hk_f = self.hk_final();
        let mhk = self.modified_hk();
        let values = vec![
            self.model.to_string(),
            self.xi.name().to_string(),
            self.hbar.to_string(),
            self.e_p2.to_string(),
            self.e_q2.to_string(),
            self.j_q.to_string(),
            self.delta_p2.to_string(),
            self.c.to_string(),
            self.sigma_p2.to_string(),
            self.sigma_q2.to_string(),
            self.sigma_p2_identity.to_string(),
            self.cross_term.to_string(),
            self.q_mean.to_string(),
            self.p_mean.to_string(),
            self.cov_qp.to_string(),
            self.information_residual().to_string(),
            self.cramer_rao().slack().to_string(),
            self.ms_tradeoff().slack().to_string(),
            hk_i.lhs.to_string(),
            hk_i.rhs.to_string(),
            hk_i.slack().to_string(),
            hk_f.rhs.to_string(),
            hk_f.slack().to_string(),
            mhk.rhs.to_string(),
            mhk.slack().to_string(),
            self.unbiasedness[0].to_string(),
            self.unbiasedness[1].to_string(),
            self.quantum.sigma_q2.to_string(),
            self.quantum.sigma_p2.to_string(),
            self.quantum.cov_qp.to_string(),
            self.quantum.commutator_im.to_string(),
            self.carry_over_assumed.to_string(),
        ];
        REPORT_KEYS.iter().copied().zip(values).collect()
    }
}

const REPORT_KEYS: [&str; 32] = [
    "model",
    "xi",
    "hbar",
    "E_p2",
    "E_q2",
    "J_q",
    "Delta_p2",
    "C",
    "sigma_p2",
    "sigma_q2",
    "sigma_p2_identity",
    "cross_term",
    "q_mean",
    "p_mean",
    "cov_qp",
    "information_residual",
    "cramer_rao_slack",
    "ms_tradeoff_slack",
    "hk_lhs",
    "hk_rhs",
    "hk_slack",
    "hk_final_rhs",
    "hk_final_slack",
    "modified_hk_rhs",
    "modified_hk_slack",
    "unbiasedness_plus",
    "unbiasedness_minus",
    "oracle_sigma_q2",
    "oracle_sigma_p2",
    "oracle_cov_qp",
    "oracle_commutator_im",
    "carry_over_assumed",
];

/// Builds the full report; fails if the two variance routes disagree.
pub fn analyze(
    prep: &Preparation,
    model: &ErrorModel,
    xi: &XiDistribution,
) -> Result<UncertaintyReport> {
    if (xi.hbar - prep.hbar()).abs() > 1e-12 * prep.hbar() {
        return Err(Error::HbarMismatch(xi.hbar, prep.hbar()));
    }
    let v = variances(prep, model, xi)?;
    let hbar = prep.hbar();
    Ok(UncertaintyReport {
        hbar,
        model: *model,
        xi: xi.kind,
        e_p2: ms_error_p(prep, model, xi),
        e_q2: ms_error_q(prep),
        j_q: fisher_information(prep),
        delta_p2: estimator_dispersion(prep),
        c: c_functional(prep, model.lambda()),
        sigma_p2: v.sigma_p2,
        sigma_q2: v.sigma_q2,
        sigma_p2_identity: v.sigma_p2_identity,
        cross_term: v.cross_term,
        q_mean: v.q_mean,
        p_mean: v.p_mean,
        cov_qp: covariance_qp(prep),
        unbiasedness: [
            crate::estimation::weak_unbiasedness(prep, model, hbar),
            crate::estimation::weak_unbiasedness(prep, model, -hbar),
        ],
        quantum: quantum_oracle(&wave_function(prep), hbar)?,
        carry_over_assumed: matches!(model, ErrorModel::LambdaModified { lambda } if *lambda != 0.0),
    })
}
