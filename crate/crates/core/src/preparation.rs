//! Preparations `(S, rho)`: the principal function together with the position
//! density it parameterizes, plus the wave function assembled from them.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{integrate, integrate2d, Field1D, Field2D, Grid1D, Grid2D};

mod io;

pub use io::{export_text, import_text};

/// Edge densities must not exceed this fraction of the peak density.
pub const BOUNDARY_EPS: f64 = 1e-10;

/// Nodes whose density is below this fraction of the peak carry no phase.
pub const PHASE_FLOOR: f64 = 1e-12;

/// Allowed deviation of the density integral from one.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Default action unit.
pub const DEFAULT_HBAR: f64 = 1.0;

/// Half-width, in units of sigma, a grid must cover around a Gaussian center.
pub const GAUSSIAN_MIN_SPAN: f64 = 6.0;

/// A single-system preparation on a 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Preparation {
    action: Field1D,
    density: Field1D,
    hbar: f64,
}

impl Preparation {
    /// Validates and wraps an action field `S` and a density `rho`.
    pub fn new(action: Field1D, density: Field1D, hbar: f64) -> Result<Self> {
        if action.grid() != density.grid() {
            return Err(Error::InvalidParameter(
                "action and density live on different grids".into(),
            ));
        }
        check_hbar(hbar)?;
        validate_density(density.values(), integrate(&density))?;
        let peak = density.max();
        let edges = [
            density.values()[0],
            density.values()[density.values().len() - 1],
        ];
        check_edges(&edges, peak)?;
        Ok(Self {
            action,
            density,
            hbar,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        self.density.grid()
    }

    /// The principal function `S(q)`.
    pub fn action(&self) -> &Field1D {
        &self.action
    }

    /// The position density `rho(q)`.
    pub fn density(&self) -> &Field1D {
        &self.density
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Absolute density threshold below which a node is treated as outside the support.
    pub fn phase_floor(&self) -> f64 {
        PHASE_FLOOR * self.density.max()
    }

    /// `true` for nodes whose density exceeds the phase floor.
    pub fn support(&self) -> Vec<bool> {
        let floor = self.phase_floor();
        self.density.values().iter().map(|&r| r > floor).collect()
    }

    /// Rescales the density to unit mass on the grid.
    pub fn renormalized(&self) -> Self {
        let total = integrate(&self.density);
        Self {
            action: self.action.clone(),
            density: self.density.map(|r| r / total),
            hbar: self.hbar,
        }
    }

    /// Same preparation with `S` shifted by a constant.
    pub fn with_action_offset(&self, offset: f64) -> Self {
        Self {
            action: self.action.map(|s| s + offset),
            density: self.density.clone(),
            hbar: self.hbar,
        }
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar.is_finite() && hbar > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "hbar must be positive, got {hbar}"
        )))
    }
}

fn validate_density(values: &[f64], integral: f64) -> Result<()> {
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    if !((integral - 1.0).abs() <= NORMALIZATION_TOL) {
        return Err(Error::NotNormalized { integral });
    }
    Ok(())
}

fn check_edges(edges: &[f64], peak: f64) -> Result<()> {
    let limit = BOUNDARY_EPS * peak;
    match edges.iter().copied().find(|&e| e > limit) {
        Some(edge) => Err(Error::BoundaryDecayViolated { edge, limit }),
        None => Ok(()),
    }
}

/// Gaussian density with a quadratic phase:
/// `rho = N(q0, sigma^2)`, `S = p0 (q - q0) + chirp (q - q0)^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub q0: f64,
    pub sigma: f64,
    pub p0: f64,
    pub chirp: f64,
}

impl GaussianSpec {
    pub fn new(q0: f64, sigma: f64, p0: f64, chirp: f64) -> Self {
        Self {
            q0,
            sigma,
            p0,
            chirp,
        }
    }

    /// Zero-phase Gaussian.
    pub fn centered(q0: f64, sigma: f64) -> Self {
        Self::new(q0, sigma, 0.0, 0.0)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.q0, self.sigma, self.p0, self.chirp]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gaussian needs finite parameters and sigma > 0: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn density(&self, q: f64) -> f64 {
        let x = (q - self.q0) / self.sigma;
        (-0.5 * x * x).exp() / (2.0 * PI * self.sigma * self.sigma).sqrt()
    }

    pub fn action(&self, q: f64) -> f64 {
        let x = q - self.q0;
        self.p0 * x + 0.5 * self.chirp * x * x
    }

    fn amplitude(&self, q: f64, hbar: f64) -> Complex64 {
        Complex64::from_polar(self.density(q).sqrt(), self.action(q) / hbar)
    }
}

/// Samples a Gaussian preparation and renormalizes it on the grid.
pub fn build_gaussian(spec: GaussianSpec, grid: Grid1D, hbar: f64) -> Result<Preparation> {
    spec.validate()?;
    check_hbar(hbar)?;
    let lo = spec.q0 - GAUSSIAN_MIN_SPAN * spec.sigma;
    let hi = spec.q0 + GAUSSIAN_MIN_SPAN * spec.sigma;
    if grid.q_min() > lo || grid.q_max() < hi {
        let edge = spec.density(grid.q_min()).max(spec.density(grid.q_max()));
        return Err(Error::BoundaryDecayViolated {
            edge,
            limit: BOUNDARY_EPS * spec.density(spec.q0),
        });
    }
    let rho = grid.sample(|q| spec.density(q));
    let total = integrate(&rho);
    let rho = rho.map(|r| r / total);
    let action = grid.sample(|q| spec.action(q));
    Preparation::new(action, rho, hbar)
}

/// One weighted Gaussian branch of a superposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpositionTerm {
    pub weight: Complex64,
    pub spec: GaussianSpec,
}

impl SuperpositionTerm {
    pub fn new(weight: Complex64, spec: GaussianSpec) -> Self {
        Self { weight, spec }
    }

    pub fn real(weight: f64, spec: GaussianSpec) -> Self {
        Self::new(Complex64::new(weight, 0.0), spec)
    }
}

/// Builds `psi = sum_i w_i sqrt(rho_i) exp(i S_i / hbar)` and returns
/// `rho = |psi|^2` (normalized) with `S = hbar * arg(psi)` unwrapped over the support.
pub fn build_superposition(
    terms: &[SuperpositionTerm],
    grid: Grid1D,
    hbar: f64,
) -> Result<Preparation> {
    check_hbar(hbar)?;
    if terms.is_empty() {
        return Err(Error::InvalidParameter(
            "superposition needs at least one term".into(),
        ));
    }
    for term in terms {
        term.spec.validate()?;
        if term.weight.norm() == 0.0 || !term.weight.norm().is_finite() {
            return Err(Error::InvalidParameter(
                "superposition weights must be nonzero".into(),
            ));
        }
    }
    let nodes = grid.nodes();
    let psi: Vec<Complex64> = nodes
        .iter()
        .map(|&q| {
            terms
                .iter()
                .map(|t| t.weight * t.spec.amplitude(q, hbar))
                .sum()
        })
        .collect();
    let rho = Field1D::new(grid, psi.iter().map(|z| z.norm_sqr()).collect())?;
    let total = integrate(&rho);
    if !(total > 0.0) {
        return Err(Error::NotNormalized { integral: total });
    }
    let rho = rho.map(|r| r / total);
    let floor = PHASE_FLOOR * rho.max();

    let support: Vec<usize> = (0..nodes.len())
        .filter(|&k| rho.values()[k] >= floor)
        .collect();
    let (first, last) = match (support.first(), support.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::DegenerateDensity),
    };
    if let Some(k) = (first..=last).find(|&k| rho.values()[k] < floor) {
        return Err(Error::PhaseUndefined { q: nodes[k] });
    }

    let mut phase = vec![0.0; nodes.len()];
    phase[first] = psi[first].arg();
    for k in first + 1..=last {
        let raw = psi[k].arg();
        let mut step = raw - phase[k - 1].rem_euclid(2.0 * PI);
        step -= 2.0 * PI * (step / (2.0 * PI)).round();
        phase[k] = phase[k - 1] + step;
    }
    // Choose the branch that puts the phase at the density peak in (-pi, pi].
    let peak = (first..=last)
        .max_by(|&a, &b| rho.values()[a].total_cmp(&rho.values()[b]))
        .unwrap_or(first);
    let turns = (phase[peak] / (2.0 * PI)).round();
    for p in &mut phase[first..=last] {
        *p -= 2.0 * PI * turns;
    }
    for k in 0..first {
        phase[k] = phase[first];
    }
    for k in last + 1..nodes.len() {
        phase[k] = phase[last];
    }
    let action = Field1D::new(grid, phase.into_iter().map(|p| hbar * p).collect())?;
    Preparation::new(action, rho, hbar)
}

/// Two-system preparation on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct BipartitePreparation {
    action: Field2D,
    density: Field2D,
    hbar: f64,
    factors: Option<Box<(Preparation, Preparation)>>,
}

impl BipartitePreparation {
    /// Validates a general (not necessarily product) two-system preparation.
    pub fn new(action: Field2D, density: Field2D, hbar: f64) -> Result<Self> {
        if action.grid() != density.grid() {
            return Err(Error::InvalidParameter(
                "action and density live on different grids".into(),
            ));
        }
        check_hbar(hbar)?;
        validate_density(density.values(), integrate2d(&density))?;
        let (n1, n2) = density.grid().shape();
        let mut edges = Vec::with_capacity(2 * (n1 + n2));
        for i in 0..n1 {
            edges.push(density.at(i, 0));
            edges.push(density.at(i, n2 - 1));
        }
        for j in 0..n2 {
            edges.push(density.at(0, j));
            edges.push(density.at(n1 - 1, j));
        }
        check_edges(&edges, density.max())?;
        Ok(Self {
            action,
            density,
            hbar,
            factors: None,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        self.density.grid()
    }

    pub fn action(&self) -> &Field2D {
        &self.action
    }

    pub fn density(&self) -> &Field2D {
        &self.density
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Whether the preparation was built from two independent preparations.
    pub fn is_product(&self) -> bool {
        self.factors.is_some()
    }

    /// The two single-system preparations of a product preparation.
    pub fn factors(&self) -> Option<(&Preparation, &Preparation)> {
        self.factors.as_deref().map(|(a, b)| (a, b))
    }

    pub fn phase_floor(&self) -> f64 {
        PHASE_FLOOR * self.density.max()
    }

    pub fn support(&self) -> Vec<bool> {
        let floor = self.phase_floor();
        self.density.values().iter().map(|&r| r > floor).collect()
    }

    /// Same preparation with the subsystems exchanged.
    pub fn swapped(&self) -> Self {
        let (n1, n2) = self.grid().shape();
        let grid = Grid2D::new(self.grid().second, self.grid().first);
        let transpose = |f: &Field2D| {
            let mut v = Vec::with_capacity(n1 * n2);
            for j in 0..n2 {
                for i in 0..n1 {
                    v.push(f.at(i, j));
                }
            }
            Field2D::new(grid, v).expect("transpose preserves shape")
        };
        Self {
            action: transpose(&self.action),
            density: transpose(&self.density),
            hbar: self.hbar,
            factors: self
                .factors
                .as_deref()
                .map(|(a, b)| Box::new((b.clone(), a.clone()))),
        }
    }
}

/// `S = S1(q1) + S2(q2)`, `rho = rho1(q1) rho2(q2)`.
pub fn build_product(first: &Preparation, second: &Preparation) -> Result<BipartitePreparation> {
    let (h1, h2) = (first.hbar(), second.hbar());
    if (h1 - h2).abs() > 1e-12 * h1.max(h2) {
        return Err(Error::HbarMismatch(h1, h2));
    }
    let grid = Grid2D::new(*first.grid(), *second.grid());
    let (s1, s2) = (first.action().values(), second.action().values());
    let (r1, r2) = (first.density().values(), second.density().values());
    let mut action = Vec::with_capacity(s1.len() * s2.len());
    let mut density = Vec::with_capacity(s1.len() * s2.len());
    for i in 0..s1.len() {
        for j in 0..s2.len() {
            action.push(s1[i] + s2[j]);
            density.push(r1[i] * r2[j]);
        }
    }
    let mut prep = BipartitePreparation::new(
        Field2D::new(grid, action)?,
        Field2D::new(grid, density)?,
        h1,
    )?;
    prep.factors = Some(Box::new((first.clone(), second.clone())));
    Ok(prep)
}

/// `psi = sqrt(rho) exp(i S / hbar)` sampled on a 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub re: Field1D,
    pub im: Field1D,
}

impl WaveFunction {
    pub fn grid(&self) -> &Grid1D {
        self.re.grid()
    }

    /// `|psi|^2` at every node.
    pub fn probability_density(&self) -> Field1D {
        self.re.zip_map(&self.im, |a, b| a * a + b * b)
    }

    pub fn norm_sqr(&self) -> f64 {
        integrate(&self.probability_density())
    }

    /// Phase `arg(psi)` at every node, in `(-pi, pi]`.
    pub fn arg(&self) -> Field1D {
        self.im.zip_map(&self.re, f64::atan2)
    }
}

pub fn wave_function(prep: &Preparation) -> WaveFunction {
    let hbar = prep.hbar();
    let amp = prep.density().map(f64::sqrt);
    let phase = prep.action().map(|s| s / hbar);
    WaveFunction {
        re: amp.zip_map(&phase, |a, t| a * t.cos()),
        im: amp.zip_map(&phase, |a, t| a * t.sin()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{derivative, partial_derivative, Axis};

    fn grid8() -> Grid1D {
        Grid1D::symmetric(8.0, 2049).unwrap()
    }

    #[test]
    fn gaussian_is_normalized() {
        let prep = build_gaussian(GaussianSpec::centered(0.0, 1.0), grid8(), 1.0).unwrap();
        assert!((integrate(prep.density()) - 1.0).abs() <= 1e-9);
        assert!(prep.action().max_abs() == 0.0);
    }

    #[test]
    fn linear_phase_has_constant_gradient() {
        let spec = GaussianSpec::new(2.0, 0.5, 3.0, 0.0);
        let prep = build_gaussian(spec, grid8(), 1.0).unwrap();
        let d = derivative(prep.action()).unwrap();
        assert!(d.values().iter().all(|v| (v - 3.0).abs() < 1e-10));
    }

    #[test]
    fn narrow_domain_is_rejected() {
        let g = Grid1D::symmetric(4.0, 512).unwrap();
        let err = build_gaussian(GaussianSpec::centered(0.0, 1.0), g, 1.0).unwrap_err();
        assert!(matches!(err, Error::BoundaryDecayViolated { .. }));
        // Spans 6 sigma but the edge density is still above the decay threshold.
        let g = Grid1D::symmetric(6.2, 512).unwrap();
        let err = build_gaussian(GaussianSpec::centered(0.0, 1.0), g, 1.0).unwrap_err();
        assert!(matches!(err, Error::BoundaryDecayViolated { .. }));
    }

    #[test]
    fn invalid_densities_are_rejected() {
        let g = Grid1D::symmetric(8.0, 257).unwrap();
        let s = Field1D::zeros(g);
        let bad = g.sample(|q| 2.0 * (-q * q / 2.0).exp() / (2.0 * PI).sqrt());
        assert!(matches!(
            Preparation::new(s.clone(), bad, 1.0),
            Err(Error::NotNormalized { .. })
        ));
        let mut values = g
            .sample(|q| (-q * q / 2.0).exp() / (2.0 * PI).sqrt())
            .into_values();
        values[100] = -1e-3;
        let neg = Field1D::new(g, values).unwrap();
        assert!(matches!(
            Preparation::new(s, neg, 1.0),
            Err(Error::NegativeDensity { .. })
        ));
    }

    #[test]
    fn renormalization_is_idempotent() {
        let prep = build_gaussian(
            GaussianSpec::new(0.3, 1.2, 0.5, 0.1),
            Grid1D::symmetric(10.0, 512).unwrap(),
            1.0,
        )
        .unwrap();
        let once = prep.renormalized();
        let twice = once.renormalized();
        let diff = once
            .density()
            .zip_map(twice.density(), |a, b| (a - b).abs())
            .max_abs();
        assert!(diff <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn single_term_superposition_matches_gaussian() {
        let spec = GaussianSpec::new(0.5, 1.0, 1.5, 0.3);
        let g = grid8();
        let direct = build_gaussian(spec, g, 1.0).unwrap();
        let sup = build_superposition(&[SuperpositionTerm::real(1.0, spec)], g, 1.0).unwrap();
        let support = direct.support();
        for k in 0..g.len() {
            assert!((direct.density().values()[k] - sup.density().values()[k]).abs() < 1e-14);
            if support[k] {
                let ds = direct.action().values()[k] - sup.action().values()[k];
                assert!(ds.abs() < 1e-9, "node {k}: {ds}");
            }
        }
    }

    #[test]
    fn symmetric_cat_is_real_and_even() {
        let g = Grid1D::symmetric(11.0, 2049).unwrap();
        let terms = [
            SuperpositionTerm::real(1.0, GaussianSpec::centered(-3.0, 1.0)),
            SuperpositionTerm::real(1.0, GaussianSpec::centered(3.0, 1.0)),
        ];
        let cat = build_superposition(&terms, g, 1.0).unwrap();
        assert!(cat.action().max_abs() == 0.0);
        let r = cat.density().values();
        for k in 0..g.len() {
            assert!((r[k] - r[g.len() - 1 - k]).abs() <= 1e-15);
        }
    }

    #[test]
    fn destructive_node_is_flagged() {
        let g = Grid1D::symmetric(10.0, 2049).unwrap();
        let terms = [
            SuperpositionTerm::real(1.0, GaussianSpec::centered(-3.0, 1.0)),
            SuperpositionTerm::real(-1.0, GaussianSpec::centered(3.0, 1.0)),
        ];
        let err = build_superposition(&terms, g, 1.0).unwrap_err();
        assert!(matches!(err, Error::PhaseUndefined { .. }), "{err:?}");
    }

    #[test]
    fn product_is_decomposable_and_separable() {
        let g = Grid1D::symmetric(8.0, 129).unwrap();
        let a = build_gaussian(GaussianSpec::new(0.0, 1.0, 0.4, 0.3), g, 1.0).unwrap();
        let h = Grid1D::symmetric(16.0, 161).unwrap();
        let b = build_gaussian(GaussianSpec::new(0.5, 2.0, -1.0, 0.1), h, 1.0).unwrap();
        let p = build_product(&a, &b).unwrap();
        assert!(p.is_product());
        assert!((integrate2d(p.density()) - 1.0).abs() <= 1e-8);
        for i in 0..g.len() {
            for j in 0..h.len() {
                let s = a.action().values()[i] + b.action().values()[j];
                let r = a.density().values()[i] * b.density().values()[j];
                assert_eq!(p.action().at(i, j), s);
                assert_eq!(p.density().at(i, j), r);
            }
        }
        let d1 = partial_derivative(p.action(), Axis::First).unwrap();
        for i in 0..g.len() {
            let line = d1.line(Axis::Second, i);
            let spread = line.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - line.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread <= 1e-12, "{spread}");
        }
    }

    #[test]
    fn product_rejects_mismatched_hbar() {
        let g = Grid1D::symmetric(8.0, 65).unwrap();
        let a = build_gaussian(GaussianSpec::centered(0.0, 1.0), g, 1.0).unwrap();
        let b = build_gaussian(GaussianSpec::centered(0.0, 1.0), g, 2.0).unwrap();
        assert!(matches!(
            build_product(&a, &b),
            Err(Error::HbarMismatch(..))
        ));
    }

    #[test]
    fn zero_phase_product_has_zero_action() {
        let g = Grid1D::symmetric(8.0, 65).unwrap();
        let a = build_gaussian(GaussianSpec::centered(0.0, 1.0), g, 1.0).unwrap();
        let p = build_product(&a, &a).unwrap();
        assert_eq!(p.action().max_abs(), 0.0);
    }

    #[test]
    fn born_rule_holds_by_construction() {
        let prep = build_gaussian(GaussianSpec::new(0.0, 1.0, 1.0, 0.7), grid8(), 1.0).unwrap();
        let psi = wave_function(&prep);
        let diff = psi
            .probability_density()
            .zip_map(prep.density(), |a, b| (a - b).abs())
            .max_abs();
        assert!(diff <= 1e-12);
    }

    #[test]
    fn zero_phase_wave_function_is_real() {
        let prep = build_gaussian(GaussianSpec::centered(0.0, 1.0), grid8(), 1.0).unwrap();
        let psi = wave_function(&prep);
        assert_eq!(psi.im.max_abs(), 0.0);
        let diff = psi
            .re
            .zip_map(prep.density(), |a, r| (a - r.sqrt()).abs())
            .max_abs();
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn phase_slope_matches_momentum() {
        let prep = build_gaussian(GaussianSpec::new(0.0, 1.0, 1.0, 0.0), grid8(), 1.0).unwrap();
        let arg = wave_function(&prep).arg();
        let g = prep.grid();
        let h = g.spacing();
        let support = prep.support();
        for k in 1..g.len() {
            if support[k] && support[k - 1] {
                let mut step = arg.values()[k] - arg.values()[k - 1];
                step -= 2.0 * PI * (step / (2.0 * PI)).round();
                assert!((step / h - 1.0).abs() < 1e-9);
            }
        }
    }
}
