//! Scenario files: TOML documents describing one preparation, one error
//! model, one `xi` law and the analyses to run on them.

use std::path::{Path, PathBuf};

use erps::estimation::{ErrorModel, Gamma, XiDistribution, XiKind};
use erps::grid::Grid1D;
use erps::preparation::{
    build_gaussian, build_product, build_superposition, import_text, BipartitePreparation,
    GaussianSpec, Preparation, SuperpositionTerm, DEFAULT_HBAR,
};
use num_complex::Complex64;
use serde::Deserialize;

pub const SCHEMA: &str = include_str!("../scenarios/SCHEMA.txt");

/// Bundled scenarios as `(name, source)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("gaussian-efficient", include_str!("../scenarios/gaussian-efficient.toml")),
    ("chirped-gaussian", include_str!("../scenarios/chirped-gaussian.toml")),
    ("cat-state", include_str!("../scenarios/cat-state.toml")),
    ("skewed-mixture", include_str!("../scenarios/skewed-mixture.toml")),
    ("lambda-violation", include_str!("../scenarios/lambda-violation.toml")),
    ("erps-sampling", include_str!("../scenarios/erps-sampling.toml")),
    ("bipartite-sampling", include_str!("../scenarios/bipartite-sampling.toml")),
    ("estimation-independence", include_str!("../scenarios/estimation-independence.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub grid: Option<GridCfg>,
    pub preparation: PreparationCfg,
    #[serde(default)]
    pub model: ModelCfg,
    #[serde(default)]
    pub xi: XiCfg,
    #[serde(default)]
    pub analyses: Analyses,
}

fn default_hbar() -> f64 {
    DEFAULT_HBAR
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub q_min: f64,
    pub q_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreparationCfg {
    Gaussian(GaussianCfg),
    Superposition {
        terms: Vec<TermCfg>,
    },
    File {
        path: PathBuf,
    },
    Product {
        first: Box<PreparationCfg>,
        second: Box<PreparationCfg>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianCfg {
    #[serde(default)]
    pub q0: f64,
    pub sigma: f64,
    #[serde(default)]
    pub p0: f64,
    #[serde(default)]
    pub chirp: f64,
}

impl GaussianCfg {
    fn spec(&self) -> GaussianSpec {
        GaussianSpec::new(self.q0, self.sigma, self.p0, self.chirp)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermCfg {
    #[serde(default = "one")]
    pub weight_re: f64,
    #[serde(default)]
    pub weight_im: f64,
    #[serde(default)]
    pub q0: f64,
    pub sigma: f64,
    #[serde(default)]
    pub p0: f64,
    #[serde(default)]
    pub chirp: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelCfg {
    #[default]
    Standard,
    GeneralGamma {
        gamma: GammaCfg,
    },
    Lambda {
        lambda: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaCfg {
    HalfXi,
    HalfCubic,
}

impl ModelCfg {
    pub fn model(self) -> ErrorModel {
        match self {
            ModelCfg::Standard => ErrorModel::Standard,
            ModelCfg::GeneralGamma { gamma: GammaCfg::HalfXi } => ErrorModel::GeneralGamma(Gamma::HalfXi),
            ModelCfg::GeneralGamma { gamma: GammaCfg::HalfCubic } => {
                ErrorModel::GeneralGamma(Gamma::HalfCubic)
            }
            ModelCfg::Lambda { lambda } => ErrorModel::LambdaModified { lambda },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiCfg {
    #[serde(default)]
    pub kind: XiKindCfg,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiKindCfg {
    #[default]
    TwoPoint,
    Gaussian,
    Uniform,
}

impl XiKindCfg {
    pub fn kind(self) -> XiKind {
        match self {
            XiKindCfg::TwoPoint => XiKind::TwoPoint,
            XiKindCfg::Gaussian => XiKind::Gaussian,
            XiKindCfg::Uniform => XiKind::Uniform,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    #[serde(default)]
    pub uncertainty: bool,
    #[serde(default)]
    pub schrodinger_robertson: bool,
    pub monte_carlo: Option<MonteCarloCfg>,
    #[serde(default)]
    pub independence_audit: bool,
    #[serde(default)]
    pub functional_checks: bool,
    pub lambda_sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloCfg {
    pub shots: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dump_shots: bool,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
}

/// Either one system or a product of two.
pub enum Built {
    Single(Preparation),
    Product(BipartitePreparation),
}

/// A validated scenario with its preparation built.
pub struct Loaded {
    pub scenario: Scenario,
    pub built: Built,
    pub model: ErrorModel,
    pub xi: XiDistribution,
}

pub fn parse(source: &str) -> Result<Scenario, String> {
    toml::from_str(source).map_err(|e| e.to_string())
}

/// Parses, applies overrides, validates and builds; `base` resolves relative file paths.
pub fn load(source: &str, base: &Path, overrides: Overrides) -> Result<Loaded, String> {
    let mut scenario = parse(source)?;
    if let Some(n) = overrides.grid_n {
        if let Some(g) = scenario.grid.as_mut() {
            g.n = n;
        }
    }
    if let (Some(seed), Some(mc)) = (overrides.seed, scenario.analyses.monte_carlo.as_mut()) {
        mc.seed = seed;
    }
    validate_name(&scenario.name)?;
    let built = match &scenario.preparation {
        PreparationCfg::Product { first, second } => {
            let a = build_single(first, &scenario, base)?;
            let b = build_single(second, &scenario, base)?;
            Built::Product(build_product(&a, &b).map_err(|e| format!("preparation: {e}"))?)
        }
        single => Built::Single(build_single(single, &scenario, base)?),
    };
    let a = &scenario.analyses;
    let is_product = matches!(built, Built::Product(_));
    if (a.independence_audit || a.functional_checks) && !is_product {
        return Err("independence_audit and functional_checks require a product preparation".into());
    }
    let model = scenario.model.model();
    if let ErrorModel::LambdaModified { lambda } = model {
        if !lambda.is_finite() {
            return Err("model.lambda must be finite".into());
        }
    }
    if a.schrodinger_robertson && !matches!(model, ErrorModel::Standard) {
        return Err("schrodinger_robertson requires the standard model".into());
    }
    if let Some(sweep) = &a.lambda_sweep {
        if sweep.is_empty() || sweep.iter().any(|l| !l.is_finite()) {
            return Err("lambda_sweep must be a non-empty list of finite numbers".into());
        }
    }
    if let Some(mc) = &a.monte_carlo {
        if mc.shots < erps::sampler::MIN_SHOTS {
            return Err(format!(
                "monte_carlo.shots must be at least {}",
                erps::sampler::MIN_SHOTS
            ));
        }
    }
    let xi = XiDistribution::new(scenario.xi.kind.kind(), scenario.hbar);
    Ok(Loaded {
        scenario,
        built,
        model,
        xi,
    })
}

fn validate_name(name: &str) -> Result<(), String> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(format!("scenario name `{name}` must be non-empty [A-Za-z0-9_-]"))
    }
}

fn build_single(cfg: &PreparationCfg, scenario: &Scenario, base: &Path) -> Result<Preparation, String> {
    let grid = || -> Result<Grid1D, String> {
        let g = scenario
            .grid
            .ok_or("a [grid] section is required for this preparation")?;
        Grid1D::new(g.q_min, g.q_max, g.n).map_err(|e| format!("grid: {e}"))
    };
    let prep = match cfg {
        PreparationCfg::Gaussian(g) => build_gaussian(g.spec(), grid()?, scenario.hbar),
        PreparationCfg::Superposition { terms } => {
            let terms: Vec<_> = terms
                .iter()
                .map(|t| {
                    SuperpositionTerm::new(
                        Complex64::new(t.weight_re, t.weight_im),
                        GaussianSpec::new(t.q0, t.sigma, t.p0, t.chirp),
                    )
                })
                .collect();
            build_superposition(&terms, grid()?, scenario.hbar)
        }
        PreparationCfg::File { path } => {
            let path = base.join(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("preparation file {}: {e}", path.display()))?;
            let prep = import_text(&text).map_err(|e| format!("preparation file: {e}"))?;
            if (prep.hbar() - scenario.hbar).abs() > 1e-12 * scenario.hbar {
                return Err(format!(
                    "preparation file has hbar = {}, scenario has {}",
                    prep.hbar(),
                    scenario.hbar
                ));
            }
            Ok(prep)
        }
        PreparationCfg::Product { .. } => return Err("product factors must be single systems".into()),
    };
    prep.map_err(|e| format!("preparation: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_scenario_loads_under_its_own_name() {
        for (name, src) in BUNDLED {
            let loaded = load(src, Path::new("."), Overrides::default())
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&loaded.scenario.name, name);
        }
    }

    #[test]
    fn overrides_apply() {
        let src = bundled("erps-sampling").unwrap();
        let o = Overrides {
            seed: Some(99),
            grid_n: Some(512),
        };
        let l = load(src, Path::new("."), o).unwrap();
        assert_eq!(l.scenario.analyses.monte_carlo.unwrap().seed, 99);
        assert_eq!(l.scenario.grid.unwrap().n, 512);
    }

    #[test]
    fn rejects_invalid_documents() {
        let cases = [
            "name = 'x'",
            "name = 'x'\n[grid]\nq_min=-8.0\nq_max=8.0\nn=256\n[preparation]\nkind='blob'",
            "name = 'x'\nbogus = 1\n[grid]\nq_min=-8.0\nq_max=8.0\nn=256\n[preparation]\nkind='gaussian'\nsigma=1.0",
            "name = 'x y'\n[grid]\nq_min=-8.0\nq_max=8.0\nn=256\n[preparation]\nkind='gaussian'\nsigma=1.0",
            "name = 'x'\n[grid]\nq_min=-3.0\nq_max=3.0\nn=256\n[preparation]\nkind='gaussian'\nsigma=1.0",
            "name = 'x'\n[grid]\nq_min=-8.0\nq_max=8.0\nn=256\n[preparation]\nkind='gaussian'\nsigma=1.0\n[analyses]\nindependence_audit=true",
        ];
        for c in cases {
            assert!(load(c, Path::new("."), Overrides::default()).is_err(), "{c}");
        }
    }
}
