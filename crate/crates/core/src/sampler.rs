//! Monte Carlo realization of the phase-space law
//! `delta(p - d_q S - eps(q; xi)) rho(q) chi(xi)` and of its bipartite
//! counterpart with shared or separable `xi`.
//!
//! Shots are generated in a fixed number of chunks, each with its own
//! ChaCha stream derived from the seed, so results do not depend on the
//! thread pool. Positions are drawn by inverse CDF from the gridded density
//! with a linearly interpolated cumulative.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{estimator, score, ErrorModel, XiDistribution};
use crate::grid::Field1D;
use crate::preparation::{BipartitePreparation, Preparation};

/// Smallest shot count accepted by the samplers.
pub const MIN_SHOTS: usize = 1_000;

/// Smallest shot count accepted by [`factorizability_statistic`].
pub const MIN_FACTORIZABILITY_SHOTS: usize = 10_000;

const CHUNKS: usize = 64;

/// How `xi` is shared between the two subsystems of a bipartite shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum XiMode {
    /// One draw per shot used by both components.
    Shared,
    /// Independent draws per component.
    Separable,
}

impl XiMode {
    pub fn name(self) -> &'static str {
        match self {
            XiMode::Shared => "shared",
            XiMode::Separable => "separable",
        }
    }
}

/// One realization `(q, xi, p)`; `p_bar` is the estimator at `q`, kept so the
/// error `p - p_bar` can be recovered exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotSample<const N: usize> {
    pub q: [f64; N],
    pub xi: [f64; N],
    pub p: [f64; N],
    pub p_bar: [f64; N],
}

impl<const N: usize> ShotSample<N> {
    /// Per-component estimation error `p - p_bar`.
    pub fn error(&self) -> [f64; N] {
        std::array::from_fn(|j| self.p[j] - self.p_bar[j])
    }
}

/// A sample moment with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Distance from `expected` in units of the standard error.
    pub fn z(&self, expected: f64) -> f64 {
        (self.value - expected).abs() / self.std_error
    }

    pub fn within(&self, expected: f64, k: f64) -> bool {
        (self.value - expected).abs() <= k * self.std_error
    }
}

/// Moments of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentStats {
    pub mean_q: Estimate,
    pub mean_p: Estimate,
    pub var_q: Estimate,
    pub var_p: Estimate,
    pub cov_qp: Estimate,
}

/// Empirical statistics together with the retained shots.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats<const N: usize> {
    pub n_samples: usize,
    pub seed: u64,
    pub xi_mode: Option<XiMode>,
    pub components: [ComponentStats; N],
    /// `Cov(p_1, p_2)`; present for bipartite samples.
    pub cov_p12: Option<Estimate>,
    pub shots: Vec<ShotSample<N>>,
}

/// Gridded fields of one subsystem evaluated off-grid by linear interpolation.
struct Line {
    q_min: f64,
    h: f64,
    cdf: Vec<f64>,
    p_bar: Field1D,
    score: Field1D,
    rho: Field1D,
}

impl Line {
    fn new(prep: &Preparation) -> Result<Self> {
        let grid = *prep.grid();
        let floor = prep.phase_floor();
        if prep
            .density()
            .values()
            .iter()
            .filter(|&&r| r > floor)
            .count()
            < 2
        {
            return Err(Error::DegenerateDensity);
        }
        let h = grid.spacing();
        let rho = prep.density().values();
        let mut cdf = Vec::with_capacity(rho.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in rho.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self {
            q_min: grid.q_min(),
            h,
            cdf,
            p_bar: estimator(prep),
            score: score(prep),
            rho: prep.density().clone(),
        })
    }

    fn draw_q(&self, u: f64) -> f64 {
        let k = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let (lo, hi) = (self.cdf[k], self.cdf[k + 1]);
        let t = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
        self.q_min + self.h * (k as f64 + t)
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_bounds(n: usize) -> Vec<(usize, usize)> {
    (0..CHUNKS)
        .map(|c| (c * n / CHUNKS, (c + 1) * n / CHUNKS))
        .collect()
}

fn generate<const N: usize, F>(n: usize, seed: u64, shot: F) -> Vec<ShotSample<N>>
where
    F: Fn(&mut ChaCha8Rng) -> ShotSample<N> + Sync,
{
    let parts: Vec<Vec<ShotSample<N>>> = chunk_bounds(n)
        .into_par_iter()
        .enumerate()
        .map(|(c, (lo, hi))| {
            let mut rng = chunk_rng(seed, c);
            (lo..hi).map(|_| shot(&mut rng)).collect()
        })
        .collect();
    parts.concat()
}

/// Chunked sums in fixed chunk order.
fn chunked_sum<T: Sync, F: Fn(&T) -> f64 + Sync>(xs: &[T], f: F) -> f64 {
    let size = xs.len().div_ceil(CHUNKS).max(1);
    let parts: Vec<f64> = xs
        .par_chunks(size)
        .map(|c| c.iter().map(&f).sum::<f64>())
        .collect();
    parts.iter().sum()
}

fn mean_of<T: Sync, F: Fn(&T) -> f64 + Sync>(xs: &[T], f: F) -> Estimate {
    let n = xs.len() as f64;
    let m = chunked_sum(xs, &f) / n;
    let ss = chunked_sum(xs, |x| (f(x) - m).powi(2));
    Estimate {
        value: m,
        std_error: (ss / (n - 1.0)).sqrt() / n.sqrt(),
    }
}

/// Covariance of `f` and `g` with standard error of the centered product.
fn covariance_of<T: Sync, F, G>(xs: &[T], f: F, g: G) -> Estimate
where
    F: Fn(&T) -> f64 + Sync,
    G: Fn(&T) -> f64 + Sync,
{
    let n = xs.len() as f64;
    let mf = chunked_sum(xs, &f) / n;
    let mg = chunked_sum(xs, &g) / n;
    let prod = mean_of(xs, |x| (f(x) - mf) * (g(x) - mg));
    Estimate {
        value: prod.value * n / (n - 1.0),
        std_error: prod.std_error,
    }
}

fn component_stats<const N: usize>(shots: &[ShotSample<N>], j: usize) -> ComponentStats {
    ComponentStats {
        mean_q: mean_of(shots, |s| s.q[j]),
        mean_p: mean_of(shots, |s| s.p[j]),
        var_q: covariance_of(shots, |s| s.q[j], |s| s.q[j]),
        var_p: covariance_of(shots, |s| s.p[j], |s| s.p[j]),
        cov_qp: covariance_of(shots, |s| s.q[j], |s| s.p[j]),
    }
}

/// Evaluator of the estimator and error at arbitrary positions, matching the
/// sampler's own interpolation.
pub struct ShotModel {
    line: Line,
    model: ErrorModel,
    hbar: f64,
}

impl ShotModel {
    pub fn new(prep: &Preparation, model: ErrorModel) -> Result<Self> {
        Ok(Self {
            line: Line::new(prep)?,
            model,
            hbar: prep.hbar(),
        })
    }

    pub fn estimator_at(&self, q: f64) -> f64 {
        self.line.p_bar.interpolate(q)
    }

    pub fn error_at(&self, q: f64, xi: f64) -> f64 {
        let lambda = self.model.lambda();
        self.model.strength(xi, self.hbar)
            * self.line.score.interpolate(q)
            * (1.0 + lambda * self.line.rho.interpolate(q))
    }
}

/// Draws `n` single-system shots with `xi` from `xi_dist`.
pub fn sample_shots(
    prep: &Preparation,
    model: &ErrorModel,
    xi_dist: &XiDistribution,
    n: usize,
    seed: u64,
) -> Result<SampleStats<1>> {
    sample_with(prep, model, n, seed, |rng| xi_dist.sample(rng))
}

/// As [`sample_shots`] with `xi` held at a fixed value.
pub fn sample_shots_frozen(
    prep: &Preparation,
    model: &ErrorModel,
    xi: f64,
    n: usize,
    seed: u64,
) -> Result<SampleStats<1>> {
    sample_with(prep, model, n, seed, |_| xi)
}

fn sample_with<X>(
    prep: &Preparation,
    model: &ErrorModel,
    n: usize,
    seed: u64,
    draw_xi: X,
) -> Result<SampleStats<1>>
where
    X: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if n < MIN_SHOTS {
        return Err(Error::InsufficientSamples {
            got: n,
            min: MIN_SHOTS,
        });
    }
    let sm = ShotModel::new(prep, *model)?;
    let shots = generate(n, seed, |rng| {
        let q = sm.line.draw_q(rng.random::<f64>());
        let xi = draw_xi(rng);
        let p_bar = sm.estimator_at(q);
        ShotSample {
            q: [q],
            xi: [xi],
            p: [p_bar + sm.error_at(q, xi)],
            p_bar: [p_bar],
        }
    });
    Ok(SampleStats {
        n_samples: n,
        seed,
        xi_mode: None,
        components: [component_stats(&shots, 0)],
        cov_p12: None,
        shots,
    })
}

/// Draws `n` bipartite shots from a product preparation.
pub fn sample_bipartite(
    prep: &BipartitePreparation,
    model: &ErrorModel,
    xi_dist: &XiDistribution,
    xi_mode: XiMode,
    n: usize,
    seed: u64,
) -> Result<SampleStats<2>> {
    let (a, b) = prep.factors().ok_or(Error::NotProduct)?;
    if n < MIN_SHOTS {
        return Err(Error::InsufficientSamples {
            got: n,
            min: MIN_SHOTS,
        });
    }
    let lines = [Line::new(a)?, Line::new(b)?];
    let hbar = prep.hbar();
    let lambda = model.lambda();
    let shots = generate(n, seed, |rng| {
        let q = [
            lines[0].draw_q(rng.random::<f64>()),
            lines[1].draw_q(rng.random::<f64>()),
        ];
        let xi = match xi_mode {
            XiMode::Shared => {
                let x = xi_dist.sample(rng);
                [x, x]
            }
            XiMode::Separable => [xi_dist.sample(rng), xi_dist.sample(rng)],
        };
        let rho = lines[0].rho.interpolate(q[0]) * lines[1].rho.interpolate(q[1]);
        let p_bar = [
            lines[0].p_bar.interpolate(q[0]),
            lines[1].p_bar.interpolate(q[1]),
        ];
        let p = std::array::from_fn(|j| {
            let eps = model.strength(xi[j], hbar)
                * lines[j].score.interpolate(q[j])
                * (1.0 + lambda * rho);
            p_bar[j] + eps
        });
        ShotSample { q, xi, p, p_bar }
    });
    Ok(SampleStats {
        n_samples: n,
        seed,
        xi_mode: Some(xi_mode),
        components: [component_stats(&shots, 0), component_stats(&shots, 1)],
        cov_p12: Some(covariance_of(&shots, |s| s.p[0], |s| s.p[1])),
        shots,
    })
}

/// Maximal deviation of the joint `(eps_1, eps_2)` cell law from the product
/// of its marginals over a 4x4 sign/magnitude partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factorizability {
    pub statistic: f64,
    /// Standard error of the joint-minus-product difference at the maximizing
    /// cell under independence.
    pub std_error: f64,
    pub cell: (usize, usize),
}

impl Factorizability {
    pub fn z(&self) -> f64 {
        self.statistic / self.std_error
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Cells: negative and large, negative and small, non-negative and small,
/// non-negative and large, with "large" meaning above the median of `|eps|`.
pub fn factorizability_statistic(stats: &SampleStats<2>) -> Result<Factorizability> {
    let n = stats.shots.len();
    if n < MIN_FACTORIZABILITY_SHOTS {
        return Err(Error::InsufficientSamples {
            got: n,
            min: MIN_FACTORIZABILITY_SHOTS,
        });
    }
    let errors: Vec<[f64; 2]> = stats.shots.iter().map(ShotSample::error).collect();
    let cut: [f64; 2] =
        std::array::from_fn(|j| median(errors.iter().map(|e| e[j].abs()).collect()));
    let cell = |e: f64, m: f64| match (e < 0.0, e.abs() > m) {
        (true, true) => 0,
        (true, false) => 1,
        (false, false) => 2,
        (false, true) => 3,
    };
    let mut joint = [[0usize; 4]; 4];
    for e in &errors {
        joint[cell(e[0], cut[0])][cell(e[1], cut[1])] += 1;
    }
    let nf = n as f64;
    let pa: [f64; 4] = std::array::from_fn(|a| joint[a].iter().sum::<usize>() as f64 / nf);
    let pb: [f64; 4] =
        std::array::from_fn(|b| joint.iter().map(|r| r[b]).sum::<usize>() as f64 / nf);
    let mut best = Factorizability {
        statistic: -1.0,
        std_error: f64::NAN,
        cell: (0, 0),
    };
    for a in 0..4 {
        for b in 0..4 {
            let d = (joint[a][b] as f64 / nf - pa[a] * pb[b]).abs();
            if d > best.statistic {
                best = Factorizability {
                    statistic: d,
                    std_error: (pa[a] * pb[b] * (1.0 - pa[a]) * (1.0 - pb[b]) / nf).sqrt(),
                    cell: (a, b),
                };
            }
        }
    }
    Ok(best)
}

/// Writes retained shots as CSV: `seed, shot, q.., xi.., p..`.
///
/// Bipartite shots carry one `xi` column when shared and two when separable.
pub fn write_shots_csv<const N: usize, W: Write>(stats: &SampleStats<N>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let idx = |name: &str, j: usize| {
        if N == 1 {
            name.to_string()
        } else {
            format!("{name}{}", j + 1)
        }
    };
    let xi_cols = if stats.xi_mode == Some(XiMode::Shared) {
        1
    } else {
        N
    };
    let mut header = vec!["seed".to_string(), "shot".to_string()];
    header.extend((0..N).map(|j| idx("q", j)));
    if xi_cols == 1 {
        header.push("xi".into());
    } else {
        header.extend((0..N).map(|j| idx("xi", j)));
    }
    header.extend((0..N).map(|j| idx("p", j)));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (k, s) in stats.shots.iter().enumerate() {
        row.clear();
        row.push(stats.seed.to_string());
        row.push(k.to_string());
        row.extend(s.q.iter().map(f64::to_string));
        row.extend(s.xi[..xi_cols].iter().map(f64::to_string));
        row.extend(s.p.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::XiKind;
    use crate::grid::Grid1D;
    use crate::preparation::{build_gaussian, build_product, GaussianSpec};

    fn unit(q0: f64) -> Preparation {
        build_gaussian(
            GaussianSpec::centered(q0, 1.0),
            Grid1D::symmetric(9.0, 1024).unwrap(),
            1.0,
        )
        .unwrap()
    }

    const TWO: XiDistribution = XiDistribution {
        kind: XiKind::TwoPoint,
        hbar: 1.0,
    };

    #[test]
    fn rejects_small_runs() {
        let p = unit(0.0);
        assert!(matches!(
            sample_shots(&p, &ErrorModel::Standard, &TWO, 999, 1),
            Err(Error::InsufficientSamples { .. })
        ));
        let b = build_product(&p, &p).unwrap();
        let s =
            sample_bipartite(&b, &ErrorModel::Standard, &TWO, XiMode::Shared, 5_000, 1).unwrap();
        assert!(matches!(
            factorizability_statistic(&s),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn rejects_non_product() {
        let b = build_product(&unit(0.0), &unit(0.0)).unwrap();
        let plain =
            BipartitePreparation::new(b.action().clone(), b.density().clone(), 1.0).unwrap();
        assert!(matches!(
            sample_bipartite(
                &plain,
                &ErrorModel::Standard,
                &TWO,
                XiMode::Shared,
                2_000,
                1
            ),
            Err(Error::NotProduct)
        ));
    }

    #[test]
    fn rejects_degenerate_density() {
        let g = Grid1D::symmetric(1.0, 33).unwrap();
        let mut rho = vec![0.0; 33];
        rho[16] = 1.0 / g.quadrature_weights()[16];
        let prep = Preparation::new(Field1D::zeros(g), Field1D::new(g, rho).unwrap(), 1.0).unwrap();
        assert!(matches!(
            sample_shots(&prep, &ErrorModel::Standard, &TWO, 2_000, 1),
            Err(Error::DegenerateDensity)
        ));
    }

    #[test]
    fn shots_are_constructed_exactly() {
        let p = build_gaussian(
            GaussianSpec::new(0.2, 0.8, 1.0, 0.7),
            Grid1D::symmetric(8.0, 1024).unwrap(),
            1.0,
        )
        .unwrap();
        let model = ErrorModel::LambdaModified { lambda: 0.5 };
        let sm = ShotModel::new(&p, model).unwrap();
        let s = sample_shots(
            &p,
            &model,
            &XiDistribution::new(XiKind::Gaussian, 1.0),
            4_000,
            3,
        )
        .unwrap();
        for shot in &s.shots {
            let (q, xi) = (shot.q[0], shot.xi[0]);
            assert_eq!(shot.p_bar[0], sm.estimator_at(q));
            assert_eq!(shot.p[0], sm.estimator_at(q) + sm.error_at(q, xi));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let p = unit(0.0);
        let a = sample_shots(&p, &ErrorModel::Standard, &TWO, 10_000, 42).unwrap();
        let b = sample_shots(&p, &ErrorModel::Standard, &TWO, 10_000, 42).unwrap();
        let c = sample_shots(&p, &ErrorModel::Standard, &TWO, 10_000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.shots, c.shots);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_shots_csv(&a, &mut x).unwrap();
        write_shots_csv(&b, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn frozen_xi_gives_estimator_moments() {
        let p = build_gaussian(
            GaussianSpec::new(0.0, 1.0, 0.5, 1.5),
            Grid1D::symmetric(9.0, 1024).unwrap(),
            1.0,
        )
        .unwrap();
        let s = sample_shots_frozen(&p, &ErrorModel::Standard, 0.0, 200_000, 7).unwrap();
        let c = s.components[0];
        assert!(c.mean_p.within(0.5, 5.0), "{:?}", c.mean_p);
        assert!(c.var_p.within(1.5 * 1.5, 5.0), "{:?}", c.var_p);
    }

    #[test]
    fn csv_columns_follow_arity_and_mode() {
        let p = unit(0.0);
        let b = build_product(&p, &p).unwrap();
        let header = |s: &SampleStats<2>| {
            let mut out = Vec::new();
            write_shots_csv(s, &mut out).unwrap();
            String::from_utf8(out)
                .unwrap()
                .lines()
                .next()
                .unwrap()
                .to_string()
        };
        let shared =
            sample_bipartite(&b, &ErrorModel::Standard, &TWO, XiMode::Shared, 1_000, 1).unwrap();
        let sep =
            sample_bipartite(&b, &ErrorModel::Standard, &TWO, XiMode::Separable, 1_000, 1).unwrap();
        assert_eq!(header(&shared), "seed,shot,q1,q2,xi,p1,p2");
        assert_eq!(header(&sep), "seed,shot,q1,q2,xi1,xi2,p1,p2");
        assert!(shared.shots.iter().all(|s| s.xi[0] == s.xi[1]));
    }

    #[test]
    fn inverse_cdf_stays_in_domain() {
        let line = Line::new(&unit(0.0)).unwrap();
        for u in [0.0, 1e-300, 0.5, 1.0 - f64::EPSILON] {
            let q = line.draw_q(u);
            assert!((-9.0..=9.0).contains(&q));
        }
        assert!(line.draw_q(0.5).abs() < 1e-2);
    }
}
