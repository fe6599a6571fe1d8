//! Test corpus and analytic oracles.
//!
//! Oracle values are computed from closed-form wave functions
//! `psi = sum_i w_i (2 pi s_i^2)^(-1/4) exp(-x_i^2 / (4 s_i^2) + i (p_i x_i + c_i x_i^2 / 2) / hbar)`
//! and their analytic derivatives, integrated with a fine trapezoid rule.
//! Nothing here calls the library's derivative or quadrature routines.

#![allow(dead_code)]

use std::f64::consts::PI;

use erps::grid::Grid1D;
use erps::preparation::{
    build_gaussian, build_product, build_superposition, BipartitePreparation, GaussianSpec,
    Preparation, SuperpositionTerm,
};
use num_complex::Complex64;

pub const HBAR: f64 = 1.0;
pub const N: usize = 2048;
const ORACLE_NODES: usize = 40_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Chirped,
    Cat,
    Skewed,
}

#[derive(Debug, Clone)]
pub struct Item {
    pub name: &'static str,
    pub family: Family,
    pub terms: Vec<(Complex64, GaussianSpec)>,
    pub half_width: f64,
}

fn g(q0: f64, sigma: f64, p0: f64, chirp: f64) -> GaussianSpec {
    GaussianSpec::new(q0, sigma, p0, chirp)
}

fn re(w: f64) -> Complex64 {
    Complex64::new(w, 0.0)
}

fn single(name: &'static str, family: Family, spec: GaussianSpec, half_width: f64) -> Item {
    Item {
        name,
        family,
        terms: vec![(re(1.0), spec)],
        half_width,
    }
}

/// Twelve preparations: three of each family.
pub fn corpus() -> Vec<Item> {
    use Family::*;
    vec![
        single("gauss-unit", Gaussian, g(0.0, 1.0, 0.0, 0.0), 8.0),
        single("gauss-narrow-moving", Gaussian, g(1.0, 0.5, 2.0, 0.0), 6.0),
        single("gauss-wide", Gaussian, g(-1.0, 2.0, -1.0, 0.0), 16.0),
        single("chirp-2", Chirped, g(0.0, 1.0, 0.0, 2.0), 8.0),
        single("chirp-neg", Chirped, g(0.5, 0.7, 1.0, -1.0), 6.0),
        single("chirp-wide", Chirped, g(0.0, 1.5, 0.0, 0.5), 12.0),
        Item {
            name: "cat-3",
            family: Cat,
            terms: vec![
                (re(1.0), g(-3.0, 1.0, 0.0, 0.0)),
                (re(1.0), g(3.0, 1.0, 0.0, 0.0)),
            ],
            half_width: 11.0,
        },
        Item {
            name: "cat-2-narrow",
            family: Cat,
            terms: vec![
                (re(1.0), g(-2.0, 0.8, 0.0, 0.0)),
                (re(1.0), g(2.0, 0.8, 0.0, 0.0)),
            ],
            half_width: 9.0,
        },
        Item {
            name: "cat-3-quadrature",
            family: Cat,
            terms: vec![
                (re(1.0), g(-3.0, 1.0, 0.0, 0.0)),
                (Complex64::new(0.0, 1.0), g(3.0, 1.0, 0.0, 0.0)),
            ],
            half_width: 11.0,
        },
        Item {
            name: "skew-a",
            family: Skewed,
            terms: vec![
                (re(1.0), g(-1.0, 1.0, 0.0, 0.0)),
                (re(0.6), g(2.0, 0.5, 0.0, 0.0)),
            ],
            half_width: 10.0,
        },
        Item {
            name: "skew-b",
            family: Skewed,
            terms: vec![
                (re(1.0), g(0.0, 1.2, 0.0, 0.0)),
                (re(0.5), g(2.5, 0.6, 0.0, 0.0)),
            ],
            half_width: 11.0,
        },
        Item {
            name: "skew-c",
            family: Skewed,
            terms: vec![
                (re(1.0), g(1.0, 0.8, 0.0, 0.0)),
                (re(0.4), g(-1.5, 1.5, 0.0, 0.0)),
            ],
            half_width: 13.0,
        },
    ]
}

pub fn item(name: &str) -> Item {
    corpus()
        .into_iter()
        .find(|i| i.name == name)
        .unwrap_or_else(|| panic!("no corpus item {name}"))
}

impl Item {
    pub fn build(&self, n: usize) -> Preparation {
        let grid = Grid1D::symmetric(self.half_width, n).unwrap();
        if self.terms.len() == 1 && self.terms[0].0 == re(1.0) {
            build_gaussian(self.terms[0].1, grid, HBAR).unwrap()
        } else {
            let terms: Vec<_> = self
                .terms
                .iter()
                .map(|&(w, s)| SuperpositionTerm::new(w, s))
                .collect();
            build_superposition(&terms, grid, HBAR).unwrap()
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian | Family::Chirped)
    }

    /// `(psi, psi')` at `q`, unnormalized.
    fn psi(&self, q: f64) -> (Complex64, Complex64) {
        let mut psi = Complex64::new(0.0, 0.0);
        let mut dpsi = Complex64::new(0.0, 0.0);
        for &(w, s) in &self.terms {
            let x = q - s.q0;
            let amp = (2.0 * PI * s.sigma * s.sigma).powf(-0.25);
            let log = Complex64::new(
                -x * x / (4.0 * s.sigma * s.sigma),
                (s.p0 * x + 0.5 * s.chirp * x * x) / HBAR,
            );
            let v = w * amp * log.exp();
            psi += v;
            dpsi += v * Complex64::new(-x / (2.0 * s.sigma * s.sigma), (s.p0 + s.chirp * x) / HBAR);
        }
        (psi, dpsi)
    }

    pub fn oracle(&self) -> Oracle {
        let (a, b) = (-self.half_width, self.half_width);
        let h = (b - a) / (ORACLE_NODES - 1) as f64;
        let pts: Vec<(f64, Complex64, Complex64)> = (0..ORACLE_NODES)
            .map(|k| {
                let q = a + h * k as f64;
                let (p, d) = self.psi(q);
                (q, p, d)
            })
            .collect();
        let trap = |f: &dyn Fn(f64, Complex64, Complex64) -> f64| {
            let mut s = 0.0;
            for (k, &(q, p, d)) in pts.iter().enumerate() {
                let w = if k == 0 || k == ORACLE_NODES - 1 {
                    0.5
                } else {
                    1.0
                };
                s += w * f(q, p, d);
            }
            s * h
        };
        let norm = trap(&|_, p, _| p.norm_sqr());
        let rho = move |p: Complex64| p.norm_sqr() / norm;
        let score = |p: Complex64, d: Complex64| 2.0 * (p.conj() * d).re / p.norm_sqr();
        let grad_s = |p: Complex64, d: Complex64| HBAR * (p.conj() * d).im / p.norm_sqr();

        let mean_q = trap(&|q, p, _| q * rho(p));
        let e_q2 = trap(&|q, p, _| (q - mean_q).powi(2) * rho(p));
        let j_q = trap(&|_, p, d| score(p, d).powi(2) * rho(p));
        let mean_pbar = trap(&|_, p, d| grad_s(p, d) * rho(p));
        let delta_p2 = trap(&|_, p, d| (grad_s(p, d) - mean_pbar).powi(2) * rho(p));
        let cov_qp = trap(&|q, p, d| (q - mean_q) * (grad_s(p, d) - mean_pbar) * rho(p));
        let p2 = HBAR * HBAR * trap(&|_, _, d| d.norm_sqr()) / norm;
        let mut c_fn = Vec::new();
        for lambda in LAMBDAS {
            c_fn.push(
                0.25 * HBAR
                    * HBAR
                    * trap(&|_, p, d| {
                        let r = rho(p);
                        score(p, d).powi(2) * (2.0 * lambda * r + lambda * lambda * r * r) * r
                    }),
            );
        }
        Oracle {
            mean_q,
            e_q2,
            j_q,
            mean_p: mean_pbar,
            delta_p2,
            cov_qp,
            sigma_p2_quantum: p2 - mean_pbar * mean_pbar,
            c: c_fn,
        }
    }
}

/// Lambda values with tabulated `C` in [`Oracle::c`].
pub const LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, -0.3];

#[derive(Debug, Clone)]
pub struct Oracle {
    pub mean_q: f64,
    pub e_q2: f64,
    pub j_q: f64,
    pub mean_p: f64,
    pub delta_p2: f64,
    pub cov_qp: f64,
    /// `<p^2> - <p>^2` with `<p^2> = hbar^2 int |psi'|^2`.
    pub sigma_p2_quantum: f64,
    pub c: Vec<f64>,
}

impl Oracle {
    pub fn e_p2(&self) -> f64 {
        0.25 * HBAR * HBAR * self.j_q
    }

    pub fn sigma_p2(&self) -> f64 {
        self.e_p2() + self.delta_p2
    }
}

/// Product preparations pairing corpus items across families.
pub fn product_corpus(n: usize) -> Vec<(String, BipartitePreparation)> {
    let pairs = [
        ("gauss-unit", "chirp-2"),
        ("gauss-narrow-moving", "cat-3"),
        ("chirp-neg", "skew-a"),
        ("cat-3-quadrature", "skew-b"),
        ("gauss-wide", "skew-c"),
        ("chirp-wide", "cat-2-narrow"),
    ];
    pairs
        .iter()
        .map(|(a, b)| {
            (
                format!("{a}x{b}"),
                build_product(&item(a).build(n), &item(b).build(n)).unwrap(),
            )
        })
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
