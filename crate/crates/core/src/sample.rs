//! Random variate generation through the stochastic representations of the
//! BGG and BMixGNB laws.
//!
//! Several independent constructions are provided for each law so they can
//! be checked against one another:
//!
//! * BGG as a geometric sum of gammas ([`sample_bgg`]), as `(G, 1)` plus a
//!   compound Poisson sum of logarithmic-indexed gammas
//!   ([`sample_bgg_compound_poisson`]), and as a geometric sum of BGG vectors
//!   with a larger success probability ([`sample_bgg_geometric_sum`]).
//! * BMixGNB by gamma subordination to a negative binomial count
//!   ([`sample_bmixgnb`]), as NB-many Γ(α, β) summands plus an independent
//!   Γ(rα, β) ([`sample_bmixgnb_gamma_sum`]), and as `(G, 0)` plus a compound
//!   Poisson sum ([`sample_bmixgnb_compound_poisson`]).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;

use crate::bgg::{check_positive, check_probability, BggParams};
use crate::bmixgnb::BmixgnbParams;
use crate::error::{domain, Result};

/// Seeded, reproducible random stream. Distinct `stream_id`s under one seed
/// select non-overlapping ChaCha8 streams.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Uniform on (0, 1].
fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

pub(crate) fn gamma_unchecked<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if shape == 0.0 {
        return 0.0;
    }
    Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters").sample(rng)
}

fn poisson_unchecked<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda == 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("validated poisson mean").sample(rng) as u64
}

pub(crate) fn nb_unchecked<R: Rng + ?Sized>(r: f64, p: f64, rng: &mut R) -> u64 {
    if r == 0.0 {
        return 0;
    }
    // Poisson with a Γ(r, p/(1−p)) mean
    let mean = gamma_unchecked(r, p / (1.0 - p), rng);
    poisson_unchecked(mean, rng)
}

fn geometric_unchecked<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    let u = open_uniform(rng);
    1 + (u.ln() / (-p).ln_1p()).floor() as u64
}

fn logarithmic_unchecked<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    const TAIL: f64 = 1e-15;
    let q = 1.0 - p;
    let lambda = -p.ln();
    let u = rng.random::<f64>();
    let mut k = 1u64;
    let mut pk = q / lambda;
    let mut cdf = pk;
    while u > cdf && 1.0 - cdf > TAIL {
        k += 1;
        pk *= q * (k - 1) as f64 / k as f64;
        cdf += pk;
    }
    k
}

/// Γ(shape, rate) draw.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    Ok(gamma_unchecked(shape, rate, rng))
}

/// Geom(p) on {1, 2, …}: P(N = n) = p(1−p)^{n−1}.
pub fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    check_probability("geometric p", p)?;
    Ok(geometric_unchecked(p, rng))
}

/// NB(r, p) on {0, 1, …}.
pub fn sample_nb<R: Rng + ?Sized>(r: f64, p: f64, rng: &mut R) -> Result<u64> {
    check_positive("negative binomial r", r)?;
    check_probability("negative binomial p", p)?;
    Ok(nb_unchecked(r, p, rng))
}

pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    check_positive("poisson mean", lambda)?;
    Ok(poisson_unchecked(lambda, rng))
}

/// Logarithmic law P(Z = k) = (1−p)^k / (λk), λ = −ln p, by inversion.
pub fn sample_logarithmic<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    check_probability("logarithmic p", p)?;
    Ok(logarithmic_unchecked(p, rng))
}

/// How the X component of a geometric-sum draw is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumMethod {
    /// a single Γ(Nα, β) draw
    #[default]
    GammaShortcut,
    /// N separate Γ(α, β) draws added up
    LiteralSum,
}

/// BGG draw as (Σ_{i≤N} Xᵢ, N) with N ~ Geom(p), Xᵢ ~ Γ(α, β).
pub fn sample_bgg<R: Rng + ?Sized>(params: &BggParams, rng: &mut R) -> (f64, u64) {
    sample_bgg_with(params, SumMethod::GammaShortcut, rng)
}

pub fn sample_bgg_with<R: Rng + ?Sized>(
    params: &BggParams,
    method: SumMethod,
    rng: &mut R,
) -> (f64, u64) {
    let n = geometric_unchecked(params.p(), rng);
    let x = match method {
        SumMethod::GammaShortcut => gamma_unchecked(n as f64 * params.alpha(), params.beta(), rng),
        SumMethod::LiteralSum => {
            (0..n).map(|_| gamma_unchecked(params.alpha(), params.beta(), rng)).sum()
        }
    };
    (x, n)
}

/// BGG draw as (G, 1) + Σ_{i≤Q} (Gᵢ, Zᵢ), Q ~ Poisson(−ln p), Zᵢ logarithmic, Gᵢ | Zᵢ ~ Γ(αZᵢ, β).
pub fn sample_bgg_compound_poisson<R: Rng + ?Sized>(params: &BggParams, rng: &mut R) -> (f64, u64) {
    let (beta, alpha, p) = (params.beta(), params.alpha(), params.p());
    let mut x = gamma_unchecked(alpha, beta, rng);
    let mut n = 1u64;
    let jumps = poisson_unchecked(-p.ln(), rng);
    for _ in 0..jumps {
        let z = logarithmic_unchecked(p, rng);
        x += gamma_unchecked(alpha * z as f64, beta, rng);
        n += z;
    }
    (x, n)
}

/// Componentwise sum of M ~ Geom(q) iid BGG(β, α, p) draws; distributed BGG(β, α, pq).
pub fn sample_bgg_geometric_sum<R: Rng + ?Sized>(
    q: f64,
    inner: &BggParams,
    rng: &mut R,
) -> Result<(f64, u64)> {
    check_probability("outer geometric q", q)?;
    let m = geometric_unchecked(q, rng);
    let mut acc = (0.0, 0u64);
    for _ in 0..m {
        let (x, n) = sample_bgg(inner, rng);
        acc.0 += x;
        acc.1 += n;
    }
    Ok(acc)
}

/// BMixGNB draw (G(r + NB(r)), NB(r)): M ~ NB(r, p), Y | M ~ Γ(α(r+M), β).
pub fn sample_bmixgnb<R: Rng + ?Sized>(params: &BmixgnbParams, rng: &mut R) -> (f64, u64) {
    let m = nb_unchecked(params.r(), params.p(), rng);
    let y = gamma_unchecked(params.alpha() * (params.r() + m as f64), params.beta(), rng);
    (y, m)
}

/// BMixGNB draw as (Σ_{i≤T} Xᵢ + G, T) with T ~ NB(r, p), Xᵢ ~ Γ(α, β), G ~ Γ(rα, β).
pub fn sample_bmixgnb_gamma_sum<R: Rng + ?Sized>(params: &BmixgnbParams, rng: &mut R) -> (f64, u64) {
    let (beta, alpha) = (params.beta(), params.alpha());
    let t = nb_unchecked(params.r(), params.p(), rng);
    let mut y = gamma_unchecked(params.r() * alpha, beta, rng);
    for _ in 0..t {
        y += gamma_unchecked(alpha, beta, rng);
    }
    (y, t)
}

/// BMixGNB draw as (G, 0) + Σ_{i≤Q} (Gᵢ, Zᵢ) with G ~ Γ(αr, β) and Q ~ Poisson(−r ln p).
pub fn sample_bmixgnb_compound_poisson<R: Rng + ?Sized>(
    params: &BmixgnbParams,
    rng: &mut R,
) -> (f64, u64) {
    let (beta, alpha, p, r) = (params.beta(), params.alpha(), params.p(), params.r());
    let mut y = gamma_unchecked(alpha * r, beta, rng);
    let mut m = 0u64;
    for _ in 0..poisson_unchecked(-r * p.ln(), rng) {
        let z = logarithmic_unchecked(p, rng);
        y += gamma_unchecked(alpha * z as f64, beta, rng);
        m += z;
    }
    (y, m)
}

/// Time-changed draw (G(r + NB_p(r + NB̃_q(r))), NB_p(r + NB̃_q(r))) at fixed r.
///
/// The count is negative binomial with p* = pq/(1−p+pq), so the pair is
/// BMixGNB(β, α, p*, r).
pub fn sample_time_changed_bmixgnb<R: Rng + ?Sized>(
    params: &BmixgnbParams,
    q: f64,
    rng: &mut R,
) -> Result<(f64, u64)> {
    check_probability("time-change q", q)?;
    let r = params.r();
    let clock = nb_unchecked(r, q, rng);
    let m = nb_unchecked(r + clock as f64, params.p(), rng);
    let y = gamma_unchecked(params.alpha() * (r + m as f64), params.beta(), rng);
    Ok((y, m))
}

/// `n` draws from `draw`, collected into parallel vectors.
pub fn collect_pairs<F>(n: usize, mut draw: F) -> (Vec<f64>, Vec<u64>)
where
    F: FnMut() -> (f64, u64),
{
    let mut xs = Vec::with_capacity(n);
    let mut ns = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, k) = draw();
        xs.push(x);
        ns.push(k);
    }
    (xs, ns)
}

/// Draws per block in [`par_collect_pairs`].
pub const PAR_BLOCK: usize = 4096;

/// `n` draws computed in parallel. Block `b` of [`PAR_BLOCK`] draws uses
/// stream `b` of `seed`, so the output depends on `(seed, n)` only and not
/// on the number of threads.
pub fn par_collect_pairs<F>(n: usize, seed: u64, draw: F) -> (Vec<f64>, Vec<u64>)
where
    F: Fn(&mut RandomStream) -> (f64, u64) + Sync,
{
    let blocks = n.div_ceil(PAR_BLOCK);
    let parts: Vec<Vec<(f64, u64)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = RandomStream::new(seed, b as u64);
            let len = PAR_BLOCK.min(n - b * PAR_BLOCK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().unzip()
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(domain("time grid must be nonempty"));
    }
    if !(times[0] >= 0.0) || !times[0].is_finite() {
        return Err(domain(format!("first grid time must be nonnegative, got {}", times[0])));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(domain(format!("time grid must be strictly increasing ({} then {})", w[0], w[1])));
        }
    }
    Ok(())
}
