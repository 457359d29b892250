//! Dressing chains: iterated Darboux transforms from a stack of seeds.
//!
//! The n-th eigenfunction is the Wronskian ratio `W_{n+1}/W_n` of the seed
//! waves, so `sigma_n = (log W_{n+1})' - (log W_n)'` and
//! `u_n = -2 (log W_n)''` in the chain frame `b3 = 1, a2 = -1, a1 = 0,
//! beta = 0`. Everything is evaluated analytically; the chain recursion is
//! then re-checked on the grid with stencils, and the spectral first
//! integral is evaluated for x-independence.

use num_complex::Complex64;

use super::expsum::{wronskian, ExpSum};
use super::grid::{dt1, dx1, require_interior, Field2D};
use super::{DressConfig, DressingError, GridSpec, SeedWave};

/// Which sign layout of the chain recursion to evaluate.
///
/// The recursion `sigma_{n+1,t} - sigma_{n,t} = +-(sigma_{n+1}^2 +
/// sigma_{n+1}')' -+ (sigma_n^2 - sigma_n')'` circulates with ambiguous
/// signs; all three readings are computed side by side. `Derived` is the one
/// that follows from the Miura identity and the chain shift, and the one the
/// numbers vanish for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecursionVariant {
    /// `s_{n+1,t} - s_{n,t} - (s_{n+1}^2 + s_{n+1}')' + (s_n^2 - s_n')'`
    AsPrinted,
    /// `s_{n+1,t} - s_{n,t} - (s_{n+1}^2 + s_{n+1}')' + (s_n^2 + s_n')'`
    SymmetricInner,
    /// `s_{n+1,t} - s_{n,t} + (s_{n+1}^2 + s_{n+1}')' - (s_n^2 - s_n')'`
    Derived,
}

impl RecursionVariant {
    pub const ALL: [RecursionVariant; 3] = [
        RecursionVariant::AsPrinted,
        RecursionVariant::SymmetricInner,
        RecursionVariant::Derived,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RecursionVariant::AsPrinted => "as_printed",
            RecursionVariant::SymmetricInner => "symmetric_inner",
            RecursionVariant::Derived => "derived",
        }
    }
}

/// First-integral evaluation: the spectral combination
/// `sigma^3 + 3 sigma' sigma + sigma'' + b sigma + G(u)` on chain data.
#[derive(Clone, Debug)]
pub struct FirstIntegralReport {
    /// Max over t of (max - min along x), for the covariant G sign.
    pub x_variation: f64,
    /// Same for the flipped sign of the u' term.
    pub x_variation_flipped: f64,
    /// Mean value of the combination for the covariant sign.
    pub value: f64,
    /// The spectral constant of the eigenfunction the level was built from.
    pub lambda: f64,
}

/// One level of the dressing chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub n: usize,
    pub sigma: Field2D,
    pub u: Field2D,
    pub first_integral: FirstIntegralReport,
    w_lo: ExpSum,
    w_hi: ExpSum,
}

/// Per-step record: recursion residuals for all sign variants.
#[derive(Clone, Debug)]
pub struct ChainRecord {
    pub n: usize,
    pub residuals: Vec<(&'static str, f64)>,
    pub first_integral: FirstIntegralReport,
}

/// A chain plan: configuration, grid and the seed stack.
pub struct DressingChain {
    pub cfg: DressConfig,
    pub grid: GridSpec,
    pub seeds: Vec<SeedWave>,
}

fn log_d1(w: &ExpSum, x: f64, t: f64) -> Result<Complex64, DressingError> {
    let v = w.eval(x, t);
    if v.norm() <= 1e-12 * w.scale_at(x, t) {
        return Err(DressingError::EigenfunctionSingular { x, t });
    }
    Ok(w.d_x().eval(x, t) / v)
}

fn log_d2(w: &ExpSum, x: f64, t: f64) -> Result<Complex64, DressingError> {
    let v = w.eval(x, t);
    if v.norm() <= 1e-12 * w.scale_at(x, t) {
        return Err(DressingError::EigenfunctionSingular { x, t });
    }
    let d1 = w.d_x().eval(x, t) / v;
    Ok(w.d_x_n(2).eval(x, t) / v - d1 * d1)
}

fn log_d3(w: &ExpSum, x: f64, t: f64) -> Result<Complex64, DressingError> {
    let v = w.eval(x, t);
    if v.norm() <= 1e-12 * w.scale_at(x, t) {
        return Err(DressingError::EigenfunctionSingular { x, t });
    }
    let r1 = w.d_x().eval(x, t) / v;
    let r2 = w.d_x_n(2).eval(x, t) / v;
    let r3 = w.d_x_n(3).eval(x, t) / v;
    Ok(r3 - 3.0 * r2 * r1 + 2.0 * r1 * r1 * r1)
}

/// d/dt d/dx log W, analytically.
fn log_dxdt(w: &ExpSum, x: f64, t: f64) -> Result<Complex64, DressingError> {
    let v = w.eval(x, t);
    if v.norm() <= 1e-12 * w.scale_at(x, t) {
        return Err(DressingError::EigenfunctionSingular { x, t });
    }
    let wx = w.d_x().eval(x, t);
    let wt = w.d_t().eval(x, t);
    let wxt = w.d_x().d_t().eval(x, t);
    Ok(wxt / v - wx * wt / (v * v))
}

impl DressingChain {
    pub fn new(
        cfg: DressConfig,
        grid: GridSpec,
        seeds: Vec<SeedWave>,
    ) -> Result<Self, DressingError> {
        cfg.validate()?;
        if cfg.b3 != 1.0 || cfg.a2 != -1.0 || cfg.a1 != 0.0 || cfg.beta != 0.0 {
            return Err(DressingError::InconsistentConfig(
                "the chain frame requires b3 = 1, a2 = -1, a1 = 0, beta = 0".into(),
            ));
        }
        if seeds.is_empty() {
            return Err(DressingError::InconsistentConfig("chain needs at least one seed".into()));
        }
        for w in seeds.windows(2) {
            if (w[0].lambda - w[1].lambda).abs() < 1e-12 {
                return Err(DressingError::InconsistentConfig(
                    "chain seeds must carry distinct spectral constants".into(),
                ));
            }
        }
        Ok(DressingChain { cfg, grid, seeds })
    }

    fn wronskian_level(&self, n: usize) -> ExpSum {
        let waves: Vec<ExpSum> = self.seeds[..n].iter().map(|s| s.wave().clone()).collect();
        wronskian(&waves)
    }

    /// Level-0 state: zero potential, sigma built from the first seed.
    pub fn initial(&self) -> Result<ChainState, DressingError> {
        self.state_at(0)
    }

    fn state_at(&self, n: usize) -> Result<ChainState, DressingError> {
        let w_lo = self.wronskian_level(n);
        let w_hi = self.wronskian_level(n + 1);
        let mut failure = None;
        let sigma = self.grid.sample(|x, t| {
            match (log_d1(&w_hi, x, t), log_d1(&w_lo, x, t)) {
                (Ok(a), Ok(b)) => (a - b).re,
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let mut failure = None;
        let u = self.grid.sample(|x, t| match log_d2(&w_lo, x, t) {
            Ok(v) => -2.0 * v.re,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let first_integral = self.first_integral(n, &w_lo, &w_hi)?;
        Ok(ChainState { n, sigma, u, first_integral, w_lo, w_hi })
    }

    /// The spectral combination on level-n data, for both signs of the
    /// u'-term; the covariant sign is the one reported as `value`.
    fn first_integral(
        &self,
        n: usize,
        w_lo: &ExpSum,
        w_hi: &ExpSum,
    ) -> Result<FirstIntegralReport, DressingError> {
        let alpha = self.cfg.alpha;
        let lambda = self.seeds[n].lambda;
        let mut rows_min = vec![f64::INFINITY; 2];
        let mut rows_max = vec![f64::NEG_INFINITY; 2];
        let mut x_var = [0.0f64; 2];
        let mut sum = 0.0;
        let mut count = 0usize;
        let g = &self.grid;
        for it in 0..g.nt {
            let t = g.t0 + it as f64 * g.dt();
            for v in rows_min.iter_mut() {
                *v = f64::INFINITY;
            }
            for v in rows_max.iter_mut() {
                *v = f64::NEG_INFINITY;
            }
            for ix in 0..g.nx {
                let x = g.x0 + ix as f64 * g.dx();
                let s = (log_d1(w_hi, x, t)? - log_d1(w_lo, x, t)?).re;
                let sp = (log_d2(w_hi, x, t)? - log_d2(w_lo, x, t)?).re;
                let spp = (log_d3(w_hi, x, t)? - log_d3(w_lo, x, t)?).re;
                let u = -2.0 * log_d2(w_lo, x, t)?.re;
                let up = -2.0 * log_d3(w_lo, x, t)?.re;
                let iut = -2.0 * log_dxdt(w_lo, x, t)?.re;
                let b = -1.5 * u + alpha;
                let core = s * s * s + 3.0 * sp * s + spp + b * s;
                let g_cov = -0.75 * up + 0.75 * iut;
                let g_flip = 0.75 * up + 0.75 * iut;
                let f_cov = core + g_cov;
                let f_flip = core + g_flip;
                rows_min[0] = rows_min[0].min(f_cov);
                rows_max[0] = rows_max[0].max(f_cov);
                rows_min[1] = rows_min[1].min(f_flip);
                rows_max[1] = rows_max[1].max(f_flip);
                sum += f_cov;
                count += 1;
            }
            x_var[0] = x_var[0].max(rows_max[0] - rows_min[0]);
            x_var[1] = x_var[1].max(rows_max[1] - rows_min[1]);
        }
        Ok(FirstIntegralReport {
            x_variation: x_var[0],
            x_variation_flipped: x_var[1],
            value: sum / count as f64,
            lambda,
        })
    }

    /// Advance one level: consume the next seed, record the recursion
    /// residuals between levels n and n+1.
    pub fn step(&self, state: &ChainState) -> Result<(ChainState, ChainRecord), DressingError> {
        let n = state.n;
        if n + 1 >= self.seeds.len() {
            return Err(DressingError::InconsistentConfig(format!(
                "chain step {} needs seed {}, but only {} seeds are available",
                n + 1,
                n + 1,
                self.seeds.len()
            )));
        }
        let next = self.state_at(n + 1)?;
        let residuals = RecursionVariant::ALL
            .iter()
            .map(|v| (v.name(), recursion_residual(&state.sigma, &next.sigma, *v).unwrap_or(f64::NAN)))
            .collect();
        let record = ChainRecord {
            n,
            residuals,
            first_integral: next.first_integral.clone(),
        };
        Ok((next, record))
    }

    /// Run `steps` chain steps from the zero-seed start.
    pub fn run(&self, steps: usize) -> Result<(Vec<ChainState>, Vec<ChainRecord>), DressingError> {
        let mut states = vec![self.initial()?];
        let mut records = Vec::new();
        for _ in 0..steps {
            let (next, rec) = self.step(states.last().unwrap())?;
            states.push(next);
            records.push(rec);
        }
        Ok((states, records))
    }
}

/// Stencil residual of the chain recursion between consecutive levels.
pub fn recursion_residual(
    sigma_n: &Field2D,
    sigma_n1: &Field2D,
    variant: RecursionVariant,
) -> Result<f64, DressingError> {
    require_interior(sigma_n, 4, 1)?;
    let nx = sigma_n.nx;
    let nt = sigma_n.nt;
    // inner combinations on the full grid (x-margin 2), outer derivative adds 2
    let mut plus_hi = Field2D::new(nx, nt, sigma_n.x0, sigma_n.dx, sigma_n.t0, sigma_n.dt);
    let mut plus_lo = plus_hi.clone();
    let mut minus_lo = plus_hi.clone();
    for it in 0..nt {
        for ix in 2..nx - 2 {
            let s1 = sigma_n1.get(ix, it);
            let s0 = sigma_n.get(ix, it);
            let s1p = dx1(sigma_n1, ix, it);
            let s0p = dx1(sigma_n, ix, it);
            plus_hi.set(ix, it, s1 * s1 + s1p);
            plus_lo.set(ix, it, s0 * s0 + s0p);
            minus_lo.set(ix, it, s0 * s0 - s0p);
        }
    }
    let mut max_abs: f64 = 0.0;
    for it in 1..nt - 1 {
        for ix in 4..nx - 4 {
            let dts = dt1(sigma_n1, ix, it) - dt1(sigma_n, ix, it);
            let r = match variant {
                RecursionVariant::AsPrinted => {
                    dts - dx1(&plus_hi, ix, it) + dx1(&minus_lo, ix, it)
                }
                RecursionVariant::SymmetricInner => {
                    dts - dx1(&plus_hi, ix, it) + dx1(&plus_lo, ix, it)
                }
                RecursionVariant::Derived => {
                    dts + dx1(&plus_hi, ix, it) - dx1(&minus_lo, ix, it)
                }
            };
            max_abs = max_abs.max(r.abs());
        }
    }
    Ok(max_abs)
}
