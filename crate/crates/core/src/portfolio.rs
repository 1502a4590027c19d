//! Single risky asset portfolio model: the ansatz optimal-portfolio formula,
//! the HJB residual under the ansatz, and Monte-Carlo expected utility of
//! terminal wealth for competing policies.
//!
//! Wealth follows `dX = (r X + (μ − r) π) ds + π σ dW` with `π` the dollar
//! amount held in the risky asset. The simulator applies Euler–Maruyama to
//! discounted wealth, so the riskless part grows exactly by `e^{r dt}` per step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{require_finite, require_positive, Error, Result};
use crate::expansion::{TiedExpansion, TiedLogExpansion2D};
use crate::oracles::merton_policy;
use crate::par::Execution;
use crate::stats::mean_and_std_err;

/// Trading days per unit of time for the default step count.
pub const STEPS_PER_UNIT_TIME: f64 = 252.0;
pub const DEFAULT_WEALTH_FLOOR: f64 = 1e-12;
pub const DEFAULT_UTILITY_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    mu: f64,
    r: f64,
    sigma: f64,
    horizon: f64,
    x0: f64,
}

impl MarketParams {
    pub fn new(mu: f64, r: f64, sigma: f64, horizon: f64, x0: f64) -> Result<Self> {
        Ok(Self {
            mu: require_finite("mu", mu)?,
            r: require_finite("r", r)?,
            sigma: require_positive("sigma", sigma)?,
            horizon: require_positive("horizon", horizon)?,
            x0: require_positive("x0", x0)?,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn rates(&self) -> StepRates {
        StepRates {
            mu: self.mu,
            r: self.r,
            sigma: self.sigma,
        }
    }

    /// `ln x0 + (r + (μ − r)² / 2σ²) T`, the optimal expected log-utility.
    pub fn merton_log_value(&self) -> f64 {
        let excess = self.mu - self.r;
        self.x0.ln() + (self.r + excess * excess / (2.0 * self.sigma * self.sigma)) * self.horizon
    }

    /// `252 T` rounded, at least 1.
    pub fn default_steps(&self) -> usize {
        ((STEPS_PER_UNIT_TIME * self.horizon).round() as usize).max(1)
    }
}

/// Drift, rate and volatility in force during one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRates {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
}

/// A market whose coefficients may change from step to step.
pub trait MarketDynamics: Sync {
    fn horizon(&self) -> f64;
    fn x0(&self) -> f64;
    fn rates_at(&self, step: usize) -> StepRates;
}

impl MarketDynamics for MarketParams {
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn x0(&self) -> f64 {
        self.x0
    }
    fn rates_at(&self, _step: usize) -> StepRates {
        self.rates()
    }
}

/// Step-indexed coefficient curves; steps past the end reuse the last entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveMarket {
    horizon: f64,
    x0: f64,
    curves: Vec<StepRates>,
}

impl CurveMarket {
    pub fn new(horizon: f64, x0: f64, curves: Vec<StepRates>) -> Result<Self> {
        require_positive("horizon", horizon)?;
        require_positive("x0", x0)?;
        if curves.is_empty() {
            return Err(Error::InvalidParameter {
                name: "curves",
                value: 0.0,
                reason: "need at least one step",
            });
        }
        for s in &curves {
            require_finite("mu", s.mu)?;
            require_finite("r", s.r)?;
            require_positive("sigma", s.sigma)?;
        }
        Ok(Self { horizon, x0, curves })
    }
}

impl MarketDynamics for CurveMarket {
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn x0(&self) -> f64 {
        self.x0
    }
    fn rates_at(&self, step: usize) -> StepRates {
        self.curves[step.min(self.curves.len() - 1)]
    }
}

fn log_argument(x: f64, a3: f64) -> Result<f64> {
    let z = x + a3;
    if z > 0.0 {
        Ok(z)
    } else {
        Err(Error::Domain {
            context: "portfolio ansatz",
            argument: z,
        })
    }
}

fn optimal_pi_at(e: &TiedLogExpansion2D, rates: StepRates, x: f64) -> Result<f64> {
    let z = log_argument(x, e.a3)?;
    if e.a2 == 0.0 {
        return Err(Error::DegenerateAnsatz);
    }
    Ok(-(rates.mu - rates.r) * z * (2.0 + z.ln()) / (rates.sigma * rates.sigma))
}

/// `π* = −(μ − r)(x + a3)(2 + ln(x + a3)) / σ²`, the first-order condition of
/// the HJB with `a2` cancelled.
pub fn ansatz_optimal_pi(e: &TiedLogExpansion2D, m: &MarketParams, x: f64) -> Result<f64> {
    optimal_pi_at(e, m.rates(), x)
}

/// `−(μ − r) V_x / (σ² V_xx)` from the analytic derivatives, without cancelling `a2`.
pub fn ansatz_optimal_pi_unsimplified(e: &TiedLogExpansion2D, m: &MarketParams, x: f64) -> Result<f64> {
    let vx = e.d_dx(x)?;
    let vxx = e.d2_dx2(x)?;
    if vxx == 0.0 {
        return Err(Error::DegenerateAnsatz);
    }
    Ok(-(m.mu - m.r) * vx / (m.sigma * m.sigma * vxx))
}

/// `a3 + a2 (r x + π (μ − r))(2 + ln(x + a3)) + ½ a2 π² σ² / (x + a3)`.
///
/// `t` enters only through `V_t = a3`, which is constant.
pub fn hjb_residual(e: &TiedLogExpansion2D, m: &MarketParams, pi: f64, x: f64, _t: f64) -> Result<f64> {
    let z = log_argument(x, e.a3)?;
    let (mu, r, s) = (m.mu, m.r, m.sigma);
    Ok(e.a3 + e.a2 * (r * x + pi * (mu - r)) * (2.0 + z.ln()) + 0.5 * e.a2 * pi * pi * s * s / z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Holds the ansatz optimal portfolio at current wealth.
    Ansatz(TiedLogExpansion2D),
    /// CRRA-optimal Merton holding with risk aversion `gamma`.
    Merton { gamma: f64 },
    /// Fixed dollar amount in the risky asset.
    Constant { pi: f64 },
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Ansatz(e) => format!("ansatz(a1={};a2={};a3={})", e.a1, e.a2, e.a3),
            Policy::Merton { gamma } => format!("merton(gamma={gamma})"),
            Policy::Constant { pi } => format!("constant(pi={pi})"),
        }
    }

    /// Risky holding at wealth `x`.
    pub fn amount(&self, rates: StepRates, x: f64) -> Result<f64> {
        match *self {
            Policy::Ansatz(e) => optimal_pi_at(&e, rates, x),
            Policy::Merton { gamma } => merton_policy(rates.mu, rates.r, rates.sigma, gamma, x),
            Policy::Constant { pi } => Ok(pi),
        }
    }

    /// Ansatz policies with `a2 > 0` come from a convex value function, so
    /// their first-order condition is a minimum rather than a maximum.
    pub fn concavity_violation(&self) -> bool {
        matches!(self, Policy::Ansatz(e) if e.a2 > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Log,
    /// `ln(min(X, cap))`, bounded above.
    CappedLog { cap: f64 },
}

impl Utility {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Utility::Log => x.ln(),
            Utility::CappedLog { cap } => x.min(cap).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub utility: Utility,
    /// Wealth at or below this is treated as ruin.
    pub wealth_floor: f64,
    /// Utility assigned to ruined paths.
    pub floor_utility: f64,
    pub execution: Execution,
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
            utility: Utility::Log,
            wealth_floor: DEFAULT_WEALTH_FLOOR,
            floor_utility: DEFAULT_WEALTH_FLOOR.ln(),
            execution: Execution::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        require_positive("wealth_floor", self.wealth_floor)?;
        require_finite("floor_utility", self.floor_utility)?;
        if let Utility::CappedLog { cap } = self.utility {
            require_positive("cap", cap)?;
        }
        Ok(())
    }
}

/// Monte-Carlo estimate of expected terminal utility for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub label: String,
    pub mean: f64,
    pub std_err: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub bankrupt_paths: usize,
    /// Paths on which the policy could not be evaluated at some step (log
    /// domain or degenerate ansatz); the step then holds nothing risky.
    pub policy_violation_paths: usize,
    pub concavity_violation: bool,
}

/// Independent normal stream for `path` under `seed`: a ChaCha keystream
/// keyed by the seed, with the path index as the stream id.
pub fn path_stream(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    utility: f64,
    bankrupt: bool,
    violated: bool,
}

fn simulate_path<M: MarketDynamics>(
    market: &M,
    policies: &[Policy],
    cfg: &SimConfig,
    path: usize,
) -> Vec<PathOutcome> {
    let mut rng = path_stream(cfg.seed, path as u64);
    let dt = market.horizon() / cfg.n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut wealth = vec![market.x0(); policies.len()];
    let mut alive = vec![true; policies.len()];
    let mut violated = vec![false; policies.len()];
    for step in 0..cfg.n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let rates = market.rates_at(step);
        let growth = (rates.r * dt).exp();
        for (j, policy) in policies.iter().enumerate() {
            if !alive[j] {
                continue;
            }
            let x = wealth[j];
            let pi = policy.amount(rates, x).unwrap_or_else(|_| {
                violated[j] = true;
                0.0
            });
            let next = growth * (x + (rates.mu - rates.r) * pi * dt + pi * rates.sigma * sqrt_dt * z);
            if next <= cfg.wealth_floor || !next.is_finite() {
                alive[j] = false;
            }
            wealth[j] = next;
        }
    }
    (0..policies.len())
        .map(|j| PathOutcome {
            utility: if alive[j] {
                cfg.utility.eval(wealth[j])
            } else {
                cfg.floor_utility
            },
            bankrupt: !alive[j],
            violated: violated[j],
        })
        .collect()
}

/// Expected terminal utility of each policy under common random numbers:
/// every policy sees the same Brownian increments on a given path.
pub fn policy_tournament<M: MarketDynamics>(
    market: &M,
    policies: &[Policy],
    cfg: &SimConfig,
) -> Result<Vec<McEstimate>> {
    cfg.validate()?;
    let outcomes = cfg
        .execution
        .map_indices(cfg.n_paths, |p| simulate_path(market, policies, cfg, p));
    Ok(policies
        .iter()
        .enumerate()
        .map(|(j, policy)| {
            let utilities: Vec<f64> = outcomes.iter().map(|o| o[j].utility).collect();
            let (mean, std_err) = mean_and_std_err(&utilities);
            McEstimate {
                label: policy.label(),
                mean,
                std_err,
                n_paths: cfg.n_paths,
                n_steps: cfg.n_steps,
                seed: cfg.seed,
                bankrupt_paths: outcomes.iter().filter(|o| o[j].bankrupt).count(),
                policy_violation_paths: outcomes.iter().filter(|o| o[j].violated).count(),
                concavity_violation: policy.concavity_violation(),
            }
        })
        .collect())
}

pub fn simulate_wealth<M: MarketDynamics>(market: &M, policy: &Policy, cfg: &SimConfig) -> Result<McEstimate> {
    Ok(policy_tournament(market, std::slice::from_ref(policy), cfg)?.remove(0))
}

/// `sqrt(se_a² + se_b²)`
pub fn combined_std_err(a: &McEstimate, b: &McEstimate) -> f64 {
    a.std_err.hypot(b.std_err)
}
