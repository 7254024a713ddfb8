//! Nearest-neighbour spacing statistics of quasi-energy spectra: unfolding on
//! the circle, the GOE / two-GOE / GUE surmises, the crossover measures `eta`
//! and `eta_tilde`, border extraction and scaling-law fits.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};

/// Default minimum sample size for `eta` and `eta_tilde`.
pub const MIN_SAMPLES: usize = 100;
/// Bin width of the `eta_tilde` histogram.
pub const HIST_BIN_WIDTH: f64 = 0.1;
/// Upper edge of the `eta_tilde` histogram; larger spacings fall in the last bin.
pub const HIST_SUPPORT: f64 = 5.0;
/// Default crossover threshold for border extraction.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// Normalized nearest-neighbour spacings of a sorted spectrum on `[0, 2 pi)`,
/// including the wraparound spacing. They sum to `N`.
pub fn spacings(levels: &[f64]) -> Result<Vec<f64>> {
    let n = levels.len();
    if n == 0 {
        return Err(Error::Contract("empty spectrum".into()));
    }
    if levels.iter().any(|&l| !(0.0..TAU).contains(&l)) {
        return Err(Error::Contract(
            "quasi-energies must lie in [0, 2pi)".into(),
        ));
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("quasi-energies must be sorted".into()));
    }
    let scale = n as f64 / TAU;
    let mut s: Vec<f64> = levels.windows(2).map(|w| scale * (w[1] - w[0])).collect();
    s.push(scale * (levels[0] + TAU - levels[n - 1]));
    Ok(s)
}

/// Reference spacing laws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surmise {
    /// One time-reversal-symmetric class.
    Goe,
    /// Two independent time-reversal-symmetric classes superposed.
    Goe2,
    /// Broken time-reversal symmetry.
    Gue,
}

const GUE_A: f64 = 4.0 / PI;

impl Surmise {
    fn density_unchecked(self, s: f64) -> f64 {
        match self {
            Surmise::Goe => 0.5 * PI * s * (-PI * s * s / 4.0).exp(),
            Surmise::Goe2 => {
                let c = PI.sqrt() * s / 4.0;
                0.5 * (erfc(c) * PI * s / 4.0 * (-PI * s * s / 16.0).exp()
                    + (-PI * s * s / 8.0).exp())
            }
            Surmise::Gue => 32.0 * s * s / (PI * PI) * (-GUE_A * s * s).exp(),
        }
    }

    fn cdf_unchecked(self, s: f64) -> f64 {
        match self {
            Surmise::Goe => -(-PI * s * s / 4.0).exp_m1(),
            Surmise::Goe2 => 1.0 - erfc(PI.sqrt() * s / 4.0) * (-PI * s * s / 16.0).exp(),
            Surmise::Gue => {
                let a = GUE_A;
                32.0 / (PI * PI)
                    * (PI.sqrt() * erf(a.sqrt() * s) / (4.0 * a.powf(1.5))
                        - s * (-a * s * s).exp() / (2.0 * a))
            }
        }
    }

    pub fn density(self, s: f64) -> Result<f64> {
        check_spacing(s)?;
        Ok(self.density_unchecked(s))
    }

    pub fn cdf(self, s: f64) -> Result<f64> {
        check_spacing(s)?;
        Ok(self.cdf_unchecked(s))
    }

    /// Inverse of the distribution function, by bisection.
    pub fn quantile(self, u: f64) -> f64 {
        if self == Surmise::Goe {
            return (-4.0 / PI * (-u).ln_1p()).sqrt();
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.cdf_unchecked(hi) < u {
            hi *= 2.0;
            if hi > 64.0 {
                return hi;
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf_unchecked(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Mean density over `[lo, hi)`.
    pub fn bin_average(self, lo: f64, hi: f64) -> f64 {
        (self.cdf_unchecked(hi) - self.cdf_unchecked(lo)) / (hi - lo)
    }
}

fn check_spacing(s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "spacing must be non-negative, got {s}"
        )))
    }
}

/// First positive crossing of the two-GOE and GUE densities.
pub fn crossing_point() -> f64 {
    static S0: OnceLock<f64> = OnceLock::new();
    *S0.get_or_init(|| {
        let diff = |s: f64| Surmise::Goe2.density_unchecked(s) - Surmise::Gue.density_unchecked(s);
        let mut lo = 1e-3;
        let mut hi = lo;
        while diff(hi) > 0.0 {
            lo = hi;
            hi += 1e-3;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if diff(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Spacings pooled over realizations at one parameter point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpacingSample {
    pub s: Vec<f64>,
    pub n_q: usize,
    pub chaos: f64,
    pub epsilon: f64,
    pub rho: f64,
}

impl SpacingSample {
    pub fn new(n_q: usize, chaos: f64, epsilon: f64, rho: f64) -> Self {
        Self {
            s: Vec::new(),
            n_q,
            chaos,
            epsilon,
            rho,
        }
    }

    pub fn from_spacings(s: Vec<f64>) -> Self {
        Self {
            s,
            ..Self::default()
        }
    }

    /// Appends the unfolded spacings of one sorted spectrum.
    pub fn push_spectrum(&mut self, levels: &[f64]) -> Result<()> {
        self.s.extend(spacings(levels)?);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.s.len()
    }
}

fn check_floor(count: usize, floor: usize) -> Result<()> {
    if count < floor {
        Err(Error::Statistical {
            got: count,
            need: floor,
        })
    } else {
        Ok(())
    }
}

/// Crossover parameter: 1 for two-GOE statistics, 0 for GUE statistics.
pub fn eta(sample: &SpacingSample) -> Result<f64> {
    eta_with_floor(&sample.s, MIN_SAMPLES)
}

pub fn eta_with_floor(s: &[f64], floor: usize) -> Result<f64> {
    check_floor(s.len(), floor)?;
    let s0 = crossing_point();
    let below = s.iter().filter(|&&x| x <= s0).count() as f64 / s.len() as f64;
    let gue = Surmise::Gue.cdf_unchecked(s0);
    Ok((below - gue) / (Surmise::Goe2.cdf_unchecked(s0) - gue))
}

/// Histogram density on bins of width `HIST_BIN_WIDTH` over `[0, HIST_SUPPORT)`,
/// with the mass beyond the support added to the last bin.
pub fn spacing_histogram(s: &[f64]) -> Vec<f64> {
    let bins = (HIST_SUPPORT / HIST_BIN_WIDTH).round() as usize;
    let mut counts = vec![0usize; bins];
    for &x in s {
        let b = ((x / HIST_BIN_WIDTH) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let norm = 1.0 / (s.len().max(1) as f64 * HIST_BIN_WIDTH);
    counts.into_iter().map(|c| c as f64 * norm).collect()
}

/// Bin averages of a surmise on the `spacing_histogram` grid, last bin
/// including the tail.
pub fn surmise_histogram(kind: Surmise) -> Vec<f64> {
    let bins = (HIST_SUPPORT / HIST_BIN_WIDTH).round() as usize;
    (0..bins)
        .map(|b| {
            let lo = b as f64 * HIST_BIN_WIDTH;
            if b + 1 == bins {
                (1.0 - kind.cdf_unchecked(lo)) / HIST_BIN_WIDTH
            } else {
                kind.bin_average(lo, lo + HIST_BIN_WIDTH)
            }
        })
        .collect()
}

/// L2 distance between the spacing histogram and the GUE law.
pub fn eta_tilde(sample: &SpacingSample) -> Result<f64> {
    eta_tilde_with_floor(&sample.s, MIN_SAMPLES)
}

pub fn eta_tilde_with_floor(s: &[f64], floor: usize) -> Result<f64> {
    check_floor(s.len(), floor)?;
    static REFERENCE: OnceLock<Vec<f64>> = OnceLock::new();
    let reference = REFERENCE.get_or_init(|| surmise_histogram(Surmise::Gue));
    let sq: f64 = spacing_histogram(s)
        .iter()
        .zip(reference)
        .map(|(p, q)| (p - q).powi(2))
        .sum();
    Ok((sq * HIST_BIN_WIDTH).sqrt())
}

/// Draws `n` iid spacings from a surmise.
pub fn sample_surmise<R: Rng + ?Sized>(kind: Surmise, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| kind.quantile(rng.random::<f64>())).collect()
}

/// Spacings of the union of two independent spectra, each a renewal sequence
/// with GOE-surmise gaps, normalized to unit mean.
pub fn sample_superposed_goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    // Each sequence starts well before 0 so that it is stationary on the kept
    // range, and is long enough to cover n / 2 unit-density levels with margin.
    const BURN_IN: f64 = 50.0;
    let per_seq = n / 2 + 10 * (n as f64).sqrt() as usize + 20;
    let mut ends = [0.0f64; 2];
    let mut levels = Vec::with_capacity(2 * per_seq);
    for end in &mut ends {
        let mut x = -BURN_IN;
        for _ in 0..per_seq + BURN_IN as usize * 2 {
            if x >= 0.0 {
                levels.push(x);
            }
            x += Surmise::Goe.quantile(rng.random::<f64>());
        }
        *end = x;
    }
    let end = ends[0].min(ends[1]);
    levels.retain(|&x| x < end);
    levels.sort_by(f64::total_cmp);
    // Each sequence has unit density, so the union has density 2.
    levels
        .windows(2)
        .map(|w| 2.0 * (w[1] - w[0]))
        .take(n)
        .collect()
}

/// One point of a crossover curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub eps: f64,
    pub value: f64,
    pub stderr: f64,
    pub realizations: usize,
}

/// A statistic as a function of imperfection strength, `eps` strictly increasing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossoverCurve {
    points: Vec<CurvePoint>,
}

impl CrossoverCurve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self> {
        if points.windows(2).any(|w| w[1].eps <= w[0].eps) {
            return Err(Error::Contract(
                "curve eps values must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Builds a curve from bare `(eps, value)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(eps, value)| CurvePoint {
                    eps,
                    value,
                    stderr: 0.0,
                    realizations: 0,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Falling,
    Rising,
}

fn interpolate_crossing(points: &[CurvePoint], threshold: f64, dir: Direction) -> Option<f64> {
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let hit = match dir {
            Direction::Falling => a.value > threshold && b.value <= threshold,
            Direction::Rising => a.value < threshold && b.value >= threshold,
        };
        if !hit {
            continue;
        }
        let t = (a.value - threshold) / (a.value - b.value);
        if t >= 1.0 {
            return Some(b.eps);
        }
        if a.eps <= 0.0 {
            return Some(a.eps + t * (b.eps - a.eps));
        }
        return Some((a.eps.ln() + t * (b.eps.ln() - a.eps.ln())).exp());
    }
    None
}

/// Imperfection strength where the curve first falls through `threshold`,
/// interpolated linearly in `(ln eps, value)`.
pub fn eps_chi(curve: &CrossoverCurve, threshold: f64) -> Result<f64> {
    interpolate_crossing(&curve.points, threshold, Direction::Falling).ok_or_else(|| {
        Error::Range(format!(
            "curve never falls through {threshold} on the sampled grid; widen the eps grid"
        ))
    })
}

/// Imperfection strength where the curve first rises to `threshold`.
pub fn rising_crossing(curve: &CrossoverCurve, threshold: f64) -> Result<f64> {
    interpolate_crossing(&curve.points, threshold, Direction::Rising).ok_or_else(|| {
        Error::Range(format!(
            "curve never rises to {threshold} on the sampled grid; widen the eps grid"
        ))
    })
}

/// Imperfection strength where the mean eigenstate entropy first reaches 1.
pub fn entropy_border(curve: &CrossoverCurve) -> Result<f64> {
    rising_crossing(curve, 1.0)
}

/// Functional forms for the border as a function of the qubit count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `C 2^(-n/2) n^(-5/2)`.
    Exponential,
    /// `C n^(-5/2)`.
    Algebraic,
    /// `C 2^(b n) n^(-5/2)` with the slope `b` fitted.
    FreeExponent,
}

impl ScalingModel {
    fn fixed_slope(self) -> Option<f64> {
        match self {
            ScalingModel::Exponential => Some(-0.5),
            ScalingModel::Algebraic => Some(0.0),
            ScalingModel::FreeExponent => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub constant: f64,
    /// Base-2 exponent per qubit after removing `n^(-5/2)`.
    pub slope: f64,
    /// Standard error of the fitted slope (free-exponent model only).
    pub slope_stderr: Option<f64>,
    /// `log2(data) - log2(model)` per point.
    pub residuals: Vec<f64>,
}

impl ScalingFit {
    pub fn predict(&self, n_q: usize) -> f64 {
        let n = n_q as f64;
        self.constant * (self.slope * n).exp2() * n.powf(-2.5)
    }
}

/// Least squares in `log2` space.
pub fn fit_scaling(points: &[(usize, f64)], model: ScalingModel) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(n, e)| n == 0 || !(e > 0.0 && e.is_finite()))
    {
        return Err(Error::Fit(
            "borders must be positive and qubit counts non-zero".into(),
        ));
    }
    // y = log2(eps n^(5/2)) = log2 C + slope * n
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, e)| {
            let n = n as f64;
            (n, e.log2() + 2.5 * n.log2())
        })
        .collect();
    let m = xy.len() as f64;
    let (slope, intercept, slope_stderr) = match model.fixed_slope() {
        Some(b) => {
            let a = xy.iter().map(|&(x, y)| y - b * x).sum::<f64>() / m;
            (b, a, None)
        }
        None => {
            let xm = xy.iter().map(|p| p.0).sum::<f64>() / m;
            let ym = xy.iter().map(|p| p.1).sum::<f64>() / m;
            let sxx: f64 = xy.iter().map(|p| (p.0 - xm).powi(2)).sum();
            if sxx == 0.0 {
                return Err(Error::Fit(
                    "free-exponent fit needs distinct qubit counts".into(),
                ));
            }
            let sxy: f64 = xy.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
            let b = sxy / sxx;
            let a = ym - b * xm;
            let sse: f64 = xy.iter().map(|&(x, y)| (y - a - b * x).powi(2)).sum();
            let se = if xy.len() > 2 {
                Some((sse / (m - 2.0) / sxx).sqrt())
            } else {
                None
            };
            (b, a, se)
        }
    };
    let residuals = xy.iter().map(|&(x, y)| y - intercept - slope * x).collect();
    Ok(ScalingFit {
        model,
        constant: intercept.exp2(),
        slope,
        slope_stderr,
        residuals,
    })
}
