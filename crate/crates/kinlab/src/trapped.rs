//! Flow-invariant tubes around periodic orbits and the trapped-mass functional.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::field::{PhaseField, SupportBox, smooth_step};
use crate::flow::{FlowMap, detect_period};

/// Union of `δ`-boxes around samples of a periodic orbit, cut by the energy band `|p − p₀| ≤ δ·p₀`.
#[derive(Clone, Debug)]
pub struct TrappedRegion {
    pub centers: Vec<Vec<f64>>,
    pub delta: f64,
    pub p0: f64,
    pub period: f64,
}

/// Monte Carlo estimate with its one-sigma error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Weighted sample points of a region: `∫_K g ≈ mean(g(z_i)·w_i)`.
#[derive(Clone, Debug)]
pub struct RegionSamples {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TrappedRegion {
    /// Builds the tube from `n` samples over one period of the orbit through `z0`.
    pub fn from_orbit(fm: &FlowMap, z0: &[f64], n: usize, delta: f64, period_search: f64) -> Result<Self> {
        if n == 0 || !(delta > 0.0) {
            return Err(LabError::Sampler("need n > 0 and delta > 0".into()));
        }
        let period = detect_period(fm, z0, period_search, period_search / 400.0)?
            .ok_or_else(|| LabError::Sampler("no return to the section within the search horizon".into()))?;
        let dt = period / n as f64;
        let mut centers = Vec::with_capacity(n);
        let mut cur = z0.to_vec();
        for _ in 0..n {
            centers.push(cur.clone());
            cur = fm.integrate(dt, &cur)?;
        }
        Ok(Self { centers, delta, p0: fm.energy(z0), period })
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len() / 2
    }

    /// Phase-space volume of one `δ`-box.
    pub fn box_volume(&self) -> f64 {
        (2.0 * self.delta).powi(self.centers[0].len() as i32)
    }

    /// Number of boxes containing `z` (zero when outside the energy band).
    pub fn cover_count(&self, fm: &FlowMap, z: &[f64]) -> usize {
        if (fm.energy(z) - self.p0).abs() > self.delta * self.p0 {
            return 0;
        }
        self.centers
            .iter()
            .filter(|c| c.iter().zip(z).all(|(a, b)| (a - b).abs() <= self.delta))
            .count()
    }

    pub fn contains(&self, fm: &FlowMap, z: &[f64]) -> bool {
        self.cover_count(fm, z) > 0
    }

    /// Draws `n` points uniformly from a random box; the weights make
    /// `mean(g·w)` an unbiased estimate of `∫_K g dμ`.
    pub fn sample(&self, fm: &FlowMap, n: usize, seed: u64) -> Result<RegionSamples> {
        if n == 0 {
            return Err(LabError::Sampler("zero samples requested".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = self.centers.len() as f64 * self.box_volume();
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let c = &self.centers[rng.random_range(0..self.centers.len())];
            let z: Vec<f64> = c.iter().map(|v| v + self.delta * rng.random_range(-1.0..1.0)).collect();
            let count = self.cover_count(fm, &z);
            weights.push(if count == 0 { 0.0 } else { scale / count as f64 });
            points.push(z);
        }
        Ok(RegionSamples { points, weights })
    }
}

impl RegionSamples {
    /// `μ(K)`.
    pub fn measure(&self) -> McEstimate {
        estimate(self.weights.iter().copied())
    }
}

fn estimate(values: impl Iterator<Item = f64>) -> McEstimate {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    McEstimate { mean, stderr: (var / n).sqrt() }
}

/// `∫_K f ∘ e^{−tH_p} dμ` at each of the (increasing, nonnegative) times.
pub fn trapped_mass(f: &PhaseField, fm: &FlowMap, samples: &RegionSamples, times: &[f64]) -> Result<Vec<McEstimate>> {
    let mut per_time = vec![Vec::with_capacity(samples.points.len()); times.len()];
    let back: Vec<f64> = times.iter().map(|t| -t).collect();
    for (z, w) in samples.points.iter().zip(&samples.weights) {
        if *w == 0.0 {
            for slot in per_time.iter_mut() {
                slot.push(0.0);
            }
            continue;
        }
        let traj = fm.trajectory(&back, z)?;
        for (slot, zt) in per_time.iter_mut().zip(&traj) {
            slot.push(w * f.eval_z(zt));
        }
    }
    Ok(per_time.into_iter().map(|v| estimate(v.into_iter())).collect())
}

/// Test function equal to 1 on `|x| ≤ rx` and `|ξ| ≤ rxi`, vanishing beyond `1.05·rx`, `1.125·rxi`.
pub fn plateau_field(d: usize, rx: f64, rxi: f64) -> PhaseField {
    let (bx, bq) = (rx * 1.05, rxi * 1.125);
    let sb = SupportBox::symmetric(d, bx, bq);
    PhaseField::closed(sb, true, move |x, xi| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let q = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        smooth_step(r, rx, bx) * smooth_step(q, rxi, bq)
    })
}

/// Unit-energy phase point on the embedded equator of the glued sphere (`|x| = 1/√2`).
pub fn equator_seed(fm: &FlowMap) -> Vec<f64> {
    let d = fm.dim();
    let mut z = vec![0.0; 2 * d];
    z[0] = std::f64::consts::FRAC_1_SQRT_2;
    z[d + 1] = 1.0;
    let p = fm.energy(&z);
    z[d + 1] /= p.sqrt();
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{GluedMetricParams, MetricField, glued_sphere_metric};

    fn trap_flow() -> FlowMap {
        FlowMap::new(glued_sphere_metric(GluedMetricParams { r0: 0.75, eps: 0.1, dim: 2 }).unwrap())
    }

    #[test]
    fn tube_measure_and_initial_mass() {
        let fm = trap_flow();
        let k = TrappedRegion::from_orbit(&fm, &equator_seed(&fm), 200, 0.02, 10.0).unwrap();
        assert!((k.period - std::f64::consts::PI).abs() < 1e-8);
        let s = k.sample(&fm, 2000, 7).unwrap();
        let mu = s.measure();
        assert!(mu.mean > 0.0 && mu.stderr < 0.2 * mu.mean);
        let f = plateau_field(2, 0.9, 4.0);
        let m = trapped_mass(&f, &fm, &s, &[0.0, 10.0]).unwrap();
        assert_eq!(m[0].mean, mu.mean);
        assert!(m[1].mean >= 0.95 * mu.mean);
    }

    #[test]
    fn euclidean_control_escapes() {
        let fm = trap_flow();
        let k = TrappedRegion::from_orbit(&fm, &equator_seed(&fm), 100, 0.02, 10.0).unwrap();
        let s = k.sample(&fm, 500, 3).unwrap();
        let free = FlowMap::new(MetricField::euclidean(2).unwrap());
        let f = plateau_field(2, 0.9, 4.0);
        let m = trapped_mass(&f, &free, &s, &[50.0]).unwrap();
        assert!(m[0].mean <= 0.05 * s.measure().mean);
    }

    #[test]
    fn sampling_is_deterministic() {
        let fm = trap_flow();
        let k = TrappedRegion::from_orbit(&fm, &equator_seed(&fm), 50, 0.02, 10.0).unwrap();
        let (a, b) = (k.sample(&fm, 100, 11).unwrap(), k.sample(&fm, 100, 11).unwrap());
        assert_eq!(a.points, b.points);
        assert_eq!(a.weights, b.weights);
    }
}
