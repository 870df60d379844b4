use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::series::{sum_gamma_log_density, SeriesConfig};
use super::{gamma_log_pdf_unchecked, GammaError, GammaParams};
use crate::special::ln_gamma;

/// Attempts per draw before the sampler gives up on underflowing Gammas.
pub const SAMPLE_RETRIES: usize = 100;

const HYPERPLANE_TOL: f64 = 1e-9;

/// A point `z > 0` on the hyperplane `alpha . z = d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    z: Vec<f64>,
    alpha: Vec<f64>,
    d: f64,
}

impl SimplexPoint {
    pub fn new(z: Vec<f64>, alpha: Vec<f64>, d: f64) -> Result<Self, GammaError> {
        if z.len() != alpha.len() || z.is_empty() {
            return Err(GammaError::DimensionMismatch(format!("{} coordinates, {} weights", z.len(), alpha.len())));
        }
        check_alpha_d(&alpha, d)?;
        if let Some(&bad) = z.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(GammaError::NonPositive(bad));
        }
        let residual = alpha.iter().zip(&z).map(|(a, v)| a * v).sum::<f64>() - d;
        if residual.abs() > HYPERPLANE_TOL * d {
            return Err(GammaError::OffHyperplane { residual, d });
        }
        Ok(Self { z, alpha, d })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn into_z(self) -> Vec<f64> {
        self.z
    }
}

fn check_alpha_d(alpha: &[f64], d: f64) -> Result<(), GammaError> {
    if let Some(&bad) = alpha.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(GammaError::NonPositive(bad));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(GammaError::NonPositive(d));
    }
    Ok(())
}

/// Log of the factor converting a density in the normalized coordinates
/// `u_i = alpha_i z_i / d` (Lebesgue on the first n-1 of them) into a density
/// with respect to surface measure on the hyperplane.
fn ln_surface_factor(alpha: &[f64], d: f64) -> f64 {
    let n = alpha.len() as f64;
    let ln_prod: f64 = alpha.iter().map(|a| a.ln()).sum();
    let norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    ln_prod - norm.ln() - (n - 1.0) * d.ln()
}

fn rescaled(alpha: &[f64], d: f64, params: &[GammaParams]) -> Vec<GammaParams> {
    alpha.iter().zip(params).map(|(a, p)| p.scaled(a / d)).collect()
}

/// Log-density, with respect to surface measure on the hyperplane, of
/// independent `Z_i ~ Gamma(k_i, theta_i)` conditioned on `alpha . Z = d`.
pub fn conditional_log_density(pt: &SimplexPoint, params: &[GammaParams], cfg: &SeriesConfig) -> Result<f64, GammaError> {
    let n = pt.z.len();
    if params.len() != n {
        return Err(GammaError::DimensionMismatch(format!("{n} coordinates, {} parameter pairs", params.len())));
    }
    if n == 1 {
        return Err(GammaError::DegenerateSupport);
    }
    let hat = rescaled(&pt.alpha, pt.d, params);
    let ln_kappa = sum_gamma_log_density(1.0, &hat, cfg)?;
    let ln_joint: f64 = pt
        .alpha
        .iter()
        .zip(&pt.z)
        .zip(&hat)
        .map(|((a, z), p)| gamma_log_pdf_unchecked(a * z / pt.d, *p))
        .sum();
    Ok(ln_joint - ln_kappa + ln_surface_factor(&pt.alpha, pt.d))
}

/// One draw of [`ConditionalSampler`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDraw {
    pub z: Vec<f64>,
    /// Log-density of `z` under the normalized-Gamma construction, with
    /// respect to the same surface measure as [`conditional_log_density`].
    pub proposal_log_density: f64,
    /// `conditional_log_density - proposal_log_density + ln kappa`: the
    /// importance log-ratio up to a constant shared by every draw.
    pub log_ratio: f64,
}

/// Draws points on `alpha . z = d` by normalizing independent
/// `a_i ~ Gamma(k_i, alpha_i theta_i / d)`: `z_i = d a_i / (alpha_i sum a)`.
///
/// When the rescaled scales are all equal this is exactly the conditional
/// law; otherwise draws follow a scaled Dirichlet and `log_ratio` gives the
/// importance correction.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    alpha: Vec<f64>,
    d: f64,
    shapes: Vec<f64>,
    inv_theta_hat: Vec<f64>,
    dists: Vec<Gamma<f64>>,
    total_shape: f64,
    ln_total_gamma: f64,
    ln_proposal_const: f64,
}

impl ConditionalSampler {
    pub fn new(alpha: &[f64], d: f64, params: &[GammaParams]) -> Result<Self, GammaError> {
        if alpha.len() != params.len() || alpha.is_empty() {
            return Err(GammaError::DimensionMismatch(format!("{} weights, {} parameter pairs", alpha.len(), params.len())));
        }
        check_alpha_d(alpha, d)?;
        let hat = rescaled(alpha, d, params);
        let mut dists = Vec::with_capacity(hat.len());
        for p in &hat {
            let p = GammaParams::new(p.k, p.theta)?;
            dists.push(Gamma::new(p.k, p.theta).map_err(|_| GammaError::InvalidParams { k: p.k, theta: p.theta })?);
        }
        let total_shape: f64 = hat.iter().map(|p| p.k).sum();
        let ln_total_gamma = ln_gamma(total_shape);
        let ln_proposal_const = ln_total_gamma - hat.iter().map(|p| ln_gamma(p.k) + p.k * p.theta.ln()).sum::<f64>()
            + ln_surface_factor(alpha, d);
        Ok(Self {
            alpha: alpha.to_vec(),
            d,
            shapes: hat.iter().map(|p| p.k).collect(),
            inv_theta_hat: hat.iter().map(|p| 1.0 / p.theta).collect(),
            dists,
            total_shape,
            ln_total_gamma,
            ln_proposal_const,
        })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ConditionalDraw, GammaError> {
        let n = self.alpha.len();
        if n == 1 {
            return Ok(ConditionalDraw {
                z: vec![self.d / self.alpha[0]],
                proposal_log_density: 0.0,
                log_ratio: 0.0,
            });
        }
        let mut a = vec![0.0; n];
        for _ in 0..SAMPLE_RETRIES {
            for (ai, dist) in a.iter_mut().zip(&self.dists) {
                *ai = dist.sample(rng);
            }
            if a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                continue;
            }
            let total: f64 = a.iter().sum();
            let mut z: Vec<f64> = a.iter().zip(&self.alpha).map(|(ai, al)| self.d * ai / (al * total)).collect();
            let s: f64 = z.iter().zip(&self.alpha).map(|(zi, al)| zi * al).sum();
            let fix = self.d / s;
            z.iter_mut().for_each(|v| *v *= fix);

            let mut ln_u = 0.0;
            let mut big_s = 0.0;
            for i in 0..n {
                let u = self.alpha[i] * z[i] / self.d;
                ln_u += (self.shapes[i] - 1.0) * u.ln();
                big_s += u * self.inv_theta_hat[i];
            }
            let ln_s = big_s.ln();
            return Ok(ConditionalDraw {
                z,
                proposal_log_density: self.ln_proposal_const + ln_u - self.total_shape * ln_s,
                log_ratio: self.total_shape * ln_s - big_s - self.ln_total_gamma,
            });
        }
        Err(GammaError::SamplingFailed(SAMPLE_RETRIES))
    }
}

/// Draw one point from the normalized-Gamma construction and return it with
/// its proposal log-density.
pub fn sample_conditional<R: Rng + ?Sized>(
    alpha: &[f64],
    d: f64,
    params: &[GammaParams],
    rng: &mut R,
) -> Result<(SimplexPoint, f64), GammaError> {
    let draw = ConditionalSampler::new(alpha, d, params)?.draw(rng)?;
    let pt = SimplexPoint::new(draw.z, alpha.to_vec(), d)?;
    Ok((pt, draw.proposal_log_density))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(k: f64, theta: f64) -> GammaParams {
        GammaParams::new(k, theta).unwrap()
    }

    #[test]
    fn one_dimension_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (pt, lp) = sample_conditional(&[0.5], 42.0, &[g(2.0, 3.0)], &mut rng).unwrap();
        assert_eq!(pt.z(), &[84.0]);
        assert_eq!(lp, 0.0);
        let cfg = SeriesConfig::default();
        assert_eq!(conditional_log_density(&pt, &[g(2.0, 3.0)], &cfg), Err(GammaError::DegenerateSupport));
    }

    #[test]
    fn symmetric_exponentials_are_uniform() {
        let cfg = SeriesConfig::default();
        let p = [g(1.0, 1.0), g(1.0, 1.0)];
        let a = SimplexPoint::new(vec![0.3, 0.7], vec![1.0, 1.0], 1.0).unwrap();
        let b = SimplexPoint::new(vec![0.6, 0.4], vec![1.0, 1.0], 1.0).unwrap();
        let fa = conditional_log_density(&a, &p, &cfg).unwrap();
        let fb = conditional_log_density(&b, &p, &cfg).unwrap();
        assert!((fa - fb).abs() < 1e-12);
        // Uniform on a segment of length sqrt(2).
        assert!((fa + 0.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn proposal_equals_target_when_scales_match() {
        let cfg = SeriesConfig::default();
        let alpha = [1.0, 2.0, 0.5];
        let d = 3.0;
        // alpha_i * theta_i equal, so the rescaled scales are equal.
        let p = [g(1.5, 2.0), g(2.5, 1.0), g(0.7, 4.0)];
        let s = ConditionalSampler::new(&alpha, d, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let draw = s.draw(&mut rng).unwrap();
            let pt = SimplexPoint::new(draw.z.clone(), alpha.to_vec(), d).unwrap();
            let target = conditional_log_density(&pt, &p, &cfg).unwrap();
            assert!((target - draw.proposal_log_density).abs() < 1e-9);
        }
    }

    #[test]
    fn log_ratio_matches_density_difference() {
        let cfg = SeriesConfig::default();
        let alpha = [0.4, 1.0, 0.9];
        let d = 50.0;
        let p = [g(2.0, 10.0), g(3.0, 20.0), g(1.2, 30.0)];
        let hat: Vec<_> = alpha.iter().zip(&p).map(|(a, q)| q.scaled(a / d)).collect();
        let ln_kappa = sum_gamma_log_density(1.0, &hat, &cfg).unwrap();
        let s = ConditionalSampler::new(&alpha, d, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let draw = s.draw(&mut rng).unwrap();
            let pt = SimplexPoint::new(draw.z.clone(), alpha.to_vec(), d).unwrap();
            let target = conditional_log_density(&pt, &p, &cfg).unwrap();
            let expect = target - draw.proposal_log_density + ln_kappa;
            assert!((draw.log_ratio - expect).abs() < 1e-9, "{} vs {expect}", draw.log_ratio);
        }
    }

    #[test]
    fn point_validation() {
        assert!(matches!(
            SimplexPoint::new(vec![1.0, 1.0], vec![1.0, 1.0], 3.0),
            Err(GammaError::OffHyperplane { .. })
        ));
        assert!(SimplexPoint::new(vec![0.0, 2.0], vec![1.0, 1.0], 2.0).is_err());
        assert!(SimplexPoint::new(vec![1.0], vec![1.0, 1.0], 2.0).is_err());
        assert!(ConditionalSampler::new(&[1.0, -1.0], 2.0, &[g(1.0, 1.0), g(1.0, 1.0)]).is_err());
    }
}
