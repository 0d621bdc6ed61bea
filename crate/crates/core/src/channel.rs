//! Per-slot link realizations: log-distance pathloss, block fading, thermal
//! noise and the resulting Shannon rate over one slot.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Small-scale fading of a hop. Gains are normalized to unit mean so that the
/// link budget alone sets the average SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    Rayleigh,
    Rician { k_db: f64 },
}

impl FadingModel {
    pub fn rician(k_db: f64) -> Result<Self> {
        let model = FadingModel::Rician { k_db };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FadingModel::Rayleigh => Ok(()),
            FadingModel::Rician { k_db } if k_db.is_finite() => Ok(()),
            FadingModel::Rician { k_db } => {
                Err(Error::domain(format!("Rician K factor must be finite, got {k_db} dB")))
            }
        }
    }

    /// Draws one power gain `|h|^2`.
    pub fn draw_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            FadingModel::Rayleigh => Exp1.sample(rng),
            FadingModel::Rician { k_db } => {
                let k = db_to_linear(k_db);
                let los = (k / (k + 1.0)).sqrt();
                // Each quadrature of the scattered part carries half of 1/(k+1).
                let sigma = (0.5 / (k + 1.0)).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let (x, y) = (los + sigma * re, sigma * im);
                x * x + y * y
            }
        }
    }
}

pub fn draw_fading_gain<R: Rng + ?Sized>(model: FadingModel, rng: &mut R) -> f64 {
    model.draw_gain(rng)
}

/// Large-scale budget of one hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub distance_m: f64,
    /// Pathloss at 1 km.
    pub pathloss_a_db: f64,
    /// Pathloss slope per decade of distance in km.
    pub pathloss_b: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::domain(format!(
                "distance must be positive, got {} m",
                self.distance_m
            )));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::domain(format!(
                "bandwidth must be positive, got {} Hz",
                self.bandwidth_hz
            )));
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("pathloss_a_db", self.pathloss_a_db),
            ("pathloss_b", self.pathloss_b),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Average SNR in dB before fading.
    pub fn mean_snr_db(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.tx_power_dbm
            - pathloss_db(self)?
            - noise_power_dbm(self.noise_psd_dbm_hz, self.bandwidth_hz)?)
    }
}

/// `A + B log10(d / 1 km)`.
pub fn pathloss_db(budget: &LinkBudget) -> Result<f64> {
    if !(budget.distance_m > 0.0) {
        return Err(Error::domain(format!(
            "distance must be positive, got {} m",
            budget.distance_m
        )));
    }
    Ok(budget.pathloss_a_db + budget.pathloss_b * (budget.distance_m / 1000.0).log10())
}

pub fn noise_power_dbm(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::domain(format!(
            "bandwidth must be positive, got {bandwidth_hz} Hz"
        )));
    }
    Ok(noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10())
}

/// State of one hop during one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRealization {
    pub gain_linear: f64,
    pub snr_linear: f64,
    /// Bits the hop could carry if it used the whole slot.
    pub rate_bits_full_slot: f64,
}

impl LinkRealization {
    pub fn from_snr(snr_linear: f64, gain_linear: f64, bandwidth_hz: f64, slot_duration_s: f64) -> Self {
        Self {
            gain_linear,
            snr_linear,
            rate_bits_full_slot: bandwidth_hz * slot_duration_s * (1.0 + snr_linear).log2(),
        }
    }
}

/// A hop's budget together with its fading law. Precomputes the mean SNR so
/// per-slot realization is a gain draw and a log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    budget: LinkBudget,
    model: FadingModel,
    mean_snr_linear: f64,
    slot_duration_s: f64,
}

impl Link {
    pub fn new(budget: LinkBudget, model: FadingModel, slot_duration_s: f64) -> Result<Self> {
        model.validate()?;
        if !(slot_duration_s > 0.0) {
            return Err(Error::domain("slot duration must be positive"));
        }
        let mean_snr_linear = db_to_linear(budget.mean_snr_db()?);
        Ok(Self {
            budget,
            model,
            mean_snr_linear,
            slot_duration_s,
        })
    }

    pub fn mean_snr_linear(&self) -> f64 {
        self.mean_snr_linear
    }

    pub fn realize_with_gain(&self, gain_linear: f64) -> LinkRealization {
        LinkRealization::from_snr(
            self.mean_snr_linear * gain_linear,
            gain_linear,
            self.budget.bandwidth_hz,
            self.slot_duration_s,
        )
    }

    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> LinkRealization {
        self.realize_with_gain(self.model.draw_gain(rng))
    }
}

pub fn realize_link<R: Rng + ?Sized>(
    budget: &LinkBudget,
    model: FadingModel,
    slot_duration_s: f64,
    rng: &mut R,
) -> Result<LinkRealization> {
    Ok(Link::new(*budget, model, slot_duration_s)?.realize(rng))
}

/// Two-state hop condition of the Bernoulli model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HopState {
    Good,
    Bad,
}

impl HopState {
    pub fn is_good(self) -> bool {
        self == HopState::Good
    }
}

pub fn bernoulli_realize<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<HopState> {
    check_probability("p", p)?;
    Ok(bernoulli_draw(p, rng))
}

/// Unchecked draw for callers that validated `p` up front.
pub(crate) fn bernoulli_draw<R: Rng + ?Sized>(p: f64, rng: &mut R) -> HopState {
    if rng.random::<f64>() < p {
        HopState::Good
    } else {
        HopState::Bad
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn budget(a: f64, b: f64, d: f64) -> LinkBudget {
        LinkBudget {
            tx_power_dbm: 0.0,
            distance_m: d,
            pathloss_a_db: a,
            pathloss_b: b,
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 180_000.0,
        }
    }

    #[test]
    fn pathloss_examples() {
        assert_abs_diff_eq!(pathloss_db(&budget(103.8, 20.9, 1000.0)).unwrap(), 103.8, epsilon = 1e-12);
        assert_abs_diff_eq!(
            pathloss_db(&budget(100.7, 23.5, 500.0)).unwrap(),
            100.7 + 23.5 * 0.5f64.log10(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(pathloss_db(&budget(100.7, 23.5, 500.0)).unwrap(), 93.626, epsilon = 1e-3);
        assert_abs_diff_eq!(pathloss_db(&budget(103.8, 20.9, 100.0)).unwrap(), 82.9, epsilon = 1e-12);
        assert!(pathloss_db(&budget(103.8, 20.9, 0.0)).is_err());
        assert!(pathloss_db(&budget(103.8, 20.9, -5.0)).is_err());
    }

    #[test]
    fn noise_examples() {
        assert_abs_diff_eq!(noise_power_dbm(-174.0, 180_000.0).unwrap(), -121.447, epsilon = 1e-3);
        assert_abs_diff_eq!(noise_power_dbm(-174.0, 1.0).unwrap(), -174.0, epsilon = 1e-12);
        assert_abs_diff_eq!(noise_power_dbm(0.0, 1000.0).unwrap(), 30.0, epsilon = 1e-12);
        assert!(noise_power_dbm(-174.0, 0.0).is_err());
    }

    #[test]
    fn rate_examples() {
        let w = 180_000.0;
        let t = 1e-3;
        assert_eq!(LinkRealization::from_snr(0.0, 0.0, w, t).rate_bits_full_slot, 0.0);
        assert_abs_diff_eq!(LinkRealization::from_snr(1.0, 1.0, w, t).rate_bits_full_slot, 180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(LinkRealization::from_snr(3.0, 1.0, w, t).rate_bits_full_slot, 360.0, epsilon = 1e-9);

        let link = Link::new(budget(100.7, 23.5, 500.0), FadingModel::Rayleigh, t).unwrap();
        assert_eq!(link.realize_with_gain(0.0).rate_bits_full_slot, 0.0);
    }

    #[test]
    fn realize_uses_budget_snr() {
        let mut b = budget(100.0, 20.0, 1000.0);
        b.tx_power_dbm = -21.447_274_948_966_94;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Mean SNR 0 dB; pure LOS gain is 1.
        let r = realize_link(&b, FadingModel::rician(300.0).unwrap(), 1e-3, &mut rng).unwrap();
        assert_abs_diff_eq!(r.snr_linear, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.rate_bits_full_slot, 180.0, epsilon = 1e-6);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(FadingModel::rician(f64::INFINITY).is_err());
        assert!(FadingModel::rician(f64::NAN).is_err());
        assert!(Link::new(budget(100.0, 20.0, 1.0), FadingModel::Rayleigh, 0.0).is_err());
        let mut b = budget(100.0, 20.0, 1.0);
        b.bandwidth_hz = -1.0;
        assert!(Link::new(b, FadingModel::Rayleigh, 1e-3).is_err());
    }

    #[test]
    fn strong_los_gain_is_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = FadingModel::rician(300.0).unwrap();
        for _ in 0..1000 {
            assert_abs_diff_eq!(model.draw_gain(&mut rng), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn bernoulli_extremes_and_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            assert_eq!(bernoulli_realize(1.0, &mut rng).unwrap(), HopState::Good);
            assert_eq!(bernoulli_realize(0.0, &mut rng).unwrap(), HopState::Bad);
        }
        let n = 1_000_000;
        let good = (0..n)
            .filter(|_| bernoulli_realize(0.7, &mut rng).unwrap().is_good())
            .count();
        assert_abs_diff_eq!(good as f64 / n as f64, 0.7, epsilon = 0.002);
        assert!(bernoulli_realize(1.5, &mut rng).is_err());
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let link = Link::new(budget(100.7, 23.5, 500.0), FadingModel::rician(6.0).unwrap(), 1e-3).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let (x, y) = (link.realize(&mut a), link.realize(&mut b));
            assert_eq!(x.rate_bits_full_slot.to_bits(), y.rate_bits_full_slot.to_bits());
        }
    }

    proptest! {
        #[test]
        fn db_round_trip(dbm in -200.0..100.0f64) {
            prop_assert!((linear_to_db(db_to_linear(dbm)) - dbm).abs() < 1e-9);
        }

        #[test]
        fn rate_strictly_increasing(snr in 1e-6..1e6f64, bump in 1e-6..10.0f64) {
            let lo = LinkRealization::from_snr(snr, 1.0, 180e3, 1e-3).rate_bits_full_slot;
            let hi = LinkRealization::from_snr(snr * (1.0 + bump), 1.0, 180e3, 1e-3).rate_bits_full_slot;
            prop_assert!(hi > lo);
        }
    }
}
