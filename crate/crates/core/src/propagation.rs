//! Large-scale fading (three-slope path loss with a COST-231 Hata offset and
//! log-normal shadowing), noise and transmit-SNR normalization, Rayleigh
//! small-scale draws, and the uplink channel-estimation quality.
//!
//! Path gains are kept in linear scale internally; dB only appears at the
//! model boundary. All rate expressions downstream consume linear quantities.

use crate::error::{Result, SimError};
use crate::geometry::{torus_distance, Deployment};
use crate::mat::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;
pub const NOISE_TEMPERATURE_K: f64 = 290.0;

/// Parameters of the three-slope propagation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    /// Carrier frequency in MHz.
    pub carrier_freq_mhz: f64,
    /// AP antenna height in meters.
    pub ap_height_m: f64,
    /// UE antenna height in meters.
    pub ue_height_m: f64,
    /// Inner breakpoint distance in meters; below it the loss is flat.
    pub d0_m: f64,
    /// Outer breakpoint distance in meters; above it the loss exponent is 3.5.
    pub d1_m: f64,
    /// Shadow-fading standard deviation in dB.
    pub shadow_std_db: f64,
}

impl PropagationParams {
    pub fn new(
        carrier_freq_mhz: f64,
        ap_height_m: f64,
        ue_height_m: f64,
        d0_m: f64,
        d1_m: f64,
        shadow_std_db: f64,
    ) -> Result<Self> {
        let p = Self {
            carrier_freq_mhz,
            ap_height_m,
            ue_height_m,
            d0_m,
            d1_m,
            shadow_std_db,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.carrier_freq_mhz.is_nan() || self.carrier_freq_mhz <= 0.0 {
            return Err(SimError::invalid("carrier frequency must be positive"));
        }
        if [self.ap_height_m, self.ue_height_m]
            .iter()
            .any(|h| h.is_nan() || *h <= 0.0)
        {
            return Err(SimError::invalid("antenna heights must be positive"));
        }
        if self.d0_m.is_nan() || self.d0_m <= 0.0 || self.d1_m.is_nan() || self.d1_m <= self.d0_m {
            return Err(SimError::invalid("breakpoints must satisfy 0 < d0 < d1"));
        }
        if self.shadow_std_db.is_nan() || self.shadow_std_db < 0.0 {
            return Err(SimError::invalid("shadowing std must be non-negative"));
        }
        Ok(())
    }
}

impl Default for PropagationParams {
    /// 2 GHz carrier, 5 m / 1.65 m antennas, 10 m / 50 m breakpoints, 8 dB
    /// shadowing.
    fn default() -> Self {
        Self {
            carrier_freq_mhz: 2000.0,
            ap_height_m: 5.0,
            ue_height_m: 1.65,
            d0_m: 10.0,
            d1_m: 50.0,
            shadow_std_db: 8.0,
        }
    }
}

/// Bandwidth, noise budget and radiated powers, plus the derived normalized
/// transmit SNRs (radiated power over noise power, dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Radiated AP power for downlink data, watts.
    pub dl_data_power_w: f64,
    /// Radiated AP power for downlink pilots, watts.
    pub dl_pilot_power_w: f64,
    /// Radiated UE power for uplink data, watts.
    pub ul_data_power_w: f64,
    /// Radiated UE power for uplink pilots, watts.
    pub ul_pilot_power_w: f64,
    /// Antenna gain in dBi, applied symmetrically to every link.
    pub antenna_gain_dbi: f64,
    pub noise_power_w: f64,
    pub rho_d: f64,
    pub rho_dp: f64,
    pub rho_u: f64,
    pub rho_up: f64,
}

impl RadioConfig {
    pub fn new(
        bandwidth_hz: f64,
        noise_figure_db: f64,
        dl_data_power_w: f64,
        dl_pilot_power_w: f64,
        ul_data_power_w: f64,
        ul_pilot_power_w: f64,
        antenna_gain_dbi: f64,
    ) -> Result<Self> {
        if bandwidth_hz.is_nan() || bandwidth_hz <= 0.0 {
            return Err(SimError::invalid("bandwidth must be positive"));
        }
        for (name, p) in [
            ("DL data power", dl_data_power_w),
            ("DL pilot power", dl_pilot_power_w),
            ("UL data power", ul_data_power_w),
            ("UL pilot power", ul_pilot_power_w),
        ] {
            if p.is_nan() || p <= 0.0 {
                return Err(SimError::invalid(format!("{name} must be positive")));
            }
        }
        let noise = noise_power(bandwidth_hz, noise_figure_db);
        Ok(Self {
            bandwidth_hz,
            noise_figure_db,
            dl_data_power_w,
            dl_pilot_power_w,
            ul_data_power_w,
            ul_pilot_power_w,
            antenna_gain_dbi,
            noise_power_w: noise,
            rho_d: dl_data_power_w / noise,
            rho_dp: dl_pilot_power_w / noise,
            rho_u: ul_data_power_w / noise,
            rho_up: ul_pilot_power_w / noise,
        })
    }
}

impl Default for RadioConfig {
    /// 20 MHz bandwidth, 9 dB noise figure, 200 mW AP / 100 mW UE radiated
    /// powers, 0 dBi antennas.
    fn default() -> Self {
        Self::new(20e6, 9.0, 0.2, 0.2, 0.1, 0.1, 0.0).expect("default radio config is valid")
    }
}

/// Large-scale state of one realization: linear path gains `beta` and
/// estimate-quality variances `gamma`, both APs x UEs.
#[derive(Debug, Clone)]
pub struct LargeScaleState {
    pub beta: Mat,
    pub gamma: Mat,
}

impl LargeScaleState {
    /// Pairs path gains with estimate qualities, checking that every gain is
    /// positive and no estimate quality exceeds its gain (equality only at
    /// perfect estimation).
    pub fn new(beta: Mat, gamma: Mat) -> Result<Self> {
        if !beta.same_shape(&gamma) {
            return Err(SimError::invalid("beta/gamma shape mismatch"));
        }
        for (b, g) in beta.data().iter().zip(gamma.data()) {
            let ok = *b > 0.0 && *g >= 0.0 && g <= b;
            if !ok {
                return Err(SimError::invalid(format!(
                    "need 0 <= gamma <= beta with beta positive, got beta={b}, gamma={g}"
                )));
            }
        }
        Ok(Self { beta, gamma })
    }
}

/// One draw of the small-scale channel matrix, `g[m][k] = sqrt(beta) * h`
/// with `h` circularly-symmetric unit-variance complex normal.
#[derive(Debug, Clone)]
pub struct SmallScaleRealization {
    num_aps: usize,
    num_ues: usize,
    gains: Vec<Complex64>,
}

impl SmallScaleRealization {
    pub fn gain(&self, ap: usize, ue: usize) -> Complex64 {
        debug_assert!(ap < self.num_aps && ue < self.num_ues);
        self.gains[ap * self.num_ues + ue]
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }
}

/// Frequency- and antenna-height-dependent COST-231 Hata offset in dB.
pub fn cost231_constant(params: &PropagationParams) -> f64 {
    let log_f = params.carrier_freq_mhz.log10();
    46.3 + 33.9 * log_f
        - (1.1 * log_f - 0.7) * params.ue_height_m
        - 13.82 * params.ap_height_m.log10()
        + (1.56 * log_f - 0.8)
}

/// Three-slope path loss in dB at distance `d_m` meters: exponent 3.5 beyond
/// `d1`, 2 between `d0` and `d1`, flat below `d0`; continuous at `d1`.
/// Distances enter the slope terms in kilometers, the customary unit for the
/// Hata-COST231 offset `l_db`.
pub fn path_loss_db(d_m: f64, l_db: f64, params: &PropagationParams) -> f64 {
    let d_km = d_m / 1000.0;
    let d0_km = params.d0_m / 1000.0;
    let d1_km = params.d1_m / 1000.0;
    if d_km > d1_km {
        -l_db - 35.0 * d_km.log10()
    } else if d_km > d0_km {
        -l_db - 15.0 * d1_km.log10() - 20.0 * d_km.log10()
    } else {
        -l_db - 15.0 * d1_km.log10() - 20.0 * d0_km.log10()
    }
}

/// Draws the linear path-gain matrix: `beta = 10^(PL/10) * 10^(sigma z / 10)`
/// with independent standard-normal shadowing per (AP, UE) link and distances
/// taken on the torus. Shadowing draws run AP-major, UE-minor.
pub fn large_scale_fading(
    dep: &Deployment,
    params: &PropagationParams,
    l_db: f64,
    rng: &mut impl Rng,
) -> Result<Mat> {
    params.validate()?;
    let m = dep.num_aps();
    let k = dep.num_ues();
    let mut beta = Mat::zeros(m, k);
    for ap in 0..m {
        for ue in 0..k {
            let d = torus_distance(dep.ap_positions[ap], dep.ue_positions[ue], dep.side)?;
            let pl = path_loss_db(d, l_db, params);
            let z: f64 = StandardNormal.sample(rng);
            let shadow_db = params.shadow_std_db * z;
            beta[(ap, ue)] = 10f64.powf((pl + shadow_db) / 10.0);
        }
    }
    Ok(beta)
}

/// Thermal noise power in watts for the given bandwidth and noise figure.
pub fn noise_power(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    bandwidth_hz * BOLTZMANN_J_PER_K * NOISE_TEMPERATURE_K * 10f64.powf(noise_figure_db / 10.0)
}

/// Variance of the MMSE uplink channel estimate:
/// `gamma = tau_up * rho_up * beta^2 / (tau_up * rho_up * beta + 1)`.
///
/// Satisfies `0 <= gamma <= beta`, with equality only in the perfect-estimate
/// limit `tau_up * rho_up -> inf`.
pub fn estimate_quality(beta: &Mat, tau_up: usize, rho_up: f64) -> Mat {
    let energy = tau_up as f64 * rho_up;
    beta.map(|b| {
        if b == 0.0 {
            0.0
        } else {
            energy * b * b / (energy * b + 1.0)
        }
    })
}

/// Draws one small-scale realization: `g = sqrt(beta) * h`, `h ~ CN(0, 1)`
/// i.i.d. across links. Draws run AP-major, UE-minor.
pub fn draw_small_scale(beta: &Mat, rng: &mut impl Rng) -> SmallScaleRealization {
    let m = beta.rows();
    let k = beta.cols();
    let mut gains = Vec::with_capacity(m * k);
    for ap in 0..m {
        for ue in 0..k {
            let scale = (beta[(ap, ue)] / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            gains.push(Complex64::new(scale * re, scale * im));
        }
    }
    SmallScaleRealization {
        num_aps: m,
        num_ues: k,
        gains,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_params() -> PropagationParams {
        PropagationParams::default()
    }

    #[test]
    fn cost231_reference_value() {
        // f = 2000 MHz, h_ue = 1.65 m, h_ap = 5 m.
        let l = cost231_constant(&table_params());
        assert!((l - 148.0584).abs() < 1e-3, "got {l}");
    }

    #[test]
    fn cost231_degenerate_heights() {
        // h_ue = 0 kills the UE correction, h_ap = 1 kills the AP term.
        let p = PropagationParams {
            ue_height_m: 0.0,
            ap_height_m: 1.0,
            ..table_params()
        };
        let log_f = 2000f64.log10();
        let expected = 46.3 + 33.9 * log_f + (1.56 * log_f - 0.8);
        assert!((cost231_constant(&p) - expected).abs() < 1e-12);
    }

    #[test]
    fn cost231_doubling_ap_height() {
        let p1 = table_params();
        let p2 = PropagationParams {
            ap_height_m: 10.0,
            ..p1
        };
        let delta = cost231_constant(&p1) - cost231_constant(&p2);
        let expected = 13.82 * 2f64.log10();
        assert!((delta - expected).abs() < 1e-9, "got {delta}");
    }

    #[test]
    fn path_loss_flat_below_d0() {
        let p = table_params();
        let l = 148.06;
        let at_d0 = path_loss_db(10.0, l, &p);
        assert_eq!(path_loss_db(3.0, l, &p), at_d0);
        assert_eq!(path_loss_db(0.0, l, &p), at_d0);
    }

    #[test]
    fn path_loss_continuous_at_d1() {
        let p = table_params();
        let l = 148.06;
        let just_above = path_loss_db(50.0 + 1e-9, l, &p);
        let at_d1 = path_loss_db(50.0, l, &p);
        assert!((just_above - at_d1).abs() < 1e-6);
        // Same identity in closed form: -L - 35 log(d1) = -L - 15 log(d1) - 20 log(d1).
        let d1_km = 0.05f64;
        let lhs = -l - 35.0 * d1_km.log10();
        let rhs = -l - 15.0 * d1_km.log10() - 20.0 * d1_km.log10();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn path_loss_reference_point() {
        // 100 m = 0.1 km on the outer slope: -L - 35 log10(0.1) = -L + 35.
        let p = table_params();
        let pl = path_loss_db(100.0, 148.06, &p);
        assert!((pl - (-113.06)).abs() < 1e-9, "got {pl}");
    }

    #[test]
    fn path_loss_non_increasing_in_distance() {
        let p = table_params();
        let l = 148.06;
        let mut prev = f64::INFINITY;
        for i in 0..2000 {
            let d = i as f64 * 0.5;
            let pl = path_loss_db(d, l, &p);
            assert!(pl <= prev + 1e-12, "path loss increased at d={d}");
            prev = pl;
        }
    }

    #[test]
    fn shadowing_disabled_is_deterministic() {
        let p = PropagationParams {
            shadow_std_db: 0.0,
            ..table_params()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dep = Deployment::generate(4, 2, 1000.0, &mut rng).unwrap();
        let l = cost231_constant(&p);
        let b1 = large_scale_fading(&dep, &p, l, &mut rng).unwrap();
        let b2 = large_scale_fading(&dep, &p, l, &mut rng).unwrap();
        assert_eq!(b1, b2);
        for ap in 0..4 {
            for ue in 0..2 {
                let d = torus_distance(dep.ap_positions[ap], dep.ue_positions[ue], 1000.0).unwrap();
                let expected = 10f64.powf(path_loss_db(d, l, &p) / 10.0);
                assert!((b1[(ap, ue)] - expected).abs() <= 1e-12 * expected);
            }
        }
    }

    #[test]
    fn shadowing_statistics_match_sigma() {
        // 10 log10(beta) - PL should be N(0, sigma^2) with sigma = 8 dB.
        let p = table_params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dep = Deployment {
            ap_positions: vec![Point::new(100.0, 100.0)],
            ue_positions: vec![Point::new(600.0, 100.0)],
            side: 1000.0,
        };
        let l = cost231_constant(&p);
        let pl = path_loss_db(500.0, l, &p);
        let n = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let beta = large_scale_fading(&dep, &p, l, &mut rng).unwrap();
            let dev = 10.0 * beta[(0, 0)].log10() - pl;
            sum += dev;
            sum_sq += dev * dev;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.3, "shadowing mean {mean} dB should be ~0");
        assert!(
            (std - 8.0).abs() < 0.3,
            "shadowing std {std} dB should be ~8"
        );
    }

    #[test]
    fn colocated_ues_get_independent_shadowing() {
        let p = table_params();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dep = Deployment {
            ap_positions: vec![Point::new(0.0, 0.0)],
            ue_positions: vec![Point::new(400.0, 300.0), Point::new(400.0, 300.0)],
            side: 1000.0,
        };
        let l = cost231_constant(&p);
        let beta = large_scale_fading(&dep, &p, l, &mut rng).unwrap();
        assert_ne!(beta[(0, 0)], beta[(0, 1)]);
    }

    #[test]
    fn noise_power_reference_values() {
        let n = noise_power(20e6, 9.0);
        assert!((n - 6.3604e-13).abs() < 1e-16, "got {n}");
        let dbm = 10.0 * (n / 1e-3).log10();
        assert!((dbm - (-91.97)).abs() < 0.01, "got {dbm} dBm");

        let unit = noise_power(1.0, 0.0);
        assert!((unit - BOLTZMANN_J_PER_K * 290.0).abs() < 1e-30);

        // Normalized SNR for 200 mW at this noise level.
        let rho_d = 0.2 / n;
        assert!((rho_d / 3.1444e11 - 1.0).abs() < 1e-3, "got {rho_d}");
    }

    #[test]
    fn radio_config_derives_snrs() {
        let r = RadioConfig::default();
        assert!((r.rho_d - 0.2 / r.noise_power_w).abs() < 1.0);
        assert!((r.rho_up - 0.1 / r.noise_power_w).abs() < 1.0);
        assert!(r.rho_d > 1e11 && r.rho_d < 1e12);
    }

    #[test]
    fn gamma_zero_beta() {
        let beta = Mat::zeros(2, 2);
        let gamma = estimate_quality(&beta, 10, 1.0);
        assert!(gamma.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gamma_hand_value_and_perfect_limit() {
        let beta = Mat::from_rows(&[&[1.0]]);
        // tau * rho = 1, beta = 1 -> gamma = 1/2.
        let g = estimate_quality(&beta, 1, 1.0);
        assert!((g[(0, 0)] - 0.5).abs() < 1e-15);
        // Huge pilot energy -> gamma -> beta.
        let g = estimate_quality(&beta, 1, 1e12);
        assert!((g[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_scale_moments() {
        let beta = Mat::from_rows(&[&[1.0, 0.25], &[4.0, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let n = 100_000;
        let mut pow = [0.0f64; 4];
        let mut re_var = [0.0f64; 4];
        for _ in 0..n {
            let g = draw_small_scale(&beta, &mut rng);
            for (i, (ap, ue)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                let v = g.gain(*ap, *ue);
                pow[i] += v.norm_sqr();
                re_var[i] += v.re * v.re;
            }
        }
        for (i, &(ap, ue)) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)]
            .iter()
            .enumerate()
        {
            let b = beta[(ap, ue)];
            let mean_pow = pow[i] / n as f64;
            if b == 0.0 {
                assert_eq!(mean_pow, 0.0, "zero beta must give zero gain");
            } else {
                assert!(
                    (mean_pow / b - 1.0).abs() < 0.02,
                    "E|g|^2 = {mean_pow} vs beta = {b}"
                );
                let rv = re_var[i] / n as f64;
                assert!(
                    (rv / (b / 2.0) - 1.0).abs() < 0.02,
                    "Re variance {rv} vs beta/2 = {}",
                    b / 2.0
                );
            }
        }
    }

    proptest! {
        #[test]
        fn gamma_never_exceeds_beta(b in 0.0f64..1e3, tau in 1usize..100, rho in 1e-6f64..1e6) {
            let beta = Mat::from_rows(&[&[b]]);
            let gamma = estimate_quality(&beta, tau, rho);
            prop_assert!(gamma[(0, 0)] <= b);
            if b > 0.0 {
                prop_assert!(gamma[(0, 0)] < b); // strict at finite pilot energy
                prop_assert!(gamma[(0, 0)] >= 0.0);
            }
        }

        #[test]
        fn gamma_monotone_in_pilot_energy(b in 1e-6f64..1e3, rho in 1e-6f64..1e3) {
            let beta = Mat::from_rows(&[&[b]]);
            let g1 = estimate_quality(&beta, 5, rho)[(0, 0)];
            let g2 = estimate_quality(&beta, 10, rho)[(0, 0)];
            let g3 = estimate_quality(&beta, 10, rho * 2.0)[(0, 0)];
            prop_assert!(g2 >= g1);
            prop_assert!(g3 >= g2);
        }
    }
}
