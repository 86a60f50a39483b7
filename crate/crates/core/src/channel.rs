//! UE placement, Urban-Macro pathloss and a clustered wideband MIMO channel.
//!
//! Small-scale fading is a sum of plane-wave clusters around the line-of-sight
//! bearing. Each cluster carries a complex gain, a delay and departure/arrival
//! directions; the frequency response of the channel at a subband is
//! `H(f) = Σ_l g_l e^{-j2π τ_l f} a_rx(l) a_tx(l)ᵀ` with unit-modulus steering
//! vectors, so the array gain lives in `H` and beams stay unit-norm.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::array::ArrayGeometry;
use crate::error::domain;
use crate::linalg::CMat;
use crate::rng::complex_normal;
use crate::{Result, C64};

/// Smallest 2D distance used in the pathloss formulas.
pub const MIN_PATHLOSS_D2D_M: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub ue_id: usize,
    /// UE position, meters.
    pub position: [f64; 3],
    pub bs_position: [f64; 3],
    pub d2d: f64,
    pub d3d: f64,
    pub los: bool,
}

impl Placement {
    pub fn new(ue_id: usize, position: [f64; 3], bs_position: [f64; 3]) -> Self {
        let dx = position[0] - bs_position[0];
        let dy = position[1] - bs_position[1];
        let dz = position[2] - bs_position[2];
        let d2d = (dx * dx + dy * dy).sqrt();
        let d3d = (d2d * d2d + dz * dz).sqrt();
        Self {
            ue_id,
            position,
            bs_position,
            d2d,
            d3d,
            los: false,
        }
    }

    /// Global azimuth and elevation of the UE seen from the BS.
    pub fn departure_direction(&self) -> (f64, f64) {
        let dx = self.position[0] - self.bs_position[0];
        let dy = self.position[1] - self.bs_position[1];
        let dz = self.position[2] - self.bs_position[2];
        (dy.atan2(dx), dz.atan2(self.d2d))
    }
}

/// Drops `n_ues` users uniformly over a disc centred on a BS at the origin.
pub fn drop_ues<R: Rng + ?Sized>(
    n_ues: usize,
    radius: f64,
    h_bs: f64,
    h_ut: f64,
    rng: &mut R,
) -> Result<Vec<Placement>> {
    if n_ues == 0 {
        return Err(domain("at least one UE is required"));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(domain("disc radius must be finite and non-negative"));
    }
    let bs = [0.0, 0.0, h_bs];
    Ok((0..n_ues)
        .map(|ue_id| {
            let r = radius * rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            Placement::new(ue_id, [r * a.cos(), r * a.sin(), h_ut], bs)
        })
        .collect())
}

/// Urban-Macro line-of-sight probability.
pub fn los_probability_uma(d2d: f64, h_ut: f64) -> f64 {
    if d2d <= 18.0 {
        return 1.0;
    }
    let c = if h_ut <= 13.0 {
        0.0
    } else {
        ((h_ut - 13.0) / 10.0).powf(1.5)
    };
    (18.0 / d2d + (-d2d / 63.0).exp() * (1.0 - 18.0 / d2d))
        * (1.0 + c * 1.25 * (d2d / 100.0).powi(3) * (-d2d / 150.0).exp())
}

pub fn pathloss_uma_los_db(d3d: f64, fc_ghz: f64) -> f64 {
    28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10()
}

pub fn pathloss_uma_nlos_db(d3d: f64, fc_ghz: f64, h_ut: f64) -> f64 {
    let nlos = 13.54 + 39.08 * d3d.log10() + 20.0 * fc_ghz.log10() - 0.6 * (h_ut - 1.5);
    nlos.max(pathloss_uma_los_db(d3d, fc_ghz))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossSample {
    pub pathloss_db: f64,
    pub los: bool,
}

/// Lognormal shadowing switch and standard deviations (dB).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shadowing {
    pub enabled: bool,
    pub sigma_los_db: f64,
    pub sigma_nlos_db: f64,
}

impl Default for Shadowing {
    fn default() -> Self {
        Self {
            enabled: false,
            sigma_los_db: 4.0,
            sigma_nlos_db: 6.0,
        }
    }
}

/// Draws the LOS state and the Urban-Macro pathloss of one placement.
pub fn pathloss_uma<R: Rng + ?Sized>(
    p: &Placement,
    fc_ghz: f64,
    shadowing: Shadowing,
    rng: &mut R,
) -> Result<PathlossSample> {
    if !(0.5..=100.0).contains(&fc_ghz) {
        return Err(domain("carrier frequency must be within 0.5..100 GHz"));
    }
    let h_ut = p.position[2];
    let dz = p.bs_position[2] - h_ut;
    let d2d = p.d2d.max(MIN_PATHLOSS_D2D_M);
    let d3d = (d2d * d2d + dz * dz).sqrt();
    let los = rng.random::<f64>() < los_probability_uma(d2d, h_ut);
    let (mut pl, sigma) = if los {
        (pathloss_uma_los_db(d3d, fc_ghz), shadowing.sigma_los_db)
    } else {
        (pathloss_uma_nlos_db(d3d, fc_ghz, h_ut), shadowing.sigma_nlos_db)
    };
    if shadowing.enabled && sigma > 0.0 {
        pl += Normal::new(0.0, sigma)
            .map_err(|_| domain("bad shadowing sigma"))?
            .sample(rng);
    }
    Ok(PathlossSample { pathloss_db: pl, los })
}

/// Small-scale fading knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub n_clusters: usize,
    /// Ricean K-factor of the first cluster under LOS, dB. `+inf` removes its diffuse part.
    pub k_factor_db: f64,
    /// RMS delay spread, seconds.
    pub delay_spread_s: f64,
    /// Standard deviation of the per-cluster angular offsets, radians.
    pub angle_spread_rad: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            n_clusters: 12,
            k_factor_db: 10.0,
            delay_spread_s: 50e-9,
            angle_spread_rad: 10.0 * PI / 180.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Deterministic specular component (nonzero only for the LOS cluster).
    pub specular: C64,
    /// Fading component, circular Gaussian with variance `diffuse_power`.
    pub diffuse: C64,
    pub diffuse_power: f64,
    pub delay_s: f64,
    /// Array-local departure azimuth/elevation at the BS.
    pub aod_az: f64,
    pub aod_el: f64,
    /// Array-local arrival azimuth/elevation at the UE.
    pub aoa_az: f64,
    pub aoa_el: f64,
}

impl Cluster {
    pub fn gain(&self) -> C64 {
        self.specular + self.diffuse
    }

    pub fn mean_power(&self) -> f64 {
        self.specular.norm_sqr() + self.diffuse_power
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub rx_geom: ArrayGeometry,
    pub tx_geom: ArrayGeometry,
}

/// Global direction (azimuth, elevation) to array-local angles for a planar
/// array whose broadside points along azimuth `boresight`.
pub fn to_array_local(az: f64, el: f64, boresight: f64) -> (f64, f64) {
    let el = el.clamp(-PI / 2.0, PI / 2.0);
    let s = (el.cos() * (az - boresight).sin()).clamp(-1.0, 1.0);
    (s.asin(), el)
}

/// Global direction to array-local angles for a horizontal array facing the
/// ground. The local sines are the horizontal direction cosines, so every
/// azimuth maps to a distinct response.
pub fn to_nadir_local(az: f64, el: f64) -> (f64, f64) {
    let ux = (el.cos() * az.cos()).clamp(-1.0, 1.0);
    let uy = (el.cos() * az.sin()).clamp(-1.0, 1.0);
    (ux.asin(), uy.asin())
}

fn wrap_pi(a: f64) -> f64 {
    let t = 2.0 * PI;
    let w = a + PI - t * ((a + PI) / t).floor() - PI;
    if w < -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Generates the cluster set of one BS-UE link.
///
/// The BS array faces the ground; each UE array gets a uniformly random
/// orientation. Cluster 0 follows the geometric bearing, the rest are offset by
/// Gaussian perturbations of `angle_spread_rad`.
pub fn generate_clusters<R: Rng + ?Sized>(
    p: &Placement,
    params: &ClusterParams,
    rx_geom: ArrayGeometry,
    tx_geom: ArrayGeometry,
    rng: &mut R,
) -> Result<ClusterSet> {
    if params.n_clusters == 0 {
        return Err(domain("at least one cluster is required"));
    }
    if !(params.delay_spread_s >= 0.0) || !(params.angle_spread_rad >= 0.0) {
        return Err(domain("delay and angle spreads must be non-negative"));
    }
    let n = params.n_clusters;
    let (dep_az, dep_el) = p.departure_direction();
    let (arr_az, arr_el) = (wrap_pi(dep_az + PI), -dep_el);
    let ue_boresight = wrap_pi(2.0 * PI * rng.random::<f64>());

    let k_lin = 10f64.powf(params.k_factor_db / 10.0);
    let specular_power = if p.los { 1.0 / (1.0 + 1.0 / k_lin) } else { 0.0 };
    let diffuse_power = (1.0 - specular_power) / n as f64;
    let spread = Normal::new(0.0, params.angle_spread_rad).map_err(|_| domain("bad angle spread"))?;
    let delays = (params.delay_spread_s > 0.0)
        .then(|| Exp::new(1.0 / params.delay_spread_s).map_err(|_| domain("bad delay spread")))
        .transpose()?;

    let mut clusters = Vec::with_capacity(n);
    for l in 0..n {
        let offset = |rng: &mut R| if l == 0 { 0.0 } else { spread.sample(rng) };
        let d_az = wrap_pi(dep_az + offset(rng));
        let d_el = dep_el + offset(rng);
        let a_az = wrap_pi(arr_az + offset(rng));
        let a_el = arr_el + offset(rng);
        let (aod_az, aod_el) = to_nadir_local(d_az, d_el);
        let (aoa_az, aoa_el) = to_array_local(a_az, a_el, ue_boresight);
        let delay_s = match (&delays, l) {
            (Some(e), l) if l > 0 => e.sample(rng),
            _ => 0.0,
        };
        let specular = if l == 0 && specular_power > 0.0 {
            C64::from_polar(specular_power.sqrt(), 2.0 * PI * rng.random::<f64>())
        } else {
            C64::new(0.0, 0.0)
        };
        let diffuse = if diffuse_power > 0.0 {
            complex_normal(rng, diffuse_power)
        } else {
            C64::new(0.0, 0.0)
        };
        clusters.push(Cluster {
            specular,
            diffuse,
            diffuse_power,
            delay_s,
            aod_az,
            aod_el,
            aoa_az,
            aoa_el,
        });
    }
    Ok(ClusterSet {
        clusters,
        rx_geom,
        tx_geom,
    })
}

impl ClusterSet {
    /// Unit-modulus receive steering vector of cluster `l`.
    pub fn rx_steering(&self, l: usize) -> Vec<C64> {
        let c = &self.clusters[l];
        self.rx_geom.steering_from_sines(c.aoa_az.sin(), c.aoa_el.sin())
    }

    /// Unit-modulus transmit steering vector of cluster `l`.
    pub fn tx_steering(&self, l: usize) -> Vec<C64> {
        let c = &self.clusters[l];
        self.tx_geom.steering_from_sines(c.aod_az.sin(), c.aod_el.sin())
    }

    /// Channel matrix (N_rx x N_tx) at a frequency offset from the carrier.
    pub fn channel_at(&self, f_offset_hz: f64) -> CMat {
        let nr = self.rx_geom.len();
        let nt = self.tx_geom.len();
        let mut h = CMat::zeros(nr, nt);
        for l in 0..self.clusters.len() {
            let c = &self.clusters[l];
            let coef = c.gain() * C64::from_polar(1.0, -2.0 * PI * c.delay_s * f_offset_hz);
            let ar = self.rx_steering(l);
            let at = self.tx_steering(l);
            for (r, a) in ar.iter().enumerate() {
                let ca = coef * a;
                for (t, b) in at.iter().enumerate() {
                    h[(r, t)] += ca * b;
                }
            }
        }
        h
    }

    /// One AR(1) step of every diffuse gain: `g' = rho·g + sqrt(1-rho²)·innovation`.
    pub fn evolve<R: Rng + ?Sized>(&mut self, rho: f64, rng: &mut R) -> Result<()> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(domain("correlation coefficient must be within [0, 1]"));
        }
        let innov = (1.0 - rho * rho).sqrt();
        for c in &mut self.clusters {
            let fresh = if c.diffuse_power > 0.0 {
                complex_normal(rng, c.diffuse_power)
            } else {
                C64::new(0.0, 0.0)
            };
            c.diffuse = c.diffuse * rho + fresh * innov;
        }
        Ok(())
    }
}

/// Correlation between channel snapshots `dt` apart for coherence time `t_coh`.
pub fn ar1_coefficient(dt_s: f64, t_coh_s: f64) -> f64 {
    if t_coh_s.is_infinite() {
        1.0
    } else {
        (-dt_s / t_coh_s).exp()
    }
}

/// Partition of the carrier into equally sized subbands (the last may be short).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubbandGrid {
    pub n_subcarriers: usize,
    pub subband_size: usize,
    pub delta_f_hz: f64,
}

impl SubbandGrid {
    pub fn count(&self) -> usize {
        self.n_subcarriers.div_ceil(self.subband_size)
    }

    /// Subcarriers in subband `k`.
    pub fn width(&self, k: usize) -> usize {
        let start = k * self.subband_size;
        (start + self.subband_size).min(self.n_subcarriers) - start
    }

    /// Offset of subband `k`'s center from the carrier center, Hz.
    pub fn center_offset_hz(&self, k: usize) -> f64 {
        let start = (k * self.subband_size) as f64;
        let mid = start + (self.width(k) as f64 - 1.0) / 2.0;
        (mid - (self.n_subcarriers as f64 - 1.0) / 2.0) * self.delta_f_hz
    }

    /// Subband carrying the narrowband reference signal.
    pub fn reference_subband(&self) -> usize {
        self.count() / 2
    }
}

/// Per-subband channel matrices of one UE at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub ue_id: usize,
    pub pathloss_db: f64,
    pub subbands: Vec<CMat>,
    pub timestamp_s: f64,
}

impl ChannelRealization {
    pub fn realize(ue_id: usize, pathloss_db: f64, cs: &ClusterSet, grid: &SubbandGrid, timestamp_s: f64) -> Self {
        let subbands = (0..grid.count())
            .map(|k| cs.channel_at(grid.center_offset_hz(k)))
            .collect();
        Self {
            ue_id,
            pathloss_db,
            subbands,
            timestamp_s,
        }
    }

    /// Linear pathloss gain `L_u`.
    pub fn linear_gain(&self) -> f64 {
        10f64.powf(-self.pathloss_db / 10.0)
    }
}

/// Advances a realization by `dt` with correlation `rho` and regenerates its matrices.
pub fn evolve<R: Rng + ?Sized>(
    cr: &ChannelRealization,
    cs: &ClusterSet,
    dt_s: f64,
    rho: f64,
    grid: &SubbandGrid,
    rng: &mut R,
) -> Result<(ChannelRealization, ClusterSet)> {
    let mut next = cs.clone();
    next.evolve(rho, rng)?;
    let cr = ChannelRealization::realize(cr.ue_id, cr.pathloss_db, &next, grid, cr.timestamp_s + dt_s);
    Ok((cr, next))
}
