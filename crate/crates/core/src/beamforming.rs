//! Codebook beamforming (CBF) and per-subband MMSE beamforming (SMBF).
//!
//! CBF picks, for every UE, the codebook pair maximizing `|wᵀ H v|²` at the
//! reference subband. SMBF keeps those analog beams as ports and, per subband,
//! maps layers onto ports with the MMSE matrix
//! `V = Heqᴴ (Heq Heqᴴ + σ I)⁻¹` built from the port-to-UE equivalent channel
//! `Heq`, then normalizes every layer to unit power.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::array::{effective_channel, BeamVector, Codebook};
use crate::channel::ChannelRealization;
use crate::error::domain;
use crate::linalg::{self, CMat};
use crate::{Error, Result, C64};

/// Relative pivot size below which the MMSE system counts as singular.
const SINGULAR_REL_TOL: f64 = 1e-13;
/// Regularization floor relative to `trace(Heq Heqᴴ) / N_u`.
const NOISE_RATIO_FLOOR: f64 = 1e-12;

/// Layer and port of each UE in a bundle; both equal the UE's position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortAssignment {
    ues: Vec<usize>,
}

impl PortAssignment {
    /// Assigns layers `0..n` to `ue_ids` in order. Fails on a repeated UE.
    pub fn sequential(ue_ids: &[usize]) -> Result<Self> {
        for (i, u) in ue_ids.iter().enumerate() {
            if ue_ids[..i].contains(u) {
                return Err(domain("a UE may hold only one layer"));
            }
        }
        Ok(Self { ues: ue_ids.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.ues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ues.is_empty()
    }

    pub fn layer_of(&self, ue_id: usize) -> Option<usize> {
        self.ues.iter().position(|&u| u == ue_id)
    }

    pub fn ue_of(&self, layer: usize) -> usize {
        self.ues[layer]
    }

    pub fn ues(&self) -> &[usize] {
        &self.ues
    }
}

/// Best codebook pair of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfSelection {
    pub rx_index: usize,
    pub tx_index: usize,
    pub rx_beam: BeamVector,
    pub tx_beam: BeamVector,
    /// `|wᵀ H v|²` at the reference subband, without pathloss.
    pub gain: f64,
}

/// Exhaustive argmax over an `n_rx x n_tx` grid of gains.
///
/// Ties keep the lowest `(rx, tx)` pair.
pub fn best_pair(n_rx: usize, n_tx: usize, mut gain: impl FnMut(usize, usize) -> f64) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for i in 0..n_rx {
        for j in 0..n_tx {
            let g = gain(i, j);
            if g > best.2 {
                best = (i, j, g);
            }
        }
    }
    best
}

/// Max-SNR codebook pair for the reference channel `h_ref` (N_rx x N_tx).
pub fn cbf_select(h_ref: &CMat, tx_cb: &Codebook, rx_cb: &Codebook) -> Result<CbfSelection> {
    if h_ref.cols() != tx_cb.geometry().len() {
        return Err(Error::Dimension {
            expected: tx_cb.geometry().len(),
            got: h_ref.cols(),
        });
    }
    if h_ref.rows() != rx_cb.geometry().len() {
        return Err(Error::Dimension {
            expected: rx_cb.geometry().len(),
            got: h_ref.rows(),
        });
    }
    let hv: Vec<Vec<C64>> = tx_cb
        .vectors()
        .iter()
        .map(|v| h_ref.mul_vec(v.as_slice()))
        .collect::<Result<_>>()?;
    let (i, j, g) = best_pair(rx_cb.len(), tx_cb.len(), |i, j| {
        linalg::dot(rx_cb.get(i).as_slice(), &hv[j]).norm_sqr()
    });
    Ok(CbfSelection {
        rx_index: i,
        tx_index: j,
        rx_beam: rx_cb.get(i).clone(),
        tx_beam: tx_cb.get(j).clone(),
        gain: g,
    })
}

/// Port-to-UE equivalent channel at subband `k`:
/// entry `(u, p) = √L_u · w_uᵀ H_u[k] v_p`.
///
/// `cbf[i]` and `channels[i]` describe the UE on layer/port `i`.
pub fn build_equivalent_matrix(cbf: &[CbfSelection], channels: &[&ChannelRealization], k: usize) -> Result<CMat> {
    if cbf.len() != channels.len() {
        return Err(domain("beam selections and channels cover different UE sets"));
    }
    let n = cbf.len();
    let mut heq = CMat::zeros(n, n);
    for (u, ch) in channels.iter().enumerate() {
        let h = ch.subbands.get(k).ok_or_else(|| domain("subband index out of range"))?;
        let amp = ch.linear_gain().sqrt();
        for (p, sel) in cbf.iter().enumerate() {
            heq[(u, p)] = effective_channel(cbf[u].rx_beam.as_slice(), h, sel.tx_beam.as_slice())? * amp;
        }
    }
    Ok(heq)
}

/// MMSE layer-to-port matrix plus whether the regularization floor kicked in.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsePrecoder {
    pub matrix: CMat,
    pub regularized: bool,
}

/// `V = Heqᴴ (Heq Heqᴴ + noise_ratio·I)⁻¹`, computed by solving
/// `(Heq Heqᴴ + σI) X = Heq` and taking `V = Xᴴ`.
pub fn mmse_precoder(heq: &CMat, noise_ratio: f64) -> Result<MmsePrecoder> {
    if !(noise_ratio >= 0.0) {
        return Err(domain("noise ratio must be non-negative"));
    }
    let gram = heq.matmul(&heq.hermitian())?;
    if let Some(x) = gram.add_diagonal(noise_ratio).solve(heq, SINGULAR_REL_TOL)? {
        return Ok(MmsePrecoder {
            matrix: x.hermitian(),
            regularized: false,
        });
    }
    let n = heq.rows().max(1) as f64;
    let floor = NOISE_RATIO_FLOOR * gram.trace().re / n;
    let sigma = noise_ratio.max(floor);
    let matrix = match gram.add_diagonal(sigma).solve(heq, 0.0)? {
        Some(x) if x.is_finite() => x.hermitian(),
        _ => CMat::zeros(heq.cols(), heq.rows()),
    };
    Ok(MmsePrecoder {
        matrix,
        regularized: true,
    })
}

/// Unit-norm layer vectors `ṽ_u = Σ_p v_p · V[p][u]`, each divided by its norm.
pub fn effective_vectors(cb_beams: &[BeamVector], v: &CMat) -> Result<Vec<BeamVector>> {
    if v.rows() != cb_beams.len() {
        return Err(Error::Dimension {
            expected: cb_beams.len(),
            got: v.rows(),
        });
    }
    let len = cb_beams.first().map_or(0, |b| b.len());
    (0..v.cols())
        .map(|u| {
            let mut acc = alloc::vec![C64::new(0.0, 0.0); len];
            for (p, beam) in cb_beams.iter().enumerate() {
                let coef = v[(p, u)];
                for (a, b) in acc.iter_mut().zip(beam.as_slice()) {
                    *a += b * coef;
                }
            }
            BeamVector::normalized(acc).map_err(|_| Error::UnservableLayer { layer: u })
        })
        .collect()
}

/// Uplink BS combiners: the MMSE pipeline on `Heqᵀ`, transposed back so that
/// column `u` combines the ports for layer `u`, then normalized per layer.
pub fn smbf_ul_combiners(cb_beams: &[BeamVector], heq: &CMat, noise_ratio: f64) -> Result<Vec<BeamVector>> {
    let c = mmse_precoder(&heq.transpose(), noise_ratio)?.matrix.transpose();
    effective_vectors(cb_beams, &c)
}

/// Hermitian Gram matrix `G[p][q] = v_pᴴ v_q` of the port beams.
pub fn port_gram(beams: &[BeamVector]) -> CMat {
    let n = beams.len();
    CMat::from_fn(n, n, |p, q| linalg::inner(beams[p].as_slice(), beams[q].as_slice()))
}

/// Divides each column `m` of a port-space map by `‖Σ_p v_p m_p‖ = sqrt(mᴴ G m)`.
///
/// Returns the scaled map and, per column, whether it was servable.
pub fn normalize_port_map(map: &CMat, gram: &CMat) -> (CMat, Vec<bool>) {
    let mut out = map.clone();
    let mut ok = Vec::with_capacity(map.cols());
    for u in 0..map.cols() {
        let mut power = 0.0;
        for p in 0..map.rows() {
            let mp = map[(p, u)];
            if mp == C64::new(0.0, 0.0) {
                continue;
            }
            let gm: C64 = (0..map.rows()).map(|q| gram[(p, q)] * map[(q, u)]).sum();
            power += (mp.conj() * gm).re;
        }
        let norm = power.max(0.0).sqrt();
        let servable = norm > 0.0 && norm.is_finite();
        for p in 0..map.rows() {
            out[(p, u)] = if servable {
                map[(p, u)] / norm
            } else {
                C64::new(0.0, 0.0)
            };
        }
        ok.push(servable);
    }
    (out, ok)
}

/// Name of a beamforming scheme as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BfScheme {
    Cbf,
    Smbf,
}

impl BfScheme {
    pub fn beamformer(self) -> &'static dyn Beamformer {
        match self {
            BfScheme::Cbf => &CodebookBeams,
            BfScheme::Smbf => &MmseBeams,
        }
    }
}

impl fmt::Display for BfScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BfScheme::Cbf => "cbf",
            BfScheme::Smbf => "smbf",
        })
    }
}

impl FromStr for BfScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbf" => Ok(BfScheme::Cbf),
            "smbf" => Ok(BfScheme::Smbf),
            _ => Err(domain("beamforming scheme must be `cbf` or `smbf`")),
        }
    }
}

/// Maps layers onto the analog ports picked by codebook search.
///
/// Both maps are `N_p x N_u` in port space and unnormalized; column `u`
/// feeds (downlink) or combines (uplink) layer `u`.
pub trait Beamformer: Sync {
    fn scheme(&self) -> BfScheme;
    fn downlink_map(&self, heq: &CMat, noise_ratio: f64) -> Result<CMat>;
    fn uplink_map(&self, heq: &CMat, noise_ratio: f64) -> Result<CMat>;
}

/// Frequency-flat codebook beams: each layer drives its own port.
pub struct CodebookBeams;

/// Per-subband MMSE on top of the codebook ports.
pub struct MmseBeams;

impl Beamformer for CodebookBeams {
    fn scheme(&self) -> BfScheme {
        BfScheme::Cbf
    }

    fn downlink_map(&self, heq: &CMat, _noise_ratio: f64) -> Result<CMat> {
        Ok(CMat::identity(heq.rows()))
    }

    fn uplink_map(&self, heq: &CMat, _noise_ratio: f64) -> Result<CMat> {
        Ok(CMat::identity(heq.rows()))
    }
}

impl Beamformer for MmseBeams {
    fn scheme(&self) -> BfScheme {
        BfScheme::Smbf
    }

    fn downlink_map(&self, heq: &CMat, noise_ratio: f64) -> Result<CMat> {
        Ok(mmse_precoder(heq, noise_ratio)?.matrix)
    }

    fn uplink_map(&self, heq: &CMat, noise_ratio: f64) -> Result<CMat> {
        Ok(mmse_precoder(&heq.transpose(), noise_ratio)?.matrix.transpose())
    }
}

/// Explicit BS-side beams per subband and layer, plus the UE-side beams.
///
/// In downlink the BS beams transmit and the UE beams receive; in uplink the
/// roles swap. A set with a single subband entry is frequency flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub bs_beams: Vec<Vec<BeamVector>>,
    pub ue_beams: Vec<BeamVector>,
}

impl PrecoderSet {
    /// Frequency-flat codebook beams.
    pub fn flat(cbf: &[CbfSelection]) -> Self {
        Self {
            bs_beams: alloc::vec![cbf.iter().map(|s| s.tx_beam.clone()).collect()],
            ue_beams: cbf.iter().map(|s| s.rx_beam.clone()).collect(),
        }
    }

    /// Downlink MMSE effective vectors for each subband's equivalent channel.
    pub fn smbf_downlink(cbf: &[CbfSelection], heqs: &[CMat], noise_ratio: f64) -> Result<Self> {
        let ports: Vec<BeamVector> = cbf.iter().map(|s| s.tx_beam.clone()).collect();
        let bs_beams = heqs
            .iter()
            .map(|heq| effective_vectors(&ports, &mmse_precoder(heq, noise_ratio)?.matrix))
            .collect::<Result<_>>()?;
        Ok(Self {
            bs_beams,
            ue_beams: cbf.iter().map(|s| s.rx_beam.clone()).collect(),
        })
    }

    /// Uplink MMSE combiners for each subband's equivalent channel.
    pub fn smbf_uplink(cbf: &[CbfSelection], heqs: &[CMat], noise_ratio: f64) -> Result<Self> {
        let ports: Vec<BeamVector> = cbf.iter().map(|s| s.tx_beam.clone()).collect();
        let bs_beams = heqs
            .iter()
            .map(|heq| smbf_ul_combiners(&ports, heq, noise_ratio))
            .collect::<Result<_>>()?;
        Ok(Self {
            bs_beams,
            ue_beams: cbf.iter().map(|s| s.rx_beam.clone()).collect(),
        })
    }

    pub fn n_layers(&self) -> usize {
        self.ue_beams.len()
    }

    pub fn bs_beam(&self, layer: usize, k: usize) -> &BeamVector {
        let set = if self.bs_beams.len() == 1 {
            &self.bs_beams[0]
        } else {
            &self.bs_beams[k]
        };
        &set[layer]
    }

    pub fn ue_beam(&self, layer: usize) -> &BeamVector {
        &self.ue_beams[layer]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{dft_codebook, ArrayGeometry};
    use crate::rng::{complex_normal, substream};
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = substream(seed, &[]);
        CMat::from_fn(rows, cols, |_, _| complex_normal(&mut rng, 1.0))
    }

    /// Independent 2x2 inverse used as the zero-forcing oracle.
    fn inverse_2x2(m: &CMat) -> CMat {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        CMat::from_vec(
            2,
            2,
            vec![m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det],
        )
        .unwrap()
    }

    fn cond_number(m: &CMat) -> f64 {
        let nm = nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |r, c| {
            nalgebra::Complex::new(m[(r, c)].re, m[(r, c)].im)
        });
        let sv = nm.singular_values();
        sv.max() / sv.min()
    }

    fn grid_channel(rx: &ArrayGeometry, tx: &ArrayGeometry, rx_sines: (f64, f64), tx_sines: (f64, f64)) -> CMat {
        let a_r: Vec<C64> = rx
            .steering_from_sines(rx_sines.0, rx_sines.1)
            .iter()
            .map(|z| z.conj())
            .collect();
        let a_t: Vec<C64> = tx
            .steering_from_sines(tx_sines.0, tx_sines.1)
            .iter()
            .map(|z| z.conj())
            .collect();
        CMat::outer(&a_r, &a_t)
    }

    #[test]
    fn cbf_finds_the_grid_pair() {
        let rx = ArrayGeometry::new(4, 4).unwrap();
        let tx = ArrayGeometry::new(8, 8).unwrap();
        let (rx_cb, tx_cb) = (dft_codebook(&rx).unwrap(), dft_codebook(&tx).unwrap());
        let h = grid_channel(&rx, &tx, (0.5, -0.5), (-0.25, 0.75));
        let sel = cbf_select(&h, &tx_cb, &rx_cb).unwrap();
        // rx: n=3, m=1 -> 13; tx: n=3, m=7 -> 31.
        assert_eq!((sel.rx_index, sel.tx_index), (13, 31));
        assert!((sel.gain - 1024.0).abs() < 1e-9);
    }

    #[test]
    fn cbf_zero_channel_takes_first_pair() {
        let rx = ArrayGeometry::new(2, 2).unwrap();
        let tx = ArrayGeometry::new(4, 4).unwrap();
        let sel = cbf_select(
            &CMat::zeros(4, 16),
            &dft_codebook(&tx).unwrap(),
            &dft_codebook(&rx).unwrap(),
        )
        .unwrap();
        assert_eq!((sel.rx_index, sel.tx_index, sel.gain), (0, 0, 0.0));
    }

    #[test]
    fn cbf_matches_exhaustive_search() {
        let g = ArrayGeometry::new(4, 4).unwrap();
        let cb = dft_codebook(&g).unwrap();
        for seed in 0..20 {
            let h = random_matrix(16, 16, seed);
            let sel = cbf_select(&h, &cb, &cb).unwrap();
            let mut best = (0, 0, -1.0);
            for i in 0..16 {
                for j in 0..16 {
                    let gain = effective_channel(cb.get(i).as_slice(), &h, cb.get(j).as_slice())
                        .unwrap()
                        .norm_sqr();
                    if gain > best.2 {
                        best = (i, j, gain);
                    }
                }
            }
            assert_eq!((sel.rx_index, sel.tx_index), (best.0, best.1));
            assert!((sel.gain - best.2).abs() <= 1e-12 * best.2);
        }
        assert!(cbf_select(&random_matrix(4, 16, 1), &cb, &cb).is_err());
    }

    fn realization(ue: usize, pl: f64, h: CMat) -> ChannelRealization {
        ChannelRealization {
            ue_id: ue,
            pathloss_db: pl,
            subbands: vec![h],
            timestamp_s: 0.0,
        }
    }

    #[test]
    fn equivalent_matrix_of_orthogonal_rank_one_channels_is_diagonal() {
        let rx = ArrayGeometry::new(4, 4).unwrap();
        let tx = ArrayGeometry::new(8, 8).unwrap();
        let (rx_cb, tx_cb) = (dft_codebook(&rx).unwrap(), dft_codebook(&tx).unwrap());
        let chans = [
            realization(0, 100.0, grid_channel(&rx, &tx, (0.0, 0.5), (0.25, -0.5))),
            realization(1, 110.0, grid_channel(&rx, &tx, (-0.5, 0.0), (-0.75, -0.25))),
            realization(2, 105.0, grid_channel(&rx, &tx, (0.5, -1.0), (0.0, -0.75))),
        ];
        let sels: Vec<_> = chans
            .iter()
            .map(|c| cbf_select(&c.subbands[0], &tx_cb, &rx_cb).unwrap())
            .collect();
        let refs: Vec<&ChannelRealization> = chans.iter().collect();
        let heq = build_equivalent_matrix(&sels, &refs, 0).unwrap();
        for u in 0..3 {
            for p in 0..3 {
                let scale = heq[(u, u)].norm();
                if u == p {
                    assert!((scale - (32.0 * chans[u].linear_gain().sqrt())).abs() < 1e-9 * scale);
                } else {
                    assert!(heq[(u, p)].norm() <= 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn equivalent_matrix_single_and_duplicate() {
        let g = ArrayGeometry::new(2, 2).unwrap();
        let cb = dft_codebook(&g).unwrap();
        let h = random_matrix(4, 4, 3);
        let ch = realization(0, 90.0, h.clone());
        let sel = cbf_select(&h, &cb, &cb).unwrap();
        let one = build_equivalent_matrix(&[sel.clone()], &[&ch], 0).unwrap();
        let expect =
            effective_channel(sel.rx_beam.as_slice(), &h, sel.tx_beam.as_slice()).unwrap() * ch.linear_gain().sqrt();
        assert!((one[(0, 0)] - expect).norm() < 1e-15);

        let two = build_equivalent_matrix(&[sel.clone(), sel.clone()], &[&ch, &ch], 0).unwrap();
        let det = two[(0, 0)] * two[(1, 1)] - two[(0, 1)] * two[(1, 0)];
        assert!(det.norm() < 1e-12 * two.frobenius_norm().powi(2));

        assert!(build_equivalent_matrix(&[sel.clone()], &[&ch, &ch], 0).is_err());
        assert!(build_equivalent_matrix(&[sel], &[&ch], 3).is_err());
    }

    #[test]
    fn mmse_identity_channel() {
        let v = mmse_precoder(&CMat::identity(2), 0.3).unwrap();
        assert!(!v.regularized);
        let expect = CMat::identity(2).scale(c(1.0 / 1.3, 0.0));
        assert!(v.matrix.sub(&expect).frobenius_norm() < 1e-15);
    }

    #[test]
    fn mmse_zero_forcing_limit() {
        let heq = CMat::from_vec(2, 2, vec![c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)]).unwrap();
        let v = mmse_precoder(&heq, 1e-12).unwrap().matrix;
        let inv = inverse_2x2(&heq);
        assert!(v.sub(&inv).frobenius_norm() <= 1e-9 * inv.frobenius_norm());
        assert!((&heq * &v).sub(&CMat::identity(2)).frobenius_norm() <= 1e-6);
        let expect = CMat::from_vec(2, 2, vec![c(1.0, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(1.0, 0.0)])
            .unwrap()
            .scale(c(1.0 / 0.75, 0.0));
        assert!(v.sub(&expect).frobenius_norm() < 1e-9);
    }

    #[test]
    fn mmse_matched_filter_limit() {
        for seed in 0..10 {
            let heq = random_matrix(4, 4, 100 + seed);
            let v = mmse_precoder(&heq, 1e6).unwrap().matrix;
            let mf = heq.hermitian().scale(c(1e-6, 0.0));
            assert!(v.sub(&mf).frobenius_norm() <= 1e-3 * mf.frobenius_norm());
        }
    }

    #[test]
    fn mmse_matches_explicit_formula() {
        let heq = random_matrix(3, 3, 7);
        let sigma = 0.37;
        let v = mmse_precoder(&heq, sigma).unwrap().matrix;
        let a = (&heq * &heq.hermitian()).add_diagonal(sigma);
        let a_inv = a.solve(&CMat::identity(3), 1e-14).unwrap().unwrap();
        let direct = &heq.hermitian() * &a_inv;
        assert!(v.sub(&direct).frobenius_norm() <= 1e-9 * direct.frobenius_norm());
    }

    #[test]
    fn mmse_rank_deficient_is_regularized() {
        let row = [c(1.0, 0.5), c(-0.3, 0.2)];
        let heq = CMat::from_vec(2, 2, vec![row[0], row[1], row[0], row[1]]).unwrap();
        let out = mmse_precoder(&heq, 0.0).unwrap();
        assert!(out.regularized);
        assert!(out.matrix.is_finite());
        assert!(out.matrix.frobenius_norm() > 0.0);
        assert!(mmse_precoder(&heq, -1.0).is_err());
    }

    #[test]
    fn effective_vectors_identity_and_scaling() {
        let cb = dft_codebook(&ArrayGeometry::new(4, 2).unwrap()).unwrap();
        let beams = vec![cb.get(1).clone(), cb.get(5).clone(), cb.get(6).clone()];
        let same = effective_vectors(&beams, &CMat::identity(3)).unwrap();
        for (a, b) in same.iter().zip(&beams) {
            assert!(a
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .all(|(x, y)| (x - y).norm() < 1e-15));
        }

        let diag = CMat::from_fn(3, 3, |r, col| {
            if r == col {
                c(0.3 * (r + 1) as f64, -1.2)
            } else {
                c(0.0, 0.0)
            }
        });
        let scaled = effective_vectors(&beams, &diag).unwrap();
        for (a, b) in scaled.iter().zip(&beams) {
            let phase = linalg::inner(b.as_slice(), a.as_slice());
            assert!((phase.norm() - 1.0).abs() < 1e-12);
        }

        let mut zero_col = CMat::identity(3);
        zero_col[(2, 2)] = c(0.0, 0.0);
        assert_eq!(
            effective_vectors(&beams, &zero_col),
            Err(Error::UnservableLayer { layer: 2 })
        );
        assert!(effective_vectors(&beams, &CMat::identity(2)).is_err());
    }

    #[test]
    fn port_space_normalization_matches_explicit_vectors() {
        let cb = dft_codebook(&ArrayGeometry::new(4, 4).unwrap()).unwrap();
        // Two ports share a beam so the Gram matrix is not the identity.
        let beams = vec![cb.get(3).clone(), cb.get(3).clone(), cb.get(9).clone()];
        let map = random_matrix(3, 3, 21);
        let explicit = effective_vectors(&beams, &map).unwrap();
        let (normed, ok) = normalize_port_map(&map, &port_gram(&beams));
        assert!(ok.iter().all(|&b| b));
        for u in 0..3 {
            let mut v = vec![c(0.0, 0.0); 16];
            for p in 0..3 {
                for (a, b) in v.iter_mut().zip(beams[p].as_slice()) {
                    *a += b * normed[(p, u)];
                }
            }
            for (a, b) in v.iter().zip(explicit[u].as_slice()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_ue_smbf_reduces_to_cbf() {
        let cb = dft_codebook(&ArrayGeometry::new(4, 4).unwrap()).unwrap();
        let heq = CMat::from_vec(1, 1, vec![c(2e-5, -7e-6)]).unwrap();
        let beams = vec![cb.get(4).clone()];
        for beam in [
            effective_vectors(&beams, &mmse_precoder(&heq, 1e-12).unwrap().matrix)
                .unwrap()
                .remove(0),
            smbf_ul_combiners(&beams, &heq, 1e-12).unwrap().remove(0),
        ] {
            let overlap = linalg::inner(beams[0].as_slice(), beam.as_slice());
            assert!((overlap.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_channel_gives_matching_ul_and_dl() {
        let cb = dft_codebook(&ArrayGeometry::new(4, 4).unwrap()).unwrap();
        let a = random_matrix(3, 3, 31);
        let heq = CMat::from_fn(3, 3, |r, col| a[(r, col)] + a[(col, r)]);
        let beams = vec![cb.get(0).clone(), cb.get(7).clone(), cb.get(12).clone()];
        let dl = effective_vectors(&beams, &mmse_precoder(&heq, 0.01).unwrap().matrix).unwrap();
        let ul = smbf_ul_combiners(&beams, &heq, 0.01).unwrap();
        for (x, y) in dl.iter().zip(&ul) {
            for (p, q) in x.as_slice().iter().zip(y.as_slice()) {
                assert!((p - q).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ul_combiners_null_the_other_ue() {
        // Two UEs whose equivalent matrix is full-rank with cross terms.
        let heq = CMat::from_vec(2, 2, vec![c(1.0, 0.2), c(0.4, -0.1), c(-0.3, 0.5), c(0.9, 0.0)]).unwrap();
        let cb = dft_codebook(&ArrayGeometry::new(2, 2).unwrap()).unwrap();
        let beams = vec![cb.get(0).clone(), cb.get(1).clone()];
        let comb = smbf_ul_combiners(&beams, &heq, 1e-14).unwrap();
        // Uplink coupling of UE u' into layer u is Σ_p Heq[u'][p]·c_u[p] in port space.
        for u in 0..2 {
            let coeffs: Vec<C64> = beams
                .iter()
                .map(|b| linalg::inner(b.as_slice(), comb[u].as_slice()))
                .collect();
            let other = 1 - u;
            let cross: C64 = (0..2).map(|p| heq[(other, p)] * coeffs[p]).sum();
            let own: C64 = (0..2).map(|p| heq[(u, p)] * coeffs[p]).sum();
            assert!(cross.norm() <= 1e-9 * own.norm(), "{cross} vs {own}");
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [BfScheme::Cbf, BfScheme::Smbf] {
            assert_eq!(s.to_string().parse::<BfScheme>().unwrap(), s);
            assert_eq!(s.beamformer().scheme(), s);
        }
        assert!("zf".parse::<BfScheme>().is_err());
    }

    #[test]
    fn port_assignment_rejects_shared_layers() {
        let pa = PortAssignment::sequential(&[4, 2, 6]).unwrap();
        assert_eq!(pa.layer_of(6), Some(2));
        assert_eq!(pa.ue_of(1), 2);
        assert!(PortAssignment::sequential(&[1, 1]).is_err());
    }

    fn arb_well_conditioned() -> impl Strategy<Value = CMat> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)
            .prop_map(|v| {
                CMat::from_vec(4, 4, v.into_iter().map(|(a, b)| c(a, b)).collect())
                    .unwrap()
                    .add_diagonal(2.5)
            })
            .prop_filter("condition number <= 20", |m| cond_number(m) <= 20.0)
    }

    proptest! {
        #[test]
        fn mmse_suppresses_interference(heq in arb_well_conditioned(), scale in -6i32..0) {
            let heq = heq.scale(c(10f64.powi(scale), 0.0));
            let v = mmse_precoder(&heq, 1e-9 * 10f64.powi(2 * scale)).unwrap().matrix;
            let e = &heq * &v;
            for r in 0..4 {
                for col in 0..4 {
                    if r != col {
                        prop_assert!(e[(r, col)].norm() <= 1e-6 * e[(r, r)].norm());
                    }
                }
            }
        }

        #[test]
        fn normalization_keeps_zero_pattern(scales in proptest::collection::vec(0.1f64..10.0, 3)) {
            let cb = dft_codebook(&ArrayGeometry::new(4, 1).unwrap()).unwrap();
            let beams = vec![cb.get(0).clone(), cb.get(1).clone(), cb.get(2).clone()];
            let heq = CMat::from_vec(3, 3, vec![
                c(1.0, 0.0), c(0.0, 0.0), c(0.2, 0.1),
                c(0.0, 0.0), c(0.8, 0.3), c(0.0, 0.0),
                c(0.1, 0.0), c(0.0, 0.0), c(1.1, 0.0),
            ]).unwrap();
            let map = CMat::from_fn(3, 3, |r, col| if r == col { c(scales[r], 0.0) } else { c(0.0, 0.0) });
            let before = &heq * &map;
            let (normed, _) = normalize_port_map(&map, &port_gram(&beams));
            let after = &heq * &normed;
            for r in 0..3 {
                for col in 0..3 {
                    prop_assert_eq!(before[(r, col)] == c(0.0, 0.0), after[(r, col)] == c(0.0, 0.0));
                }
            }
        }
    }
}
