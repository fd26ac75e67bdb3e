//! Node placement, free-space path loss, Rayleigh block fading and the
//! imperfect-CSI model.
//!
//! A channel coefficient is `sqrt(path gain) * x` with `x ~ CN(0, 1)`. The
//! path gain depends only on the layout, so it is computed once per trial
//! ([`PathGains`]) while the small-scale part is redrawn every round.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light as written in the free-space model (not 299 792 458).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub type Point = [f64; 2];

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossParams {
    /// Antenna gain `G_A`.
    pub antenna_gain: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Path-loss exponent.
    pub exponent: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            antenna_gain: 4.11,
            carrier_freq: 915.0e6,
            exponent: 3.0,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.antenna_gain > 0.0 && self.carrier_freq > 0.0 && self.exponent > 0.0) {
            return Err(Error::Domain(format!(
                "path-loss parameters must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Free-space path gain `G_A (c / (4 pi f_c d))^PL`.
pub fn path_loss(distance: f64, params: &PathLossParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance}"
        )));
    }
    let ratio = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * params.carrier_freq * distance);
    Ok(params.antenna_gain * ratio.powf(params.exponent))
}

/// One draw of `CN(0, 1)`: independent real and imaginary parts of variance 1/2.
pub fn sample_small_scale<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Positions of the access point, relays and devices, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLayout {
    pub ap_position: Point,
    pub relay_positions: Vec<Point>,
    pub device_positions: Vec<Point>,
}

impl NodeLayout {
    pub fn num_devices(&self) -> usize {
        self.device_positions.len()
    }

    pub fn num_relays(&self) -> usize {
        self.relay_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.device_positions.is_empty() {
            return Err(Error::Domain("layout needs at least one device".into()));
        }
        for (k, &dev) in self.device_positions.iter().enumerate() {
            if !(distance(dev, self.ap_position) > 0.0) {
                return Err(Error::Domain(format!("device {k} coincides with the AP")));
            }
            for (n, &relay) in self.relay_positions.iter().enumerate() {
                if !(distance(dev, relay) > 0.0) {
                    return Err(Error::Domain(format!("device {k} coincides with relay {n}")));
                }
            }
        }
        for (n, &relay) in self.relay_positions.iter().enumerate() {
            if !(distance(relay, self.ap_position) > 0.0) {
                return Err(Error::Domain(format!("relay {n} coincides with the AP")));
            }
        }
        Ok(())
    }

    /// Line scenario: AP at the origin, relays at `x = x_relay`, devices
    /// uniform in the rectangle `[x_min, x_max] x [y_min, y_max]`.
    ///
    /// A single relay sits on the axis. Several relays are spread evenly in
    /// `y` over the device rectangle's span.
    pub fn line<R: Rng + ?Sized>(
        geometry: &LineGeometry,
        num_devices: usize,
        num_relays: usize,
        rng: &mut R,
    ) -> Self {
        let span = geometry.device_y_max - geometry.device_y_min;
        let relay_positions = if num_relays == 1 {
            vec![[geometry.x_relay, 0.0]]
        } else {
            (0..num_relays)
                .map(|n| {
                    let y = geometry.device_y_min + (n as f64 + 0.5) * span / num_relays as f64;
                    [geometry.x_relay, y]
                })
                .collect()
        };
        let device_positions = (0..num_devices)
            .map(|_| {
                [
                    rng.random_range(geometry.device_x_min..=geometry.device_x_max),
                    rng.random_range(geometry.device_y_min..=geometry.device_y_max),
                ]
            })
            .collect();
        Self {
            ap_position: [0.0, 0.0],
            relay_positions,
            device_positions,
        }
    }

    /// Cell scenario: AP at the centre of a disc, devices uniform over the
    /// disc, relays equally spaced on a concentric ring.
    pub fn cell<R: Rng + ?Sized>(
        geometry: &CellGeometry,
        num_devices: usize,
        num_relays: usize,
        rng: &mut R,
    ) -> Self {
        let relay_positions = (0..num_relays)
            .map(|n| {
                let angle = 2.0 * std::f64::consts::PI * n as f64 / num_relays as f64;
                [
                    geometry.relay_ring_radius * angle.cos(),
                    geometry.relay_ring_radius * angle.sin(),
                ]
            })
            .collect();
        let device_positions = (0..num_devices)
            .map(|_| {
                // sqrt keeps the density uniform over the area
                let r = geometry.cell_radius * rng.random::<f64>().sqrt();
                let angle = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                [r * angle.cos(), r * angle.sin()]
            })
            .collect();
        Self {
            ap_position: [0.0, 0.0],
            relay_positions,
            device_positions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGeometry {
    pub x_relay: f64,
    pub device_x_min: f64,
    pub device_x_max: f64,
    pub device_y_min: f64,
    pub device_y_max: f64,
}

impl Default for LineGeometry {
    fn default() -> Self {
        Self {
            x_relay: 50.0,
            device_x_min: 80.0,
            device_x_max: 120.0,
            device_y_min: -60.0,
            device_y_max: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub cell_radius: f64,
    pub relay_ring_radius: f64,
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self {
            cell_radius: 120.0,
            relay_ring_radius: 50.0,
        }
    }
}

/// Complex gains for one coherence interval (one FL round).
///
/// `g` is stored row-major, `K` rows of `N` relay entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Device to AP, length `K`.
    pub h: Vec<Complex64>,
    /// Device to relay, `K x N` row-major.
    pub g: Vec<Complex64>,
    /// Relay to AP, length `N`.
    pub f: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn new(h: Vec<Complex64>, g: Vec<Complex64>, f: Vec<Complex64>) -> Result<Self> {
        if g.len() != h.len() * f.len() {
            return Err(Error::DimensionMismatch(format!(
                "g has {} entries, expected K*N = {}*{}",
                g.len(),
                h.len(),
                f.len()
            )));
        }
        let all_finite = h.iter().chain(&g).chain(&f).all(|c| c.re.is_finite() && c.im.is_finite());
        if !all_finite {
            return Err(Error::Domain("channel coefficients must be finite".into()));
        }
        Ok(Self { h, g, f })
    }

    /// A relay-free realization (`N = 0`).
    pub fn direct_only(h: Vec<Complex64>) -> Self {
        Self {
            h,
            g: Vec::new(),
            f: Vec::new(),
        }
    }

    pub fn num_devices(&self) -> usize {
        self.h.len()
    }

    pub fn num_relays(&self) -> usize {
        self.f.len()
    }

    #[inline]
    pub fn g(&self, k: usize, n: usize) -> Complex64 {
        self.g[k * self.f.len() + n]
    }

    /// Row `k` of `g`: device `k` to every relay.
    pub fn g_row(&self, k: usize) -> &[Complex64] {
        let n = self.f.len();
        &self.g[k * n..(k + 1) * n]
    }
}

/// Large-scale power gains of every link for a fixed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGains {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
}

impl PathGains {
    pub fn from_layout(layout: &NodeLayout, params: &PathLossParams) -> Result<Self> {
        layout.validate()?;
        params.validate()?;
        let ap = layout.ap_position;
        let h = layout
            .device_positions
            .iter()
            .map(|&d| path_loss(distance(d, ap), params))
            .collect::<Result<Vec<_>>>()?;
        let mut g = Vec::with_capacity(layout.num_devices() * layout.num_relays());
        for &d in &layout.device_positions {
            for &r in &layout.relay_positions {
                g.push(path_loss(distance(d, r), params)?);
            }
        }
        let f = layout
            .relay_positions
            .iter()
            .map(|&r| path_loss(distance(r, ap), params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { h, g, f })
    }

    /// Draws small-scale fading for every link.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let mut draw = |gain: &f64| gain.sqrt() * sample_small_scale(rng);
        ChannelRealization {
            h: self.h.iter().map(&mut draw).collect(),
            g: self.g.iter().map(&mut draw).collect(),
            f: self.f.iter().map(&mut draw).collect(),
        }
    }

    /// Draws the true channels and the transmitter-side estimate of them.
    ///
    /// With `kappa = None` the estimate equals the truth.
    pub fn realize_with_csi<R: Rng + ?Sized, E: Rng + ?Sized>(
        &self,
        kappa: Option<f64>,
        rng: &mut R,
        csi_rng: &mut E,
    ) -> Result<(ChannelRealization, ChannelRealization)> {
        let Some(kappa) = kappa else {
            let truth = self.realize(rng);
            return Ok((truth.clone(), truth));
        };
        check_kappa(kappa)?;
        let mut truth = Vec::new();
        let mut perceived = Vec::new();
        for gains in [&self.h, &self.g, &self.f] {
            let mut t = Vec::with_capacity(gains.len());
            let mut p = Vec::with_capacity(gains.len());
            for &gain in gains.iter() {
                let small = sample_small_scale(rng);
                t.push(gain.sqrt() * small);
                p.push(apply_csi_error(small, gain, kappa, csi_rng)?);
            }
            truth.push(t);
            perceived.push(p);
        }
        let unpack = |mut v: Vec<Vec<Complex64>>| {
            let f = v.pop().unwrap_or_default();
            let g = v.pop().unwrap_or_default();
            let h = v.pop().unwrap_or_default();
            ChannelRealization { h, g, f }
        };
        Ok((unpack(truth), unpack(perceived)))
    }
}

/// Draws one channel realization for `layout`.
pub fn realize_channels<R: Rng + ?Sized>(
    layout: &NodeLayout,
    params: &PathLossParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Ok(PathGains::from_layout(layout, params)?.realize(rng))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Domain(format!("CSI weight kappa must lie in [0, 1], got {kappa}")));
    }
    Ok(())
}

/// Imperfect CSI: `sqrt(g) (sqrt(kappa) h + sqrt(1 - kappa) n)` with `n ~ CN(0, 1)`.
///
/// `small_scale` is the unit-variance fading coefficient; the path gain is
/// applied here.
pub fn apply_csi_error<R: Rng + ?Sized>(
    small_scale: Complex64,
    path_gain: f64,
    kappa: f64,
    rng: &mut R,
) -> Result<Complex64> {
    check_kappa(kappa)?;
    if !(path_gain >= 0.0) {
        return Err(Error::Domain(format!("path gain must be nonnegative, got {path_gain}")));
    }
    let noise = sample_small_scale(rng);
    Ok(path_gain.sqrt() * (kappa.sqrt() * small_scale + (1.0 - kappa).sqrt() * noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{StreamPurpose, TrialSeed};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table1() -> PathLossParams {
        PathLossParams::default()
    }

    #[test]
    fn path_loss_reference_values() {
        // 4.11 * (3e8 / (4 pi 915e6))^3, evaluated by hand
        let direct = 4.11 * (3.0e8 / (4.0 * std::f64::consts::PI * 915.0e6)).powi(3);
        let at_1m = path_loss(1.0, &table1()).unwrap();
        assert!((at_1m - 7.300e-5).abs() / 7.300e-5 < 1e-3);
        assert!((at_1m - direct).abs() < 1e-18);
        let at_100m = path_loss(100.0, &table1()).unwrap();
        assert!((at_100m - 7.300e-11).abs() / 7.300e-11 < 1e-3);
        let unit = PathLossParams {
            antenna_gain: 1.0,
            carrier_freq: 3.0e8 / (4.0 * std::f64::consts::PI),
            exponent: 3.0,
        };
        assert!((path_loss(1.0, &unit).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_loss_rejects_nonpositive_distance() {
        assert!(matches!(path_loss(0.0, &table1()), Err(Error::Domain(_))));
        assert!(matches!(path_loss(-3.0, &table1()), Err(Error::Domain(_))));
    }

    #[test]
    fn path_loss_strictly_decreasing() {
        let p = table1();
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let v = path_loss(i as f64 * 0.7, &p).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn small_scale_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut mean = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for _ in 0..n {
            let x = sample_small_scale(&mut rng);
            mean += x;
            power += x.norm_sqr();
        }
        mean /= n as f64;
        power /= n as f64;
        assert!(mean.norm() < 0.01, "mean {mean}");
        assert!((power - 1.0).abs() < 0.01, "power {power}");
    }

    #[test]
    fn small_scale_is_seed_deterministic() {
        let a = sample_small_scale(&mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_small_scale(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn relay_free_layout_has_empty_relay_channels() {
        let layout = NodeLayout {
            ap_position: [0.0, 0.0],
            relay_positions: vec![],
            device_positions: vec![[10.0, 0.0], [0.0, 20.0], [5.0, 5.0]],
        };
        let ch = realize_channels(&layout, &table1(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(ch.h.len(), 3);
        assert!(ch.g.is_empty());
        assert!(ch.f.is_empty());
    }

    #[test]
    fn channel_power_matches_path_loss() {
        let layout = NodeLayout {
            ap_position: [0.0, 0.0],
            relay_positions: vec![[50.0, 0.0]],
            device_positions: vec![[100.0, 0.0], [80.0, 30.0]],
        };
        let gains = PathGains::from_layout(&layout, &table1()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 100_000;
        let mut acc = [0.0; 2];
        for _ in 0..m {
            let ch = gains.realize(&mut rng);
            for k in 0..2 {
                acc[k] += ch.h[k].norm_sqr();
            }
        }
        for k in 0..2 {
            let expected = path_loss(distance(layout.device_positions[k], [0.0, 0.0]), &table1()).unwrap();
            let est = acc[k] / m as f64;
            assert!((est - expected).abs() / expected < 0.02, "device {k}: {est} vs {expected}");
        }
    }

    #[test]
    fn identical_seeds_identical_realizations() {
        let seed = TrialSeed::new(9, 2);
        let geometry = LineGeometry::default();
        let layout = NodeLayout::line(&geometry, 5, 1, &mut seed.rng(StreamPurpose::Layout));
        let again = NodeLayout::line(&geometry, 5, 1, &mut seed.rng(StreamPurpose::Layout));
        assert_eq!(layout, again);
        let a = realize_channels(&layout, &table1(), &mut seed.rng(StreamPurpose::Channel)).unwrap();
        let b = realize_channels(&layout, &table1(), &mut seed.rng(StreamPurpose::Channel)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn layout_generators_respect_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let line = NodeLayout::line(&LineGeometry::default(), 50, 1, &mut rng);
        assert_eq!(line.relay_positions, vec![[50.0, 0.0]]);
        for p in &line.device_positions {
            assert!((80.0..=120.0).contains(&p[0]) && (-60.0..=60.0).contains(&p[1]));
        }
        let cell = NodeLayout::cell(&CellGeometry::default(), 50, 4, &mut rng);
        for r in &cell.relay_positions {
            assert!((distance(*r, [0.0, 0.0]) - 50.0).abs() < 1e-9);
        }
        for p in &cell.device_positions {
            assert!(distance(*p, [0.0, 0.0]) <= 120.0);
        }
    }

    #[test]
    fn csi_error_exact_when_kappa_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Complex64::new(0.3, 0.4);
        assert_eq!(apply_csi_error(h, 1.0, 1.0, &mut rng).unwrap(), h);
        let g = 2.5e-9;
        let out = apply_csi_error(h, g, 1.0, &mut rng).unwrap();
        assert!((out - g.sqrt() * h).norm() < 1e-15 * g.sqrt());
    }

    #[test]
    fn csi_error_rejects_bad_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Complex64::new(1.0, 0.0);
        assert!(apply_csi_error(h, 1.0, -0.1, &mut rng).is_err());
        assert!(apply_csi_error(h, 1.0, 1.1, &mut rng).is_err());
    }

    #[test]
    fn csi_error_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (g, kappa) = (3.0, 0.6);
        let m = 100_000;
        let mut acc = 0.0;
        // kappa = 0 output must not depend on h
        let mut zero_a = ChaCha8Rng::seed_from_u64(8);
        let mut zero_b = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..m {
            let h = sample_small_scale(&mut rng);
            let out = apply_csi_error(h, g, kappa, &mut rng).unwrap();
            acc += (out - (g * kappa).sqrt() * h).norm_sqr();
            let a = apply_csi_error(h, 1.0, 0.0, &mut zero_a).unwrap();
            let b = apply_csi_error(Complex64::new(5.0, -1.0), 1.0, 0.0, &mut zero_b).unwrap();
            assert_eq!(a, b);
        }
        let est = acc / m as f64;
        assert!((est - g * 0.4).abs() / (g * 0.4) < 0.02, "{est}");
    }
}
