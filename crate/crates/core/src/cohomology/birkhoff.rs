use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cohomology::observable::Observable;
use crate::error::Result;
use crate::maps::PiecewiseMap;
use crate::sampling::stream_rng;
use crate::sum::CompensatedSum;

/// Amplitude of the per-step perturbation of a dithered orbit.
pub const DITHER: f64 = 1.0 / 1_125_899_906_842_624.0; // 2^-50

/// `S_n f(x) = Σ_{k<n} f(T^k x)`.
pub fn birkhoff_sum(map: &PiecewiseMap, f: &Observable, x: f64, n: usize) -> Result<f64> {
    let mut s = CompensatedSum::new();
    let mut p = x;
    map.locate(p)?;
    for _ in 0..n {
        s.add(f.evaluate(p));
        p = map.step(p)?.1;
    }
    Ok(s.value())
}

/// Orbit of `map` where each step adds uniform noise of size [`DITHER`].
///
/// Exact floating-point orbits of maps with affine branches of slope 2
/// shift out one mantissa bit per step and reach a fixed point after ~55
/// steps; the perturbation keeps long orbits statistically typical.
pub struct DitheredOrbit<'a> {
    map: &'a PiecewiseMap,
    x: f64,
    rng: Option<ChaCha8Rng>,
}

impl<'a> DitheredOrbit<'a> {
    /// With `seed = None` the orbit is the exact floating-point orbit.
    pub fn new(map: &'a PiecewiseMap, x0: f64, seed: Option<u64>) -> Result<Self> {
        map.locate(x0)?;
        Ok(Self { map, x: x0, rng: seed.map(|s| stream_rng(s, 0)) })
    }

    pub fn current(&self) -> f64 {
        self.x
    }

    /// Advances one step and returns the new point.
    pub fn advance(&mut self) -> Result<f64> {
        let mut y = self.map.step(self.x)?.1;
        if let Some(rng) = self.rng.as_mut() {
            y += rng.gen_range(-DITHER..DITHER);
            if y < 0.0 {
                y = -y;
            } else if y > 1.0 {
                y = 2.0 - y;
            }
        }
        self.x = y;
        Ok(y)
    }
}

/// Time average of `f` over `n` steps after `burn_in` steps.
pub fn birkhoff_average(
    map: &PiecewiseMap,
    f: &Observable,
    x0: f64,
    burn_in: usize,
    n: usize,
    dither_seed: Option<u64>,
) -> Result<f64> {
    let mut orbit = DitheredOrbit::new(map, x0, dither_seed)?;
    for _ in 0..burn_in {
        orbit.advance()?;
    }
    let mut s = CompensatedSum::new();
    for _ in 0..n {
        s.add(f.evaluate(orbit.current()));
        orbit.advance()?;
    }
    Ok(s.value() / n as f64)
}
