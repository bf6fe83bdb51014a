//! Forward model of the projector/camera chain.
//!
//! A scene shifts the projected phase in proportion to its height above a
//! reference plane and scales each channel by its albedo. The camera then
//! mixes channels (crosstalk), adds an offset, applies a per-channel
//! response curve, adds seeded Gaussian noise and clamps.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same, wrap_cycles, DepthMap, RgbImage};
use crate::pattern::PatternSpec;

/// Largest crosstalk condition number accepted by [`CameraModel::new`].
pub const MAX_CONDITION: f64 = 1e6;

/// Per-channel monotone response `[0, 1] -> [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    /// `v^gamma`.
    Gamma(f64),
    /// Samples at evenly spaced inputs on `[0, 1]`, linearly interpolated.
    Curve(Vec<f64>),
}

impl Response {
    pub const LINEAR: Response = Response::Gamma(1.0);

    fn validate(&self) -> Result<()> {
        match self {
            Response::Gamma(g) => {
                if !(*g > 0.0) || !g.is_finite() {
                    return Err(Error::invalid(format!("gamma must be positive, got {g}")));
                }
            }
            Response::Curve(samples) => {
                if samples.len() < 2 {
                    return Err(Error::invalid("response curve needs at least two samples"));
                }
                if samples[0] != 0.0 {
                    return Err(Error::invalid("response curve must start at 0"));
                }
                if samples.windows(2).any(|w| !(w[1] >= w[0])) {
                    return Err(Error::invalid("response curve must be nondecreasing"));
                }
                if samples.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::invalid("response curve samples must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Evaluates the response at `v`, which must already be clamped.
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Response::Gamma(g) => {
                if *g == 1.0 {
                    v
                } else {
                    v.powf(*g)
                }
            }
            Response::Curve(s) => {
                let t = v * (s.len() - 1) as f64;
                let i = (t.floor() as usize).min(s.len() - 2);
                let f = t - i as f64;
                s[i] + (s[i + 1] - s[i]) * f
            }
        }
    }
}

/// Projector/camera distortion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraModelRaw", into = "CameraModelRaw")]
pub struct CameraModel {
    crosstalk: Matrix3<f64>,
    offset: Vector3<f64>,
    response: [Response; 3],
    noise_sigma: f64,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraModelRaw {
    /// Row `i` holds camera channel `i`'s weights over projector channels.
    crosstalk: [[f64; 3]; 3],
    #[serde(default)]
    offset: [f64; 3],
    #[serde(default = "linear_responses")]
    response: [Response; 3],
    #[serde(default)]
    noise_sigma: f64,
    #[serde(default)]
    seed: u64,
}

fn linear_responses() -> [Response; 3] {
    [Response::LINEAR, Response::LINEAR, Response::LINEAR]
}

impl TryFrom<CameraModelRaw> for CameraModel {
    type Error = Error;

    fn try_from(raw: CameraModelRaw) -> Result<Self> {
        CameraModel::new(raw.crosstalk, raw.offset, raw.response, raw.noise_sigma, raw.seed)
    }
}

impl From<CameraModel> for CameraModelRaw {
    fn from(c: CameraModel) -> Self {
        CameraModelRaw {
            crosstalk: c.crosstalk_rows(),
            offset: c.offset.into(),
            response: c.response,
            noise_sigma: c.noise_sigma,
            seed: c.seed,
        }
    }
}

/// Condition number of a 3x3 matrix from its singular values.
pub fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) fn matrix_from_rows(rows: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

impl CameraModel {
    pub fn new(
        crosstalk: [[f64; 3]; 3],
        offset: [f64; 3],
        response: [Response; 3],
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let m = matrix_from_rows(crosstalk);
        if m.iter().any(|v| !v.is_finite()) || offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("camera model contains non-finite values"));
        }
        let cond = condition_number(&m);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::invalid(format!(
                "crosstalk matrix condition number {cond:.3e} exceeds {MAX_CONDITION:e}"
            )));
        }
        for r in &response {
            r.validate()?;
        }
        if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
            return Err(Error::invalid("noise sigma must be a finite non-negative number"));
        }
        Ok(Self {
            crosstalk: m,
            offset: Vector3::from(offset),
            response,
            noise_sigma,
            seed,
        })
    }

    /// Identity mixing, zero offset, linear response, no noise.
    pub fn identity() -> Self {
        Self::linear([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.0; 3])
    }

    /// Linear, noiseless camera with the given mixing and offset.
    pub fn linear(crosstalk: [[f64; 3]; 3], offset: [f64; 3]) -> Self {
        Self::new(crosstalk, offset, linear_responses(), 0.0, 0).expect("linear camera must be valid")
    }

    /// Default distortion preset: gamma 2.2 on every channel, dominant-diagonal
    /// crosstalk and a small offset. Chosen to look like measured projector/
    /// camera curves, not taken from measured data.
    pub fn distorted() -> Self {
        Self::new(
            PRESET_CROSSTALK,
            PRESET_OFFSET,
            [Response::Gamma(2.2), Response::Gamma(2.2), Response::Gamma(2.2)],
            0.0,
            0,
        )
        .expect("preset is valid")
    }

    pub fn with_noise(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("noise sigma must be a finite non-negative number"));
        }
        self.noise_sigma = sigma;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_response(mut self, response: [Response; 3]) -> Result<Self> {
        for r in &response {
            r.validate()?;
        }
        self.response = response;
        Ok(self)
    }

    pub fn crosstalk(&self) -> &Matrix3<f64> {
        &self.crosstalk
    }

    pub fn crosstalk_rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.crosstalk[(i, j)]))
    }

    pub fn offset(&self) -> [f64; 3] {
        self.offset.into()
    }

    pub fn response(&self) -> &[Response; 3] {
        &self.response
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Deterministic part of the chain for one pixel (no noise, no final clamp).
    #[inline]
    pub fn respond(&self, rgb: [f64; 3]) -> [f64; 3] {
        let v = self.crosstalk * Vector3::from(rgb) + self.offset;
        std::array::from_fn(|c| self.response[c].eval(v[c].clamp(0.0, 1.0)))
    }
}

pub const PRESET_CROSSTALK: [[f64; 3]; 3] = [[0.9, 0.08, 0.02], [0.1, 0.8, 0.1], [0.03, 0.12, 0.85]];
pub const PRESET_OFFSET: [f64; 3] = [0.02, 0.02, 0.02];

/// Surface seen by the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    depth: DepthMap,
    albedo: RgbImage,
    kappa: f64,
    reference_depth: f64,
}

impl SceneModel {
    pub fn new(depth: DepthMap, albedo: RgbImage, kappa: f64, reference_depth: f64) -> Result<Self> {
        ensure_same(depth.dims(), albedo.dims())?;
        if kappa == 0.0 || !kappa.is_finite() {
            return Err(Error::invalid("kappa must be finite and nonzero"));
        }
        if !reference_depth.is_finite() {
            return Err(Error::invalid("reference depth must be finite"));
        }
        Ok(Self {
            depth,
            albedo,
            kappa,
            reference_depth,
        })
    }

    /// Flat scene at the reference depth with unit albedo.
    pub fn flat(width: usize, height: usize, kappa: f64, reference_depth: f64) -> Result<Self> {
        let depth = DepthMap::from_fn(width, height, |_, _| reference_depth)?;
        Self::new(depth, RgbImage::filled(width, height, [1.0; 3])?, kappa, reference_depth)
    }

    pub fn depth(&self) -> &DepthMap {
        &self.depth
    }

    pub fn albedo(&self) -> &RgbImage {
        &self.albedo
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn reference_depth(&self) -> f64 {
        self.reference_depth
    }

    pub fn with_albedo(mut self, albedo: RgbImage) -> Result<Self> {
        ensure_same(self.depth.dims(), albedo.dims())?;
        self.albedo = albedo;
        Ok(self)
    }

    /// Phase shift in cycles (unwrapped) induced at pixel `i`, if the depth is valid.
    #[inline]
    pub fn phase_shift(&self, i: usize) -> Option<f64> {
        self.depth.get(i).map(|z| self.kappa * (z - self.reference_depth))
    }
}

/// Unwrapped phase the camera observes: pattern phase plus depth shift.
/// `None` where the scene depth is masked.
pub fn observed_phase(spec: &PatternSpec, scene: &SceneModel) -> Result<Vec<Option<f64>>> {
    spec.validate()?;
    ensure_same((spec.width, spec.height), scene.depth.dims())?;
    let w = spec.width;
    Ok((0..spec.width * spec.height)
        .map(|i| scene.phase_shift(i).map(|s| spec.unwrapped_phase_at(i % w, i / w) + s))
        .collect())
}

/// Pattern as reflected by the scene, before the camera. Pixels without a
/// valid depth return no light.
pub fn reflect(spec: &PatternSpec, scene: &SceneModel) -> Result<RgbImage> {
    let phase = observed_phase(spec, scene)?;
    let mut img = RgbImage::new(spec.width, spec.height)?;
    for (i, p) in phase.into_iter().enumerate() {
        if let Some(p) = p {
            let rho = scene.albedo.at(i);
            let c = spec.intensities(wrap_cycles(p));
            img.set_at(i, std::array::from_fn(|k| rho[k] * c[k]));
        }
    }
    Ok(img)
}

/// Runs an image through the camera model. Noise is drawn in row-major,
/// channel-minor order from a generator seeded with the model's seed.
pub fn apply_camera(image: &RgbImage, cam: &CameraModel) -> RgbImage {
    let mut out = image.map(|p| cam.respond(p));
    if cam.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cam.seed);
        let normal = Normal::new(0.0, cam.noise_sigma).expect("sigma validated");
        for i in 0..out.len() {
            let p = out.at(i);
            let noisy: [f64; 3] = std::array::from_fn(|c| p[c] + normal.sample(&mut rng));
            out.set_at(i, noisy);
        }
    }
    out.clamped()
}

/// Ramp value of column `x` in a calibration capture of width `width`.
#[inline]
pub fn ramp_value(x: usize, width: usize) -> f64 {
    if width <= 1 {
        0.0
    } else {
        x as f64 / (width - 1) as f64
    }
}

/// Captures of three single-channel ramps (0 to 1, left to right), one per
/// projector channel.
pub fn calibration_captures(cam: &CameraModel, width: usize, height: usize) -> Result<[RgbImage; 3]> {
    let mut out = Vec::with_capacity(3);
    for k in 0..3 {
        let ramp = RgbImage::from_fn(width, height, |x, _| {
            let mut p = [0.0; 3];
            p[k] = ramp_value(x, width);
            p
        })?;
        // decorrelate the noise of the three captures
        let cam_k = cam.clone().with_seed(cam.seed.wrapping_add(k as u64));
        out.push(apply_camera(&ramp, &cam_k));
    }
    Ok(out.try_into().expect("three captures"))
}

/// Salt noise: each pixel independently turns white with probability
/// `fraction`.
pub fn add_salt_noise(image: &RgbImage, fraction: f64, seed: u64) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("salt fraction must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for i in 0..out.len() {
        if rng.random::<f64>() < fraction {
            out.set_at(i, [1.0; 3]);
        }
    }
    Ok(out)
}

/// Procedural surface used to build a [`SceneModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Surface {
    Plane,
    /// Half ellipsoid `height * sqrt(1 - r^2 / radius^2)` on the reference plane.
    Hemisphere {
        radius: f64,
        height: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
    },
    /// Section of a sphere with footprint `radius` and apex `height`, with
    /// depth measured in pixel units. Unlike the hemisphere its slope stays
    /// finite at the rim.
    Cap {
        radius: f64,
        height: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
    },
}

/// Procedural per-channel albedo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Albedo {
    Uniform { rgb: [f64; 3] },
    /// `mean + amplitude * sin(2π (x + y) / period + channel * 2π / 3)`.
    Sinusoidal {
        mean: [f64; 3],
        amplitude: [f64; 3],
        period: f64,
    },
}

/// Declarative scene description, as found in pipeline configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    /// Depth-to-phase gain in cycles per depth unit.
    pub kappa: f64,
    pub reference_depth: f64,
    pub surface: Surface,
    pub albedo: Albedo,
}

impl Default for SceneSpec {
    /// Spherical cap whose apex shifts the phase by five cycles.
    fn default() -> Self {
        Self {
            kappa: 0.05,
            reference_depth: 0.0,
            surface: Surface::Cap {
                radius: 200.0,
                height: 100.0,
                center: None,
            },
            albedo: Albedo::Uniform { rgb: [1.0; 3] },
        }
    }
}

impl SceneSpec {
    pub fn build(&self, width: usize, height: usize) -> Result<SceneModel> {
        let z0 = self.reference_depth;
        let depth = match &self.surface {
            Surface::Plane => DepthMap::from_fn(width, height, |_, _| z0)?,
            Surface::Hemisphere {
                radius,
                height: peak,
                center,
            } => {
                if !(*radius > 0.0) {
                    return Err(Error::invalid("hemisphere radius must be positive"));
                }
                let [cx, cy] = center.unwrap_or([(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0]);
                DepthMap::from_fn(width, height, |x, y| {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let s = 1.0 - (dx * dx + dy * dy) / (radius * radius);
                    z0 + if s > 0.0 { peak * s.sqrt() } else { 0.0 }
                })?
            }
            Surface::Cap {
                radius,
                height: peak,
                center,
            } => {
                if !(*radius > 0.0 && *peak > 0.0) {
                    return Err(Error::invalid("cap radius and height must be positive"));
                }
                let sphere = (radius * radius + peak * peak) / (2.0 * peak);
                let [cx, cy] = center.unwrap_or([(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0]);
                DepthMap::from_fn(width, height, |x, y| {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let r2 = dx * dx + dy * dy;
                    z0 + if r2 < radius * radius {
                        (sphere * sphere - r2).sqrt() - (sphere - peak)
                    } else {
                        0.0
                    }
                })?
            }
        };
        let albedo = match &self.albedo {
            Albedo::Uniform { rgb } => RgbImage::filled(width, height, *rgb)?,
            Albedo::Sinusoidal {
                mean,
                amplitude,
                period,
            } => {
                if !(*period > 0.0) {
                    return Err(Error::invalid("albedo period must be positive"));
                }
                RgbImage::from_fn(width, height, |x, y| {
                    let t = std::f64::consts::TAU * (x + y) as f64 / period;
                    std::array::from_fn(|c| {
                        mean[c] + amplitude[c] * (t + c as f64 * std::f64::consts::TAU / 3.0).sin()
                    })
                })?
            }
        };
        SceneModel::new(depth, albedo, self.kappa, z0)
    }
}
