use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::seed::rng_from_seed;
use crate::error::{Error, Result};
use crate::image::{gaussian_smooth, sqrt_transform, z_score, ImageGrid};
use crate::msd::{detection_statistic, MsdFilter, ScaleGrid};
use crate::scalar::Real;

/// One deterministic image transform applied after sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum Stage {
    Smooth {
        sigma: f64,
    },
    Sqrt,
    #[serde(rename = "zscore")]
    ZScore {
        mu0: f64,
        sigma0: f64,
    },
    Msd {
        scales: ScaleGrid,
    },
    Negate,
}

/// Null distribution of an image with no sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Independent Poisson counts with mean `lambda0`.
    PoissonField { lambda0: f64 },
    /// Independent normal pixels.
    GaussianField { mu: f64, sigma: f64 },
    /// A base field pushed through `pipeline` in order.
    Filtered { base: Box<NoiseModel>, pipeline: Vec<Stage> },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    NonNegative,
    Any,
}

impl NoiseModel {
    pub fn filtered(base: NoiseModel, pipeline: Vec<Stage>) -> Self {
        NoiseModel::Filtered { base: Box::new(base), pipeline }
    }

    /// Innermost unfiltered field and the flattened stage list.
    pub fn flatten(&self) -> (&NoiseModel, Vec<&Stage>) {
        match self {
            NoiseModel::Filtered { base, pipeline } => {
                let (root, mut stages) = base.flatten();
                stages.extend(pipeline.iter());
                (root, stages)
            }
            other => (other, Vec::new()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::PoissonField { lambda0 } => {
                if !(*lambda0 >= 0.0 && lambda0.is_finite()) {
                    return Err(Error::Model(format!("Poisson rate must be >= 0, got {lambda0}")));
                }
            }
            NoiseModel::GaussianField { mu, sigma } => {
                if !mu.is_finite() || !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::Model(format!(
                        "Gaussian field needs finite mu and sigma > 0, got ({mu}, {sigma})"
                    )));
                }
            }
            NoiseModel::Filtered { base, pipeline } => {
                base.validate()?;
                if pipeline.is_empty() {
                    return Err(Error::Model("filtered model has an empty pipeline".into()));
                }
            }
        }
        let (root, stages) = self.flatten();
        let mut sign = match root {
            NoiseModel::PoissonField { .. } => Sign::NonNegative,
            _ => Sign::Any,
        };
        for (i, stage) in stages.iter().enumerate() {
            sign = match stage {
                Stage::Smooth { sigma } => {
                    if !(*sigma > 0.0 && sigma.is_finite()) {
                        return Err(Error::Model(format!("stage {i}: smoothing sigma must be positive")));
                    }
                    sign
                }
                Stage::Sqrt => {
                    if sign != Sign::NonNegative {
                        return Err(Error::Model(format!(
                            "stage {i}: sqrt requires a nonnegative input but the previous stage can go negative"
                        )));
                    }
                    Sign::NonNegative
                }
                Stage::ZScore { mu0, sigma0 } => {
                    if !mu0.is_finite() || !(*sigma0 > 0.0 && sigma0.is_finite()) {
                        return Err(Error::Model(format!("stage {i}: zscore needs sigma0 > 0")));
                    }
                    Sign::Any
                }
                Stage::Msd { .. } | Stage::Negate => Sign::Any,
            };
        }
        Ok(())
    }
}

enum PreparedStage<T: Real> {
    Smooth(f64),
    Sqrt,
    ZScore(f64, f64),
    Msd(MsdFilter<T>),
    Negate,
}

/// Stage list with per-size state (FFT plans, kernel spectra) built once.
pub struct StagePipeline<T: Real> {
    rows: usize,
    cols: usize,
    stages: Vec<PreparedStage<T>>,
}

impl<T: Real> StagePipeline<T> {
    pub fn new<'a>(stages: impl IntoIterator<Item = &'a Stage>, rows: usize, cols: usize) -> Result<Self> {
        let stages = stages
            .into_iter()
            .map(|s| {
                Ok(match s {
                    Stage::Smooth { sigma } => PreparedStage::Smooth(*sigma),
                    Stage::Sqrt => PreparedStage::Sqrt,
                    Stage::ZScore { mu0, sigma0 } => PreparedStage::ZScore(*mu0, *sigma0),
                    Stage::Msd { scales } => PreparedStage::Msd(MsdFilter::new(rows, cols, scales)?),
                    Stage::Negate => PreparedStage::Negate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows, cols, stages })
    }

    pub fn apply(&self, img: &ImageGrid<T>) -> Result<ImageGrid<T>> {
        img.check_same_dims((self.rows, self.cols))?;
        let mut cur = img.clone();
        for stage in &self.stages {
            cur = match stage {
                PreparedStage::Smooth(sigma) => gaussian_smooth(&cur, *sigma)?,
                PreparedStage::Sqrt => sqrt_transform(&cur)?,
                PreparedStage::ZScore(mu, s) => z_score(&cur, *mu, *s)?,
                PreparedStage::Msd(filter) => filter.min_image(&cur)?,
                PreparedStage::Negate => detection_statistic(&cur),
            };
        }
        Ok(cur)
    }
}

/// Applies `stages` to an image in order.
pub fn apply_stages<T: Real>(img: &ImageGrid<T>, stages: &[Stage]) -> Result<ImageGrid<T>> {
    StagePipeline::new(stages, img.rows(), img.cols())?.apply(img)
}

#[derive(Clone, Copy)]
enum Base {
    Poisson(f64),
    Gaussian(f64, f64),
}

/// A validated noise model bound to an image size, ready to sample.
pub struct PreparedModel<T: Real> {
    rows: usize,
    cols: usize,
    base: Base,
    pipeline: StagePipeline<T>,
}

impl<T: Real> PreparedModel<T> {
    pub fn new(model: &NoiseModel, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(format!("image dimensions must be positive, got {rows}x{cols}")));
        }
        model.validate()?;
        let (root, stages) = model.flatten();
        let base = match root {
            NoiseModel::PoissonField { lambda0 } => Base::Poisson(*lambda0),
            NoiseModel::GaussianField { mu, sigma } => Base::Gaussian(*mu, *sigma),
            NoiseModel::Filtered { .. } => unreachable!("flatten returns an unfiltered root"),
        };
        let pipeline = StagePipeline::new(stages, rows, cols)?;
        Ok(Self { rows, cols, base, pipeline })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ImageGrid<T>> {
        let n = self.rows * self.cols;
        let values: Vec<T> = match self.base {
            Base::Poisson(0.0) => vec![T::zero(); n],
            Base::Poisson(lambda) => {
                let dist = Poisson::new(lambda).map_err(|e| Error::Model(e.to_string()))?;
                (0..n).map(|_| T::of(dist.sample(rng))).collect()
            }
            Base::Gaussian(mu, sigma) => {
                let dist = Normal::new(mu, sigma).map_err(|e| Error::Model(e.to_string()))?;
                (0..n).map(|_| T::of(dist.sample(rng))).collect()
            }
        };
        let img = ImageGrid::from_vec_unchecked(self.rows, self.cols, values);
        self.pipeline.apply(&img)
    }

    pub fn sample(&self, seed: u64) -> Result<ImageGrid<T>> {
        self.sample_with(&mut rng_from_seed(seed))
    }
}

/// Deterministic null image for `(model, rows, cols, seed)`.
pub fn simulate_noise_image<T: Real>(model: &NoiseModel, rows: usize, cols: usize, seed: u64) -> Result<ImageGrid<T>> {
    PreparedModel::new(model, rows, cols)?.sample(seed)
}
