use std::time::{SystemTime, UNIX_EPOCH};

use super::{Catalog, Method, RunConfig, RunMetadata};
use crate::cluster::{find_threshold, FcpResult, ThresholdOptions};
use crate::error::{Error, Result};
use crate::image::{estimate_background, load_image, ImageGrid};
use crate::noise::{
    build_max_distributions, child_seed, max_percentile, superset_alg1, superset_alg2, ConfidenceSuperset,
    MaxDistributionTable, NoiseModel, PreparedModel, Stage, StagePipeline, SupersetMethod,
};

// Independent random streams derived from the run seed.
const STREAM_TABLE: u64 = 1;
const STREAM_ZSCORE: u64 = 2;

/// Null simulation backing the superset.
enum NullDistribution {
    Quantile { r: f64 },
    Table(MaxDistributionTable<f64>),
}

/// Background rate for the null model: the configured value, or the mean of
/// the raw counts.
pub fn background_rate(config: &RunConfig, raw: &ImageGrid<f64>) -> f64 {
    config.lambda0.unwrap_or_else(|| raw.mean())
}

/// Statistic stages for `config.method` at background rate `lambda0`.
///
/// For FCP-Z the z-score constants are the median and scaled MAD of one
/// simulated null image after smoothing and square root, so the whole stage
/// list is fixed before the data are seen.
pub fn statistic_stages(config: &RunConfig, rows: usize, cols: usize, lambda0: f64) -> Result<Vec<Stage>> {
    let mut stages = vec![Stage::Smooth { sigma: config.sigma_smooth }, Stage::Sqrt];
    match config.method {
        Method::FcpZ => {
            let pre = NoiseModel::filtered(NoiseModel::PoissonField { lambda0 }, stages.clone());
            let null = PreparedModel::<f64>::new(&pre, rows, cols)?.sample(child_seed(config.seed, STREAM_ZSCORE))?;
            let (mu0, sigma0) = estimate_background(&null);
            stages.push(Stage::ZScore { mu0, sigma0 });
        }
        Method::Msfcp => {
            stages.push(Stage::Msd { scales: config.scales.clone() });
            stages.push(Stage::Negate);
        }
    }
    Ok(stages)
}

/// A configured detection procedure for one image size and background rate.
///
/// Preparing runs the null simulation once; [`Detector::detect`] can then be
/// applied to any number of same-sized count images.
pub struct Detector {
    config: RunConfig,
    rows: usize,
    cols: usize,
    lambda0: f64,
    model: NoiseModel,
    pipeline: StagePipeline<f64>,
    null: NullDistribution,
}

/// Output of one detection.
pub struct Detection {
    pub catalog: Catalog,
    pub result: FcpResult<f64>,
    pub superset: ConfidenceSuperset,
    pub statistic: ImageGrid<f64>,
}

impl Detector {
    fn base(config: &RunConfig, rows: usize, cols: usize, lambda0: f64) -> Result<(NoiseModel, StagePipeline<f64>)> {
        config.validate()?;
        if !(lambda0 >= 0.0 && lambda0.is_finite()) {
            return Err(Error::Config(format!("lambda0 must be >= 0, got {lambda0}")));
        }
        let stages = statistic_stages(config, rows, cols, lambda0)?;
        let pipeline = StagePipeline::new(&stages, rows, cols)?;
        Ok((NoiseModel::filtered(NoiseModel::PoissonField { lambda0 }, stages), pipeline))
    }

    /// The null model this detector simulates from (and expects of a cached table).
    pub fn null_model(config: &RunConfig, rows: usize, cols: usize, lambda0: f64) -> Result<NoiseModel> {
        Ok(Self::base(config, rows, cols, lambda0)?.0)
    }

    /// Builds the table `simulate` caches for this configuration.
    pub fn simulate_table(
        config: &RunConfig,
        rows: usize,
        cols: usize,
        lambda0: f64,
    ) -> Result<MaxDistributionTable<f64>> {
        let model = Self::null_model(config, rows, cols, lambda0)?;
        let a = match config.superset {
            SupersetMethod::Alg1 => config.removal_depth(rows * cols),
            SupersetMethod::Alg2 => 0,
        };
        build_max_distributions(&model, rows, cols, config.replicates, a, child_seed(config.seed, STREAM_TABLE))
    }

    pub fn prepare(config: &RunConfig, rows: usize, cols: usize, lambda0: f64) -> Result<Self> {
        let table = Self::simulate_table(config, rows, cols, lambda0)?;
        Self::with_table(config, rows, cols, lambda0, table)
    }

    /// Uses a previously simulated table. Its model must equal the one this
    /// configuration would simulate.
    pub fn with_table(
        config: &RunConfig,
        rows: usize,
        cols: usize,
        lambda0: f64,
        table: MaxDistributionTable<f64>,
    ) -> Result<Self> {
        let (model, pipeline) = Self::base(config, rows, cols, lambda0)?;
        if table.dims() != (rows, cols) {
            return Err(Error::Config(format!("table was simulated for {:?}, image is {rows}x{cols}", table.dims())));
        }
        match table.model() {
            Some(m) if *m == model => {}
            Some(m) => {
                return Err(Error::Config(format!(
                    "table model does not match the detection pipeline:\n  table: {}\n  run:   {}",
                    serde_json::to_string(m)?,
                    serde_json::to_string(&model)?
                )))
            }
            None => return Err(Error::Config("table does not record its noise model".into())),
        }
        let null = match config.superset {
            SupersetMethod::Alg2 => {
                NullDistribution::Quantile { r: max_percentile(table.maxima_at(rows * cols)?, config.alpha)? }
            }
            SupersetMethod::Alg1 => NullDistribution::Table(table),
        };
        Ok(Self { config: config.clone(), rows, cols, lambda0, model, pipeline, null })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// The full-image maxima quantile, when the alg2 superset is in use.
    pub fn superset_threshold(&self) -> Option<f64> {
        match &self.null {
            NullDistribution::Quantile { r } => Some(*r),
            NullDistribution::Table(_) => None,
        }
    }

    /// Applies the statistic stages to raw counts.
    pub fn statistic(&self, raw: &ImageGrid<f64>) -> Result<ImageGrid<f64>> {
        self.pipeline.apply(raw)
    }

    pub fn superset(&self, statistic: &ImageGrid<f64>) -> Result<ConfidenceSuperset> {
        match &self.null {
            NullDistribution::Quantile { r } => Ok(superset_alg2(statistic, *r, self.config.alpha)),
            NullDistribution::Table(t) => superset_alg1(statistic, t, self.config.alpha),
        }
    }

    pub fn detect(&self, raw: &ImageGrid<f64>) -> Result<Detection> {
        raw.check_same_dims((self.rows, self.cols))?;
        check_counts(raw)?;
        let statistic = self.statistic(raw)?;
        let superset = self.superset(&statistic)?;
        let opts = ThresholdOptions {
            connectivity: self.config.connectivity,
            min_area: self.config.min_area,
            rule: self.config.selection,
        };
        let result = find_threshold(&statistic, &superset.mask, self.config.epsilon, self.config.c, None, opts)?;
        let metadata = RunMetadata {
            method: self.config.method.to_string(),
            t_c: result.t_c,
            alpha: self.config.alpha,
            c: self.config.c,
            epsilon: self.config.epsilon,
            seed: self.config.seed,
            replicates: self.config.replicates,
            lambda0: self.lambda0,
            superset_threshold: self.superset_threshold(),
            superset_size: superset.mask.count(),
            detections: result.clusters.len(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config: self.config.clone(),
        };
        let catalog = Catalog::from_result(&result, metadata);
        Ok(Detection { catalog, result, superset, statistic })
    }
}

/// Counts must be finite and nonnegative.
fn check_counts(raw: &ImageGrid<f64>) -> Result<()> {
    let cols = raw.cols();
    match raw.values().iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
        Some(i) => Err(Error::Domain { row: i / cols, col: i % cols, value: raw.values()[i] }),
        None => Ok(()),
    }
}

/// Runs the configured method on an in-memory count image.
pub fn detect_image(config: &RunConfig, raw: &ImageGrid<f64>) -> Result<Detection> {
    let lambda0 = background_rate(config, raw);
    let detector = match &config.table {
        Some(path) => {
            let table = MaxDistributionTable::load_json(path)?;
            Detector::with_table(config, raw.rows(), raw.cols(), lambda0, table)?
        }
        None => Detector::prepare(config, raw.rows(), raw.cols(), lambda0)?,
    };
    detector.detect(raw)
}

fn run_method(config: &RunConfig, method: Method) -> Result<(Catalog, FcpResult<f64>)> {
    if config.method != method {
        return Err(Error::Config(format!("config selects {} but {method} was requested", config.method)));
    }
    let input = config.input.as_ref().ok_or_else(|| Error::Config("no input image configured".into()))?;
    let raw = load_image(input, config.format)?;
    let d = detect_image(config, &raw)?;
    Ok((d.catalog, d.result))
}

/// Smooth, square root, z-score, superset, threshold search.
pub fn run_fcp_z(config: &RunConfig) -> Result<(Catalog, FcpResult<f64>)> {
    run_method(config, Method::FcpZ)
}

/// Smooth, square root, multi-scale derivative, negate, superset, threshold
/// search.
pub fn run_msfcp(config: &RunConfig) -> Result<(Catalog, FcpResult<f64>)> {
    run_method(config, Method::Msfcp)
}
