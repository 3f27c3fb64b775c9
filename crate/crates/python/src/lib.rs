//! Python module `srsad`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srsad_core::datagen::FrameClass;
use srsad_core::dsp::{integrated_loudness_lkfs, AudioBuffer, FeatureConfig};
use srsad_core::inference::{decide, score_file, ChunkPlan, Detector};
use srsad_core::matrix::Matrix;
use srsad_core::metrics::FrameRecord;
use srsad_core::model::{save_weights, ModelConfig, NetworkParams, WeightStore};
use srsad_core::SadError;

fn py_err(e: SadError) -> PyErr {
    match e {
        SadError::Io(_) | SadError::Wav(_) | SadError::UnsupportedAudio { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn config_from(spec: &str) -> PyResult<ModelConfig> {
    let cfg = if spec.trim_start().starts_with('{') {
        serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?
    } else {
        ModelConfig::preset(spec).map_err(py_err)?
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("feature rows differ in length"));
    }
    let n = rows.len();
    Ok(Matrix::from_vec(n, cols, rows.into_iter().flatten().collect()))
}

/// A network with its parameters.
#[pyclass(name = "Model")]
struct PyModel {
    params: NetworkParams,
}

#[pymethods]
impl PyModel {
    /// Random initialization from a preset name or a JSON model config.
    #[new]
    #[pyo3(signature = (config = "default", seed = 0))]
    fn new(config: &str, seed: u64) -> PyResult<Self> {
        let cfg = config_from(config)?;
        Ok(Self { params: NetworkParams::init_random(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)) })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let store = srsad_core::model::load_weights(path).map_err(py_err)?;
        Ok(Self { params: store.to_params().map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let hash = FeatureConfig::with_mels(self.params.config.n_mels()).hash();
        save_weights(&WeightStore::from_params(&self.params, &hash), path).map_err(py_err)
    }

    /// Frame probabilities for a frames × mels feature matrix.
    fn forward(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.params.forward(&to_matrix(features)?).map_err(py_err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.params.param_count()
    }

    #[getter]
    fn config(&self) -> String {
        serde_json::to_string(&self.params.config).expect("config serializes")
    }
}

/// Chunked detector over 16 kHz mono audio.
#[pyclass(name = "Detector")]
struct PyDetector {
    inner: Detector,
}

#[pymethods]
impl PyDetector {
    #[new]
    fn new(model: &PyModel) -> PyResult<Self> {
        Ok(Self { inner: Detector::new(model.params.clone()).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: Detector::load(path).map_err(py_err)? })
    }

    #[pyo3(signature = (samples, chunk_len_s = 2.0))]
    fn score(&self, samples: Vec<f64>, chunk_len_s: f64) -> PyResult<Vec<f64>> {
        score_file(&AudioBuffer::from_samples(samples), &self.inner, &ChunkPlan { chunk_len_s }).map_err(py_err)
    }
}

/// Time-major log-mel features of 16 kHz mono samples.
#[pyfunction]
#[pyo3(signature = (samples, n_mels = 80))]
fn logmel(samples: Vec<f64>, n_mels: usize) -> PyResult<Vec<Vec<f64>>> {
    let mel = FeatureConfig::with_mels(n_mels).extractor().map_err(py_err)?;
    let m = mel.extract(&AudioBuffer::from_samples(samples)).map_err(py_err)?.to_time_major();
    Ok((0..m.rows()).map(|r| m.row(r).to_vec()).collect())
}

#[pyfunction]
fn read_wav(path: &str) -> PyResult<Vec<f64>> {
    Ok(AudioBuffer::read_wav(path).map_err(py_err)?.into_samples())
}

#[pyfunction]
fn loudness_lkfs(samples: Vec<f64>) -> PyResult<f64> {
    integrated_loudness_lkfs(&AudioBuffer::from_samples(samples)).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (scores, threshold = 0.5, gap_fill_max_s = None))]
fn decisions(scores: Vec<f64>, threshold: f64, gap_fill_max_s: Option<f64>) -> Vec<bool> {
    decide(&scores, threshold, gap_fill_max_s)
}

fn records(scores: &[f64], speech: &[bool], singing: Option<&[bool]>) -> PyResult<Vec<FrameRecord>> {
    if scores.len() != speech.len() || singing.is_some_and(|s| s.len() != scores.len()) {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    (0..scores.len())
        .map(|i| match singing {
            Some(s) => FrameRecord::new(scores[i], speech[i], FrameClass::from_flags(speech[i], s[i])).map_err(py_err),
            None => Ok(FrameRecord::unannotated(scores[i], speech[i])),
        })
        .collect()
}

#[pyfunction]
fn auc(scores: Vec<f64>, speech: Vec<bool>) -> PyResult<f64> {
    srsad_core::metrics::auc(&records(&scores, &speech, None)?).map_err(py_err)
}

#[pyfunction]
fn auc_sirr(scores: Vec<f64>, speech: Vec<bool>, singing: Vec<bool>) -> PyResult<f64> {
    srsad_core::metrics::auc_sirr(&records(&scores, &speech, Some(&singing))?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (config = "default", chunk_len_s = 2.0))]
fn count_macs(config: &str, chunk_len_s: f64) -> PyResult<u64> {
    srsad_core::complexity::count_macs(&config_from(config)?, chunk_len_s).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (config = "default"))]
fn count_params(config: &str) -> PyResult<u64> {
    srsad_core::complexity::count_params(&config_from(config)?).map_err(py_err)
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    srsad_core::cli::main_with(std::iter::once("srsad".to_string()).chain(args).collect())
}

#[pymodule]
fn srsad(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyDetector>()?;
    m.add_function(wrap_pyfunction!(logmel, m)?)?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(loudness_lkfs, m)?)?;
    m.add_function(wrap_pyfunction!(decisions, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(auc_sirr, m)?)?;
    m.add_function(wrap_pyfunction!(count_macs, m)?)?;
    m.add_function(wrap_pyfunction!(count_params, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
