use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::data::ImageTensor;
use crate::error::{Error, Result};
use crate::hash::ContentHasher;
use crate::qsim::{run_circuit, Circuit, GateOp, StateVector};
use crate::rng::{derive_seed, SeededRng};

static CLAMP_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of patch values clamped into `[0, 1]` since process start.
pub fn clamp_warnings() -> u64 {
    CLAMP_WARNINGS.load(Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuanvFilterSpec {
    pub patch_size: usize,
    pub stride: usize,
    pub n_qubits: usize,
    pub n_random_layers: usize,
    pub seed: u64,
    /// Radians per unit pixel intensity.
    pub embed_scale: f64,
    /// Independent random circuits; output channels = `n_filters * n_qubits`.
    pub n_filters: usize,
}

impl Default for QuanvFilterSpec {
    fn default() -> Self {
        QuanvFilterSpec {
            patch_size: 2,
            stride: 2,
            n_qubits: 4,
            n_random_layers: 2,
            seed: 0,
            embed_scale: PI,
            n_filters: 1,
        }
    }
}

impl QuanvFilterSpec {
    pub fn new(seed: u64, n_random_layers: usize) -> Self {
        QuanvFilterSpec {
            seed,
            n_random_layers,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.n_qubits != self.patch_size * self.patch_size {
            return Err(Error::Config(format!(
                "n_qubits {} must equal patch_size² ({}²)",
                self.n_qubits, self.patch_size
            )));
        }
        if self.stride == 0 || self.n_filters == 0 {
            return Err(Error::Config("stride and n_filters must be >= 1".into()));
        }
        if !self.embed_scale.is_finite() {
            return Err(Error::Config("embed_scale must be finite".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.n_qubits * self.n_filters
    }

    /// Hash over every field that affects the features.
    pub fn hash(&self) -> u64 {
        ContentHasher::new()
            .field("quanv-filter-v1")
            .field(self.patch_size.to_le_bytes())
            .field(self.stride.to_le_bytes())
            .field(self.n_qubits.to_le_bytes())
            .field(self.n_random_layers.to_le_bytes())
            .field(self.seed.to_le_bytes())
            .field(self.embed_scale.to_bits().to_le_bytes())
            .field(self.n_filters.to_le_bytes())
            .finish()
    }
}

fn random_circuit_with_seed(spec: &QuanvFilterSpec, seed: u64) -> Circuit {
    let n = spec.n_qubits;
    let mut rng = SeededRng::new(seed);
    let mut circuit = Circuit::new(n);
    for _ in 0..spec.n_random_layers {
        for q in 0..n {
            circuit.push(GateOp::ry(q, rng.angle())).expect("qubit in range");
        }
        if n > 1 {
            for q in 0..n {
                circuit.push(GateOp::cnot(q, (q + 1) % n)).expect("qubit in range");
            }
        }
    }
    circuit
}

/// The seeded random circuit: per layer one uniformly random `RY` per qubit
/// followed by a ring of CNOTs `q → q+1 (mod n)`.
pub fn build_random_circuit(spec: &QuanvFilterSpec) -> Circuit {
    random_circuit_with_seed(spec, spec.seed)
}

/// One circuit per filter. Filter 0 uses `spec.seed`; filter `k` a derived
/// seed.
pub fn build_filter_circuits(spec: &QuanvFilterSpec) -> Vec<Circuit> {
    (0..spec.n_filters)
        .map(|k| {
            let seed = if k == 0 { spec.seed } else { derive_seed(spec.seed, k as u64) };
            random_circuit_with_seed(spec, seed)
        })
        .collect()
}

/// `RY(embed_scale · p_q)` on qubit `q`; values outside `[0, 1]` are clamped
/// and counted.
pub fn embed_patch(patch: &[f64], spec: &QuanvFilterSpec) -> Result<Circuit> {
    if patch.len() != spec.n_qubits {
        return Err(Error::Dimension(format!(
            "patch of {} values for {} qubits",
            patch.len(),
            spec.n_qubits
        )));
    }
    let mut circuit = Circuit::new(spec.n_qubits);
    for (q, &p) in patch.iter().enumerate() {
        let v = if (0.0..=1.0).contains(&p) {
            p
        } else {
            CLAMP_WARNINGS.fetch_add(1, Ordering::Relaxed);
            if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) }
        };
        circuit.push(GateOp::ry(q, spec.embed_scale * v))?;
    }
    Ok(circuit)
}

/// Embed, run the random circuit from `|0…0⟩`, and read `⟨Z_q⟩` per qubit.
pub fn quanv_patch(patch: &[f64], random_circuit: &Circuit, spec: &QuanvFilterSpec) -> Result<Vec<f64>> {
    let embed = embed_patch(patch, spec)?;
    let state = run_circuit(&embed, StateVector::zero(spec.n_qubits)?)?;
    let state = run_circuit(random_circuit, state)?;
    (0..spec.n_qubits).map(|q| state.expectation_z(q)).collect()
}

/// `H×W×C` feature map, row-major, values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub values: Vec<f32>,
}

impl FeatureMap {
    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.values[(y * self.width + x) * self.channels + c]
    }
}

/// Slide the filter over a single-channel image at the filter's stride,
/// dropping partial edge patches.
pub fn quanv_image(image: &ImageTensor, spec: &QuanvFilterSpec) -> Result<FeatureMap> {
    spec.validate()?;
    quanv_image_with(image, spec, &build_filter_circuits(spec))
}

pub(crate) fn quanv_image_with(image: &ImageTensor, spec: &QuanvFilterSpec, circuits: &[Circuit]) -> Result<FeatureMap> {
    let k = spec.patch_size;
    if image.channels != 1 {
        return Err(Error::Dimension(format!(
            "quanvolution expects 1 channel, got {}",
            image.channels
        )));
    }
    if image.height < k || image.width < k {
        return Err(Error::Dimension(format!(
            "{}x{} image smaller than {k}x{k} patch",
            image.height, image.width
        )));
    }
    let out_h = (image.height - k) / spec.stride + 1;
    let out_w = (image.width - k) / spec.stride + 1;
    let channels = spec.channels();
    let mut values = Vec::with_capacity(out_h * out_w * channels);
    let mut patch = vec![0.0f64; k * k];
    for oy in 0..out_h {
        for ox in 0..out_w {
            for dy in 0..k {
                for dx in 0..k {
                    patch[dy * k + dx] = image.at(oy * spec.stride + dy, ox * spec.stride + dx, 0) as f64;
                }
            }
            for circuit in circuits {
                for z in quanv_patch(&patch, circuit, spec)? {
                    values.push(z as f32);
                }
            }
        }
    }
    Ok(FeatureMap {
        height: out_h,
        width: out_w,
        channels,
        values,
    })
}
