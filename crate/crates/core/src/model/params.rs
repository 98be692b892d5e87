use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Which attention mechanisms a model carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Temporal,
    Sensor,
    TemporalSensor,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Plain,
        Variant::Temporal,
        Variant::Sensor,
        Variant::TemporalSensor,
    ];

    pub fn has_temporal(self) -> bool {
        matches!(self, Variant::Temporal | Variant::TemporalSensor)
    }

    pub fn has_sensor(self) -> bool {
        matches!(self, Variant::Sensor | Variant::TemporalSensor)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Temporal => "temporal",
            Variant::Sensor => "sensor",
            Variant::TemporalSensor => "temporal_sensor",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture sizes shared by every tensor of a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Input channels `D`.
    pub input: usize,
    /// LSTM hidden width `H`.
    pub hidden: usize,
    /// Output classes `C`.
    pub classes: usize,
    /// Sensor modalities `M`.
    pub modalities: usize,
    /// Hidden width `k` of the sensor-attention energy network.
    pub sensor_hidden: usize,
    /// Adds a second LSTM layer on top of the first.
    #[serde(default)]
    pub stacked: bool,
    /// Adds a bias to the cell candidate (absent in the reference recurrences).
    #[serde(default)]
    pub cell_bias: bool,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input", self.input),
            ("hidden", self.hidden),
            ("classes", self.classes),
            ("modalities", self.modalities),
            ("sensor_hidden", self.sensor_hidden),
        ] {
            if v == 0 {
                return Err(Error::arg(format!("dimension `{name}` must be positive")));
            }
        }
        if self.modalities > self.input {
            return Err(Error::arg(format!(
                "{} modalities cannot cover only {} channels",
                self.modalities, self.input
            )));
        }
        Ok(())
    }
}

/// Checks that `map` assigns each of `channels` channels to one of
/// `modalities` groups and leaves no group empty.
pub fn validate_modality_map(map: &[usize], channels: usize, modalities: usize) -> Result<()> {
    if map.len() != channels {
        return Err(Error::arg(format!(
            "modality map has {} entries for {channels} channels",
            map.len()
        )));
    }
    let mut seen = vec![false; modalities];
    for (ch, &m) in map.iter().enumerate() {
        if m >= modalities {
            return Err(Error::arg(format!(
                "channel {ch} maps to modality {m}, but only {modalities} exist"
            )));
        }
        seen[m] = true;
    }
    if let Some(empty) = seen.iter().position(|s| !s) {
        return Err(Error::arg(format!("modality {empty} has no channels")));
    }
    Ok(())
}

/// Contiguous, as-even-as-possible assignment of channels to modalities.
pub fn contiguous_modality_map(channels: usize, modalities: usize) -> Vec<usize> {
    (0..channels).map(|d| d * modalities / channels).collect()
}

/// Gate weights of one LSTM layer; `x` matrices are `D × H`, `h` matrices
/// `H × H`, biases `1 × H`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_xi: Matrix,
    pub w_xf: Matrix,
    pub w_xc: Matrix,
    pub w_xo: Matrix,
    pub w_hi: Matrix,
    pub w_hf: Matrix,
    pub w_hc: Matrix,
    pub w_ho: Matrix,
    pub b_i: Matrix,
    pub b_f: Matrix,
    pub b_o: Matrix,
    pub b_c: Option<Matrix>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize, cell_bias: bool) -> Self {
        let x = || Matrix::zeros(input, hidden);
        let h = || Matrix::zeros(hidden, hidden);
        let b = || Matrix::zeros(1, hidden);
        LstmParams {
            w_xi: x(),
            w_xf: x(),
            w_xc: x(),
            w_xo: x(),
            w_hi: h(),
            w_hf: h(),
            w_hc: h(),
            w_ho: h(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: cell_bias.then(b),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_xi.rows()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_xi.cols()
    }

    fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let mut v = vec![
            ("w_xi", &self.w_xi),
            ("w_xf", &self.w_xf),
            ("w_xc", &self.w_xc),
            ("w_xo", &self.w_xo),
            ("w_hi", &self.w_hi),
            ("w_hf", &self.w_hf),
            ("w_hc", &self.w_hc),
            ("w_ho", &self.w_ho),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_o", &self.b_o),
        ];
        if let Some(b) = &self.b_c {
            v.push(("b_c", b));
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut v = vec![
            ("w_xi", &mut self.w_xi),
            ("w_xf", &mut self.w_xf),
            ("w_xc", &mut self.w_xc),
            ("w_xo", &mut self.w_xo),
            ("w_hi", &mut self.w_hi),
            ("w_hf", &mut self.w_hf),
            ("w_hc", &mut self.w_hc),
            ("w_ho", &mut self.w_ho),
            ("b_i", &mut self.b_i),
            ("b_f", &mut self.b_f),
            ("b_o", &mut self.b_o),
        ];
        if let Some(b) = &mut self.b_c {
            v.push(("b_c", b));
        }
        v
    }
}

/// Bilinear score matrix `W_α` (`H × H`).
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalAttentionParams {
    pub w_alpha: Matrix,
}

/// Sensor-modality attention: `E_t = V_e · tanh(W_β β_{t−1} + W_x x_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorAttentionParams {
    /// `k × M`
    pub w_beta: Matrix,
    /// `k × D`
    pub w_x: Matrix,
    /// `M × k`
    pub v_e: Matrix,
    /// Channel index to modality index; not learnable.
    pub modality_map: Vec<usize>,
}

impl SensorAttentionParams {
    pub fn zeros(input: usize, modalities: usize, hidden: usize, modality_map: Vec<usize>) -> Self {
        SensorAttentionParams {
            w_beta: Matrix::zeros(hidden, modalities),
            w_x: Matrix::zeros(hidden, input),
            v_e: Matrix::zeros(modalities, hidden),
            modality_map,
        }
    }

    pub fn modalities(&self) -> usize {
        self.w_beta.cols()
    }

    pub fn input_size(&self) -> usize {
        self.w_x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m, d) = (self.w_beta.rows(), self.w_beta.cols(), self.w_x.cols());
        if self.w_x.rows() != k {
            return Err(Error::Shape {
                op: "sensor attention W_x",
                left: self.w_beta.shape(),
                right: self.w_x.shape(),
            });
        }
        if self.v_e.shape() != (m, k) {
            return Err(Error::Shape {
                op: "sensor attention V_e",
                left: (m, k),
                right: self.v_e.shape(),
            });
        }
        validate_modality_map(&self.modality_map, d, m)
    }
}

/// Softmax classifier on top of the sequence representation.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    /// `H × C`
    pub w_y: Matrix,
    /// `1 × C`
    pub b_y: Matrix,
}

/// Every learnable tensor of a model. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub lstm: LstmParams,
    /// Second LSTM layer, fed with the first layer's hidden states.
    pub stacked: Option<LstmParams>,
    pub temporal: Option<TemporalAttentionParams>,
    pub sensor: Option<SensorAttentionParams>,
    pub head: ClassifierHead,
}

pub type Gradients = ModelParams;

impl ModelParams {
    /// All-zero parameters of the right shapes for `variant`.
    pub fn zeros(dims: &ModelDims, variant: Variant, modality_map: Vec<usize>) -> Result<Self> {
        dims.validate()?;
        if variant.has_sensor() {
            validate_modality_map(&modality_map, dims.input, dims.modalities)?;
        }
        let (d, h, c) = (dims.input, dims.hidden, dims.classes);
        Ok(ModelParams {
            dims: dims.clone(),
            lstm: LstmParams::zeros(d, h, dims.cell_bias),
            stacked: dims.stacked.then(|| LstmParams::zeros(h, h, dims.cell_bias)),
            temporal: variant.has_temporal().then(|| TemporalAttentionParams {
                w_alpha: Matrix::zeros(h, h),
            }),
            sensor: variant.has_sensor().then(|| {
                SensorAttentionParams::zeros(d, dims.modalities, dims.sensor_hidden, modality_map)
            }),
            head: ClassifierHead {
                w_y: Matrix::zeros(h, c),
                b_y: Matrix::zeros(1, c),
            },
        })
    }

    /// Zero tensors shaped like `self`.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// The variant implied by the attention components that are present.
    pub fn variant(&self) -> Variant {
        match (self.temporal.is_some(), self.sensor.is_some()) {
            (false, false) => Variant::Plain,
            (true, false) => Variant::Temporal,
            (false, true) => Variant::Sensor,
            (true, true) => Variant::TemporalSensor,
        }
    }

    /// Modality map used for trace output; contiguous when no sensor attention.
    pub fn modality_map(&self) -> Vec<usize> {
        match &self.sensor {
            Some(s) => s.modality_map.clone(),
            None => contiguous_modality_map(self.dims.input, self.dims.modalities),
        }
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (n, t) in self.lstm.tensors() {
            out.push((format!("lstm.{n}"), t));
        }
        if let Some(l) = &self.stacked {
            for (n, t) in l.tensors() {
                out.push((format!("lstm2.{n}"), t));
            }
        }
        if let Some(t) = &self.temporal {
            out.push(("temporal.w_alpha".into(), &t.w_alpha));
        }
        if let Some(s) = &self.sensor {
            out.push(("sensor.w_beta".into(), &s.w_beta));
            out.push(("sensor.w_x".into(), &s.w_x));
            out.push(("sensor.v_e".into(), &s.v_e));
        }
        out.push(("head.w_y".into(), &self.head.w_y));
        out.push(("head.b_y".into(), &self.head.b_y));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        for (n, t) in self.lstm.tensors_mut() {
            out.push((format!("lstm.{n}"), t));
        }
        if let Some(l) = &mut self.stacked {
            for (n, t) in l.tensors_mut() {
                out.push((format!("lstm2.{n}"), t));
            }
        }
        if let Some(t) = &mut self.temporal {
            out.push(("temporal.w_alpha".into(), &mut t.w_alpha));
        }
        if let Some(s) = &mut self.sensor {
            out.push(("sensor.w_beta".into(), &mut s.w_beta));
            out.push(("sensor.w_x".into(), &mut s.w_x));
            out.push(("sensor.v_e".into(), &mut s.v_e));
        }
        out.push(("head.w_y".into(), &mut self.head.w_y));
        out.push(("head.b_y".into(), &mut self.head.b_y));
        out
    }

    pub fn tensor(&self, name: &str) -> Option<&Matrix> {
        self.tensors()
            .into_iter()
            .find_map(|(n, t)| (n == name).then_some(t))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.tensors_mut()
            .into_iter()
            .find_map(|(n, t)| (n == name).then_some(t))
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other` tensor by tensor.
    pub fn add_assign(&mut self, other: &ModelParams) -> Result<()> {
        let theirs = other.tensors();
        let mine = self.tensors_mut();
        if mine.len() != theirs.len() {
            return Err(Error::arg("parameter sets have different layouts"));
        }
        for ((n, a), (m, b)) in mine.into_iter().zip(theirs) {
            if n != m {
                return Err(Error::arg(format!("tensor {n} paired with {m}")));
            }
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.scale_in_place(k);
        }
    }

    /// `√Σ entries²` over every tensor.
    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.sum_sq()).sum::<f64>().sqrt()
    }

    /// Checks that components agree with `dims` and with each other.
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let (d, h, c) = (self.dims.input, self.dims.hidden, self.dims.classes);
        let expect = |name: &str, t: &Matrix, shape: (usize, usize)| -> Result<()> {
            if t.shape() != shape {
                return Err(Error::arg(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            Ok(())
        };
        let check_layer = |prefix: &str, l: &LstmParams, input: usize| -> Result<()> {
            for (n, t) in l.tensors() {
                let shape = match n.as_bytes()[0] {
                    b'b' => (1, h),
                    _ if n.starts_with("w_x") => (input, h),
                    _ => (h, h),
                };
                expect(&format!("{prefix}.{n}"), t, shape)?;
            }
            if l.b_c.is_some() != self.dims.cell_bias {
                return Err(Error::arg(format!("{prefix}: cell bias presence disagrees with dims")));
            }
            Ok(())
        };
        check_layer("lstm", &self.lstm, d)?;
        if self.stacked.is_some() != self.dims.stacked {
            return Err(Error::arg("stacked layer presence disagrees with dims"));
        }
        if let Some(l) = &self.stacked {
            check_layer("lstm2", l, h)?;
        }
        if let Some(t) = &self.temporal {
            expect("temporal.w_alpha", &t.w_alpha, (h, h))?;
        }
        if let Some(s) = &self.sensor {
            let (m, k) = (self.dims.modalities, self.dims.sensor_hidden);
            expect("sensor.w_beta", &s.w_beta, (k, m))?;
            expect("sensor.w_x", &s.w_x, (k, d))?;
            expect("sensor.v_e", &s.v_e, (m, k))?;
            s.validate()?;
        }
        expect("head.w_y", &self.head.w_y, (h, c))?;
        expect("head.b_y", &self.head.b_y, (1, c))?;
        Ok(())
    }
}
