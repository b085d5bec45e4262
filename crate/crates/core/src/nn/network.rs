use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dsp::ProcessingMode;
use crate::error::{Error, Result};
use crate::nn::layers::{col2im, conv_backward_cols, conv_forward_cols, im2col, softmax_cross_entropy, ConvShape};
use crate::nn::tensor::Tensor;
use crate::scene::GestureClass;

/// Architecture: `conv_blocks` × (convolution → ReLU), then a dense layer to
/// the class logits, softmax and cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_h: usize,
    pub input_w: usize,
    pub input_c: usize,
    pub conv_blocks: usize,
    pub filters: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub classes: usize,
}

impl NetworkSpec {
    /// 64 × W × 2 input with 13 × (W/4) kernels and 16 filters per block.
    pub fn for_mode(mode: ProcessingMode) -> Self {
        let width = match mode {
            ProcessingMode::Range => 8,
            ProcessingMode::RangeAngle => 16,
        };
        Self {
            input_h: 64,
            input_w: width,
            input_c: 2,
            conv_blocks: 2,
            filters: 16,
            kernel_h: 13,
            kernel_w: width / 4,
            classes: GestureClass::COUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_h == 0 || self.input_w == 0 || self.input_c == 0 {
            return Err(Error::Config("network input must be non-empty".into()));
        }
        if self.kernel_h == 0 || self.kernel_w == 0 || self.kernel_h > self.input_h || self.kernel_w > self.input_w {
            return Err(Error::Config(format!(
                "kernel {}x{} does not fit input {}x{}",
                self.kernel_h, self.kernel_w, self.input_h, self.input_w
            )));
        }
        if self.conv_blocks > 0 && self.filters == 0 {
            return Err(Error::Config("filters must be positive".into()));
        }
        if self.classes != GestureClass::COUNT {
            return Err(Error::Config(format!(
                "network must have {} outputs",
                GestureClass::COUNT
            )));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.input_h * self.input_w * self.input_c
    }

    fn conv_shape(&self, block: usize) -> ConvShape {
        ConvShape {
            height: self.input_h,
            width: self.input_w,
            in_channels: if block == 0 { self.input_c } else { self.filters },
            out_channels: self.filters,
            kernel_h: self.kernel_h,
            kernel_w: self.kernel_w,
        }
    }

    fn dense_inputs(&self) -> usize {
        let c = if self.conv_blocks == 0 {
            self.input_c
        } else {
            self.filters
        };
        self.input_h * self.input_w * c
    }

    /// Shapes of all trainable tensors, in parameter order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for b in 0..self.conv_blocks {
            let s = self.conv_shape(b);
            out.push((
                format!("conv{b}.kernels"),
                vec![s.kernel_h, s.kernel_w, s.in_channels, s.out_channels],
            ));
            out.push((format!("conv{b}.bias"), vec![s.out_channels]));
        }
        out.push(("dense.weights".into(), vec![self.dense_inputs(), self.classes]));
        out.push(("dense.bias".into(), vec![self.classes]));
        out
    }
}

/// Trainable parameters, laid out as [`NetworkSpec::param_shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    params: Vec<Tensor>,
}

/// Per-sample scratch buffers reused across forward/backward passes.
#[derive(Default)]
pub struct Workspace {
    activations: Vec<Vec<f64>>,
    cols: Vec<Vec<f64>>,
    pre_relu: Vec<Vec<f64>>,
    grad: Vec<f64>,
    grad_cols: Vec<f64>,
}

/// Result of a forward pass on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub loss: f64,
    pub predicted: usize,
}

impl Network {
    /// He-style initialisation: weights `N(0, 2/fan_in)`, zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                if name.ends_with("bias") {
                    return Tensor::new(shape, vec![0.0; n]);
                }
                let fan_in: usize = shape[..shape.len() - 1].iter().product();
                let normal =
                    Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).map_err(|e| Error::Config(e.to_string()))?;
                Tensor::new(shape, (0..n).map(|_| normal.sample(&mut rng)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, params })
    }

    /// Rebuilds a network from named tensors, checking every shape.
    pub fn from_params(spec: NetworkSpec, params: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&params) {
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "{name}: expected {:?}, got {:?}",
                    shape,
                    t.shape()
                )));
            }
            t.check_finite(name)?;
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.spec
            .param_shapes()
            .into_iter()
            .map(|(n, _)| n)
            .zip(self.params.iter())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Zeroed gradient buffers matching the parameter layout.
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|t| vec![0.0; t.len()]).collect()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_len() {
            return Err(Error::Shape(format!(
                "network expects {}x{}x{} inputs, got {} values",
                self.spec.input_h,
                self.spec.input_w,
                self.spec.input_c,
                input.len()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    fn forward_ws(&self, input: &[f64], ws: &mut Workspace) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let blocks = self.spec.conv_blocks;
        ws.activations.resize_with(blocks + 1, Vec::new);
        ws.cols.resize_with(blocks, Vec::new);
        ws.pre_relu.resize_with(blocks, Vec::new);
        ws.activations[0].clear();
        ws.activations[0].extend_from_slice(input);
        for b in 0..blocks {
            let shape = self.spec.conv_shape(b);
            im2col(&shape, &ws.activations[b], &mut ws.cols[b]);
            conv_forward_cols(
                &shape,
                &ws.cols[b],
                self.params[2 * b].data(),
                self.params[2 * b + 1].data(),
                &mut ws.pre_relu[b],
            );
            let next = &mut ws.activations[b + 1];
            next.clear();
            next.extend(ws.pre_relu[b].iter().map(|&v| v.max(0.0)));
        }
        let w = &self.params[2 * blocks];
        let bias = &self.params[2 * blocks + 1];
        let x = &ws.activations[blocks];
        let classes = self.spec.classes;
        let mut logits = bias.data().to_vec();
        for (xi, row) in x.iter().zip(w.data().chunks_exact(classes)) {
            if *xi != 0.0 {
                for (o, wv) in logits.iter_mut().zip(row) {
                    *o += xi * wv;
                }
            }
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network logits".into()));
        }
        Ok(logits)
    }

    /// Logits, loss and arg-max class for one input.
    pub fn predict(&self, input: &[f64], label: usize, ws: &mut Workspace) -> Result<Prediction> {
        let logits = self.forward_ws(input, ws)?;
        let (loss, _) = softmax_cross_entropy(&logits, label)?;
        let predicted = crate::dsp::argmax(&logits);
        Ok(Prediction {
            logits,
            loss,
            predicted,
        })
    }

    /// Forward and backward pass on one sample, adding parameter gradients into `grads`.
    pub fn accumulate_gradients(
        &self,
        input: &[f64],
        label: usize,
        grads: &mut [Vec<f64>],
        ws: &mut Workspace,
    ) -> Result<Prediction> {
        let logits = self.forward_ws(input, ws)?;
        let (loss, g_logits) = softmax_cross_entropy(&logits, label)?;
        let blocks = self.spec.conv_blocks;
        let classes = self.spec.classes;

        // Dense layer.
        let x = &ws.activations[blocks];
        let w = self.params[2 * blocks].data();
        {
            let gw = &mut grads[2 * blocks];
            for (xi, gwrow) in x.iter().zip(gw.chunks_exact_mut(classes)) {
                if *xi != 0.0 {
                    for (gwv, g) in gwrow.iter_mut().zip(&g_logits) {
                        *gwv += xi * g;
                    }
                }
            }
        }
        for (gb, g) in grads[2 * blocks + 1].iter_mut().zip(&g_logits) {
            *gb += g;
        }
        ws.grad.clear();
        ws.grad.extend(
            w.chunks_exact(classes)
                .map(|row| row.iter().zip(&g_logits).map(|(a, b)| a * b).sum::<f64>()),
        );

        for b in (0..blocks).rev() {
            let shape = self.spec.conv_shape(b);
            for (g, &z) in ws.grad.iter_mut().zip(&ws.pre_relu[b]) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            let (gk, rest) = grads[2 * b..].split_at_mut(1);
            let need_input = b > 0;
            conv_backward_cols(
                &shape,
                &ws.cols[b],
                self.params[2 * b].data(),
                &ws.grad,
                &mut gk[0],
                &mut rest[0],
                if need_input { Some(&mut ws.grad_cols) } else { None },
            );
            if need_input {
                let mut gi = vec![0.0; shape.pixels() * shape.in_channels];
                col2im(&shape, &ws.grad_cols, &mut gi);
                ws.grad = gi;
            }
        }
        let predicted = crate::dsp::argmax(&logits);
        Ok(Prediction {
            logits,
            loss,
            predicted,
        })
    }
}
