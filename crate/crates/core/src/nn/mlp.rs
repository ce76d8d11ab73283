use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied to the last layer. Hidden layers are always ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    /// `bound * tanh(z)`, used by policy heads to respect action limits.
    TanhScaled(f64),
}

/// Parameters of a fully connected ReLU network.
///
/// Weight matrices are stored `(out, in)`, so layer `l` computes
/// `z = W_l x + b_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    output: OutputActivation,
    seed: u64,
}

/// Gradients for every parameter of an [`Mlp`], plus the gradient with
/// respect to the network input.
#[derive(Clone, Debug, PartialEq)]
pub struct GradBundle {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// `(batch, input_dim)`.
    pub input: Array2<f64>,
}

/// Intermediate activations recorded by [`Mlp::forward_tape`].
///
/// `activations[0]` is the input batch and the last entry is the network
/// output after the output activation.
#[derive(Clone, Debug)]
pub struct Tape {
    activations: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("tape always holds the input")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().expect("tape always holds the input")
    }
}

impl Mlp {
    /// He-uniform initialised network with zero biases.
    pub fn new(dims: &[usize], output: OutputActivation, seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        validate_output(output)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-limit..limit)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            output,
            seed,
        })
    }

    /// Builds a network from explicit parameters, checking every shape.
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        output: OutputActivation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::shape(
                "Mlp::from_parts",
                "equal non-zero weight/bias layer counts",
                format!("{} weights, {} biases", weights.len(), biases.len()),
            ));
        }
        validate_output(output)?;
        let mut dims = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != dims[l] || b.len() != w.nrows() {
                return Err(Error::shape(
                    "Mlp::from_parts",
                    format!("layer {l}: {} inputs, bias of {}", dims[l], w.nrows()),
                    format!("weight {:?}, bias {}", w.dim(), b.len()),
                ));
            }
            dims.push(w.nrows());
        }
        validate_dims(&dims)?;
        let net = Self {
            dims,
            weights,
            biases,
            output,
            seed: 0,
        };
        if !net.is_finite() {
            return Err(Error::NonFinite("Mlp::from_parts"));
        }
        Ok(net)
    }

    pub(crate) fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// All parameters, layer by layer, weights (row-major) then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend(w.iter().copied());
            flat.extend(b.iter().copied());
        }
        flat
    }

    /// Inverse of [`Mlp::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("Mlp::set_flat", self.num_params(), flat.len()));
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// Evaluates the network on a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|_| Error::shape("Mlp::forward", self.input_dim(), input.len()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Evaluates the network on a `(batch, input_dim)` matrix.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input("Mlp::forward_batch", x)?;
        let mut h = self.affine(0, x);
        for l in 1..self.weights.len() {
            h.mapv_inplace(relu);
            h = self.affine(l, h.view());
        }
        self.apply_output(&mut h);
        Ok(h)
    }

    /// Forward pass that keeps every activation for a later [`Mlp::backward`].
    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Result<Tape> {
        self.check_input("Mlp::forward_tape", x)?;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(x.to_owned());
        for l in 0..self.weights.len() {
            let mut z = self.affine(l, activations[l].view());
            if l + 1 < self.weights.len() {
                z.mapv_inplace(relu);
            } else {
                self.apply_output(&mut z);
            }
            activations.push(z);
        }
        Ok(Tape { activations })
    }

    /// Reverse-mode gradients of `sum(output * output_grad)` with respect
    /// to every parameter and to the input.
    pub fn backward(&self, tape: &Tape, output_grad: ArrayView2<f64>) -> Result<GradBundle> {
        let out = tape.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{:?}", out.dim()),
                format!("{:?}", output_grad.dim()),
            ));
        }
        let n_layers = self.weights.len();
        let mut delta = output_grad.to_owned();
        if let OutputActivation::TanhScaled(bound) = self.output {
            ndarray::Zip::from(&mut delta).and(out).for_each(|d, &y| {
                let t = y / bound;
                *d *= bound * (1.0 - t * t);
            });
        }
        let mut dw = Vec::with_capacity(n_layers);
        let mut db = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let prev = &tape.activations[l];
            dw.push(delta.t().dot(prev));
            db.push(delta.sum_axis(Axis(0)));
            let mut back = delta.dot(&self.weights[l]);
            if l > 0 {
                // ReLU derivative: activation > 0 iff pre-activation > 0.
                ndarray::Zip::from(&mut back).and(prev).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            delta = back;
        }
        dw.reverse();
        db.reverse();
        Ok(GradBundle {
            weights: dw,
            biases: db,
            input: delta,
        })
    }

    /// Single-sample convenience wrapper around [`Mlp::forward_tape`] and
    /// [`Mlp::backward`].
    pub fn backward_single(&self, input: &[f64], output_grad: &[f64]) -> Result<GradBundle> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|_| Error::shape("Mlp::backward_single", self.input_dim(), input.len()))?;
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad)
            .map_err(|_| Error::shape("Mlp::backward_single", self.output_dim(), output_grad.len()))?;
        let tape = self.forward_tape(x)?;
        self.backward(&tape, g)
    }

    /// In place `self = rho * self + (1 - rho) * online`.
    pub fn blend_toward(&mut self, online: &Mlp, rho: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!("polyak weight {rho} outside [0, 1]")));
        }
        if self.dims != online.dims {
            return Err(Error::shape(
                "polyak_blend",
                format!("{:?}", self.dims),
                format!("{:?}", online.dims),
            ));
        }
        for (t, o) in self.weights.iter_mut().zip(&online.weights) {
            ndarray::Zip::from(t).and(o).for_each(|t, &o| *t = rho * *t + (1.0 - rho) * o);
        }
        for (t, o) in self.biases.iter_mut().zip(&online.biases) {
            ndarray::Zip::from(t).and(o).for_each(|t, &o| *t = rho * *t + (1.0 - rho) * o);
        }
        Ok(())
    }

    fn affine(&self, l: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights[l].t());
        z += &self.biases[l];
        z
    }

    fn apply_output(&self, h: &mut Array2<f64>) {
        if let OutputActivation::TanhScaled(bound) = self.output {
            h.mapv_inplace(|z| bound * z.tanh());
        }
    }

    fn check_input(&self, context: &'static str, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(context, self.input_dim(), x.ncols()));
        }
        Ok(())
    }
}

/// Returns `rho * target + (1 - rho) * online` as a new network.
pub fn polyak_blend(target: &Mlp, online: &Mlp, rho: f64) -> Result<Mlp> {
    let mut blended = target.clone();
    blended.blend_toward(online, rho)?;
    Ok(blended)
}

impl GradBundle {
    /// Zero gradients shaped like `net`, with an empty input gradient.
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            input: Array2::zeros((0, net.input_dim())),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Parameter gradients flattened in the same order as [`Mlp::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend(w.iter().copied());
            flat.extend(b.iter().copied());
        }
        flat
    }

    pub(crate) fn check_congruent(&self, net: &Mlp) -> Result<()> {
        let ok = self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self.weights.iter().zip(&net.weights).all(|(g, w)| g.dim() == w.dim())
            && self.biases.iter().zip(&net.biases).all(|(g, b)| g.len() == b.len());
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                "GradBundle",
                format!("{:?}", net.dims),
                format!("{:?}", self.weights.iter().map(|w| w.dim()).collect::<Vec<_>>()),
            ))
        }
    }
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::shape(
            "layer_dims",
            "at least two positive dims",
            format!("{dims:?}"),
        ));
    }
    Ok(())
}

fn validate_output(output: OutputActivation) -> Result<()> {
    match output {
        OutputActivation::TanhScaled(b) if !(b.is_finite() && b > 0.0) => {
            Err(Error::Config(format!("tanh output bound must be positive, got {b}")))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    fn scalar_net(w: f64, b: f64, output: OutputActivation) -> Mlp {
        Mlp::from_parts(vec![arr2(&[[w]])], vec![arr1(&[b])], output).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let net = Mlp::from_parts(
            vec![Array2::zeros((3, 2)), Array2::zeros((1, 3))],
            vec![Array1::zeros(3), Array1::zeros(1)],
            OutputActivation::Identity,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn affine_layer() {
        let net = scalar_net(2.0, 1.0, OutputActivation::Identity);
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn tanh_head_at_zero() {
        let net = scalar_net(1.0, 0.0, OutputActivation::TanhScaled(2.0));
        assert_eq!(net.forward(&[0.0]).unwrap(), vec![0.0]);
        let y = net.forward(&[10.0]).unwrap()[0];
        assert!(y < 2.0 && y > 1.99);
    }

    #[test]
    fn wrong_input_length_is_a_shape_error() {
        let net = Mlp::new(&[2, 4, 1], OutputActivation::Identity, 0).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(matches!(
            net.backward_single(&[1.0, 2.0], &[1.0, 1.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn linear_layer_gradients() {
        let net = scalar_net(2.0, 1.0, OutputActivation::Identity);
        let g = net.backward_single(&[3.0], &[1.0]).unwrap();
        assert_eq!(g.weights[0], arr2(&[[3.0]]));
        assert_eq!(g.biases[0], arr1(&[1.0]));
        assert_eq!(g.input, arr2(&[[2.0]]));
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        // hidden pre-activation = 1 * 1 - 2 = -1
        let net = Mlp::from_parts(
            vec![arr2(&[[1.0]]), arr2(&[[5.0]])],
            vec![arr1(&[-2.0]), arr1(&[0.0])],
            OutputActivation::Identity,
        )
        .unwrap();
        let g = net.backward_single(&[1.0], &[1.0]).unwrap();
        assert_eq!(g.weights[0], arr2(&[[0.0]]));
        assert_eq!(g.biases[0], arr1(&[0.0]));
        assert_eq!(g.input, arr2(&[[0.0]]));
        // the output layer still sees a zero activation
        assert_eq!(g.weights[1], arr2(&[[0.0]]));
        assert_eq!(g.biases[1], arr1(&[1.0]));
    }

    #[test]
    fn batch_forward_matches_single() {
        let net = Mlp::new(&[3, 8, 8, 2], OutputActivation::TanhScaled(2.0), 11).unwrap();
        let x = arr2(&[[0.1, -0.4, 0.7], [1.5, 0.2, -0.3]]);
        let batch = net.forward_batch(x.view()).unwrap();
        for (i, row) in x.outer_iter().enumerate() {
            let single = net.forward(row.as_slice().unwrap()).unwrap();
            assert_eq!(batch.row(i).to_vec(), single);
        }
    }

    #[test]
    fn polyak_cases() {
        let target = scalar_net(1.0, 1.0, OutputActivation::Identity);
        let online = scalar_net(0.0, 0.0, OutputActivation::Identity);
        let blended = polyak_blend(&target, &online, 0.95).unwrap();
        assert_eq!(blended.weights()[0][[0, 0]], 0.95);
        assert_eq!(polyak_blend(&target, &online, 1.0).unwrap(), target);
        assert_eq!(polyak_blend(&target, &online, 0.0).unwrap(), online);
        assert!(polyak_blend(&target, &online, 1.5).is_err());
        let other = Mlp::new(&[1, 2, 1], OutputActivation::Identity, 0).unwrap();
        assert!(matches!(polyak_blend(&target, &other, 0.5), Err(Error::Shape { .. })));
    }

    #[test]
    fn flat_round_trip_preserves_layout() {
        let net = Mlp::new(&[2, 3, 1], OutputActivation::Identity, 5).unwrap();
        let flat = net.to_flat();
        assert_eq!(flat.len(), 2 * 3 + 3 + 3 + 1);
        assert_eq!(flat[0], net.weights()[0][[0, 0]]);
        assert_eq!(flat[1], net.weights()[0][[0, 1]]);
        assert_eq!(flat[6], net.biases()[0][0]);
        let mut copy = Mlp::new(&[2, 3, 1], OutputActivation::Identity, 99).unwrap();
        copy.set_flat(&flat).unwrap();
        assert_eq!(copy.to_flat(), flat);
    }

    #[test]
    fn same_seed_same_init() {
        let a = Mlp::new(&[4, 16, 1], OutputActivation::Identity, 3).unwrap();
        let b = Mlp::new(&[4, 16, 1], OutputActivation::Identity, 3).unwrap();
        let c = Mlp::new(&[4, 16, 1], OutputActivation::Identity, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
