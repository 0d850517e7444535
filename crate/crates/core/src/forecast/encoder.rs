//! Distilling encoder stage, decoder input assembly, and an untrained
//! forward pass wiring them together with attention.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attention::{
    default_active_queries, full_attention, probsparse_attention, AttentionInput,
};
use crate::error::{Error, Result};

pub const KERNEL_WIDTH: usize = 3;
pub const POOL_STRIDE: usize = 2;

/// Feature map `L_j x d` entering encoder layer `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerState {
    pub features: DMatrix<f64>,
}

/// Conv1d (kernel 3, zero same-padding) weights mapping `d` channels to `d`.
/// `taps[0]` multiplies `x_{t-1}`, `taps[1]` `x_t`, `taps[2]` `x_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillLayer {
    pub taps: [DMatrix<f64>; KERNEL_WIDTH],
    pub bias: DVector<f64>,
}

impl DistillLayer {
    /// Center tap identity, side taps and bias zero.
    pub fn identity(d: usize) -> Self {
        Self {
            taps: [
                DMatrix::zeros(d, d),
                DMatrix::identity(d, d),
                DMatrix::zeros(d, d),
            ],
            bias: DVector::zeros(d),
        }
    }

    /// Uniform weights in `+-1/sqrt(3 d)`.
    pub fn random(d: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / ((KERNEL_WIDTH * d) as f64).sqrt();
        let mut draw = || DMatrix::from_fn(d, d, |_, _| rng.random_range(-bound..bound));
        let taps = [draw(), draw(), draw()];
        Self {
            taps,
            bias: DVector::zeros(d),
        }
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// `MaxPool(ELU(Conv1d(Z)))`: halves the sequence length (floor).
pub fn distill_layer(state: &EncoderLayerState, layer: &DistillLayer) -> Result<EncoderLayerState> {
    let (len, d) = state.features.shape();
    if len < KERNEL_WIDTH {
        return Err(Error::validation(format!(
            "distilling needs at least {KERNEL_WIDTH} time steps, got {len}"
        )));
    }
    if d != layer.channels() {
        return Err(Error::validation(format!(
            "layer has {} channels, features have {d}",
            layer.channels()
        )));
    }
    let x = &state.features;
    let mut conv = DMatrix::zeros(len, d);
    for t in 0..len {
        let mut acc = layer.bias.clone();
        for (k, tap) in layer.taps.iter().enumerate() {
            let src = t as isize + k as isize - 1;
            if src < 0 || src >= len as isize {
                continue;
            }
            acc += tap * x.row(src as usize).transpose();
        }
        for c in 0..d {
            conv[(t, c)] = elu(acc[c]);
        }
    }
    let out_len = len / POOL_STRIDE;
    let pooled = DMatrix::from_fn(out_len, d, |i, c| {
        conv[(POOL_STRIDE * i, c)].max(conv[(POOL_STRIDE * i + 1, c)])
    });
    Ok(EncoderLayerState { features: pooled })
}

/// Start token followed by a zero placeholder for the target span.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderInput {
    pub token: DMatrix<f64>,
    pub target: DMatrix<f64>,
}

impl DecoderInput {
    pub fn len(&self) -> usize {
        self.token.nrows() + self.target.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Concat(token, target)` along time.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let d = self.token.ncols();
        let mut out = DMatrix::zeros(self.len(), d);
        out.rows_mut(0, self.token.nrows()).copy_from(&self.token);
        out
    }
}

pub fn decoder_input(token: &DMatrix<f64>, target_len: usize) -> Result<DecoderInput> {
    if target_len == 0 {
        return Err(Error::validation("target length must be at least 1"));
    }
    Ok(DecoderInput {
        token: token.clone(),
        target: DMatrix::zeros(target_len, token.ncols()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTisatConfig {
    pub dims: usize,
    /// Attention blocks in the encoder; a distilling stage follows each but the last.
    pub encoder_layers: usize,
    pub token_len: usize,
    pub target_len: usize,
    pub seed: u64,
}

struct Projections {
    query: DMatrix<f64>,
    key: DMatrix<f64>,
    value: DMatrix<f64>,
}

impl Projections {
    fn random(d: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let mut draw = || DMatrix::from_fn(d, d, |_, _| rng.random_range(-bound..bound));
        Self {
            query: draw(),
            key: draw(),
            value: draw(),
        }
    }

    fn attend(&self, queries: &DMatrix<f64>, memory: &DMatrix<f64>) -> Result<AttentionInput> {
        AttentionInput::new(
            queries * &self.query,
            memory * &self.key,
            memory * &self.value,
        )
    }
}

/// Forward-only encoder/decoder with seeded random weights. Only shapes and
/// attention invariants are meaningful; nothing here is trained.
pub struct ToyTisat {
    config: ToyTisatConfig,
    encoder_attention: Vec<Projections>,
    distill: Vec<DistillLayer>,
    decoder_self: Projections,
    decoder_cross: Projections,
    dense: DMatrix<f64>,
}

impl ToyTisat {
    pub fn new(config: ToyTisatConfig) -> Result<Self> {
        if config.dims == 0 || config.encoder_layers == 0 || config.target_len == 0 {
            return Err(Error::validation(
                "dims, encoder_layers and target_len must be positive",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.dims;
        let encoder_attention = (0..config.encoder_layers)
            .map(|_| Projections::random(d, &mut rng))
            .collect();
        let distill = (1..config.encoder_layers)
            .map(|_| DistillLayer::random(d, &mut rng))
            .collect();
        let decoder_self = Projections::random(d, &mut rng);
        let decoder_cross = Projections::random(d, &mut rng);
        let bound = 1.0 / (d as f64).sqrt();
        let dense = DMatrix::from_fn(d, d, |_, _| rng.random_range(-bound..bound));
        Ok(Self {
            config,
            encoder_attention,
            distill,
            decoder_self,
            decoder_cross,
            dense,
        })
    }

    pub fn encode(&self, window: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if window.ncols() != self.config.dims {
            return Err(Error::validation(format!(
                "window has {} columns, model expects {}",
                window.ncols(),
                self.config.dims
            )));
        }
        let mut z = window.clone();
        for (j, proj) in self.encoder_attention.iter().enumerate() {
            let input = proj.attend(&z, &z)?;
            let u = default_active_queries(z.nrows());
            z = probsparse_attention(&input, u)?;
            if let Some(layer) = self.distill.get(j) {
                z = distill_layer(&EncoderLayerState { features: z }, layer)?.features;
            }
        }
        Ok(z)
    }

    /// Predicted `target_len x d` continuation of `window`.
    pub fn forecast(&self, window: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let memory = self.encode(window)?;
        let tok = self.config.token_len.min(window.nrows());
        let token = window.rows(window.nrows() - tok, tok).into_owned();
        let dec = decoder_input(&token, self.config.target_len)?.concatenated();
        let h = full_attention(&self.decoder_self.attend(&dec, &dec)?)?;
        let h = full_attention(&self.decoder_cross.attend(&h, &memory)?)?;
        let out = h * &self.dense;
        Ok(out
            .rows(tok, self.config.target_len)
            .into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_pairwise_max() {
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 3.0, 2.0, 0.5, 5.0, 0.25, 4.0, 7.0, 1.0, 6.0, 8.0]);
        let out = distill_layer(&EncoderLayerState { features: x }, &DistillLayer::identity(2))
            .unwrap()
            .features;
        assert_eq!(out, DMatrix::from_row_slice(3, 2, &[3.0, 2.0, 0.5, 5.0, 7.0, 8.0]));
    }

    #[test]
    fn zero_input_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = DistillLayer::random(3, &mut rng);
        let out = distill_layer(
            &EncoderLayerState {
                features: DMatrix::zeros(8, 3),
            },
            &layer,
        )
        .unwrap();
        assert!(out.features.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_length_floors() {
        let st = EncoderLayerState {
            features: DMatrix::from_element(7, 1, 1.0),
        };
        let out = distill_layer(&st, &DistillLayer::identity(1)).unwrap();
        assert_eq!(out.features.nrows(), 3);
    }

    #[test]
    fn too_short_for_kernel() {
        let st = EncoderLayerState {
            features: DMatrix::zeros(2, 1),
        };
        assert!(distill_layer(&st, &DistillLayer::identity(1)).is_err());
    }

    #[test]
    fn negative_activations_pass_through_elu() {
        let st = EncoderLayerState {
            features: DMatrix::from_row_slice(4, 1, &[-1.0, -2.0, -3.0, -0.5]),
        };
        let out = distill_layer(&st, &DistillLayer::identity(1)).unwrap().features;
        assert!((out[(0, 0)] - (-1f64).exp_m1()).abs() < 1e-15);
        assert!((out[(1, 0)] - (-0.5f64).exp_m1()).abs() < 1e-15);
    }

    #[test]
    fn side_taps_use_zero_padding() {
        let mut layer = DistillLayer::identity(1);
        layer.taps[0][(0, 0)] = 1.0; // adds x_{t-1}
        let st = EncoderLayerState {
            features: DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]),
        };
        // conv = [1, 3, 5, 7] -> pooled [3, 7]
        let out = distill_layer(&st, &layer).unwrap().features;
        assert_eq!(out.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn decoder_input_layout() {
        let token = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 + 1.0);
        let dec = decoder_input(&token, 2).unwrap();
        let z = dec.concatenated();
        assert_eq!(z.shape(), (6, 3));
        assert_eq!(z.rows(0, 4), token.rows(0, 4));
        assert!(z.rows(4, 2).iter().all(|&v| v == 0.0));

        let empty = decoder_input(&DMatrix::zeros(0, 3), 5).unwrap();
        assert_eq!(empty.concatenated(), DMatrix::zeros(5, 3));
        assert!(decoder_input(&token, 0).is_err());
    }

    #[test]
    fn toy_forward_shapes() {
        let model = ToyTisat::new(ToyTisatConfig {
            dims: 4,
            encoder_layers: 3,
            token_len: 10,
            target_len: 5,
            seed: 9,
        })
        .unwrap();
        let window = DMatrix::from_fn(100, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        assert_eq!(model.encode(&window).unwrap().shape(), (25, 4));
        let f = model.forecast(&window).unwrap();
        assert_eq!(f.shape(), (5, 4));
        assert!(f.iter().all(|v| v.is_finite()));
        assert_eq!(f, model.forecast(&window).unwrap());
    }
}
