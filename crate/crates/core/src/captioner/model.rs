use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Minibatch;
use crate::error::{Error, Result};
use crate::nn::{
    dense_backward, dense_forward, embedding_backward, embedding_lookup, lstm_backward_step, lstm_forward_step,
    softmax_xent_grad, xavier_init_with, LstmCache, LstmCellParams, LstmState, ParamSet, Parameter, Precision, Real,
    Tensor,
};

use super::{Architecture, ModelConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct CaptionModel<T> {
    config: ModelConfig,
    pub embedding: Parameter<T>,
    pub image_weight: Parameter<T>,
    pub image_bias: Parameter<T>,
    pub lstm: LstmCellParams<T>,
    pub output_weight: Parameter<T>,
    pub output_bias: Parameter<T>,
}

/// Incremental decoding state for one image.
#[derive(Clone, Debug)]
pub struct DecodeState<T> {
    pub lstm: LstmState<T>,
    image_proj: Tensor<T>,
}

impl<T> DecodeState<T> {
    pub fn image_projection(&self) -> &Tensor<T> {
        &self.image_proj
    }
}

struct Step<T> {
    tokens: Vec<usize>,
    cache: LstmCache<T>,
    output_input: Tensor<T>,
    grad_logits: Tensor<T>,
}

impl<T: Real> CaptionModel<T> {
    /// Xavier weights and zero biases, drawn from `config.seed`.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let x = config.layer_size;
        model.embedding.value = xavier_init_with(&[config.vocab_size, x], &mut rng)?;
        model.image_weight.value = xavier_init_with(&[config.image_size, x], &mut rng)?;
        model.lstm = LstmCellParams::xavier("lstm", config.lstm_input_size(), x, &mut rng)?;
        model.output_weight.value = xavier_init_with(&[config.output_input_size(), config.vocab_size], &mut rng)?;
        Ok(model)
    }

    /// Every parameter zero.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.precision != T::PRECISION {
            return Err(Error::config(format!(
                "config asks for {}-bit precision but the model type is {}-bit",
                config.precision,
                T::PRECISION
            )));
        }
        let x = config.layer_size;
        let v = config.vocab_size;
        Ok(CaptionModel {
            config: config.clone(),
            embedding: Parameter::zeros("embedding", &[v, x]),
            image_weight: Parameter::zeros("image_proj.weight", &[config.image_size, x]),
            image_bias: Parameter::zeros("image_proj.bias", &[x]),
            lstm: LstmCellParams::zeros("lstm", config.lstm_input_size(), x),
            output_weight: Parameter::zeros("output.weight", &[config.output_input_size(), v]),
            output_bias: Parameter::zeros("output.bias", &[v]),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        let v = self.config.vocab_size;
        match tokens.iter().find(|&&t| t >= v) {
            Some(&index) => Err(Error::Vocabulary { index, size: v }),
            None => Ok(()),
        }
    }

    fn image_matrix(&self, image: &[T]) -> Result<Tensor<T>> {
        if image.len() != self.config.image_size {
            return Err(Error::Dimension {
                context: "image feature vs image projection",
                left: vec![image.len()],
                right: self.image_weight.shape().to_vec(),
            });
        }
        Tensor::new(vec![1, image.len()], image.to_vec())
    }

    fn project(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        dense_forward(images, &self.image_weight, &self.image_bias)
    }

    fn lstm_input(&self, tokens: &[usize], image_proj: &Tensor<T>) -> Result<Tensor<T>> {
        let emb = embedding_lookup(tokens, &self.embedding)?;
        match self.config.architecture {
            Architecture::Inject => emb.concat_cols(image_proj),
            Architecture::Merge => Ok(emb),
        }
    }

    fn output_input(&self, hidden: &Tensor<T>, image_proj: &Tensor<T>) -> Result<Tensor<T>> {
        match self.config.architecture {
            Architecture::Inject => Ok(hidden.clone()),
            Architecture::Merge => hidden.concat_cols(image_proj),
        }
    }

    fn run_lstm(&self, image_proj: &Tensor<T>, columns: &[Vec<usize>]) -> Result<LstmState<T>> {
        let mut state = LstmState::zeros(image_proj.rows(), self.config.layer_size);
        for tokens in columns {
            let input = self.lstm_input(tokens, image_proj)?;
            state = lstm_forward_step(&input, &state, &self.lstm)?.0;
        }
        Ok(state)
    }

    /// LSTM state after reading `prefix` for this image.
    pub fn hidden_state(&self, image: &[T], prefix: &[usize]) -> Result<LstmState<T>> {
        if prefix.is_empty() {
            return Err(Error::usage("prefix must contain at least the start token"));
        }
        self.check_tokens(prefix)?;
        let proj = self.project(&self.image_matrix(image)?)?;
        let columns: Vec<Vec<usize>> = prefix.iter().map(|&t| vec![t]).collect();
        self.run_lstm(&proj, &columns)
    }

    /// Next-token logits after `prefix`.
    pub fn forward(&self, image: &[T], prefix: &[usize]) -> Result<Tensor<T>> {
        let logits = self.forward_batch(&self.image_matrix(image)?, &[prefix.to_vec()])?;
        logits.reshape(vec![self.config.vocab_size])
    }

    /// Next-token logits for `B` equal-length prefixes; `images` is `B × i`.
    pub fn forward_batch(&self, images: &Tensor<T>, prefixes: &[Vec<usize>]) -> Result<Tensor<T>> {
        let len = prefixes.first().map_or(0, Vec::len);
        if len == 0 {
            return Err(Error::usage("prefix must contain at least the start token"));
        }
        if prefixes.iter().any(|p| p.len() != len) {
            return Err(Error::usage("batched prefixes must share one length"));
        }
        if images.rows() != prefixes.len() {
            return Err(Error::Dimension {
                context: "forward_batch (images vs prefixes)",
                left: images.shape().to_vec(),
                right: vec![prefixes.len(), len],
            });
        }
        for p in prefixes {
            self.check_tokens(p)?;
        }
        let proj = self.project(images)?;
        let columns: Vec<Vec<usize>> = (0..len).map(|t| prefixes.iter().map(|p| p[t]).collect()).collect();
        let state = self.run_lstm(&proj, &columns)?;
        let z = self.output_input(&state.hidden, &proj)?;
        dense_forward(&z, &self.output_weight, &self.output_bias)
    }

    pub fn begin(&self, image: &[T]) -> Result<DecodeState<T>> {
        let image_proj = self.project(&self.image_matrix(image)?)?;
        Ok(DecodeState {
            lstm: LstmState::zeros(1, self.config.layer_size),
            image_proj,
        })
    }

    /// Feeds one token and returns the new state with next-token logits.
    pub fn step(&self, state: &DecodeState<T>, token: usize) -> Result<(DecodeState<T>, Vec<T>)> {
        self.check_tokens(&[token])?;
        let input = self.lstm_input(&[token], &state.image_proj)?;
        let lstm = lstm_forward_step(&input, &state.lstm, &self.lstm)?.0;
        let z = self.output_input(&lstm.hidden, &state.image_proj)?;
        let logits = dense_forward(&z, &self.output_weight, &self.output_bias)?.into_data();
        Ok((
            DecodeState {
                lstm,
                image_proj: state.image_proj.clone(),
            },
            logits,
        ))
    }

    /// Teacher-forced sum cross-entropy of one bracketed caption.
    pub fn caption_loss(&self, image: &[T], caption: &[usize]) -> Result<f64> {
        let (images, columns, targets) = self.single_caption(image, caption)?;
        Ok(self.forward_steps(&images, &columns, &targets, false)?.0)
    }

    /// As [`caption_loss`](Self::caption_loss), also accumulating gradients.
    pub fn caption_loss_backward(&mut self, image: &[T], caption: &[usize]) -> Result<f64> {
        let (images, columns, targets) = self.single_caption(image, caption)?;
        self.unroll(&images, &columns, &targets)
    }

    #[allow(clippy::type_complexity)]
    fn single_caption(
        &self,
        image: &[T],
        caption: &[usize],
    ) -> Result<(Tensor<T>, Vec<Vec<usize>>, Vec<Vec<Option<usize>>>)> {
        if caption.len() < 2 {
            return Err(Error::usage(format!(
                "a caption needs at least start and end tokens, got {} token(s)",
                caption.len()
            )));
        }
        self.check_tokens(caption)?;
        let images = self.image_matrix(image)?;
        let n = caption.len() - 1;
        let columns = caption[..n].iter().map(|&t| vec![t]).collect();
        let targets = caption[1..].iter().map(|&t| vec![Some(t)]).collect();
        Ok((images, columns, targets))
    }

    /// Sum cross-entropy over a padded minibatch, without gradients.
    pub fn batch_loss(&self, batch: &Minibatch) -> Result<f64> {
        let (images, columns, targets) = self.batch_inputs(batch)?;
        Ok(self.forward_steps(&images, &columns, &targets, false)?.0)
    }

    /// Sum cross-entropy over a padded minibatch, accumulating gradients.
    pub fn batch_loss_backward(&mut self, batch: &Minibatch) -> Result<f64> {
        let (images, columns, targets) = self.batch_inputs(batch)?;
        self.unroll(&images, &columns, &targets)
    }

    #[allow(clippy::type_complexity)]
    fn batch_inputs(&self, batch: &Minibatch) -> Result<(Tensor<T>, Vec<Vec<usize>>, Vec<Vec<Option<usize>>>)> {
        let b = batch.len();
        if batch.feature_dim != self.config.image_size {
            return Err(Error::Dimension {
                context: "minibatch features vs image projection",
                left: vec![b, batch.feature_dim],
                right: self.image_weight.shape().to_vec(),
            });
        }
        let images = Tensor::new(
            vec![b, batch.feature_dim],
            batch.features.iter().map(|&v| T::lit(v as f64)).collect(),
        )?;
        let width = batch.max_len();
        if width < 2 {
            return Err(Error::usage("minibatch captions need at least two tokens"));
        }
        let mut columns = Vec::with_capacity(width - 1);
        let mut targets = Vec::with_capacity(width - 1);
        for t in 0..width - 1 {
            columns.push(batch.tokens.iter().map(|row| row[t]).collect::<Vec<_>>());
            targets.push(
                batch
                    .tokens
                    .iter()
                    .zip(&batch.lengths)
                    .map(|(row, &len)| (t + 1 < len).then(|| row[t + 1]))
                    .collect::<Vec<_>>(),
            );
        }
        for col in &columns {
            self.check_tokens(col)?;
        }
        Ok((images, columns, targets))
    }

    /// Runs the unrolled network over `columns` (one token per row per step),
    /// scoring `targets`, then accumulates every gradient in reverse step order.
    fn unroll(&mut self, images: &Tensor<T>, columns: &[Vec<usize>], targets: &[Vec<Option<usize>>]) -> Result<f64> {
        let (loss, proj, steps) = self.forward_steps(images, columns, targets, true)?;
        self.backward_steps(images, &proj, &steps)?;
        Ok(loss)
    }

    #[allow(clippy::type_complexity)]
    fn forward_steps(
        &self,
        images: &Tensor<T>,
        columns: &[Vec<usize>],
        targets: &[Vec<Option<usize>>],
        keep: bool,
    ) -> Result<(f64, Tensor<T>, Vec<Step<T>>)> {
        let x = self.config.layer_size;
        let proj = self.project(images)?;
        let mut state = LstmState::zeros(images.rows(), x);
        let mut steps: Vec<Step<T>> = Vec::with_capacity(columns.len());
        let mut loss = 0.0;
        for (tokens, targets) in columns.iter().zip(targets) {
            let input = self.lstm_input(tokens, &proj)?;
            let (next, cache) = lstm_forward_step(&input, &state, &self.lstm)?;
            state = next;
            let z = self.output_input(&state.hidden, &proj)?;
            let logits = dense_forward(&z, &self.output_weight, &self.output_bias)?;
            let mut grad_logits = Tensor::zeros(logits.shape());
            for (r, target) in targets.iter().enumerate() {
                if let Some(t) = *target {
                    let (l, g) = softmax_xent_grad(logits.row(r), t)?;
                    loss += l.as_f64();
                    grad_logits.row_mut(r).copy_from_slice(&g);
                }
            }
            if keep {
                steps.push(Step {
                    tokens: tokens.clone(),
                    cache,
                    output_input: z,
                    grad_logits,
                });
            }
        }
        Ok((loss, proj, steps))
    }

    fn backward_steps(&mut self, images: &Tensor<T>, proj: &Tensor<T>, steps: &[Step<T>]) -> Result<()> {
        let x = self.config.layer_size;
        let state_shape = [proj.rows(), x];
        let mut grad_proj = Tensor::zeros(proj.shape());
        let mut grad_hidden = Tensor::zeros(&state_shape);
        let mut grad_cell = Tensor::zeros(&state_shape);
        for step in steps.iter().rev() {
            let dz = dense_backward(
                &step.output_input,
                &step.grad_logits,
                &mut self.output_weight,
                &mut self.output_bias,
            )?;
            let dh_out = match self.config.architecture {
                Architecture::Inject => dz,
                Architecture::Merge => {
                    let (dh, dp) = dz.split_cols(x)?;
                    grad_proj.add_assign(&dp)?;
                    dh
                }
            };
            grad_hidden.add_assign(&dh_out)?;
            let (dx, dh_prev, dc_prev) = lstm_backward_step(&step.cache, &grad_hidden, &grad_cell, &mut self.lstm)?;
            let d_embed = match self.config.architecture {
                Architecture::Inject => {
                    let (de, dp) = dx.split_cols(x)?;
                    grad_proj.add_assign(&dp)?;
                    de
                }
                Architecture::Merge => dx,
            };
            embedding_backward(&step.tokens, &d_embed, &mut self.embedding)?;
            grad_hidden = dh_prev;
            grad_cell = dc_prev;
        }
        dense_backward(images, &grad_proj, &mut self.image_weight, &mut self.image_bias)?;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> CaptionModel<U> {
        let mut config = self.config.clone();
        config.precision = U::PRECISION;
        let mut out = CaptionModel::<U>::zeros(&config).expect("validated config");
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            dst.value = src.value.cast();
        }
        out
    }
}

impl<T: Real> ParamSet<T> for CaptionModel<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        let mut out = vec![&self.embedding, &self.image_weight, &self.image_bias];
        out.extend(self.lstm.params());
        out.push(&self.output_weight);
        out.push(&self.output_bias);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut out = vec![&mut self.embedding, &mut self.image_weight, &mut self.image_bias];
        out.extend(self.lstm.params_mut());
        out.push(&mut self.output_weight);
        out.push(&mut self.output_bias);
        out
    }
}

/// A model of either precision, as read from a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    F32(CaptionModel<f32>),
    F64(CaptionModel<f64>),
}

impl AnyModel {
    pub fn config(&self) -> &ModelConfig {
        match self {
            AnyModel::F32(m) => m.config(),
            AnyModel::F64(m) => m.config(),
        }
    }

    pub fn precision(&self) -> Precision {
        self.config().precision
    }
}

impl From<CaptionModel<f32>> for AnyModel {
    fn from(m: CaptionModel<f32>) -> Self {
        AnyModel::F32(m)
    }
}

impl From<CaptionModel<f64>> for AnyModel {
    fn from(m: CaptionModel<f64>) -> Self {
        AnyModel::F64(m)
    }
}
