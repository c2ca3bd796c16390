//! The full network: instance normalization, patching, projection,
//! positional encoding, stacked dual-attention layers, and the two heads
//! (patch reconstruction for pretraining, classification for fine-tuning).

use tsfm_core::{Element, Result, Rng, Tensor};

use crate::attention::multi_head_attention_probe;
use crate::config::ModelConfig;
use crate::layer::{EncoderLayer, Pass};
use crate::norm::{instance_normalize, ChannelStats};
use crate::posenc::positional_encoding;
use crate::ModelError;

pub struct Model<E: Element> {
    pub cfg: ModelConfig,
    pub patch_w: Tensor<E>, // [P, d]
    pub patch_b: Tensor<E>, // [d]
    /// Fixed sinusoidal table [N, d]; not trainable, not checkpointed.
    pub pos: Tensor<E>,
    pub layers: Vec<EncoderLayer<E>>,
    pub recon_w: Tensor<E>, // [d, P]
    pub recon_b: Tensor<E>, // [P]
    pub head_w: Tensor<E>,  // [C*d, K]
    pub head_b: Tensor<E>,  // [K]
}

impl<E: Element> Model<E> {
    /// Initialize from a validated config. Linear weights are uniform in
    /// +/- 1/sqrt(fan_in); biases and norm betas start at zero, gammas at
    /// one. Parameter creation order is fixed, so a given seed always
    /// yields the same model.
    pub fn new(cfg: &ModelConfig, rng: &mut Rng) -> std::result::Result<Self, ModelError> {
        cfg.validate()?;
        let (d, p) = (cfg.d_model, cfg.patch_size);
        let bp = 1.0 / (p as f64).sqrt();
        let patch_w = Tensor::rand_uniform(&[p, d], -bp, bp, rng).require_grad();
        let patch_b = Tensor::zeros(&[d]).require_grad();
        let pos = positional_encoding::<E>(cfg.n_patches(), d)?;
        let layers = (0..cfg.n_layers).map(|_| EncoderLayer::init(cfg, rng)).collect();
        let bd = 1.0 / (d as f64).sqrt();
        let recon_w = Tensor::rand_uniform(&[d, p], -bd, bd, rng).require_grad();
        let recon_b = Tensor::zeros(&[p]).require_grad();
        let fan = cfg.channels * d;
        let bh = 1.0 / (fan as f64).sqrt();
        let head_w = Tensor::rand_uniform(&[fan, cfg.n_classes], -bh, bh, rng).require_grad();
        let head_b = Tensor::zeros(&[cfg.n_classes]).require_grad();
        Ok(Model {
            cfg: cfg.clone(),
            patch_w,
            patch_b,
            pos,
            layers,
            recon_w,
            recon_b,
            head_w,
            head_b,
        })
    }

    /// Trainable parameters under canonical names, in checkpoint order.
    pub fn named_params(&self) -> Vec<(String, Tensor<E>)> {
        let mut out = vec![
            ("patch_proj.weight".to_string(), self.patch_w.clone()),
            ("patch_proj.bias".to_string(), self.patch_b.clone()),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut push = |name: &str, t: &Tensor<E>| {
                out.push((format!("layers.{i}.{name}"), t.clone()));
            };
            push("attn.wq", &layer.attn.wq);
            push("attn.wk", &layer.attn.wk);
            push("attn.wv", &layer.attn.wv);
            push("attn.wo", &layer.attn.wo);
            push("ffn.w1", &layer.ffn_w1);
            push("ffn.w2", &layer.ffn_w2);
            push("ln_temporal.gamma", &layer.ln_temporal.gamma);
            push("ln_temporal.beta", &layer.ln_temporal.beta);
            push("ln_channel.gamma", &layer.ln_channel.gamma);
            push("ln_channel.beta", &layer.ln_channel.beta);
            push("ln_ffn.gamma", &layer.ln_ffn.gamma);
            push("ln_ffn.beta", &layer.ln_ffn.beta);
        }
        out.push(("recon.weight".to_string(), self.recon_w.clone()));
        out.push(("recon.bias".to_string(), self.recon_b.clone()));
        out.push(("classify.weight".to_string(), self.head_w.clone()));
        out.push(("classify.bias".to_string(), self.head_b.clone()));
        out
    }

    pub fn params(&self) -> Vec<Tensor<E>> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    /// Actual trainable element count; must equal
    /// [`ModelConfig::count_params`].
    pub fn param_count(&self) -> usize {
        self.params().iter().map(Tensor::numel).sum()
    }

    pub fn zero_grads(&self) {
        for p in self.params() {
            p.zero_grad();
        }
    }

    /// Copy of all parameter data, for early-stopping snapshots.
    pub fn snapshot(&self) -> Vec<Vec<E>> {
        self.params().iter().map(Tensor::to_vec).collect()
    }

    pub fn restore(&self, snap: &[Vec<E>]) -> Result<()> {
        for (p, s) in self.params().iter().zip(snap) {
            p.set_data(s.clone())?;
        }
        Ok(())
    }

    /// [B, C, L] -> [B, C, N, P]: non-overlapping consecutive segments.
    /// A pure reshape in row-major order, so patchify-then-flatten is the
    /// identity.
    pub fn patchify(&self, x: &Tensor<E>) -> std::result::Result<Tensor<E>, ModelError> {
        let shape = x.shape();
        let cfg = &self.cfg;
        if shape.len() != 3 || shape[1] != cfg.channels || shape[2] != cfg.window_len {
            return Err(ModelError::Config(format!(
                "expected [B, {}, {}], got {shape:?}",
                cfg.channels, cfg.window_len
            )));
        }
        Ok(x.reshape(&[shape[0], cfg.channels, cfg.n_patches(), cfg.patch_size])?)
    }

    /// [B, C, N, P] -> [B, C, N, d]: linear projection plus the positional
    /// table, which is shared identically across channels.
    pub fn embed(&self, patches: &Tensor<E>) -> Result<Tensor<E>> {
        let shape = patches.shape();
        let (b, c, n) = (shape[0], shape[1], shape[2]);
        let d = self.cfg.d_model;
        let rows = b * c * n;
        let projected = patches
            .reshape(&[rows, self.cfg.patch_size])?
            .matmul(&self.patch_w)?
            .add(&self.patch_b.reshape(&[1, d])?.expand(&[rows, d])?)?
            .reshape(&[b, c, n, d])?;
        let pos = self.pos.reshape(&[1, 1, n, d])?.expand(&[b, c, n, d])?;
        projected.add(&pos)
    }

    /// Run the encoder stack on embedded tokens [B, C, N, d].
    pub fn encoder_forward(&self, emb: &Tensor<E>, pass: &mut Pass<'_>) -> Result<Tensor<E>> {
        let mut x = emb.clone();
        for layer in &self.layers {
            x = layer.forward(&x, &self.cfg, pass)?;
        }
        Ok(x)
    }

    /// Full encode from raw input [B, C, L]: instance normalize, patchify,
    /// project, add positions, run the layers. Returns the latent
    /// [B, C, N, d] and the removed per-(window, channel) statistics.
    pub fn encode(
        &self,
        x_raw: &Tensor<E>,
        pass: &mut Pass<'_>,
    ) -> std::result::Result<(Tensor<E>, Vec<ChannelStats>), ModelError> {
        let (normed, stats) = instance_normalize(x_raw, self.cfg.eps_norm)?;
        let z = self.encode_normalized(&normed, pass)?;
        Ok((z, stats))
    }

    /// Encode an already-normalized input (attribution walks interpolation
    /// paths in normalized space, so re-normalizing would be wrong).
    pub fn encode_normalized(
        &self,
        x_norm: &Tensor<E>,
        pass: &mut Pass<'_>,
    ) -> std::result::Result<Tensor<E>, ModelError> {
        let patches = self.patchify(x_norm)?;
        let emb = self.embed(&patches)?;
        Ok(self.encoder_forward(&emb, pass)?)
    }

    /// Per-patch linear reconstruction head: [B, C, N, d] -> [B, C, N, P].
    pub fn reconstruct(&self, z: &Tensor<E>) -> Result<Tensor<E>> {
        let shape = z.shape();
        let (b, c, n, d) = (shape[0], shape[1], shape[2], shape[3]);
        let p = self.cfg.patch_size;
        let rows = b * c * n;
        z.reshape(&[rows, d])?
            .matmul(&self.recon_w)?
            .add(&self.recon_b.reshape(&[1, p])?.expand(&[rows, p])?)?
            .reshape(&[b, c, n, p])
    }

    /// Classification head: global average pooling over the patch axis,
    /// flatten to [B, C*d], one linear map to [B, K] logits.
    pub fn classify(&self, z: &Tensor<E>) -> Result<Tensor<E>> {
        let shape = z.shape();
        let (b, c, d) = (shape[0], shape[1], shape[3]);
        let k = self.cfg.n_classes;
        let pooled = z.mean_axis(2)?; // [B, C, d]
        pooled
            .reshape(&[b, c * d])?
            .matmul(&self.head_w)?
            .add(&self.head_b.reshape(&[1, k])?.expand(&[b, k])?)
    }

    /// Raw input to logits, the deployment path.
    pub fn forward_classify(
        &self,
        x_raw: &Tensor<E>,
        pass: &mut Pass<'_>,
    ) -> std::result::Result<Tensor<E>, ModelError> {
        let (z, _) = self.encode(x_raw, pass)?;
        Ok(self.classify(&z)?)
    }

    /// Channel-attention weights of layer `layer_idx` for a raw input,
    /// `[B, N, n_heads, C, C]`. Evaluation mode, no dropout.
    pub fn channel_attention_weights(
        &self,
        x_raw: &Tensor<E>,
        layer_idx: usize,
    ) -> std::result::Result<Tensor<E>, ModelError> {
        assert!(layer_idx < self.layers.len());
        let (normed, _) = instance_normalize(x_raw, self.cfg.eps_norm)?;
        let patches = self.patchify(&normed)?;
        let mut x = self.embed(&patches)?;
        let mut pass = Pass::Eval;
        for layer in &self.layers[..layer_idx] {
            x = layer.forward(&x, &self.cfg, &mut pass)?;
        }
        // Input to the channel sublayer is the temporal sublayer's output.
        let layer = &self.layers[layer_idx];
        let t = tsfm_core::Tensor::add(
            &x,
            &crate::attention::multi_head_attention(&x, &layer.attn, self.cfg.n_heads)?,
        )?
        .layer_norm(
            &layer.ln_temporal.gamma,
            &layer.ln_temporal.beta,
            E::of_f64(self.cfg.eps_norm),
        )?;
        let tokens = t.transpose(&[0, 2, 1, 3])?; // [B, N, C, d]
        Ok(multi_head_attention_probe(&tokens, &layer.attn, self.cfg.n_heads)?)
    }
}
