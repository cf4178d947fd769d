//! Variational autoencoders that compress bit-vector features.
//!
//! The encoder trunk (ReLU) feeds two parallel identity heads for the
//! posterior mean and log-variance. The decoder mirrors the trunk widths in
//! reverse and ends in a Sigmoid over the input bits. The loss is the plain
//! ELBO: per-sample summed Bernoulli cross-entropy plus the Gaussian KL,
//! both averaged over the batch.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{BitVectorStore, LatentStore};
use crate::error::{Error, Result};
use crate::format::{format_sig, to_lossless_json, METRIC_DIGITS};
use crate::nn::{
    bce_rowsum_loss, Activation, AdamState, DenseLayer, DenseNetwork, LayerRecord,
    NetworkCheckpoint,
};
use crate::rng::RngStream;
use crate::tensor::Tensor2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl VaeConfig {
    /// 5508-bit protein domain vectors → 128 latents.
    pub fn protein() -> Self {
        Self {
            input_dim: 5508,
            encoder_hidden: vec![2048, 512],
            latent_dim: 128,
            epochs: 500,
            batch_size: 1000,
            learning_rate: 1e-4,
        }
    }

    /// 1024-bit compound fingerprints → 64 latents.
    pub fn chemical() -> Self {
        Self {
            input_dim: 1024,
            encoder_hidden: vec![256, 128],
            latent_dim: 64,
            ..Self::protein()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 {
            return Err(Error::Config(
                "input_dim and latent_dim must be at least 1".into(),
            ));
        }
        if self.encoder_hidden.is_empty() || self.encoder_hidden.contains(&0) {
            return Err(Error::Config(
                "encoder_hidden must be a non-empty list of positive widths".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.latent_dim > self.input_dim {
            log::warn!(
                "latent_dim {} exceeds input_dim {}",
                self.latent_dim,
                self.input_dim
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder_trunk: DenseNetwork,
    pub mu_head: DenseLayer,
    pub logvar_head: DenseLayer,
    pub decoder: DenseNetwork,
}

pub fn build_vae(config: &VaeConfig, rng: &mut RngStream) -> Result<VaeModel> {
    config.validate()?;
    let hidden = &config.encoder_hidden;
    let trunk = DenseNetwork::init(
        hidden,
        config.input_dim,
        &vec![Activation::ReLU; hidden.len()],
        rng,
    )?;
    let last = *hidden.last().expect("validated non-empty");
    let mu_head = DenseLayer::glorot(last, config.latent_dim, Activation::Identity, rng)?;
    let logvar_head = DenseLayer::glorot(last, config.latent_dim, Activation::Identity, rng)?;
    let mut dec_sizes: Vec<usize> = hidden.iter().rev().copied().collect();
    dec_sizes.push(config.input_dim);
    let mut dec_acts = vec![Activation::ReLU; dec_sizes.len() - 1];
    dec_acts.push(Activation::Sigmoid);
    let decoder = DenseNetwork::init(&dec_sizes, config.latent_dim, &dec_acts, rng)?;
    Ok(VaeModel {
        encoder_trunk: trunk,
        mu_head,
        logvar_head,
        decoder,
    })
}

/// `z = mu + exp(logvar / 2) ⊙ η`, `η ~ N(0, I)` drawn from `rng`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    if mu.len() != logvar.len() {
        return Err(Error::shape("reparameterize", mu.len(), logvar.len()));
    }
    Ok(mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| m + (0.5 * lv).exp() * rng.normal())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

fn kl_term(mu: &Tensor2, logvar: &Tensor2) -> f64 {
    let n = mu.rows().max(1) as f64;
    let sum: f64 = mu
        .data()
        .iter()
        .zip(logvar.data())
        .map(|(&m, &lv)| m * m + lv.exp() - 1.0 - lv)
        .sum();
    0.5 * sum / n
}

fn check_bits(input: &Tensor2) -> Result<()> {
    if let Some(v) = input.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data(format!("VAE input must be binary, found {v}")));
    }
    Ok(())
}

/// ELBO terms for a batch.
pub fn vae_loss(
    reconstruction: &Tensor2,
    input: &Tensor2,
    mu: &Tensor2,
    logvar: &Tensor2,
) -> Result<VaeLoss> {
    check_bits(input)?;
    if mu.shape() != logvar.shape() || mu.rows() != input.rows() {
        return Err(Error::shape(
            "vae_loss posterior",
            format!("{}x{} mu and logvar", input.rows(), mu.cols()),
            format!(
                "{}x{} mu, {}x{} logvar",
                mu.rows(),
                mu.cols(),
                logvar.rows(),
                logvar.cols()
            ),
        ));
    }
    let (recon, _) = bce_rowsum_loss(reconstruction, input)?;
    let kl = kl_term(mu, logvar);
    Ok(VaeLoss {
        total: recon + kl,
        reconstruction: recon,
        kl,
    })
}

/// Gradients in the order of [`VaeModel::params_mut`].
#[derive(Debug, Clone)]
pub struct VaeGrads {
    pub flat: Vec<Vec<f64>>,
}

impl VaeModel {
    pub fn input_dim(&self) -> usize {
        self.encoder_trunk.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.out_dim()
    }

    /// Trunk, μ head, log σ² head, decoder.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder_trunk.params_mut();
        out.extend(self.mu_head.params_mut());
        out.extend(self.logvar_head.params_mut());
        out.extend(self.decoder.params_mut());
        out
    }

    pub fn param_shapes(&mut self) -> Vec<usize> {
        self.params_mut().iter().map(|p| p.len()).collect()
    }

    /// Posterior mean and log-variance for a batch.
    pub fn encode(&self, batch: &Tensor2) -> Result<(Tensor2, Tensor2)> {
        let h = self.encoder_trunk.predict(batch)?;
        let (_, mu) = self.mu_head.forward(&h)?;
        let (_, logvar) = self.logvar_head.forward(&h)?;
        Ok((mu, logvar))
    }

    /// Loss and parameter gradients with the reparameterization noise fixed
    /// to `noise` (`batch.rows() x latent_dim`).
    pub fn loss_and_grads(&self, batch: &Tensor2, noise: &Tensor2) -> Result<(VaeLoss, VaeGrads)> {
        check_bits(batch)?;
        let n = batch.rows();
        let latent = self.latent_dim();
        if noise.shape() != (n, latent) {
            return Err(Error::shape(
                "VaeModel::loss_and_grads noise",
                format!("{n}x{latent}"),
                format!("{}x{}", noise.rows(), noise.cols()),
            ));
        }
        let trunk_acts = self.encoder_trunk.forward(batch)?;
        let h = trunk_acts.output();
        let (_, mu) = self.mu_head.forward(h)?;
        let (_, logvar) = self.logvar_head.forward(h)?;

        let mut z = Tensor2::zeros(n, latent);
        let mut sigma = Tensor2::zeros(n, latent);
        for i in 0..n * latent {
            let s = (0.5 * logvar.data()[i]).exp();
            sigma.data_mut()[i] = s;
            z.data_mut()[i] = mu.data()[i] + s * noise.data()[i];
        }

        let dec_acts = self.decoder.forward(&z)?;
        let (recon, grad_recon) = bce_rowsum_loss(dec_acts.output(), batch)?;
        let kl = kl_term(&mu, &logvar);
        let loss = VaeLoss {
            total: recon + kl,
            reconstruction: recon,
            kl,
        };
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite VAE loss {}",
                loss.total
            )));
        }

        let dec_grads = self.decoder.backward(&dec_acts, &grad_recon)?;
        let gz = &dec_grads.input;
        let inv_n = 1.0 / n.max(1) as f64;
        let mut g_mu = Tensor2::zeros(n, latent);
        let mut g_logvar = Tensor2::zeros(n, latent);
        for i in 0..n * latent {
            let (m, lv) = (mu.data()[i], logvar.data()[i]);
            g_mu.data_mut()[i] = gz.data()[i] + m * inv_n;
            g_logvar.data_mut()[i] = gz.data()[i] * noise.data()[i] * 0.5 * sigma.data()[i]
                + 0.5 * (lv.exp() - 1.0) * inv_n;
        }
        let (mu_g, gh_mu) = self.mu_head.backward(h, &mu, &g_mu)?;
        let (lv_g, gh_lv) = self.logvar_head.backward(h, &logvar, &g_logvar)?;
        let mut gh = gh_mu;
        for (a, b) in gh.data_mut().iter_mut().zip(gh_lv.data()) {
            *a += b;
        }
        let trunk_grads = self.encoder_trunk.backward(&trunk_acts, &gh)?;

        let mut flat: Vec<Vec<f64>> = trunk_grads.slices().iter().map(|s| s.to_vec()).collect();
        flat.push(mu_g.weights.into_vec());
        flat.push(mu_g.biases);
        flat.push(lv_g.weights.into_vec());
        flat.push(lv_g.biases);
        flat.extend(dec_grads.slices().iter().map(|s| s.to_vec()));
        Ok((loss, VaeGrads { flat }))
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(to_lossless_json(&VaeEnvelope {
            vae: VaeCheckpoint {
                latent_dim: self.latent_dim(),
                trunk: (&self.encoder_trunk).into(),
                mu_head: (&self.mu_head).into(),
                logvar_head: (&self.logvar_head).into(),
                decoder: (&self.decoder).into(),
            },
        })? + "\n")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let VaeEnvelope { vae } = serde_json::from_str(text)?;
        let model = VaeModel {
            encoder_trunk: vae.trunk.try_into()?,
            mu_head: vae.mu_head.try_into()?,
            logvar_head: vae.logvar_head.try_into()?,
            decoder: vae.decoder.try_into()?,
        };
        let width = model.encoder_trunk.output_dim();
        let consistent = model.mu_head.in_dim() == width
            && model.logvar_head.in_dim() == width
            && model.mu_head.out_dim() == vae.latent_dim
            && model.logvar_head.out_dim() == vae.latent_dim
            && model.decoder.input_dim() == vae.latent_dim
            && model.decoder.output_dim() == model.encoder_trunk.input_dim();
        if !consistent {
            return Err(Error::Data("inconsistent VAE checkpoint shapes".into()));
        }
        Ok(model)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct VaeEnvelope {
    vae: VaeCheckpoint,
}

#[derive(Serialize, Deserialize)]
struct VaeCheckpoint {
    latent_dim: usize,
    trunk: NetworkCheckpoint,
    mu_head: LayerRecord,
    logvar_head: LayerRecord,
    decoder: NetworkCheckpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeEpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
    /// Difference from the previous epoch's loss; absent for the first epoch.
    pub loss_change: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VaeLog {
    pub records: Vec<VaeEpochRecord>,
}

impl VaeLog {
    pub fn to_csv(&self) -> String {
        let f = |x: f64| format_sig(x, METRIC_DIGITS);
        let mut out = String::from("epoch,loss,reconstruction,kl,loss_change\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch,
                f(r.loss),
                f(r.reconstruction),
                f(r.kl),
                r.loss_change.map(f).unwrap_or_default()
            ));
        }
        out
    }
}

fn gather_bits(data: &BitVectorStore, indices: &[usize]) -> Tensor2 {
    let w = data.width();
    let mut batch = Tensor2::zeros(indices.len(), w);
    for (row, &i) in indices.iter().enumerate() {
        data.fill_row(i, batch.row_mut(row));
    }
    batch
}

/// Trains a fresh model (initialized from `rng`) with Adam over shuffled
/// mini-batches; the final short batch of an epoch is kept.
pub fn train_vae(
    config: &VaeConfig,
    data: &BitVectorStore,
    rng: &mut RngStream,
) -> Result<(VaeModel, VaeLog)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot train a VAE on an empty store".into()));
    }
    if data.width() != config.input_dim {
        return Err(Error::shape(
            "train_vae input width",
            config.input_dim,
            data.width(),
        ));
    }
    let mut model = build_vae(config, rng)?;
    let mut adam = AdamState::new(&model.param_shapes(), config.learning_rate);
    let mut log = VaeLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let latent = config.latent_dim;
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let (mut total, mut recon, mut kl) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch = gather_bits(data, chunk);
            let noise_data = (0..chunk.len() * latent).map(|_| rng.normal()).collect();
            let noise = Tensor2::from_vec(chunk.len(), latent, noise_data)?;
            let (loss, grads) = model.loss_and_grads(&batch, &noise)?;
            let slices: Vec<&[f64]> = grads.flat.iter().map(Vec::as_slice).collect();
            adam.step(&mut model.params_mut(), &slices)?;
            let w = chunk.len() as f64;
            total += loss.total * w;
            recon += loss.reconstruction * w;
            kl += loss.kl * w;
        }
        let n = data.len() as f64;
        let loss = total / n;
        let loss_change = log.records.last().map(|prev| loss - prev.loss);
        log.records.push(VaeEpochRecord {
            epoch,
            loss,
            reconstruction: recon / n,
            kl: kl / n,
            loss_change,
        });
        log::debug!("vae epoch {epoch}: loss {loss:.6}");
    }
    Ok((model, log))
}

/// Posterior means for every entry; consumes no randomness.
pub fn embed(model: &VaeModel, data: &BitVectorStore) -> Result<LatentStore> {
    if data.width() != model.input_dim() {
        return Err(Error::shape(
            "embed input width",
            model.input_dim(),
            data.width(),
        ));
    }
    let ids: Vec<&str> = data.ids().collect();
    let mut store = LatentStore::new(model.latent_dim());
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(1024) {
        let (mu, _) = model.encode(&gather_bits(data, chunk))?;
        for (row, &i) in chunk.iter().enumerate() {
            store.insert(ids[i], mu.row(row).to_vec())?;
        }
    }
    Ok(store)
}
