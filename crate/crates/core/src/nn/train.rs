use super::network::{argmax, softmax_cross_entropy, Network, Pass};
use super::optim::SgdMomentum;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Normalised inputs `[N, ...]` with one class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::Size(format!(
                "{} inputs but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn sample_len(&self) -> usize {
        self.inputs.len() / self.inputs.rows()
    }

    /// Gather the given rows into a batch.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let stride = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * stride);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.inputs.data()[i * stride..(i + 1) * stride]);
            labels.push(self.labels[i]);
        }
        let mut shape = self.inputs.shape().to_vec();
        shape[0] = indices.len();
        Ok((Tensor::new(shape, data)?, labels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean cross-entropy in nats.
    pub loss: f64,
    /// `correct / total`.
    pub accuracy: f64,
}

/// One pass over `data` in seeded shuffled order. The final short batch is
/// included. Loss and accuracy are taken from the training-mode logits
/// seen during the epoch.
pub fn train_epoch(
    net: &mut Network,
    opt: &mut SgdMomentum,
    data: &Dataset,
    batch_size: usize,
    rng: &mut SplitMix64,
) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if batch_size == 0 {
        return Err(Error::domain("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);

    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in order.chunks(batch_size) {
        let (x, y) = data.batch(chunk)?;
        let (logits, cache) = net.forward(&x, Pass::Train(rng))?;
        let (loss, grad) = softmax_cross_entropy(&logits, &y)?;
        loss_sum += loss * chunk.len() as f64;
        correct += count_correct(&logits, &y);
        let grads = net.backward(&cache, &grad)?;
        opt.step_network(net, &grads)?;
    }
    Ok(Metrics {
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

fn count_correct(logits: &Tensor, labels: &[usize]) -> usize {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks_exact(k)
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count()
}

const EVAL_CHUNK: usize = 256;

/// Loss and accuracy with dropout disabled; predictions are the argmax of
/// the logits, ties to the lowest class.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::domain("cannot evaluate on an empty dataset"));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (x, y) = data.batch(chunk)?;
        let logits = net.predict(&x)?;
        let (loss, _) = softmax_cross_entropy(&logits, &y)?;
        loss_sum += loss * chunk.len() as f64;
        correct += count_correct(&logits, &y);
    }
    Ok(Metrics {
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Predicted class per row of `logits`.
pub fn predictions(logits: &Tensor) -> Vec<usize> {
    let k = logits.shape()[1];
    logits.data().chunks_exact(k).map(argmax).collect()
}
