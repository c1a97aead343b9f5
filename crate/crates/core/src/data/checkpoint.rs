//! Model checkpoints (`ZSCK`).
//!
//! Layout, all little-endian: magic `ZSCK`, `u32` version, `u32` kind tag,
//! `u64` header word count, header words (`u64`), `u64` payload length,
//! payload (`f64`), and a trailing `u64` FNV-1a hash of the payload bytes.
//!
//! A network is described in the header as
//! `[layer count + 1, dims…, hidden activation, output activation]` and
//! stored in the payload as `W0, b0, W1, b1, …` with row-major weights.

use std::fs;
use std::path::Path;

use crate::baselines::{EmbeddingLoss, EmbeddingPair, FitMeta, LinearMap, LinearMethod};
use crate::error::{Error, Result};
use crate::generative::{CaaeModel, CvaeModel};
use crate::linalg::Matrix;
use crate::nn::{Activation, Mlp, OutputActivation};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ZSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Cvae = 1,
    Caae = 2,
    Linear = 3,
    Embedding = 4,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cvae => "cvae",
            ModelKind::Caae => "caae",
            ModelKind::Linear => "linear",
            ModelKind::Embedding => "embedding",
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            1 => ModelKind::Cvae,
            2 => ModelKind::Caae,
            3 => ModelKind::Linear,
            4 => ModelKind::Embedding,
            other => return Err(Error::Format(format!("unknown checkpoint kind tag {other}"))),
        })
    }
}

/// Any model that can be checkpointed.
#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Cvae(CvaeModel<f64>),
    Caae(CaaeModel<f64>),
    Linear(LinearMap<f64>),
    Embedding(EmbeddingPair<f64>),
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

#[derive(Default)]
struct Writer {
    header: Vec<u64>,
    payload: Vec<f64>,
}

impl Writer {
    fn mlp(&mut self, net: &Mlp<f64>) {
        self.header.push(net.dims().len() as u64);
        self.header.extend(net.dims().iter().map(|&d| d as u64));
        self.header.push(match net.hidden_activation() {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        });
        self.header.push(match net.output_activation() {
            OutputActivation::Linear => 0,
            OutputActivation::Sigmoid => 1,
        });
        for p in net.params() {
            self.payload.extend_from_slice(p);
        }
    }
}

struct Reader<'a> {
    header: &'a [u64],
    payload: &'a [f64],
}

impl Reader<'_> {
    fn word(&mut self) -> Result<u64> {
        let (&w, rest) = self
            .header
            .split_first()
            .ok_or_else(|| Error::Format("checkpoint header ended early".into()))?;
        self.header = rest;
        Ok(w)
    }

    fn count(&mut self) -> Result<usize> {
        usize::try_from(self.word()?).map_err(|_| Error::Format("header count overflows usize".into()))
    }

    fn reals(&mut self, n: usize) -> Result<&[f64]> {
        if self.payload.len() < n {
            return Err(Error::Format(format!(
                "checkpoint payload ended early: need {n} more values, have {}",
                self.payload.len()
            )));
        }
        let (head, rest) = self.payload.split_at(n);
        self.payload = rest;
        Ok(head)
    }

    fn real(&mut self) -> Result<f64> {
        Ok(self.reals(1)?[0])
    }

    fn mlp(&mut self) -> Result<Mlp<f64>> {
        let n = self.count()?;
        if !(2..=64).contains(&n) {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let dims = (0..n).map(|_| self.count()).collect::<Result<Vec<_>>>()?;
        let hidden = match self.word()? {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            t => return Err(Error::Format(format!("unknown activation tag {t}"))),
        };
        let output = match self.word()? {
            0 => OutputActivation::Linear,
            1 => OutputActivation::Sigmoid,
            t => return Err(Error::Format(format!("unknown output activation tag {t}"))),
        };
        let mut weights = Vec::with_capacity(n - 1);
        let mut biases = Vec::with_capacity(n - 1);
        for pair in dims.windows(2) {
            let len = pair[0]
                .checked_mul(pair[1])
                .ok_or_else(|| Error::Format("layer size overflows".into()))?;
            weights.push(Matrix::from_vec(pair[0], pair[1], self.reals(len)?.to_vec())?);
            biases.push(self.reals(pair[1])?.to_vec());
        }
        Mlp::from_parts(weights, biases, hidden, output).map_err(|e| Error::Format(format!("bad network: {e}")))
    }

    fn finish(&self) -> Result<()> {
        if !self.header.is_empty() || !self.payload.is_empty() {
            return Err(Error::Format(format!(
                "checkpoint has {} unread header words and {} unread values",
                self.header.len(),
                self.payload.len()
            )));
        }
        Ok(())
    }
}

fn method_tag(m: LinearMethod) -> u64 {
    match m {
        LinearMethod::Regression => 0,
        LinearMethod::Eszsl => 1,
        LinearMethod::Sae => 2,
    }
}

fn loss_tag(l: EmbeddingLoss) -> u64 {
    match l {
        EmbeddingLoss::Siamese1 => 0,
        EmbeddingLoss::Siamese2 => 1,
        EmbeddingLoss::TripletCoarse => 2,
        EmbeddingLoss::TripletFine => 3,
    }
}

impl Checkpoint {
    pub fn kind(&self) -> ModelKind {
        match self {
            Checkpoint::Cvae(_) => ModelKind::Cvae,
            Checkpoint::Caae(_) => ModelKind::Caae,
            Checkpoint::Linear(_) => ModelKind::Linear,
            Checkpoint::Embedding(_) => ModelKind::Embedding,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        match self {
            Checkpoint::Cvae(m) => {
                w.header.push(m.d_latent as u64);
                w.payload.push(m.lambda_recons);
                w.mlp(&m.encoder);
                w.mlp(&m.decoder);
                w.mlp(&m.regressor);
            }
            Checkpoint::Caae(m) => {
                w.header.push(m.d_latent as u64);
                w.header.push(u64::from(m.nonsaturating));
                w.payload.push(m.lambda_recons);
                w.mlp(&m.encoder);
                w.mlp(&m.decoder);
                w.mlp(&m.discriminator);
                w.mlp(&m.regressor);
            }
            Checkpoint::Linear(m) => {
                w.header.extend([method_tag(m.meta.method), m.w.rows() as u64, m.w.cols() as u64]);
                w.payload.extend([m.meta.ridge, m.meta.gamma, m.meta.lambda, m.meta.objective]);
                w.payload.extend_from_slice(m.w.as_slice());
            }
            Checkpoint::Embedding(m) => {
                w.header.push(loss_tag(m.loss));
                w.payload.push(m.margin_or_q);
                w.mlp(&m.sketch_net);
                w.mlp(&m.image_net);
            }
        }
        let payload: Vec<u8> = w.payload.iter().flat_map(|v| v.to_le_bytes()).collect();
        let mut out = Vec::with_capacity(32 + 8 * w.header.len() + payload.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind() as u32).to_le_bytes());
        out.extend_from_slice(&(w.header.len() as u64).to_le_bytes());
        for h in &w.header {
            out.extend_from_slice(&h.to_le_bytes());
        }
        out.extend_from_slice(&(w.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {pos}")))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic, expected ZSCK".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let kind = ModelKind::from_tag(u32::from_le_bytes(take(4)?.try_into().unwrap()))?;
        let n_header = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let n_header = usize::try_from(n_header)
            .ok()
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("header length overflows".into()))?;
        let header: Vec<u64> = take(n_header)?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let n_payload = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let n_payload = usize::try_from(n_payload)
            .ok()
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("payload length overflows".into()))?;
        let payload_bytes = take(n_payload)?;
        let stored = u64::from_le_bytes(take(8)?.try_into().unwrap());
        if pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after checksum", bytes.len() - pos)));
        }
        let computed = fnv1a64(payload_bytes);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let payload: Vec<f64> = payload_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();

        let mut r = Reader {
            header: &header,
            payload: &payload,
        };
        let model = match kind {
            ModelKind::Cvae => {
                let d_latent = r.count()?;
                let lambda = r.real()?;
                let (enc, dec, reg) = (r.mlp()?, r.mlp()?, r.mlp()?);
                Checkpoint::Cvae(CvaeModel::from_parts(enc, dec, reg, lambda, d_latent)?)
            }
            ModelKind::Caae => {
                let d_latent = r.count()?;
                let nonsaturating = r.word()? != 0;
                let lambda = r.real()?;
                let (enc, dec, disc, reg) = (r.mlp()?, r.mlp()?, r.mlp()?, r.mlp()?);
                Checkpoint::Caae(CaaeModel::from_parts(enc, dec, disc, reg, lambda, d_latent, nonsaturating)?)
            }
            ModelKind::Linear => {
                let method = match r.word()? {
                    0 => LinearMethod::Regression,
                    1 => LinearMethod::Eszsl,
                    2 => LinearMethod::Sae,
                    t => return Err(Error::Format(format!("unknown linear method tag {t}"))),
                };
                let (rows, cols) = (r.count()?, r.count()?);
                let meta = FitMeta {
                    method,
                    ridge: r.real()?,
                    gamma: r.real()?,
                    lambda: r.real()?,
                    objective: r.real()?,
                };
                let len = rows
                    .checked_mul(cols)
                    .ok_or_else(|| Error::Format("map size overflows".into()))?;
                let w = Matrix::from_vec(rows, cols, r.reals(len)?.to_vec())?;
                Checkpoint::Linear(LinearMap { w, meta })
            }
            ModelKind::Embedding => {
                let loss = match r.word()? {
                    0 => EmbeddingLoss::Siamese1,
                    1 => EmbeddingLoss::Siamese2,
                    2 => EmbeddingLoss::TripletCoarse,
                    3 => EmbeddingLoss::TripletFine,
                    t => return Err(Error::Format(format!("unknown embedding loss tag {t}"))),
                };
                let margin = r.real()?;
                let (s, i) = (r.mlp()?, r.mlp()?);
                Checkpoint::Embedding(EmbeddingPair::from_parts(s, i, margin, loss)?)
            }
        };
        r.finish()?;
        Ok(model)
    }

    fn mismatch(&self, expected: ModelKind) -> Error {
        Error::KindMismatch {
            expected: expected.name(),
            found: self.kind().name(),
        }
    }

    pub fn into_cvae(self) -> Result<CvaeModel<f64>> {
        match self {
            Checkpoint::Cvae(m) => Ok(m),
            other => Err(other.mismatch(ModelKind::Cvae)),
        }
    }

    pub fn into_caae(self) -> Result<CaaeModel<f64>> {
        match self {
            Checkpoint::Caae(m) => Ok(m),
            other => Err(other.mismatch(ModelKind::Caae)),
        }
    }

    pub fn into_linear(self) -> Result<LinearMap<f64>> {
        match self {
            Checkpoint::Linear(m) => Ok(m),
            other => Err(other.mismatch(ModelKind::Linear)),
        }
    }

    pub fn into_embedding(self) -> Result<EmbeddingPair<f64>> {
        match self {
            Checkpoint::Embedding(m) => Ok(m),
            other => Err(other.mismatch(ModelKind::Embedding)),
        }
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Checkpoint) -> Result<()> {
    fs::write(path, model.encode())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generative::ModelConfig;
    use crate::linalg::Rng;

    fn cvae() -> CvaeModel<f64> {
        let mut cfg = ModelConfig::new(5, 3, 2);
        cfg.hidden = vec![4];
        CvaeModel::new(&cfg, &mut Rng::new(1)).unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn cvae_round_trip() {
        let ck = Checkpoint::Cvae(cvae());
        let bytes = ck.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.encode(), bytes);
    }

    #[test]
    fn corruption_detected() {
        let bytes = Checkpoint::Cvae(cvae()).encode();
        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 20] ^= 1;
        assert!(matches!(Checkpoint::decode(&bad), Err(Error::Checksum { .. })));
        assert!(matches!(Checkpoint::decode(&bytes[..n - 3]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Checkpoint::decode(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_kind_is_typed() {
        let ck = Checkpoint::decode(&Checkpoint::Cvae(cvae()).encode()).unwrap();
        match ck.into_caae() {
            Err(Error::KindMismatch { expected: "caae", found: "cvae" }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
