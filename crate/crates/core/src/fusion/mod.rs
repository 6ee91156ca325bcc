//! Deep canonical correlation analysis (two branch networks trained to
//! maximize the trace norm of their whitened cross-covariance) and the
//! weighted-average fusion of the two projected views.

mod cca;
mod network;

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cca::{cca_corr, CcaProjection, CorrOutput, CorrState};
pub use network::{Activation, Branch, BranchGrad, Layer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccaConfig {
    /// Layer sizes of the first branch, e.g. `[n1, n2, n3]`; must be non-increasing.
    pub layers1: Vec<usize>,
    pub layers2: Vec<usize>,
    pub hidden_activation: Activation,
    pub r1: f64,
    pub r2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the first view in the fused output.
    pub alpha: f64,
}

impl Default for DccaConfig {
    fn default() -> Self {
        Self {
            layers1: vec![128, 64, 32],
            layers2: vec![128, 64, 32],
            hidden_activation: Activation::Sigmoid,
            r1: 1e-4,
            r2: 1e-4,
            learning_rate: 1e-4,
            epochs: 500,
            seed: 0,
            alpha: 0.5,
        }
    }
}

/// Trained two-branch model plus the linear CCA fitted on its training outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DccaParams {
    pub branch1: Branch,
    pub branch2: Branch,
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub projection: CcaProjection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub corr: f64,
    pub learning_rate: f64,
}

/// Training log, one entry per epoch plus the final evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub entries: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn final_corr(&self) -> Option<f64> {
        self.entries.last().map(|e| e.corr)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("epoch\tcorr\tlearning_rate\n");
        for e in &self.entries {
            s.push_str(&format!("{}\t{:.10}\t{:e}\n", e.epoch, e.corr, e.learning_rate));
        }
        s
    }
}

fn validate(cfg: &DccaConfig) -> Result<()> {
    if !(cfg.r1 > 0.0 && cfg.r2 > 0.0) {
        return Err(Error::param("DCCA regularizers must be positive"));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::param(format!("invalid learning rate {}", cfg.learning_rate)));
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(Error::param(format!("fusion weight must lie in [0, 1], got {}", cfg.alpha)));
    }
    Ok(())
}

/// Full-batch gradient ascent on `corr(f1(X1), f2(X2))`.
pub fn train_dcca(x1: &DMatrix<f64>, x2: &DMatrix<f64>, cfg: &DccaConfig) -> Result<(DccaParams, TrainingLog)> {
    validate(cfg)?;
    if x1.nrows() != x2.nrows() {
        return Err(Error::param(format!("views have {} and {} samples", x1.nrows(), x2.nrows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut b1 = Branch::init(x1.ncols(), &cfg.layers1, cfg.hidden_activation, &mut rng)?;
    let mut b2 = Branch::init(x2.ncols(), &cfg.layers2, cfg.hidden_activation, &mut rng)?;
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.epochs {
        let h2 = b2.forward(x2)?;
        let mut corr_out: Option<CorrOutput> = None;
        let (_, g1) = b1.backward(x1, |h1| {
            let out = cca_corr(h1, &h2, cfg.r1, cfg.r2)?;
            let g = out.grad1.clone();
            corr_out = Some(out);
            Ok(g)
        })?;
        let out = corr_out.expect("set by backward");
        if !out.corr.is_finite() {
            return Err(Error::numerical(format!("correlation diverged (NaN) at epoch {epoch}")));
        }
        let grad2 = out.grad2.clone();
        let (_, g2) = b2.backward(x2, |_| Ok(grad2))?;
        log.entries.push(EpochLog { epoch, corr: out.corr, learning_rate: cfg.learning_rate });
        b1.ascend(&g1, cfg.learning_rate);
        b2.ascend(&g2, cfg.learning_rate);
    }

    let h1 = b1.forward(x1)?;
    let h2 = b2.forward(x2)?;
    let final_corr = cca_corr(&h1, &h2, cfg.r1, cfg.r2)?.corr;
    if !final_corr.is_finite() {
        return Err(Error::numerical(format!("correlation diverged (NaN) at epoch {}", cfg.epochs)));
    }
    log.entries.push(EpochLog { epoch: cfg.epochs, corr: final_corr, learning_rate: cfg.learning_rate });
    let projection = CcaProjection::fit(&h1, &h2, cfg.r1, cfg.r2)?;
    Ok((
        DccaParams {
            branch1: b1,
            branch2: b2,
            r1: cfg.r1,
            r2: cfg.r2,
            alpha: cfg.alpha,
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            seed: cfg.seed,
            projection,
        },
        log,
    ))
}

impl DccaParams {
    /// Canonical variates of both views.
    pub fn transform(&self, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let p1 = self.projection.project1(&self.branch1.forward(x1)?)?;
        let p2 = self.projection.project2(&self.branch2.forward(x2)?)?;
        Ok((p1, p2))
    }

    /// Fused representation `α·P1 + (1−α)·P2`.
    pub fn fused(&self, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (p1, p2) = self.transform(x1, x2)?;
        fuse(&p1, &p2, self.alpha)
    }

    /// Little-endian checkpoint bytes (`NDC1`).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_checkpoint(self, &mut out).expect("writing to a Vec cannot fail");
        out
    }
}

/// `α·H1 + (1−α)·H2`.
pub fn fuse(h1: &DMatrix<f64>, h2: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    if h1.shape() != h2.shape() {
        return Err(Error::param(format!("cannot fuse shapes {:?} and {:?}", h1.shape(), h2.shape())));
    }
    Ok(h1 * alpha + h2 * (1.0 - alpha))
}

pub const NDC1_MAGIC: &[u8; 4] = b"NDC1";
const NDC1_VERSION: u32 = 1;

fn put_f32s<W: Write>(w: &mut W, it: impl Iterator<Item = f64>) -> Result<()> {
    for v in it {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn write_branch<W: Write>(b: &Branch, w: &mut W) -> Result<()> {
    w.write_all(&(b.layers.len() as u32).to_le_bytes())?;
    for l in &b.layers {
        w.write_all(&(l.weights.nrows() as u32).to_le_bytes())?;
        w.write_all(&(l.weights.ncols() as u32).to_le_bytes())?;
        w.write_all(&[l.activation.code()])?;
    }
    for l in &b.layers {
        put_f32s(w, l.weights.transpose().iter().copied())?;
        put_f32s(w, l.bias.iter().copied())?;
    }
    Ok(())
}

/// `NDC1`: magic, u32 version, f64 r1, r2, alpha, learning rate, u64 epochs, u64 seed,
/// each branch as (u32 layer count, per-layer u32 in, u32 out, u8 activation, then
/// f32 row-major weights and biases), then the CCA projection
/// (u32 k1, k2, rank, f32 means, f32 row-major A and B, f32 correlations).
pub fn write_checkpoint<W: Write>(p: &DccaParams, mut w: W) -> Result<()> {
    w.write_all(NDC1_MAGIC)?;
    w.write_all(&NDC1_VERSION.to_le_bytes())?;
    for v in [p.r1, p.r2, p.alpha, p.learning_rate] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(p.epochs as u64).to_le_bytes())?;
    w.write_all(&p.seed.to_le_bytes())?;
    write_branch(&p.branch1, &mut w)?;
    write_branch(&p.branch2, &mut w)?;
    let pr = &p.projection;
    for v in [pr.k1, pr.k2, pr.rank] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    put_f32s(&mut w, pr.mean1.iter().copied())?;
    put_f32s(&mut w, pr.mean2.iter().copied())?;
    put_f32s(&mut w, pr.a.iter().copied())?;
    put_f32s(&mut w, pr.b.iter().copied())?;
    put_f32s(&mut w, pr.correlations.iter().copied())?;
    Ok(())
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f32::from_le_bytes(self.bytes()?) as f64)).collect()
    }
    fn branch(&mut self) -> Result<Branch> {
        let n = self.u32()?;
        let mut shapes = Vec::with_capacity(n);
        for _ in 0..n {
            let (i, o) = (self.u32()?, self.u32()?);
            let [a] = self.bytes::<1>()?;
            shapes.push((i, o, Activation::from_code(a)?));
        }
        let mut layers = Vec::with_capacity(n);
        for (i, o, activation) in shapes {
            let weights = DMatrix::from_row_slice(i, o, &self.f32s(i * o)?);
            let bias = DVector::from_vec(self.f32s(o)?);
            layers.push(Layer { weights, bias, activation });
        }
        Ok(Branch { layers })
    }
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<DccaParams> {
    let mut r = Reader(r);
    if &r.bytes::<4>()? != NDC1_MAGIC {
        return Err(Error::format("bad magic, expected NDC1"));
    }
    let version = r.u32()?;
    if version != NDC1_VERSION as usize {
        return Err(Error::format(format!("unsupported NDC1 version {version}")));
    }
    let (r1, r2, alpha, learning_rate) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let epochs = r.u64()? as usize;
    let seed = r.u64()?;
    let branch1 = r.branch()?;
    let branch2 = r.branch()?;
    let (k1, k2, rank) = (r.u32()?, r.u32()?, r.u32()?);
    let projection = CcaProjection {
        mean1: r.f32s(k1)?,
        mean2: r.f32s(k2)?,
        a: r.f32s(k1 * rank)?,
        b: r.f32s(k2 * rank)?,
        k1,
        k2,
        rank,
        correlations: r.f32s(rank)?,
    };
    Ok(DccaParams { branch1, branch2, r1, r2, alpha, learning_rate, epochs, seed, projection })
}
