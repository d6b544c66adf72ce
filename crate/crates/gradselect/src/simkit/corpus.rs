//! Synthetic mixed-quality corpora.
//!
//! A seeded teacher model defines the target task. Clean samples follow the
//! teacher; noisy samples get uniformly resampled labels; off-distribution
//! samples keep the teacher's labeling of their latent features but expose
//! rotated and shifted features, so their conditional is a different task.
//! Quality tags are ground truth for composition metrics only; nothing in
//! the selection path reads them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::sub_rng;
use crate::simkit::model::{LinearStackModel, LossKind, Nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Clean,
    NoisyLabel,
    OffDistribution,
}

impl Quality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quality::Clean => "clean",
            Quality::NoisyLabel => "noisy_label",
            Quality::OffDistribution => "off_distribution",
        }
    }
}

/// Per-position class labels or dense regression targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Classes(Vec<usize>),
    Values(Mat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    /// d0×T input features.
    pub tokens: Mat,
    pub target: Target,
    pub quality: Quality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMix {
    pub clean: f64,
    pub noisy_label: f64,
    pub off_distribution: f64,
}

impl Default for QualityMix {
    fn default() -> Self {
        QualityMix {
            clean: 0.4,
            noisy_label: 0.3,
            off_distribution: 0.3,
        }
    }
}

impl QualityMix {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.clean, self.noisy_label, self.off_distribution];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config(
                "quality mix entries must be in [0, 1]".into(),
            ));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "quality mix sums to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// What kind of targets the corpus carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    #[default]
    Classes,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Magnitude of the constant feature shift for off-distribution samples.
    pub offdist_shift: f64,
    /// Scale multiplier for the label-irrelevant feature block.
    pub feature_scale_spread: f64,
    /// Fraction of input features that carry no label information but have
    /// `feature_scale_spread` times the variance. These dominate raw
    /// gradient magnitudes the way frequent-token embeddings do, which is
    /// precisely the structure second-moment preconditioning suppresses.
    pub noise_feature_fraction: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            offdist_shift: 1.5,
            feature_scale_spread: 4.0,
            noise_feature_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    /// Training corpus size.
    pub n: usize,
    /// Input feature dimension.
    pub d0: usize,
    /// Token positions per sample.
    pub t: usize,
    /// Class count (regression uses this as the output dimension).
    pub classes: usize,
    pub label: LabelKind,
    pub mix: QualityMix,
    pub noise: NoiseParams,
    /// Held-out clean target set size.
    pub target_size: usize,
    /// Teacher hidden widths; empty means a single linear map.
    pub teacher_hidden: Vec<usize>,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n: 4000,
            d0: 32,
            t: 2,
            classes: 8,
            label: LabelKind::Classes,
            mix: QualityMix::default(),
            noise: NoiseParams::default(),
            target_size: 96,
            teacher_hidden: vec![16],
        }
    }
}

impl CorpusSpec {
    /// The harsher preset used by the ablation comparisons: the same corpus
    /// with a stronger label-irrelevant feature block, which corrupts raw
    /// alignment scores enough that unpreconditioned weighting turns
    /// erratic.
    pub fn adversarial() -> Self {
        CorpusSpec {
            noise: NoiseParams {
                feature_scale_spread: 6.0,
                ..NoiseParams::default()
            },
            ..CorpusSpec::default()
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        self.mix.validate()?;
        if self.n == 0 || self.d0 == 0 || self.t == 0 || self.target_size == 0 {
            return Err(Error::Config("corpus dims must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        Ok(())
    }

    pub fn teacher_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.d0];
        dims.extend(&self.teacher_hidden);
        dims.push(self.classes);
        dims
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub train: Vec<Sample>,
    pub target_set: Vec<Sample>,
    pub teacher: LinearStackModel,
}

impl Corpus {
    pub fn clean_fraction(&self) -> f64 {
        let clean = self
            .train
            .iter()
            .filter(|s| s.quality == Quality::Clean)
            .count();
        clean as f64 / self.train.len() as f64
    }
}

fn gaussian_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random orthogonal matrix via Gram–Schmidt on a Gaussian draw.
fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    let g = gaussian_mat(rng, d, d);
    let mut q = Mat::zeros(d, d);
    for col in 0..d {
        let mut v: Vec<f64> = (0..d).map(|r| g.at(r, col)).collect();
        for prev in 0..col {
            let proj: f64 = (0..d).map(|r| q.at(r, prev) * v[r]).sum();
            for r in 0..d {
                v[r] -= proj * q.at(r, prev);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        for r in 0..d {
            *q.at_mut(r, col) = v[r] / norm;
        }
    }
    q
}

fn teacher_target(teacher: &LinearStackModel, x: &Mat, label: LabelKind) -> Result<Target> {
    let logits = teacher.forward(x)?;
    Ok(match label {
        LabelKind::Classes => {
            let mut labels = Vec::with_capacity(logits.cols());
            for pos in 0..logits.cols() {
                let mut best = 0;
                for i in 1..logits.rows() {
                    if logits.at(i, pos) > logits.at(best, pos) {
                        best = i;
                    }
                }
                labels.push(best);
            }
            Target::Classes(labels)
        }
        LabelKind::Regression => Target::Values(logits),
    })
}

/// Deterministically generate a mixed-quality corpus plus its held-out
/// clean target set.
pub fn gen_corpus(seed: u64, spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let teacher_loss = match spec.label {
        LabelKind::Classes => LossKind::SoftmaxCe,
        LabelKind::Regression => LossKind::SquaredError,
    };
    let mut teacher_rng = sub_rng(seed, 0x10);
    let mut teacher = LinearStackModel::new_random(
        &spec.teacher_dims(),
        teacher_loss,
        Nonlinearity::Tanh,
        &mut teacher_rng,
    )?;

    let mut structure_rng = sub_rng(seed, 0x11);
    let rotation = random_rotation(&mut structure_rng, spec.d0);
    let shift_dir = {
        let v = gaussian_mat(&mut structure_rng, spec.d0, 1);
        let norm = v.frob_norm_sq().sqrt().max(1e-12);
        v.scale(spec.noise.offdist_shift / norm)
    };

    // A fixed subset of features carries no label signal but a larger
    // scale; the teacher's first layer is zeroed on those rows.
    let spread = spec.noise.feature_scale_spread.max(1.0);
    let n_noise = ((spec.noise.noise_feature_fraction.clamp(0.0, 1.0) * spec.d0 as f64).round()
        as usize)
        .min(spec.d0.saturating_sub(1));
    let mut feature_order: Vec<usize> = (0..spec.d0).collect();
    for i in 0..spec.d0 {
        let j = i + structure_rng.random_range(0..spec.d0 - i);
        feature_order.swap(i, j);
    }
    let mut feature_scales = vec![1.0f64; spec.d0];
    for &f in feature_order.iter().take(n_noise) {
        feature_scales[f] = spread;
        for c in 0..teacher.weights[0].cols() {
            *teacher.weights[0].at_mut(f, c) = 0.0;
        }
    }
    let scale_features = |m: &Mat| -> Mat {
        Mat::from_fn(m.rows(), m.cols(), |i, j| m.at(i, j) * feature_scales[i])
    };

    let mut data_rng = sub_rng(seed, 0x12);
    let mut train = Vec::with_capacity(spec.n);
    for id in 0..spec.n {
        let u: f64 = data_rng.random();
        let (quality, tokens, target) = if u < spec.mix.clean {
            let x = scale_features(&gaussian_mat(&mut data_rng, spec.d0, spec.t));
            let target = teacher_target(&teacher, &x, spec.label)?;
            (Quality::Clean, x, target)
        } else if u < spec.mix.clean + spec.mix.noisy_label {
            let x = scale_features(&gaussian_mat(&mut data_rng, spec.d0, spec.t));
            let target = match spec.label {
                LabelKind::Classes => Target::Classes(
                    (0..spec.t)
                        .map(|_| data_rng.random_range(0..spec.classes))
                        .collect(),
                ),
                LabelKind::Regression => {
                    Target::Values(gaussian_mat(&mut data_rng, spec.classes, spec.t))
                }
            };
            (Quality::NoisyLabel, x, target)
        } else {
            // Latent z keeps the teacher's labels; exposed features are the
            // rotated and shifted version of z.
            let z = scale_features(&gaussian_mat(&mut data_rng, spec.d0, spec.t));
            let target = teacher_target(&teacher, &z, spec.label)?;
            let mut x = rotation.matmul(&z);
            for pos in 0..spec.t {
                for r in 0..spec.d0 {
                    *x.at_mut(r, pos) += shift_dir.at(r, 0);
                }
            }
            (Quality::OffDistribution, x, target)
        };
        train.push(Sample {
            id,
            tokens,
            target,
            quality,
        });
    }

    let mut target_rng = sub_rng(seed, 0x13);
    let mut target_set = Vec::with_capacity(spec.target_size);
    for i in 0..spec.target_size {
        let x = scale_features(&gaussian_mat(&mut target_rng, spec.d0, spec.t));
        let target = teacher_target(&teacher, &x, spec.label)?;
        target_set.push(Sample {
            id: spec.n + i,
            tokens: x,
            target,
            quality: Quality::Clean,
        });
    }

    Ok(Corpus {
        train,
        target_set,
        teacher,
    })
}
