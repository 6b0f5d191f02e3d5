//! UNet parameterization of the conditional vector field `v(t, x_t, c)`.
//!
//! Layout, for `depth = D` and widths `C_i = base·2^i`:
//!
//! ```text
//! c ──stem 3×3──► e ─────────────────────────────────────────┐
//! x_t ─┬─ concat(x_t, e) ─ in 3×3 ─► enc_0 ─ ↓ ─ … ─ enc_{D-1} ─ ↓ ─ mid
//!      │                               │ skip            │ skip       │
//!      └──────────────── dec_0 ◄─ ↑ ─ … ◄──────── dec_{D-1} ◄─ ↑ ────┘
//!                          │
//!                 spatial attention (with e) ─ out 3×3 ─► v
//! ```
//!
//! Each block is `[conv → group-norm → SiLU] ×2` plus a residual path, with
//! the time embedding entering as a per-channel affine after the first norm.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::attention::{spatial_attention, ATTENTION_KERNEL};
use crate::model::config::{norm_groups, ModelConfig};
use crate::model::embed::time_embedding;
use crate::model::params::ParamSet;
use crate::numeric::{Graph, Tensor, Var};
use crate::scalar::Scalar;

pub const NORM_EPS: f64 = 1e-5;

/// Output-layer weights start this much smaller than the fan-in bound so the
/// initial field is close to zero.
const OUTPUT_INIT_SCALE: f64 = 1e-2;

#[derive(Clone, Copy, Debug)]
enum Init {
    /// Centered uniform with bound `gain/√fan_in`.
    FanIn { fan_in: usize, gain: f64 },
    Zeros,
    Ones,
}

#[derive(Clone, Debug)]
struct ParamSpec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

#[derive(Clone, Copy, Debug)]
struct Conv {
    weight: usize,
    bias: usize,
}

#[derive(Clone, Copy, Debug)]
struct Linear {
    weight: usize,
    bias: usize,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    gamma: usize,
    beta: usize,
    groups: usize,
}

#[derive(Clone, Copy, Debug)]
struct Block {
    conv1: Conv,
    norm1: Norm,
    film_scale: Linear,
    film_shift: Linear,
    conv2: Conv,
    norm2: Norm,
    skip: Option<Conv>,
}

#[derive(Default)]
struct Builder {
    specs: Vec<ParamSpec>,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.specs.push(ParamSpec { name, shape, init });
        self.specs.len() - 1
    }

    fn conv(&mut self, name: &str, cout: usize, cin: usize, k: usize, gain: f64) -> Conv {
        let fan_in = cin * k * k;
        Conv {
            weight: self.add(format!("{name}.weight"), vec![cout, cin, k, k], Init::FanIn { fan_in, gain }),
            bias: self.add(format!("{name}.bias"), vec![cout], Init::Zeros),
        }
    }

    fn linear(&mut self, name: &str, din: usize, dout: usize) -> Linear {
        Linear {
            weight: self.add(format!("{name}.weight"), vec![din, dout], Init::FanIn { fan_in: din, gain: 1.0 }),
            bias: self.add(format!("{name}.bias"), vec![dout], Init::Zeros),
        }
    }

    fn norm(&mut self, name: &str, c: usize) -> Norm {
        Norm {
            gamma: self.add(format!("{name}.gamma"), vec![c], Init::Ones),
            beta: self.add(format!("{name}.beta"), vec![c], Init::Zeros),
            groups: norm_groups(c),
        }
    }

    fn block(&mut self, name: &str, cin: usize, cout: usize, temb: usize) -> Block {
        Block {
            conv1: self.conv(&format!("{name}.conv1"), cout, cin, 3, 1.0),
            norm1: self.norm(&format!("{name}.norm1"), cout),
            film_scale: self.linear(&format!("{name}.time_scale"), temb, cout),
            film_shift: self.linear(&format!("{name}.time_shift"), temb, cout),
            conv2: self.conv(&format!("{name}.conv2"), cout, cout, 3, 1.0),
            norm2: self.norm(&format!("{name}.norm2"), cout),
            skip: (cin != cout).then(|| self.conv(&format!("{name}.skip"), cout, cin, 1, 1.0)),
        }
    }
}

/// Network structure derived from a [`ModelConfig`]; parameter values live in
/// a [`ParamSet`] ordered to match.
#[derive(Clone, Debug)]
pub struct VelocityNet {
    config: ModelConfig,
    specs: Vec<ParamSpec>,
    stem: Conv,
    input: Conv,
    time_mlp: Linear,
    down: Vec<Block>,
    mid: Block,
    up: Vec<Block>,
    attention: Option<Conv>,
    output: Conv,
}

impl VelocityNet {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let base = config.base_channels;
        let temb = config.time_embed_dim;
        let mut b = Builder::default();
        let stem = b.conv("cond_stem", base, config.cond_channels, 3, 1.0);
        let input = b.conv("input", base, 1 + base, 3, 1.0);
        let time_mlp = b.linear("time_mlp", temb, temb);
        let mut down = Vec::new();
        let mut ch = base;
        for i in 0..config.depth {
            let c = config.channels_at(i);
            down.push(b.block(&format!("down{i}"), ch, c, temb));
            ch = c;
        }
        let mid = b.block("mid", ch, ch, temb);
        let mut up = vec![None; config.depth];
        for i in (0..config.depth).rev() {
            let c = config.channels_at(i);
            up[i] = Some(b.block(&format!("up{i}"), ch + c, c, temb));
            ch = c;
        }
        let attention = config
            .use_spatial_attention
            .then(|| b.conv("attention", 1, 2, ATTENTION_KERNEL, 1.0));
        let output = b.conv("output", 1, base, 3, OUTPUT_INIT_SCALE);
        Ok(Self {
            config: config.clone(),
            specs: b.specs,
            stem,
            input,
            time_mlp,
            down,
            mid,
            up: up.into_iter().map(|b| b.expect("every level has a decoder block")).collect(),
            attention,
            output,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name.as_str())
    }

    /// Fresh parameters: fan-in uniform kernels, zero biases, unit norm gains.
    pub fn init_params<S: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet<S> {
        let mut set = ParamSet::new();
        for spec in &self.specs {
            let t = match spec.init {
                Init::FanIn { fan_in, gain } => Tensor::uniform(spec.shape.clone(), gain / (fan_in as f64).sqrt(), rng),
                Init::Zeros => Tensor::zeros(spec.shape.clone()),
                Init::Ones => Tensor::full(spec.shape.clone(), S::one()),
            };
            set.push(spec.name.clone(), t);
        }
        set
    }

    /// Check that `params` has this network's names and shapes.
    pub fn check_params<S: Scalar>(&self, params: &ParamSet<S>) -> Result<()> {
        if params.len() != self.specs.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                self.specs.len(),
                params.len()
            )));
        }
        for (spec, (name, t)) in self.specs.iter().zip(params.iter()) {
            if spec.name != name || spec.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter '{name}' {:?} does not match expected '{}' {:?}",
                    t.shape(),
                    spec.name,
                    spec.shape
                )));
            }
        }
        Ok(())
    }

    /// Register every parameter tensor as a leaf of `g`.
    pub fn bind<S: Scalar>(&self, g: &mut Graph<S>, params: &ParamSet<S>) -> Vec<Var> {
        params.tensors().iter().map(|t| g.leaf(t.clone())).collect()
    }

    fn conv<S: Scalar>(&self, g: &mut Graph<S>, p: &[Var], c: Conv, x: Var, pad: usize) -> Result<Var> {
        g.conv2d(x, p[c.weight], Some(p[c.bias]), 1, pad)
    }

    fn linear<S: Scalar>(&self, g: &mut Graph<S>, p: &[Var], l: Linear, x: Var) -> Result<Var> {
        let y = g.matmul(x, p[l.weight])?;
        g.add_bias(y, p[l.bias])
    }

    fn norm<S: Scalar>(&self, g: &mut Graph<S>, p: &[Var], n: Norm, x: Var) -> Result<Var> {
        g.group_norm(x, p[n.gamma], p[n.beta], n.groups, S::lit(NORM_EPS))
    }

    fn block<S: Scalar>(&self, g: &mut Graph<S>, p: &[Var], b: &Block, x: Var, temb: Var) -> Result<Var> {
        let h = self.conv(g, p, b.conv1, x, 1)?;
        let h = self.norm(g, p, b.norm1, h)?;
        let scale = self.linear(g, p, b.film_scale, temb)?;
        let shift = self.linear(g, p, b.film_shift, temb)?;
        let h = g.film(h, scale, shift)?;
        let h = g.silu(h);
        let h = self.conv(g, p, b.conv2, h, 1)?;
        let h = self.norm(g, p, b.norm2, h)?;
        let h = g.silu(h);
        let residual = match b.skip {
            Some(c) => self.conv(g, p, c, x, 0)?,
            None => x,
        };
        g.add(h, residual)
    }

    /// Condition stem: `[B, cond_channels, H, W] → [B, base, H, W]`.
    pub fn condition_embed<S: Scalar>(&self, g: &mut Graph<S>, p: &[Var], cond: Var) -> Result<Var> {
        let (_, c, _, _) = g.value(cond).dims4()?;
        if c != self.config.cond_channels {
            return Err(Error::Config(format!(
                "model expects {} condition channels, got {c}",
                self.config.cond_channels
            )));
        }
        self.conv(g, p, self.stem, cond, 1)
    }

    /// Predicted field for a batch. `t` holds one time per batch element.
    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &[Var], x_t: Var, t: &[S], cond: Var) -> Result<Var> {
        let (b, xc, h, w) = g.value(x_t).dims4()?;
        let (cb, _, ch, cw) = g.value(cond).dims4()?;
        if xc != 1 || (cb, ch, cw) != (b, h, w) {
            return Err(Error::Config(format!(
                "x_t {:?} and condition {:?} are incompatible",
                g.shape(x_t),
                g.shape(cond)
            )));
        }
        if t.len() != b {
            return Err(Error::Config(format!("{} time values for batch of {b}", t.len())));
        }
        self.config.check_spatial(h, w)?;

        let dim = self.config.time_embed_dim;
        let mut feats = Vec::with_capacity(b * dim);
        for &ti in t {
            feats.extend(time_embedding(ti, dim)?);
        }
        let temb = g.leaf(Tensor::new(vec![b, dim], feats)?);
        let temb = self.linear(g, p, self.time_mlp, temb)?;
        let temb = g.silu(temb);

        let e = self.condition_embed(g, p, cond)?;
        let joined = g.concat_channels(x_t, e)?;
        let mut hcur = self.conv(g, p, self.input, joined, 1)?;
        let mut skips = Vec::with_capacity(self.down.len());
        for blk in &self.down {
            hcur = self.block(g, p, blk, hcur, temb)?;
            skips.push(hcur);
            hcur = g.downsample_avg_2x(hcur)?;
        }
        hcur = self.block(g, p, &self.mid, hcur, temb)?;
        for (blk, skip) in self.up.iter().zip(skips).rev() {
            hcur = g.upsample_nearest_2x(hcur)?;
            hcur = g.concat_channels(hcur, skip)?;
            hcur = self.block(g, p, blk, hcur, temb)?;
        }
        if let Some(att) = self.attention {
            hcur = spatial_attention(g, hcur, e, p[att.weight], p[att.bias])?;
        }
        self.conv(g, p, self.output, hcur, 1)
    }
}
