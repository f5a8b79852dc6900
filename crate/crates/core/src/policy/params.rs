use std::ops::Range;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{Error, Result};
use crate::seed;

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Job feature width, `2W + 2`.
    pub d_in: usize,
    pub d_h: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub d_gen: usize,
}

impl NetConfig {
    /// Full-size network for `stations` workstations.
    pub fn for_stations(stations: usize) -> Self {
        Self {
            d_in: crate::sched::feature_width(stations),
            d_h: 128,
            n_heads: 2,
            n_layers: 2,
            d_ff: 512,
            d_gen: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.d_in,
            self.d_h,
            self.n_heads,
            self.n_layers,
            self.d_ff,
            self.d_gen,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(format!(
                "all network dimensions must be >= 1: {self:?}"
            )));
        }
        if !self.d_h.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "embedding width {} not divisible by {} heads",
                self.d_h, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_h / self.n_heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    Zeros,
    Ones,
}

/// One named parameter tensor inside the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub range: Range<usize>,
    pub(crate) init: Init,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LayerSlots {
    pub wq: Range<usize>,
    pub bq: Range<usize>,
    pub wk: Range<usize>,
    pub bk: Range<usize>,
    pub wv: Range<usize>,
    pub bv: Range<usize>,
    pub wo: Range<usize>,
    pub bo: Range<usize>,
    pub ln1_g: Range<usize>,
    pub ln1_b: Range<usize>,
    pub ff1_w: Range<usize>,
    pub ff1_b: Range<usize>,
    pub ff2_w: Range<usize>,
    pub ff2_b: Range<usize>,
    pub ln2_g: Range<usize>,
    pub ln2_b: Range<usize>,
}

/// Fixed order and placement of every parameter block.
///
/// Matrices are stored row-major as `[fan_in, fan_out]`, so a linear map is
/// `y = x W + b`. The order below is also the checkpoint block order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub total: usize,
    pub(crate) embed_w: Range<usize>,
    pub(crate) embed_b: Range<usize>,
    pub(crate) layers: Vec<LayerSlots>,
    pub(crate) pool_self_w: Range<usize>,
    pub(crate) pool_self_b: Range<usize>,
    pub(crate) pool_max_w: Range<usize>,
    pub(crate) pool_max_b: Range<usize>,
    pub(crate) compat_q: Range<usize>,
    pub(crate) compat_k: Range<usize>,
    pub(crate) critic_w1: Range<usize>,
    pub(crate) critic_b1: Range<usize>,
    pub(crate) critic_w2: Range<usize>,
    pub(crate) critic_b2: Range<usize>,
    pub(crate) critic_w3: Range<usize>,
    pub(crate) critic_b3: Range<usize>,
}

struct Builder {
    blocks: Vec<Block>,
    next: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> Range<usize> {
        let len: usize = shape.iter().product();
        let range = self.next..self.next + len;
        self.next += len;
        self.blocks.push(Block {
            name,
            shape: shape.to_vec(),
            range: range.clone(),
            init,
        });
        range
    }
}

impl Layout {
    pub fn new(cfg: &NetConfig) -> Self {
        let (d_in, d, ff) = (cfg.d_in, cfg.d_h, cfg.d_ff);
        let mut b = Builder {
            blocks: Vec::new(),
            next: 0,
        };
        let embed_w = b.add("embed.w".into(), &[d_in, d], Init::Xavier);
        let embed_b = b.add("embed.b".into(), &[d], Init::Zeros);
        let layers = (0..cfg.n_layers)
            .map(|l| {
                let mut m =
                    |s: &str, shape: &[usize], init| b.add(format!("enc{l}.{s}"), shape, init);
                LayerSlots {
                    wq: m("attn.wq", &[d, d], Init::Xavier),
                    bq: m("attn.bq", &[d], Init::Zeros),
                    wk: m("attn.wk", &[d, d], Init::Xavier),
                    bk: m("attn.bk", &[d], Init::Zeros),
                    wv: m("attn.wv", &[d, d], Init::Xavier),
                    bv: m("attn.bv", &[d], Init::Zeros),
                    wo: m("attn.wo", &[d, d], Init::Xavier),
                    bo: m("attn.bo", &[d], Init::Zeros),
                    ln1_g: m("ln1.g", &[d], Init::Ones),
                    ln1_b: m("ln1.b", &[d], Init::Zeros),
                    ff1_w: m("ff1.w", &[d, ff], Init::Xavier),
                    ff1_b: m("ff1.b", &[ff], Init::Zeros),
                    ff2_w: m("ff2.w", &[ff, d], Init::Xavier),
                    ff2_b: m("ff2.b", &[d], Init::Zeros),
                    ln2_g: m("ln2.g", &[d], Init::Ones),
                    ln2_b: m("ln2.b", &[d], Init::Zeros),
                }
            })
            .collect();
        let pool_self_w = b.add("pool.self.w".into(), &[d, d], Init::Xavier);
        let pool_self_b = b.add("pool.self.b".into(), &[d], Init::Zeros);
        let pool_max_w = b.add("pool.max.w".into(), &[d, d], Init::Xavier);
        let pool_max_b = b.add("pool.max.b".into(), &[d], Init::Zeros);
        let compat_q = b.add("compat.q".into(), &[d, d], Init::Xavier);
        let compat_k = b.add("compat.k".into(), &[d, d], Init::Xavier);
        let critic_w1 = b.add("critic.l1.w".into(), &[d + cfg.d_gen, d], Init::Xavier);
        let critic_b1 = b.add("critic.l1.b".into(), &[d], Init::Zeros);
        let critic_w2 = b.add("critic.l2.w".into(), &[d, d], Init::Xavier);
        let critic_b2 = b.add("critic.l2.b".into(), &[d], Init::Zeros);
        let critic_w3 = b.add("critic.l3.w".into(), &[d, 1], Init::Xavier);
        let critic_b3 = b.add("critic.l3.b".into(), &[1], Init::Zeros);
        Self {
            total: b.next,
            blocks: b.blocks,
            embed_w,
            embed_b,
            layers,
            pool_self_w,
            pool_self_b,
            pool_max_w,
            pool_max_b,
            compat_q,
            compat_k,
            critic_w1,
            critic_b1,
            critic_w2,
            critic_b2,
            critic_w3,
            critic_b3,
        }
    }

    /// Block containing flat index `idx`.
    pub fn block_of(&self, idx: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.range.contains(&idx))
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// All trainable tensors of the actor-critic network in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<F> {
    pub cfg: NetConfig,
    pub layout: Layout,
    pub data: Vec<F>,
}

impl<F: Scalar> PolicyParams<F> {
    pub fn zeros(cfg: NetConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        Ok(Self {
            data: vec![F::zero(); layout.total],
            cfg,
            layout,
        })
    }

    /// Fan-based uniform init for matrices, zeros for biases, ones for norm gains.
    pub fn init(cfg: NetConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(cfg)?;
        let mut rng = seed::stream(seed, 0x5eed);
        for b in &p.layout.blocks {
            match b.init {
                Init::Zeros => {}
                Init::Ones => p.data[b.range.clone()].fill(F::one()),
                Init::Xavier => {
                    let fan = (b.shape[0] + b.shape[1]) as f64;
                    let limit = (6.0 / fan).sqrt();
                    for x in &mut p.data[b.range.clone()] {
                        *x = F::from_f64(rng.random_range(-limit..limit)).unwrap();
                    }
                }
            }
        }
        Ok(p)
    }

    /// Total number of trainable scalars.
    pub fn count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub(crate) fn slice(&self, r: &Range<usize>) -> &[F] {
        &self.data[r.clone()]
    }

    pub fn block(&self, name: &str) -> Option<&[F]> {
        self.layout.block(name).map(|b| &self.data[b.range.clone()])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [F]> {
        let r = self.layout.block(name)?.range.clone();
        Some(&mut self.data[r])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Converts every value to another precision.
    pub fn cast<G: Scalar>(&self) -> PolicyParams<G> {
        PolicyParams {
            cfg: self.cfg,
            layout: self.layout.clone(),
            data: self
                .data
                .iter()
                .map(|x| G::from_f64(x.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }
}
