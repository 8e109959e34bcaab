use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::{pair_count, Activation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Lr,
    Fm,
    Fnn,
    Pnn,
    WideDeep,
    DeepFm,
    Finn,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Lr,
        Variant::Fm,
        Variant::Fnn,
        Variant::Pnn,
        Variant::WideDeep,
        Variant::DeepFm,
        Variant::Finn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lr => "lr",
            Variant::Fm => "fm",
            Variant::Fnn => "fnn",
            Variant::Pnn => "pnn",
            Variant::WideDeep => "widedeep",
            Variant::DeepFm => "deepfm",
            Variant::Finn => "finn",
        }
    }

    /// Has a `w0 + Σ w_i` term.
    pub fn has_linear(self) -> bool {
        matches!(
            self,
            Variant::Lr | Variant::Fm | Variant::WideDeep | Variant::DeepFm | Variant::Finn
        )
    }

    pub fn has_embeddings(self) -> bool {
        self != Variant::Lr
    }

    /// Adds the FM second-order term directly to the logit.
    pub fn has_fm_term(self) -> bool {
        matches!(self, Variant::Fm | Variant::DeepFm)
    }

    pub fn is_deep(self) -> bool {
        matches!(
            self,
            Variant::Fnn | Variant::Pnn | Variant::WideDeep | Variant::DeepFm | Variant::Finn
        )
    }

    /// Width of the combination layer feeding the MLP.
    pub fn combination_dim(self, m: usize, k: usize, l: usize) -> usize {
        match self {
            Variant::Lr | Variant::Fm => 0,
            Variant::Fnn | Variant::WideDeep | Variant::DeepFm => m * k,
            Variant::Pnn => m * k + pair_count(m),
            Variant::Finn => pair_count(m) * l,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '&'], "").as_str() {
            "lr" => Ok(Variant::Lr),
            "fm" => Ok(Variant::Fm),
            "fnn" => Ok(Variant::Fnn),
            "pnn" => Ok(Variant::Pnn),
            "widedeep" | "wd" => Ok(Variant::WideDeep),
            "deepfm" => Ok(Variant::DeepFm),
            "finn" | "inn" => Ok(Variant::Finn),
            _ => Err(Error::invalid(format!("unknown model variant `{s}`"))),
        }
    }
}

pub const DEFAULT_EMBED_INIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Feature count `n`.
    pub n_features: usize,
    /// Field count `m`.
    pub n_fields: usize,
    /// Embedding dimension `k`.
    pub embed_dim: usize,
    /// Interaction-vector dimension `l` (FINN only).
    pub interaction_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    /// Dropout keep probability on the combination layer, if any.
    pub keep_prob: Option<f64>,
    /// Batch normalization on the combination layer.
    pub use_bn: bool,
    /// Embeddings start uniform in `[-embed_init, embed_init)`.
    pub embed_init: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(variant: Variant, n_features: usize, n_fields: usize) -> Self {
        Self {
            variant,
            n_features,
            n_fields,
            embed_dim: 8,
            interaction_dim: 4,
            hidden_sizes: vec![64, 32],
            activation: Activation::Relu,
            keep_prob: None,
            use_bn: false,
            embed_init: DEFAULT_EMBED_INIT,
            seed: 0,
        }
    }

    pub fn with_dims(mut self, embed_dim: usize, interaction_dim: usize, hidden_sizes: Vec<usize>) -> Self {
        self.embed_dim = embed_dim;
        self.interaction_dim = interaction_dim;
        self.hidden_sizes = hidden_sizes;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fields < 2 {
            return Err(Error::invalid(format!(
                "models need at least 2 fields, got {}",
                self.n_fields
            )));
        }
        if self.n_features == 0 {
            return Err(Error::invalid("n_features must be >= 1"));
        }
        let v = self.variant;
        if v.has_embeddings() && self.embed_dim == 0 {
            return Err(Error::invalid("embed_dim must be >= 1"));
        }
        if v == Variant::Finn && self.interaction_dim == 0 {
            return Err(Error::invalid("FINN needs interaction_dim >= 1"));
        }
        if v.is_deep() && self.hidden_sizes.is_empty() {
            return Err(Error::invalid(format!("{v} needs at least one hidden layer")));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be >= 1"));
        }
        if let Some(p) = self.keep_prob {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("keep_prob must be in (0, 1], got {p}")));
            }
        }
        if !(self.embed_init > 0.0 && self.embed_init.is_finite()) {
            return Err(Error::invalid("embed_init must be positive"));
        }
        Ok(())
    }

    pub fn combination_dim(&self) -> usize {
        self.variant
            .combination_dim(self.n_fields, self.embed_dim, self.interaction_dim)
    }

    /// `key=value` lines, stable order.
    pub fn to_text(&self) -> String {
        let hidden: Vec<String> = self.hidden_sizes.iter().map(usize::to_string).collect();
        let keep = self.keep_prob.map_or("none".to_string(), |p| format!("{p:?}"));
        format!(
            "variant={}\nn_features={}\nn_fields={}\nembed_dim={}\ninteraction_dim={}\nhidden_sizes={}\nactivation={}\nkeep_prob={}\nuse_bn={}\nembed_init={:?}\nseed={}\n",
            self.variant,
            self.n_features,
            self.n_fields,
            self.embed_dim,
            self.interaction_dim,
            hidden.join(","),
            self.activation,
            keep,
            self.use_bn,
            self.embed_init,
            self.seed
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .ok_or_else(|| Error::Checkpoint(format!("bad config line `{l}`")))
            })
            .collect::<Result<_>>()?;
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Checkpoint(format!("config lacks `{k}`")))
        };
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Checkpoint(format!("bad value `{v}` for `{k}`")))
        }
        let hidden = get("hidden_sizes")?;
        let hidden_sizes = if hidden.is_empty() {
            Vec::new()
        } else {
            hidden
                .split(',')
                .map(|h| num("hidden_sizes", h))
                .collect::<Result<_>>()?
        };
        let keep = get("keep_prob")?;
        let cfg = Self {
            variant: get("variant")?.parse()?,
            n_features: num("n_features", get("n_features")?)?,
            n_fields: num("n_fields", get("n_fields")?)?,
            embed_dim: num("embed_dim", get("embed_dim")?)?,
            interaction_dim: num("interaction_dim", get("interaction_dim")?)?,
            hidden_sizes,
            activation: get("activation")?.parse()?,
            keep_prob: if keep == "none" { None } else { Some(num("keep_prob", keep)?) },
            use_bn: num("use_bn", get("use_bn")?)?,
            embed_init: num("embed_init", get("embed_init")?)?,
            seed: num("seed", get("seed")?)?,
        };
        Ok(cfg)
    }
}
