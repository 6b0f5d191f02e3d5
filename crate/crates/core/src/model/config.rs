use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Lite,
    Full,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Lite => "lite",
            Variant::Full => "full",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lite" => Ok(Variant::Lite),
            "full" => Ok(Variant::Full),
            other => Err(Error::Config(format!("unknown model variant '{other}' (expected lite|full)"))),
        }
    }
}

/// Architecture of the conditional vector-field network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub base_channels: usize,
    /// Number of down/up-sampling stages.
    pub depth: usize,
    pub use_spatial_attention: bool,
    /// 2 for static maps (buildings, transmitter), 3 with the vehicle layer.
    pub cond_channels: usize,
    pub time_embed_dim: usize,
}

impl ModelConfig {
    pub fn lite(cond_channels: usize) -> Self {
        Self {
            variant: Variant::Lite,
            base_channels: 16,
            depth: 2,
            use_spatial_attention: true,
            cond_channels,
            time_embed_dim: 32,
        }
    }

    pub fn full(cond_channels: usize) -> Self {
        Self {
            variant: Variant::Full,
            base_channels: 32,
            depth: 3,
            use_spatial_attention: true,
            cond_channels,
            time_embed_dim: 64,
        }
    }

    pub fn for_variant(variant: Variant, cond_channels: usize) -> Self {
        match variant {
            Variant::Lite => Self::lite(cond_channels),
            Variant::Full => Self::full(cond_channels),
        }
    }

    pub fn with_spatial_attention(mut self, on: bool) -> Self {
        self.use_spatial_attention = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("depth must be ≥ 1".into()));
        }
        if self.base_channels < 4 {
            return Err(Error::Config("base_channels must be ≥ 4".into()));
        }
        if !(2..=3).contains(&self.cond_channels) {
            return Err(Error::Config(format!(
                "cond_channels must be 2 (static) or 3 (with vehicles), got {}",
                self.cond_channels
            )));
        }
        if self.time_embed_dim == 0 || self.time_embed_dim % 2 != 0 {
            return Err(Error::Config(format!("time_embed_dim must be even and positive, got {}", self.time_embed_dim)));
        }
        Ok(())
    }

    /// Spatial sizes must survive `depth` halvings.
    pub fn check_spatial(&self, h: usize, w: usize) -> Result<()> {
        let m = 1usize << self.depth;
        if h == 0 || w == 0 || h % m != 0 || w % m != 0 {
            return Err(Error::Config(format!(
                "spatial size {h}×{w} not divisible by 2^depth = {m}"
            )));
        }
        Ok(())
    }

    /// Channel width at encoder level `i`.
    pub fn channels_at(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

/// Group count for normalization: 8 when possible, else the largest divisor
/// of `channels` below 8.
pub fn norm_groups(channels: usize) -> usize {
    (1..=channels.min(8)).rev().find(|g| channels % g == 0).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::lite(2).validate().unwrap();
        ModelConfig::full(3).validate().unwrap();
        let mut c = ModelConfig::lite(2);
        c.depth = 0;
        assert!(c.validate().is_err());
        c = ModelConfig::lite(4);
        assert!(c.validate().is_err());
    }

    #[test]
    fn spatial_divisibility() {
        let c = ModelConfig::full(2);
        assert!(c.check_spatial(32, 32).is_ok());
        assert!(c.check_spatial(12, 12).is_err());
    }

    #[test]
    fn groups() {
        assert_eq!(norm_groups(16), 8);
        assert_eq!(norm_groups(4), 4);
        assert_eq!(norm_groups(12), 6);
    }
}
