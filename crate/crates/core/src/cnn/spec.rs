use serde::{Deserialize, Serialize};

use crate::data::{N_CHANNELS, WINDOW_LEN};
use crate::error::{Error, Result};

pub const POOL_WIDTH: usize = 2;
pub const POOL_STRIDE: usize = 2;
pub const N_BLOCKS: usize = 3;

/// Three conv -> batchnorm -> ReLU -> max-pool blocks and a final FC layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CnnSpec {
    pub channels: [usize; N_BLOCKS],
    pub kernel_sizes: [usize; N_BLOCKS],
    pub n_classes: usize,
    pub input_channels: usize,
    pub input_len: usize,
}

impl CnnSpec {
    /// Spec for 250x6 windows.
    pub fn new(channels: [usize; 3], kernel_sizes: [usize; 3], n_classes: usize) -> Result<Self> {
        Self::with_input(channels, kernel_sizes, n_classes, N_CHANNELS, WINDOW_LEN)
    }

    pub fn with_input(
        channels: [usize; 3],
        kernel_sizes: [usize; 3],
        n_classes: usize,
        input_channels: usize,
        input_len: usize,
    ) -> Result<Self> {
        let s = CnnSpec { channels, kernel_sizes, n_classes, input_channels, input_len };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for &c in &self.channels {
            if !c.is_power_of_two() || !(2..=128).contains(&c) {
                return Err(Error::invalid(format!("channel count {c} is not a power of two in [2, 128]")));
            }
        }
        for &k in &self.kernel_sizes {
            if k != 7 && k != 15 {
                return Err(Error::invalid(format!("kernel size {k} not in {{7, 15}}")));
            }
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("a classifier needs at least 2 classes"));
        }
        if self.input_channels == 0 || self.input_len < 8 {
            return Err(Error::invalid("input must have channels and length >= 8"));
        }
        Ok(())
    }

    /// Sequence length entering each block, followed by the final pooled length.
    /// For 250 samples: `[250, 125, 62, 31]`.
    pub fn lengths(&self) -> [usize; N_BLOCKS + 1] {
        let mut l = [self.input_len; N_BLOCKS + 1];
        for b in 0..N_BLOCKS {
            l[b + 1] = (l[b] - POOL_WIDTH) / POOL_STRIDE + 1;
        }
        l
    }

    pub fn in_channels(&self, block: usize) -> usize {
        if block == 0 {
            self.input_channels
        } else {
            self.channels[block - 1]
        }
    }

    /// Width of the flattened FC input (`c3 * final length`).
    pub fn fc_inputs(&self) -> usize {
        self.channels[N_BLOCKS - 1] * self.lengths()[N_BLOCKS]
    }

    /// Trainable parameters: conv weights and biases, batchnorm gamma/beta, FC.
    pub fn n_params(&self) -> usize {
        let conv: usize = (0..N_BLOCKS)
            .map(|b| {
                let (ci, co, k) = (self.in_channels(b), self.channels[b], self.kernel_sizes[b]);
                ci * co * k + co + 2 * co
            })
            .sum();
        conv + self.fc_inputs() * self.n_classes + self.n_classes
    }

    /// Batchnorm running mean / variance entries.
    pub fn n_buffers(&self) -> usize {
        2 * self.channels.iter().sum::<usize>()
    }

    /// Short identifier such as `c8-16-16_k7-7-15`.
    pub fn config_id(&self) -> String {
        let c: Vec<String> = self.channels.iter().map(|c| c.to_string()).collect();
        let k: Vec<String> = self.kernel_sizes.iter().map(|k| k.to_string()).collect();
        format!("c{}_k{}", c.join("-"), k.join("-"))
    }
}
