use std::sync::Arc;

use crate::channel::{FsmcModel, PropulsionParams, RadioConfig};
use crate::error::{Error, Result};
use crate::group;

/// Largest cluster the group bitmasks and FSMC tables are sized for.
pub const MAX_USERS_PER_CLUSTER: usize = 12;

/// A static problem instance.
///
/// Clusters are indexed `0..N` and visited in that order; index `N` denotes
/// the dock. Demands are in bits.
#[derive(Debug, Clone)]
pub struct Scenario {
    demands: Vec<Vec<f64>>,
    max_frames: usize,
    pub radio: RadioConfig,
    pub propulsion: PropulsionParams,
    pub fsmc: Arc<FsmcModel>,
}

impl Scenario {
    pub fn new(
        demands: Vec<Vec<f64>>,
        max_frames: usize,
        radio: RadioConfig,
        propulsion: PropulsionParams,
        fsmc: Arc<FsmcModel>,
    ) -> Result<Self> {
        let s = Self {
            demands,
            max_frames,
            radio,
            propulsion,
            fsmc,
        };
        s.validate()?;
        Ok(s)
    }

    /// Default radio, propulsion and FSMC settings.
    pub fn with_defaults(demands: Vec<Vec<f64>>, max_frames: usize) -> Result<Self> {
        Self::new(
            demands,
            max_frames,
            RadioConfig::default(),
            PropulsionParams::default(),
            Arc::new(FsmcModel::default()),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.demands.is_empty() {
            return Err(Error::config("clusters", "need at least one cluster"));
        }
        for (n, users) in self.demands.iter().enumerate() {
            if users.is_empty() || users.len() > MAX_USERS_PER_CLUSTER {
                return Err(Error::config(
                    format!("clusters[{n}]"),
                    format!(
                        "need 1..={MAX_USERS_PER_CLUSTER} users, got {}",
                        users.len()
                    ),
                ));
            }
            if let Some(q) = users.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
                return Err(Error::config(
                    format!("clusters[{n}].demands"),
                    format!("demands must be finite and >= 0, got {q}"),
                ));
            }
        }
        let all_zero = self.total_demand() == 0.0;
        if !all_zero {
            if let Some(n) = (0..self.num_clusters()).find(|&n| self.cluster_demand(n) == 0.0) {
                return Err(Error::config(
                    format!("clusters[{n}].demands"),
                    "every visited cluster needs a positive total demand",
                ));
            }
        }
        if self.max_frames < self.num_clusters() {
            return Err(Error::config(
                "limits.max_frames",
                format!(
                    "{} frames cannot visit {} clusters",
                    self.max_frames,
                    self.num_clusters()
                ),
            ));
        }
        self.radio.validate()?;
        self.propulsion.validate()?;
        Ok(())
    }

    pub fn num_clusters(&self) -> usize {
        self.demands.len()
    }

    /// Index of the dock in location vectors.
    pub fn dock(&self) -> usize {
        self.demands.len()
    }

    pub fn users(&self, n: usize) -> usize {
        self.demands[n].len()
    }

    pub fn users_per_cluster(&self) -> Vec<usize> {
        self.demands.iter().map(Vec::len).collect()
    }

    pub fn catalog_size(&self, n: usize) -> usize {
        group::catalog_size(self.users(n))
    }

    pub fn demands(&self) -> &[Vec<f64>] {
        &self.demands
    }

    pub fn demand(&self, n: usize, k: usize) -> f64 {
        self.demands[n][k]
    }

    pub fn cluster_demand(&self, n: usize) -> f64 {
        self.demands[n].iter().sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.iter().flatten().sum()
    }

    pub fn max_frames(&self) -> usize {
        self.max_frames
    }

    pub fn slots(&self) -> usize {
        self.radio.slots_per_frame
    }

    /// Hovering energy of one frame above a cluster.
    pub fn hover_energy_per_frame(&self) -> f64 {
        self.radio.frame_hover_energy(self.propulsion.hover_power_w)
    }

    /// Copy with a different frame horizon.
    pub fn with_max_frames(&self, max_frames: usize) -> Result<Self> {
        let mut s = self.clone();
        s.max_frames = max_frames;
        s.validate()?;
        Ok(s)
    }

    /// Copy with different demands.
    pub fn with_demands(&self, demands: Vec<Vec<f64>>) -> Result<Self> {
        let mut s = self.clone();
        s.demands = demands;
        s.validate()?;
        Ok(s)
    }

    /// Single-cluster scenario built from cluster `n`.
    pub fn single_cluster(&self, n: usize, max_frames: usize) -> Result<Self> {
        let mut s = self.clone();
        s.demands = vec![self.demands[n].clone()];
        s.max_frames = max_frames;
        s.validate()?;
        Ok(s)
    }
}
