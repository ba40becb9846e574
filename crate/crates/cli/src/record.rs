use fsparse_core::{EstimatorParams, ResolvedParams};
use serde::Serialize;

/// JSON record printed by `estimate` and `test`.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: &'static str,
    pub n: u32,
    pub s: u64,
    pub eps: f64,
    pub delta: f64,
    pub d: u32,
    pub gamma: u64,
    pub ell: u32,
    pub r: u32,
    pub seed: u64,
    pub known_norm: f64,
    pub xi: Option<f64>,
    pub distance: Option<f64>,
    pub threshold: Option<f64>,
    pub verdict: Option<String>,
    pub queries_used: u64,
    pub wall_time_secs: f64,
}

impl RunRecord {
    pub fn new(command: &'static str, n: u32, params: &EstimatorParams, seed: u64) -> Self {
        Self {
            command,
            n,
            s: params.s,
            eps: params.eps,
            delta: params.delta,
            d: 0,
            gamma: 0,
            ell: 0,
            r: 0,
            seed,
            known_norm: params.known_norm,
            xi: None,
            distance: None,
            threshold: None,
            verdict: None,
            queries_used: 0,
            wall_time_secs: 0.0,
        }
    }

    pub fn set_resolved(&mut self, p: &ResolvedParams) {
        self.d = p.d;
        self.gamma = p.gamma;
        self.ell = p.ell;
        self.r = p.reps;
    }
}
