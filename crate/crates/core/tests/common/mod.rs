#![allow(dead_code)]

use proptest::prelude::*;
use startup_timing::Params;

pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Valid parameter sets around the reference scenario.
pub fn arb_params() -> impl Strategy<Value = Params> {
    (
        (0.0..0.05f64, 0.1..0.4f64, 0.01..0.06f64),
        (0.05..1.0f64, 2.0..14.0f64, 5.0..15.0f64),
        (0.02..0.3f64, 0.02..0.3f64),
        (0.01..0.6f64, 0.01..3.0f64),
    )
        .prop_map(|((mu, sigma, gap), (alpha, beta, k), (cs, ci), (l1, l2))| {
            let mut p = Params::reference(0.6);
            p.market.mu = mu;
            p.market.sigma = sigma;
            p.market.rho = mu + gap;
            p.profit.alpha = alpha;
            p.profit.beta = beta;
            p.profit.cap_k = k;
            p.cost.cost_slope = cs;
            p.cost.cost_intercept = ci;
            p.hazards.lambda1 = l1;
            p.hazards.lambda2 = l2;
            p
        })
}

/// Like [`arb_params`] with `beta < K`, where the critical fraction lies in (0, 1).
pub fn arb_params_k_above_beta() -> impl Strategy<Value = Params> {
    (arb_params(), 0.2..0.95f64).prop_map(|(mut p, r)| {
        p.profit.beta = r * p.profit.cap_k;
        p
    })
}

/// Reference parameters with the given post-competition stream.
pub fn with_stream(alpha: f64, beta: f64) -> Params {
    let mut p = Params::reference(alpha);
    p.profit.beta = beta;
    p
}
