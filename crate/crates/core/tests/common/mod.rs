//! Independent reference computations for integration tests.
#![allow(dead_code)]

use std::io::Write;

use rand::Rng;
use spikenet::glm::ENUMERATION_LIMIT;
use spikenet::{HyperParams, NetworkState, Parameters, SpikeRecord, Topology};

/// Writes straight to the process stderr so the line shows up even when the
/// test harness captures output.
pub fn report(id: &str, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] criterion {id} {verdict} {name}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

pub fn note(tag: &str, detail: &str) {
    let line = format!("[property] {tag}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

pub fn info(id: &str, detail: &str) {
    let line = format!("[acceptance] criterion {id} REPORT {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Impulse response of `p` to one spike `d` steps earlier:
/// `sum_{m=0}^{d-2} b^{d-2-m} a^m` for `d >= 2`, zero otherwise.
pub fn p_kernel(a: f64, b: f64, d: usize) -> f64 {
    if d < 2 {
        return 0.0;
    }
    (0..=d - 2).map(|m| b.powi((d - 2 - m) as i32) * a.powi(m as i32)).sum()
}

/// Response of `r` to one spike `d` steps earlier.
pub fn r_kernel(c: f64, d: usize) -> f64 {
    if d < 1 {
        return 0.0;
    }
    c.powi((d - 1) as i32)
}

/// Traces and potentials recomputed by convolution with the unrolled
/// impulse responses.
pub struct Replay {
    /// `p[t][j]` per source.
    pub p: Vec<Vec<f64>>,
    /// `u[t][i]` per neuron.
    pub u: Vec<Vec<f64>>,
}

/// `sources[t]` holds the spikes of every source (neurons first, then
/// exogenous channels) at column `t`. `initial` plays the role of column -1.
pub fn replay(
    topo: &Topology,
    params: &Parameters,
    hyper: &HyperParams,
    sources: &[Vec<bool>],
    initial: Option<&NetworkState>,
) -> Replay {
    let (a, b, c) = (
        (-1.0 / hyper.tau_syn).exp(),
        (-1.0 / hyper.tau_mem).exp(),
        (-1.0 / hyper.tau_ref).exp(),
    );
    let n = topo.neuron_count();
    let m = topo.source_count();
    let zero = NetworkState::new(topo);
    let init = initial.unwrap_or(&zero);
    let spike = |col: isize, j: usize| -> bool {
        if col < 0 {
            init.last_spikes[j]
        } else {
            sources[col as usize][j]
        }
    };
    let mut p_all = Vec::with_capacity(sources.len());
    let mut u_all = Vec::with_capacity(sources.len());
    for t in 0..sources.len() {
        let ti = t as isize;
        let mut p = vec![0.0; m];
        for (j, pj) in p.iter_mut().enumerate() {
            let mut v = b.powi(t as i32 + 1) * init.syn_p[j];
            v += init.syn_q[j] * (0..=t).map(|k| b.powi((t - k) as i32) * a.powi(k as i32)).sum::<f64>();
            for s in -1..ti {
                if spike(s, j) {
                    v += p_kernel(a, b, (ti - s) as usize);
                }
            }
            *pj = v;
        }
        let mut u = vec![0.0; n];
        for (i, ui) in u.iter_mut().enumerate() {
            let mut r = c.powi(t as i32 + 1) * init.ref_r[i];
            for s in -1..ti {
                if spike(s, i) {
                    r += r_kernel(c, (ti - s) as usize);
                }
            }
            let drive: f64 = params.weights[topo.edge_range(i)]
                .iter()
                .zip(topo.parents(i))
                .map(|(w, &j)| w * p[j])
                .sum();
            *ui = drive - r + params.biases[i];
        }
        p_all.push(p);
        u_all.push(u);
    }
    Replay { p: p_all, u: u_all }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy of `s` against `logistic(z)`.
pub fn bce(s: bool, z: f64) -> f64 {
    let z = if s { z } else { -z };
    // ln(1 + e^{-z})
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

pub fn random_record<R: Rng>(rows: usize, horizon: usize, rate: f64, rng: &mut R) -> SpikeRecord {
    let mut r = SpikeRecord::zeros(rows, horizon);
    for i in 0..rows {
        for t in 0..horizon {
            r.set(i, t, rng.random_bool(rate));
        }
    }
    r
}

pub fn random_params<R: Rng>(topo: &Topology, scale: f64, rng: &mut R) -> Parameters {
    let mut p = Parameters::zeros(topo);
    p.weights.iter_mut().for_each(|w| *w = rng.random_range(-scale..=scale));
    p.biases.iter_mut().for_each(|b| *b = rng.random_range(-scale..=scale));
    p
}

pub fn random_state<R: Rng>(topo: &Topology, rng: &mut R) -> NetworkState {
    let mut s = NetworkState::new(topo);
    s.syn_p.iter_mut().for_each(|v| *v = rng.random_range(0.0..3.0));
    s.syn_q.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.5));
    s.ref_r.iter_mut().for_each(|v| *v = rng.random_range(0.0..2.0));
    s.last_spikes.iter_mut().for_each(|v| *v = rng.random_bool(0.5));
    s
}

/// Column-major source spikes for a full record (one row per neuron) and
/// the exogenous input.
pub fn source_columns(full: &SpikeRecord, exogenous: &SpikeRecord) -> Vec<Vec<bool>> {
    (0..exogenous.horizon())
        .map(|t| {
            let mut col = full.column(t);
            col.extend(exogenous.column(t));
            col
        })
        .collect()
}

/// Every hidden assignment over `bits` hidden-neuron steps, hidden-major:
/// bit `k * horizon + t` is hidden neuron `k` at step `t`.
pub fn hidden_codes(hidden: usize, horizon: usize) -> impl Iterator<Item = SpikeRecord> {
    let bits = hidden * horizon;
    assert!(bits <= ENUMERATION_LIMIT);
    (0u64..(1u64 << bits)).map(move |code| {
        let mut h = SpikeRecord::zeros(hidden, horizon);
        for k in 0..hidden {
            for t in 0..horizon {
                h.set(k, t, (code >> (k * horizon + t)) & 1 == 1);
            }
        }
        h
    })
}

/// Full record (one row per neuron) from visible and hidden rows.
pub fn assemble(topo: &Topology, visible: &SpikeRecord, hidden: &SpikeRecord) -> SpikeRecord {
    let mut full = SpikeRecord::zeros(topo.neuron_count(), visible.horizon());
    for (k, &i) in topo.visible().iter().enumerate() {
        for t in 0..visible.horizon() {
            full.set(i, t, visible.get(k, t));
        }
    }
    for (k, &i) in topo.hidden().iter().enumerate() {
        for t in 0..hidden.horizon() {
            full.set(i, t, hidden.get(k, t));
        }
    }
    full
}

/// Probability of the hidden rows and the visible cross-entropy under one
/// replayed trajectory, plus the analytic gradients (per edge, per bias) of
/// `log p(h || x)` and of the visible cross-entropy.
pub struct TrajectoryTerms {
    pub prob_hidden: f64,
    pub visible_nll: f64,
    pub dlogp_w: Vec<f64>,
    pub dlogp_b: Vec<f64>,
    pub dnll_w: Vec<f64>,
    pub dnll_b: Vec<f64>,
}

pub fn trajectory_terms(
    topo: &Topology,
    params: &Parameters,
    hyper: &HyperParams,
    full: &SpikeRecord,
    exogenous: &SpikeRecord,
    initial: Option<&NetworkState>,
) -> TrajectoryTerms {
    let cols = source_columns(full, exogenous);
    let rep = replay(topo, params, hyper, &cols, initial);
    let bw = hyper.bandwidth;
    let mut out = TrajectoryTerms {
        prob_hidden: 1.0,
        visible_nll: 0.0,
        dlogp_w: vec![0.0; topo.edge_count()],
        dlogp_b: vec![0.0; topo.neuron_count()],
        dnll_w: vec![0.0; topo.edge_count()],
        dnll_b: vec![0.0; topo.neuron_count()],
    };
    for t in 0..cols.len() {
        for i in 0..topo.neuron_count() {
            let s = full.get(i, t);
            let z = bw * rep.u[t][i];
            let sig = logistic(z);
            let err = f64::from(u8::from(s)) - sig;
            let range = topo.edge_range(i);
            if topo.is_visible(i) {
                out.visible_nll += bce(s, z);
                for (e, &j) in range.zip(topo.parents(i)) {
                    out.dnll_w[e] -= bw * err * rep.p[t][j];
                }
                out.dnll_b[i] -= bw * err;
            } else {
                out.prob_hidden *= if s { sig } else { 1.0 - sig };
                for (e, &j) in range.zip(topo.parents(i)) {
                    out.dlogp_w[e] += bw * err * rep.p[t][j];
                }
                out.dlogp_b[i] += bw * err;
            }
        }
    }
    out
}

/// Exact gradient of the expected bound `sum_h p(h || x) V(h)` by
/// enumeration: `sum_h p(h) (grad V(h) + V(h) grad log p(h))`.
pub fn bound_gradient(
    topo: &Topology,
    params: &Parameters,
    hyper: &HyperParams,
    visible: &SpikeRecord,
    exogenous: &SpikeRecord,
    initial: Option<&NetworkState>,
) -> (Vec<f64>, Vec<f64>) {
    let mut gw = vec![0.0; topo.edge_count()];
    let mut gb = vec![0.0; topo.neuron_count()];
    for h in hidden_codes(topo.hidden().len(), exogenous.horizon()) {
        let full = assemble(topo, visible, &h);
        let tt = trajectory_terms(topo, params, hyper, &full, exogenous, initial);
        for e in 0..gw.len() {
            gw[e] += tt.prob_hidden * (tt.dnll_w[e] + tt.visible_nll * tt.dlogp_w[e]);
        }
        for i in 0..gb.len() {
            gb[i] += tt.prob_hidden * (tt.dnll_b[i] + tt.visible_nll * tt.dlogp_b[i]);
        }
    }
    (gw, gb)
}
