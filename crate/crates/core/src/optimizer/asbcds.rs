use super::{check_run, choose_block, DelaySchedule, IterationRecord, RunOptions, RunOutput, StochasticOracle, ThetaSchedule};
use crate::blocks::Blocks;
use crate::error::{Error, Result};

/// Full iterate histories of the reference method.
#[derive(Debug, Clone)]
pub struct AsbcdsState {
    /// `η_0, η_1, …`
    pub eta: Vec<Blocks>,
    /// `ζ_0, ζ_1, …`
    pub zeta: Vec<Blocks>,
    /// `λ_0 = η_0, λ_1, …`
    pub lambda: Vec<Blocks>,
    /// `d_1, d_2, …` with `d_l = θ_{l+1}(1 − θ_l)/θ_l`.
    pub d_history: Vec<f64>,
}

impl AsbcdsState {
    pub fn new(initial: Blocks) -> Self {
        Self {
            eta: vec![initial.clone()],
            zeta: vec![initial.clone()],
            lambda: vec![initial],
            d_history: Vec::new(),
        }
    }

    /// Index of the newest stored iterate.
    pub fn latest(&self) -> usize {
        self.eta.len() - 1
    }
}

/// Stale point `ω_{j(k+1)}` at which iteration `k` evaluates its gradient.
///
/// Block `p` is read at `j = j_p(k+1)` and pushed forward through the
/// iterations it missed:
///
/// ```text
/// ω^[p] = η_j^[p] + Σ_{i=j}^{k} ρ_i · θ_{j+1}(ζ_j^[p] − η_j^[p]),   ρ_i = Π_{l=j+1}^{i} d_l
/// ```
///
/// This is the momentum recursion of a block that stays unwritten from `j` to
/// `k`. When block `p` was also not written at iteration `j − 1` the base
/// increment equals `d_j(λ_j − η_{j−1})`, i.e. the sum is
/// `Σ_{i=j}^{k} Π_{l=j}^{i} d_l · (λ_j − η_{j−1})`. With `j = k` it reduces to
/// the fresh read `λ_{k+1}`.
pub fn compensated_iterate(
    state: &AsbcdsState,
    thetas: &mut ThetaSchedule,
    k: usize,
    delays: &DelaySchedule,
) -> Result<Blocks> {
    if state.latest() < k {
        return Err(Error::Schedule(format!(
            "history ends at iteration {} but iteration {k} was requested",
            state.latest()
        )));
    }
    let m = state.eta[0].num_blocks();
    let mut omega = state.eta[k].clone();
    for p in 0..m {
        let j = delays.read_index(p, k)?;
        let mut rho = 1.0;
        let mut weight = 1.0;
        for i in j + 1..=k {
            rho *= thetas.momentum_ratio(i);
            weight += rho;
        }
        let step = thetas.theta(j + 1) * weight;
        let eta_j = state.eta[j].block(p);
        let zeta_j = state.zeta[j].block(p);
        for ((o, e), z) in omega.block_mut(p).iter_mut().zip(eta_j).zip(zeta_j) {
            *o = e + step * (z - e);
        }
    }
    Ok(omega)
}

/// Reference form of the method; see the module docs.
pub fn run_asbcds(
    oracle: &dyn StochasticOracle,
    delays: &DelaySchedule,
    opts: &RunOptions,
    initial: &Blocks,
) -> Result<RunOutput> {
    check_run(oracle, delays, opts, initial)?;
    let m = oracle.num_blocks();
    let mut thetas = ThetaSchedule::new(m);
    let mut state = AsbcdsState::new(initial.clone());
    let mut records = Vec::with_capacity(opts.iterations + 1);

    for k in 0..=opts.iterations {
        let theta = thetas.theta(k + 1);
        if k >= 1 {
            state.d_history.push(thetas.momentum_ratio(k));
        }
        let lambda = state.zeta[k].scaled(theta).axpy(1.0 - theta, &state.eta[k]);
        state.lambda.push(lambda);

        let omega = compensated_iterate(&state, &mut thetas, k, delays)?;
        let block = choose_block(opts.block_seed, k, m);
        let g = oracle.partial_gradient(&omega, block, (k + 1) as u64);

        let mut zeta = state.zeta[k].clone();
        let scale = opts.gamma / (m as f64 * theta);
        for (z, gv) in zeta.block_mut(block).iter_mut().zip(&g) {
            *z -= scale * gv;
        }
        let mut eta = state.lambda[k + 1].clone();
        let coupling = m as f64 * theta;
        for (l, (zn, zo)) in zeta.block(block).iter().zip(state.zeta[k].block(block)).enumerate() {
            eta[(block, l)] += coupling * (zn - zo);
        }

        let max_staleness = (0..m)
            .map(|p| k - delays.read_index(p, k).expect("checked by compensation"))
            .max()
            .unwrap_or(0);
        let value = if opts.record_values { oracle.value(&eta) } else { None };
        records.push(IterationRecord {
            k,
            block,
            max_staleness,
            value,
        });
        state.eta.push(eta);
        state.zeta.push(zeta);
    }

    let final_eta = state.eta.last().expect("nonempty").clone();
    let (iterates, anchors) = if opts.record_iterates {
        (state.eta, state.zeta)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(RunOutput {
        final_eta,
        records,
        iterates,
        anchors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{quadratic::QuadraticConsensusProblem, step_size};
    use crate::topology::{build_topology, TopologyKind, TopologySpec};

    fn problem(m: usize) -> QuadraticConsensusProblem {
        let g = build_topology(&TopologySpec::new(TopologyKind::Cycle, m)).unwrap();
        QuadraticConsensusProblem::random(g, 1.0, 3, 5).unwrap()
    }

    #[test]
    fn initial_read_is_the_start_point() {
        let init = Blocks::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        let state = AsbcdsState::new(init.clone());
        let delays = DelaySchedule::fresh(2, 1);
        let omega = compensated_iterate(&state, &mut ThetaSchedule::new(2), 0, &delays).unwrap();
        assert_eq!(omega, init);
    }

    #[test]
    fn fresh_read_is_lambda() {
        let p = problem(4);
        let delays = DelaySchedule::fresh(4, 30);
        let mut opts = RunOptions::new(20, step_size(p.smoothness(), 0, 4).unwrap(), 3);
        opts.record_iterates = true;
        let out = run_asbcds(&p.oracle(), &delays, &opts, &Blocks::zeros(4, 3)).unwrap();
        let state = AsbcdsState {
            eta: out.iterates.clone(),
            zeta: out.anchors.clone(),
            lambda: Vec::new(),
            d_history: Vec::new(),
        };
        let mut thetas = ThetaSchedule::new(4);
        for k in 0..20 {
            let theta = thetas.theta(k + 1);
            let lambda = state.zeta[k].scaled(theta).axpy(1.0 - theta, &state.eta[k]);
            let omega = compensated_iterate(&state, &mut thetas, k, &delays).unwrap();
            assert!(omega.max_rel_diff(&lambda, 1e-12) < 1e-13);
        }
    }

    /// The textbook `ρ`-product with base `λ_j − η_{j−1}` agrees with the
    /// implemented compensation exactly when block `p` was not written at
    /// iteration `j − 1`.
    #[test]
    fn textbook_product_form_when_block_idle() {
        let m = 3;
        let p = problem(m);
        let mut opts = RunOptions::new(40, 0.05, 11);
        opts.record_iterates = true;
        let delays = DelaySchedule::fresh(m, 41);
        let out = run_asbcds(&p.oracle(), &delays, &opts, &Blocks::zeros(m, 3)).unwrap();
        let mut thetas = ThetaSchedule::new(m);
        let mut lambda = vec![out.iterates[0].clone()];
        for k in 0..=40 {
            let t = thetas.theta(k + 1);
            lambda.push(out.anchors[k].scaled(t).axpy(1.0 - t, &out.iterates[k]));
        }
        let mut agreed = 0;
        let mut differed = 0;
        for k in 10..40 {
            for j in (k - 4)..=k {
                let written_before = out.records[j - 1].block;
                for blk in 0..m {
                    let mut rho = 1.0;
                    let mut sum = 0.0;
                    for i in j..=k {
                        rho *= thetas.momentum_ratio(i);
                        sum += rho;
                    }
                    let mut assign = vec![vec![0; m]; k + 1];
                    for (kk, row) in assign.iter_mut().enumerate() {
                        row.fill(kk.min(j).max(kk.saturating_sub(4)));
                    }
                    let d = DelaySchedule::from_assignment(4, assign).unwrap();
                    let state = AsbcdsState {
                        eta: out.iterates[..=k].to_vec(),
                        zeta: out.anchors[..=k].to_vec(),
                        lambda: Vec::new(),
                        d_history: Vec::new(),
                    };
                    let omega = compensated_iterate(&state, &mut thetas, k, &d).unwrap();
                    let textbook: Vec<f64> = (0..3)
                        .map(|l| {
                            out.iterates[j][(blk, l)]
                                + sum * (lambda[j][(blk, l)] - out.iterates[j - 1][(blk, l)])
                        })
                        .collect();
                    let close = omega
                        .block(blk)
                        .iter()
                        .zip(&textbook)
                        .all(|(a, b)| (a - b).abs() <= 1e-10 * a.abs().max(1.0));
                    if written_before == blk {
                        differed += usize::from(!close);
                    } else {
                        assert!(close, "k={k} j={j} block={blk}");
                        agreed += 1;
                    }
                }
            }
        }
        assert!(agreed > 0);
        assert!(differed > 0);
    }

    #[test]
    fn rejects_short_schedule() {
        let p = problem(4);
        let delays = DelaySchedule::fresh(4, 5);
        let opts = RunOptions::new(10, 0.1, 0);
        assert!(matches!(
            run_asbcds(&p.oracle(), &delays, &opts, &Blocks::zeros(4, 3)),
            Err(Error::Schedule(_))
        ));
    }
}
