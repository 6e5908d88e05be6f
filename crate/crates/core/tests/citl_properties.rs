mod common;

use citl::citl::{global_weights_citl, single_node_weight, xi_score, IncrementalUpdate, Penalties, WeightUpdate};
use citl::citl::{grow_target, TransferConfig};
use citl::data::{synth_generate, SplitSpec, SynthConfig};
use citl::eval::prepare_target;
use citl::growth::GrowConfig;
use citl::numcore::Matrix;
use citl::rscn::train_source;
use citl::oracle::{finite_diff_grad, minimize_1d, recompute_residuals, CitlObjective, NodeObjective};
use citl::rscn::global_weights_ridge;
use citl::RngStream;
use common::*;

fn exact_drop(before: &Matrix, after: &Matrix) -> f64 {
    before.as_slice().iter().zip(after.as_slice()).map(|(a, b)| (a - b) * (a + b)).sum()
}

#[test]
fn residual_drop_matches_node_terms() {
    let mut rng = RngStream::new(301);
    for trial in 0..120 {
        let task = random_task(&mut rng, 8, 20, 20);
        let mode = if trial % 2 == 0 { "global" } else { "incremental" };
        let l = (rng.next_u64() % 8) as usize;
        let (mut st, _) = task.grown_state(&mut rng, l, mode);
        let c = task.candidate(&mut rng);
        let node = task.node(&c);
        let a = st.analyze(&node.h_tl, &node.h_tu, &node.h_t, &task.pen).unwrap();
        let predicted: f64 = a.gains().iter().sum();
        let before = st.e_tl.clone();
        IncrementalUpdate.append(&mut st, &node, &task.pen).unwrap();
        let measured = exact_drop(&before, &st.e_tl);
        assert!(
            (measured - predicted).abs() <= 1e-8 * predicted.abs().max(1e-12),
            "trial {trial}: measured {measured:e}, predicted {predicted:e}"
        );
    }
}

#[test]
fn xi_reduces_to_quality_factor_without_target_terms() {
    let mut rng = RngStream::new(5);
    for _ in 0..50 {
        let mut task = random_task(&mut rng, 4, 12, 6);
        task.pen = Penalties { c_t: task.pen.c_t, c_tu: 0.0, eta: 0.0 };
        let (st, _) = task.grown_state(&mut rng, 2, "global");
        let node = task.node(&task.candidate(&mut rng));
        let (xi, total) = xi_score(&st, &node.h_tl, &node.h_tu, &node.h_t, &task.pen, 0.9, 0.02).unwrap();
        let q = citl::rscn::quality_factor(&st.e_tl, &node.h_tl, task.pen.c_t, 0.9, 0.02).unwrap();
        assert!((xi[0] - q).abs() <= 1e-10 * q.abs().max(1.0));
        assert_eq!(xi[0], total);
    }
}

#[test]
fn single_node_weight_matches_line_search() {
    let mut rng = RngStream::new(77);
    for trial in 0..100 {
        let task = random_task(&mut rng, 8, 20, 20);
        let l = (rng.next_u64() % 6) as usize;
        let (st, cands) = task.grown_state(&mut rng, l, "global");
        let c = task.candidate(&mut rng);
        let node = task.node(&c);
        let w = single_node_weight(&st, &node.h_tl, &node.h_tu, &node.h_t, &task.pen).unwrap()[0];

        let model = task.model(&cands, &st.beta);
        let (e_tl, e_tu, _) = recompute_residuals(&model, &task.blocks).unwrap();
        let mut x_t = task.blocks.x_tl.clone();
        for i in 0..task.blocks.x_tu.rows() {
            x_t.push_row(task.blocks.x_tu.row(i)).unwrap();
        }
        let obj = NodeObjective {
            e_tl: e_tl.row(0).to_vec(),
            e_tu: e_tu.row(0).to_vec(),
            pred_t: model.predict(&x_t).unwrap().column(0),
            h_tl: node.h_tl.clone(),
            h_tu: node.h_tu.clone(),
            h_t: node.h_t.clone(),
            lap: task.blocks.lap.clone(),
            pen: task.pen,
        };
        let b = minimize_1d(|b| obj.value_extended(b), -50.0, 50.0, 1e-12).unwrap();
        let coarse = obj.value(b) - obj.value(w);
        assert!(coarse.abs() <= 1e-9 * obj.value(w).abs().max(1.0));
        assert!((b - w).abs() <= 1e-8, "trial {trial}: line search {b}, closed form {w}");
    }
}

#[test]
fn global_weights_are_stationary() {
    let mut rng = RngStream::new(11);
    for trial in 0..50 {
        let task = random_task(&mut rng, 8, 20, 20);
        let l = 1 + (rng.next_u64() % 10) as usize;
        let (st, cands) = task.grown_state(&mut rng, l, "global");
        let beta = global_weights_citl(&st, &task.blocks.t_tl, &task.pen).unwrap();
        let obj = CitlObjective {
            h_tl: task.hidden(&cands, &task.blocks.x_tl),
            h_tu: task.hidden(&cands, &task.blocks.x_tu),
            h_t: st.h_t.clone(),
            t_tl: task.blocks.t_tl.clone(),
            t_tu: task.blocks.t_tu.clone(),
            lap: task.blocks.lap.clone(),
            pen: task.pen,
        };
        let g = finite_diff_grad(&obj, beta.as_slice(), 1e-5).unwrap();
        let g0 = finite_diff_grad(&obj, &vec![0.0; l], 1e-5).unwrap();
        let scale = g0.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(gmax <= 1e-6 * scale, "trial {trial}: |grad| {gmax:e}, scale {scale:e}");
    }
}

#[test]
fn target_weights_reduce_to_ridge() {
    let mut rng = RngStream::new(12);
    for _ in 0..20 {
        let mut task = random_task(&mut rng, 5, 15, 10);
        task.pen.c_tu = 0.0;
        task.pen.eta = 0.0;
        let (st, _) = task.grown_state(&mut rng, 4, "global");
        let a = global_weights_citl(&st, &task.blocks.t_tl, &task.pen).unwrap();
        let b = global_weights_ridge(&st.h_tl, &task.blocks.t_tl, task.pen.c_t).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}

#[test]
fn bookkeeping_matches_recomputation() {
    let mut rng = RngStream::new(13);
    for trial in 0..100 {
        let task = random_task(&mut rng, 6, 20, 20);
        let mode = if trial % 3 == 0 { "incremental" } else { "global" };
        let l = (rng.next_u64() % 8) as usize;
        let (st, cands) = task.grown_state(&mut rng, l, mode);
        let model = task.model(&cands, &st.beta);
        let (e_tl, e_tu, zeta) = recompute_residuals(&model, &task.blocks).unwrap();
        for (a, b) in [(&e_tl, &st.e_tl), (&e_tu, &st.e_tu), (&zeta, &st.zeta)] {
            assert_eq!(a.shape(), b.shape());
            let diff = a.sub(b).unwrap().max_abs();
            assert!(diff <= 1e-10, "trial {trial} ({mode}, L={l}): {diff:e}");
        }
        if l == 0 {
            assert_eq!(e_tl.transpose(), task.blocks.t_tl);
        }
    }
}

#[test]
fn label_scaling_scales_weights_and_keeps_argmax() {
    let mut rng = RngStream::new(14);
    for _ in 0..30 {
        let mut task = random_task(&mut rng, 6, 20, 20);
        task.pen.c_tu = 0.0;
        task.pen.eta = 0.0;
        let k = rng.uniform_in(0.1, 10.0);
        let mut scaled = random_task(&mut RngStream::new(0), 6, 20, 20);
        scaled.blocks = task.blocks.clone();
        scaled.blocks.t_tl = task.blocks.t_tl.scale(k);
        scaled.pen = task.pen;
        let seed = rng.next_u64();
        let (a, _) = task.grown_state(&mut RngStream::new(seed), 3, "global");
        let (b, _) = scaled.grown_state(&mut RngStream::new(seed), 3, "global");
        for (x, y) in a.beta.as_slice().iter().zip(b.beta.as_slice()) {
            assert!((k * x - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
        let pool: Vec<_> = (0..20).map(|_| task.node(&task.candidate(&mut rng))).collect();
        let argmax = |st: &citl::citl::GrowthState| {
            pool.iter()
                .map(|n| xi_score(st, &n.h_tl, &n.h_tu, &n.h_t, &task.pen, 0.9, 0.01).unwrap().1)
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
                .0
        };
        assert_eq!(argmax(&a), argmax(&b));
    }
}

/// Labeled-residual trajectories of full growth runs on synthetic tasks.
fn trajectories(mode: &str) -> Vec<Vec<f64>> {
    let gammas = vec![0.01, 0.05, 0.1, 0.5];
    let mut src_cfg = GrowConfig {
        eps: 0.06,
        gamma_list: gammas.clone(),
        ..GrowConfig::default()
    };
    let mut cfg = TransferConfig {
        c_t: 256.0,
        c_tu: 16.0,
        eta: 1e7,
        mode: mode.into(),
        ..TransferConfig::default()
    };
    cfg.grow.eps = 0.03;
    cfg.grow.gamma_list = gammas;
    let split = SplitSpec {
        labeled_count: 20,
        semisup_unlabeled_count: 100,
    };
    (0..20u64)
        .map(|seed| {
            let (s, t) = synth_generate(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
            src_cfg.seed = seed;
            cfg.grow.seed = seed + 1000;
            let (src, _) = train_source(&s, &src_cfg).unwrap();
            let sp = prepare_target(&src, &t, split).unwrap();
            grow_target(&sp.labeled, &sp.unlabeled, &src, &cfg).unwrap().1.residuals()
        })
        .collect()
}

fn rises(traj: &[Vec<f64>]) -> (usize, usize) {
    let steps = traj.iter().map(|t| t.len() - 1).sum();
    let up = traj.iter().flat_map(|t| t.windows(2)).filter(|w| w[1] > w[0] + 1e-10).count();
    (up, steps)
}

#[test]
fn incremental_growth_residuals_non_increasing() {
    let (up, steps) = rises(&trajectories("incremental"));
    assert_eq!(up, 0, "{up}/{steps} steps raised the labeled residual");
}

#[test]
fn global_growth_residuals_non_increasing() {
    let (up, steps) = rises(&trajectories("global"));
    assert_eq!(up, 0, "{up}/{steps} steps raised the labeled residual");
}
