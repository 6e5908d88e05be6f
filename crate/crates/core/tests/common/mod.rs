#![allow(dead_code)]

use citl::citl::{build_laplacian, GrowthState, NodeOutputs, Penalties, UpdateRegistry};
use citl::growth::Candidate;
use citl::model::{node_output, Activation, ModelKind, ShallowModel};
use citl::data::NormStats;
use citl::oracle::TargetBlocks;
use citl::{Matrix, RngStream};

pub fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize, sd: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal(0.0, sd)).collect()).unwrap()
}

pub fn log_uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    rng.uniform_in(lo.ln(), hi.ln()).exp()
}

/// Random target blocks with a real k-NN Laplacian.
pub struct RandomTask {
    pub blocks: TargetBlocks,
    pub pen: Penalties,
    pub d: usize,
}

pub fn random_task(rng: &mut RngStream, d: usize, n_tl: usize, n_tu: usize) -> RandomTask {
    let x_tl = random_matrix(rng, n_tl, d, 0.5);
    let x_tu = random_matrix(rng, n_tu, d, 0.5);
    let t_tl = Matrix::from_vec(n_tl, 1, (0..n_tl).map(|_| rng.uniform_in(0.7, 1.0)).collect()).unwrap();
    let t_tu = Matrix::from_vec(n_tu, 1, (0..n_tu).map(|_| rng.uniform_in(0.7, 1.0)).collect()).unwrap();
    let mut x_t = x_tl.clone();
    for i in 0..n_tu {
        x_t.push_row(x_tu.row(i)).unwrap();
    }
    let lap = build_laplacian(&x_t, 1 + (rng.next_u64() % 6) as usize).unwrap();
    let pen = Penalties {
        c_t: log_uniform(rng, 1.0, 1e3),
        c_tu: log_uniform(rng, 0.1, 100.0),
        eta: log_uniform(rng, 0.01, 10.0),
    };
    RandomTask {
        blocks: TargetBlocks { x_tl, t_tl, x_tu, t_tu, lap },
        pen,
        d,
    }
}

impl RandomTask {
    pub fn empty_state(&self) -> GrowthState {
        GrowthState::new(self.blocks.t_tl.clone(), self.blocks.t_tu.clone(), self.blocks.lap.clone()).unwrap()
    }

    pub fn node(&self, c: &Candidate) -> NodeOutputs {
        NodeOutputs::compute(&c.omega, c.bias, Activation::Sigmoid, &self.blocks.x_tl, &self.blocks.x_tu)
    }

    pub fn candidate(&self, rng: &mut RngStream) -> Candidate {
        let gamma = [0.5, 1.0, 5.0][(rng.next_u64() % 3) as usize];
        Candidate::draw(rng, self.d, gamma)
    }

    /// State with `nodes` random nodes appended under `mode`.
    pub fn grown_state(&self, rng: &mut RngStream, nodes: usize, mode: &str) -> (GrowthState, Vec<Candidate>) {
        let reg = UpdateRegistry::standard();
        let rule = reg.get(mode).unwrap();
        let mut st = self.empty_state();
        let mut cands = Vec::new();
        for _ in 0..nodes {
            let c = self.candidate(rng);
            rule.append(&mut st, &self.node(&c), &self.pen).unwrap();
            cands.push(c);
        }
        (st, cands)
    }

    /// Model holding the given nodes and the state's weights.
    pub fn model(&self, cands: &[Candidate], beta: &Matrix) -> ShallowModel {
        let mut m = ShallowModel::empty(ModelKind::Citl, self.d, 1, Activation::Sigmoid, NormStats::identity(self.d));
        for c in cands {
            m.w.push_row(&c.omega).unwrap();
            m.b.push(c.bias);
        }
        m.beta = beta.clone();
        m
    }

    /// Hidden outputs of `cands` on each block, as an L×N matrix.
    pub fn hidden(&self, cands: &[Candidate], x: &Matrix) -> Matrix {
        let mut h = Matrix::zeros(0, x.rows());
        for c in cands {
            h.push_row(&node_output(&c.omega, c.bias, Activation::Sigmoid, x)).unwrap();
        }
        h
    }
}
