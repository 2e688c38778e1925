//! Helpers shared by the integration tests.

use igcf::graph::{EmbeddingMatrix, InteractionGraph, PropagationSpec, Propagator};
use igcf::pretrain::{evaluate, Feedback, LossSettings, Observation, VariationalParams};
use igcf::rng::seeded;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_matrix(rng: &mut impl Rng, dim: usize, nodes: usize, scale: f64) -> EmbeddingMatrix {
    let data = (0..dim * nodes)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>();
    EmbeddingMatrix::from_node_major(dim, nodes, data).unwrap()
}

struct Instance {
    propagator: Propagator,
    params: VariationalParams,
    noise: EmbeddingMatrix,
    batch: Vec<Observation>,
    settings: LossSettings,
    node_scale: f64,
}

fn random_instance(seed: u64, feedback: Feedback) -> Instance {
    let mut rng = seeded(seed, 77);
    let m = rng.random_range(1..=6);
    let n = rng.random_range(1..=12 - m);
    let d = rng.random_range(1..=8);
    let depth = rng.random_range(0..=3);
    let mut pairs = Vec::new();
    for u in 0..m {
        for i in 0..n {
            if rng.random::<f64>() < 0.5 {
                pairs.push((u, i));
            }
        }
    }
    pairs.push((0, 0));
    let graph = InteractionGraph::from_pairs(m, n, pairs.iter().copied()).unwrap();
    let spec = match seed % 3 {
        0 => PropagationSpec::lightgcn(depth),
        1 => PropagationSpec::sgcn(depth),
        _ => PropagationSpec::appnp(depth, 0.3),
    };
    let propagator = Propagator::new(&graph.normalize_adjacency(), &spec).unwrap();
    let params = VariationalParams::new(
        random_matrix(&mut rng, d, m + n, 0.7),
        random_matrix(&mut rng, d, m + n, 0.8),
    )
    .unwrap();
    let noise = random_matrix(&mut rng, d, m + n, 1.0);
    let batch = pairs
        .iter()
        .map(|&(user, item)| Observation {
            user,
            item,
            value: match feedback {
                Feedback::Continuous => rng.random_range(0.0..5.0),
                Feedback::Binary => f64::from(rng.random_range(0..2u8)),
            },
        })
        .collect();
    Instance {
        propagator,
        params,
        noise,
        batch,
        settings: LossSettings {
            feedback,
            prior_variance: rng.random_range(0.5..2.0),
            noise_variance: rng.random_range(0.5..2.0),
        },
        node_scale: rng.random_range(0.1..1.0),
    }
}

fn loss_at(inst: &Instance, params: &VariationalParams) -> f64 {
    evaluate(
        params,
        &inst.noise,
        &inst.batch,
        &inst.propagator,
        &inst.settings,
        inst.node_scale,
    )
    .unwrap()
    .loss
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Worst relative error between analytic and central-difference gradients
/// over `instances` random problems.
pub fn max_gradient_error(feedback: Feedback, instances: u64) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let inst = random_instance(seed, feedback);
        let ev = evaluate(
            &inst.params,
            &inst.noise,
            &inst.batch,
            &inst.propagator,
            &inst.settings,
            inst.node_scale,
        )
        .unwrap();
        for which in 0..2 {
            let len = inst.params.mu.as_slice().len();
            let mut fd = vec![0.0; len];
            for (idx, slot) in fd.iter_mut().enumerate() {
                let mut plus = inst.params.clone();
                let mut minus = inst.params.clone();
                let (p, q) = if which == 0 {
                    (&mut plus.mu, &mut minus.mu)
                } else {
                    (&mut plus.rho, &mut minus.rho)
                };
                p.as_mut_slice()[idx] += h;
                q.as_mut_slice()[idx] -= h;
                *slot = (loss_at(&inst, &plus) - loss_at(&inst, &minus)) / (2.0 * h);
            }
            let analytic = if which == 0 { &ev.grad_mu } else { &ev.grad_rho };
            worst = worst.max(relative_error(analytic.as_slice(), &fd));
        }
    }
    worst
}
