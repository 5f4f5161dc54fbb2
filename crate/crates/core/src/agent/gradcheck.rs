use ndarray::Array1;
use rand::Rng;

use super::{actor_loss_grad, critic_loss_grad, td_error, Experience, Heads, Mlp};

/// Worst relative errors between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checks: usize,
    pub worst_actor: f64,
    pub worst_critic: f64,
}

const STEP: f64 = 1e-6;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn random_batch<R: Rng + ?Sized>(rng: &mut R, inputs: usize, slots: usize) -> Vec<Experience> {
    (0..4)
        .map(|_| {
            let state = Array1::from_shape_fn(inputs, |_| rng.random_range(-1.0..1.0));
            let next_state = Array1::from_shape_fn(inputs, |_| rng.random_range(-1.0..1.0));
            let action: Vec<f64> = (0..slots).map(|_| rng.random_range(-2.5..2.5)).collect();
            Experience {
                state,
                raw_action: action.clone(),
                scored_action: action,
                action: vec![1; slots],
                reward: rng.random_range(-1.0..3.0),
                next_state,
                terminal: rng.random_bool(0.25),
                td_at_store: 0.0,
            }
        })
        .collect()
}

fn semi_gradient_loss(critic: &Mlp, batch: &[&Experience], targets: &[f64]) -> f64 {
    batch
        .iter()
        .zip(targets)
        .map(|(e, y)| {
            let v = critic.forward_one(e.state.view()).expect("dims")[0];
            (y - v).powi(2)
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Compare the actor and critic loss gradients against central finite
/// differences on random networks with two hidden units, `checks` random
/// parameters each.
pub fn check_loss_gradients<R: Rng + ?Sized>(rng: &mut R, checks: usize) -> GradCheckReport {
    let inputs = 3;
    let slots = 2;
    let heads = Heads::default();
    let gamma = 0.9;
    let mut worst_actor: f64 = 0.0;
    let mut worst_critic: f64 = 0.0;
    for _ in 0..checks {
        let actor = Mlp::new(&[inputs, 2, 2 * slots], rng).expect("sizes");
        let critic = Mlp::new(&[inputs, 2, 1], rng).expect("sizes");
        let owned = random_batch(rng, inputs, slots);
        let batch: Vec<&Experience> = owned.iter().collect();

        // critic: targets are held fixed, as in the semi-gradient update
        let (_, grads, _) = critic_loss_grad(&critic, &batch, gamma).expect("batch");
        let targets: Vec<f64> = batch
            .iter()
            .map(|e| {
                let v_next = critic.forward_one(e.next_state.view()).expect("dims")[0];
                td_error(0.0, v_next, e.reward, gamma, e.terminal)
            })
            .collect();
        let params = critic.flat_params();
        let i = rng.random_range(0..params.len());
        let mut probe = critic.clone();
        let mut p = params.clone();
        p[i] += STEP;
        probe.set_flat_params(&p).expect("len");
        let up = semi_gradient_loss(&probe, &batch, &targets);
        p[i] -= 2.0 * STEP;
        probe.set_flat_params(&p).expect("len");
        let down = semi_gradient_loss(&probe, &batch, &targets);
        let numeric = (up - down) / (2.0 * STEP);
        worst_critic = worst_critic.max(rel_err(grads.flat()[i], numeric));

        // actor: TD weights are constants
        let deltas: Vec<f64> = (0..batch.len())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let (_, grads) = actor_loss_grad(&actor, &heads, &batch, &deltas).expect("batch");
        let params = actor.flat_params();
        let i = rng.random_range(0..params.len());
        let loss_at = |p: &[f64]| {
            let mut net = actor.clone();
            net.set_flat_params(p).expect("len");
            actor_loss_grad(&net, &heads, &batch, &deltas)
                .expect("batch")
                .0
        };
        let mut p = params.clone();
        p[i] += STEP;
        let up = loss_at(&p);
        p[i] -= 2.0 * STEP;
        let down = loss_at(&p);
        let numeric = (up - down) / (2.0 * STEP);
        worst_actor = worst_actor.max(rel_err(grads.flat()[i], numeric));
    }
    GradCheckReport {
        checks,
        worst_actor,
        worst_critic,
    }
}
