//! RBM conditionals, free energies and CD-1 updates against exhaustive
//! enumeration of a toy model (1 pixel + 10 label units, 2 hidden units).

#![allow(clippy::needless_range_loop)]

use nvmsim::nn::{logistic, softplus, RbmConfig, RbmModel, SynapseMode};
use nvmsim::rng::derive_stream;
use rand::Rng;

const NP: usize = 1;
const NV: usize = NP + 10;
const NH: usize = 2;

struct Toy {
    w: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Toy {
    fn random(seed: u64, scale: f64) -> Self {
        let mut rng = derive_stream(seed, &[]);
        let mut draw = |n: usize| {
            (0..n)
                .map(|_| rng.gen_range(-scale..scale))
                .collect::<Vec<f64>>()
        };
        Self {
            w: draw(NV * NH),
            b: draw(NV),
            c: draw(NH),
        }
    }

    fn model(&self, lr: f64) -> RbmModel {
        let cfg = RbmConfig {
            n_pixels: NP,
            n_hidden: NH,
            learning_rate: lr,
            synapse_mode: SynapseMode::IdealReal,
            ..RbmConfig::default()
        };
        RbmModel::from_weights(&cfg, self.w.clone(), self.b.clone(), self.c.clone()).unwrap()
    }

    fn energy(&self, v: &[u8], h: &[u8]) -> f64 {
        let mut e = 0.0;
        for i in 0..NV {
            e -= self.b[i] * v[i] as f64;
            for j in 0..NH {
                e -= v[i] as f64 * self.w[i * NH + j] * h[j] as f64;
            }
        }
        for j in 0..NH {
            e -= self.c[j] * h[j] as f64;
        }
        e
    }

    /// `-ln sum_h exp(-E(v, h))` by enumeration.
    fn free_energy(&self, v: &[u8]) -> f64 {
        -states(NH)
            .iter()
            .map(|h| (-self.energy(v, h)).exp())
            .sum::<f64>()
            .ln()
    }
}

fn states(n: usize) -> Vec<Vec<u8>> {
    (0..1usize << n)
        .map(|m| (0..n).map(|k| ((m >> k) & 1) as u8).collect())
        .collect()
}

#[test]
fn hidden_conditionals_match_enumeration() {
    for seed in 0..5 {
        let toy = Toy::random(seed, 2.0);
        let model = toy.model(0.1);
        for v in states(NV) {
            let weights: Vec<f64> = states(NH)
                .iter()
                .map(|h| (-toy.energy(&v, h)).exp())
                .collect();
            let z: f64 = weights.iter().sum();
            let got = model.hidden_probs(&v);
            for j in 0..NH {
                let want: f64 = states(NH)
                    .iter()
                    .zip(&weights)
                    .filter(|(h, _)| h[j] == 1)
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    / z;
                assert!(
                    (got[j] - want).abs() < 1e-10,
                    "v={v:?} j={j}: {} vs {want}",
                    got[j]
                );
            }
        }
    }
}

#[test]
fn visible_conditionals_match_enumeration() {
    let all_v = states(NV);
    for seed in 0..5 {
        let toy = Toy::random(100 + seed, 2.0);
        let model = toy.model(0.1);
        for h in states(NH) {
            let weights: Vec<f64> = all_v.iter().map(|v| (-toy.energy(v, &h)).exp()).collect();
            let z: f64 = weights.iter().sum();
            let got = model.visible_probs(&h);
            for i in 0..NV {
                let want: f64 = all_v
                    .iter()
                    .zip(&weights)
                    .filter(|(v, _)| v[i] == 1)
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    / z;
                assert!(
                    (got[i] - want).abs() < 1e-10,
                    "h={h:?} i={i}: {} vs {want}",
                    got[i]
                );
            }
        }
    }
}

#[test]
fn free_energies_match_enumeration() {
    for seed in 0..5 {
        let toy = Toy::random(200 + seed, 3.0);
        let model = toy.model(0.1);
        for image in states(NP) {
            let f = model.free_energies(&image);
            for (l, fl) in f.iter().enumerate() {
                let mut v = image.clone();
                v.extend((0..10).map(|k| u8::from(k == l)));
                let want = toy.free_energy(&v);
                assert!(
                    (fl - want).abs() < 1e-10 * want.abs().max(1.0),
                    "{fl} vs {want}"
                );
            }
        }
    }
}

#[test]
fn label_posterior_is_softmax_of_negative_free_energy() {
    let toy = Toy::random(300, 2.0);
    let model = toy.model(0.1);
    for image in states(NP) {
        let f = model.free_energies(&image);
        let m = f.iter().copied().fold(f64::INFINITY, f64::min);
        let z: f64 = f.iter().map(|x| (m - x).exp()).sum();
        // Joint probability of each clamped one-hot label, by enumeration over h.
        let joint: Vec<f64> = (0..10)
            .map(|l| {
                let mut v = image.clone();
                v.extend((0..10).map(|k| u8::from(k == l)));
                states(NH).iter().map(|h| (-toy.energy(&v, h)).exp()).sum()
            })
            .collect();
        let jz: f64 = joint.iter().sum();
        for l in 0..10 {
            assert!(((m - f[l]).exp() / z - joint[l] / jz).abs() < 1e-10);
        }
    }
}

/// Central difference of the enumerated free energy in one weight.
fn dfree_dw(toy: &Toy, v: &[u8], k: usize) -> f64 {
    let h = 1e-5;
    let mut plus = Toy {
        w: toy.w.clone(),
        b: toy.b.clone(),
        c: toy.c.clone(),
    };
    let mut minus = Toy {
        w: toy.w.clone(),
        b: toy.b.clone(),
        c: toy.c.clone(),
    };
    plus.w[k] += h;
    minus.w[k] -= h;
    (plus.free_energy(v) - minus.free_energy(v)) / (2.0 * h)
}

fn dfree_dc(toy: &Toy, v: &[u8], j: usize) -> f64 {
    let h = 1e-5;
    let mut plus = Toy {
        w: toy.w.clone(),
        b: toy.b.clone(),
        c: toy.c.clone(),
    };
    let mut minus = Toy {
        w: toy.w.clone(),
        b: toy.b.clone(),
        c: toy.c.clone(),
    };
    plus.c[j] += h;
    minus.c[j] -= h;
    (plus.free_energy(v) - minus.free_energy(v)) / (2.0 * h)
}

#[test]
fn cd1_update_is_the_finite_difference_of_the_cd_surrogate() {
    // The CD-1 update is lr * (-dF(v_data)/dW + dF(v_recon)/dW). The
    // reconstruction is recovered from the visible-bias update.
    let lr = 0.1;
    let toy = Toy::random(400, 1.5);
    let model = toy.model(lr);
    let mut rng = derive_stream(401, &[]);
    for v in states(NV) {
        let g = model.cd_step(&v, &mut rng);
        let recon: Vec<u8> = (0..NV)
            .map(|i| {
                let d = v[i] as f64 - g.visible[i] / lr;
                assert!(
                    d.abs() < 1e-12 || (d - 1.0).abs() < 1e-12,
                    "non-binary reconstruction {d}"
                );
                d.round() as u8
            })
            .collect();
        for i in 0..NV {
            for j in 0..NH {
                let k = i * NH + j;
                let want = lr * (-dfree_dw(&toy, &v, k) + dfree_dw(&toy, &recon, k));
                assert!(
                    (g.weight(i, j) - want).abs() < 1e-7,
                    "dW[{i},{j}] {} vs {want}",
                    g.weight(i, j)
                );
            }
        }
        for j in 0..NH {
            let want = lr * (-dfree_dc(&toy, &v, j) + dfree_dc(&toy, &recon, j));
            assert!((g.hidden[j] - want).abs() < 1e-7);
        }
    }
}

#[test]
fn activations_are_overflow_safe() {
    for x in [-500.0, -40.0, 0.0, 40.0, 500.0] {
        let p = logistic(x);
        assert!(p > 0.0 && p < 1.0, "logistic({x}) = {p}");
        let s = softplus(x);
        assert!(s.is_finite() && s >= 0.0);
    }
    assert_eq!(logistic(0.0), 0.5);
    assert!((softplus(500.0) - 500.0).abs() < 1e-12);
    assert!(softplus(-500.0) > 0.0 && softplus(-500.0) < 1e-200);
}
