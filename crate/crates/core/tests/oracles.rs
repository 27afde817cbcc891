//! Engine results checked against closed-form population dynamics.
//!
//! With `H_j = ω_j K` and a secular bath, each stroke relaxes the excited
//! population exponentially with rate `λE(1 + 2n̄(E))|⟨e|σ_x|g⟩|²(1 + d)²`,
//! so every quantity below follows from scalar exponentials.

use approx::assert_abs_diff_eq;
use ottoforge_core::disorder::{disorder_averaged_efficiency, DisorderDistribution};
use ottoforge_core::engine::{run_engine, EngineSpec, Variant};

fn occupation(energy: f64, temperature: f64) -> f64 {
    1.0 / ((energy / temperature).exp() - 1.0)
}

fn equilibrium_magnetization(energy: f64, temperature: f64) -> f64 {
    -0.5 * (energy / (2.0 * temperature)).tanh()
}

struct Oracle {
    gap1: f64,
    gap2: f64,
    t_hot: f64,
    t_cold: f64,
    weight: f64,
    lambda: f64,
}

impl Oracle {
    fn baseline(omega1: f64, omega2: f64, t_hot: f64, t_cold: f64) -> Self {
        Self {
            gap1: omega1,
            gap2: omega2,
            t_hot,
            t_cold,
            weight: 1.0,
            lambda: 0.1,
        }
    }

    fn rate(&self, gap: f64, temperature: f64, d: f64) -> f64 {
        self.lambda * gap * (1.0 + 2.0 * occupation(gap, temperature)) * self.weight * (1.0 + d).powi(2)
    }

    /// Efficiencies of the first `cycles` cycles. `s_start` is the initial
    /// spin projection on the eigen-axis of `K`.
    fn efficiencies(&self, s_start: f64, t: f64, d: f64, cycles: usize) -> Vec<f64> {
        let eta_s = 1.0 - self.gap2 / self.gap1;
        let hot_eq = equilibrium_magnetization(self.gap1, self.t_hot);
        let cold_eq = equilibrium_magnetization(self.gap2, self.t_cold);
        let a = (-self.rate(self.gap1, self.t_hot, d) * t).exp();
        let b = (-self.rate(self.gap2, self.t_cold, d) * t).exp();
        let mut s1 = s_start;
        let mut out = Vec::new();
        for _ in 0..cycles {
            let s2 = hot_eq + (s1 - hot_eq) * a;
            let s3 = cold_eq + (s2 - cold_eq) * b;
            out.push(eta_s * (s2 - s3) / (s2 - s1));
            s1 = s3;
        }
        out
    }
}

#[test]
fn baseline_cycles_follow_population_recursion() {
    for (w1, w2, th, tc) in [(8.0, 6.0, 1.0, 0.25), (24.0, 18.0, 3.0, 0.75)] {
        let oracle = Oracle::baseline(w1, w2, th, tc);
        for t in [0.3, 1.0, 2.5] {
            let spec = EngineSpec::new(w1, w2, th, tc).with_stroke_time(t);
            let run = run_engine(&spec, 8).unwrap();
            let expected = oracle.efficiencies(equilibrium_magnetization(w2, tc), t, 0.0, 8);
            for (record, eta) in run.cycles.iter().zip(expected) {
                assert_abs_diff_eq!(record.efficiency.unwrap(), eta, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn cold_start_first_cycle_closed_form() {
    let spec = EngineSpec::new(24.0, 18.0, 3.0, 0.75);
    let gamma = 0.1 * 18.0 * (1.0 + 2.0 * occupation(18.0, 0.75));
    for t in [0.1, 0.5, 1.0, 4.0] {
        let run = run_engine(&spec.with_stroke_time(t), 1).unwrap();
        let eta = 0.25 * (1.0 - (-gamma * t).exp());
        assert_abs_diff_eq!(run.cycles[0].efficiency.unwrap(), eta, epsilon = 1e-9);
    }
}

#[test]
fn warm_start_second_cycle() {
    let spec = EngineSpec::new(24.0, 18.0, 3.0, 0.75).with_initial_temperature(2.15);
    let oracle = Oracle::baseline(24.0, 18.0, 3.0, 0.75);
    let s0 = equilibrium_magnetization(18.0, 2.15);
    for t in [0.25, 0.5, 1.0] {
        let run = run_engine(&spec.with_stroke_time(t), 2).unwrap();
        let expected = oracle.efficiencies(s0, t, 0.0, 2);
        assert_abs_diff_eq!(run.cycles[1].efficiency.unwrap(), expected[1], epsilon = 1e-9);
    }
}

#[test]
fn transverse_first_cycle_uses_tilted_gap() {
    for big_lambda in [2.0, 4.0, 16.0] {
        let r = (1.0_f64 + 4.0 / (big_lambda * big_lambda)).sqrt();
        let cos_sq = 1.0 / (r * r);
        let oracle = Oracle {
            gap1: 8.0 * r,
            gap2: 6.0 * r,
            t_hot: 1.0,
            t_cold: 0.25,
            weight: cos_sq,
            lambda: 0.1,
        };
        let spec = EngineSpec::new(8.0, 6.0, 1.0, 0.25)
            .with_variant(Variant::Transverse { big_lambda })
            .with_stroke_time(1.0);
        let run = run_engine(&spec, 3).unwrap();
        let expected = oracle.efficiencies(equilibrium_magnetization(6.0 * r, 0.25), 1.0, 0.0, 3);
        // Rounding in the tilted basis leaves ~1e-9 of dt-independent noise.
        for (record, eta) in run.cycles.iter().zip(expected) {
            assert_abs_diff_eq!(record.efficiency.unwrap(), eta, epsilon = 1e-8);
        }
    }
}

#[test]
fn disorder_average_closed_form() {
    let spec = EngineSpec::new(24.0, 18.0, 3.0, 0.75).with_stroke_time(1.0);
    let oracle = Oracle::baseline(24.0, 18.0, 3.0, 0.75);
    let s0 = equilibrium_magnetization(18.0, 0.75);
    for delta in [0.0, 0.3, 0.9] {
        let expected: f64 = [(-delta, 0.05), (0.0, 0.9), (delta, 0.05)]
            .iter()
            .map(|&(d, w)| w * oracle.efficiencies(s0, 1.0, d, 1)[0])
            .sum();
        let got = disorder_averaged_efficiency(&spec, &DisorderDistribution::new(delta, 0.9)).unwrap();
        assert_abs_diff_eq!(got.averaged_efficiency.unwrap(), expected, epsilon = 1e-9);
    }
}
