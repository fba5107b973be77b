use kvbeam::fem::{assemble, build_mesh, AssembledSystem};
use kvbeam::model::DampingProfile;
use kvbeam::ratecalc::{gamma_closed, optimize_gamma, tau_closed};
use kvbeam::resolvent::resolvent_norm;
use kvbeam::timestep::{default_initial_data, simulate};
use num_rational::Ratio;

fn system<T: kvbeam::Real>(n: usize, alpha: f64, kappa: f64) -> AssembledSystem<T> {
    let mesh = build_mesh(n, T::lit(1.0)).unwrap();
    let profile = DampingProfile::pure_power(T::lit(alpha), T::lit(kappa)).unwrap();
    assemble(&mesh, &profile, T::lit(1e-7)).unwrap()
}

#[test]
fn undamped_resolvent_norm_is_inverse_spectral_distance() {
    // Without damping the generator is skew-adjoint in the energy inner product,
    // so the resolvent is normal and its norm is 1 / dist(λ, {±ω_j}).
    let sys = system::<f64>(32, 1.0, 0.0);
    let (eig, _) = sys.generalized_eigen().unwrap();
    for &lambda in &[0.7, 7.3, 55.0, 130.0] {
        let dist = eig.iter().map(|&w2| (lambda - w2.sqrt()).abs().min(lambda + w2.sqrt())).fold(f64::INFINITY, f64::min);
        let est = resolvent_norm(&sys, lambda, 1e-10, 50_000).unwrap();
        assert!((est.norm * dist - 1.0).abs() < 1e-7, "lambda {lambda}: {} vs {}", est.norm, 1.0 / dist);
    }
}

#[test]
fn damping_only_shrinks_the_energy() {
    let free = system::<f64>(32, 1.0, 0.0);
    let damped = system::<f64>(32, 1.0, 1.0);
    let (u0, v0) = default_initial_data(&free);
    let (a, _) = simulate(&free, &u0, &v0, 2.0, 1e-2).unwrap();
    let (b, _) = simulate(&damped, &u0, &v0, 2.0, 1e-2).unwrap();
    assert_eq!(a.energies[0], b.energies[0]);
    assert!(b.energies.last().unwrap() < a.energies.last().unwrap());
}

#[test]
fn single_precision_tracks_double() {
    let s32 = system::<f32>(16, 1.0, 1.0);
    let s64 = system::<f64>(16, 1.0, 1.0);
    let (u, v) = default_initial_data(&s32);
    let (t32, _) = simulate(&s32, &u, &v, 0.5, 1e-2).unwrap();
    let (u, v) = default_initial_data(&s64);
    let (t64, _) = simulate(&s64, &u, &v, 0.5, 1e-2).unwrap();
    for (a, b) in t32.energies.iter().zip(&t64.energies) {
        assert!((*a as f64 - b).abs() <= 1e-4 * b, "{a} vs {b}");
    }
}

#[test]
fn mesh_refinement_converges_energy_history() {
    let coarse = system::<f64>(16, 2.0, 1.0);
    let fine = system::<f64>(32, 2.0, 1.0);
    let finer = system::<f64>(64, 2.0, 1.0);
    let end = |s: &AssembledSystem<f64>| {
        let (u, v) = default_initial_data(s);
        *simulate(s, &u, &v, 0.5, 5e-3).unwrap().0.energies.last().unwrap()
    };
    let (a, b, c) = (end(&coarse), end(&fine), end(&finer));
    assert!((c - b).abs() < (b - a).abs(), "{a} {b} {c}");
}

#[test]
fn exact_rational_rates_and_optimizer_agree() {
    for k in 1..50 {
        let q = Ratio::new(k, 10i64);
        let g = gamma_closed(q).unwrap();
        assert_eq!(g * tau_closed(q).unwrap(), Ratio::from_integer(2));
        let opt = optimize_gamma(k as f64 / 10.0, 1e-6).unwrap();
        let exact = *g.numer() as f64 / *g.denom() as f64;
        assert!((opt.gamma_star - exact).abs() < 5e-3, "alpha {}: {} vs {exact}", k as f64 / 10.0, opt.gamma_star);
    }
}
