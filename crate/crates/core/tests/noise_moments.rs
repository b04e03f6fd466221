use dynfleet::domain::OdPair;
use dynfleet::noise::{draw_noise, make_noise_spec, raw_moment, raw_moment_by_quadrature, standardized_moments, Family};

#[test]
fn quadrature_agrees_with_closed_forms() {
    for family in Family::ALL {
        for sigma in [0.5, 1.0, 2.0, 3.0] {
            let spec = make_noise_spec(family, sigma).unwrap();
            for order in 1..=4 {
                let a = raw_moment(&spec, order);
                let b = raw_moment_by_quadrature(&spec, order);
                assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()), "{family} {sigma} order {order}: {a} vs {b}");
            }
            // Raw moments are of the variable before its mean is removed.
            let m1 = raw_moment(&spec, 1);
            assert!((m1 - spec.shift).abs() < 1e-9 * (1.0 + m1.abs()));
            assert!((raw_moment(&spec, 2) - m1 * m1 - sigma * sigma).abs() < 1e-9 * (1.0 + sigma * sigma));
        }
    }
}

#[test]
fn negated_families_mirror_odd_moments() {
    for (f, g) in [(Family::Exponential, Family::NegExponential), (Family::Weibull, Family::NegWeibull)] {
        for sigma in [0.5, 2.0] {
            let a = make_noise_spec(f, sigma).unwrap();
            let b = make_noise_spec(g, sigma).unwrap();
            assert!((raw_moment(&a, 3) + raw_moment(&b, 3)).abs() < 1e-9);
            assert!((raw_moment(&a, 4) - raw_moment(&b, 4)).abs() < 1e-9);
            let (sa, _) = standardized_moments(&a);
            let (sb, _) = standardized_moments(&b);
            assert!((sa + sb).abs() < 1e-9);
        }
    }
}

#[test]
fn draws_match_the_moments() {
    let n = 400_000;
    for family in Family::ALL {
        let spec = make_noise_spec(family, 1.5).unwrap();
        let draws: Vec<f64> = (0..n).map(|h| draw_noise(&spec, h, OdPair::new(1, 2), 9).epsilon).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|e| e * e).sum::<f64>() / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "{family}: mean {mean}");
        assert!((var.sqrt() - 1.5).abs() < 0.02, "{family}: sd {}", var.sqrt());
    }
}

#[test]
fn draws_are_keyed_on_the_cell() {
    let spec = make_noise_spec(Family::Uniform, 1.0).unwrap();
    let a = draw_noise(&spec, 3, OdPair::new(0, 1), 5).epsilon;
    assert_eq!(a, draw_noise(&spec, 3, OdPair::new(0, 1), 5).epsilon);
    assert_ne!(a, draw_noise(&spec, 4, OdPair::new(0, 1), 5).epsilon);
    assert_ne!(a, draw_noise(&spec, 3, OdPair::new(1, 0), 5).epsilon);
    assert_ne!(a, draw_noise(&spec, 3, OdPair::new(0, 1), 6).epsilon);
}
