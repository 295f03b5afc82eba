// Cross-cutting identities of the Nystrom/Schmidt formalism: the three
// decomposition routes agree, unitary Fourier conjugation is spectrum
// neutral, the threshold capacity is monotone in theta, and kernel
// constructors stay finite over a randomized parameter sweep.
use memcap::grid::{gauss_legendre_grid, uniform_grid, Axis};
use memcap::kernel::{
    raman_storage_kernel, tcrib_total_kernel, DiscretizedKernel, KernelKind,
};
use memcap::protocol::{Protocol, ProtocolSpec};
use memcap::schmidt::{
    antinormal_product, capacity, fourier_conjugate, hermitian_eigen_spectrum, normal_product,
    singular_spectrum, ConjugateAxis, FourierSign,
};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

/// Top-`take` relative agreement between sigma^2 and both product eigen
/// routes; values below `floor` are skipped (pure roundoff modes).
fn assert_three_routes_agree(kernel: &DiscretizedKernel, take: usize, tol: f64) {
    let s = singular_spectrum(kernel).unwrap();
    let en = hermitian_eigen_spectrum(&normal_product(kernel).unwrap()).unwrap();
    let ea = hermitian_eigen_spectrum(&antinormal_product(kernel).unwrap()).unwrap();
    let floor = s.values[0] * s.values[0] * 1e-10;
    for i in 0..take.min(s.values.len()) {
        let s2 = s.values[i] * s.values[i];
        if s2 < floor {
            break;
        }
        let rn = (s2 - en.values[i]).abs() / s2;
        let ra = (s2 - ea.values[i]).abs() / s2;
        assert!(rn < tol, "mode {i}: sigma^2={s2:e} vs K_N eigen={:e}", en.values[i]);
        assert!(ra < tol, "mode {i}: sigma^2={s2:e} vs K_A eigen={:e}", ea.values[i]);
    }
}

#[test]
fn decomposition_routes_agree_on_the_raman_kernel() {
    let d = 300.0;
    let spec = ProtocolSpec::raman_reference(d, d / 77.0);
    let kstar = (d / 90.0).sqrt();
    let kgrid = uniform_grid(41, kstar - 3.0, kstar + 3.0, Axis::SpatialFrequency).unwrap();
    let tgrid = uniform_grid(201, -0.3, 0.3, Axis::Time).unwrap();
    let kernel = raman_storage_kernel(&spec, &kgrid, &tgrid).unwrap();
    assert_three_routes_agree(&kernel, 20, 1e-8);
}

#[test]
fn fourier_conjugation_preserves_singular_values() {
    let spec = ProtocolSpec::new(Protocol::Tcrib, 100.0).with_delta0(180.0);
    let wgrid = uniform_grid(201, -110.0, 110.0, Axis::Frequency).unwrap();
    let kernel = tcrib_total_kernel(&spec, &wgrid).unwrap();
    let base = singular_spectrum(&kernel).unwrap();
    for (axis, sign) in [
        (ConjugateAxis::Row, FourierSign::Forward),
        (ConjugateAxis::Col, FourierSign::Inverse),
    ] {
        let conj = fourier_conjugate(&kernel, axis, sign).unwrap();
        let spectrum = singular_spectrum(&conj).unwrap();
        for (a, b) in base.values.iter().zip(&spectrum.values) {
            assert!(
                (a - b).abs() <= 1e-10 * base.values[0],
                "sigma drifted under {axis:?}/{sign:?}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn capacity_is_monotone_in_theta() {
    let spec = ProtocolSpec::new(Protocol::Unbroadened, 400.0);
    let spectrum =
        memcap::study::spectrum_for(&spec, &memcap::study::GridConfig::default()).unwrap();
    let mut last = usize::MAX;
    for theta in [0.05, 0.2, 0.4, 0.6, 0.7, 0.8, 0.95, 0.999999] {
        let n = capacity(&spectrum, theta).unwrap().n_modes;
        assert!(n <= last, "capacity grew from {last} to {n} at theta={theta}");
        last = n;
    }
    assert_eq!(last, 0, "theta -> 1 forces N = 0");
}

fn storage_kernel_from(values: Vec<(f64, f64)>, n: usize) -> DiscretizedKernel {
    let rows = gauss_legendre_grid(n, 0.0, 1.0, Axis::Position).unwrap();
    let cols = gauss_legendre_grid(n, -0.5, 0.5, Axis::Time).unwrap();
    let mut m = Array2::zeros((n, n));
    for (idx, (re, im)) in values.into_iter().enumerate() {
        m[[idx / n, idx % n]] = Complex64::new(re, im);
    }
    DiscretizedKernel::new(m, rows, cols, KernelKind::Storage, "random".into()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_routes_agree_on_random_kernels(
        values in prop::collection::vec((-1.0_f64..1.0, -1.0_f64..1.0), 144)
    ) {
        let kernel = storage_kernel_from(values, 12);
        assert_three_routes_agree(&kernel, 12, 1e-8);
    }

    #[test]
    fn kernel_constructors_stay_finite(
        d in 1.0_f64..2000.0,
        frac in 0.0_f64..10.0,
    ) {
        let delta0 = frac * d;
        let spec = ProtocolSpec::new(Protocol::Tcrib, d).with_delta0(delta0);
        let w = 0.5 * delta0 + 20.0;
        let wgrid = uniform_grid(31, -w, w, Axis::Frequency).unwrap();
        let kernel = tcrib_total_kernel(&spec, &wgrid).unwrap();
        prop_assert!(kernel.values.iter().all(|v| v.is_finite()));

        let rspec = ProtocolSpec::raman_reference(d, delta0);
        let kstar = (d / 90.0).sqrt();
        for (k, tau) in [(kstar, 0.0), (kstar + 1.0, -0.2), (0.5 * kstar, 0.1)] {
            let v = memcap::kernel::raman_kernel_value(&rspec, k, tau);
            prop_assert!(v.is_finite(), "raman value at ({k}, {tau}) not finite");
        }
    }
}
