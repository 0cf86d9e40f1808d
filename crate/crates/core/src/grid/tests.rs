use super::*;
use crate::rng::CounterRng;

fn random_field(grid: &Arc<WaveguideGrid>, seed: u64) -> Field {
    let mut rng = CounterRng::new(seed, 0);
    let mut f = Field::zeros(grid, Space::Physical);
    for v in f.values_mut() {
        let (re, im) = rng.next_complex_gaussian();
        *v = Complex64::new(re, im);
    }
    f
}

#[test]
fn dual_lattice_is_integer_when_l_is_pi() {
    let grid = make_grid(1, 1, PI, 8, 8).unwrap();
    let mut xs: Vec<f64> = grid.euclid_freqs().to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(xs, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    let mut eta: Vec<i64> = grid.torus_freqs().to_vec();
    eta.sort_unstable();
    assert_eq!(eta, vec![-4, -3, -2, -1, 0, 1, 2, 3]);
}

#[test]
fn degenerate_torus_dimension() {
    let grid = make_grid(1, 0, 1.0, 8, 0).unwrap();
    assert!(grid.torus_freqs().is_empty());
    assert_eq!(grid.len(), 8);
}

#[test]
fn point_count_and_cell_volume() {
    let grid = make_grid(2, 1, 16.0, 128, 16).unwrap();
    assert_eq!(grid.len(), 128 * 128 * 16);
    let expected = (32.0f64 / 128.0).powi(2) * (2.0 * PI / 16.0);
    assert!((grid.cell_volume() - expected).abs() < 1e-15);
    assert!(grid.cell_volume() > 0.0);
}

#[test]
fn rejects_bad_parameters() {
    assert!(make_grid(1, 0, 1.0, 7, 0).is_err());
    assert!(make_grid(1, 1, 1.0, 8, 10).is_ok());
    assert!(make_grid(1, 1, 1.0, 8, 9).is_err());
    assert!(make_grid(1, 0, 0.0, 8, 0).is_err());
    assert!(make_grid(1, 0, -2.0, 8, 0).is_err());
    assert!(make_grid(0, 1, 1.0, 8, 8).is_err());
}

#[test]
fn frequency_lattice_symmetric_up_to_nyquist() {
    let grid = make_grid(1, 1, 3.0, 16, 8).unwrap();
    for freqs in [grid.euclid_freqs().to_vec()] {
        let mut sorted = freqs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // every frequency except the unpaired Nyquist mode has its negative
        for &f in &sorted {
            if f == *sorted.first().unwrap() {
                continue;
            }
            assert!(
                sorted.iter().any(|&g| (g + f).abs() < 1e-12),
                "no partner for {f}"
            );
        }
    }
}

#[test]
fn constant_field_concentrates_on_zero_mode() {
    let grid = make_grid(2, 1, 4.0, 8, 8).unwrap();
    let c = Complex64::new(1.25, -0.5);
    let f = sample_function(&grid, |_, _| c);
    let hat = f.forward_transform().unwrap();
    let vol = (2.0 * 4.0f64).powi(2) * 2.0 * PI;
    for (flat, v) in hat.values().iter().enumerate() {
        if flat == 0 {
            assert!((v - c * vol).norm() < 1e-9 * vol);
        } else {
            assert!(v.norm() < 1e-10 * vol, "mode {flat} has {v}");
        }
    }
}

#[test]
fn lattice_plane_wave_is_one_coefficient() {
    let grid = make_grid(1, 1, 5.0, 16, 8).unwrap();
    let k = grid.euclid_freqs()[3];
    let eta = 2.0;
    let f = sample_function(&grid, |x, y| {
        Complex64::from_polar(1.0, k * x[0] + eta * y[0])
    });
    let hat = f.forward_transform().unwrap();
    let vol = 2.0 * 5.0 * 2.0 * PI;
    let target = 3 * grid.strides()[0] + 2 * grid.strides()[1];
    for (flat, v) in hat.values().iter().enumerate() {
        if flat == target {
            assert!((v.norm() - vol).abs() < 1e-12 * vol);
        } else {
            assert!(v.norm() <= 1e-13 * vol, "mode {flat} has norm {}", v.norm());
        }
    }
}

#[test]
fn pure_torus_mode() {
    let grid = make_grid(1, 1, 2.0, 8, 8).unwrap();
    let f = sample_function(&grid, |_, y| Complex64::from_polar(1.0, y[0]));
    let hat = f.forward_transform().unwrap();
    let target = grid.strides()[1]; // eta = +1 bin
    let vol = 2.0 * 2.0 * 2.0 * PI;
    for (flat, v) in hat.values().iter().enumerate() {
        if flat == target {
            assert!((v.norm() - vol).abs() < 1e-12 * vol);
        } else {
            assert!(v.norm() <= 1e-13 * vol);
        }
    }
}

#[test]
fn round_trip_and_plancherel() {
    for (d, n, nx, ny) in [(1, 0, 16, 0), (1, 1, 16, 8), (2, 1, 12, 8), (3, 0, 8, 0)] {
        let grid = make_grid(d, n, 3.7, nx, ny).unwrap();
        let f = random_field(&grid, 11 + d as u64);
        let hat = f.forward_transform().unwrap();
        let back = hat.inverse_transform().unwrap();
        let norm = f.l2();
        assert!(
            back.distance_l2(&f).unwrap() <= 1e-12 * norm,
            "round trip failed for d={d} n={n}"
        );
        assert!(
            (hat.l2() - norm).abs() <= 1e-12 * norm,
            "Plancherel failed for d={d} n={n}: {} vs {}",
            hat.l2(),
            norm
        );
    }
}

#[test]
fn zero_closure_gives_zero_field() {
    let grid = make_grid(1, 1, 1.0, 8, 8).unwrap();
    let f = sample_function(&grid, |_, _| Complex64::new(0.0, 0.0));
    assert_eq!(f.l2(), 0.0);
}

/// Adaptive Simpson quadrature, the independent oracle for sampled masses.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
    }
    rec(f, a, b, simpson(f, a, b), tol, 40)
}

#[test]
fn gaussian_mass_matches_quadrature_oracle() {
    // mass(u) = ∫ |e^{-|x|²}|² dx dy over the box times the full torus
    let l = 16.0;
    for d in [1usize, 2] {
        let grid = make_grid(d, 1, l, 128, 8).unwrap();
        let f = sample_function(&grid, |x, _| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new((-r2).exp(), 0.0)
        });
        let one_axis = adaptive_simpson(&|x: f64| (-2.0 * x * x).exp(), -l, l, 1e-14);
        let expected = one_axis.powi(d as i32) * 2.0 * PI;
        let mass = f.l2().powi(2);
        assert!(
            (mass - expected).abs() <= 1e-10 * expected,
            "d={d}: {mass} vs {expected}"
        );
    }
}

#[test]
fn leak_of_compact_bump_is_zero() {
    let grid = make_grid(1, 0, 8.0, 64, 0).unwrap();
    let f = sample_function(&grid, |x, _| {
        if x[0].abs() < 2.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    assert_eq!(boundary_leak(&f, 0.5).unwrap(), 0.0);
}

#[test]
fn leak_of_uniform_field_matches_window() {
    let grid = make_grid(1, 0, 8.0, 64, 0).unwrap();
    let f = sample_function(&grid, |_, _| Complex64::new(1.0, 0.0));
    let leak = boundary_leak(&f, 0.5).unwrap();
    assert!((leak - 0.5).abs() < 1e-15, "leak {leak}");
    assert!(boundary_leak(&f, 0.0).is_err());
    assert!(boundary_leak(&f, 1.0).is_err());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let grid = make_grid(2, 1, 2.5, 8, 8).unwrap();
    let f = random_field(&grid, 99);
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &f, 1.25).unwrap();
    let (g, header) = read_checkpoint(&mut buf.as_slice()).unwrap();
    assert_eq!(header.time, 1.25);
    assert_eq!(header.nx, 8);
    for (a, b) in f.values().iter().zip(g.values()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
    // writing the reread field reproduces the byte stream exactly
    let mut buf2 = Vec::new();
    write_checkpoint(&mut buf2, &g, 1.25).unwrap();
    assert_eq!(buf, buf2);
}

#[test]
fn space_mismatch_is_rejected() {
    let grid = make_grid(1, 0, 1.0, 8, 0).unwrap();
    let f = Field::zeros(&grid, Space::Spectral);
    assert!(f.forward_transform().is_err());
    let g = Field::zeros(&grid, Space::Physical);
    assert!(g.inverse_transform().is_err());
}
