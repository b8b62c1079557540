//! Built-in density pairs so experiments and the acceptance suite run with
//! zero external assets.

use rand::Rng;

use crate::grid::{Grid, GridError, ScalarField};

/// Normalizes a nonnegative field to unit mass (`sum rho h^d = 1`).
pub fn normalize_mass(field: &mut ScalarField) {
    let mass = field.mass();
    assert!(mass > 0.0, "cannot normalize a field with zero mass");
    for v in field.values_mut() {
        *v /= mass;
    }
}

/// Unit Dirac pair on a 1-D grid: all mass at `x = 0` versus all at `x = L`.
/// The Beckmann optimum is `L` in balanced mode and `min(L, 2 alpha)` with a
/// source.
pub fn diracs_1d(n: usize) -> Result<(ScalarField, ScalarField), GridError> {
    let grid = Grid::new(1, 1.0, n)?;
    let inv_h = 1.0 / grid.spacing(0);
    let mut r0 = vec![0.0; grid.num_points()];
    let mut r1 = vec![0.0; grid.num_points()];
    r0[0] = inv_h;
    *r1.last_mut().expect("grid has points") = inv_h;
    Ok((
        ScalarField::from_values(&grid, r0)?,
        ScalarField::from_values(&grid, r1)?,
    ))
}

fn gaussian_bump(coords: &[f64], center: &[f64], sigma: f64) -> f64 {
    let d2: f64 = coords
        .iter()
        .zip(center)
        .map(|(x, c)| (x - c) * (x - c))
        .sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Two offset Gaussian blobs on the unit square, each normalized to unit
/// mass. Smooth by construction, so mesh refinement changes them only at
/// `O(h^2)`.
pub fn gaussians_2d(n: usize) -> Result<(ScalarField, ScalarField), GridError> {
    let grid = Grid::new(2, 1.0, n)?;
    let mut r0 = ScalarField::from_fn(&grid, |x| 0.02 + gaussian_bump(x, &[0.25, 0.35], 0.15));
    let mut r1 = ScalarField::from_fn(&grid, |x| 0.02 + gaussian_bump(x, &[0.75, 0.65], 0.15));
    normalize_mass(&mut r0);
    normalize_mass(&mut r1);
    Ok((r0, r1))
}

/// Two filled disks on the unit square, each normalized to unit mass.
pub fn disks_2d(n: usize) -> Result<(ScalarField, ScalarField), GridError> {
    let grid = Grid::new(2, 1.0, n)?;
    let disk = |x: &[f64], cx: f64, cy: f64, r: f64| -> f64 {
        let d2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy);
        if d2 <= r * r {
            1.0
        } else {
            0.0
        }
    };
    let mut r0 = ScalarField::from_fn(&grid, |x| disk(x, 0.3, 0.3, 0.18));
    let mut r1 = ScalarField::from_fn(&grid, |x| disk(x, 0.68, 0.66, 0.22));
    normalize_mass(&mut r0);
    normalize_mass(&mut r1);
    Ok((r0, r1))
}

/// Random equal-mass smooth density pair: a positive baseline plus a few
/// random Gaussian bumps per field, normalized to unit mass.
pub fn random_smooth_pair(
    grid: &Grid,
    rng: &mut impl Rng,
) -> (ScalarField, ScalarField) {
    let dim = grid.dim();
    let make = |rng: &mut dyn rand::RngCore| {
        let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
            .map(|_| {
                let center: Vec<f64> =
                    (0..dim).map(|a| rng.gen_range(0.2..0.8) * grid.length(a)).collect();
                let sigma = rng.gen_range(0.08..0.2);
                let weight = rng.gen_range(0.5..1.5);
                (center, sigma, weight)
            })
            .collect();
        let mut field = ScalarField::from_fn(grid, |x| {
            0.05 + bumps
                .iter()
                .map(|(c, s, w)| w * gaussian_bump(x, c, *s))
                .sum::<f64>()
        });
        normalize_mass(&mut field);
        field
    };
    (make(rng), make(rng))
}

/// Looks up a generator by its command-line name.
pub fn by_name(name: &str, n: usize) -> Option<Result<(ScalarField, ScalarField), GridError>> {
    match name {
        "diracs1d" => Some(diracs_1d(n)),
        "gaussians2d" => Some(gaussians_2d(n)),
        "disks2d" => Some(disks_2d(n)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generators_have_unit_mass() {
        let (r0, r1) = diracs_1d(8).unwrap();
        assert!((r0.mass() - 1.0).abs() < 1e-12);
        assert!((r1.mass() - 1.0).abs() < 1e-12);

        for gen in ["gaussians2d", "disks2d"] {
            let (r0, r1) = by_name(gen, 16).unwrap().unwrap();
            assert!((r0.mass() - 1.0).abs() < 1e-12, "{gen}");
            assert!((r1.mass() - 1.0).abs() < 1e-12, "{gen}");
        }
    }

    #[test]
    fn random_pair_is_positive_and_normalized() {
        let grid = Grid::new(2, 1.0, 12).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (r0, r1) = random_smooth_pair(&grid, &mut rng);
        assert!((r0.mass() - 1.0).abs() < 1e-12);
        assert!((r1.mass() - 1.0).abs() < 1e-12);
        assert!(r0.values().iter().all(|&v| v > 0.0));
        assert!(r1.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn unknown_generator_name() {
        assert!(by_name("nope", 4).is_none());
    }
}
