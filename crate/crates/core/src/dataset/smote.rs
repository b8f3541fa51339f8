//! SMOTE: synthetic minority oversampling.
//!
//! Each synthetic point is a random interpolation `x + u·(x′ − x)` between
//! a minority point `x` and one of its `k` nearest minority neighbors
//! `x′`, with `u ~ Uniform[0,1]` drawn once per synthetic and applied to
//! every component. Synthetics therefore lie on the chosen segment and
//! never leave the minority class's axis-aligned bounding box.

use alloc::vec::Vec;

use rand::Rng;

use super::DatasetError;
use crate::features::StaticFeatureVector;
use crate::rng;

/// Point on the segment from `x` to `x2` at parameter `u`.
pub fn interpolate(x: &[f64], x2: &[f64], u: f64) -> Vec<f64> {
    x.iter().zip(x2).map(|(&a, &b)| a + u * (b - a)).collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest neighbors of every minority point, by Euclidean
/// distance, ties broken by lower sample index.
fn nearest_neighbors(points: &[StaticFeatureVector], k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|i| {
            let mut order: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                let da = squared_distance(&points[i].values, &points[a].values);
                let db = squared_distance(&points[i].values, &points[b].values);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            order.truncate(k);
            order
        })
        .collect()
}

/// Generate `target − minority.len()` synthetic minority vectors.
pub fn smote(
    minority: &[StaticFeatureVector],
    k_neighbors: usize,
    target: usize,
    seed: u64,
) -> Result<Vec<StaticFeatureVector>, DatasetError> {
    if k_neighbors == 0 {
        return Err(DatasetError::BadParam("k_neighbors must be at least 1"));
    }
    if minority.len() < k_neighbors + 1 {
        return Err(DatasetError::TooFewMinority {
            have: minority.len(),
            need: k_neighbors + 1,
        });
    }
    if target < minority.len() {
        return Err(DatasetError::BadParam("target must be at least the minority size"));
    }
    let dim = minority[0].dim();
    if minority.iter().any(|p| p.dim() != dim) {
        return Err(DatasetError::BadParam("minority vectors differ in length"));
    }

    let needed = target - minority.len();
    if needed == 0 {
        return Ok(Vec::new());
    }

    let neighbors = nearest_neighbors(minority, k_neighbors);
    let mut rng = rng::for_stream(seed, rng::stream::SMOTE);

    let mut out = Vec::with_capacity(needed);
    for _ in 0..needed {
        let i = rng.random_range(0..minority.len());
        let j = neighbors[i][rng.random_range(0..k_neighbors)];
        let u: f64 = rng.random();
        out.push(StaticFeatureVector::new(interpolate(
            &minority[i].values,
            &minority[j].values,
            u,
        )));
    }
    Ok(out)
}
