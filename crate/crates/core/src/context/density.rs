use crate::types::{Frame, Vec2};

/// Agents per unit area; `None` when the area is not positive.
pub fn global_density(frame: &Frame, area: f64) -> Option<f64> {
    (area > 0.0).then(|| frame.count() as f64 / area)
}

/// Distance from each point to its nearest other point, floored at `floor`.
/// `None` for fewer than two points.
pub fn nearest_neighbor_distances(points: &[Vec2], floor: f64) -> Option<Vec<f64>> {
    if points.len() < 2 {
        return None;
    }
    Some(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
                    .max(floor)
            })
            .collect(),
    )
}

/// Nearest-neighbour adaptive kernel density at `x`, given the frame's
/// positions and their nearest-neighbour distances. Each agent contributes a
/// normalized isotropic Gaussian of std `λ·dᵢ`.
pub fn density_at(x: Vec2, points: &[Vec2], nn: &[f64], lambda: f64) -> f64 {
    points
        .iter()
        .zip(nn)
        .map(|(p, d)| {
            let s2 = (lambda * d).powi(2);
            (-(p - x).norm_squared() / (2.0 * s2)).exp() / s2
        })
        .sum::<f64>()
        / (2.0 * std::f64::consts::PI)
}

/// [`density_at`] from raw positions; `None` for frames with < 2 agents.
pub fn local_density(x: Vec2, points: &[Vec2], lambda: f64, floor: f64) -> Option<f64> {
    let nn = nearest_neighbor_distances(points, floor)?;
    Some(density_at(x, points, &nn, lambda))
}
