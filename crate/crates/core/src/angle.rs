use std::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Weighted circular mean; `None` when the resultant vector vanishes.
pub fn circular_mean<I>(angles_and_weights: I) -> Option<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (s, c) = angles_and_weights
        .into_iter()
        .fold((0.0, 0.0), |(s, c), (a, w)| (s + w * a.sin(), c + w * a.cos()));
    if s == 0.0 && c == 0.0 {
        None
    } else {
        Some(s.atan2(c))
    }
}
