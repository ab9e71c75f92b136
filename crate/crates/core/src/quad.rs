//! Gauss–Legendre quadrature rules.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Nodes are computed by Newton iteration on the Legendre polynomial from the
/// Chebyshev initial guess; accurate to machine precision for the moderate
/// orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Initial guess (Chebyshev-like), roots ordered descending then mirrored.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Ascending node order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights on an arbitrary interval `[a, b]` (signed: `a > b` gives
/// negative weights, matching the oriented integral).
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let nodes = x.iter().map(|&t| mid + half * t).collect();
    let weights = w.iter().map(|&t| half * t).collect();
    (nodes, weights)
}

/// Composite rule: `[a, b]` split into panels of length at most `max_len`,
/// `n` points each.
pub fn composite_gauss_on(n: usize, a: f64, b: f64, max_len: f64) -> (Vec<f64>, Vec<f64>) {
    let len = (b - a).abs();
    let panels = (len / max_len).ceil().max(1.0) as usize;
    let mut nodes = Vec::with_capacity(panels * n);
    let mut weights = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let pa = a + (b - a) * p as f64 / panels as f64;
        let pb = a + (b - a) * (p + 1) as f64 / panels as f64;
        let (x, w) = gauss_legendre_on(n, pa, pb);
        nodes.extend(x);
        weights.extend(w);
    }
    (nodes, weights)
}
