//! Uniform-grid cubic Hermite tables.
//!
//! Used for quantities that are expensive to compute pointwise but sit in
//! per-step loops: the log-density of the invariant law, its CDF, and the
//! primitives of `1/(σ² h)`. Knot slopes are exact derivatives, so the
//! interpolant is C¹ with O(step⁴) error.

/// 5-point Gauss–Legendre nodes and weights on [-1, 1].
pub(crate) const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Gauss–Legendre 5-point rule on `[a, b]`.
pub(crate) fn gauss5<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for &(node, weight) in GL5.iter() {
        acc += weight * f(mid + half * node);
    }
    acc * half
}

#[derive(Debug, Clone)]
pub struct HermiteTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    /// Table from knot values and slopes at `lo + k·step`.
    pub fn new(lo: f64, step: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(values.len() == slopes.len() && values.len() >= 2);
        assert!(step > 0.0);
        Self { lo, step, values, slopes }
    }

    /// Cumulative integral `start + ∫_lo^y g` tabulated on `cells` uniform cells.
    pub fn cumulative<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, cells: usize, start: f64) -> Self {
        let step = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        let mut slopes = Vec::with_capacity(cells + 1);
        let mut acc = super::NeumaierSum::new();
        acc.add(start);
        values.push(start);
        slopes.push(g(lo));
        for k in 0..cells {
            let a = lo + k as f64 * step;
            let b = lo + (k + 1) as f64 * step;
            acc.add(gauss5(&mut g, a, b));
            values.push(acc.value());
            slopes.push(g(b));
        }
        Self::new(lo, step, values, slopes)
    }

    /// `∫_origin^y g` on `[lo, hi] ∋ origin`, cumulated outward from
    /// `origin` so values near it keep full precision and a kink of `g` at
    /// `origin` falls on a knot. A side stops early where the running integral
    /// or `g` leaves `f64` range; check [`Self::lo`] and [`Self::hi`].
    pub fn anchored<G: Fn(f64) -> f64>(g: G, origin: f64, lo: f64, hi: f64, step: f64) -> Self {
        let side = |direction: f64, reach: f64| {
            let cells = (reach / step).ceil() as usize;
            let mut values = Vec::with_capacity(cells);
            let mut acc = super::NeumaierSum::new();
            for k in 0..cells {
                let a = k as f64 * step;
                let b = (k + 1) as f64 * step;
                acc.add(direction * gauss5(|u| g(origin + direction * u), a, b));
                let v = acc.value();
                if !(v.is_finite() && v.abs() < 1e300 && g(origin + direction * b).is_finite()) {
                    break;
                }
                values.push(v);
            }
            values
        };
        let right = side(1.0, (hi - origin).max(0.0));
        let left = side(-1.0, (origin - lo).max(0.0));
        let start = origin - left.len() as f64 * step;
        let mut values: Vec<f64> = left.into_iter().rev().collect();
        values.push(0.0);
        values.extend(right);
        if values.len() < 2 {
            values.push(0.0);
        }
        let slopes = (0..values.len()).map(|k| g(start + k as f64 * step)).collect();
        Self::new(start, step, values, slopes)
    }

    /// `∫_lo^hi φ(y, T(y)) dy` by 5-point Gauss–Legendre on every cell of the table.
    pub fn integrate_cells<F: FnMut(f64, f64) -> f64>(&self, mut phi: F) -> f64 {
        let mut acc = super::NeumaierSum::new();
        for k in 0..self.values.len() - 1 {
            acc.add(gauss5(|y| phi(y, self.eval(y)), self.knot(k), self.knot(k + 1)));
        }
        acc.value()
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi()
    }

    pub fn knot(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Interpolated value; arguments outside the table are clamped to its ends.
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        let n = self.values.len() - 1;
        let t = ((y - self.lo) / self.step).clamp(0.0, n as f64);
        let k = (t.floor() as usize).min(n - 1);
        let s = t - k as f64;
        let s2 = s * s;
        let one_minus = 1.0 - s;
        let h00 = (1.0 + 2.0 * s) * one_minus * one_minus;
        let h10 = s * one_minus * one_minus;
        let h01 = s2 * (3.0 - 2.0 * s);
        let h11 = s2 * (s - 1.0);
        h00 * self.values[k]
            + h10 * self.step * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.step * self.slopes[k + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss5_exact_for_degree_nine() {
        let v = gauss5(|x| x.powi(9) + x.powi(8), -1.0, 2.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 + (2f64.powi(9) + 1.0) / 9.0;
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn anchored_keeps_precision_near_origin() {
        // 1/e^u integrates to 1 - e^{-y}; the left end reaches e^{40}.
        let t = HermiteTable::anchored(|u: f64| (-u).exp(), 0.0, -40.0, 5.0, 1.0 / 512.0);
        assert_eq!(t.lo(), -40.0);
        for y in [-1e-3f64, 0.0, 0.25, 1.0, 4.0] {
            let exact = -(-y).exp_m1();
            assert!((t.eval(y) - exact).abs() < 1e-13, "y = {y}");
        }
        let overflow = HermiteTable::anchored(|u: f64| (-u).exp(), 0.0, -2000.0, 1.0, 1.0);
        assert!(overflow.lo() > -710.0 && overflow.values().iter().all(|v| v.is_finite()));

        // kink at the origin lands on a knot: |u| integrates exactly
        let kink = HermiteTable::anchored(|u: f64| u.abs(), 0.3, -1.0, 1.0, 1.0 / 64.0);
        assert!((kink.eval(1.0) - (0.5 - 0.3 * 0.3 / 2.0)).abs() < 1e-14);
        assert!((kink.integrate_cells(|_, _| 1.0) - (kink.hi() - kink.lo())).abs() < 1e-13);
    }

    #[test]
    fn cumulative_arctan() {
        let t = HermiteTable::cumulative(|u| 1.0 / (1.0 + u * u), -5.0, 5.0, 4096, (-5f64).atan());
        for &y in &[-4.9, -1.0, 0.0, 0.123, 2.5, 5.0] {
            assert!((t.eval(y) - y.atan()).abs() < 1e-12, "y = {y}");
        }
    }

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let knots: Vec<f64> = (0..=10).map(|k| -1.0 + 0.2 * k as f64).collect();
        let t = HermiteTable::new(-1.0, 0.2, knots.iter().map(|&x| f(x)).collect(), knots.iter().map(|&x| df(x)).collect());
        for &y in &[-0.93, -0.5, 0.01, 0.77] {
            assert!((t.eval(y) - f(y)).abs() < 1e-14);
        }
    }
}
