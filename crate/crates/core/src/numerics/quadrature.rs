//! Globally adaptive Simpson quadrature with Richardson error estimates, plus
//! tail-truncated integration over half-lines and the whole line.
//!
//! The adaptive driver keeps every panel in a max-heap keyed on its error
//! estimate and always bisects the worst one. With this strategy a jump
//! discontinuity costs one bisection per halving of its error, so indicator
//! factors converge without special treatment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::summation::NeumaierSum;
use crate::error::{Error, Result};

/// Tolerances and limits shared by every quadrature call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any single panel.
    pub max_depth: u32,
    /// A tail piece below this magnitude counts as negligible.
    pub tail_tol: f64,
    /// Starting half-width `L` of the truncated domain `[-L, L]`.
    pub initial_halfwidth: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_depth: 40,
            tail_tol: 1e-12,
            initial_halfwidth: 8.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.abs_tol > 0.0) {
            bad.push(format!("abs_tol must be > 0 (got {})", self.abs_tol));
        }
        if !(self.rel_tol > 0.0) {
            bad.push(format!("rel_tol must be > 0 (got {})", self.rel_tol));
        }
        if self.max_depth < 1 {
            bad.push("max_depth must be >= 1".to_string());
        }
        if !(self.tail_tol > 0.0) {
            bad.push(format!("tail_tol must be > 0 (got {})", self.tail_tol));
        }
        if !(self.initial_halfwidth > 0.0) {
            bad.push(format!("initial_halfwidth must be > 0 (got {})", self.initial_halfwidth));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Same spec with absolute and relative tolerances replaced.
    pub fn with_tolerance(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        self.tail_tol = tail_tol;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

impl QuadResult {
    const ZERO: QuadResult = QuadResult { value: 0.0, error_estimate: 0.0, converged: true };

    fn negate(self) -> Self {
        QuadResult { value: -self.value, ..self }
    }
}

/// Largest number of integrand evaluations a single adaptive call may spend.
const MAX_EVALUATIONS: usize = 2_000_000;
/// Initial panels per segment between breakpoints.
const INITIAL_PANELS: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    flm: f64,
    frm: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

struct Evaluator<F> {
    f: F,
    count: usize,
}

impl<F: FnMut(f64) -> Result<f64>> Evaluator<F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        self.count += 1;
        let v = (self.f)(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { at: x, value: v })
        }
    }

    fn panel(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, depth: u32) -> Result<Panel> {
        let m = 0.5 * (a + b);
        let flm = self.eval(0.5 * (a + m))?;
        let frm = self.eval(0.5 * (m + b))?;
        let h = b - a;
        let coarse = h / 6.0 * (fa + 4.0 * fm + fb);
        let fine = h / 12.0 * (fa + 4.0 * flm + 2.0 * fm + 4.0 * frm + fb);
        let delta = (fine - coarse) / 15.0;
        Ok(Panel {
            a,
            b,
            fa,
            fm,
            fb,
            flm,
            frm,
            value: fine + delta,
            // The Richardson factor 1/15 assumes smoothness; at a jump the
            // true error is of the order of |fine - coarse| itself.
            error: (fine - coarse).abs(),
            depth,
        })
    }
}

fn adaptive<F>(f: F, a: f64, b: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut ev = Evaluator { f, count: 0 };

    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    for seg in cuts.windows(2) {
        let (s0, s1) = (seg[0], seg[1]);
        let w = (s1 - s0) / INITIAL_PANELS as f64;
        let mut left = s0;
        let mut f_left = ev.eval(left)?;
        for k in 0..INITIAL_PANELS {
            let right = if k + 1 == INITIAL_PANELS { s1 } else { s0 + (k + 1) as f64 * w };
            let f_mid = ev.eval(0.5 * (left + right))?;
            let f_right = ev.eval(right)?;
            heap.push(ev.panel(left, right, f_left, f_mid, f_right, 0)?);
            left = right;
            f_left = f_right;
        }
    }

    let mut frozen: Vec<Panel> = Vec::new();
    loop {
        let total_value: NeumaierSum = heap.iter().chain(frozen.iter()).map(|p| p.value).collect();
        let total_error: NeumaierSum = heap.iter().chain(frozen.iter()).map(|p| p.error).collect();
        let tol = spec.target(total_value.value());
        if total_error.value() <= tol || ev.count >= MAX_EVALUATIONS {
            return Ok(QuadResult {
                value: total_value.value(),
                error_estimate: total_error.value(),
                converged: total_error.value() <= tol,
            });
        }
        // Bisect the worst panels in a batch; recomputing the totals after
        // every single split would make the driver quadratic.
        let batch = (heap.len() / 8).max(1);
        let mut progressed = false;
        for _ in 0..batch {
            let Some(p) = heap.pop() else { break };
            if p.depth >= spec.max_depth {
                frozen.push(p);
                continue;
            }
            let m = 0.5 * (p.a + p.b);
            let left = ev.panel(p.a, m, p.fa, p.flm, p.fm, p.depth + 1)?;
            let right = ev.panel(m, p.b, p.fm, p.frm, p.fb, p.depth + 1)?;
            heap.push(left);
            heap.push(right);
            progressed = true;
        }
        if !progressed && heap.is_empty() {
            let total_value: NeumaierSum = frozen.iter().map(|p| p.value).collect();
            let total_error: NeumaierSum = frozen.iter().map(|p| p.error).collect();
            let tol = spec.target(total_value.value());
            return Ok(QuadResult {
                value: total_value.value(),
                error_estimate: total_error.value(),
                converged: total_error.value() <= tol,
            });
        }
    }
}

/// `∫_a^b f` for a fallible integrand. `a > b` returns the negated integral.
pub fn try_integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    try_integrate_with_breaks(f, a, b, &[], spec)
}

/// As [`try_integrate`], with known kink or jump locations seeded as panel boundaries.
pub fn try_integrate_with_breaks<F>(f: F, a: f64, b: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Precondition(format!("integration limits must be finite (got [{a}, {b}])")));
    }
    if a == b {
        return Ok(QuadResult::ZERO);
    }
    if a > b {
        return adaptive(f, b, a, breaks, spec).map(QuadResult::negate);
    }
    adaptive(f, a, b, breaks, spec)
}

/// Adaptive quadrature of `∫_a^b f`.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, spec)
}

pub fn integrate_with_breaks<F>(f: F, a: f64, b: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    try_integrate_with_breaks(|x| Ok(f(x)), a, b, breaks, spec)
}

/// Tail pieces `∫` over successive doubling shells on one side of the domain.
///
/// A side is settled when its latest piece is below `tail_tol`, or when the
/// pieces decay geometrically (ratio stable in (0, 0.9)) and successive
/// Aitken-extrapolated remainders agree within `tail_tol`; in the latter case
/// the extrapolated remainder is added.
#[derive(Debug, Default)]
struct TailSeries {
    pieces: Vec<f64>,
    partial: Vec<f64>,
}

impl TailSeries {
    fn push(&mut self, piece: f64) {
        let last = self.partial.last().copied().unwrap_or(0.0);
        self.pieces.push(piece);
        self.partial.push(last + piece);
    }

    fn aitken(&self, k: usize) -> Option<f64> {
        // Needs partial sums k-2, k-1, k.
        if k < 2 {
            return None;
        }
        let (p0, p1, p2) = (self.pieces[k - 2], self.pieces[k - 1], self.pieces[k]);
        if p0 == 0.0 || p1 == 0.0 || p0.signum() != p1.signum() || p1.signum() != p2.signum() {
            return None;
        }
        let r1 = p1 / p0;
        let r2 = p2 / p1;
        if !(r1 > 0.0 && r1 < 0.9 && r2 > 0.0 && r2 < 0.9 && (r1 - r2).abs() < 0.05) {
            return None;
        }
        let denom = p2 - p1;
        if denom == 0.0 {
            return None;
        }
        Some(self.partial[k] - p2 * p2 / denom)
    }

    /// `Some(sum of this side including the extrapolated remainder)` once settled.
    fn settled(&self, tail_tol: f64) -> Option<f64> {
        let k = self.pieces.len().checked_sub(1)?;
        if self.pieces[k].abs() < tail_tol {
            return Some(self.partial[k]);
        }
        match (self.aitken(k), k.checked_sub(1).and_then(|j| self.aitken(j))) {
            (Some(now), Some(before)) if (now - before).abs() < tail_tol => Some(now),
            _ => None,
        }
    }
}

const MAX_DOUBLINGS_FACTOR: f64 = (1u64 << 20) as f64;

fn shell<F>(f: &mut F, a: f64, b: f64, halfwidth: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    match try_integrate(&mut *f, a, b, spec) {
        // Overflow in the far field is the usual signature of a non-integrable tail.
        Err(Error::NonFinite { value, .. }) if value.is_infinite() => Err(Error::Divergent { halfwidth }),
        other => other,
    }
}

/// `∫_{-∞}^{∞} f` for a fallible integrand: integrate `[-L, L]`, then add
/// shells `[L, 2L]` and `[-2L, -L]`, doubling `L` until both sides settle.
pub fn try_integrate_line<F>(mut f: F, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let l0 = spec.initial_halfwidth;
    let mut half = l0;
    let mut total = try_integrate(&mut f, -half, half, spec)?;
    let mut right = TailSeries::default();
    let mut left = TailSeries::default();
    loop {
        let r = shell(&mut f, half, 2.0 * half, half, spec)?;
        let l = shell(&mut f, -2.0 * half, -half, half, spec)?;
        total.error_estimate += r.error_estimate + l.error_estimate;
        total.converged &= r.converged && l.converged;
        right.push(r.value);
        left.push(l.value);
        if let (Some(rs), Some(ls)) = (right.settled(spec.tail_tol), left.settled(spec.tail_tol)) {
            total.value += rs + ls;
            return Ok(total);
        }
        half *= 2.0;
        if half > MAX_DOUBLINGS_FACTOR * l0 {
            return Err(Error::Divergent { halfwidth: half });
        }
    }
}

pub fn integrate_line<F>(f: F, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    try_integrate_line(|x| Ok(f(x)), spec)
}

/// `∫_{-∞}^{b} f` by the same shell-doubling rule, anchored at `b`.
pub fn try_integrate_lower<F>(mut f: F, b: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let l0 = spec.initial_halfwidth;
    let mut half = l0;
    let mut total = try_integrate_with_breaks(&mut f, b - half, b, breaks, spec)?;
    let mut tail = TailSeries::default();
    loop {
        let piece = shell(&mut f, b - 2.0 * half, b - half, half, spec)?;
        total.error_estimate += piece.error_estimate;
        total.converged &= piece.converged;
        tail.push(piece.value);
        if let Some(s) = tail.settled(spec.tail_tol) {
            total.value += s;
            return Ok(total);
        }
        half *= 2.0;
        if half > MAX_DOUBLINGS_FACTOR * l0 {
            return Err(Error::Divergent { halfwidth: half });
        }
    }
}

/// `∫_{a}^{∞} f`, mirror image of [`try_integrate_lower`].
pub fn try_integrate_upper<F>(mut f: F, a: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mirrored: Vec<f64> = breaks.iter().map(|b| -b).collect();
    try_integrate_lower(|x| f(-x), -a, &mirrored, spec)
}
