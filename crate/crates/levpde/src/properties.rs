//! Executable property suite: every structural hypothesis the solver relies
//! on, sampled and reported as a pass/fail row with fitted constants.
//! Constants are never asserted from theory; they are fitted on one half of
//! a sample and the inequalities validated on the held-out half.

use crate::analysis::{sample_smooth_field, x_dual_probes};
use crate::convection::{assemble_b, assemble_b_cutoff, ConvectionError, CutoffParams};
use crate::noise::{GKind, NoiseDescriptor, NoiseError};
use crate::operators::{Integrand, MonotoneOperatorSpec, OperatorsError};
use crate::spaces::{
    h_inner, lp_norm, Boundary, Domain, Field, NormKind, SpacesError, SpectralBasis,
};
use crate::streams::stream;
use rand::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PropertiesError {
    #[error(transparent)]
    Spaces(#[from] SpacesError),
    #[error(transparent)]
    Operators(#[from] OperatorsError),
    #[error(transparent)]
    Convection(#[from] ConvectionError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// One line of the property table. `pass` records `statistic` against
/// `bound` in the row's own direction; `constants` carries the fitted
/// values reported alongside.
#[derive(Debug, Clone)]
pub struct PropertyRow {
    pub name: String,
    pub pass: bool,
    pub statistic: f64,
    pub bound: f64,
    pub constants: Vec<(String, f64)>,
}

impl PropertyRow {
    fn new(name: impl Into<String>, pass: bool, statistic: f64, bound: f64) -> Self {
        PropertyRow { name: name.into(), pass, statistic, bound, constants: Vec::new() }
    }

    fn with(mut self, key: impl Into<String>, value: f64) -> Self {
        self.constants.push((key.into(), value));
        self
    }
}

/// Random integrand argument with components in [-3, 3], kept away from
/// the origin where relative comparisons degenerate.
fn sample_tuple(rng: &mut impl Rng, width: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..width).map(|_| 6.0 * rng.random::<f64>() - 3.0).collect();
        if x.iter().map(|c| c.abs()).fold(0.0, f64::max) >= 0.1 {
            return x;
        }
    }
}

fn active_orders(op: &MonotoneOperatorSpec) -> impl Iterator<Item = (usize, &Integrand)> {
    op.integrands
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|j| (i, j)))
}

/// Central finite differences of each integrand against its gradient.
/// Errors are measured against the gradient vector at the point, floored
/// by the natural gradient magnitude so near-critical points do not
/// inflate the ratio.
pub fn gradient_consistency(
    op: &MonotoneOperatorSpec,
    dim: usize,
    points: usize,
    seed: u64,
) -> PropertyRow {
    let mut worst = 0.0f64;
    for (order, j) in active_orders(op) {
        let width = dim.pow(order as u32);
        let mut rng = stream(seed, "gradfd", order as u64, 0, 0);
        let mut f = vec![0.0; width];
        for _ in 0..points {
            let x = sample_tuple(&mut rng, width);
            j.grad(&x, &mut f);
            let floor = 1e-4 * (1.0 + lp_norm(&x, 2.0).powf(op.p - 1.0));
            let denom = lp_norm(&f, 2.0).max(floor);
            for l in 0..width {
                let h = 2e-6 * (1.0 + x[l].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[l] += h;
                xm[l] -= h;
                let fd = (j.value(&xp) - j.value(&xm)) / (2.0 * h);
                worst = worst.max((fd - f[l]).abs() / denom);
            }
        }
    }
    PropertyRow::new(format!("gradient[{}]", op.name), worst <= 1e-6, worst, 1e-6)
}

/// Directional finite differences of each gradient against its Hessian.
pub fn hessian_consistency(
    op: &MonotoneOperatorSpec,
    dim: usize,
    points: usize,
    seed: u64,
) -> PropertyRow {
    let mut worst = 0.0f64;
    for (order, j) in active_orders(op) {
        let width = dim.pow(order as u32);
        let mut rng = stream(seed, "hessfd", order as u64, 0, 0);
        let mut hess = vec![0.0; width * width];
        let mut fp = vec![0.0; width];
        let mut fm = vec![0.0; width];
        for _ in 0..points {
            let x = sample_tuple(&mut rng, width);
            let dir = sample_tuple(&mut rng, width);
            j.hess(&x, &mut hess);
            let action: Vec<f64> = (0..width)
                .map(|l| (0..width).map(|m| hess[l * width + m] * dir[m]).sum())
                .collect();
            let floor =
                1e-3 * (1.0 + lp_norm(&x, 2.0).powf(op.p - 2.0) * lp_norm(&dir, 2.0));
            let denom = lp_norm(&action, 2.0).max(floor);
            let h = 3e-6 * (1.0 + lp_norm(&x, 2.0));
            let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
            let xm: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
            j.grad(&xp, &mut fp);
            j.grad(&xm, &mut fm);
            for l in 0..width {
                let fd = (fp[l] - fm[l]) / (2.0 * h);
                worst = worst.max((fd - action[l]).abs() / denom);
            }
        }
    }
    PropertyRow::new(format!("hessian[{}]", op.name), worst <= 1e-6, worst, 1e-6)
}

/// Inside the l^p ball the truncated gradient must equal the plain one to
/// the last bit.
pub fn truncation_identity(
    op: &MonotoneOperatorSpec,
    dim: usize,
    points: usize,
    r: f64,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let mut worst = 0.0f64;
    for (order, _) in active_orders(op) {
        let width = dim.pow(order as u32);
        let mut rng = stream(seed, "trball", order as u64, 0, 0);
        for _ in 0..points {
            let mut x = sample_tuple(&mut rng, width);
            let lp = lp_norm(&x, op.p);
            let target = r * 0.99 * rng.random::<f64>();
            for c in &mut x {
                *c *= target / lp;
            }
            let plain = op.eval_f(order, &x);
            let truncated = op.eval_fr(order, &x, r)?;
            for (a, b) in plain.iter().zip(&truncated) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(PropertyRow::new(
        format!("truncation_identity[{}]", op.name),
        worst == 0.0,
        worst,
        0.0,
    ))
}

/// Agreement of the two truncation branches across |x|_p = R.
pub fn truncation_continuity(
    op: &MonotoneOperatorSpec,
    dim: usize,
    points: usize,
    r: f64,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for (order, _) in active_orders(op) {
        let width = dim.pow(order as u32);
        let mut rng = stream(seed, "trcont", order as u64, 0, 0);
        for _ in 0..points {
            let x = sample_tuple(&mut rng, width);
            let lp = lp_norm(&x, op.p);
            let inner: Vec<f64> = x.iter().map(|c| c * (r - eps) / lp).collect();
            let outer: Vec<f64> = x.iter().map(|c| c * (r + eps) / lp).collect();
            let fi = op.eval_fr(order, &inner, r)?;
            let fo = op.eval_fr(order, &outer, r)?;
            let scale = lp_norm(&fi, 2.0).max(lp_norm(&fo, 2.0)).max(1e-12);
            let gap =
                fi.iter().zip(&fo).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(gap / scale);
        }
    }
    Ok(PropertyRow::new(
        format!("truncation_continuity[{}]", op.name),
        worst <= 1e-4,
        worst,
        1e-4,
    ))
}

fn monotonicity_scan(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    truncation: Option<f64>,
    pairs: usize,
    seed: u64,
) -> Result<(f64, f64), PropertiesError> {
    let n = basis.len();
    let mut min_scaled = f64::INFINITY;
    let mut min_raw = f64::INFINITY;
    for i in 0..pairs {
        let u = sample_smooth_field(n, seed, "f1u", i as u64);
        let v = sample_smooth_field(n, seed, "f1v", i as u64);
        let d = u.sub(&v);
        let pairing = match truncation {
            None => op.pairing_f(basis, &u, &d)? - op.pairing_f(basis, &v, &d)?,
            Some(r) => op.pairing_fr(basis, &u, &d, r)? - op.pairing_fr(basis, &v, &d, r)?,
        };
        min_raw = min_raw.min(pairing);
        let scale = (op.x_norm(basis, &u)? + op.x_norm(basis, &v)?).powf(op.p - 1.0)
            * op.x_norm(basis, &d)?;
        if scale > 0.0 {
            min_scaled = min_scaled.min(pairing / scale);
        }
    }
    Ok((min_scaled, min_raw))
}

/// Monotonicity of the plain operator over random pairs.
pub fn f1_monotonicity(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    pairs: usize,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let (min_scaled, min_raw) = monotonicity_scan(basis, op, None, pairs, seed)?;
    Ok(PropertyRow::new(
        format!("f1[{}]", op.name),
        min_scaled >= -1e-10,
        min_scaled,
        -1e-10,
    )
    .with("min_pairing", min_raw))
}

/// Monotonicity of the truncated operator at one radius.
pub fn fr1_monotonicity(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    r: f64,
    pairs: usize,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let (min_scaled, min_raw) = monotonicity_scan(basis, op, Some(r), pairs, seed)?;
    Ok(PropertyRow::new(
        format!("fr1[{}][R={}]", op.name, r),
        min_scaled >= -1e-10,
        min_scaled,
        -1e-10,
    )
    .with("min_pairing", min_raw))
}

/// Through-origin least-squares slope of the monotonicity pairing against
/// the squared V-distance. For the nonlinear viscosity entry the fitted
/// slope must reach 0.95 (p-1).
pub fn strong_monotonicity(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    pairs: usize,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let n = basis.len();
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..pairs {
        let u = sample_smooth_field(n, seed, "f1u", i as u64);
        let v = sample_smooth_field(n, seed, "f1v", i as u64);
        let d = u.sub(&v);
        let pairing = op.pairing_f(basis, &u, &d)? - op.pairing_f(basis, &v, &d)?;
        let v2 = basis.norm(&d, NormKind::V).powi(2);
        sxy += v2 * pairing;
        sxx += v2 * v2;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let bound = 0.95 * (op.p - 1.0);
    Ok(PropertyRow::new(
        format!("strong_monotonicity[{}]", op.name),
        slope >= bound,
        slope,
        bound,
    ))
}

/// Coercivity floor and boundedness growth of the plain operator in its
/// own norm: the floor c1 must be positive, and the growth exponent of
/// the dual-norm estimate along each ray v -> 2v must not exceed p-1.
/// The two-scale exponent is exact per sample, so no regression slack is
/// needed beyond roundoff.
pub fn f3_f4_rows(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    fields: usize,
    seed: u64,
) -> Result<(PropertyRow, PropertyRow), PropertiesError> {
    let n = basis.len();
    let probes = x_dual_probes(n, 200, seed);
    let mut probe_norms = Vec::with_capacity(probes.len());
    for phi in &probes {
        probe_norms.push(op.x_norm(basis, phi)?);
    }
    let dual_est = |dual: &Field| {
        let mut est = 0.0f64;
        for (phi, pn) in probes.iter().zip(&probe_norms) {
            if *pn > 0.0 {
                est = est.max(h_inner(dual, phi).abs() / pn);
            }
        }
        est
    };

    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(fields);
    let mut exponent = 0.0f64;
    for i in 0..fields {
        let v = sample_smooth_field(n, seed, "f3", i as u64);
        let xn = op.x_norm(basis, &v)?;
        if xn <= 1e-14 {
            continue;
        }
        let coercive = op.pairing_f(basis, &v, &v)?;
        let est = dual_est(&Field::from_coeffs(op.assemble_f(basis, &v)?));
        let xn2 = op.x_norm(basis, &v.scaled(2.0))?;
        let est2 = dual_est(&Field::from_coeffs(op.assemble_f(basis, &v.scaled(2.0))?));
        if est > 0.0 && est2 > 0.0 && xn2 > xn {
            exponent = exponent.max((est2 / est).ln() / (xn2 / xn).ln());
        }
        samples.push((xn, coercive, est));
    }

    let mut c1 = f64::INFINITY;
    for (xn, coercive, _) in &samples {
        c1 = c1.min(coercive / xn.powf(op.p));
    }
    let mut c4 = 0.0f64;
    for (xn, _, est) in &samples {
        c4 = c4.max(est - c1.max(0.0) * xn.powf(op.p - 1.0));
    }
    let f3 = PropertyRow::new(format!("f3[{}]", op.name), c1 > 0.0, c1, 0.0).with("c1", c1);

    let bound = op.p - 1.0 + 0.01;
    let f4 = PropertyRow::new(format!("f4[{}]", op.name), exponent <= bound, exponent, bound)
        .with("c4", c4.max(0.0));
    Ok((f3, f4))
}

/// Equicoercivity across the truncation grid: one shared slope c1, one
/// fitted offset c5 per radius; the offsets must agree within a factor of
/// two, relative to a floor when they all sit near zero.
pub fn equicoercivity(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    r_values: &[f64],
    fields: usize,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let n = basis.len();
    let samples: Vec<Field> =
        (0..fields).map(|i| sample_smooth_field(n, seed, "fr3", i as u64)).collect();
    let x: Vec<f64> = samples.iter().map(|v| basis.norm(v, NormKind::V).powi(2)).collect();
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];

    let mut y = vec![vec![0.0; samples.len()]; r_values.len()];
    for (ri, r) in r_values.iter().enumerate() {
        for (i, v) in samples.iter().enumerate() {
            y[ri][i] = op.pairing_fr(basis, v, v, *r)?;
        }
    }

    // shared slope from the large-field regime of the worst radius
    let mut c1 = f64::INFINITY;
    for row in &y {
        for (i, yi) in row.iter().enumerate() {
            if x[i] >= median && x[i] > 0.0 {
                c1 = c1.min(yi / x[i]);
            }
        }
    }
    c1 *= 0.5;

    let c5: Vec<f64> = y
        .iter()
        .map(|row| {
            row.iter().enumerate().map(|(i, yi)| c1 * x[i] - yi).fold(0.0, f64::max)
        })
        .collect();
    let floor = 0.05 * x.iter().sum::<f64>() / x.len() as f64;
    let c5_max = c5.iter().copied().fold(0.0, f64::max);
    let c5_min = c5.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = c5_max / c5_min.max(floor);

    let mut row = PropertyRow::new(
        format!("fr3[{}]", op.name),
        c1 > 0.0 && spread <= 2.0,
        spread,
        2.0,
    )
    .with("c1", c1);
    for (r, c) in r_values.iter().zip(&c5) {
        row = row.with(format!("c5[R={r}]"), *c);
    }
    Ok(row)
}

/// Boundedness of the truncated operator: the worst dual-V norm over the
/// sample, divided by R^{p-2} |v|_V, must agree across the radius grid.
/// Fields are scaled with R so every radius is probed in its truncated
/// regime, not just the small ones.
pub fn fr4_boundedness(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    r_values: &[f64],
    fields: usize,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let n = basis.len();
    let mut ratios = Vec::with_capacity(r_values.len());
    for r in r_values {
        let mut worst = 0.0f64;
        for i in 0..fields {
            let v = sample_smooth_field(n, seed, "fr4", i as u64).scaled(*r);
            let vn = basis.norm(&v, NormKind::V);
            if vn <= 1e-14 {
                continue;
            }
            let dual = Field::from_coeffs(op.assemble_fr(basis, &v, *r)?);
            let dn = basis.norm(&dual, NormKind::DualV);
            worst = worst.max(dn / (r.powf(op.p - 2.0) * vn));
        }
        ratios.push(worst);
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let mut row = PropertyRow::new(format!("fr4[{}]", op.name), spread <= 2.0, spread, 2.0)
        .with("c1_fr4", hi);
    for (r, ratio) in r_values.iter().zip(&ratios) {
        row = row.with(format!("ratio[R={r}]"), *ratio);
    }
    Ok(row)
}

struct TupleStats {
    lp: f64,
    quad: f64,
    fx: f64,
    grad_dual: f64,
    hess_dual: f64,
    val: f64,
}

fn tuple_stats(j: &Integrand, p: f64, x: &[f64]) -> TupleStats {
    let width = x.len();
    let mut f = vec![0.0; width];
    let mut hess = vec![0.0; width * width];
    j.grad(x, &mut f);
    j.hess(x, &mut hess);
    let dual = p / (p - 1.0);
    let quad: f64 = (0..width)
        .map(|l| x[l] * (0..width).map(|m| hess[l * width + m] * x[m]).sum::<f64>())
        .sum();
    let hess_row: Vec<f64> = (0..width)
        .map(|m| (0..width).map(|l| x[l] * hess[l * width + m]).sum())
        .collect();
    TupleStats {
        lp: lp_norm(x, p),
        quad,
        fx: f.iter().zip(x).map(|(a, b)| a * b).sum(),
        grad_dual: lp_norm(&f, dual),
        hess_dual: lp_norm(&hess_row, dual),
        val: j.value(x),
    }
}

/// Pointwise integrand constants, fitted on one half of a tuple sample and
/// validated on the held-out half with a 25% margin plus a scale-relative
/// roundoff allowance: the convexity floor x f'(x) x >= c1 |x|^p - c2,
/// value and derivative growth against c3, the first-power coercivity
/// f(x) x >= c1 |x| - c6, and c7 = max(c2, c6).
pub fn integrand_constants(
    op: &MonotoneOperatorSpec,
    dim: usize,
    points: usize,
    seed: u64,
) -> PropertyRow {
    let per_half = 10 * points;
    let mut fit: Vec<TupleStats> = Vec::new();
    let mut hold: Vec<TupleStats> = Vec::new();
    for (order, j) in active_orders(op) {
        let width = dim.pow(order as u32);
        let mut rng = stream(seed, "ptconst", order as u64, 0, 0);
        for i in 0..2 * per_half {
            let mut x = sample_tuple(&mut rng, width);
            if i % 3 == 0 {
                for c in &mut x {
                    *c *= 10.0;
                }
            }
            let s = tuple_stats(j, op.p, &x);
            if i % 2 == 0 {
                fit.push(s);
            } else {
                hold.push(s);
            }
        }
    }

    let mut c1 = f64::INFINITY;
    for s in &fit {
        if s.lp >= 1.0 {
            c1 = c1.min(s.quad / s.lp.powf(op.p));
        }
    }
    let c1h = 0.5 * c1.max(0.0);

    let deficits = |s: &TupleStats| {
        [
            c1h * s.lp.powf(op.p) - s.quad,
            c1h * s.lp.powf(op.p) - s.val,
            s.grad_dual - c1h * s.lp.powf(op.p - 1.0),
            s.hess_dual - c1h * s.lp.powf(op.p - 1.0),
            c1h * s.lp - s.fx,
        ]
    };
    let mut fitted = [0.0f64; 5];
    for s in &fit {
        for (slot, d) in fitted.iter_mut().zip(deficits(s)) {
            *slot = slot.max(d);
        }
    }

    let mut violation = 0.0f64;
    for s in &hold {
        let scale = 1.0 + s.lp.powf(op.p);
        for (slot, d) in fitted.iter().zip(deficits(s)) {
            violation = violation.max((d - 1.25 * slot) / scale);
        }
    }

    let c2 = fitted[0];
    let c3 = fitted[1].max(fitted[2]).max(fitted[3]);
    let c6 = fitted[4];
    PropertyRow::new(
        format!("integrand_constants[{}]", op.name),
        violation <= 1e-6,
        violation,
        1e-6,
    )
    .with("c1_pointwise", c1h)
    .with("c2", c2)
    .with("c3", c3)
    .with("c6", c6)
    .with("c7", c2.max(c6))
}

/// Skew-symmetry of the convection surrogate: the self-pairing must vanish
/// to roundoff relative to |u|_V |u|_H^2, with and without the cutoff.
pub fn convection_cancellation(
    basis: &SpectralBasis,
    cut: CutoffParams,
    states: usize,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let n = basis.len();
    let mut worst = 0.0f64;
    for i in 0..states {
        let u = sample_smooth_field(n, seed, "cancel", i as u64);
        let scale = basis.norm(&u, NormKind::V) * h_inner(&u, &u);
        if scale == 0.0 {
            continue;
        }
        let raw = Field::from_coeffs(assemble_b(basis, &u, &u)?);
        let cutoffed = Field::from_coeffs(assemble_b_cutoff(basis, &u, cut)?);
        worst = worst.max(h_inner(&raw, &u).abs() / scale);
        worst = worst.max(h_inner(&cutoffed, &u).abs() / scale);
    }
    Ok(PropertyRow::new("convection_cancellation", worst <= 1e-10, worst, 1e-10))
}

/// Above twice the cutoff level the assembled convection term is the zero
/// vector, not merely small.
pub fn cutoff_exactness(
    basis: &SpectralBasis,
    cut: CutoffParams,
    states: usize,
    seed: u64,
) -> Result<PropertyRow, PropertiesError> {
    let n = basis.len();
    let mut worst = 0.0f64;
    for i in 0..states {
        let raw = sample_smooth_field(n, seed, "cutoff", i as u64);
        let h = h_inner(&raw, &raw).sqrt();
        let margin = stream(seed, "cutlvl", i as u64, 0, 0).random::<f64>();
        let u = raw.scaled(2.0 * cut.level() * (1.0 + margin) / h);
        let dual = assemble_b_cutoff(basis, &u, cut)?;
        for d in dual {
            worst = worst.max(d.abs());
        }
    }
    Ok(PropertyRow::new("cutoff_exactness", worst == 0.0, worst, 0.0))
}

/// Sampled growth bound of the noise coefficients against the descriptor's
/// reported rho: |G(v)|^2 + sum of intensity |K(v)|^2 <= rho (1 + |v|^2).
pub fn noise_growth(desc: &NoiseDescriptor, fields: usize, seed: u64) -> PropertyRow {
    let n = desc.modes();
    let rho = desc.growth_rho();
    let mut worst = 0.0f64;
    for i in 0..fields {
        let v = sample_smooth_field(n, seed, "ngrow", i as u64);
        let mut total = desc.g_norm_sq(&v);
        for mark in &desc.marks {
            let k = mark.a.add(&v.scaled(mark.b));
            total += mark.intensity * h_inner(&k, &k);
        }
        worst = worst.max(total / (1.0 + h_inner(&v, &v)));
    }
    PropertyRow::new("noise_growth", worst <= rho * (1.0 + 1e-12), worst, rho)
        .with("rho", rho)
}

/// Sampled Lipschitz bound of the noise coefficients against the same rho.
pub fn noise_lipschitz(desc: &NoiseDescriptor, pairs: usize, seed: u64) -> PropertyRow {
    let n = desc.modes();
    let rho = desc.growth_rho();
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let u = sample_smooth_field(n, seed, "nlipu", i as u64);
        let v = sample_smooth_field(n, seed, "nlipv", i as u64);
        let d = u.sub(&v);
        let d2 = h_inner(&d, &d);
        if d2 == 0.0 {
            continue;
        }
        let mut total = match desc.g_kind {
            GKind::Additive => 0.0,
            GKind::DiagonalLinear => desc.g_norm_sq(&d),
        };
        for mark in &desc.marks {
            let kd = d.scaled(mark.b);
            total += mark.intensity * h_inner(&kd, &kd);
        }
        worst = worst.max(total / d2);
    }
    PropertyRow::new("noise_lipschitz", worst <= rho * (1.0 + 1e-12), worst, rho)
        .with("rho", rho)
}

/// Sample sizes for one full table.
#[derive(Debug, Clone, Copy)]
pub struct SuiteBudget {
    pub points: usize,
    pub pairs: usize,
    pub fields: usize,
    pub states: usize,
}

impl Default for SuiteBudget {
    fn default() -> Self {
        SuiteBudget { points: 200, pairs: 1000, fields: 1000, states: 1000 }
    }
}

/// The full table over the operator catalog at exponent p, plus the
/// convection and noise rows.
pub fn full_suite(
    p: f64,
    budget: SuiteBudget,
    seed: u64,
) -> Result<Vec<PropertyRow>, PropertiesError> {
    let line = SpectralBasis::new(Domain::interval(1.0), 16, 0)?;
    let plane =
        SpectralBasis::new(Domain::rectangle(1.0, 1.0, Boundary::DirichletX1Only), 16, 0)?;
    let r_grid = [2.0, 4.0, 8.0, 16.0];
    let mut rows = Vec::new();

    for op in MonotoneOperatorSpec::catalog(p)? {
        let dim = if op.supports_dim(1) { 1 } else { 2 };
        let basis = if dim == 1 { &line } else { &plane };
        rows.push(gradient_consistency(&op, dim, budget.points, seed));
        rows.push(hessian_consistency(&op, dim, budget.points, seed));
        rows.push(truncation_identity(&op, dim, budget.points, 3.0, seed)?);
        rows.push(truncation_continuity(&op, dim, budget.points, 3.0, seed)?);
        rows.push(integrand_constants(&op, dim, budget.points, seed));
        rows.push(f1_monotonicity(basis, &op, budget.pairs, seed)?);
        for r in r_grid {
            rows.push(fr1_monotonicity(basis, &op, r, budget.pairs, seed)?);
        }
        let (f3, f4) = f3_f4_rows(basis, &op, budget.fields, seed)?;
        rows.push(f3);
        rows.push(f4);
        rows.push(equicoercivity(basis, &op, &r_grid, budget.fields, seed)?);
        rows.push(fr4_boundedness(basis, &op, &r_grid, budget.fields, seed)?);
        if op.name == "smagorinsky" {
            rows.push(strong_monotonicity(basis, &op, budget.pairs, seed)?);
        }
    }

    let wide = SpectralBasis::new(Domain::interval(1.0), 32, 0)?;
    let cut = CutoffParams::new(1.0)?;
    rows.push(convection_cancellation(&wide, cut, budget.states, seed)?);
    rows.push(cutoff_exactness(&wide, cut, budget.states, seed)?);

    let marks = vec![crate::noise::JumpMark {
        intensity: 1.0,
        a: Field::single_mode(16, 1, 0.5),
        b: 0.3,
    }];
    let desc = NoiseDescriptor::new(
        NoiseDescriptor::q_polynomial(16, 0.5, 2.0),
        vec![1.0; 16],
        GKind::DiagonalLinear,
        marks,
        vec![],
    )?;
    rows.push(noise_growth(&desc, budget.fields, seed));
    rows.push(noise_lipschitz(&desc, budget.fields, seed));
    Ok(rows)
}
