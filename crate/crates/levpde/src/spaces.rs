//! Dirichlet Laplacian eigenbasis on an interval or rectangle, with the
//! quadrature, norms and projections the rest of the crate is built on.
//!
//! Modes are ordered by ascending eigenvalue, ties broken lexicographically
//! by multi-index, so a basis with fewer modes is always a prefix of a
//! larger one over the same domain. Quadrature is the midpoint rule on
//! uniformly spaced interior nodes; for trigonometric polynomials of total
//! degree below `2 * n_quad` per axis it integrates exactly, which is what
//! makes the Gram identity hold at machine precision.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpacesError {
    #[error("domain dimension must be 1 or 2, got {0}")]
    BadDim(usize),
    #[error("domain lengths must be positive")]
    BadLength,
    #[error("basis needs at least one mode")]
    NoModes,
    #[error("n_quad = {got} is below the anti-aliasing floor {required} (4 x max mode index)")]
    QuadratureTooCoarse { required: usize, got: usize },
    #[error("boundary condition dirichlet_x1_only needs a 2-d domain")]
    BcNeedsTwoDim,
    #[error("derivative order {0} not supported (max 2)")]
    BadOrder(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Homogeneous Dirichlet on the whole boundary.
    Dirichlet,
    /// Dirichlet on the x1-sides only; Neumann-type modes along x2.
    /// The trace of u * nu_1 vanishes on all four sides.
    DirichletX1Only,
}

#[derive(Debug, Clone, Copy)]
pub struct Domain {
    pub dim: usize,
    pub lengths: [f64; 2],
    pub bc: Boundary,
}

impl Domain {
    pub fn interval(length: f64) -> Self {
        Domain { dim: 1, lengths: [length, 1.0], bc: Boundary::Dirichlet }
    }

    pub fn rectangle(l1: f64, l2: f64, bc: Boundary) -> Self {
        Domain { dim: 2, lengths: [l1, l2], bc }
    }

    pub fn measure(&self) -> f64 {
        if self.dim == 1 { self.lengths[0] } else { self.lengths[0] * self.lengths[1] }
    }
}

/// One eigenmode; `index[1] == 0` in 1-d, and also for the constant-in-x2
/// modes of `DirichletX1Only`.
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    pub index: [usize; 2],
    pub eigenvalue: f64,
}

/// Coefficient vector over the first `len` modes of a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field { coeffs: vec![0.0; n] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Field { coeffs }
    }

    /// `amp * w_mode` (1-based mode position in the basis ordering).
    pub fn single_mode(n: usize, mode: usize, amp: f64) -> Self {
        assert!(mode >= 1 && mode <= n, "mode position out of range");
        let mut c = vec![0.0; n];
        c[mode - 1] = amp;
        Field { coeffs: c }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Orthogonal projection onto the first `m` modes, re-embedded into a
    /// vector of length `m` (pad with zeros when `m > len`).
    pub fn resized(&self, m: usize) -> Field {
        let mut c = vec![0.0; m];
        for i in 0..m.min(self.coeffs.len()) {
            c[i] = self.coeffs[i];
        }
        Field { coeffs: c }
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len());
        Field { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len());
        Field { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    pub fn axpy(&mut self, a: f64, x: &Field) {
        assert_eq!(self.len(), x.len());
        for (c, xc) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += a * xc;
        }
    }
}

/// H inner product of two coefficient vectors (Parseval).
pub fn h_inner(a: &Field, b: &Field) -> f64 {
    assert_eq!(a.len(), b.len());
    a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// l2 of coefficients.
    H,
    /// Gradient norm: sqrt(sum lambda_k c_k^2).
    V,
    /// Dual of V: sqrt(sum c_k^2 / lambda_k).
    DualV,
    /// Dual of D(A): sqrt(sum c_k^2 / lambda_k^2).
    DualA,
    /// Sobolev-type norm: (sum_{i<=k} int |D^i u|_{lp}^p)^{1/p}.
    X { p: f64, k: usize },
}

pub struct SpectralBasis {
    domain: Domain,
    modes: Vec<Mode>,
    n_quad: usize,
    points: usize,
    weight: f64,
    // flat tables, mode-major: val[m * points + q]
    val: Vec<f64>,
    d1: Vec<f64>, // (m * points + q) * dim + axis
    d2: Vec<f64>, // (m * points + q) * dim * dim + axis1 * dim + axis2
    quad_nodes: Vec<f64>, // q * dim + axis
}

impl SpectralBasis {
    /// Build the first `n` modes over `domain`. `n_quad = 0` selects the
    /// anti-aliasing floor `4 * max mode index` automatically.
    pub fn new(domain: Domain, n: usize, n_quad: usize) -> Result<Self, SpacesError> {
        if domain.dim != 1 && domain.dim != 2 {
            return Err(SpacesError::BadDim(domain.dim));
        }
        if !(domain.lengths[0] > 0.0) || (domain.dim == 2 && !(domain.lengths[1] > 0.0)) {
            return Err(SpacesError::BadLength);
        }
        if domain.bc == Boundary::DirichletX1Only && domain.dim != 2 {
            return Err(SpacesError::BcNeedsTwoDim);
        }
        if n == 0 {
            return Err(SpacesError::NoModes);
        }

        let modes = select_modes(&domain, n);
        let max_index = modes
            .iter()
            .map(|m| m.index[0].max(m.index[1]))
            .max()
            .unwrap();
        let required = 4 * max_index;
        let n_quad = if n_quad == 0 { required } else { n_quad };
        if n_quad < required {
            return Err(SpacesError::QuadratureTooCoarse { required, got: n_quad });
        }

        let dim = domain.dim;
        let points = if dim == 1 { n_quad } else { n_quad * n_quad };
        let weight = domain.measure() / points as f64;

        let axis_nodes: Vec<Vec<f64>> = (0..dim)
            .map(|a| {
                let l = domain.lengths[a];
                (0..n_quad).map(|i| (i as f64 + 0.5) * l / n_quad as f64).collect()
            })
            .collect();

        let mut quad_nodes = vec![0.0; points * dim];
        for q in 0..points {
            if dim == 1 {
                quad_nodes[q] = axis_nodes[0][q];
            } else {
                quad_nodes[q * 2] = axis_nodes[0][q / n_quad];
                quad_nodes[q * 2 + 1] = axis_nodes[1][q % n_quad];
            }
        }

        let mut val = vec![0.0; n * points];
        let mut d1 = vec![0.0; n * points * dim];
        let mut d2 = vec![0.0; n * points * dim * dim];

        for (m, mode) in modes.iter().enumerate() {
            for q in 0..points {
                let x = &quad_nodes[q * dim..(q + 1) * dim];
                let mut f = [0.0; 2]; // factor value per axis
                let mut df = [0.0; 2];
                let mut ddf = [0.0; 2];
                for a in 0..dim {
                    let (v, dv, ddv) = axis_factor(&domain, a, mode.index[a], x[a]);
                    f[a] = v;
                    df[a] = dv;
                    ddf[a] = ddv;
                }
                let base = m * points + q;
                if dim == 1 {
                    val[base] = f[0];
                    d1[base] = df[0];
                    d2[base] = ddf[0];
                } else {
                    val[base] = f[0] * f[1];
                    d1[base * 2] = df[0] * f[1];
                    d1[base * 2 + 1] = f[0] * df[1];
                    d2[base * 4] = ddf[0] * f[1];
                    d2[base * 4 + 1] = df[0] * df[1];
                    d2[base * 4 + 2] = df[0] * df[1];
                    d2[base * 4 + 3] = f[0] * ddf[1];
                }
            }
        }

        Ok(SpectralBasis { domain, modes, n_quad, points, weight, val, d1, d2, quad_nodes })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalue(&self, m: usize) -> f64 {
        self.modes[m].eigenvalue
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    pub fn quad_points(&self) -> usize {
        self.points
    }

    /// Scalar weight of every quadrature node; weights sum to the domain
    /// measure exactly.
    pub fn quad_weight(&self) -> f64 {
        self.weight
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    /// Gram matrix of the basis under quadrature, row-major n x n.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for q in 0..self.points {
                    s += self.val[i * self.points + q] * self.val[j * self.points + q];
                }
                s *= self.weight;
                g[i * n + j] = s;
                g[j * n + i] = s;
            }
        }
        g
    }

    /// Quadrature projection of a pointwise function onto the basis.
    pub fn project(&self, f: impl Fn(&[f64]) -> f64) -> Field {
        let dim = self.dim();
        let fv: Vec<f64> =
            (0..self.points).map(|q| f(&self.quad_nodes[q * dim..(q + 1) * dim])).collect();
        self.project_values(&fv)
    }

    /// Projection of values sampled at the quadrature nodes.
    pub fn project_values(&self, values: &[f64]) -> Field {
        assert_eq!(values.len(), self.points);
        let mut c = vec![0.0; self.len()];
        for (m, cm) in c.iter_mut().enumerate() {
            let row = &self.val[m * self.points..(m + 1) * self.points];
            *cm = self.weight * dot(row, values);
        }
        Field { coeffs: c }
    }

    /// Values of the field at the quadrature nodes.
    pub fn evaluate(&self, u: &Field) -> Vec<f64> {
        self.evaluate_derivatives(u, 0).unwrap()
    }

    /// Derivative tuple of order `i` at every quadrature node, flattened as
    /// `points x dim^i`. Order 0 is the value itself; order 2 returns the
    /// full (symmetric) second-derivative tuple.
    pub fn evaluate_derivatives(&self, u: &Field, order: usize) -> Result<Vec<f64>, SpacesError> {
        assert_eq!(u.len(), self.len(), "field length does not match basis");
        let dim = self.dim();
        let table: &[f64] = match order {
            0 => &self.val,
            1 => &self.d1,
            2 => &self.d2,
            _ => return Err(SpacesError::BadOrder(order)),
        };
        let tuple = dim.pow(order as u32);
        let mut out = vec![0.0; self.points * tuple];
        for (m, &c) in u.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &table[m * self.points * tuple..(m + 1) * self.points * tuple];
            for (o, r) in out.iter_mut().zip(row) {
                *o += c * r;
            }
        }
        Ok(out)
    }

    /// Derivative tuples of one basis mode at every quadrature node,
    /// flattened as `points x dim^order`. Panics above order 2.
    pub fn mode_derivatives(&self, m: usize, order: usize) -> &[f64] {
        let table: &[f64] = match order {
            0 => &self.val,
            1 => &self.d1,
            2 => &self.d2,
            _ => panic!("derivative order {order} not supported"),
        };
        let tuple = self.dim().pow(order as u32);
        &table[m * self.points * tuple..(m + 1) * self.points * tuple]
    }

    pub fn norm(&self, u: &Field, kind: NormKind) -> f64 {
        assert_eq!(u.len(), self.len(), "field length does not match basis");
        match kind {
            NormKind::H => h_inner(u, u).sqrt(),
            NormKind::V => self
                .modes
                .iter()
                .zip(&u.coeffs)
                .map(|(m, c)| m.eigenvalue * c * c)
                .sum::<f64>()
                .sqrt(),
            NormKind::DualV => self
                .modes
                .iter()
                .zip(&u.coeffs)
                .map(|(m, c)| c * c / m.eigenvalue)
                .sum::<f64>()
                .sqrt(),
            NormKind::DualA => self
                .modes
                .iter()
                .zip(&u.coeffs)
                .map(|(m, c)| c * c / (m.eigenvalue * m.eigenvalue))
                .sum::<f64>()
                .sqrt(),
            NormKind::X { p, k } => {
                let mut total = 0.0;
                for i in 0..=k {
                    let tuples = self.evaluate_derivatives(u, i).expect("order cap");
                    let width = self.dim().pow(i as u32);
                    let mut s = 0.0;
                    for q in 0..self.points {
                        s += lp_norm(&tuples[q * width..(q + 1) * width], p).powf(p);
                    }
                    total += self.weight * s;
                }
                total.powf(1.0 / p)
            }
        }
    }

    /// Lower estimate of the dual X(p,k)-norm of a dual vector `d` by
    /// probing: max over probes of <d, phi> / |phi|_X. Probes with zero
    /// X-norm are skipped.
    pub fn dual_x_estimate(&self, d: &[f64], p: f64, k: usize, probes: &[Field]) -> f64 {
        assert_eq!(d.len(), self.len());
        let mut best = 0.0f64;
        for phi in probes {
            let x = self.norm(phi, NormKind::X { p, k });
            if x == 0.0 {
                continue;
            }
            let pairing: f64 = d.iter().zip(&phi.coeffs).map(|(a, b)| a * b).sum();
            best = best.max(pairing.abs() / x);
        }
        best
    }

    /// A u = -Laplacian u, diagonal in this basis.
    pub fn apply_a(&self, u: &Field) -> Field {
        assert_eq!(u.len(), self.len());
        Field {
            coeffs: self
                .modes
                .iter()
                .zip(&u.coeffs)
                .map(|(m, c)| m.eigenvalue * c)
                .collect(),
        }
    }
}

/// l^p norm of a derivative tuple.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    if x.len() == 1 {
        return x[0].abs();
    }
    x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axis_factor(domain: &Domain, axis: usize, k: usize, x: f64) -> (f64, f64, f64) {
    let l = domain.lengths[axis];
    let cosine_axis = domain.bc == Boundary::DirichletX1Only && axis == 1;
    if cosine_axis {
        if k == 0 {
            let a = (1.0 / l).sqrt();
            (a, 0.0, 0.0)
        } else {
            let a = (2.0 / l).sqrt();
            let w = k as f64 * std::f64::consts::PI / l;
            (a * (w * x).cos(), -a * w * (w * x).sin(), -a * w * w * (w * x).cos())
        }
    } else {
        let a = (2.0 / l).sqrt();
        let w = k as f64 * std::f64::consts::PI / l;
        (a * (w * x).sin(), a * w * (w * x).cos(), -a * w * w * (w * x).sin())
    }
}

fn select_modes(domain: &Domain, n: usize) -> Vec<Mode> {
    let pi = std::f64::consts::PI;
    if domain.dim == 1 {
        return (1..=n)
            .map(|k| {
                let w = k as f64 * pi / domain.lengths[0];
                Mode { index: [k, 0], eigenvalue: w * w }
            })
            .collect();
    }
    // Candidate ranges wide enough that the first n modes of the global
    // ordering are always covered, including anisotropic rectangles.
    let ratio = |a: f64, b: f64| (a / b).max(1.0).ceil() as usize;
    let k1_max = (n + 1) * ratio(domain.lengths[0], domain.lengths[1]);
    let k2_max = (n + 1) * ratio(domain.lengths[1], domain.lengths[0]);
    let k2_min = if domain.bc == Boundary::DirichletX1Only { 0 } else { 1 };
    let mut cands = Vec::new();
    for k1 in 1..=k1_max {
        for k2 in k2_min..=k2_max {
            let w1 = k1 as f64 * pi / domain.lengths[0];
            let w2 = k2 as f64 * pi / domain.lengths[1];
            cands.push(Mode { index: [k1, k2], eigenvalue: w1 * w1 + w2 * w2 });
        }
    }
    cands.sort_by(|a, b| {
        a.eigenvalue
            .partial_cmp(&b.eigenvalue)
            .unwrap()
            .then(a.index[0].cmp(&b.index[0]))
            .then(a.index[1].cmp(&b.index[1]))
    });
    cands.truncate(n);
    cands
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    fn unit_basis(n: usize, n_quad: usize) -> SpectralBasis {
        SpectralBasis::new(Domain::interval(1.0), n, n_quad).unwrap()
    }

    #[test]
    fn first_mode_eigenvalue_and_shape() {
        let b = unit_basis(4, 64);
        assert!((b.eigenvalue(0) - PI * PI).abs() < 1e-12);
        let u = Field::single_mode(4, 1, 1.0);
        let vals = b.evaluate(&u);
        let nodes = b.quad_nodes();
        for (q, v) in vals.iter().enumerate() {
            let expect = (2.0f64).sqrt() * (PI * nodes[q]).sin();
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_strictly_increase_on_interval() {
        let b = unit_basis(3, 0);
        let eigs: Vec<f64> = b.modes().iter().map(|m| m.eigenvalue).collect();
        assert!((eigs[0] - PI * PI).abs() < 1e-12);
        assert!((eigs[1] - 4.0 * PI * PI).abs() < 1e-12);
        assert!((eigs[2] - 9.0 * PI * PI).abs() < 1e-12);
        assert!(eigs[0] < eigs[1] && eigs[1] < eigs[2]);
    }

    #[test]
    fn gram_is_identity() {
        let b = unit_basis(8, 256);
        let g = b.gram();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (g[i * 8 + j] - expect).abs() <= 1e-10,
                    "gram[{i}][{j}] = {}",
                    g[i * 8 + j]
                );
            }
        }
    }

    #[test]
    fn gram_is_identity_in_two_dims() {
        for bc in [Boundary::Dirichlet, Boundary::DirichletX1Only] {
            let b = SpectralBasis::new(Domain::rectangle(1.0, 1.0, bc), 6, 0).unwrap();
            let n = b.len();
            let g = b.gram();
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i * n + j] - expect).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn mode_ordering_is_prefix_stable() {
        let small = SpectralBasis::new(Domain::rectangle(1.0, 1.0, Boundary::Dirichlet), 5, 0)
            .unwrap();
        let big = SpectralBasis::new(Domain::rectangle(1.0, 1.0, Boundary::Dirichlet), 12, 0)
            .unwrap();
        for (a, b) in small.modes().iter().zip(big.modes()) {
            assert_eq!(a.index, b.index);
        }
        // tie (1,2) vs (2,1) resolved lexicographically
        assert_eq!(big.modes()[1].index, [1, 2]);
        assert_eq!(big.modes()[2].index, [2, 1]);
    }

    #[test]
    fn projection_recovers_single_modes() {
        let b = unit_basis(6, 128);
        let u = b.project(|x| (2.0f64).sqrt() * (PI * x[0]).sin());
        assert!((u.coeffs[0] - 1.0).abs() < 1e-12);
        for c in &u.coeffs[1..] {
            assert!(c.abs() < 1e-12);
        }
        let v = b.project(|x| {
            (2.0f64).sqrt() * (PI * x[0]).sin() + 2.0 * (2.0f64).sqrt() * (3.0 * PI * x[0]).sin()
        });
        assert!((v.coeffs[0] - 1.0).abs() < 1e-12);
        assert!((v.coeffs[2] - 2.0).abs() < 1e-12);
        assert!(v.coeffs[1].abs() < 1e-12 && v.coeffs[3].abs() < 1e-12);
    }

    #[test]
    fn mode_above_cutoff_projects_to_noise_floor() {
        let n = 8;
        let b = unit_basis(n, 256);
        let w9 = b.project(|x| (2.0f64).sqrt() * ((n as f64 + 1.0) * PI * x[0]).sin());
        for c in &w9.coeffs {
            assert!(c.abs() <= 1e-8);
        }
    }

    #[test]
    fn norms_of_first_mode() {
        let b = unit_basis(4, 0);
        let u = Field::single_mode(4, 1, 1.0);
        assert!((b.norm(&u, NormKind::H) - 1.0).abs() < 1e-12);
        assert!((b.norm(&u, NormKind::V) - PI).abs() < 1e-12);
        assert!((b.norm(&u, NormKind::DualV) - 1.0 / PI).abs() < 1e-12);
        let z = Field::zeros(4);
        assert_eq!(b.norm(&z, NormKind::H), 0.0);
        assert_eq!(b.norm(&z, NormKind::X { p: 4.0, k: 1 }), 0.0);
    }

    #[test]
    fn x_norm_of_first_mode_matches_closed_form() {
        // int w1^4 = 3/2, int (w1')^4 = (3/2) pi^4
        let b = unit_basis(4, 64);
        let u = Field::single_mode(4, 1, 1.0);
        let x4 = b.norm(&u, NormKind::X { p: 4.0, k: 1 }).powi(4);
        let expect = 1.5 * (1.0 + PI.powi(4));
        assert!((x4 - expect).abs() / expect < 1e-12, "x4 = {x4}, expect {expect}");
    }

    #[test]
    fn apply_a_scales_by_eigenvalue() {
        let b = unit_basis(4, 0);
        let u = Field::single_mode(4, 1, 1.0);
        let au = b.apply_a(&u);
        assert!((au.coeffs[0] - PI * PI).abs() < 1e-12);
        let z = b.apply_a(&Field::zeros(4));
        assert!(z.coeffs.iter().all(|c| *c == 0.0));
        // <A u, u> = 5 pi^2 for u = w1 + w2, and equals the V-norm squared
        let mut u2 = Field::single_mode(4, 1, 1.0);
        u2.coeffs[1] = 1.0;
        let pairing = h_inner(&b.apply_a(&u2), &u2);
        assert!((pairing - 5.0 * PI * PI).abs() < 1e-12);
        let v2 = b.norm(&u2, NormKind::V).powi(2);
        assert!((pairing - v2).abs() < 1e-12);
    }

    #[test]
    fn derivative_tables_match_closed_forms() {
        let b = unit_basis(4, 64);
        let u = Field::single_mode(4, 1, 1.0);
        let d1 = b.evaluate_derivatives(&u, 1).unwrap();
        let d2 = b.evaluate_derivatives(&u, 2).unwrap();
        let vals = b.evaluate(&u);
        let nodes = b.quad_nodes();
        for q in 0..b.quad_points() {
            let expect = (2.0f64).sqrt() * PI * (PI * nodes[q]).cos();
            assert!((d1[q] - expect).abs() < 1e-12);
            assert!((d2[q] + PI * PI * vals[q]).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_weights_sum_to_measure() {
        let b = unit_basis(5, 0);
        let total = b.quad_weight() * b.quad_points() as f64;
        assert!((total - 1.0).abs() < 1e-14);
        let b2 = SpectralBasis::new(Domain::rectangle(2.0, 3.0, Boundary::Dirichlet), 4, 0)
            .unwrap();
        let total2 = b2.quad_weight() * b2.quad_points() as f64;
        assert!((total2 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_quadrature_is_rejected() {
        let err = SpectralBasis::new(Domain::interval(1.0), 8, 16).err();
        match err {
            Some(SpacesError::QuadratureTooCoarse { required: 32, got: 16 }) => {}
            other => panic!("expected QuadratureTooCoarse, got {other:?}"),
        }
    }

    #[test]
    fn x1_only_modes_honor_the_boundary() {
        let b = SpectralBasis::new(
            Domain::rectangle(1.0, 1.0, Boundary::DirichletX1Only),
            6,
            0,
        )
        .unwrap();
        assert_eq!(b.modes()[0].index, [1, 0]);
        assert!((b.modes()[0].eigenvalue - PI * PI).abs() < 1e-12);
        // every mode vanishes at x1 in {0, 1}
        for m in 0..b.len() {
            let mut u = Field::zeros(b.len());
            u.coeffs[m] = 1.0;
            let probe = |x1: f64, x2: f64| {
                let (v1, _, _) = axis_factor(b.domain(), 0, b.modes()[m].index[0], x1);
                let (v2, _, _) = axis_factor(b.domain(), 1, b.modes()[m].index[1], x2);
                v1 * v2
            };
            assert!(probe(0.0, 0.3).abs() < 1e-12);
            assert!(probe(1.0, 0.7).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn parseval_holds_for_random_fields(coeffs in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let b = unit_basis(6, 64);
            let u = Field::from_coeffs(coeffs);
            let vals = b.evaluate(&u);
            let quad_l2: f64 = vals.iter().map(|v| v * v).sum::<f64>() * b.quad_weight();
            let parseval = h_inner(&u, &u);
            prop_assert!((quad_l2 - parseval).abs() <= 1e-9 * (1.0 + parseval));
        }

        #[test]
        fn poincare_inequality(coeffs in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let b = unit_basis(6, 0);
            let u = Field::from_coeffs(coeffs);
            let v = b.norm(&u, NormKind::V);
            let h = b.norm(&u, NormKind::H);
            prop_assert!(v * v + 1e-12 >= b.eigenvalue(0) * h * h);
        }

        #[test]
        fn projection_is_idempotent_and_commutes_with_a(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 8),
            m in 1usize..8,
        ) {
            let b = unit_basis(8, 0);
            let u = Field::from_coeffs(coeffs);
            let pu = u.resized(m).resized(8);
            let ppu = pu.resized(m).resized(8);
            prop_assert_eq!(&pu, &ppu);
            // P_m A u = A P_m u on the span
            let apu = b.apply_a(&pu);
            let pau = b.apply_a(&u).resized(m).resized(8);
            for (a, b) in apu.coeffs.iter().zip(&pau.coeffs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
