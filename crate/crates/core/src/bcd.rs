//! Complex deformation of the Brillouin zone, `k -> k + i h(k)`.
//!
//! The field pushes the band energies near a target energy `E` into the lower
//! half plane:
//!
//! ```text
//! h(k) = -alpha * sum_n G^{-1} grad e_n(k) * chi((e_n(k) - E) / dE)
//! ```
//!
//! with `chi(x) = exp(-x^2)`. Gradients are taken in reduced coordinates and
//! `G^{-1}` (the inverse reciprocal metric) turns the displacement into the
//! Cartesian steepest-descent direction, so `alpha` has the units of
//! (Cartesian k)^2 / energy and `Im e_n(k + i h) ~ -alpha |grad_cart e_n|^2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result, Warning};
use crate::lattice::{band_eigens, KGrid, TightBindingModel};

/// Group velocities (Cartesian) below this count as vanishing.
pub const GRADIENT_FLOOR: f64 = 1e-3;

/// Jacobian moduli below this trigger [`Warning::DeformationTooStrong`].
pub const JACOBIAN_FLOOR: f64 = 1e-6;

const MAX_WARNINGS: usize = 32;

/// Energy cutoff profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Cutoff {
    #[default]
    Gaussian,
}

impl Cutoff {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Cutoff::Gaussian => (-x * x).exp(),
        }
    }

    /// Beyond this |x| the cutoff is below 1e-40 and treated as zero.
    fn support(self) -> f64 {
        match self {
            Cutoff::Gaussian => 9.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationParams {
    pub energy: f64,
    pub alpha: f64,
    pub delta_e: f64,
    pub cutoff: Cutoff,
}

impl DeformationParams {
    pub fn new(energy: f64, alpha: f64, delta_e: f64) -> Result<Self> {
        let p = Self {
            energy,
            alpha,
            delta_e,
            cutoff: Cutoff::Gaussian,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.energy.is_finite() {
            return Err(Error::InvalidParams("target energy must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.delta_e > 0.0 && self.delta_e.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "delta_e must be > 0, got {}",
                self.delta_e
            )));
        }
        Ok(())
    }

    pub fn at_energy(mut self, energy: f64) -> Self {
        self.energy = energy;
        self
    }
}

/// How `h'(k)` is obtained from the grid samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianScheme {
    /// Exact derivative of the trigonometric interpolant (FFT).
    #[default]
    Spectral,
    /// Second-order central differences with the grid spacing as step.
    CentralDifference,
}

/// Sampled deformation on an `N^d` grid plus `det(1 + i h'(k))` per point.
#[derive(Debug, Clone)]
pub struct DeformationField {
    params: Option<DeformationParams>,
    grid: KGrid,
    samples: Vec<Vec<f64>>,
    jacobians: Vec<Complex64>,
    scheme: JacobianScheme,
    warnings: Vec<Warning>,
}

impl DeformationField {
    /// `h = 0`: the plain Monkhorst-Pack quadrature.
    pub fn trivial(dim: usize, n: usize) -> Self {
        let grid = KGrid::new(dim, n);
        Self {
            params: None,
            grid,
            samples: vec![vec![0.0; dim]; grid.len()],
            jacobians: vec![Complex64::new(1.0, 0.0); grid.len()],
            scheme: JacobianScheme::Spectral,
            warnings: Vec::new(),
        }
    }

    /// Field from arbitrary samples (indexed like [`KGrid`]).
    pub fn from_samples(dim: usize, n: usize, samples: Vec<Vec<f64>>, scheme: JacobianScheme) -> Result<Self> {
        let grid = KGrid::new(dim, n);
        if n < 2 {
            return Err(Error::InvalidParams("grid size must be at least 2".into()));
        }
        if samples.len() != grid.len() || samples.iter().any(|h| h.len() != dim) {
            return Err(Error::InvalidParams("sample array has the wrong shape".into()));
        }
        let jacobians = compute_jacobians(grid, &samples, scheme);
        let warnings = jacobian_warnings(grid, &jacobians);
        Ok(Self {
            params: None,
            grid,
            samples,
            jacobians,
            scheme,
            warnings,
        })
    }

    pub fn params(&self) -> Option<&DeformationParams> {
        self.params.as_ref()
    }

    pub fn grid(&self) -> KGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn jacobians(&self) -> &[Complex64] {
        &self.jacobians
    }

    pub fn scheme(&self) -> JacobianScheme {
        self.scheme
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn is_trivial(&self) -> bool {
        self.samples.iter().all(|h| h.iter().all(|&x| x == 0.0))
    }

    /// Complex wavevector `k + i h(k)` at a grid point.
    pub fn kappa(&self, flat: usize) -> Vec<Complex64> {
        self.grid
            .point(flat)
            .into_iter()
            .zip(&self.samples[flat])
            .map(|(k, &h)| Complex64::new(k, h))
            .collect()
    }

    /// CSV rows `k_1..k_d, h_1..h_d, re_det, im_det`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, header: &str) -> std::io::Result<()> {
        writeln!(out, "# {header}")?;
        let d = self.dim();
        let cols: Vec<String> = (1..=d)
            .map(|i| format!("k{i}"))
            .chain((1..=d).map(|i| format!("h{i}")))
            .chain(["re_det".to_string(), "im_det".to_string()])
            .collect();
        writeln!(out, "{}", cols.join(","))?;
        for flat in 0..self.grid.len() {
            let row: Vec<String> = self
                .grid
                .point(flat)
                .into_iter()
                .map(|k| if k >= 0.5 { k - 1.0 } else { k })
                .chain(self.samples[flat].iter().copied())
                .chain([self.jacobians[flat].re, self.jacobians[flat].im])
                .map(|x| format!("{x:.12e}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Samples `h` at every grid point and fills the Jacobians.
pub fn build_deformation(model: &TightBindingModel, params: DeformationParams, n: usize) -> Result<DeformationField> {
    build_deformation_with(model, params, n, JacobianScheme::Spectral)
}

pub fn build_deformation_with(
    model: &TightBindingModel,
    params: DeformationParams,
    n: usize,
    scheme: JacobianScheme,
) -> Result<DeformationField> {
    params.validate()?;
    if n < 2 {
        return Err(Error::InvalidParams("grid size must be at least 2".into()));
    }
    let grid = KGrid::new(model.dim(), n);
    let ginv = model.inverse_reciprocal_metric();
    let dim = model.dim();

    let mut samples = Vec::with_capacity(grid.len());
    let mut warnings = Vec::new();
    let mut vh_count = 0usize;
    for flat in 0..grid.len() {
        let k = grid.point(flat);
        let bands = band_eigens(model, &k);
        let mut h = DVector::<f64>::zeros(dim);
        let mut in_window = false;
        for (nb, (&e, grad)) in bands.energies.iter().zip(&bands.gradients).enumerate() {
            let x = (e - params.energy) / params.delta_e;
            if x.abs() < 1.0 {
                in_window = true;
                let cart = model.cartesian_gradient_norm(grad);
                if cart < GRADIENT_FLOOR && vh_count < MAX_WARNINGS {
                    vh_count += 1;
                    warnings.push(Warning::VanHoveProximity {
                        k: k.clone(),
                        band: nb,
                        energy: e,
                        gradient: cart,
                    });
                }
            }
            if x.abs() > params.cutoff.support() {
                continue;
            }
            let weight = params.alpha * params.cutoff.eval(x);
            let g = DVector::from_column_slice(grad);
            h -= (&ginv * g) * weight;
        }
        if in_window && bands.degeneracy.is_some() && vh_count < MAX_WARNINGS {
            vh_count += 1;
            warnings.push(Warning::VanHoveProximity {
                k: k.clone(),
                band: 0,
                energy: params.energy,
                gradient: 0.0,
            });
        }
        samples.push(h.iter().copied().collect());
    }

    let jacobians = compute_jacobians(grid, &samples, scheme);
    warnings.extend(jacobian_warnings(grid, &jacobians));
    Ok(DeformationField {
        params: Some(params),
        grid,
        samples,
        jacobians,
        scheme,
        warnings,
    })
}

fn jacobian_warnings(grid: KGrid, jacobians: &[Complex64]) -> Vec<Warning> {
    jacobians
        .iter()
        .enumerate()
        .filter(|(_, j)| j.norm() < JACOBIAN_FLOOR)
        .take(MAX_WARNINGS)
        .map(|(flat, j)| Warning::DeformationTooStrong {
            k: grid.point(flat),
            modulus: j.norm(),
        })
        .collect()
}

/// `det(1 + i h'(k))` at one grid point.
pub fn jacobian_det(grid: KGrid, samples: &[Vec<f64>], flat: usize, scheme: JacobianScheme) -> Complex64 {
    let d = grid.dim;
    let mut deriv = DMatrix::<f64>::zeros(d, d);
    for axis in 0..d {
        for comp in 0..d {
            deriv[(comp, axis)] = match scheme {
                JacobianScheme::CentralDifference => {
                    let p = grid.neighbour(flat, axis, 1);
                    let m = grid.neighbour(flat, axis, -1);
                    (samples[p][comp] - samples[m][comp]) * grid.n as f64 / 2.0
                }
                JacobianScheme::Spectral => {
                    let line = line_indices(grid, flat, axis);
                    let pos = grid.multi_index(flat)[axis];
                    let values: Vec<f64> = line.iter().map(|&i| samples[i][comp]).collect();
                    spectral_derivative_at(&values, pos)
                }
            };
        }
    }
    det_one_plus_i(&deriv)
}

fn det_one_plus_i(deriv: &DMatrix<f64>) -> Complex64 {
    let d = deriv.nrows();
    let m = DMatrix::<Complex64>::from_fn(d, d, |r, c| {
        Complex64::new(if r == c { 1.0 } else { 0.0 }, deriv[(r, c)])
    });
    m.determinant()
}

fn line_indices(grid: KGrid, flat: usize, axis: usize) -> Vec<usize> {
    let mut multi = grid.multi_index(flat);
    (0..grid.n)
        .map(|j| {
            multi[axis] = j;
            grid.flat_index(&multi)
        })
        .collect()
}

/// Derivative at node `pos` of the trigonometric interpolant of `values`
/// (period 1), computed by a direct DFT.
fn spectral_derivative_at(values: &[f64], pos: usize) -> f64 {
    let n = values.len();
    let mut acc = 0.0;
    for m in 1..n {
        let freq = signed_frequency(m, n);
        if freq == 0.0 {
            continue;
        }
        let mut coeff = Complex64::new(0.0, 0.0);
        for (j, &v) in values.iter().enumerate() {
            let arg = -2.0 * std::f64::consts::PI * (j * m) as f64 / n as f64;
            coeff += Complex64::from_polar(v, arg);
        }
        let arg = 2.0 * std::f64::consts::PI * (pos * m) as f64 / n as f64;
        let term = coeff * Complex64::new(0.0, 2.0 * std::f64::consts::PI * freq) * Complex64::from_polar(1.0, arg);
        acc += term.re;
    }
    acc / n as f64
}

/// Frequency of DFT bin `m`, with the Nyquist bin of even `n` dropped.
fn signed_frequency(m: usize, n: usize) -> f64 {
    if 2 * m == n {
        0.0
    } else if 2 * m < n {
        m as f64
    } else {
        m as f64 - n as f64
    }
}

/// Spectral derivative of a periodic grid function along `axis` (period 1).
pub fn spectral_derivative(grid: KGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut out = vec![0.0; values.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for flat in 0..grid.len() {
        if grid.multi_index(flat)[axis] != 0 {
            continue;
        }
        let line = line_indices(grid, flat, axis);
        for (b, &i) in buf.iter_mut().zip(&line) {
            *b = Complex64::new(values[i], 0.0);
        }
        fft.process(&mut buf);
        for (m, b) in buf.iter_mut().enumerate() {
            *b *= Complex64::new(0.0, 2.0 * std::f64::consts::PI * signed_frequency(m, n));
        }
        ifft.process(&mut buf);
        for (b, &i) in buf.iter().zip(&line) {
            out[i] = b.re / n as f64;
        }
    }
    out
}

fn compute_jacobians(grid: KGrid, samples: &[Vec<f64>], scheme: JacobianScheme) -> Vec<Complex64> {
    let d = grid.dim;
    if samples.iter().all(|h| h.iter().all(|&x| x == 0.0)) {
        return vec![Complex64::new(1.0, 0.0); grid.len()];
    }
    // derivs[comp][axis][flat]
    let derivs: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|comp| {
            let values: Vec<f64> = samples.iter().map(|h| h[comp]).collect();
            (0..d)
                .map(|axis| match scheme {
                    JacobianScheme::Spectral => spectral_derivative(grid, &values, axis),
                    JacobianScheme::CentralDifference => (0..grid.len())
                        .map(|flat| {
                            let p = grid.neighbour(flat, axis, 1);
                            let m = grid.neighbour(flat, axis, -1);
                            (values[p] - values[m]) * grid.n as f64 / 2.0
                        })
                        .collect(),
                })
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|flat| {
            let deriv = DMatrix::from_fn(d, d, |comp, axis| derivs[comp][axis][flat]);
            det_one_plus_i(&deriv)
        })
        .collect()
}

/// Shared handle, cheap to clone across evaluators.
pub type SharedField = Arc<DeformationField>;

// ---------------------------------------------------------------------------
// Parameter validation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// `dE << dist(E, van Hove energies)`
    Smoothness,
    /// `alpha |grad e| << diam(B)`
    FirstOrder,
    /// `|Im z| << alpha |grad e|^2`
    SpectrumClearance,
    /// `diam(B)/N << min(dE/|grad e|, alpha |grad e|)`
    IntegrationAccuracy,
    /// `N >> |R - R'|`
    GridVsRange,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Smoothness => "smoothness",
            Rule::FirstOrder => "first-order",
            Rule::SpectrumClearance => "spectrum-clearance",
            Rule::IntegrationAccuracy => "integration-accuracy",
            Rule::GridVsRange => "grid-vs-range",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleStatus {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for RuleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleStatus::Pass => "pass",
            RuleStatus::Warn => "warn",
            RuleStatus::Fail => "fail",
        })
    }
}

/// "Much less than" means a factor of at least 5; a factor of 2 is a warning.
pub const PASS_FACTOR: f64 = 5.0;
pub const WARN_FACTOR: f64 = 2.0;

fn status_of(ratio: f64) -> RuleStatus {
    if ratio >= PASS_FACTOR {
        RuleStatus::Pass
    } else if ratio >= WARN_FACTOR {
        RuleStatus::Warn
    } else {
        RuleStatus::Fail
    }
}

/// One inequality `small << large`.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleCheck {
    pub rule: Rule,
    pub small: f64,
    pub large: f64,
    pub ratio: f64,
    pub status: RuleStatus,
}

impl RuleCheck {
    fn new(rule: Rule, small: f64, large: f64) -> Self {
        let ratio = if small <= 0.0 { f64::INFINITY } else { large / small };
        Self {
            rule,
            small,
            large,
            ratio,
            status: status_of(ratio),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rules: Vec<RuleCheck>,
    /// All van Hove energies found (band extrema, saddles, crossings).
    pub van_hove: Vec<f64>,
    /// Van Hove energies within `10 dE` of the target.
    pub van_hove_near: Vec<f64>,
    /// Grid points in the Fermi-surface shell `|e - E| < dE/4`.
    pub fermi_points: usize,
    pub min_gradient: f64,
    pub max_gradient: f64,
}

impl ValidationReport {
    pub fn rule(&self, rule: Rule) -> &RuleCheck {
        self.rules.iter().find(|r| r.rule == rule).expect("all rules present")
    }

    pub fn worst(&self) -> RuleStatus {
        self.rules.iter().map(|r| r.status).max().unwrap_or(RuleStatus::Pass)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(
                f,
                "{:<22} {:<4}  {:.4e} << {:.4e}  (factor {:.3})",
                r.rule.to_string(),
                r.status.to_string(),
                r.small,
                r.large,
                r.ratio
            )?;
        }
        writeln!(f, "fermi-shell points: {}", self.fermi_points)?;
        write!(f, "van Hove energies:")?;
        for e in &self.van_hove {
            write!(f, " {e:.6}")?;
        }
        Ok(())
    }
}

/// Evaluates the rules of thumb for `(alpha, dE, N)` at target energy `E`.
///
/// `rmax` is the largest `|R - R'|` to be evaluated and `depth` the largest
/// `|Im z|` below the axis that the continuation must reach. Gradients are
/// Cartesian, taken over the Fermi shell `|e_n(k) - E| < dE/4` of the `N^d`
/// grid.
pub fn validate_parameters(
    model: &TightBindingModel,
    params: &DeformationParams,
    n: usize,
    rmax: f64,
    depth: f64,
) -> ValidationReport {
    let grid = KGrid::new(model.dim(), n.max(1));
    let mut min_g = f64::INFINITY;
    let mut max_g: f64 = 0.0;
    let mut shell = 0usize;
    for flat in 0..grid.len() {
        let b = band_eigens(model, &grid.point(flat));
        for (e, g) in b.energies.iter().zip(&b.gradients) {
            if (e - params.energy).abs() < params.delta_e / 4.0 {
                let cart = model.cartesian_gradient_norm(g);
                min_g = min_g.min(cart);
                max_g = max_g.max(cart);
                shell += 1;
            }
        }
    }
    let van_hove = find_van_hove_energies(model, n.max(48));
    let dist = van_hove
        .iter()
        .map(|e| (e - params.energy).abs())
        .fold(f64::INFINITY, f64::min);
    let van_hove_near = van_hove
        .iter()
        .copied()
        .filter(|e| (e - params.energy).abs() < 10.0 * params.delta_e)
        .collect();

    let diam = model.zone_diameter();
    let (alpha, de) = (params.alpha, params.delta_e);
    let rules = if shell == 0 {
        // Target energy in a gap: nothing to deform.
        vec![
            RuleCheck::new(Rule::Smoothness, de, dist),
            RuleCheck::new(Rule::FirstOrder, 0.0, diam),
            RuleCheck::new(Rule::SpectrumClearance, 0.0, 0.0),
            RuleCheck::new(Rule::IntegrationAccuracy, 0.0, 0.0),
            RuleCheck::new(Rule::GridVsRange, rmax, n as f64),
        ]
    } else {
        vec![
            RuleCheck::new(Rule::Smoothness, de, dist),
            RuleCheck::new(Rule::FirstOrder, alpha * max_g, diam),
            RuleCheck::new(Rule::SpectrumClearance, depth, alpha * min_g * min_g),
            RuleCheck::new(
                Rule::IntegrationAccuracy,
                diam / n as f64,
                (de / max_g).min(alpha * min_g),
            ),
            RuleCheck::new(Rule::GridVsRange, rmax, n as f64),
        ]
    };
    ValidationReport {
        rules,
        van_hove,
        van_hove_near,
        fermi_points: shell,
        min_gradient: if shell == 0 { 0.0 } else { min_g },
        max_gradient: max_g,
    }
}

/// Band extrema, saddle points and band crossings, located by compass search
/// from local minima of `|grad e|` (resp. of the band gap) on an `n^d` grid.
pub fn find_van_hove_energies(model: &TightBindingModel, n: usize) -> Vec<f64> {
    let grid = KGrid::new(model.dim(), n);
    let m = model.n_orbitals();
    let data: Vec<_> = (0..grid.len()).map(|f| band_eigens(model, &grid.point(f))).collect();
    let mut found: Vec<f64> = Vec::new();
    let mut push = |e: f64| {
        if !found.iter().any(|x| (x - e).abs() < 1e-6) {
            found.push(e);
        }
    };

    let grad2 = |k: &[f64], band: usize| {
        let b = band_eigens(model, k);
        let g = model.cartesian_gradient_norm(&b.gradients[band]);
        g * g
    };
    let gap = |k: &[f64], band: usize| {
        let b = band_eigens(model, k);
        b.energies[band + 1] - b.energies[band]
    };

    for band in 0..m {
        let field: Vec<f64> = data
            .iter()
            .map(|b| model.cartesian_gradient_norm(&b.gradients[band]))
            .collect();
        let scale = field.iter().copied().fold(0.0, f64::max);
        for flat in local_minima(grid, &field) {
            if field[flat] > 0.25 * scale {
                continue;
            }
            let k = compass_search(&grid.point(flat), 1.0 / n as f64, |k| grad2(k, band));
            if grad2(&k, band).sqrt() < 1e-6 {
                let b = band_eigens(model, &k);
                // Skip points that are really band crossings.
                if b.degeneracy.is_none() {
                    push(b.energies[band]);
                }
            }
        }
        if band + 1 < m {
            let field: Vec<f64> = data.iter().map(|b| b.energies[band + 1] - b.energies[band]).collect();
            let scale = field.iter().copied().fold(0.0, f64::max);
            for flat in local_minima(grid, &field) {
                if field[flat] > 0.25 * scale {
                    continue;
                }
                let k = compass_search(&grid.point(flat), 1.0 / n as f64, |k| gap(k, band));
                if gap(&k, band) < 1e-6 {
                    let b = band_eigens(model, &k);
                    push(0.5 * (b.energies[band] + b.energies[band + 1]));
                }
            }
        }
    }
    found.sort_by(f64::total_cmp);
    found
}

fn local_minima(grid: KGrid, field: &[f64]) -> Vec<usize> {
    (0..grid.len())
        .filter(|&flat| {
            (0..grid.dim).all(|axis| {
                field[flat] <= field[grid.neighbour(flat, axis, 1)]
                    && field[flat] <= field[grid.neighbour(flat, axis, -1)]
            })
        })
        .collect()
}

fn compass_search(start: &[f64], step0: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut step = step0;
    let mut evals = 0;
    while step > 1e-13 && evals < 20_000 {
        let mut improved = false;
        for axis in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[axis] += sign * step;
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        // Diagonal moves help along valleys that are not axis aligned.
        if !improved && x.len() == 2 {
            for (s0, s1) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let y = vec![x[0] + s0 * step, x[1] + s1 * step];
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    x
}
