//! Orthogonal decomposition of an output series against k inputs in the
//! frequency domain: Y = Σ G_j + ε with mutually orthogonal components.
//!
//! At each frequency the coefficients of the k-th component solve a
//! (k−1)×(k−1) complex linear system; per Cramer's rule the solution is a
//! ratio of determinants, computed here by partial-pivoted elimination.
//! The cross-spectral matrix convention is `cross(i, j) = f_{X_j X_i}`
//! (row = second series, column = first), so the coefficient system reads
//! F·c = −[f(1,k), …, f(k−1,k)]ᵀ with F the leading (k−1)×(k−1) block.
//!
//! From the component spectra f_{G_j G_j} come the two selection criteria:
//! residual coherence RC (sup over frequency of the added coherence
//! fraction) and integrated spectrum IS (Riemann integral of the added
//! component spectra).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{CrossSpectrum, FrequencyGrid, SpectralConfig, SPECTRUM_FLOOR};
use crate::timeseries::Series;

/// |det F| floor, scaled by the product of diagonal magnitudes so the check
/// is invariant under rescaling the inputs.
const SINGULARITY_FLOOR: f64 = 1e-10;
/// Absolute floor for the projection-coefficient denominator.
const A_DENOM_FLOOR: f64 = 1e-12;
/// Tolerance for the imaginary residue of a component spectrum, relative to
/// the magnitude scale of its defining sum.
const IMAG_RESIDUE_REL: f64 = 1e-8;
/// Negative component values within this relative tolerance clamp to zero;
/// larger negatives indicate a broken system.
const NEG_CLAMP_REL: f64 = 1e-8;

/// Cross-spectral matrices of a k-input/one-output system at one frequency.
///
/// `cross` is row-major k×k with entry (i, j) = f_{X_j X_i}; `xy[j]` holds
/// f_{X_j Y}; `yy` is the output autospectrum value.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    k: usize,
    lambda: f64,
    cross: Vec<Complex64>,
    xy: Vec<Complex64>,
    yy: f64,
    labels: String,
}

impl SpectralPoint {
    pub fn new(
        lambda: f64,
        cross: Vec<Complex64>,
        xy: Vec<Complex64>,
        yy: f64,
        labels: impl Into<String>,
    ) -> Result<Self> {
        let k = xy.len();
        if k == 0 || cross.len() != k * k {
            return Err(Error::InvalidInput(format!(
                "need a k×k cross matrix matching {k} inputs, got {} entries",
                cross.len()
            )));
        }
        for i in 0..k {
            for j in i..k {
                let a = cross[i * k + j];
                let b = cross[j * k + i].conj();
                let tol = 1e-10 * a.norm().max(1.0);
                if (a - b).norm() > tol {
                    return Err(Error::InvalidInput(format!(
                        "cross matrix not Hermitian at ({i}, {j}): {a} vs conj {b}"
                    )));
                }
            }
        }
        Ok(Self {
            k,
            lambda,
            cross,
            xy,
            yy,
            labels: labels.into(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn yy(&self) -> f64 {
        self.yy
    }

    fn cross_at(&self, i: usize, j: usize) -> Complex64 {
        self.cross[i * self.k + j]
    }
}

/// Determinant by Gaussian elimination with partial pivoting; `mat` is a
/// row-major n×n scratch copy that gets destroyed.
fn determinant(mat: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = mat[col * n + col].norm();
        for row in col + 1..n {
            let mag = mat[row * n + col].norm();
            if mag > best {
                best = mag;
                pivot_row = row;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot_row != col {
            for c in 0..n {
                mat.swap(col * n + c, pivot_row * n + c);
            }
            det = -det;
        }
        let pivot = mat[col * n + col];
        det *= pivot;
        for row in col + 1..n {
            let factor = mat[row * n + col] / pivot;
            for c in col + 1..n {
                let sub = factor * mat[col * n + c];
                mat[row * n + c] -= sub;
            }
        }
    }
    det
}

/// Coefficients c_{m,1..m} of the m-th orthogonal component (c_{m,m} = 1),
/// from determinant ratios of the leading (m−1)×(m−1) system.
pub fn cramer_coefficients(point: &SpectralPoint, m: usize) -> Result<Vec<Complex64>> {
    let k = point.k;
    if m == 0 || m > k {
        return Err(Error::InvalidInput(format!(
            "component index {m} out of range 1..={k}"
        )));
    }
    if m == 1 {
        return Ok(vec![Complex64::new(1.0, 0.0)]);
    }
    let n = m - 1;
    let mut f = vec![Complex64::new(0.0, 0.0); n * n];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            f[i * n + j] = point.cross_at(i, j);
        }
        rhs[i] = -point.cross_at(i, m - 1);
    }
    let det_f = determinant(&mut f.clone(), n);
    let floor = SINGULARITY_FLOOR
        * (0..n)
            .map(|i| point.cross_at(i, i).norm())
            .product::<f64>();
    let det_mag = det_f.norm();
    if det_mag < floor || det_mag == 0.0 {
        return Err(Error::SingularSystem {
            lambda: point.lambda,
            labels: point.labels.clone(),
            det_mag,
            floor,
        });
    }
    let mut c = Vec::with_capacity(m);
    for j in 0..n {
        let mut fj = f.clone();
        for i in 0..n {
            fj[i * n + j] = rhs[i];
        }
        c.push(determinant(&mut fj, n) / det_f);
    }
    c.push(Complex64::new(1.0, 0.0));
    Ok(c)
}

/// Projection coefficient A_{m,1} = conj[(Σ c_j f_{X_j Y}) / (Σ c_j f_{X_j X_m})].
pub fn a_coefficient(point: &SpectralPoint, m: usize, c: &[Complex64]) -> Result<Complex64> {
    debug_assert_eq!(c.len(), m);
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for j in 0..m {
        num += c[j] * point.xy[j];
        den += c[j] * point.cross_at(m - 1, j);
    }
    if den.norm() < A_DENOM_FLOOR {
        return Err(Error::DegenerateComponent {
            lambda: point.lambda,
            mag: den.norm(),
        });
    }
    Ok((num / den).conj())
}

fn component_spectrum_checked(
    point: &SpectralPoint,
    m: usize,
    c: &[Complex64],
    a: Complex64,
) -> Result<(f64, bool)> {
    let mut den = Complex64::new(0.0, 0.0);
    let mut den_scale = 0.0;
    for j in 0..m {
        let f = point.cross_at(m - 1, j);
        den += c[j] * f;
        den_scale += c[j].norm() * f.norm();
    }
    if den.im.abs() > IMAG_RESIDUE_REL * den_scale {
        return Err(Error::InconsistentSystem {
            lambda: point.lambda,
            detail: format!(
                "imaginary residue {:e} exceeds {:e} (scale {:e})",
                den.im,
                IMAG_RESIDUE_REL * den_scale,
                den_scale
            ),
        });
    }
    let value = a.norm_sqr() * den.re;
    if den.re < 0.0 {
        if den.re >= -NEG_CLAMP_REL * den_scale {
            return Ok((0.0, true));
        }
        return Err(Error::InconsistentSystem {
            lambda: point.lambda,
            detail: format!(
                "component spectrum {value:e} negative beyond clamp tolerance (scale {den_scale:e})"
            ),
        });
    }
    Ok((value, false))
}

/// Spectrum of the m-th orthogonal component,
/// f_{G_m G_m} = |A_{m,1}|²·Re[Σ c_j f_{X_j X_m}], tiny negatives clamped to 0.
pub fn component_spectrum(
    point: &SpectralPoint,
    m: usize,
    c: &[Complex64],
    a: Complex64,
) -> Result<f64> {
    component_spectrum_checked(point, m, c, a).map(|(v, _)| v)
}

/// Independent oracle: the spectrum of Y explained by the first m inputs,
/// H_m = Re[f_v* S_m⁻¹ f_v], via a direct LU solve (no Cramer recursion).
/// S_m is the Gram-convention spectral matrix S(i, j) = f_{X_i X_j}, the
/// transpose of the stored layout.
///
/// By the orthogonality of the components, Σ_{j≤m} f_{G_j G_j} = H_m.
pub fn explained_spectrum_direct(point: &SpectralPoint, m: usize) -> Result<f64> {
    let k = point.k;
    if m == 0 || m > k {
        return Err(Error::InvalidInput(format!(
            "block size {m} out of range 1..={k}"
        )));
    }
    let f = DMatrix::from_fn(m, m, |i, j| point.cross_at(j, i));
    let rhs = DVector::from_fn(m, |j, _| point.xy[j]);
    let lu = f.lu();
    let solved = lu.solve(&rhs).ok_or_else(|| Error::SingularSystem {
        lambda: point.lambda,
        labels: point.labels.clone(),
        det_mag: 0.0,
        floor: 0.0,
    })?;
    let mut h = Complex64::new(0.0, 0.0);
    for j in 0..m {
        h += point.xy[j].conj() * solved[j];
    }
    Ok(h.re)
}

/// Per-frequency cross-spectral matrices of a k-input system on a grid.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    k: usize,
    grid: FrequencyGrid,
    /// Row-major k×k; entry (i, j) holds f_{X_j X_i}.
    input_cross: Vec<CrossSpectrum>,
    input_output: Vec<CrossSpectrum>,
    output_auto: CrossSpectrum,
    labels: Vec<String>,
}

impl SpectralSystem {
    /// Estimates all auto- and cross-spectra for the given inputs and output.
    /// Entries (j, i) are the exact conjugates of (i, j) by construction.
    pub fn from_series(
        inputs: &[(&str, &Series)],
        y: &Series,
        cfg: &SpectralConfig,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("need at least one input".into()));
        }
        let k = inputs.len();
        let zero = CrossSpectrum::from_values(
            cfg.grid().clone(),
            vec![Complex64::new(0.0, 0.0); cfg.grid().len()],
        )?;
        let mut input_cross = vec![zero; k * k];
        for i in 0..k {
            for j in i..k {
                // entry (i, j) = f_{X_j X_i}
                let f = cfg.estimate(inputs[j].1, inputs[i].1)?;
                if i != j {
                    let mirrored = CrossSpectrum::from_values(
                        cfg.grid().clone(),
                        f.values().iter().map(|v| v.conj()).collect(),
                    )?;
                    input_cross[j * k + i] = mirrored;
                }
                input_cross[i * k + j] = f;
            }
        }
        let input_output = inputs
            .iter()
            .map(|(_, x)| cfg.estimate(x, y))
            .collect::<Result<Vec<_>>>()?;
        let output_auto = cfg.estimate(y, y)?;
        Ok(Self {
            k,
            grid: cfg.grid().clone(),
            input_cross,
            input_output,
            output_auto,
            labels: inputs.iter().map(|(l, _)| l.to_string()).collect(),
        })
    }

    /// Assembles a system from pre-computed spectra, validating grid
    /// agreement and the Hermitian/real-diagonal invariants everywhere.
    pub fn from_spectra(
        input_cross: Vec<Vec<CrossSpectrum>>,
        input_output: Vec<CrossSpectrum>,
        output_auto: CrossSpectrum,
        labels: Vec<String>,
    ) -> Result<Self> {
        let k = input_output.len();
        if k == 0 || input_cross.len() != k || input_cross.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput(
                "input_cross must be k×k matching input_output".into(),
            ));
        }
        let grid = output_auto.grid().clone();
        let mut flat = Vec::with_capacity(k * k);
        for row in input_cross {
            for f in row {
                if f.grid() != &grid {
                    return Err(Error::InvalidInput("spectra on mismatched grids".into()));
                }
                flat.push(f);
            }
        }
        if input_output.iter().any(|f| f.grid() != &grid) {
            return Err(Error::InvalidInput("spectra on mismatched grids".into()));
        }
        let sys = Self {
            k,
            grid,
            input_cross: flat,
            input_output,
            output_auto,
            labels,
        };
        for idx in 0..sys.grid.len() {
            sys.point(idx)?; // runs the Hermitian checks
        }
        Ok(sys)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn output_auto(&self) -> &CrossSpectrum {
        &self.output_auto
    }

    /// The cross-spectral matrices at one grid index.
    pub fn point(&self, index: usize) -> Result<SpectralPoint> {
        let cross = self.input_cross.iter().map(|f| f.at(index)).collect();
        let xy = self.input_output.iter().map(|f| f.at(index)).collect();
        SpectralPoint::new(
            self.grid.points()[index],
            cross,
            xy,
            self.output_auto.at(index).re,
            self.labels.join(", "),
        )
    }
}

/// Counts of numerical guards applied during a decomposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecompWarnings {
    /// Component-spectrum values clamped from tiny negatives to 0.
    pub negative_components_clamped: usize,
    /// Frequencies where f_YY was floored before dividing.
    pub output_floor_applied: usize,
    /// Frequencies where the estimated S_k exceeded 1 (recorded, not clamped).
    pub s_above_one: usize,
}

/// The full orthogonal decomposition of a system over its frequency grid.
#[derive(Debug, Clone)]
pub struct Decomposition {
    grid: FrequencyGrid,
    labels: Vec<String>,
    yy: Vec<f64>,
    /// component_spectra[j] holds f_{G_{j+1} G_{j+1}} over the grid, clamped at 0.
    component_spectra: Vec<Vec<f64>>,
    /// s[j] holds S_{j+1} = Σ_{i≤j+1} f_{G_i G_i} / f_YY over the grid.
    s: Vec<Vec<f64>>,
    warnings: DecompWarnings,
}

/// Runs the Cramer recursion at every frequency and assembles component
/// spectra and lagged-coherence curves.
pub fn decompose(sys: &SpectralSystem) -> Result<Decomposition> {
    let k = sys.k();
    let len = sys.grid().len();
    let mut component_spectra = vec![vec![0.0; len]; k];
    let mut warnings = DecompWarnings::default();
    let mut yy = vec![0.0; len];
    for idx in 0..len {
        let point = sys.point(idx)?;
        yy[idx] = point.yy();
        for m in 1..=k {
            let c = cramer_coefficients(&point, m)?;
            let a = a_coefficient(&point, m, &c)?;
            let (value, clamped) = component_spectrum_checked(&point, m, &c, a)?;
            if clamped {
                warnings.negative_components_clamped += 1;
            }
            component_spectra[m - 1][idx] = value;
        }
    }
    let mut s = vec![vec![0.0; len]; k];
    for idx in 0..len {
        let denom = if yy[idx] > SPECTRUM_FLOOR {
            yy[idx]
        } else {
            warnings.output_floor_applied += 1;
            SPECTRUM_FLOOR
        };
        let mut cum = 0.0;
        for j in 0..k {
            cum += component_spectra[j][idx];
            s[j][idx] = cum / denom;
        }
        if s[k - 1][idx] > 1.0 {
            warnings.s_above_one += 1;
        }
    }
    Ok(Decomposition {
        grid: sys.grid().clone(),
        labels: sys.labels().to_vec(),
        yy,
        component_spectra,
        s,
        warnings,
    })
}

impl Decomposition {
    pub fn k(&self) -> usize {
        self.component_spectra.len()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn warnings(&self) -> DecompWarnings {
        self.warnings
    }

    pub fn output_spectrum(&self) -> &[f64] {
        &self.yy
    }

    /// f_{G_m G_m} over the grid (1-based component index).
    pub fn component_spectrum(&self, m: usize) -> &[f64] {
        &self.component_spectra[m - 1]
    }

    /// S_m over the grid (1-based).
    pub fn lagged_coherence(&self, m: usize) -> &[f64] {
        &self.s[m - 1]
    }

    /// RC = max over the grid of S_k − S_m for baseline 1 ≤ m < k.
    pub fn residual_coherence(&self, baseline_m: usize) -> Result<f64> {
        let k = self.k();
        if baseline_m == 0 || baseline_m >= k {
            return Err(Error::InvalidInput(format!(
                "baseline {baseline_m} must satisfy 1 ≤ m < {k}"
            )));
        }
        let sk = &self.s[k - 1];
        let sm = &self.s[baseline_m - 1];
        Ok(sk
            .iter()
            .zip(sm)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// IS = Riemann integral (grid indices ≥ 1) of Σ_{j>m} f_{G_j G_j}.
    pub fn integrated_spectrum(&self, baseline_m: usize) -> Result<f64> {
        let k = self.k();
        if baseline_m >= k {
            return Err(Error::InvalidInput(format!(
                "baseline {baseline_m} must be < {k}"
            )));
        }
        let len = self.grid.len();
        let mut added = vec![0.0; len];
        for j in baseline_m..k {
            for (acc, v) in added.iter_mut().zip(&self.component_spectra[j]) {
                *acc += v;
            }
        }
        Ok(self.grid.integrate(&added))
    }

    /// Residual variance Eε̂² = ∫f_YY − ∫Σ_j f_{G_j G_j} (both Riemann sums).
    pub fn residual_variance(&self) -> f64 {
        let len = self.grid.len();
        let mut explained = vec![0.0; len];
        for comp in &self.component_spectra {
            for (acc, v) in explained.iter_mut().zip(comp) {
                *acc += v;
            }
        }
        self.grid.integrate(&self.yy) - self.grid.integrate(&explained)
    }

    /// Writes CSV with columns lambda, f_g1, …, f_gk, s_k.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "lambda")?;
        for j in 1..=self.k() {
            write!(w, ",f_g{j}")?;
        }
        writeln!(w, ",s_k")?;
        for (idx, lam) in self.grid.points().iter().enumerate() {
            write!(w, "{lam}")?;
            for comp in &self.component_spectra {
                write!(w, ",{}", comp[idx])?;
            }
            writeln!(w, ",{}", self.s[self.k() - 1][idx])?;
        }
        Ok(())
    }
}

/// Lagged coherence S_k of the full system, per frequency.
pub fn lagged_coherence(sys: &SpectralSystem) -> Result<Vec<f64>> {
    let d = decompose(sys)?;
    Ok(d.lagged_coherence(d.k()).to_vec())
}

/// Residual coherence of the full system against the baseline of its first
/// `baseline_m` inputs.
pub fn residual_coherence(sys: &SpectralSystem, baseline_m: usize) -> Result<f64> {
    decompose(sys)?.residual_coherence(baseline_m)
}

/// Integrated spectrum of the components beyond the first `baseline_m` inputs.
pub fn integrated_spectrum(sys: &SpectralSystem, baseline_m: usize) -> Result<f64> {
    decompose(sys)?.integrated_spectrum(baseline_m)
}
