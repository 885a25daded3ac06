//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
    /// Truncate a series once a term falls below this fraction of the sum.
    pub series_rel_cutoff: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            relative_tolerance: 1e-8,
            absolute_tolerance: 1e-12,
            max_subdivisions: 2000,
            series_rel_cutoff: 1e-6,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::param("relative_tolerance", "must be positive"));
        }
        if !(self.absolute_tolerance > 0.0) {
            return Err(Error::param("absolute_tolerance", "must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::param("max_subdivisions", "must be at least 1"));
        }
        if !(self.series_rel_cutoff > 0.0 && self.series_rel_cutoff < 1.0) {
            return Err(Error::param("series_rel_cutoff", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Same spec with both tolerances scaled by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadratureSpec {
            relative_tolerance: self.relative_tolerance * factor,
            absolute_tolerance: self.absolute_tolerance * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

// One 15-point Kronrod panel with the QUADPACK error heuristic.
fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = kron.abs();
    let mut fv = [(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        fv[j] = (f1, f2);
        kron += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = kron * h;
    let resasc = asc * h.abs();
    let resabs = abs_k * h.abs();
    let mut error = ((kron - gauss) * h).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Segment { a, b, value, error }
}

/// Integrate `f` over `[a, b]`, starting from panels split at `breakpoints`
/// (points outside `(a, b)` are ignored), and bisecting the panel with the
/// largest error until the global error meets the spec.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> std::result::Result<Estimate, Estimate> {
    if !(b > a) {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut segments: Vec<Segment> = edges
        .windows(2)
        .map(|w| kronrod(&mut f, w[0], w[1]))
        .collect();
    let initial = segments.len();

    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let target = spec
            .absolute_tolerance
            .max(spec.relative_tolerance * value.abs());
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if segments.len() >= initial + spec.max_subdivisions {
            return Err(Estimate { value, error });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // interval exhausted at machine precision
            return Err(Estimate { value, error });
        }
        segments.push(kronrod(&mut f, s.a, mid));
        segments.push(kronrod(&mut f, mid, s.b));
    }
}

/// [`integrate`] with failures mapped to [`Error::Quadrature`].
pub fn integrate_named<F: FnMut(f64) -> f64>(
    what: impl FnOnce() -> String,
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate(f, a, b, breakpoints, spec)
        .map(|e| e.value)
        .map_err(|e| Error::Quadrature {
            what: what(),
            estimate: e.value,
            error: e.error,
        })
}
