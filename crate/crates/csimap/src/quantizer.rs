//! Two-part quantizer for large-scale channel gains.
//!
//! The codebook splits into a shadow set `Z` and a distance set `R`; the
//! induced gain codeword for the index pair `(i, n)` is `z_i / r_n^gamma`
//! (a squared-gain, i.e. `beta`, value). Quantization is nearest-neighbor
//! in the squared-gain domain; design is Lloyd iteration with alternating
//! coordinate updates on the product grid.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuantizerError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("codebook needs {want} codewords but only {have} training samples")]
    TooFewSamples { want: usize, have: usize },
    #[error("codebook sizes must be at least 1")]
    ZeroSize,
    #[error("codeword values must be positive, finite, and strictly ascending")]
    BadCodewords,
    #[error("index ({i}, {n}) out of range for codebook ({i_len} x {n_len})")]
    IndexOutOfRange {
        i: usize,
        n: usize,
        i_len: usize,
        n_len: usize,
    },
    #[error("training gain must be nonnegative and finite, got {0}")]
    BadTrainingGain(f64),
    #[error("codebook file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("codebook file i/o: {0}")]
    Io(String),
}

/// Index pair into the two-part codebook: a quantized channel state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Qcsi {
    /// Index into the shadow set `Z`.
    pub shadow_idx: usize,
    /// Index into the distance set `R`.
    pub distance_idx: usize,
}

/// The two-part codebook with the path-loss exponent fixed at design time.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    z_values: Vec<f64>,
    r_values: Vec<f64>,
    gamma: f64,
    version: u32,
    /// Cached induced squared-gain grid, row-major over (shadow, distance).
    induced: Vec<f64>,
}

impl Codebook {
    /// Validates and builds a codebook. Both value sets must be strictly
    /// ascending, positive, and finite; every induced gain must be finite.
    pub fn new(
        z_values: Vec<f64>,
        r_values: Vec<f64>,
        gamma: f64,
        version: u32,
    ) -> Result<Self, QuantizerError> {
        if z_values.is_empty() || r_values.is_empty() {
            return Err(QuantizerError::ZeroSize);
        }
        let ascending_positive = |v: &[f64]| {
            v.iter().all(|x| x.is_finite() && *x > 0.0) && v.windows(2).all(|w| w[0] < w[1])
        };
        if !ascending_positive(&z_values)
            || !ascending_positive(&r_values)
            || gamma.is_nan()
            || gamma <= 0.0
        {
            return Err(QuantizerError::BadCodewords);
        }
        let mut induced = Vec::with_capacity(z_values.len() * r_values.len());
        for &z in &z_values {
            for &r in &r_values {
                let q = z / r.powf(gamma);
                if !q.is_finite() || q <= 0.0 {
                    return Err(QuantizerError::BadCodewords);
                }
                induced.push(q);
            }
        }
        Ok(Codebook {
            z_values,
            r_values,
            gamma,
            version,
            induced,
        })
    }

    pub fn shadow_levels(&self) -> usize {
        self.z_values.len()
    }

    pub fn distance_levels(&self) -> usize {
        self.r_values.len()
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    pub fn r_values(&self) -> &[f64] {
        &self.r_values
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Induced squared gain `z_i / r_n^gamma` for one index pair.
    pub fn induced_gain_sq(&self, q: Qcsi) -> Result<f64, QuantizerError> {
        self.check(q)?;
        Ok(self.induced[q.shadow_idx * self.r_values.len() + q.distance_idx])
    }

    fn check(&self, q: Qcsi) -> Result<(), QuantizerError> {
        if q.shadow_idx >= self.z_values.len() || q.distance_idx >= self.r_values.len() {
            return Err(QuantizerError::IndexOutOfRange {
                i: q.shadow_idx,
                n: q.distance_idx,
                i_len: self.z_values.len(),
                n_len: self.r_values.len(),
            });
        }
        Ok(())
    }

    /// Serializes to the flat text format: header `I N gamma version`,
    /// then the shadow values and the distance values, one per line, each
    /// printed with 17 significant digits so reloading is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {}",
            self.z_values.len(),
            self.r_values.len(),
            crate::fmt_f64_exact(self.gamma),
            self.version
        );
        for z in &self.z_values {
            let _ = writeln!(out, "{}", crate::fmt_f64_exact(*z));
        }
        for r in &self.r_values {
            let _ = writeln!(out, "{}", crate::fmt_f64_exact(*r));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, QuantizerError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(QuantizerError::Parse {
            line: 1,
            reason: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(QuantizerError::Parse {
                line: 1,
                reason: format!(
                    "header must be `I N gamma version`, got {} fields",
                    fields.len()
                ),
            });
        }
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| QuantizerError::Parse {
                line: 1,
                reason: format!("bad {what}: {s:?}"),
            })
        };
        let i_len = parse_usize(fields[0], "shadow count")?;
        let n_len = parse_usize(fields[1], "distance count")?;
        let gamma: f64 = fields[2].parse().map_err(|_| QuantizerError::Parse {
            line: 1,
            reason: format!("bad gamma: {:?}", fields[2]),
        })?;
        let version: u32 = fields[3].parse().map_err(|_| QuantizerError::Parse {
            line: 1,
            reason: format!("bad version: {:?}", fields[3]),
        })?;
        let mut values = Vec::with_capacity(i_len + n_len);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line.trim().parse().map_err(|_| QuantizerError::Parse {
                line: idx + 1,
                reason: format!("bad value: {line:?}"),
            })?;
            values.push(v);
        }
        if values.len() != i_len + n_len {
            return Err(QuantizerError::Parse {
                line: text.lines().count(),
                reason: format!("expected {} values, found {}", i_len + n_len, values.len()),
            });
        }
        let r_values = values.split_off(i_len);
        Codebook::new(values, r_values, gamma, version)
    }

    pub fn save(&self, path: &Path) -> Result<(), QuantizerError> {
        std::fs::write(path, self.to_text()).map_err(|e| QuantizerError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, QuantizerError> {
        let text = std::fs::read_to_string(path).map_err(|e| QuantizerError::Io(e.to_string()))?;
        Codebook::from_text(&text)
    }
}

/// Nearest codeword to the estimated gain, measured in the squared-gain
/// domain; ties go to the smaller shadow index, then the smaller distance
/// index.
pub fn quantize(gain_estimate: f64, codebook: &Codebook) -> Qcsi {
    let target = gain_estimate * gain_estimate;
    let n_len = codebook.r_values.len();
    let mut best = 0usize;
    let mut best_err = f64::INFINITY;
    for (flat, &q) in codebook.induced.iter().enumerate() {
        let err = (target - q).abs();
        if err < best_err {
            best_err = err;
            best = flat;
        }
    }
    Qcsi {
        shadow_idx: best / n_len,
        distance_idx: best % n_len,
    }
}

/// Reconstructed gain and squared gain for a quantized state.
pub fn dequantize(q: Qcsi, codebook: &Codebook) -> Result<(f64, f64), QuantizerError> {
    let beta = codebook.induced_gain_sq(q)?;
    Ok((beta.sqrt(), beta))
}

/// Knobs for [`design_codebook`].
#[derive(Debug, Clone)]
pub struct DesignParams {
    pub shadow_levels: usize,
    pub distance_levels: usize,
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop when the relative distortion improvement drops below this.
    pub tol: f64,
    pub version: u32,
}

impl DesignParams {
    pub fn new(shadow_levels: usize, distance_levels: usize, gamma: f64) -> Self {
        DesignParams {
            shadow_levels,
            distance_levels,
            gamma,
            max_iters: 100,
            tol: 1e-10,
            version: 1,
        }
    }
}

/// Optional side information for seeding: the simulator knows its geometry,
/// so the distance set can start from real BS-UT distances and the shadow
/// set from real shadow draws. Without hints the seeds are spread over the
/// training gains with the distance set normalized to geometric mean 1.
#[derive(Debug, Clone, Default)]
pub struct SeedHints<'a> {
    pub distances: Option<&'a [f64]>,
    pub shadows: Option<&'a [f64]>,
}

/// Per-run design diagnostics.
#[derive(Debug, Clone)]
pub struct DesignReport {
    /// Mean squared distortion in the squared-gain domain, one entry per
    /// Lloyd iteration (recorded after assignment). Non-increasing.
    pub distortion_trace: Vec<f64>,
    pub iterations: usize,
}

impl DesignReport {
    /// Root-mean-square distortion at the final iteration.
    pub fn final_rms(&self) -> f64 {
        self.distortion_trace
            .last()
            .map(|d| d.sqrt())
            .unwrap_or(0.0)
    }

    pub fn final_mse(&self) -> f64 {
        *self.distortion_trace.last().unwrap_or(&0.0)
    }
}

/// Designs the two-part codebook by Lloyd iteration over the product grid.
///
/// Each round assigns every training sample to its nearest induced gain
/// codeword, then updates the shadow set with the distance set held fixed
/// (weighted least squares in the squared-gain domain) and vice versa.
/// Distortion never increases from one round to the next.
pub fn design_codebook(
    training_gains: &[f64],
    params: &DesignParams,
    hints: SeedHints<'_>,
) -> Result<(Codebook, DesignReport), QuantizerError> {
    if training_gains.is_empty() {
        return Err(QuantizerError::EmptyTrainingSet);
    }
    if params.shadow_levels == 0 || params.distance_levels == 0 {
        return Err(QuantizerError::ZeroSize);
    }
    let want = params.shadow_levels * params.distance_levels;
    if want > training_gains.len() {
        return Err(QuantizerError::TooFewSamples {
            want,
            have: training_gains.len(),
        });
    }
    if let Some(&bad) = training_gains.iter().find(|g| !g.is_finite() || **g < 0.0) {
        return Err(QuantizerError::BadTrainingGain(bad));
    }

    let gamma = params.gamma;
    let targets: Vec<f64> = training_gains.iter().map(|g| g * g).collect();

    let mut r = seed_distances(&targets, params, &hints);
    let mut z = seed_shadows(&targets, params, &hints, &r);

    let mut assignment = vec![(0usize, 0usize); targets.len()];
    let mut trace: Vec<f64> = Vec::new();
    let n_len = params.distance_levels;

    for iter in 0..params.max_iters.max(1) {
        // Assignment: nearest induced codeword, first-best keeps the
        // smallest (i, n) on exact ties.
        let mut mse = 0.0;
        let inv_r: Vec<f64> = r.iter().map(|rv| rv.powf(-gamma)).collect();
        for (s, &t) in targets.iter().enumerate() {
            let mut best = (0usize, 0usize);
            let mut best_err = f64::INFINITY;
            for (i, &zv) in z.iter().enumerate() {
                for (n, &u) in inv_r.iter().enumerate() {
                    let err = (t - zv * u).abs();
                    if err < best_err {
                        best_err = err;
                        best = (i, n);
                    }
                }
            }
            assignment[s] = best;
            mse += best_err * best_err;
        }
        mse /= targets.len() as f64;
        let converged = matches!(trace.last(), Some(&prev) if {
            let improvement = prev - mse;
            improvement <= params.tol * prev.max(f64::MIN_POSITIVE)
        });
        trace.push(mse);
        if converged || iter + 1 == params.max_iters.max(1) {
            break;
        }

        // Shadow update with distances fixed: minimize sum (t - z * u)^2
        // over z for each shadow cell -> z = sum(t*u) / sum(u^2).
        let mut num = vec![0.0; z.len()];
        let mut den = vec![0.0; z.len()];
        for (s, &(i, n)) in assignment.iter().enumerate() {
            let u = inv_r[n];
            num[i] += targets[s] * u;
            den[i] += u * u;
        }
        for i in 0..z.len() {
            if den[i] > 0.0 && num[i] > 0.0 {
                z[i] = num[i] / den[i];
            }
        }

        // Distance update with shadows fixed, in the u = r^-gamma variable:
        // u = sum(t*z) / sum(z^2), then r = u^(-1/gamma).
        let mut num = vec![0.0; n_len];
        let mut den = vec![0.0; n_len];
        for (s, &(i, n)) in assignment.iter().enumerate() {
            num[n] += targets[s] * z[i];
            den[n] += z[i] * z[i];
        }
        for n in 0..n_len {
            if den[n] > 0.0 && num[n] > 0.0 {
                r[n] = (num[n] / den[n]).powf(-1.0 / gamma);
            }
        }
    }

    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    spread_duplicates(&mut z);
    spread_duplicates(&mut r);
    let iterations = trace.len();
    let codebook = Codebook::new(z, r, gamma, params.version)?;
    Ok((
        codebook,
        DesignReport {
            distortion_trace: trace,
            iterations,
        },
    ))
}

/// Evenly spaced quantiles of a sorted copy of `values`.
fn quantile_spread(values: &[f64], count: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (0..count)
        .map(|j| {
            let q = (j as f64 + 0.5) / count as f64;
            let idx = ((q * sorted.len() as f64) as usize).min(sorted.len() - 1);
            sorted[idx]
        })
        .collect()
}

fn seed_distances(targets: &[f64], params: &DesignParams, hints: &SeedHints<'_>) -> Vec<f64> {
    if let Some(d) = hints.distances.filter(|d| !d.is_empty()) {
        let mut seeds = quantile_spread(d, params.distance_levels);
        seeds.iter_mut().for_each(|s| *s = s.max(f64::MIN_POSITIVE));
        spread_duplicates(&mut seeds);
        return seeds;
    }
    // No geometry available: spread distance seeds so the induced gains with
    // a unit shadow cover the data range, normalized to geometric mean 1.
    let n = params.distance_levels;
    if n == 1 {
        return vec![1.0];
    }
    let floor = 1e-30;
    let min_t = targets
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(floor);
    let max_t = targets
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(min_t * (1.0 + 1e-9));
    // r = t^(-1/gamma): large gains map to short distances.
    let r_lo = max_t.powf(-1.0 / params.gamma);
    let r_hi = min_t.powf(-1.0 / params.gamma);
    let log_lo = r_lo.ln();
    let log_hi = r_hi.ln();
    let mut seeds: Vec<f64> = (0..n)
        .map(|j| {
            let f = (j as f64 + 0.5) / n as f64;
            (log_lo + f * (log_hi - log_lo)).exp()
        })
        .collect();
    // Normalize geometric mean to 1 so the shadow set carries the scale.
    let gm = (seeds.iter().map(|s| s.ln()).sum::<f64>() / n as f64).exp();
    seeds.iter_mut().for_each(|s| *s /= gm);
    spread_duplicates(&mut seeds);
    seeds
}

fn seed_shadows(
    targets: &[f64],
    params: &DesignParams,
    hints: &SeedHints<'_>,
    r_seeds: &[f64],
) -> Vec<f64> {
    if let Some(zs) = hints.shadows.filter(|z| !z.is_empty()) {
        let mut seeds = quantile_spread(zs, params.shadow_levels);
        seeds.iter_mut().for_each(|s| *s = s.max(f64::MIN_POSITIVE));
        spread_duplicates(&mut seeds);
        return seeds;
    }
    // Spread seeding over the training samples mapped through the middle
    // distance codeword: z ~ t * r_mid^gamma.
    let mid = r_seeds[r_seeds.len() / 2];
    let scale = mid.powf(params.gamma);
    let implied: Vec<f64> = targets
        .iter()
        .map(|t| (t * scale).max(f64::MIN_POSITIVE))
        .collect();
    let mut seeds = quantile_spread(&implied, params.shadow_levels);
    spread_duplicates(&mut seeds);
    seeds
}

/// Makes a sorted vector strictly ascending by nudging exact duplicates up
/// one representable step at a time.
fn spread_duplicates(values: &mut [f64]) {
    for idx in 1..values.len() {
        if values[idx] <= values[idx - 1] {
            values[idx] = next_up(values[idx - 1]);
        }
    }
}

/// Next representable f64 above a positive finite value.
fn next_up(v: f64) -> f64 {
    f64::from_bits(v.to_bits() + 1)
}
