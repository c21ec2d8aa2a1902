//! Brute-force reference evaluator used to pin expected values.
//!
//! Shares no code with the library. Memberships, generated consequents and
//! firing strengths are re-derived from scratch, consequents are merged per
//! output label (max strength, then a single clip) instead of per rule, and
//! every integral is taken on a 100,001-point grid.

pub const FINE_GRID: usize = 100_001;

/// Symmetric Likert scale with shouldered triangular labels.
#[derive(Clone, Copy, Debug)]
pub struct OracleScale {
    pub lo: f64,
    pub hi: f64,
    /// Number of output labels, evenly spaced peaks from lo to hi.
    pub out_labels: usize,
}

impl OracleScale {
    pub const FIVE: OracleScale = OracleScale {
        lo: 1.0,
        hi: 5.0,
        out_labels: 5,
    };
    pub const SEVEN: OracleScale = OracleScale {
        lo: 1.0,
        hi: 7.0,
        out_labels: 7,
    };

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn out_peak(&self, j: usize) -> f64 {
        self.lo + (self.hi - self.lo) * j as f64 / (self.out_labels - 1) as f64
    }

    fn out_step(&self) -> f64 {
        (self.hi - self.lo) / (self.out_labels - 1) as f64
    }
}

fn tri(a: f64, b: f64, c: f64, x: f64) -> f64 {
    if x < a || x > c {
        return 0.0;
    }
    if x == b {
        return 1.0;
    }
    if x < b {
        (x - a) / (b - a)
    } else {
        (c - x) / (c - b)
    }
}

/// Memberships of (failure, neutral, success) at `x`.
pub fn input_memberships(s: &OracleScale, x: f64) -> [f64; 3] {
    let m = s.mid();
    [
        tri(s.lo, s.lo, m, x),
        tri(s.lo, m, s.hi, x),
        tri(m, s.hi, s.hi, x),
    ]
}

fn output_membership(s: &OracleScale, j: usize, x: f64) -> f64 {
    let p = s.out_peak(j);
    let h = s.out_step();
    let left = if j == 0 { p } else { p - h };
    let right = if j == s.out_labels - 1 { p } else { p + h };
    tri(left, p, right, x)
}

/// Output label index for a weighted mean of input label values, nearest peak
/// with ties resolved toward the middle label.
pub fn consequent_index(s: &OracleScale, pattern: &[usize], weights: &[f64]) -> usize {
    let values = [s.lo, s.mid(), s.hi];
    let total: f64 = weights.iter().sum();
    let mean: f64 = pattern
        .iter()
        .zip(weights)
        .map(|(&l, &w)| values[l] * w)
        .sum::<f64>()
        / total;
    let middle = (s.out_labels - 1) / 2;
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for j in 0..s.out_labels {
        let d = (mean - s.out_peak(j)).abs();
        if d < best_d - 1e-9 {
            best = j;
            best_d = d;
        } else if (d - best_d).abs() <= 1e-9 {
            let cur = (best as i64 - middle as i64).abs();
            let new = (j as i64 - middle as i64).abs();
            if new < cur {
                best = j;
                best_d = d;
            }
        }
    }
    best
}

/// Unrescaled centroid of a generated, default-operator Mamdani stage.
pub fn raw_output(s: &OracleScale, inputs: &[f64], weights: &[f64]) -> f64 {
    let k = inputs.len();
    let mu: Vec<[f64; 3]> = inputs.iter().map(|&x| input_memberships(s, x)).collect();
    let mut height = vec![0.0f64; s.out_labels];
    let mut pattern = vec![0usize; k];
    for code in 0..3usize.pow(k as u32) {
        let mut c = code;
        for p in pattern.iter_mut() {
            *p = c % 3;
            c /= 3;
        }
        let strength = pattern
            .iter()
            .enumerate()
            .map(|(i, &l)| mu[i][l])
            .fold(1.0f64, f64::min);
        if strength > 0.0 {
            let j = consequent_index(s, &pattern, weights);
            height[j] = height[j].max(strength);
        }
    }
    centroid(s, |x| {
        (0..s.out_labels)
            .map(|j| height[j].min(output_membership(s, j, x)))
            .fold(0.0, f64::max)
    })
}

fn centroid(s: &OracleScale, f: impl Fn(f64) -> f64) -> f64 {
    let n = FINE_GRID;
    let dx = (s.hi - s.lo) / (n - 1) as f64;
    let mut mass = 0.0;
    let mut moment = 0.0;
    for i in 0..n {
        let x = s.lo + dx * i as f64;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let m = f(x);
        mass += w * m;
        moment += w * m * x;
    }
    moment / mass
}

/// Fine-grid centroids of the lowest and highest output labels.
pub fn calibration(s: &OracleScale) -> (f64, f64) {
    let last = s.out_labels - 1;
    (
        centroid(s, |x| output_membership(s, 0, x)),
        centroid(s, |x| output_membership(s, last, x)),
    )
}

pub fn rescale(s: &OracleScale, raw: f64, cal: (f64, f64)) -> f64 {
    let v = s.lo + (s.hi - s.lo) * (raw - cal.0) / (cal.1 - cal.0);
    v.clamp(s.lo, s.hi)
}

/// Full two-level evaluation with the default 5/5/4 item split.
/// Returns (management, impact, satisfaction, overall), all rescaled.
pub fn evaluate(s: &OracleScale, items: &[f64; 14], dim_weights: [f64; 3]) -> [f64; 4] {
    let cal = calibration(s);
    let groups: [&[f64]; 3] = [&items[0..5], &items[5..10], &items[10..14]];
    let mut dims = [0.0; 3];
    for (d, g) in groups.iter().enumerate() {
        let w = vec![1.0; g.len()];
        dims[d] = rescale(s, raw_output(s, g, &w), cal);
    }
    let top = rescale(s, raw_output(s, &dims, &dim_weights), cal);
    [dims[0], dims[1], dims[2], top]
}
