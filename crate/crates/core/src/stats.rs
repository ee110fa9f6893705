//! Test statistics and their tail probabilities.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tabular::{ColumnType, Dataset};

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    ((-x + a * x.ln() - ln_gamma(a)).exp() * h).clamp(0.0, 1.0)
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_i(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_continued_fraction(a, b, x) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b).clamp(0.0, 1.0)
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_p_value(chi2: f64, dof: u32) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Domain("chi-square needs at least one degree of freedom".into()));
    }
    if chi2.is_nan() || chi2 < 0.0 {
        return Err(Error::Domain(format!("chi-square statistic {chi2} is negative")));
    }
    if chi2.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_q(dof as f64 / 2.0, chi2 / 2.0))
}

/// Contingency table of two categorical attributes over rows where both are present.
#[derive(Clone, Debug, PartialEq)]
pub struct Contingency {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Contingency {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Degrees of freedom over the non-empty margins, zero if degenerate.
    pub fn dof(&self) -> u32 {
        let (r, c) = nonempty_shape(&self.counts);
        if r < 2 || c < 2 {
            0
        } else {
            ((r - 1) * (c - 1)) as u32
        }
    }
}

fn nonempty_shape(table: &[Vec<u64>]) -> (usize, usize) {
    let rows = table.iter().filter(|r| r.iter().any(|&x| x > 0)).count();
    let width = table.iter().map(Vec::len).max().unwrap_or(0);
    let cols = (0..width)
        .filter(|&j| table.iter().any(|r| r.get(j).copied().unwrap_or(0) > 0))
        .count();
    (rows, cols)
}

pub fn contingency(d: &Dataset, a_j: &str, a_k: &str) -> Result<Contingency> {
    for a in [a_j, a_k] {
        let ty = d.column_type(a)?;
        if ty != ColumnType::Categorical {
            return Err(Error::Type(format!(
                "chi-square needs categorical attributes, `{a}` is {ty}"
            )));
        }
    }
    let xs = d.strings(a_j)?;
    let ys = d.strings(a_k)?;
    let mut cells: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    let mut rows: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cols: BTreeMap<&str, usize> = BTreeMap::new();
    for (x, y) in xs.iter().zip(ys) {
        if let (Some(x), Some(y)) = (x, y) {
            *cells.entry((x, y)).or_default() += 1;
            rows.insert(x, 0);
            cols.insert(y, 0);
        }
    }
    for (i, v) in rows.values_mut().enumerate() {
        *v = i;
    }
    for (i, v) in cols.values_mut().enumerate() {
        *v = i;
    }
    let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
    for ((x, y), n) in cells {
        counts[rows[x]][cols[y]] = n;
    }
    Ok(Contingency {
        row_labels: rows.keys().map(|s| s.to_string()).collect(),
        col_labels: cols.keys().map(|s| s.to_string()).collect(),
        counts,
    })
}

/// Pearson chi-square over an observed table; zero when either margin has
/// fewer than two non-empty categories.
pub fn chi_square_from_table(table: &[Vec<u64>]) -> f64 {
    let (r, c) = nonempty_shape(table);
    if r < 2 || c < 2 {
        return 0.0;
    }
    let width = table.iter().map(Vec::len).max().unwrap_or(0);
    let row_sums: Vec<f64> = table.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..width)
        .map(|j| table.iter().map(|row| row.get(j).copied().unwrap_or(0)).sum::<u64>() as f64)
        .collect();
    let n: f64 = row_sums.iter().sum();
    let mut chi2 = 0.0;
    for (i, row) in table.iter().enumerate() {
        if row_sums[i] == 0.0 {
            continue;
        }
        for (j, &cs) in col_sums.iter().enumerate() {
            if cs == 0.0 {
                continue;
            }
            let observed = row.get(j).copied().unwrap_or(0) as f64;
            let expected = row_sums[i] * cs / n;
            chi2 += (observed - expected).powi(2) / expected;
        }
    }
    chi2
}

pub fn chi_square_statistic(d: &Dataset, a_j: &str, a_k: &str) -> Result<f64> {
    Ok(chi_square_from_table(&contingency(d, a_j, a_k)?.counts))
}

/// χ² and its p-value for a pair; the p-value is 1 for a degenerate table.
pub fn chi_square_test(d: &Dataset, a_j: &str, a_k: &str) -> Result<(f64, f64)> {
    let table = contingency(d, a_j, a_k)?;
    let chi2 = chi_square_from_table(&table.counts);
    let p = match table.dof() {
        0 => 1.0,
        dof => chi_square_p_value(chi2, dof)?,
    };
    Ok((chi2, p))
}

fn complete_pairs(d: &Dataset, a_j: &str, a_k: &str) -> Result<Vec<(f64, f64)>> {
    let xs = d.numbers(a_j)?;
    let ys = d.numbers(a_k)?;
    Ok(xs.iter().zip(ys).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect())
}

/// Pearson coefficient of paired samples; 0 if either side has zero variance.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "correlation needs two complete pairs, found {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson_correlation(d: &Dataset, a_j: &str, a_k: &str) -> Result<f64> {
    pearson(&complete_pairs(d, a_j, a_k)?)
}

/// Two-sided p-value of a correlation coefficient via the t distribution.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    if n <= 2 {
        return 1.0;
    }
    let r = r.clamp(-1.0, 1.0);
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t2 = r * r * df / (1.0 - r * r);
    beta_i(df / 2.0, 0.5, df / (df + t2))
}

/// PCC and its p-value for a pair of numerical attributes.
pub fn pearson_test(d: &Dataset, a_j: &str, a_k: &str) -> Result<(f64, f64)> {
    let pairs = complete_pairs(d, a_j, a_k)?;
    let r = pearson(&pairs)?;
    Ok((r, pearson_p_value(r, pairs.len())))
}
