//! Feature extraction from sampled spectra: peaks, widths, the central dip
//! and resolved sub-lines.

use serde::{Deserialize, Serialize};

use super::lines::PredictedLine;
use crate::ensemble::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    /// A peak must exceed this multiple of its local baseline.
    pub threshold: f64,
    /// Half-width (rad/s) around `δ = 0` searched for the central minimum;
    /// `None` uses two grid steps.
    pub dip_search: Option<f64>,
    /// Half-width (rad/s) within which the flanking maxima of the dip are
    /// taken; `None` uses the whole spectrum.
    pub dip_window: Option<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            threshold: 5.0,
            dip_search: None,
            dip_window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Grid index of the sampled maximum.
    pub index: usize,
    /// Interpolated position (rad/s).
    pub position: f64,
    pub height: f64,
    /// Higher of the two flanking minima.
    pub baseline: f64,
    /// Half-height crossings below and above the peak (rad/s).
    pub half_left: Option<f64>,
    pub half_right: Option<f64>,
    /// Full width at half height (rad/s); `None` if a side never drops.
    pub fwhm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dip {
    pub position: f64,
    pub value: f64,
    pub left_max: f64,
    pub right_max: f64,
    /// `1 - value/min(left_max, right_max)`.
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubLine {
    pub nu_min: u32,
    pub nu_av: f64,
    pub predicted: f64,
    pub position: f64,
    pub height: f64,
    /// Height above the higher of the adjacent minima.
    pub height_above_base: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SidebandAnalysis {
    pub peaks: Vec<Peak>,
    pub dip: Option<Dip>,
    pub dip_flag: bool,
    pub sub_lines: Vec<SubLine>,
}

impl SidebandAnalysis {
    /// Highest peak.
    pub fn main_peak(&self) -> Option<&Peak> {
        self.peaks.iter().max_by(|a, b| a.height.total_cmp(&b.height))
    }

    /// Peak closest to `delta`.
    pub fn peak_near(&self, delta: f64) -> Option<&Peak> {
        self.peaks
            .iter()
            .min_by(|a, b| (a.position - delta).abs().total_cmp(&(b.position - delta).abs()))
    }
}

/// Vertex of the parabola through three equally spaced samples, as an offset
/// in steps from the middle one, and its value.
fn vertex(l: f64, c: f64, r: f64) -> (f64, f64) {
    let den = l - 2.0 * c + r;
    if den.abs() < f64::MIN_POSITIVE || den >= 0.0 {
        return (0.0, c);
    }
    let off = (0.5 * (l - r) / den).clamp(-0.5, 0.5);
    (off, c - 0.25 * (l - r) * off)
}

/// Sub-grid position and height of the local extremum at `i`.
fn refine(x: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= y.len() {
        return (x[i], y[i]);
    }
    let h_l = x[i] - x[i - 1];
    let h_r = x[i + 1] - x[i];
    if ((h_l - h_r) / h_l).abs() > 1e-6 {
        return (x[i], y[i]);
    }
    let (off, val) = vertex(y[i - 1], y[i], y[i + 1]);
    (x[i] + off * h_l, val.max(y[i]))
}

/// Minimum between `i` and the next sample higher than `y[i]` in direction
/// `dir`, or the spectrum edge.
fn flank_min(y: &[f64], i: usize, left: bool) -> f64 {
    let mut m = y[i];
    let mut j = i;
    loop {
        if left {
            if j == 0 {
                break;
            }
            j -= 1;
        } else {
            if j + 1 >= y.len() {
                break;
            }
            j += 1;
        }
        if y[j] > y[i] {
            break;
        }
        m = m.min(y[j]);
    }
    m
}

/// Linear crossing of `level` walking from `i` in one direction.
fn crossing(x: &[f64], y: &[f64], i: usize, level: f64, left: bool) -> Option<f64> {
    let mut j = i;
    loop {
        let k = if left {
            j.checked_sub(1)?
        } else if j + 1 < y.len() {
            j + 1
        } else {
            return None;
        };
        if y[k] <= level {
            let f = (y[j] - level) / (y[j] - y[k]);
            return Some(x[j] + f * (x[k] - x[j]));
        }
        j = k;
    }
}

/// Local maxima that stand at least `threshold` times above their baseline.
pub fn find_peaks(x: &[f64], y: &[f64], threshold: f64) -> Vec<Peak> {
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        // Collapse plateaus to their centre.
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        let left_ok = i == 0 || y[i - 1] < y[i];
        let right_ok = j + 1 == n || y[j + 1] < y[i];
        let interior = i > 0 || j + 1 < n;
        if left_ok && right_ok && interior && y[i] > 0.0 {
            let c = (i + j) / 2;
            let baseline = flank_min(y, i, true).max(flank_min(y, j, false));
            if y[c] > threshold * baseline {
                let (position, height) = if i == j { refine(x, y, c) } else { (x[c], y[c]) };
                let half = 0.5 * height;
                let half_left = crossing(x, y, i, half, true);
                let half_right = crossing(x, y, j, half, false);
                let fwhm = match (half_left, half_right) {
                    (Some(a), Some(b)) => Some(b - a),
                    _ => None,
                };
                peaks.push(Peak {
                    index: c,
                    position,
                    height,
                    baseline,
                    half_left,
                    half_right,
                    fwhm,
                });
            }
        }
        i = j + 1;
    }
    peaks
}

/// Local minimum nearest `δ = 0` and its depth relative to the flanking maxima.
pub fn find_central_dip(x: &[f64], y: &[f64], opts: &AnalysisOptions) -> Option<Dip> {
    let n = y.len();
    if n < 3 {
        return None;
    }
    let step = (x[n - 1] - x[0]) / (n - 1) as f64;
    let search = opts.dip_search.unwrap_or(2.0 * step);
    let window = opts.dip_window.unwrap_or(f64::INFINITY);
    let cand = (1..n - 1)
        .filter(|&i| x[i].abs() <= search && y[i] < y[i - 1] && y[i] < y[i + 1])
        .min_by(|&a, &b| y[a].total_cmp(&y[b]))?;
    let left_max = (0..cand)
        .filter(|&i| x[cand] - x[i] <= window)
        .map(|i| y[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let right_max = (cand + 1..n)
        .filter(|&i| x[i] - x[cand] <= window)
        .map(|i| y[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let (position, value) = {
        let (off, v) = {
            let den = y[cand - 1] - 2.0 * y[cand] + y[cand + 1];
            if den > 0.0 {
                let off = (0.5 * (y[cand - 1] - y[cand + 1]) / den).clamp(-0.5, 0.5);
                (off, y[cand] - 0.25 * (y[cand - 1] - y[cand + 1]) * off)
            } else {
                (0.0, y[cand])
            }
        };
        (x[cand] + off * step, v.min(y[cand]))
    };
    let flank = left_max.min(right_max);
    let depth = if flank > 0.0 { 1.0 - value / flank } else { 0.0 };
    Some(Dip {
        position,
        value,
        left_max,
        right_max,
        depth,
    })
}

/// Matches predicted lines to resolved local maxima within `tolerance`.
pub fn resolve_sub_lines(x: &[f64], y: &[f64], lines: &[PredictedLine], tolerance: f64) -> Vec<SubLine> {
    let n = y.len();
    let maxima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect();
    let mut out = Vec::new();
    for line in lines {
        let best = maxima
            .iter()
            .copied()
            .filter(|&i| (x[i] - line.delta).abs() <= tolerance)
            .max_by(|&a, &b| y[a].total_cmp(&y[b]));
        let Some(i) = best else { continue };
        let (position, height) = refine(x, y, i);
        // Adjacent minima within one tolerance on each side.
        let lo = (0..i)
            .rev()
            .take_while(|&j| x[i] - x[j] <= 2.0 * tolerance)
            .map(|j| y[j])
            .fold(y[i], f64::min);
        let hi = (i + 1..n)
            .take_while(|&j| x[j] - x[i] <= 2.0 * tolerance)
            .map(|j| y[j])
            .fold(y[i], f64::min);
        out.push(SubLine {
            nu_min: line.nu_min(),
            nu_av: line.nu_av(),
            predicted: line.delta,
            position,
            height,
            height_above_base: height - lo.max(hi),
        });
    }
    out
}

/// Assigns the prominent maxima of a sideband to `lines` in order.
///
/// `lines` must run away from the outermost line (`ν_min = 0` first). Maxima
/// within one line spacing of the predicted span are kept when their height
/// above the higher adjacent minimum is at least `min_prominence` times the
/// largest such height, and are then paired with the lines from the outer
/// edge inward, starting at the line nearest the outermost maximum. Unlike [`resolve_sub_lines`] this tolerates predictions whose
/// error grows with `ν`.
pub fn assign_sub_lines(x: &[f64], y: &[f64], lines: &[PredictedLine], min_prominence: f64) -> Vec<SubLine> {
    let n = y.len();
    if lines.len() < 2 || n < 3 {
        return Vec::new();
    }
    let dir = (lines[1].delta - lines[0].delta).signum();
    let spacing = (lines[lines.len() - 1].delta - lines[0].delta).abs() / (lines.len() - 1) as f64;
    let (lo, hi) = lines.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(l.delta), b.max(l.delta)));
    let (lo, hi) = (lo - spacing, hi + spacing);
    let is_min = |i: usize| i == 0 || i + 1 == n || (y[i] <= y[i - 1] && y[i] <= y[i + 1]);
    let mut cand: Vec<(usize, f64)> = (1..n - 1)
        .filter(|&i| x[i] >= lo && x[i] <= hi && y[i] > y[i - 1] && y[i] >= y[i + 1])
        .map(|i| {
            let l = (0..i).rev().find(|&j| is_min(j)).unwrap_or(0);
            let r = (i + 1..n).find(|&j| is_min(j)).unwrap_or(n - 1);
            (i, y[i] - y[l].max(y[r]))
        })
        .collect();
    let top = cand.iter().map(|c| c.1).fold(0.0, f64::max);
    cand.retain(|c| c.1 > 0.0 && c.1 >= min_prominence * top);
    cand.sort_by(|a, b| ((x[a.0] - lines[0].delta) * dir).total_cmp(&((x[b.0] - lines[0].delta) * dir)));
    // The outermost maximum goes to its nearest prediction, which is the most
    // accurate one, so a missing weak outer line does not shift every label.
    let first = match cand.first() {
        Some(c) => (0..lines.len())
            .min_by(|&a, &b| (lines[a].delta - x[c.0]).abs().total_cmp(&(lines[b].delta - x[c.0]).abs()))
            .unwrap_or(0),
        None => 0,
    };
    cand.iter()
        .zip(&lines[first..])
        .map(|(&(i, prom), line)| {
            let (position, height) = refine(x, y, i);
            SubLine {
                nu_min: line.nu_min(),
                nu_av: line.nu_av(),
                predicted: line.delta,
                position,
                height,
                height_above_base: prom,
            }
        })
        .collect()
}

/// Log-log slope of `height_above_base` against `nu_av`.
pub fn height_scaling(lines: &[SubLine]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = lines
        .iter()
        .filter(|l| l.height_above_base > 0.0 && l.nu_av > 0.0)
        .map(|l| (l.nu_av.ln(), l.height_above_base.ln()))
        .collect();
    linear_fit(&pts).map(|f| f.1)
}

/// Peaks and the central dip of a spectrum. Flat or empty spectra give an
/// empty analysis.
pub fn analyze_spectrum(spec: &Spectrum, opts: &AnalysisOptions) -> SidebandAnalysis {
    let (x, y) = (&spec.delta, &spec.value);
    if y.len() < 3 || y.iter().all(|&v| v == y[0]) {
        return SidebandAnalysis::default();
    }
    let peaks = find_peaks(x, y, opts.threshold);
    let dip = find_central_dip(x, y, opts);
    SidebandAnalysis {
        peaks,
        dip_flag: dip.is_some_and(|d| d.depth > 0.0),
        dip,
        sub_lines: Vec::new(),
    }
}

/// Least-squares line `y = a + b x` and its coefficient of determination.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((a, b, r2))
}
