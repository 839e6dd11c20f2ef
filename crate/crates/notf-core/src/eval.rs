//! Recovery metrics and community extraction.
//!
//! Positives are entries strictly above a threshold: the membership epsilon
//! [`MEMBERSHIP_THRESHOLD`] separates numerically-zero clamped values from
//! genuine weights, while 0.5 is the natural choice when the reference is a
//! 0/1 tensor and the reconstruction should round to it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Labels;
use crate::solver::NormVariant;
use crate::tensor::{count_nonzero, FactorTriple, Mode, Tensor3};

/// Smallest magnitude treated as a genuine non-zero in memberships and
/// support comparisons.
pub const MEMBERSHIP_THRESHOLD: f64 = 1e-6;

/// Flat record of one recovery run. Context fields are `None` when the
/// metric source (files, a bare tensor pair) does not carry them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub false_positives: usize,
    pub false_negatives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_vs_truth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_vs_observation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<NormVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_ratio: Option<f64>,
}

/// One rank-one component read as a community: the member indices per mode
/// whose factor weight clears the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityMember {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub rank_index: usize,
    /// Members per mode, heaviest first (ties by index).
    pub members: [Vec<CommunityMember>; 3],
}

fn check_same_dims(a: &Tensor3, b: &Tensor3) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "tensor dims differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// 0/1 tensor: 1 where `v > threshold` (strict).
pub fn binarize(t: &Tensor3, threshold: f64) -> Tensor3 {
    t.map(|v| if v > threshold { 1.0 } else { 0.0 })
}

/// `(false_positives, false_negatives)` of `recon` against `reference`,
/// both read as supports under the same strict threshold. A false positive
/// is a reconstructed occurrence absent from the reference.
pub fn confusion_counts(
    recon: &Tensor3,
    reference: &Tensor3,
    threshold: f64,
) -> Result<(usize, usize)> {
    check_same_dims(recon, reference)?;
    let mut fp = 0;
    let mut fneg = 0;
    for (r, x) in recon.values().iter().zip(reference.values()) {
        match (*r > threshold, *x > threshold) {
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    Ok((fp, fneg))
}

/// Mean squared deviation over all entries.
pub fn mse(recon: &Tensor3, reference: &Tensor3) -> Result<f64> {
    check_same_dims(recon, reference)?;
    let total = recon.total_entries();
    let sum: f64 = recon
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / total as f64)
}

/// Misclassified entries (false positives plus false negatives) per slice
/// along `mode`; the vector has one bucket per index of that mode.
pub fn slice_error_histogram(
    recon: &Tensor3,
    reference: &Tensor3,
    mode: Mode,
    threshold: f64,
) -> Result<Vec<usize>> {
    check_same_dims(recon, reference)?;
    let dims = recon.dims();
    let mut hist = vec![0usize; mode.axis_len(dims)];
    for (linear, (r, x)) in recon.values().iter().zip(reference.values()).enumerate() {
        if (*r > threshold) != (*x > threshold) {
            let (i, j, k) = recon.multi_index(linear);
            let slot = match mode {
                Mode::One => i,
                Mode::Two => j,
                Mode::Three => k,
            };
            hist[slot] += 1;
        }
    }
    Ok(hist)
}

/// Fraction of entries above `eps` in magnitude, per factor.
pub fn factor_nonzero_ratio(f: &FactorTriple, eps: f64) -> (f64, f64, f64) {
    let ratio = |m: &crate::tensor::Matrix| count_nonzero(m.iter(), eps) as f64 / m.len() as f64;
    (ratio(&f.a), ratio(&f.b), ratio(&f.c))
}

/// Reads each rank-one component as a community: per mode, the indices whose
/// weight exceeds `threshold`, heaviest first. Labels, when provided, must
/// match the factor row counts.
pub fn extract_communities(
    f: &FactorTriple,
    labels: Option<&Labels>,
    threshold: f64,
) -> Result<Vec<Community>> {
    let dims = f.dims();
    if let Some(l) = labels {
        for (mode, len) in [
            (Mode::One, dims.0),
            (Mode::Two, dims.1),
            (Mode::Three, dims.2),
        ] {
            if let Some(names) = l.for_mode(mode) {
                if names.len() != len {
                    return Err(Error::Shape(format!(
                        "{} labels for mode {:?} axis of length {}",
                        names.len(),
                        mode,
                        len
                    )));
                }
            }
        }
    }
    let mode_members = |m: &crate::tensor::Matrix, mode: Mode, r: usize| {
        let names = labels.and_then(|l| l.for_mode(mode));
        let mut members: Vec<CommunityMember> = (0..m.nrows())
            .filter(|&idx| m[(idx, r)] > threshold)
            .map(|idx| CommunityMember {
                index: idx,
                label: names.map(|n| n[idx].clone()),
                weight: m[(idx, r)],
            })
            .collect();
        members.sort_by(|p, q| {
            q.weight
                .partial_cmp(&p.weight)
                .unwrap()
                .then(p.index.cmp(&q.index))
        });
        members
    };
    Ok((0..f.rank())
        .map(|r| Community {
            rank_index: r,
            members: [
                mode_members(&f.a, Mode::One, r),
                mode_members(&f.b, Mode::Two, r),
                mode_members(&f.c, Mode::Three, r),
            ],
        })
        .collect())
}
