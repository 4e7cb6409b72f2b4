//! Random masking, undersampling, stratified splitting, and per-fold
//! preprocessing for the N x 2 cross-validation protocol.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::anova_f_rank;
use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureValue, FeatureVector, LabeledExample};
use crate::transform::Discretizer;

/// Derives an independent stream seed from a base seed and a path of
/// indices (splitmix64 finalizer).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Independently blanks each present cell with probability `epsilon`.
pub fn mask_features(data: &Dataset, epsilon: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon must be in [0, 1), got {epsilon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = data
        .rows()
        .iter()
        .map(|r| {
            let values = r
                .x
                .values()
                .iter()
                .map(|&v| if v.is_present() && rng.gen_bool(epsilon) { FeatureValue::Missing } else { v })
                .collect();
            LabeledExample { x: FeatureVector::new(values), y: r.y }
        })
        .collect();
    Ok(data.with_rows(rows))
}

/// Row indices after undersampling the majority class to the minority size,
/// in shuffled order.
pub fn balance_indices(data: &Dataset, seed: u64) -> Result<Vec<usize>> {
    let (neg, pos) = data.label_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass("cannot balance a single-class dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = neg.min(pos);
    let mut out = Vec::with_capacity(2 * keep);
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.rows()[i].y == label).collect();
        idx.shuffle(&mut rng);
        out.extend_from_slice(&idx[..keep]);
    }
    out.shuffle(&mut rng);
    Ok(out)
}

pub fn undersample_balance(data: &Dataset, seed: u64) -> Result<Dataset> {
    Ok(data.select_rows(&balance_indices(data, seed)?))
}

/// Splits row indices into two halves with matching class proportions.
pub fn stratified_halves(data: &Dataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.rows()[i].y == label).collect();
        idx.shuffle(&mut rng);
        // An odd class gives its extra row to a different half for each label.
        let cut = if label == 0 { idx.len().div_ceil(2) } else { idx.len() / 2 };
        a.extend_from_slice(&idx[..cut]);
        b.extend_from_slice(&idx[cut..]);
    }
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FoldOptions {
    /// Keep only the four features with the highest ANOVA F.
    pub top4: bool,
    pub discretize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFold {
    pub train: Dataset,
    pub test: Dataset,
    /// Original column index of each retained feature.
    pub columns: Vec<usize>,
    pub discretizer: Option<Discretizer>,
}

/// Builds one fold. Every data-dependent choice is fit on training rows
/// only: the feature ranking on the unmasked training rows, the cuts on the
/// masked ones.
pub fn prepare_fold(
    unmasked: &Dataset,
    masked: &Dataset,
    train_idx: &[usize],
    test_idx: &[usize],
    opts: FoldOptions,
) -> Result<PreparedFold> {
    let mut train = masked.select_rows(train_idx);
    let mut test = masked.select_rows(test_idx);
    let mut columns: Vec<usize> = (0..masked.arity()).collect();
    if opts.top4 && masked.arity() > 4 {
        let mut top = anova_f_rank(&unmasked.select_rows(train_idx))[..4].to_vec();
        top.sort_unstable();
        train = train.select_features(&top)?;
        test = test.select_features(&top)?;
        columns = top;
    }
    let mut discretizer = None;
    if opts.discretize {
        let d = Discretizer::fit(&train)?;
        train = d.apply_dataset(&train)?;
        test = d.apply_dataset(&test)?;
        discretizer = Some(d);
    }
    Ok(PreparedFold { train, test, columns, discretizer })
}
