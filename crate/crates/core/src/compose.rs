//! Latent-space semantic composition: building sparse codes from concept
//! sets, the swap/remove/insert edits, and decoding back to embedding
//! space.
//!
//! A code stores only its active concept set. Edits only ever assign the
//! learned per-concept values or zero, so the set representation is
//! lossless and the edit algebra is exact: swap = insert ∘ remove,
//! remove ∘ insert = identity, swap(k, k) = identity.

use alloc::vec::Vec;

use crate::design::{check_composability, RealizationSet, SparseDesign};
use crate::error::Error;
use crate::model::SsaeModel;
use crate::numerics::Matrix;

/// One sparse latent vector, identified by its active concept set. Given
/// a model, block k of the materialized vector holds the learned
/// sub-vector when k is active and zeros otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentCode {
    active: Vec<usize>, // sorted, deduplicated
    design: SparseDesign,
}

impl LatentCode {
    /// Code with the given active set; indices must be in range.
    pub fn from_set(set: &[usize], design: SparseDesign) -> Result<Self, Error> {
        let mut active = set.to_vec();
        active.sort_unstable();
        active.dedup();
        if let Some(&bad) = active.iter().find(|&&k| k >= design.concepts()) {
            return Err(Error::ConceptOutOfRange {
                sample: None,
                concept: bad,
                concepts: design.concepts(),
            });
        }
        Ok(LatentCode { active, design })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn design(&self) -> SparseDesign {
        self.design
    }

    pub fn contains(&self, concept: usize) -> bool {
        self.active.binary_search(&concept).is_ok()
    }

    fn check_index(&self, concept: usize) -> Result<(), Error> {
        if concept >= self.design.concepts() {
            return Err(Error::ConceptOutOfRange {
                sample: None,
                concept,
                concepts: self.design.concepts(),
            });
        }
        Ok(())
    }

    /// Replace active concept `from` by `to`. `swap(k, k)` is the
    /// identity (allowed).
    pub fn swap(&self, from: usize, to: usize) -> Result<LatentCode, Error> {
        self.check_index(to)?;
        if !self.contains(from) {
            return Err(Error::ConceptNotActive { concept: from });
        }
        if from == to {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.active.retain(|&k| k != from);
        if let Err(pos) = out.active.binary_search(&to) {
            out.active.insert(pos, to);
        }
        Ok(out)
    }

    /// Deactivate a currently active concept.
    pub fn remove(&self, concept: usize) -> Result<LatentCode, Error> {
        if !self.contains(concept) {
            return Err(Error::ConceptNotActive { concept });
        }
        let mut out = self.clone();
        out.active.retain(|&k| k != concept);
        Ok(out)
    }

    /// Activate a currently inactive concept.
    pub fn insert(&self, concept: usize) -> Result<LatentCode, Error> {
        self.check_index(concept)?;
        if self.contains(concept) {
            return Err(Error::ConceptAlreadyActive { concept });
        }
        let mut out = self.clone();
        let pos = out.active.binary_search(&concept).unwrap_err();
        out.active.insert(pos, concept);
        Ok(out)
    }
}

impl SsaeModel {
    /// Materializes a code to its dK latent vector: learned sub-vector in
    /// each active block, zeros elsewhere.
    pub fn materialize(&self, code: &LatentCode) -> Result<Vec<f64>, Error> {
        self.check_design(code)?;
        let d = self.design().subspace_dim();
        let mut y = alloc::vec![0.0; self.design().latent_dim()];
        for &k in code.active() {
            for j in 0..d {
                y[k * d + j] = self.yc().get(j, k);
            }
        }
        Ok(y)
    }

    /// Decodes a code to embedding space: `W2·σ(y)` for the materialized
    /// latent vector y. The empty code decodes to the zero vector since
    /// σ(0) = 0 and the decoder has no bias.
    pub fn decode(&self, code: &LatentCode) -> Result<Vec<f64>, Error> {
        let y = self.materialize(code)?;
        let act = self.activation();
        let w2 = self.w2();
        let mut out = alloc::vec![0.0; self.n_embed()];
        for (l, &v) in y.iter().enumerate() {
            let s = act.apply(v);
            let col = w2.column(l);
            for (o, &w) in out.iter_mut().zip(col) {
                *o += w * s;
            }
        }
        Ok(out)
    }

    fn check_design(&self, code: &LatentCode) -> Result<(), Error> {
        let m = self.design();
        let c = code.design();
        if m != c {
            return Err(Error::DesignMismatch {
                model: (m.subspace_dim(), m.concepts()),
                code: (c.subspace_dim(), c.concepts()),
            });
        }
        Ok(())
    }
}

/// Result of composing a (possibly unseen) concept pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub code: LatentCode,
    pub embedding: Vec<f64>,
    /// True when the pair co-occurred in some training sample, in which
    /// case the decode carries no generalization claim.
    pub pair_seen_in_training: bool,
}

/// Builds the code activating `k1` and `k2` (merged into `base` when
/// given) and decodes it. Seen pairs are still composed but flagged.
pub fn compose_unseen(
    model: &SsaeModel,
    real: &RealizationSet,
    base: Option<&LatentCode>,
    k1: usize,
    k2: usize,
) -> Result<Composition, Error> {
    if k1 == k2 {
        return Err(Error::InvalidConfig {
            reason: "composition requires two distinct concepts".into(),
        });
    }
    let mut set: Vec<usize> = base.map(|c| c.active().to_vec()).unwrap_or_default();
    set.push(k1);
    set.push(k2);
    let code = LatentCode::from_set(&set, model.design())?;
    let embedding = model.decode(&code)?;
    Ok(Composition {
        code,
        embedding,
        pair_seen_in_training: !check_composability(real, k1, k2),
    })
}

/// Decoded reconstruction of a matrix, one column per materialized code.
/// Convenience for callers that want per-concept decode columns.
pub fn decode_concepts(model: &SsaeModel) -> Result<Matrix, Error> {
    let k_total = model.design().concepts();
    let mut out = Matrix::zeros(model.n_embed(), k_total);
    for k in 0..k_total {
        let code = LatentCode::from_set(&[k], model.design())?;
        let v = model.decode(&code)?;
        out.column_mut(k).copy_from_slice(&v);
    }
    Ok(out)
}
