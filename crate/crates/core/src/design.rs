//! Concept dictionary, per-sample realization sets, and the sparse latent
//! layout: row-index map, sparsity mask, and membership matrix.
//!
//! The latent space has one block of `d` rows per concept, laid out
//! concept-major: concept `k` owns rows `k*d .. (k+1)*d`. Row `k*d + j` of
//! a latent column is nonzero only for samples whose concept set contains
//! `k`, and all such samples share the same learned value there.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::numerics::Matrix;

/// Ordered list of distinct concept names; the order defines the latent
/// block order and is stable across file round-trips.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDictionary {
    names: Vec<String>,
}

impl ConceptDictionary {
    pub fn new(names: Vec<String>) -> Result<Self, Error> {
        if names.is_empty() {
            return Err(Error::InvalidDictionary {
                reason: "concept list is empty",
            });
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidDictionary {
                    reason: "concept name is empty",
                });
            }
            if names[..i].contains(name) {
                return Err(Error::DuplicateConceptName { name: name.clone() });
            }
        }
        Ok(ConceptDictionary { names })
    }

    /// Number of concepts K.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false // K >= 1 by construction
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, k: usize) -> Option<&str> {
        self.names.get(k).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// `n` samples, each a sorted subset of concept indices. Sample order is
/// the column order of every matrix built from the set.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSet {
    sample_ids: Vec<String>,
    concept_sets: Vec<Vec<usize>>,
}

impl RealizationSet {
    /// Builds and validates a realization set against a dictionary size.
    /// Concept sets are sorted and de-duplicated (strict set semantics).
    pub fn new(
        sample_ids: Vec<String>,
        concept_sets: Vec<Vec<usize>>,
        concepts: usize,
    ) -> Result<Self, Error> {
        if sample_ids.is_empty() {
            return Err(Error::InvalidRealizations {
                reason: "no samples",
            });
        }
        if sample_ids.len() != concept_sets.len() {
            return Err(Error::InvalidRealizations {
                reason: "sample id and concept set counts differ",
            });
        }
        for (i, id) in sample_ids.iter().enumerate() {
            if sample_ids[..i].contains(id) {
                return Err(Error::DuplicateSampleId { id: id.clone() });
            }
        }
        let mut sets = Vec::with_capacity(concept_sets.len());
        for (set, id) in concept_sets.into_iter().zip(&sample_ids) {
            let mut set = set;
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&k| k >= concepts) {
                return Err(Error::ConceptOutOfRange {
                    sample: Some(id.clone()),
                    concept: bad,
                    concepts,
                });
            }
            sets.push(set);
        }
        Ok(RealizationSet {
            sample_ids,
            concept_sets: sets,
        })
    }

    /// Number of samples n.
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.sample_ids[i]
    }

    /// Sorted concept indices of sample `i`.
    pub fn set(&self, i: usize) -> &[usize] {
        &self.concept_sets[i]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.concept_sets
    }

    pub fn contains(&self, sample: usize, concept: usize) -> bool {
        self.concept_sets[sample].binary_search(&concept).is_ok()
    }

    /// Largest concept index used, if any set is nonempty.
    pub fn max_concept(&self) -> Option<usize> {
        self.concept_sets
            .iter()
            .filter_map(|s| s.last().copied())
            .max()
    }
}

/// Latent layout: `d` rows per concept, `concepts` blocks, concept-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseDesign {
    subspace_dim: usize,
    concepts: usize,
}

impl SparseDesign {
    pub fn new(subspace_dim: usize, concepts: usize) -> Result<Self, Error> {
        if subspace_dim == 0 {
            return Err(Error::InvalidConfig {
                reason: "subspace dimension d must be at least 1".into(),
            });
        }
        if concepts == 0 {
            return Err(Error::InvalidConfig {
                reason: "concept count K must be at least 1".into(),
            });
        }
        Ok(SparseDesign {
            subspace_dim,
            concepts,
        })
    }

    /// Per-concept sub-vector dimension d.
    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    /// Concept count K.
    pub fn concepts(&self) -> usize {
        self.concepts
    }

    /// Total latent dimension d·K.
    pub fn latent_dim(&self) -> usize {
        self.subspace_dim * self.concepts
    }

    /// Row of latent coordinate `j` inside concept block `k`: `k*d + j`.
    pub fn row_index(&self, concept: usize, offset: usize) -> Result<usize, Error> {
        if concept >= self.concepts || offset >= self.subspace_dim {
            return Err(Error::RowIndexOutOfRange {
                concept,
                offset,
                concepts: self.concepts,
                subspace_dim: self.subspace_dim,
            });
        }
        Ok(concept * self.subspace_dim + offset)
    }
}

/// Binary sparsity pattern of the latent matrix: entry (k·d+j, i) is one
/// exactly when sample i contains concept k.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    matrix: Matrix,
}

impl Mask {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

/// Builds the dK×n mask for a realization set.
pub fn build_mask(design: &SparseDesign, real: &RealizationSet) -> Result<Mask, Error> {
    let d = design.subspace_dim();
    let mut m = Matrix::zeros(design.latent_dim(), real.len());
    for i in 0..real.len() {
        let col = m.column_mut(i);
        for &k in real.set(i) {
            if k >= design.concepts() {
                return Err(Error::ConceptOutOfRange {
                    sample: Some(real.id(i).into()),
                    concept: k,
                    concepts: design.concepts(),
                });
            }
            for j in 0..d {
                col[k * d + j] = 1.0;
            }
        }
    }
    Ok(Mask { matrix: m })
}

/// K×n binary membership matrix B with B[k,i] = 1 iff k ∈ Sᵢ.
pub fn membership_matrix(design: &SparseDesign, real: &RealizationSet) -> Result<Matrix, Error> {
    let mut b = Matrix::zeros(design.concepts(), real.len());
    for i in 0..real.len() {
        for &k in real.set(i) {
            if k >= design.concepts() {
                return Err(Error::ConceptOutOfRange {
                    sample: Some(real.id(i).into()),
                    concept: k,
                    concepts: design.concepts(),
                });
            }
            b.set(k, i, 1.0);
        }
    }
    Ok(b)
}

/// True iff no sample contains both concepts, i.e. the pair is an unseen
/// combination available for compositional probing.
pub fn check_composability(real: &RealizationSet, k1: usize, k2: usize) -> bool {
    (0..real.len()).all(|i| !(real.contains(i, k1) && real.contains(i, k2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn dictionary_rejects_duplicates_and_empty() {
        assert!(matches!(
            ConceptDictionary::new(vec![]),
            Err(Error::InvalidDictionary { .. })
        ));
        let err = ConceptDictionary::new(vec!["a".into(), "a".into()]).unwrap_err();
        assert_eq!(err, Error::DuplicateConceptName { name: "a".into() });
    }

    #[test]
    fn dictionary_index_is_order_stable() {
        let d = ConceptDictionary::new(vec!["blond hair".into(), "gun".into()]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.index_of("blond hair"), Some(0));
        assert_eq!(d.index_of("gun"), Some(1));
        assert_eq!(d.index_of("coffee"), None);
    }

    #[test]
    fn row_index_layout() {
        let design = SparseDesign::new(10, 5).unwrap();
        assert_eq!(design.row_index(0, 0).unwrap(), 0);
        assert_eq!(design.row_index(2, 3).unwrap(), 23);
        assert!(design.row_index(5, 0).is_err());
        assert!(design.row_index(0, 10).is_err());
    }

    #[test]
    fn row_index_is_bijective_on_small_case() {
        let design = SparseDesign::new(3, 4).unwrap();
        let mut seen = vec![false; design.latent_dim()];
        for k in 0..4 {
            for j in 0..3 {
                let r = design.row_index(k, j).unwrap();
                assert!(!seen[r], "row {r} hit twice");
                seen[r] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn mask_empty_and_full() {
        let design = SparseDesign::new(2, 3).unwrap();
        let empty = RealizationSet::new(ids(2), vec![vec![], vec![]], 3).unwrap();
        let m = build_mask(&design, &empty).unwrap();
        assert!(m.matrix().data().iter().all(|&v| v == 0.0));

        let full = RealizationSet::new(ids(2), vec![vec![0, 1, 2], vec![0, 1, 2]], 3).unwrap();
        let m = build_mask(&design, &full).unwrap();
        assert!(m.matrix().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mask_places_ones_at_expected_rows() {
        // K=3, d=2, S0={1}: ones exactly at rows 2 and 3 of column 0
        let design = SparseDesign::new(2, 3).unwrap();
        let real = RealizationSet::new(vec!["s0".to_string()], vec![vec![1]], 3).unwrap();
        let m = build_mask(&design, &real).unwrap();
        let col: Vec<f64> = m.matrix().column(0).to_vec();
        assert_eq!(col, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn membership_trivials() {
        let design = SparseDesign::new(2, 3).unwrap();
        let all = RealizationSet::new(vec!["s0".to_string()], vec![vec![0, 1, 2]], 3).unwrap();
        let b = membership_matrix(&design, &all).unwrap();
        assert_eq!(b.column(0), &[1.0, 1.0, 1.0]);

        let singles =
            RealizationSet::new(ids(3), vec![vec![0], vec![1], vec![2]], 3).unwrap();
        let b = membership_matrix(&design, &singles).unwrap();
        assert_eq!(b, Matrix::identity(3));
    }

    #[test]
    fn composability_trivials() {
        let real = RealizationSet::new(ids(2), vec![vec![0, 1], vec![2]], 4).unwrap();
        assert!(!check_composability(&real, 0, 1));
        assert!(check_composability(&real, 0, 2));
        assert!(check_composability(&real, 1, 3));
    }

    #[test]
    fn realizations_reject_bad_input() {
        assert!(matches!(
            RealizationSet::new(vec![], vec![], 3),
            Err(Error::InvalidRealizations { .. })
        ));
        assert!(matches!(
            RealizationSet::new(
                vec!["a".into(), "a".into()],
                vec![vec![], vec![]],
                3
            ),
            Err(Error::DuplicateSampleId { .. })
        ));
        let err =
            RealizationSet::new(vec!["a".into()], vec![vec![7]], 3).unwrap_err();
        assert!(matches!(err, Error::ConceptOutOfRange { concept: 7, .. }));
    }

    #[test]
    fn duplicate_concepts_within_sample_collapse() {
        let real = RealizationSet::new(vec!["a".into()], vec![vec![2, 0, 2]], 3).unwrap();
        assert_eq!(real.set(0), &[0, 2]);
    }
}
