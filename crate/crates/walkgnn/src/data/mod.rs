//! Datasets: multi-file text format ingest/export, the synthetic
//! two-motif benchmark generator, and stratified cross-validation splits.

pub(crate) mod ba2motifs;
mod folds;
mod tudataset;

pub use ba2motifs::generate_ba2motifs;
pub use folds::stratified_k_fold;
pub use tudataset::{export_tudataset, parse_motif_nodes, parse_tudataset};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeFeatureMatrix};

/// A graph classification dataset: one graph, one feature matrix, and one
/// class label per entry. Feature width is uniform across graphs.
#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub features: Vec<NodeFeatureMatrix>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl GraphDataset {
    pub fn new(
        name: String,
        graphs: Vec<Graph>,
        features: Vec<NodeFeatureMatrix>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if graphs.len() != features.len() || graphs.len() != labels.len() {
            return Err(Error::contract(format!(
                "dataset {name}: {} graphs, {} feature matrices, {} labels",
                graphs.len(),
                features.len(),
                labels.len()
            )));
        }
        if graphs.is_empty() {
            return Err(Error::input(format!("dataset {name} is empty")));
        }
        let feature_dim = features[0].cols();
        for (i, (g, f)) in graphs.iter().zip(&features).enumerate() {
            if f.rows() != g.node_count() {
                return Err(Error::contract(format!(
                    "dataset {name}: graph {i} has {} nodes but {} feature rows",
                    g.node_count(),
                    f.rows()
                )));
            }
            if f.cols() != feature_dim {
                return Err(Error::contract(format!(
                    "dataset {name}: graph {i} has feature width {} instead of {feature_dim}",
                    f.cols()
                )));
            }
        }
        let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(Error::input(format!(
                "dataset {name} has {} class(es); classification needs at least 2",
                distinct.len()
            )));
        }
        let num_classes = *distinct.iter().next_back().unwrap() + 1;
        Ok(GraphDataset {
            name,
            graphs,
            features,
            labels,
            num_classes,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotifKind {
    Cycle,
    House,
}

impl MotifKind {
    /// Class label carried by graphs with this motif.
    pub fn label(self) -> usize {
        match self {
            MotifKind::Cycle => 0,
            MotifKind::House => 1,
        }
    }
}

/// Ground truth for one generated graph: which nodes form the planted motif.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifAnnotation {
    /// Sorted, always exactly 5 ids.
    pub nodes: Vec<usize>,
    pub kind: MotifKind,
}

/// Assignment of every graph to one of `k` validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldSplit {
    pub fn val_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_single_class() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let err = GraphDataset::new(
            "t".to_string(),
            vec![g.clone(), g],
            vec![NodeFeatureMatrix::constant(2), NodeFeatureMatrix::constant(2)],
            vec![0, 0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn dataset_rejects_feature_row_mismatch() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let err = GraphDataset::new(
            "t".to_string(),
            vec![g.clone(), g],
            vec![NodeFeatureMatrix::constant(3), NodeFeatureMatrix::constant(2)],
            vec![0, 1],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn fold_split_partitions_indices() {
        let split = FoldSplit {
            k: 3,
            assignments: vec![0, 1, 2, 0, 1],
        };
        assert_eq!(split.val_indices(1), vec![1, 4]);
        assert_eq!(split.train_indices(1), vec![0, 2, 3]);
    }
}
