//! Corpus statistics: histograms of pocket size, decoys per complex and
//! decoy RMSD, plus the empirical RMSD CDF.
//!
//! Bins are half-open `[start, end)` and begin at zero. The CDF row for a
//! bin holds the fraction of decoys with RMSD below its `end`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Dataset, StoreError};
use crate::decoys::is_positive;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub atoms_bin_width: f64,
    pub decoys_bin_width: f64,
    pub rmsd_bin_width: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { atoms_bin_width: 10.0, decoys_bin_width: 10.0, rmsd_bin_width: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub name: String,
    pub bins: Vec<Bin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub complexes: usize,
    pub decoys: usize,
    pub positives: usize,
    pub negatives: usize,
    pub d_max: Option<f64>,
    pub panels: Vec<Panel>,
}

fn histogram(values: &[f64], width: f64) -> Vec<Bin> {
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let n_bins = (max / width).floor() as usize + 1;
    let mut counts = vec![0usize; n_bins];
    for v in values {
        counts[((v / width).floor() as usize).min(n_bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| Bin { start: i as f64 * width, end: (i + 1) as f64 * width, value: c as f64 })
        .collect()
}

fn cumulative_fraction(hist: &[Bin]) -> Vec<Bin> {
    let total: f64 = hist.iter().map(|b| b.value).sum();
    let mut running = 0.0;
    hist.iter()
        .map(|b| {
            running += b.value;
            Bin { start: b.start, end: b.end, value: running / total }
        })
        .collect()
}

/// Computes the four panels. Pocket size counts the nodes of the native
/// graph: protein atoms within the graph cutoff plus ligand atoms.
pub fn corpus_stats(ds: &Dataset, cfg: &StatsConfig) -> Result<CorpusStats, StoreError> {
    if ds.is_empty() {
        return Err(StoreError::EmptyDataset("no complexes".into()));
    }
    for w in [cfg.atoms_bin_width, cfg.decoys_bin_width, cfg.rmsd_bin_width] {
        if !(w > 0.0) {
            return Err(StoreError::InvalidConfig(format!("bin width must be positive, got {w}")));
        }
    }
    let mut atoms = Vec::with_capacity(ds.len());
    for c in &ds.complexes {
        atoms.push(c.graph(None, ds.graph_cutoff())?.num_nodes() as f64);
    }
    let decoy_counts: Vec<f64> = ds.complexes.iter().map(|c| c.decoys.len() as f64).collect();
    let rmsds: Vec<f64> = ds.complexes.iter().flat_map(|c| c.decoys.iter().map(|d| d.rmsd)).collect();
    let positives = rmsds.iter().filter(|&&r| is_positive(r, ds.index.positive_rmsd_max)).count();
    let rmsd_hist = histogram(&rmsds, cfg.rmsd_bin_width);
    let panels = vec![
        Panel { name: "atoms_per_complex".into(), bins: histogram(&atoms, cfg.atoms_bin_width) },
        Panel { name: "decoys_per_complex".into(), bins: histogram(&decoy_counts, cfg.decoys_bin_width) },
        Panel { name: "rmsd_cdf".into(), bins: cumulative_fraction(&rmsd_hist) },
        Panel { name: "rmsd_histogram".into(), bins: rmsd_hist },
    ];
    Ok(CorpusStats {
        complexes: ds.len(),
        decoys: rmsds.len(),
        positives,
        negatives: rmsds.len() - positives,
        d_max: ds.d_max(),
        panels,
    })
}

impl CorpusStats {
    pub fn panel(&self, name: &str) -> Option<&Panel> {
        self.panels.iter().find(|p| p.name == name)
    }

    /// `panel,bin_start,bin_end,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("panel,bin_start,bin_end,value\n");
        for p in &self.panels {
            for b in &p.bins {
                writeln!(out, "{},{},{},{}", p.name, b.start, b.end, b.value).expect("write to string");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DEFAULT_CUTOFF;
    use crate::store::tests::toy_complex;

    #[test]
    fn hand_counted_panels() {
        let ds = Dataset::from_memory(
            vec![toy_complex("a", &[0.2, 0.7, 2.0, 2.4]), toy_complex("b", &[0.5; 12]), toy_complex("c", &[])],
            DEFAULT_CUTOFF,
        )
        .unwrap();
        let s = corpus_stats(&ds, &StatsConfig::default()).unwrap();
        assert_eq!((s.complexes, s.decoys, s.positives, s.negatives), (3, 16, 15, 1));
        // Each toy pocket has 3 protein atoms in range and 3 ligand atoms.
        assert_eq!(s.panel("atoms_per_complex").unwrap().bins, vec![Bin { start: 0.0, end: 10.0, value: 3.0 }]);
        let decoys: Vec<f64> = s.panel("decoys_per_complex").unwrap().bins.iter().map(|b| b.value).collect();
        assert_eq!(decoys, vec![2.0, 1.0]);
        let rmsd: Vec<f64> = s.panel("rmsd_histogram").unwrap().bins.iter().map(|b| b.value).collect();
        assert_eq!(rmsd, vec![1.0, 13.0, 0.0, 0.0, 2.0]);
        let cdf = &s.panel("rmsd_cdf").unwrap().bins;
        assert_eq!(cdf.last().unwrap().value, 1.0);
        assert_eq!(cdf[1].value, 14.0 / 16.0);
        let csv = s.to_csv();
        assert!(csv.starts_with("panel,bin_start,bin_end,value\natoms_per_complex,0,10,3\n"));
        assert!(csv.contains("rmsd_histogram,2,2.5,2\n"));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let ds = Dataset::from_memory(Vec::new(), DEFAULT_CUTOFF).unwrap();
        let err = corpus_stats(&ds, &StatsConfig::default()).unwrap_err();
        assert!(err.to_string().contains("empty dataset"));
    }
}
