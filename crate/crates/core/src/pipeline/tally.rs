use std::fmt::Write as _;

use crate::autocorr::{ClusterClass, LisaResult};
use crate::error::{Error, Result};
use crate::numfmt::format_percent;
use crate::points::JoinAssignment;

/// Facilities per cluster class of one local analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyTable {
    /// Count per class, in `ClusterClass::ALL` order.
    pub counts: [usize; 6],
    pub total_facilities: usize,
    pub total_assigned: usize,
    pub unassigned: Vec<String>,
}

impl TallyTable {
    pub fn count(&self, class: ClusterClass) -> usize {
        let k = ClusterClass::ALL.iter().position(|&c| c == class).unwrap();
        self.counts[k]
    }

    /// `cluster,count,percent` rows, then the unassigned and total lines.
    /// Percentages are of all facilities, to one decimal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster,count,percent\n");
        let total = self.total_facilities;
        for (class, &count) in ClusterClass::ALL.iter().zip(&self.counts) {
            writeln!(out, "{},{},{}", class.label(), count, format_percent(count, total)).unwrap();
        }
        let unassigned = self.unassigned.len();
        writeln!(out, "UNASSIGNED,{},{}", unassigned, format_percent(unassigned, total)).unwrap();
        writeln!(out, "TOTAL,{},{}", total, format_percent(total, total)).unwrap();
        out
    }
}

pub fn tally_points_by_class(assignment: &JoinAssignment, lisa: &LisaResult) -> Result<TallyTable> {
    let mut counts = [0usize; 6];
    let mut unassigned = Vec::new();
    for (id, region) in assignment.point_ids.iter().zip(&assignment.regions) {
        match *region {
            None => unassigned.push(id.clone()),
            Some(r) => {
                let class = *lisa.clusters.get(r).ok_or(Error::IndexOutOfRange {
                    index: r,
                    n: lisa.len(),
                })?;
                let k = ClusterClass::ALL.iter().position(|&c| c == class).unwrap();
                counts[k] += 1;
            }
        }
    }
    Ok(TallyTable {
        counts,
        total_facilities: assignment.point_ids.len(),
        total_assigned: assignment.point_ids.len() - unassigned.len(),
        unassigned,
    })
}

/// Facilities per region index.
pub fn facilities_per_region(assignment: &JoinAssignment, n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    for r in assignment.regions.iter().flatten() {
        if *r < n {
            counts[*r] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autocorr::LisaOptions;
    use ClusterClass::*;

    fn lisa(clusters: Vec<ClusterClass>) -> LisaResult {
        let n = clusters.len();
        LisaResult {
            local_i: vec![None; n],
            pseudo_p: vec![None; n],
            clusters,
            focal: vec![0.0; n],
            lag: vec![0.0; n],
            options: LisaOptions::default(),
            fdr_threshold: None,
        }
    }

    fn assignment(regions: Vec<Option<usize>>) -> JoinAssignment {
        JoinAssignment {
            point_ids: (0..regions.len()).map(|k| format!("p{k}")).collect(),
            regions,
        }
    }

    #[test]
    fn three_points_in_one_hot_spot() {
        let t = tally_points_by_class(
            &assignment(vec![Some(0), Some(0), Some(0)]),
            &lisa(vec![HighHigh, NotSignificant]),
        )
        .unwrap();
        assert_eq!(t.count(HighHigh), 3);
        assert_eq!(t.counts.iter().sum::<usize>(), 3);
    }

    #[test]
    fn unassigned_listed_separately() {
        let t = tally_points_by_class(
            &assignment(vec![Some(1), None]),
            &lisa(vec![HighHigh, LowLow]),
        )
        .unwrap();
        assert_eq!(t.count(LowLow), 1);
        assert_eq!(t.unassigned, vec!["p1".to_string()]);
        assert_eq!(t.total_assigned, 1);
        let csv = t.to_csv();
        assert!(csv.contains("LL,1,50.0\n"));
        assert!(csv.contains("UNASSIGNED,1,50.0\n"));
        assert!(csv.ends_with("TOTAL,2,100.0\n"));
    }

    #[test]
    fn region_outside_universe() {
        assert!(matches!(
            tally_points_by_class(&assignment(vec![Some(5)]), &lisa(vec![HighHigh])),
            Err(Error::IndexOutOfRange { index: 5, n: 1 })
        ));
    }

    #[test]
    fn empty_point_set() {
        let t = tally_points_by_class(&assignment(vec![]), &lisa(vec![HighHigh])).unwrap();
        assert!(t.to_csv().contains("HH,0,0.0\n"));
    }
}
