use serde::Serialize;

use super::PlannerError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionCluster {
    /// Indices into the clustered action list, ascending.
    pub member_indices: Vec<usize>,
    pub centroid_a: f64,
}

impl ActionCluster {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

/// DBSCAN on scalar actions.
///
/// A point is a core point if at least `min_pts` points (itself included)
/// lie within `eps`. Cores closer than `eps` are chained into one cluster.
/// A non-core point within `eps` of some core joins the cluster of its
/// nearest core, the lower-valued one on a tie; all other points are noise.
/// Membership therefore does not depend on input order. Clusters are
/// listed by their smallest member index.
pub fn cluster_actions(
    actions: &[f64],
    eps: f64,
    min_pts: usize,
) -> Result<Vec<ActionCluster>, PlannerError> {
    let n = actions.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| actions[i].total_cmp(&actions[j]).then(i.cmp(&j)));
    let x: Vec<f64> = order.iter().map(|&i| actions[i]).collect();

    // neighbour counts by two pointers over the sorted values
    let mut core = vec![false; n];
    let (mut lo, mut hi) = (0, 0);
    for k in 0..n {
        while x[k] - x[lo] > eps {
            lo += 1;
        }
        while hi < n && x[hi] - x[k] <= eps {
            hi += 1;
        }
        core[k] = hi - lo >= min_pts;
    }

    // label cores by sorted position; a gap above eps starts a new cluster
    let mut label = vec![usize::MAX; n];
    let mut n_labels = 0;
    let mut last_core: Option<usize> = None;
    for k in 0..n {
        if core[k] {
            match last_core {
                Some(p) if x[k] - x[p] <= eps => label[k] = label[p],
                _ => {
                    label[k] = n_labels;
                    n_labels += 1;
                }
            }
            last_core = Some(k);
        }
    }
    if n_labels == 0 {
        return Err(PlannerError::NoClusters);
    }

    // border points
    let mut prev_core = vec![None; n];
    let mut next_core = vec![None; n];
    let mut seen = None;
    for k in 0..n {
        if core[k] {
            seen = Some(k);
        }
        prev_core[k] = seen;
    }
    seen = None;
    for k in (0..n).rev() {
        if core[k] {
            seen = Some(k);
        }
        next_core[k] = seen;
    }
    for k in 0..n {
        if core[k] {
            continue;
        }
        let dl = prev_core[k]
            .map(|p| (x[k] - x[p], p))
            .filter(|(d, _)| *d <= eps);
        let dr = next_core[k]
            .map(|p| (x[p] - x[k], p))
            .filter(|(d, _)| *d <= eps);
        label[k] = match (dl, dr) {
            (Some((a, p)), Some((b, q))) => {
                if a <= b {
                    label[p]
                } else {
                    label[q]
                }
            }
            (Some((_, p)), None) | (None, Some((_, p))) => label[p],
            (None, None) => usize::MAX,
        };
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for k in 0..n {
        if label[k] != usize::MAX {
            members[label[k]].push(order[k]);
        }
    }
    let mut clusters: Vec<ActionCluster> = members
        .into_iter()
        .map(|mut m| {
            m.sort_unstable();
            // offset from the first member keeps identical actions exact
            let x0 = actions[m[0]];
            let centroid_a = x0 + m.iter().map(|&i| actions[i] - x0).sum::<f64>() / m.len() as f64;
            ActionCluster {
                member_indices: m,
                centroid_a,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.member_indices[0]);
    Ok(clusters)
}
