//! Per-layer weight drift between network snapshots.

use serde::{Deserialize, Serialize};

use crate::dataset::TierSpec;
use crate::error::{Error, Result};
use crate::format::{format_sig, METRIC_DIGITS};
use crate::ftl::{train_ftl_with, DataContext, SnapshotPoint, TrainSchedule, TrainStep};
use crate::nn::DenseNetwork;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl SnapshotLayer {
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().chain(&self.biases).copied()
    }
}

/// Owned copy of every layer's parameters at one point in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSnapshot {
    pub tag: String,
    pub layers: Vec<SnapshotLayer>,
}

impl WeightSnapshot {
    pub fn capture(net: &DenseNetwork, tag: impl Into<String>) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| SnapshotLayer {
                rows: l.out_dim(),
                cols: l.in_dim(),
                weights: l.weights().data().to_vec(),
                biases: l.biases().to_vec(),
            })
            .collect();
        Self {
            tag: tag.into(),
            layers,
        }
    }

    /// Bitwise equality, so `-0.0 != 0.0` and NaNs compare equal to themselves.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.rows == b.rows
                    && a.cols == b.cols
                    && a.param_count() == b.param_count()
                    && a.params()
                        .zip(b.params())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerDistance {
    /// 0-based.
    pub layer_index: usize,
    /// Weights plus biases.
    pub n_weights: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDistanceReport {
    pub from_tag: String,
    pub to_tag: String,
    pub layers: Vec<LayerDistance>,
}

impl LayerDistanceReport {
    pub fn distances(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.distance).collect()
    }
}

/// Euclidean norm of the parameter difference of each layer, divided by the
/// layer's parameter count.
pub fn layer_distance(a: &WeightSnapshot, b: &WeightSnapshot) -> Result<LayerDistanceReport> {
    if a.layers.len() != b.layers.len() {
        return Err(Error::shape(
            "snapshot layer count",
            a.layers.len().to_string(),
            b.layers.len().to_string(),
        ));
    }
    let layers = a
        .layers
        .iter()
        .zip(&b.layers)
        .enumerate()
        .map(|(i, (la, lb))| {
            if (la.rows, la.cols, la.biases.len()) != (lb.rows, lb.cols, lb.biases.len())
                || la.weights.len() != lb.weights.len()
            {
                return Err(Error::shape(
                    "snapshot layer",
                    format!("layer {i}: {}x{}+{}", la.rows, la.cols, la.biases.len()),
                    format!("{}x{}+{}", lb.rows, lb.cols, lb.biases.len()),
                ));
            }
            let n = la.param_count();
            let ss: f64 = la
                .params()
                .zip(lb.params())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            Ok(LayerDistance {
                layer_index: i,
                n_weights: n,
                distance: ss.sqrt() / n as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerDistanceReport {
        from_tag: a.tag.clone(),
        to_tag: b.tag.clone(),
        layers,
    })
}

/// `ftl / baseline` per layer; `None` where the baseline distance is zero.
pub fn fold_change(
    ftl: &LayerDistanceReport,
    baseline: &LayerDistanceReport,
) -> Result<Vec<Option<f64>>> {
    if ftl.layers.len() != baseline.layers.len() {
        return Err(Error::shape(
            "fold change layer count",
            baseline.layers.len().to_string(),
            ftl.layers.len().to_string(),
        ));
    }
    ftl.layers
        .iter()
        .zip(&baseline.layers)
        .map(|(f, b)| {
            if f.n_weights != b.n_weights {
                return Err(Error::shape(
                    "fold change layer size",
                    format!("layer {}: {}", f.layer_index, b.n_weights),
                    f.n_weights.to_string(),
                ));
            }
            Ok((b.distance > 0.0).then(|| f.distance / b.distance))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure5Report {
    pub step1_epochs: usize,
    pub delta: usize,
    pub ftl: LayerDistanceReport,
    pub baseline: LayerDistanceReport,
    pub fold_changes: Vec<Option<f64>>,
}

impl Figure5Report {
    pub const UNDEFINED: &'static str = "NA";

    /// One row per layer (1-based), preceded by a comment naming the snapshots.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# ftl: {} -> {}; baseline: {} -> {}\nlayer,n_weights,dist_ftl,dist_baseline,fold_change\n",
            self.ftl.from_tag, self.ftl.to_tag, self.baseline.from_tag, self.baseline.to_tag
        );
        for ((f, b), fc) in self
            .ftl
            .layers
            .iter()
            .zip(&self.baseline.layers)
            .zip(&self.fold_changes)
        {
            let fc = fc.map_or_else(
                || Self::UNDEFINED.to_string(),
                |v| format_sig(v, METRIC_DIGITS),
            );
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.layer_index + 1,
                f.n_weights,
                format_sig(f.distance, METRIC_DIGITS),
                format_sig(b.distance, METRIC_DIGITS),
                fc
            ));
        }
        out
    }
}

/// Snapshots behind a [`Figure5Report`], kept for auditing the shared prefix.
#[derive(Debug, Clone)]
pub struct Figure5Run {
    pub report: Figure5Report,
    pub ftl_start: WeightSnapshot,
    pub ftl_end: WeightSnapshot,
    pub baseline_start: WeightSnapshot,
    pub baseline_end: WeightSnapshot,
}

/// Compares drift across the step-1 to step-2 transition (`E1` epochs of
/// step 1, then `delta` epochs of step 2) with drift over the same `delta`
/// epochs of continued step-1-tier training from the identical trajectory.
pub fn figure5_protocol(
    schedule: &TrainSchedule,
    data: &DataContext,
    delta: usize,
) -> Result<Figure5Run> {
    if schedule.steps.len() != 2 {
        return Err(Error::Config(format!(
            "weight-drift comparison needs a 2-step schedule, got {} step(s)",
            schedule.steps.len()
        )));
    }
    let first = schedule.steps[0];
    let e1 = first.epochs;
    let second_tier: TierSpec = schedule.steps[1].tier;

    // Step 2 always runs at least one epoch; the epoch-0 snapshot covers delta = 0.
    let ftl_schedule = TrainSchedule {
        steps: vec![
            first,
            TrainStep {
                tier: second_tier,
                epochs: delta.max(1),
            },
        ],
        settings: schedule.settings.clone(),
    };
    let ftl_points = [SnapshotPoint::new(1, e1), SnapshotPoint::new(2, delta)];
    let ftl = train_ftl_with(&ftl_schedule, data, &ftl_points)?;

    let base_schedule = TrainSchedule {
        steps: vec![TrainStep {
            tier: first.tier,
            epochs: e1 + delta,
        }],
        settings: schedule.settings.clone(),
    };
    let base_points = [SnapshotPoint::new(1, e1), SnapshotPoint::new(1, e1 + delta)];
    let base = train_ftl_with(&base_schedule, data, &base_points)?;

    let find = |outcome: &crate::ftl::TrainOutcome, p: SnapshotPoint| {
        outcome
            .snapshot(&p.tag())
            .cloned()
            .ok_or_else(|| Error::Numeric(format!("snapshot {} was not captured", p.tag())))
    };
    let ftl_start = find(&ftl, ftl_points[0])?;
    let ftl_end = find(&ftl, ftl_points[1])?;
    let baseline_start = find(&base, base_points[0])?;
    let baseline_end = find(&base, base_points[1])?;
    if !ftl_start.bit_identical(&baseline_start) {
        return Err(Error::Numeric(format!(
            "arms diverged before epoch {e1}; the shared prefix is not reproducible"
        )));
    }

    let ftl_report = layer_distance(&ftl_start, &ftl_end)?;
    let baseline_report = layer_distance(&baseline_start, &baseline_end)?;
    let fold_changes = fold_change(&ftl_report, &baseline_report)?;
    Ok(Figure5Run {
        report: Figure5Report {
            step1_epochs: e1,
            delta,
            ftl: ftl_report,
            baseline: baseline_report,
            fold_changes,
        },
        ftl_start,
        ftl_end,
        baseline_start,
        baseline_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(tag: &str, layers: &[(usize, usize, Vec<f64>, Vec<f64>)]) -> WeightSnapshot {
        WeightSnapshot {
            tag: tag.into(),
            layers: layers
                .iter()
                .map(|(r, c, w, b)| SnapshotLayer {
                    rows: *r,
                    cols: *c,
                    weights: w.clone(),
                    biases: b.clone(),
                })
                .collect(),
        }
    }

    #[test]
    fn equal_snapshots_are_zero_apart() {
        let a = snap("a", &[(1, 2, vec![0.5, -1.0], vec![0.25])]);
        let r = layer_distance(&a, &a).unwrap();
        assert_eq!(r.distances(), vec![0.0]);
        assert_eq!(r.layers[0].n_weights, 3);
    }

    #[test]
    fn single_bias_offset() {
        let a = snap("a", &[(2, 2, vec![1.0; 4], vec![0.0; 2])]);
        let mut b = a.clone();
        b.layers[0].biases[1] -= 0.6;
        let d = layer_distance(&a, &b).unwrap().layers[0].distance;
        assert!((d - 0.6 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let a = snap("a", &[(1, 2, vec![0.0; 2], vec![0.0])]);
        let b = snap("b", &[(2, 1, vec![0.0; 2], vec![0.0; 2])]);
        assert!(layer_distance(&a, &b).is_err());
        assert!(layer_distance(&a, &snap("c", &[])).is_err());
    }

    #[test]
    fn fold_change_marks_zero_baseline() {
        let mk = |d: &[f64]| LayerDistanceReport {
            from_tag: "x".into(),
            to_tag: "y".into(),
            layers: d
                .iter()
                .enumerate()
                .map(|(i, &distance)| LayerDistance {
                    layer_index: i,
                    n_weights: 4,
                    distance,
                })
                .collect(),
        };
        let fc = fold_change(&mk(&[0.2, 0.0, 0.3]), &mk(&[0.1, 0.0, 0.3])).unwrap();
        assert_eq!(fc, vec![Some(2.0), None, Some(1.0)]);
        assert!(fold_change(&mk(&[0.1]), &mk(&[0.1, 0.2])).is_err());
    }

    #[test]
    fn csv_uses_marker() {
        let layer = |d| LayerDistance {
            layer_index: 0,
            n_weights: 3,
            distance: d,
        };
        let report = Figure5Report {
            step1_epochs: 5,
            delta: 0,
            ftl: LayerDistanceReport {
                from_tag: "step1_epoch5".into(),
                to_tag: "step2_epoch0".into(),
                layers: vec![layer(0.0)],
            },
            baseline: LayerDistanceReport {
                from_tag: "step1_epoch5".into(),
                to_tag: "step1_epoch5".into(),
                layers: vec![layer(0.0)],
            },
            fold_changes: vec![None],
        };
        let csv = report.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert!(lines[0].starts_with("# ftl: step1_epoch5 -> step2_epoch0"));
        assert_eq!(
            lines[1],
            "layer,n_weights,dist_ftl,dist_baseline,fold_change"
        );
        assert!(lines[2].ends_with(",NA"));
        assert!(lines[2].starts_with("1,3,"));
    }
}
