use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{pareto_flags, CostAxis, ParetoPoint, PointKind};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct SweepRow {
    kind: PointKind,
    config_id: String,
    channels: String,
    kernels: String,
    accuracy: f64,
    p_fallback: Option<f64>,
    energy_uj: f64,
    latency_ms: f64,
    memory_kb: f64,
    on_pareto_front: u8,
}

/// Sweep table; the front flag is taken on the energy axis over all rows.
pub fn write_sweep_csv<W: Write>(out: W, points: &[ParetoPoint]) -> Result<()> {
    let flags = pareto_flags(points, CostAxis::Energy)?;
    let mut w = csv::Writer::from_writer(out);
    for (p, on) in points.iter().zip(flags) {
        w.serialize(SweepRow {
            kind: p.kind,
            config_id: p.config_id.clone(),
            channels: p.channels.clone(),
            kernels: p.kernels.clone(),
            accuracy: p.accuracy,
            p_fallback: p.p_fallback,
            energy_uj: p.energy_j * 1e6,
            latency_ms: p.latency_s * 1e3,
            memory_kb: p.memory_bytes as f64 / 1000.0,
            on_pareto_front: on as u8,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Reads a sweep table back, converting units to joules, seconds and bytes.
pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<ParetoPoint>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<SweepRow>()
        .map(|row| {
            let row = row?;
            Ok(ParetoPoint {
                kind: row.kind,
                config_id: row.config_id,
                channels: row.channels,
                kernels: row.kernels,
                accuracy: row.accuracy,
                valid_accuracy: None,
                p_fallback: row.p_fallback,
                energy_j: row.energy_uj * 1e-6,
                latency_s: row.latency_ms * 1e-3,
                memory_bytes: (row.memory_kb * 1000.0).round() as u64,
            })
        })
        .collect()
}

/// Plot data for one axis: `kind, config_id, accuracy, <cost>, on_pareto_front`.
pub fn write_plot_csv<W: Write>(out: W, points: &[ParetoPoint], axis: CostAxis) -> Result<()> {
    let flags = pareto_flags(points, axis)?;
    let mut w = csv::Writer::from_writer(out);
    let cost_col = match axis {
        CostAxis::Energy => "energy_uj",
        CostAxis::Memory => "memory_kb",
    };
    w.write_record(["kind", "config_id", "accuracy", cost_col, "on_pareto_front"])?;
    for (p, on) in points.iter().zip(flags) {
        let cost = match axis {
            CostAxis::Energy => p.energy_j * 1e6,
            CostAxis::Memory => p.memory_bytes as f64 / 1000.0,
        };
        w.write_record([
            p.kind.as_str(),
            &p.config_id,
            &p.accuracy.to_string(),
            &cost.to_string(),
            if on { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
