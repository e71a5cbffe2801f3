//! CSV output. Floats are written with 17 significant digits so that they
//! parse back to the same binary64 value.

use std::io::Write;

use super::{AccuracyRow, ComparativeRecord, CovarianceRecord, ScatterRow};
use crate::error::Result;
use crate::oracles::{hip_mean_var, LevelDistribution};

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<W: Write>(sink: W, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `n,kind,k,trials,rmse_over_truth`.
pub fn write_accuracy_csv<W: Write>(sink: W, rows: &[AccuracyRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.kind.name().to_string(),
                r.k.to_string(),
                r.stats.trials.to_string(),
                float(r.stats.rmse_over_truth),
            ]
        })
        .collect();
    write_rows(sink, &["n", "kind", "k", "trials", "rmse_over_truth"], rows)
}

/// Columns `kind,k,m,layout,var_union,var_concat,ratio`.
pub fn write_comparative_csv<W: Write>(sink: W, records: &[ComparativeRecord]) -> Result<()> {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.kind.name().to_string(),
                r.k.to_string(),
                r.streams.to_string(),
                r.layout.to_string(),
                float(r.union.sample_variance),
                float(r.concat.sample_variance),
                float(r.ratio()),
            ]
        })
        .collect();
    write_rows(
        sink,
        &["kind", "k", "m", "layout", "var_union", "var_concat", "ratio"],
        rows,
    )
}

/// Columns `size_a,size_b,sim,re_u,re_astar,conforms`.
pub fn write_scatter_csv<W: Write>(sink: W, rows: &[ScatterRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.size_a.to_string(),
                r.size_b.to_string(),
                float(r.sim),
                float(r.re_union),
                float(r.re_concat),
                u8::from(r.conforms()).to_string(),
            ]
        })
        .collect();
    write_rows(
        sink,
        &["size_a", "size_b", "sim", "re_u", "re_astar", "conforms"],
        rows,
    )
}

/// Columns `kind,k,n,l1,l2,trials,mean_v1,stderr_v1,mean_v2,stderr_v2,covariance,stderr`.
pub fn write_covariance_csv<W: Write>(sink: W, records: &[CovarianceRecord]) -> Result<()> {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.kind.name().to_string(),
                r.k.to_string(),
                r.n.to_string(),
                r.positions.0.to_string(),
                r.positions.1.to_string(),
                r.first.trials.to_string(),
                float(r.first.mean),
                float(r.first.stderr_of_mean),
                float(r.second.mean),
                float(r.second.stderr_of_mean),
                float(r.covariance.covariance),
                float(r.covariance.stderr),
            ]
        })
        .collect();
    write_rows(
        sink,
        &[
            "kind", "k", "n", "l1", "l2", "trials", "mean_v1", "stderr_v1", "mean_v2",
            "stderr_v2", "covariance", "stderr",
        ],
        rows,
    )
}

/// Long format `quantity,index,value`: one `prob` row per level, then the
/// derived moments with an empty index.
pub fn write_alpha_distribution_csv<W: Write>(sink: W, dist: &LevelDistribution) -> Result<()> {
    let mut rows: Vec<Vec<String>> = dist
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &p)| vec!["prob".into(), i.to_string(), float(p)])
        .collect();
    let (size_mean, size_var) = dist.sample_size_moments();
    let (_, hip_var) = hip_mean_var(dist.k(), dist.k() + dist.u())?;
    let named = [
        ("g0", dist.g(0)),
        ("g1", dist.g(1)),
        ("g2", dist.g(2)),
        ("sample_size_mean", size_mean),
        ("sample_size_variance", size_var),
        ("estimator_variance", dist.estimator_variance()),
        ("hip_variance", hip_var),
    ];
    rows.extend(
        named
            .into_iter()
            .map(|(name, v)| vec![name.into(), String::new(), float(v)]),
    );
    write_rows(sink, &["quantity", "index", "value"], rows)
}
