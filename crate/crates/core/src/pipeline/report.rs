use std::io::Write;

use super::{Characterisation, DecoyReport, KeyRatePoint, RunConfig};
use crate::error::Result;
use crate::protocol::{Event, Signal, Statistics};

/// Version of the column layouts below. Bump on any change.
pub const CSV_VERSION: u32 = 1;

/// Shortest exact-enough rendering: 17 significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // Keeps -0.0 and 0.0 byte-identical.
        return "0".into();
    }
    format!("{x:.16e}")
}

fn header<W: Write>(out: &mut W, cfg: &RunConfig, kind: &str) -> Result<()> {
    writeln!(
        out,
        "# pqkd {} {kind} columns-v{CSV_VERSION} config-sha256={}",
        env!("CARGO_PKG_VERSION"),
        cfg.hash()
    )?;
    Ok(())
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

pub fn write_characterisation_csv<W: Write>(mut out: W, cfg: &RunConfig, rows: &[Characterisation]) -> Result<()> {
    header(&mut out, cfg, "characterise")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "visibility", "q"])?;
    for r in rows {
        w.write_record([r.model.name().to_string(), format_number(r.visibility), format_number(r.q)])?;
    }
    finish(w)
}

pub fn write_statistics_csv<W: Write>(mut out: W, cfg: &RunConfig, points: &[(f64, Statistics)]) -> Result<()> {
    header(&mut out, cfg, "simulate")?;
    let mut w = csv::Writer::from_writer(out);
    let mut cols = vec!["distance_km".to_string(), "signal".into(), "mu".into()];
    cols.extend(Event::ALL.iter().map(|e| e.label().replace('-', "_")));
    cols.push("cross_click".into());
    w.write_record(&cols)?;
    for (distance, stats) in points {
        for s in Signal::ALL {
            for (k, &mu) in stats.intensities.iter().enumerate() {
                let mut row = vec![format_number(*distance), s.label().to_string(), format_number(mu)];
                row.extend(Event::ALL.iter().map(|&e| format_number(stats.gamma(s, k, e))));
                row.push(format_number(stats.cross_click(s, k)));
                w.write_record(&row)?;
            }
        }
    }
    finish(w)
}

pub fn write_decoy_csv<W: Write>(mut out: W, cfg: &RunConfig, reports: &[DecoyReport]) -> Result<()> {
    header(&mut out, cfg, "decoy")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "source", "q", "distance_km", "mu_s", "signal", "block", "block_value", "eps_vec", "statistic", "lower", "upper",
        "certified", "gap", "margin",
    ])?;
    for r in reports {
        for s in Signal::ALL {
            for (k, block) in r.blocks.iter().enumerate() {
                let events = r.yields.events[s.index()][k].iter().zip(Event::ALL.iter().map(|e| e.label()));
                let in_proj = std::iter::once((&r.yields.in_projection[s.index()][k], "in-projection"));
                for (b, label) in events.chain(in_proj) {
                    w.write_record([
                        r.source.label.clone(),
                        format_number(r.source.q),
                        format_number(r.distance_km),
                        format_number(r.mu_s),
                        s.label().to_string(),
                        k.to_string(),
                        format_number(block.value),
                        format_number(block.eps_vec),
                        label.to_string(),
                        format_number(b.lower),
                        format_number(b.upper),
                        b.certified.to_string(),
                        format_number(b.max_gap),
                        format_number(b.margin),
                    ])?;
                }
            }
        }
    }
    finish(w)
}

/// One row per point with the full correction ledger.
///
/// Intensity columns follow the configured order, signal first, and are left empty
/// where a signal intensity coincides with a decoy.
pub fn write_keyrate_csv<W: Write>(mut out: W, cfg: &RunConfig, points: &[KeyRatePoint]) -> Result<()> {
    header(&mut out, cfg, "keyrate")?;
    let mut w = csv::Writer::from_writer(out);
    let n_int = 1 + cfg.protocol.decoys.len();
    let n_blocks = cfg.truncation.blocks;
    let mut cols: Vec<String> = ["source", "q", "distance_km", "mu_s", "eta", "eps_proj"].map(String::from).to_vec();
    for j in 0..n_int {
        cols.push(format!("mu_{j}"));
        cols.push(format!("w_n_{j}"));
    }
    for k in 0..n_blocks {
        for c in ["p", "weight", "eps_vec", "w_floor", "bound", "rate", "margin", "certified"] {
            cols.push(format!("{c}_{k}"));
        }
    }
    cols.extend(["delta_leak", "raw_rate", "rate", "decoy_max_gap", "decoy_max_margin", "certified"].map(String::from));
    w.write_record(&cols)?;
    for p in points {
        let mut row = vec![
            p.source.label.clone(),
            format_number(p.source.q),
            format_number(p.distance_km),
            format_number(p.mu_s),
            format_number(p.eta),
            format_number(p.eps_proj),
        ];
        for j in 0..n_int {
            match (p.intensities.get(j), p.w_n.get(j)) {
                (Some(&mu), Some(&wn)) => row.extend([format_number(mu), format_number(wn)]),
                _ => row.extend([String::new(), String::new()]),
            }
        }
        for k in 0..n_blocks {
            match p.summary.blocks.get(k) {
                Some(b) => row.extend([
                    format_number(p.block_values[k]),
                    format_number(b.weight),
                    format_number(b.eps_vec),
                    format_number(b.w_floor),
                    format_number(b.bound),
                    format_number(b.rate),
                    format_number(b.margin),
                    b.certified.to_string(),
                ]),
                None => row.extend(std::iter::repeat(String::new()).take(8)),
            }
        }
        row.extend([
            format_number(p.summary.delta_leak),
            format_number(p.summary.raw),
            format_number(p.summary.total),
            format_number(p.decoy_max_gap),
            format_number(p.decoy_max_margin),
            p.certified.to_string(),
        ]);
        w.write_record(&row)?;
    }
    finish(w)
}
