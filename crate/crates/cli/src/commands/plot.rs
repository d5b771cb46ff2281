use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use cif_simul::{IntegrationTrace, ReadWriteTrace};
use clap::Args;

use crate::io::{read_text, write_text, InputContext, UsageError};

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Read/write trace JSONL.
    #[arg(long)]
    pub trace: PathBuf,
    /// Integration trace of the same run (CIF only).
    #[arg(long)]
    pub integration: Option<PathBuf>,
    /// Output prefix: writes `<prefix>.svg` and `<prefix>.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

struct Canvas {
    sx: f64,
    sy: f64,
}

impl Canvas {
    fn new(frames: usize, tokens: usize) -> Self {
        Self {
            sx: (WIDTH - 2.0 * MARGIN) / frames.max(1) as f64,
            sy: (HEIGHT - 2.0 * MARGIN) / tokens.max(1) as f64,
        }
    }

    fn x(&self, frame: f64) -> f64 {
        MARGIN + frame * self.sx
    }

    fn y(&self, token: f64) -> f64 {
        HEIGHT - MARGIN - token * self.sy
    }
}

/// `(elapsed frames, token index)` for every WRITE.
fn staircase(trace: &ReadWriteTrace) -> Vec<(usize, usize)> {
    trace
        .writes()
        .enumerate()
        .map(|(i, (_, elapsed, _))| (elapsed, i + 1))
        .collect()
}

fn render_svg(trace: Option<&ReadWriteTrace>, integration: Option<&IntegrationTrace<f64>>) -> String {
    let frames = trace.map_or(0, |t| t.source_frames());
    let steps = trace.map(staircase).unwrap_or_default();
    let c = Canvas::new(frames, steps.len());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y0) = (c.x(0.0), c.y(0.0));
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2} {:.2} V{y0:.2} H{:.2}" fill="none" stroke="black"/>"#,
        MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">source frames ({frames})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.2}" font-size="12" transform="rotate(-90 12 {:.2})" text-anchor="middle">target index ({})</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        steps.len()
    );

    if !steps.is_empty() {
        let mut d = format!("M{x0:.2} {y0:.2}");
        for &(e, i) in &steps {
            let _ = write!(d, " H{:.2} V{:.2}", c.x(e as f64), c.y(i as f64));
        }
        let _ = write!(d, " H{:.2}", c.x(frames as f64));
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="black" stroke-width="1.5"/>"#);
    }

    if let Some(it) = integration {
        for f in &it.firings {
            let (Some(first), Some(last)) = (f.terms.first(), f.terms.last()) else {
                continue;
            };
            let y = c.y(f.index as f64 - 1.0);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="red" stroke-width="2"/>"#,
                c.x(first.0 as f64 - 1.0),
                c.x(last.0 as f64)
            );
            let x = c.x(f.fire_frame as f64);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{:.2}" stroke="blue" stroke-width="2"/>"#,
                c.y(f.index as f64)
            );
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="blue"/>"#,
                c.y(f.index as f64)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn run(a: PlotArgs) -> Result<()> {
    let text = read_text(&a.trace)?;
    let trace = if text.trim().is_empty() {
        None
    } else {
        Some(ReadWriteTrace::from_jsonl(&text).input(&a.trace)?)
    };
    let integration = match &a.integration {
        Some(p) => {
            let it = IntegrationTrace::<f64>::from_jsonl(&read_text(p)?).input(p)?;
            let (frames, writes) = trace.as_ref().map_or((0, 0), |t| (t.source_frames(), t.target_len()));
            if it.frames != frames || it.firings.len() != writes {
                bail!(UsageError(format!(
                    "{} ({} frames, {} firings) does not match {} ({frames} frames, {writes} writes)",
                    p.display(),
                    it.frames,
                    it.firings.len(),
                    a.trace.display()
                )));
            }
            Some(it)
        }
        None => None,
    };

    let mut csv = String::from("frame,token\n");
    for (e, i) in trace.as_ref().map(staircase).unwrap_or_default() {
        let _ = writeln!(csv, "{e},{i}");
    }
    let prefix = a.out.to_string_lossy();
    write_text(
        &PathBuf::from(format!("{prefix}.svg")),
        &render_svg(trace.as_ref(), integration.as_ref()),
    )?;
    write_text(&PathBuf::from(format!("{prefix}.csv")), &csv)?;
    println!("wrote {prefix}.svg and {prefix}.csv");
    Ok(())
}
