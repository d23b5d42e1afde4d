//! Report files: JSON for machines, CSV for spreadsheets, SVG for eyes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pigmix_core::colorimetry::Srgb8;
use pigmix_core::eval::{CdfPoint, EvalReport, Histogram, KmComparison};
use serde::Serialize;

use crate::error::{create_dir, write_atomic, AppResult};

pub const EVAL_JSON: &str = "eval_report.json";
pub const SAMPLES_CSV: &str = "per_sample_delta_e.csv";
pub const SYMMETRY_CSV: &str = "symmetry_gaps.csv";
pub const HISTOGRAM_SVG: &str = "delta_e_histogram.svg";
pub const CDF_SVG: &str = "delta_e_cdf.svg";
pub const KM_JSON: &str = "km_comparison.json";
pub const KM_CSV: &str = "km_comparison.csv";
pub const KM_SVG: &str = "km_comparison.svg";

/// Report JSON, wrapped with the schema version and model hash.
#[derive(Serialize)]
struct Envelope<'a, T> {
    schema_version: u32,
    model_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(path: &Path, model_hash: &str, body: &T) -> AppResult<()> {
    let env = Envelope {
        schema_version: crate::wire::SCHEMA_VERSION,
        model_hash,
        body,
    };
    write_atomic(path, crate::wire::to_json(&env).as_bytes())
}

pub fn samples_csv(r: &EvalReport) -> String {
    let mut s = String::from("id,label,pigment_a,q_a_uL,pigment_b,q_b_uL,swapped,delta_e\n");
    for x in &r.samples {
        let _ = writeln!(
            s,
            "{},{:?},{},{},{},{},{},{}",
            x.id,
            x.label,
            x.pigment_a.index(),
            x.q_a_ul,
            x.pigment_b.index(),
            x.q_b_ul,
            x.swapped,
            x.delta_e
        );
    }
    s
}

pub fn symmetry_csv(r: &EvalReport) -> String {
    let mut s = String::from("id,pigment_a,q_a_uL,pigment_b,q_b_uL,forward_rgb,reversed_rgb,delta_e\n");
    for g in &r.symmetry.pairs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            g.id,
            g.pigment_a.index(),
            g.q_a_ul,
            g.pigment_b.index(),
            g.q_b_ul,
            hex(g.forward),
            hex(g.reversed),
            g.delta_e
        );
    }
    s
}

pub fn km_csv(k: &KmComparison) -> String {
    let mut s = String::from(
        "id,pigment_a,q_a_uL,pigment_b,q_b_uL,ground_truth,model,km,model_delta_e,km_delta_e,km_thickness,model_wins\n",
    );
    for c in &k.cases {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.id,
            c.pigment_a.index(),
            c.q_a_ul,
            c.pigment_b.index(),
            c.q_b_ul,
            hex(c.ground_truth),
            hex(c.model),
            hex(c.km),
            c.model_delta_e,
            c.km_delta_e,
            c.km_thickness,
            c.model_wins
        );
    }
    s
}

fn hex(c: Srgb8) -> String {
    format!("#{:02x}{:02x}{:02x}", c.r, c.g, c.b)
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    )
}

fn axes(s: &mut String, x_label: &str, y_label: &str, x_ticks: &[(f64, String)], y_ticks: &[(f64, String)]) {
    let (x0, y0, x1, y1) = (PAD, H - PAD, W - PAD / 2.0, PAD);
    let _ = writeln!(s, "<path d=\"M{x0} {y1} V{y0} H{x1}\" stroke=\"black\" fill=\"none\"/>");
    for (x, t) in x_ticks {
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\">{t}</text>",
            y0 + 14.0
        );
    }
    for (y, t) in y_ticks {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{t}</text>",
            x0 - 4.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>",
        (x0 + x1) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        "<text transform=\"translate(14 {}) rotate(-90)\" text-anchor=\"middle\">{y_label}</text>",
        (y0 + y1) / 2.0
    );
}

/// Bars for bins 0..20 plus an overflow bar.
pub fn histogram_svg(h: &Histogram) -> String {
    let bars: Vec<u64> = h.counts.iter().copied().chain([h.overflow]).collect();
    let top = bars.iter().copied().max().unwrap_or(0).max(1) as f64;
    let plot_w = W - 1.5 * PAD;
    let bw = plot_w / bars.len() as f64;
    let scale = (H - 2.0 * PAD) / top;
    let mut s = svg_open("ΔE*ab distribution");
    for (i, &c) in bars.iter().enumerate() {
        let bh = c as f64 * scale;
        let fill = if i == bars.len() - 1 { "#b04040" } else { "#4070b0" };
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{bh:.1}\" fill=\"{fill}\"><title>{c}</title></rect>",
            PAD + i as f64 * bw + 1.0,
            H - PAD - bh,
            bw - 2.0
        );
    }
    let x_ticks: Vec<(f64, String)> = (0..=bars.len())
        .step_by(5)
        .map(|i| {
            let t = if i == bars.len() { String::new() } else { i.to_string() };
            (PAD + i as f64 * bw, t)
        })
        .chain([(PAD + (bars.len() as f64 - 0.5) * bw, format!("{}+", h.counts.len()))])
        .collect();
    let y_ticks = [(H - PAD, "0".to_string()), (PAD, format!("{}", top as u64))];
    axes(&mut s, "ΔE*ab", "samples", &x_ticks, &y_ticks);
    s.push_str("</svg>\n");
    s
}

/// Step plot of the CDF over 0..=20.
pub fn cdf_svg(points: &[CdfPoint]) -> String {
    let xmax = 20.0;
    let sx = |x: f64| PAD + x.min(xmax) / xmax * (W - 1.5 * PAD);
    let sy = |f: f64| H - PAD - f * (H - 2.0 * PAD);
    let mut d = String::new();
    for (i, p) in points.iter().filter(|p| p.at <= xmax).enumerate() {
        if i == 0 {
            let _ = write!(d, "M{:.1} {:.1}", sx(p.at), sy(p.fraction));
        } else {
            let _ = write!(d, " H{:.1} V{:.1}", sx(p.at), sy(p.fraction));
        }
    }
    let mut s = svg_open("Cumulative distribution of ΔE*ab");
    let _ = writeln!(
        s,
        "<path d=\"{d}\" stroke=\"#4070b0\" stroke-width=\"2\" fill=\"none\"/>"
    );
    let _ = writeln!(
        s,
        "<line x1=\"{0:.1}\" x2=\"{0:.1}\" y1=\"{1}\" y2=\"{2}\" stroke=\"#b04040\" stroke-dasharray=\"4 3\"/>",
        sx(5.0),
        PAD,
        H - PAD
    );
    let x_ticks: Vec<(f64, String)> = (0..=20).step_by(5).map(|x| (sx(x as f64), x.to_string())).collect();
    let y_ticks: Vec<(f64, String)> = [0.0, 0.5, 1.0].iter().map(|&f| (sy(f), format!("{f}"))).collect();
    axes(&mut s, "ΔE*ab", "fraction ≤ x", &x_ticks, &y_ticks);
    s.push_str("</svg>\n");
    s
}

/// Swatch rows: ground truth, model, KM, with both errors.
pub fn km_svg(k: &KmComparison) -> String {
    let row = 28.0;
    let h = 60.0 + row * k.cases.len() as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"560\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"10\" y=\"20\">case</text><text x=\"170\" y=\"20\">truth</text><text x=\"230\" y=\"20\">model</text>\
         <text x=\"290\" y=\"20\">KM</text><text x=\"350\" y=\"20\">ΔE model</text><text x=\"430\" y=\"20\">ΔE KM</text>\n"
    );
    for (i, c) in k.cases.iter().enumerate() {
        let y = 34.0 + row * i as f64;
        let _ = writeln!(s, "<text x=\"10\" y=\"{:.0}\">{}</text>", y + 16.0, c.id);
        for (j, col) in [c.ground_truth, c.model, c.km].into_iter().enumerate() {
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{y:.0}\" width=\"50\" height=\"22\" fill=\"{}\"/>",
                170 + 60 * j,
                hex(col)
            );
        }
        let weight = |win: bool| if win { "bold" } else { "normal" };
        let _ = writeln!(
            s,
            "<text x=\"350\" y=\"{0:.0}\" font-weight=\"{1}\">{2:.2}</text><text x=\"430\" y=\"{0:.0}\" font-weight=\"{3}\">{4:.2}</text>",
            y + 16.0,
            weight(c.model_wins),
            c.model_delta_e,
            weight(!c.model_wins),
            c.km_delta_e
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"10\" y=\"{:.0}\">model closer in {} of {} cases</text>",
        h - 8.0,
        k.model_wins,
        k.cases.len()
    );
    s.push_str("</svg>\n");
    s
}

/// Write the evaluation report files into `dir`; returns their paths.
pub fn write_eval(dir: &Path, r: &EvalReport, model_hash: &str) -> AppResult<Vec<PathBuf>> {
    create_dir(dir)?;
    let files = [
        (EVAL_JSON, None),
        (SAMPLES_CSV, Some(samples_csv(r))),
        (SYMMETRY_CSV, Some(symmetry_csv(r))),
        (HISTOGRAM_SVG, Some(histogram_svg(&r.histogram))),
        (CDF_SVG, Some(cdf_svg(&r.cdf))),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        match body {
            None => write_json(&p, model_hash, r)?,
            Some(text) => write_atomic(&p, text.as_bytes())?,
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_km(dir: &Path, k: &KmComparison, model_hash: &str) -> AppResult<Vec<PathBuf>> {
    create_dir(dir)?;
    let (j, c, v) = (dir.join(KM_JSON), dir.join(KM_CSV), dir.join(KM_SVG));
    write_json(&j, model_hash, k)?;
    write_atomic(&c, km_csv(k).as_bytes())?;
    write_atomic(&v, km_svg(k).as_bytes())?;
    Ok(vec![j, c, v])
}
