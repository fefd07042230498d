//! Minimal SVG 1.1 output for the four chart types. Output is a pure
//! function of the inputs: fixed float formatting, no timestamps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::simtest::{LineupLayout, PanelSource};
use crate::zmatrix::ZMatrix;

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Coordinates to two decimals, "-0.00" normalised.
fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub struct SvgDoc {
    width: f64,
    height: f64,
    body: String,
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" {style}/>"#,
            num(x),
            num(y),
            num(w),
            num(h)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" {style}/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2)
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], style: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{},{}", num(*x), num(*y)))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" {style}/>"#,
            pts.join(" ")
        );
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="{}">{}</text>"#,
            num(x),
            num(y),
            num(size),
            escape(content)
        );
    }

    pub fn finish(self) -> String {
        let (w, h) = (num(self.width), num(self.height));
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

/// Data range mapped onto a pixel interval.
#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    log10: bool,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn new(values: &[f64], log10: bool, px_lo: f64, px_hi: f64) -> Self {
        let t: Vec<f64> = values
            .iter()
            .map(|&v| if log10 { v.log10() } else { v })
            .filter(|v| v.is_finite())
            .collect();
        let (mut lo, mut hi) = t
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        if t.is_empty() {
            (lo, hi) = (0.0, 1.0);
        } else if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 0.5 };
            (lo, hi) = (lo - pad, hi + pad);
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self {
            lo,
            hi,
            log10,
            px_lo,
            px_hi,
        }
    }

    fn with_range(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        Self {
            lo,
            hi,
            log10: false,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let t = if self.log10 { v.log10() } else { v };
        self.px_lo + (t - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    /// Tick positions in data units, with labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log10 {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            return (a..=b)
                .map(|k| {
                    let v = 10f64.powi(k);
                    (v, trim_float(v))
                })
                .collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last)
            .map(|k| {
                let v = k as f64 * step;
                (v, trim_float(v))
            })
            .collect()
    }
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

const AXIS_STYLE: &str = r#"stroke="black" stroke-width="1""#;

fn draw_axes(doc: &mut SvgDoc, xs: &Scale, ys: &Scale, x_title: &str, y_title: &str) {
    let (x0, x1) = (xs.px_lo, xs.px_hi);
    let (y0, y1) = (ys.px_lo, ys.px_hi); // y0 is the bottom
    doc.line(x0, y0, x1, y0, AXIS_STYLE);
    doc.line(x0, y0, x0, y1, AXIS_STYLE);
    for (v, label) in xs.ticks() {
        let px = xs.map(v);
        doc.line(px, y0, px, y0 + 4.0, AXIS_STYLE);
        doc.text(px, y0 + 16.0, "middle", 10.0, &label);
    }
    for (v, label) in ys.ticks() {
        let py = ys.map(v);
        doc.line(x0 - 4.0, py, x0, py, AXIS_STYLE);
        doc.text(x0 - 6.0, py + 3.5, "end", 10.0, &label);
    }
    doc.text((x0 + x1) / 2.0, y0 + 32.0, "middle", 11.0, x_title);
    doc.text(x0 - 44.0, (y0 + y1) / 2.0, "middle", 11.0, y_title);
}

/// Bottom-aligned bars of height z_ij inside each cell, so each row reads
/// as a histogram and bar area is proportional to z_ij.
fn draw_matrix(doc: &mut SvgDoc, z: &ZMatrix, x: f64, y: f64, size: f64) {
    let n = z.n();
    let cell = size / n as f64;
    doc.rect(
        x,
        y,
        size,
        size,
        r##"fill="none" stroke="#999999" stroke-width="0.5""##,
    );
    for i in 0..n {
        for j in 0..n {
            let v = z.get(i, j);
            if v <= 0.0 {
                continue;
            }
            let h = v * cell;
            let top = y + (i as f64 + 1.0) * cell - h;
            doc.rect(x + j as f64 * cell, top, cell, h, r#"fill="black""#);
        }
    }
}

/// Symbols plot of an (untransposed) z-matrix.
pub fn symbols_svg(z: &ZMatrix) -> String {
    let size = (z.n() as f64 * 20.0).clamp(200.0, 800.0);
    let margin = 20.0;
    let mut doc = SvgDoc::new(size + 2.0 * margin, size + 2.0 * margin);
    draw_matrix(&mut doc, z, margin, margin, size);
    doc.finish()
}

/// Observed and simulated symbol plots on the lineup grid. Panels are
/// numbered 1..k in reading order; the answer is not drawn.
pub fn lineup_svg(observed: &ZMatrix, sims: &[ZMatrix], layout: &LineupLayout) -> Result<String> {
    let panel = 240.0;
    let gap = 30.0;
    let width = layout.cols as f64 * (panel + gap) + gap;
    let height = layout.rows as f64 * (panel + gap) + gap;
    let mut doc = SvgDoc::new(width, height);
    for (p, source) in layout.panels.iter().enumerate() {
        let z = match source {
            PanelSource::Observed => observed,
            PanelSource::Simulated(k) => sims.get(*k).ok_or_else(|| {
                Error::InvalidArgument(format!("layout references simulation {k}"))
            })?,
        };
        let (r, c) = (p / layout.cols, p % layout.cols);
        let x = gap + c as f64 * (panel + gap);
        let y = gap + r as f64 * (panel + gap);
        doc.text(x, y - 8.0, "start", 12.0, &format!("{}", p + 1));
        draw_matrix(&mut doc, z, x, y, panel);
    }
    Ok(doc.finish())
}

/// Two stacked panels: (a) the step function Z_k against the estimates,
/// (b) spikes of the density weights.
pub fn cdf_density_svg(
    density: &[f64],
    cdf: &[f64],
    estimates: &[f64],
    log10_x: bool,
) -> Result<String> {
    let n = estimates.len();
    if n < 2 {
        return Err(Error::TooFewUnits { needed: 2, got: n });
    }
    for len in [density.len(), cdf.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: len,
            });
        }
    }
    if log10_x && estimates.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidArgument(
            "log axis needs positive estimates".into(),
        ));
    }
    let (width, panel_h) = (520.0, 220.0);
    let (left, right, top, gap) = (70.0, 20.0, 30.0, 70.0);
    let mut doc = SvgDoc::new(width, top + 2.0 * panel_h + gap + 50.0);
    let x_title = if log10_x {
        "estimate (log10 scale)"
    } else {
        "estimate"
    };

    let a_bottom = top + panel_h;
    let xs = Scale::new(estimates, log10_x, left, width - right);
    let ys = Scale::with_range(0.0, 1.0, a_bottom, top);
    doc.text(left, top - 10.0, "start", 12.0, "(a)");
    draw_axes(&mut doc, &xs, &ys, x_title, "Z_k");
    let mut points = vec![(xs.px_lo, ys.map(0.0)), (xs.map(estimates[0]), ys.map(0.0))];
    for k in 0..n {
        let x = xs.map(estimates[k]);
        points.push((x, ys.map(cdf[k])));
        let next = if k + 1 < n {
            xs.map(estimates[k + 1])
        } else {
            xs.px_hi
        };
        points.push((next, ys.map(cdf[k])));
    }
    doc.polyline(&points, r#"fill="none" stroke="black" stroke-width="1.5""#);

    let b_top = a_bottom + gap;
    let b_bottom = b_top + panel_h;
    let xs = Scale::new(estimates, log10_x, left, width - right);
    let max_d = density.iter().copied().fold(0.0, f64::max).max(1e-12);
    let ys = Scale::with_range(0.0, max_d * 1.05, b_bottom, b_top);
    doc.text(left, b_top - 10.0, "start", 12.0, "(b)");
    draw_axes(&mut doc, &xs, &ys, x_title, "density");
    for (&e, &d) in estimates.iter().zip(density) {
        let x = xs.map(e);
        doc.line(
            x,
            ys.map(0.0),
            x,
            ys.map(d),
            r#"stroke="black" stroke-width="2""#,
        );
    }
    Ok(doc.finish())
}

/// Scatter plot with each point drawn as its label text.
pub fn scatter_svg(
    x: &[f64],
    y: &[f64],
    labels: &[String],
    log10_x: bool,
    titles: (&str, &str),
) -> Result<String> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if labels.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: labels.len(),
        });
    }
    if log10_x && x.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "log axis needs positive x values".into(),
        ));
    }
    let (width, height) = (480.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0);
    let mut doc = SvgDoc::new(width, height);
    let xs = Scale::new(x, log10_x, left, width - right);
    let ys = Scale::new(y, false, height - bottom, top);
    draw_axes(&mut doc, &xs, &ys, titles.0, titles.1);
    for ((&xv, &yv), label) in x.iter().zip(y).zip(labels) {
        doc.text(xs.map(xv), ys.map(yv) + 4.0, "middle", 11.0, label);
    }
    Ok(doc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::{Family, UnitObservations};
    use crate::simtest::{lineup_panels, Placement};
    use crate::zmatrix::compute_z;

    fn parse(svg: &str) -> roxmltree::Document<'_> {
        let doc = roxmltree::Document::parse(svg).expect("well-formed XML");
        assert!(doc.root_element().has_attribute("viewBox"));
        doc
    }

    fn identity_z() -> ZMatrix {
        let units = vec![
            UnitObservations::binomial("a", 0, 500).unwrap(),
            UnitObservations::binomial("b", 500, 500).unwrap(),
        ];
        compute_z(&units, &Family::Binomial).unwrap()
    }

    fn bar_areas(svg: &str) -> Vec<f64> {
        let doc = parse(svg);
        doc.descendants()
            .filter(|n| n.has_tag_name("rect") && n.attribute("fill") == Some("black"))
            .map(|n| {
                let w: f64 = n.attribute("width").unwrap().parse().unwrap();
                let h: f64 = n.attribute("height").unwrap().parse().unwrap();
                w * h
            })
            .collect()
    }

    #[test]
    fn identity_gives_full_diagonal_squares() {
        let svg = symbols_svg(&identity_z());
        let areas = bar_areas(&svg);
        assert_eq!(areas.len(), 2);
        assert!((areas[0] - 100.0 * 100.0).abs() < 1e-6);
        assert_eq!(svg, symbols_svg(&identity_z()));
    }

    #[test]
    fn uniform_matrix_has_equal_bars() {
        let units: Vec<_> = (0..4)
            .map(|i| UnitObservations::binomial(format!("u{i}"), 3, 9).unwrap())
            .collect();
        let z = compute_z(&units, &Family::Binomial).unwrap();
        let areas = bar_areas(&symbols_svg(&z));
        assert_eq!(areas.len(), 16);
        let cell = 50.0 * 50.0;
        assert!(areas.iter().all(|a| (a - cell / 4.0).abs() < 1.0));
    }

    #[test]
    fn cdf_plot_checks_inputs() {
        let svg = cdf_density_svg(&[0.5, 0.5], &[0.5, 1.0], &[0.01, 0.1], true).unwrap();
        parse(&svg);
        assert!(cdf_density_svg(&[1.0], &[1.0], &[0.1], false).is_err());
        assert!(cdf_density_svg(&[0.5, 0.5], &[0.5, 1.0], &[0.0, 0.1], true).is_err());
        assert!(cdf_density_svg(&[0.5], &[0.5, 1.0], &[0.1, 0.2], false).is_err());
    }

    #[test]
    fn scatter_variants() {
        let empty = scatter_svg(&[], &[], &[], false, ("x", "y")).unwrap();
        let doc = parse(&empty);
        assert!(doc.descendants().any(|n| n.has_tag_name("line")));

        let labels: Vec<String> = vec!["1".into(), "2".into(), "3".into()];
        let flat = scatter_svg(
            &[1.0, 2.0, 3.0],
            &[5.0, 5.0, 5.0],
            &labels,
            false,
            ("x", "y"),
        )
        .unwrap();
        let doc = parse(&flat);
        let ys: Vec<&str> = doc
            .descendants()
            .filter(|n| n.has_tag_name("text") && labels.iter().any(|l| n.text() == Some(l)))
            .filter(|n| n.attribute("font-size") == Some("11.00"))
            .map(|n| n.attribute("y").unwrap())
            .collect();
        assert!(ys.len() >= 3);
        assert!(scatter_svg(&[1.0], &[1.0, 2.0], &labels[..1], false, ("x", "y")).is_err());
        assert!(scatter_svg(&[0.0], &[1.0], &labels[..1], true, ("x", "y")).is_err());
    }

    #[test]
    fn lineup_grid_renders() {
        let z = identity_z();
        let layout = lineup_panels(3, 5, Placement::TopLeft).unwrap();
        let svg = lineup_svg(&z, &[z.clone(), z.clone(), z.clone()], &layout).unwrap();
        parse(&svg);
        assert!(lineup_svg(&z, std::slice::from_ref(&z), &layout).is_err());
    }

    #[test]
    fn text_is_escaped() {
        let mut doc = SvgDoc::new(10.0, 10.0);
        doc.text(1.0, 1.0, "start", 10.0, "a<b & \"c\"");
        parse(&doc.finish());
    }
}
