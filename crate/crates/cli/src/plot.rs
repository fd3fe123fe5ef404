//! Static SVG arc diagrams of a set of graph samples.
//!
//! One column per time bin. Nodes sit on the column's vertical axis and each
//! node pair seen in the bin gets a half-ellipse to the right of the axis,
//! its opacity the share of samples that contain the pair there. Direction
//! is ignored and self-loops are not drawn.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::ensure;
use tggan_core::graph::bin_of;
use tggan_core::TemporalGraphSample;

const COL_WIDTH: f64 = 140.0;
const NODE_GAP: f64 = 12.0;
const MARGIN: f64 = 30.0;
const MAX_BULGE: f64 = 0.85 * COL_WIDTH;

/// Share of samples containing each unordered pair, per bin.
pub fn pair_shares(samples: &[TemporalGraphSample], n_bins: usize) -> Vec<BTreeMap<(usize, usize), f64>> {
    let mut shares = vec![BTreeMap::new(); n_bins];
    for s in samples {
        let mut seen = vec![std::collections::BTreeSet::new(); n_bins];
        for e in s.edges.iter().filter(|e| e.u != e.v) {
            let (a, b) = (e.u.0.min(e.v.0), e.u.0.max(e.v.0));
            seen[bin_of(e.t, n_bins)].insert((a, b));
        }
        for (bin, pairs) in seen.into_iter().enumerate() {
            for p in pairs {
                *shares[bin].entry(p).or_insert(0.0) += 1.0 / samples.len() as f64;
            }
        }
    }
    shares
}

pub fn render_arcs(samples: &[TemporalGraphSample], n_bins: usize) -> anyhow::Result<String> {
    ensure!(!samples.is_empty(), "nothing to plot");
    ensure!(n_bins > 0, "n_bins must be positive");
    let n = samples[0].n_nodes;
    ensure!(samples.iter().all(|s| s.n_nodes == n), "samples span different node universes");

    let y = |i: usize| MARGIN + i as f64 * NODE_GAP;
    let width = 2.0 * MARGIN + n_bins as f64 * COL_WIDTH;
    let height = 2.0 * MARGIN + n.saturating_sub(1) as f64 * NODE_GAP + 20.0;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )?;
    writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##)?;
    for (bin, pairs) in pair_shares(samples, n_bins).iter().enumerate() {
        let x = MARGIN + bin as f64 * COL_WIDTH;
        writeln!(svg, r#"<g class="bin" data-bin="{bin}">"#)?;
        writeln!(
            svg,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#888888" stroke-width="1"/>"##,
            y(0),
            y(n.saturating_sub(1))
        )?;
        writeln!(
            svg,
            r##"<text x="{x}" y="{}" font-size="10" fill="#444444">bin {bin}</text>"##,
            height - 8.0
        )?;
        for (&(a, b), &share) in pairs {
            let ry = (y(b) - y(a)) / 2.0;
            let rx = ry.min(MAX_BULGE);
            writeln!(
                svg,
                r##"<path d="M {x} {} A {rx} {ry} 0 0 1 {x} {}" fill="none" stroke="#1f4e99" stroke-width="1.2" stroke-opacity="{share:.4}" data-pair="{a}-{b}"/>"##,
                y(a),
                y(b)
            )?;
        }
        writeln!(svg, "</g>")?;
    }
    writeln!(svg, "</svg>")?;
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tggan_core::TemporalEdge;

    fn sample(edges: &[(usize, usize, f64)]) -> TemporalGraphSample {
        let e = edges.iter().map(|&(u, v, t)| TemporalEdge::new(u, v, t)).collect();
        TemporalGraphSample::new(4, e, 1.0).unwrap()
    }

    #[test]
    fn edge_in_every_sample_is_opaque() {
        let s = vec![sample(&[(0, 2, 0.1)]); 3];
        let svg = render_arcs(&s, 2).unwrap();
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains(r#"stroke-opacity="1.0000""#));
    }

    #[test]
    fn empty_samples_draw_axes_only() {
        let s = vec![TemporalGraphSample::empty(4, 1.0); 2];
        let svg = render_arcs(&s, 3).unwrap();
        assert_eq!(svg.matches("<path").count(), 0);
        assert_eq!(svg.matches("<line").count(), 3);
    }

    #[test]
    fn opacity_is_sample_share() {
        let mut s: Vec<_> = (0..50).map(|_| sample(&[(1, 3, 0.7)])).collect();
        s.extend((0..50).map(|_| sample(&[])));
        let shares = pair_shares(&s, 1);
        assert!((shares[0][&(1, 3)] - 0.5).abs() < 1e-12);
        assert!(render_arcs(&s, 1).unwrap().contains(r#"stroke-opacity="0.5000""#));
    }

    #[test]
    fn direction_and_repeats_collapse() {
        let s = vec![sample(&[(2, 0, 0.1), (0, 2, 0.2), (0, 2, 0.3)])];
        assert_eq!(pair_shares(&s, 1)[0][&(0, 2)], 1.0);
    }

    #[test]
    fn no_samples_is_an_error() {
        assert!(render_arcs(&[], 2).is_err());
    }
}
