use mll_core::export::{realization_csv, realization_stack, realization_svg, Provenance};
use mll_core::family::{decode, registry_entry};
use mll_core::ladder::{Ladder, LadderKind, SignedSegment3};

fn flat(a: [f64; 2], b: [f64; 2]) -> SignedSegment3 {
    SignedSegment3::new([a[0], a[1], 0.0], [b[0], b[1], 0.0], 0)
}

#[test]
fn degenerate_square_vertices() {
    let l = Ladder::new(
        vec![flat([0.0, 0.0], [1.0, 0.0]), flat([0.0, 1.0], [1.0, 1.0])],
        LadderKind::Open,
        2,
    )
    .unwrap();
    let stack = realization_stack(&l).unwrap();
    assert_eq!(stack.len(), 1);
    let got: Vec<(f64, f64)> = stack[0].iter().map(|p| (p.x, p.y)).collect();
    assert_eq!(got, vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
}

#[test]
fn cyclic_three_stacks_three_trapezoids() {
    let l = Ladder::new(
        vec![
            flat([0.0, 0.0], [1.0, 0.0]),
            flat([0.0, 1.0], [1.0, 1.0]),
            flat([0.0, 2.0], [1.0, 2.0]),
        ],
        LadderKind::Cyclic,
        2,
    )
    .unwrap();
    let stack = realization_stack(&l).unwrap();
    assert_eq!(stack.len(), 3);
    for w in stack.windows(2) {
        // each trapezoid sits on the top of the previous one
        assert!((w[1][0].y - w[0][2].y).abs() < 1e-12);
    }
    let svg = realization_svg(&l, None).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn csv_rows_track_quad_count() {
    for name in ["demo", "geo2", "cross1"] {
        let f = registry_entry(name).unwrap();
        let l = decode(&f, f.reference.as_ref().unwrap()).unwrap();
        let csv = realization_csv(&l, Some(&Provenance::new(Some(3), Some("chacha8")))).unwrap();
        let rows = csv.lines().filter(|s| !s.starts_with('#')).count() - 1;
        assert_eq!(rows, 4 * l.quad_count(), "{name}");
    }
}
