mod common;

use std::collections::HashMap;

use common::*;
use osfe_core::cloud::{Point, PointCloud, SpatialIndex};
use osfe_core::segment::{default_min_size, flood_segment, flood_segment_with, knn_graph, UNASSIGNED};
use osfe_core::synth::{generate, ShapeKind, ShapeSpec, SynthCloud};

fn unit_cube(seed: u64) -> SynthCloud {
    generate(&ShapeSpec::new(ShapeKind::Box { size: [1.0, 1.0, 1.0] }, 3000.0, seed)).unwrap()
}

fn relabel(s: &SynthCloud, edge: impl Fn(usize) -> bool) -> PointCloud {
    let labels = (0..s.cloud.len()).map(edge).collect();
    s.cloud.without_annotations().with_labels(labels).unwrap()
}

/// Every segment lies within one analytic face, and each face maps to one segment.
fn assert_faces_are_segments(s: &SynthCloud, ids: &[i64]) {
    let mut face_of_segment: HashMap<i64, usize> = HashMap::new();
    let mut segment_of_face: HashMap<usize, i64> = HashMap::new();
    for (i, &id) in ids.iter().enumerate() {
        if id == UNASSIGNED {
            continue;
        }
        assert_eq!(*face_of_segment.entry(id).or_insert(s.face_ids[i]), s.face_ids[i]);
        assert_eq!(*segment_of_face.entry(s.face_ids[i]).or_insert(id), id);
    }
}

#[test]
fn cube_has_six_segments() {
    for seed in 0..5 {
        let s = unit_cube(seed);
        let seg = flood_segment(&s.cloud, 5).unwrap();
        assert_eq!(seg.count, 6, "seed {seed}: sizes {:?}", seg.sizes);
        assert_faces_are_segments(&s, &seg.ids);
        let labels = s.cloud.labels().unwrap();
        for (i, &id) in seg.ids.iter().enumerate() {
            if labels[i] {
                assert_eq!(id, UNASSIGNED);
            }
        }
        let non_edge = s.cloud.len() - s.cloud.edge_count();
        let dropped = non_edge - seg.sizes.iter().sum::<usize>();
        assert!(dropped * 100 < non_edge, "seed {seed}: {dropped} points in discarded specks");
        assert_eq!(flood_segment(&s.cloud, 5).unwrap(), seg, "idempotent");
    }
}

#[test]
fn sphere_is_one_segment() {
    let s = generate(&ShapeSpec::new(ShapeKind::Sphere { radius: 0.5 }, 3000.0, 1)).unwrap();
    let seg = flood_segment(&s.cloud, 5).unwrap();
    assert_eq!(seg.count, 1);
    assert_eq!(seg.sizes, vec![s.cloud.len()]);
}

#[test]
fn gap_in_one_edge_merges_two_faces() {
    for seed in 0..5 {
        let s = unit_cube(seed);
        let labels = s.cloud.labels().unwrap();
        // Open a gap around the middle of the edge along x at y = z = 0.
        let gapped = relabel(&s, |i| {
            let p = s.cloud.points()[i];
            let on_gap = (0.4..0.6).contains(&p.x) && p.y < 0.1 && p.z < 0.1;
            labels[i] && !on_gap
        });
        assert_eq!(flood_segment(&gapped, 5).unwrap().count, 5, "seed {seed}");
    }
}

#[test]
fn thicker_boundaries_never_merge_segments() {
    let s = unit_cube(3);
    let thin = flood_segment(&s.cloud, 5).unwrap();
    for factor in [1.5, 2.0, 3.0] {
        let thick_cloud = relabel(&s, |i| s.edge_distance[i] < s.tau * factor);
        let thick = flood_segment(&thick_cloud, 5).unwrap();
        let mut map: HashMap<i64, i64> = HashMap::new();
        for (i, &id) in thick.ids.iter().enumerate() {
            if id != UNASSIGNED {
                assert_ne!(thin.ids[i], UNASSIGNED);
                assert_eq!(*map.entry(id).or_insert(thin.ids[i]), thin.ids[i], "factor {factor}");
            }
        }
    }
}

#[test]
fn all_edges_means_no_segments() {
    let s = unit_cube(1);
    let seg = flood_segment(&relabel(&s, |_| true), 5).unwrap();
    assert_eq!(seg.count, 0);
    assert!(seg.ids.iter().all(|&i| i == UNASSIGNED));
}

#[test]
fn grid_interior_has_axis_neighbours() {
    let pts: Vec<Point> = (0..10)
        .flat_map(|a| (0..10).map(move |b| Point::new(a as f64, b as f64, 0.0)))
        .collect();
    let cloud = PointCloud::new(pts).unwrap();
    let adj = knn_graph(&cloud, 4).unwrap();
    let index = SpatialIndex::build(&cloud).unwrap();
    let directed: Vec<Vec<usize>> = (0..100).map(|i| index.knn_excluding(i, 4).iter().map(|n| n.index).collect()).collect();
    for a in 1..9 {
        for b in 1..9 {
            let i = a * 10 + b;
            let mut mutual: Vec<usize> = directed[i].iter().copied().filter(|&j| directed[j].contains(&i)).collect();
            mutual.sort_unstable();
            assert_eq!(mutual, vec![i - 10, i - 1, i + 1, i + 10]);
            for j in &mutual {
                assert!(adj[i].contains(j));
            }
        }
    }
}

#[test]
fn minimum_size_only_discards_small_waves() {
    let s = unit_cube(0);
    let all = flood_segment_with(&s.cloud, 5, 1).unwrap();
    let min = default_min_size(s.cloud.len() - s.cloud.edge_count());
    let pruned = flood_segment(&s.cloud, 5).unwrap();
    let big: Vec<usize> = all.sizes.iter().copied().filter(|&n| n >= min).collect();
    assert_eq!(pruned.sizes, big);
    assert!(all.count >= pruned.count);
}

#[test]
fn ids_are_contiguous_and_partition_non_edges() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let pts = random_points(&mut r, 500);
        let labels = (0..500).map(|i| (i * 7 + seed as usize) % 5 == 0).collect();
        let cloud = PointCloud::from_labeled(pts, labels).unwrap();
        let seg = flood_segment_with(&cloud, 5, 1).unwrap();
        let mut counts = vec![0; seg.count];
        for &id in &seg.ids {
            if id != UNASSIGNED {
                counts[id as usize] += 1;
            }
        }
        assert_eq!(counts, seg.sizes);
        assert!(seg.sizes.iter().all(|&c| c > 0));
        let labels = cloud.labels().unwrap();
        assert!(seg.ids.iter().zip(labels).all(|(&id, &e)| (id == UNASSIGNED) == e));
    }
}
