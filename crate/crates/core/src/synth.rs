//! Synthetic CAD-like shapes sampled uniformly by area, labeled by exact
//! distance to their crease curves.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::{Point, PointCloud, Vec3};
use crate::error::{Error, Result};

/// Smallest cloud the default k=16 pipeline accepts.
pub const MIN_POINTS: usize = 33;

/// Default band half-width in units of the sampling spacing `1/sqrt(density)`.
pub const TAU_SPACING_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        if (0..3).any(|a| !(max[a] > min[a]) || !min[a].is_finite() || !max[a].is_finite()) {
            return Err(Error::invalid(format!("box {min:?}..{max:?} is empty or not finite")));
        }
        Ok(Self { min, max })
    }

    fn contains_open(&self, p: &Point) -> bool {
        (0..3).all(|a| self.min[a] < p[a] && p[a] < self.max[a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
    /// Two boxes sharing one corner block: a base plate and an upright.
    LBracket { length: f64, width: f64, height: f64, thickness: f64 },
    /// Right prism over a regular polygon with the given circumradius.
    Prism { sides: usize, radius: f64, height: f64 },
    Sphere { radius: f64 },
    UnionOfBoxes { boxes: Vec<Aabb> },
}

impl ShapeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Box { .. } => "box",
            ShapeKind::Cylinder { .. } => "cylinder",
            ShapeKind::LBracket { .. } => "l_bracket",
            ShapeKind::Prism { .. } => "prism",
            ShapeKind::Sphere { .. } => "sphere",
            ShapeKind::UnionOfBoxes { .. } => "union_of_boxes",
        }
    }

    /// Stepped block used as the one-shot training shape.
    pub fn default_union() -> Self {
        let b = |lo: [f64; 3], hi: [f64; 3]| Aabb {
            min: Point::from(lo),
            max: Point::from(hi),
        };
        ShapeKind::UnionOfBoxes {
            boxes: vec![
                b([0.0, 0.0, 0.0], [1.2, 0.8, 0.3]),
                b([0.1, 0.1, 0.3], [0.5, 0.5, 0.8]),
                b([0.7, 0.3, 0.3], [1.1, 0.8, 0.5]),
            ],
        }
    }

    fn defaults(name: &str) -> Option<Self> {
        Some(match name {
            "box" => ShapeKind::Box { size: [1.0, 1.0, 1.0] },
            "cylinder" => ShapeKind::Cylinder { radius: 0.4, height: 1.0 },
            "l_bracket" => ShapeKind::LBracket {
                length: 1.2,
                width: 0.6,
                height: 0.9,
                thickness: 0.3,
            },
            "prism" => ShapeKind::Prism {
                sides: 3,
                radius: 0.5,
                height: 0.8,
            },
            "sphere" => ShapeKind::Sphere { radius: 0.5 },
            "union_of_boxes" | "union-of-boxes" => Self::default_union(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |vals: &[f64]| {
            if vals.iter().all(|v| *v > 0.0 && v.is_finite()) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{} parameters must be positive, got {vals:?}", self.name())))
            }
        };
        match self {
            ShapeKind::Box { size } => positive(size),
            ShapeKind::Cylinder { radius, height } => positive(&[*radius, *height]),
            ShapeKind::LBracket {
                length,
                width,
                height,
                thickness,
            } => {
                positive(&[*length, *width, *height, *thickness])?;
                if thickness >= length || thickness >= height {
                    return Err(Error::invalid("l_bracket thickness must be below its length and height"));
                }
                Ok(())
            }
            ShapeKind::Prism { sides, radius, height } => {
                if *sides < 3 {
                    return Err(Error::invalid(format!("prism needs at least 3 sides, got {sides}")));
                }
                positive(&[*radius, *height])
            }
            ShapeKind::Sphere { radius } => positive(&[*radius]),
            ShapeKind::UnionOfBoxes { boxes } => {
                if boxes.is_empty() {
                    return Err(Error::invalid("union_of_boxes needs at least one box"));
                }
                for b in boxes {
                    Aabb::new(b.min, b.max)?;
                }
                Ok(())
            }
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        self.validate()?;
        Ok(match self {
            ShapeKind::Box { size } => box_union(&[Aabb {
                min: Point::origin(),
                max: Point::from(*size),
            }]),
            ShapeKind::LBracket {
                length,
                width,
                height,
                thickness,
            } => box_union(&[
                Aabb {
                    min: Point::origin(),
                    max: Point::new(*length, *width, *thickness),
                },
                Aabb {
                    min: Point::origin(),
                    max: Point::new(*thickness, *width, *height),
                },
            ]),
            ShapeKind::UnionOfBoxes { boxes } => box_union(boxes),
            ShapeKind::Cylinder { radius, height } => cylinder(*radius, *height),
            ShapeKind::Prism { sides, radius, height } => prism(*sides, *radius, *height),
            ShapeKind::Sphere { radius } => Geometry {
                faces: vec![Face {
                    pieces: vec![Piece::Sphere {
                        center: Point::origin(),
                        radius: *radius,
                    }],
                }],
                curves: Vec::new(),
            },
        })
    }

    pub fn surface_area(&self) -> Result<f64> {
        Ok(self.geometry()?.faces.iter().map(Face::area).sum())
    }
}

/// `name` or `name:p1,p2,...`. Parameters, in order: box `sx,sy,sz`;
/// cylinder `radius,height`; l_bracket `length,width,height,thickness`;
/// prism `sides,radius,height`; sphere `radius`; union_of_boxes six numbers
/// (min then max corner) per box.
impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s.trim(), None),
        };
        let default = Self::defaults(name).ok_or_else(|| Error::invalid(format!("unknown shape {name:?}")))?;
        let Some(args) = args else {
            return Ok(default);
        };
        let vals = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::invalid(format!("bad shape parameters {args:?}")))?;
        let want = |n: usize| {
            if vals.len() == n {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} takes {n} parameters, got {}", vals.len())))
            }
        };
        let kind = match default {
            ShapeKind::Box { .. } => {
                want(3)?;
                ShapeKind::Box {
                    size: [vals[0], vals[1], vals[2]],
                }
            }
            ShapeKind::Cylinder { .. } => {
                want(2)?;
                ShapeKind::Cylinder {
                    radius: vals[0],
                    height: vals[1],
                }
            }
            ShapeKind::LBracket { .. } => {
                want(4)?;
                ShapeKind::LBracket {
                    length: vals[0],
                    width: vals[1],
                    height: vals[2],
                    thickness: vals[3],
                }
            }
            ShapeKind::Prism { .. } => {
                want(3)?;
                if vals[0].fract() != 0.0 || vals[0] < 0.0 {
                    return Err(Error::invalid("prism side count must be a whole number"));
                }
                ShapeKind::Prism {
                    sides: vals[0] as usize,
                    radius: vals[1],
                    height: vals[2],
                }
            }
            ShapeKind::Sphere { .. } => {
                want(1)?;
                ShapeKind::Sphere { radius: vals[0] }
            }
            ShapeKind::UnionOfBoxes { .. } => {
                if vals.is_empty() || vals.len() % 6 != 0 {
                    return Err(Error::invalid("union_of_boxes takes six numbers per box"));
                }
                let boxes = vals
                    .chunks(6)
                    .map(|c| Aabb::new(Point::new(c[0], c[1], c[2]), Point::new(c[3], c[4], c[5])))
                    .collect::<Result<Vec<_>>>()?;
                ShapeKind::UnionOfBoxes { boxes }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<f64> = match self {
            ShapeKind::Box { size } => size.to_vec(),
            ShapeKind::Cylinder { radius, height } => vec![*radius, *height],
            ShapeKind::LBracket {
                length,
                width,
                height,
                thickness,
            } => vec![*length, *width, *height, *thickness],
            ShapeKind::Prism { sides, radius, height } => vec![*sides as f64, *radius, *height],
            ShapeKind::Sphere { radius } => vec![*radius],
            ShapeKind::UnionOfBoxes { boxes } => boxes
                .iter()
                .flat_map(|b| [b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z])
                .collect(),
        };
        let args: Vec<String> = vals.iter().map(f64::to_string).collect();
        write!(f, "{}:{}", self.name(), args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    /// Target points per unit area.
    pub density: f64,
    /// Edge band half-width; `None` uses the spacing-based default.
    pub tau: Option<f64>,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, density: f64, seed: u64) -> Self {
        Self {
            kind,
            density,
            tau: None,
            seed,
        }
    }

    /// Picks the density that yields about `points` samples.
    pub fn with_point_budget(kind: ShapeKind, points: usize, seed: u64) -> Result<Self> {
        let area = kind.surface_area()?;
        Ok(Self::new(kind, points as f64 / area, seed))
    }

    pub fn tau(&self) -> f64 {
        self.tau
            .unwrap_or(TAU_SPACING_FACTOR / self.density.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if !(self.density > 0.0) || !self.density.is_finite() {
            return Err(Error::invalid(format!("density must be positive, got {}", self.density)));
        }
        let tau = self.tau();
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        Ok(())
    }
}

/// Analytic crease curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCurve {
    Segment { a: Point, b: Point },
    /// Circle in the plane through `center` orthogonal to the unit `normal`.
    Circle { center: Point, normal: Vec3, radius: f64 },
}

impl EdgeCurve {
    pub fn distance(&self, p: &Point) -> f64 {
        match *self {
            EdgeCurve::Segment { a, b } => {
                let ab = b - a;
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (p - (a + ab * t)).norm()
            }
            EdgeCurve::Circle { center, normal, radius } => {
                let v = p - center;
                let h = v.dot(&normal);
                let rho = (v - normal * h).norm();
                (h * h + (rho - radius) * (rho - radius)).sqrt()
            }
        }
    }
}

/// Minimum distance to any curve; infinite when there are none.
pub fn distance_to_edge_curves(p: &Point, curves: &[EdgeCurve]) -> f64 {
    curves.iter().map(|c| c.distance(p)).fold(f64::INFINITY, f64::min)
}

/// A sampleable surface piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Parallelogram { origin: Point, u: Vec3, v: Vec3 },
    Triangle { a: Point, b: Point, c: Point },
    Disk { center: Point, e1: Vec3, e2: Vec3, radius: f64 },
    /// Lateral surface of a cylinder standing on `base` along the unit `axis`.
    CylinderSide { base: Point, e1: Vec3, e2: Vec3, axis: Vec3, radius: f64, height: f64 },
    Sphere { center: Point, radius: f64 },
}

impl Piece {
    pub fn area(&self) -> f64 {
        match *self {
            Piece::Parallelogram { u, v, .. } => u.cross(&v).norm(),
            Piece::Triangle { a, b, c } => 0.5 * (b - a).cross(&(c - a)).norm(),
            Piece::Disk { radius, .. } => PI * radius * radius,
            Piece::CylinderSide { radius, height, .. } => 2.0 * PI * radius * height,
            Piece::Sphere { radius, .. } => 4.0 * PI * radius * radius,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Point {
        match *self {
            Piece::Parallelogram { origin, u, v } => origin + u * rng.random::<f64>() + v * rng.random::<f64>(),
            Piece::Triangle { a, b, c } => {
                let r1 = rng.random::<f64>().sqrt();
                let r2 = rng.random::<f64>();
                a + (b - a) * (r1 * (1.0 - r2)) + (c - a) * (r1 * r2)
            }
            Piece::Disk { center, e1, e2, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let t = 2.0 * PI * rng.random::<f64>();
                center + e1 * (r * t.cos()) + e2 * (r * t.sin())
            }
            Piece::CylinderSide {
                base,
                e1,
                e2,
                axis,
                radius,
                height,
            } => {
                let t = 2.0 * PI * rng.random::<f64>();
                let h = height * rng.random::<f64>();
                base + axis * h + e1 * (radius * t.cos()) + e2 * (radius * t.sin())
            }
            Piece::Sphere { center, radius } => {
                let z = 2.0 * rng.random::<f64>() - 1.0;
                let t = 2.0 * PI * rng.random::<f64>();
                let rho = (1.0 - z * z).max(0.0).sqrt();
                center + Vec3::new(rho * t.cos(), rho * t.sin(), z) * radius
            }
        }
    }
}

/// One labeled face, possibly made of several pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub pieces: Vec<Piece>,
}

impl Face {
    pub fn area(&self) -> f64 {
        self.pieces.iter().map(Piece::area).sum()
    }

    fn sample(&self, rng: &mut impl Rng) -> Point {
        if self.pieces.len() == 1 {
            return self.pieces[0].sample(rng);
        }
        let mut r = rng.random::<f64>() * self.area();
        for piece in &self.pieces {
            let a = piece.area();
            if r < a {
                return piece.sample(rng);
            }
            r -= a;
        }
        self.pieces[self.pieces.len() - 1].sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub faces: Vec<Face>,
    pub curves: Vec<EdgeCurve>,
}

fn sorted_coords(boxes: &[Aabb], axis: usize) -> Vec<f64> {
    let mut c: Vec<f64> = boxes.iter().flat_map(|b| [b.min[axis], b.max[axis]]).collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Boundary faces and crease segments of a union of axis-aligned boxes.
///
/// Works on the grid spanned by all box coordinates: a grid rectangle is
/// surface when the cells on its two sides differ in occupancy, and a grid
/// line segment is a crease unless its four surrounding cells form a flat
/// wall (two occupied cells on one side) or are uniformly filled or empty.
pub fn box_union(boxes: &[Aabb]) -> Geometry {
    let coords: [Vec<f64>; 3] = [0, 1, 2].map(|a| sorted_coords(boxes, a));
    let min_gap = coords
        .iter()
        .flat_map(|c| c.windows(2).map(|w| w[1] - w[0]))
        .fold(f64::INFINITY, f64::min);
    let eps = 0.25 * min_gap;
    let occupied = |p: &Point| boxes.iter().any(|b| b.contains_open(p));
    let mid = |c: &[f64], i: usize| 0.5 * (c[i] + c[i + 1]);

    // Surface rectangles, keyed for merging into faces.
    let mut rects = Vec::new();
    let mut key_of = HashMap::new();
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for (pi, &plane) in coords[a].iter().enumerate() {
            for i in 0..coords[b].len() - 1 {
                for j in 0..coords[c].len() - 1 {
                    let mut q = Point::origin();
                    q[b] = mid(&coords[b], i);
                    q[c] = mid(&coords[c], j);
                    q[a] = plane - eps;
                    let below = occupied(&q);
                    q[a] = plane + eps;
                    let above = occupied(&q);
                    if below == above {
                        continue;
                    }
                    let outward = below;
                    key_of.insert((a, pi, outward, i, j), rects.len());
                    let mut origin = Point::origin();
                    origin[a] = plane;
                    origin[b] = coords[b][i];
                    origin[c] = coords[c][j];
                    let mut u = Vec3::zeros();
                    u[b] = coords[b][i + 1] - coords[b][i];
                    let mut v = Vec3::zeros();
                    v[c] = coords[c][j + 1] - coords[c][j];
                    rects.push(((a, pi, outward, i, j), Piece::Parallelogram { origin, u, v }));
                }
            }
        }
    }
    let mut parent: Vec<usize> = (0..rects.len()).collect();
    for (idx, &((a, pi, outward, i, j), _)) in rects.iter().enumerate() {
        for key in [(a, pi, outward, i + 1, j), (a, pi, outward, i, j + 1)] {
            if let Some(&other) = key_of.get(&key) {
                let (x, y) = (find(&mut parent, idx), find(&mut parent, other));
                if x != y {
                    parent[x.max(y)] = x.min(y);
                }
            }
        }
    }
    let mut face_of_root = HashMap::new();
    let mut faces: Vec<Face> = Vec::new();
    for (idx, &(_, piece)) in rects.iter().enumerate() {
        let root = find(&mut parent, idx);
        let f = *face_of_root.entry(root).or_insert_with(|| {
            faces.push(Face { pieces: Vec::new() });
            faces.len() - 1
        });
        faces[f].pieces.push(piece);
    }

    let mut curves = Vec::new();
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for &yb in &coords[b] {
            for &yc in &coords[c] {
                let mut run: Option<f64> = None;
                for i in 0..coords[a].len() {
                    let crease = i + 1 < coords[a].len() && {
                        let mut q = Point::origin();
                        q[a] = mid(&coords[a], i);
                        let mut occ = [false; 4];
                        for (n, (sb, sc)) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].into_iter().enumerate() {
                            q[b] = yb + sb * eps;
                            q[c] = yc + sc * eps;
                            occ[n] = occupied(&q);
                        }
                        let count = occ.iter().filter(|&&o| o).count();
                        count == 1 || count == 3 || (count == 2 && occ[0] == occ[2])
                    };
                    match (crease, run) {
                        (true, None) => run = Some(coords[a][i]),
                        (false, Some(start)) => {
                            let mut pa = Point::origin();
                            pa[a] = start;
                            pa[b] = yb;
                            pa[c] = yc;
                            let mut pb = pa;
                            pb[a] = coords[a][i];
                            curves.push(EdgeCurve::Segment { a: pa, b: pb });
                            run = None;
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Geometry { faces, curves }
}

fn cylinder(radius: f64, height: f64) -> Geometry {
    let (e1, e2, axis) = (Vec3::x(), Vec3::y(), Vec3::z());
    let base = Point::origin();
    let top = Point::new(0.0, 0.0, height);
    Geometry {
        faces: vec![
            Face {
                pieces: vec![Piece::CylinderSide {
                    base,
                    e1,
                    e2,
                    axis,
                    radius,
                    height,
                }],
            },
            Face {
                pieces: vec![Piece::Disk {
                    center: base,
                    e1,
                    e2,
                    radius,
                }],
            },
            Face {
                pieces: vec![Piece::Disk {
                    center: top,
                    e1,
                    e2,
                    radius,
                }],
            },
        ],
        curves: vec![
            EdgeCurve::Circle {
                center: base,
                normal: axis,
                radius,
            },
            EdgeCurve::Circle {
                center: top,
                normal: axis,
                radius,
            },
        ],
    }
}

fn prism(sides: usize, radius: f64, height: f64) -> Geometry {
    let ring: Vec<Point> = (0..sides)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / sides as f64;
            Point::new(radius * t.cos(), radius * t.sin(), 0.0)
        })
        .collect();
    let up = Vec3::new(0.0, 0.0, height);
    let mut faces = Vec::new();
    let mut curves = Vec::new();
    for i in 0..sides {
        let (a, b) = (ring[i], ring[(i + 1) % sides]);
        faces.push(Face {
            pieces: vec![Piece::Parallelogram { origin: a, u: b - a, v: up }],
        });
        curves.push(EdgeCurve::Segment { a, b: a + up });
        curves.push(EdgeCurve::Segment { a, b });
        curves.push(EdgeCurve::Segment { a: a + up, b: b + up });
    }
    for lift in [Vec3::zeros(), up] {
        let center = Point::origin() + lift;
        faces.push(Face {
            pieces: (0..sides)
                .map(|i| Piece::Triangle {
                    a: center,
                    b: ring[i] + lift,
                    c: ring[(i + 1) % sides] + lift,
                })
                .collect(),
        });
    }
    Geometry { faces, curves }
}

/// A generated cloud with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthCloud {
    pub cloud: PointCloud,
    pub face_ids: Vec<usize>,
    pub edge_distance: Vec<f64>,
    pub curves: Vec<EdgeCurve>,
    pub tau: f64,
}

impl SynthCloud {
    /// CSV sidecar: `index,face_id,edge_distance`.
    pub fn write_metadata(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "index,face_id,edge_distance")?;
        for (i, (f, d)) in self.face_ids.iter().zip(&self.edge_distance).enumerate() {
            writeln!(w, "{i},{f},{d}")?;
        }
        Ok(())
    }
}

/// Samples `round(density * area)` points per face, each face from its own
/// seeded stream, and labels points closer than tau to a crease.
pub fn generate(spec: &ShapeSpec) -> Result<SynthCloud> {
    spec.validate()?;
    let geometry = spec.kind.geometry()?;
    let counts: Vec<usize> = geometry
        .faces
        .iter()
        .map(|f| (spec.density * f.area()).round() as usize)
        .collect();
    let total: usize = counts.iter().sum();
    if total < MIN_POINTS {
        return Err(Error::invalid(format!(
            "density {} yields {total} points, at least {MIN_POINTS} are needed",
            spec.density
        )));
    }
    let per_face: Vec<Vec<Point>> = geometry
        .faces
        .par_iter()
        .zip(&counts)
        .enumerate()
        .map(|(f, (face, &n))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(f as u64);
            (0..n).map(|_| face.sample(&mut rng)).collect()
        })
        .collect();
    let tau = spec.tau();
    let mut points = Vec::with_capacity(total);
    let mut face_ids = Vec::with_capacity(total);
    for (f, pts) in per_face.into_iter().enumerate() {
        face_ids.extend(std::iter::repeat_n(f, pts.len()));
        points.extend(pts);
    }
    let edge_distance: Vec<f64> = points
        .par_iter()
        .map(|p| distance_to_edge_curves(p, &geometry.curves))
        .collect();
    let labels = edge_distance.iter().map(|&d| d < tau).collect();
    Ok(SynthCloud {
        cloud: PointCloud::from_labeled(points, labels)?,
        face_ids,
        edge_distance,
        curves: geometry.curves,
        tau,
    })
}
