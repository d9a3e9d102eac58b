//! Great-circle distances and a static 3-D k-d tree for radius queries over
//! WGS84 coordinates.
//!
//! Points are embedded on the sphere as Cartesian vectors, so a chord-length
//! radius query is exact for great-circle radii and needs no special handling
//! of the antimeridian or the poles.

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    fn to_cartesian(self) -> [f64; 3] {
        let (phi, lambda) = (self.lat.to_radians(), self.lon.to_radians());
        [
            EARTH_RADIUS_M * phi.cos() * lambda.cos(),
            EARTH_RADIUS_M * phi.cos() * lambda.sin(),
            EARTH_RADIUS_M * phi.sin(),
        ]
    }
}

/// Haversine great-circle distance in meters.
pub fn haversine(a: LatLon, b: LatLon) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Chord length subtending a great-circle arc of `arc_m` meters.
fn chord_for_arc(arc_m: f64) -> f64 {
    let half_angle = (arc_m / (2.0 * EARTH_RADIUS_M)).min(std::f64::consts::FRAC_PI_2);
    2.0 * EARTH_RADIUS_M * half_angle.sin()
}

/// Static k-d tree over points on the sphere.
#[derive(Debug, Clone)]
pub struct SphereKdTree {
    coords: Vec<[f64; 3]>,
    /// Point ids arranged so every subtree occupies a contiguous slice with
    /// its splitting point at the slice midpoint.
    order: Vec<usize>,
}

impl SphereKdTree {
    pub fn build(points: &[LatLon]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| p.to_cartesian()).collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        Self::build_rec(&coords, &mut order, 0);
        Self { coords, order }
    }

    fn build_rec(coords: &[[f64; 3]], slice: &mut [usize], depth: usize) {
        if slice.len() <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            coords[a][axis]
                .total_cmp(&coords[b][axis])
                .then(a.cmp(&b))
        });
        let (left, right) = slice.split_at_mut(mid);
        Self::build_rec(coords, left, depth + 1);
        Self::build_rec(coords, &mut right[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Ids of all points whose great-circle distance to `center` may be at most
    /// `radius_m`. The result is a superset padded by a few ulps; callers
    /// filter with [`haversine`] for an exact cut.
    pub fn within(&self, center: LatLon, radius_m: f64) -> Vec<usize> {
        let q = center.to_cartesian();
        let chord = chord_for_arc(radius_m) * (1.0 + 1e-9) + 1e-6;
        let mut out = Vec::new();
        self.query_rec(&self.order, 0, &q, chord, chord * chord, &mut out);
        out.sort_unstable();
        out
    }

    fn query_rec(
        &self,
        slice: &[usize],
        depth: usize,
        q: &[f64; 3],
        chord: f64,
        chord_sq: f64,
        out: &mut Vec<usize>,
    ) {
        if slice.is_empty() {
            return;
        }
        let mid = slice.len() / 2;
        let id = slice[mid];
        let p = &self.coords[id];
        let d2: f64 = (0..3).map(|k| (p[k] - q[k]).powi(2)).sum();
        if d2 <= chord_sq {
            out.push(id);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff <= 0.0 {
            (&slice[..mid], &slice[mid + 1..])
        } else {
            (&slice[mid + 1..], &slice[..mid])
        };
        self.query_rec(near, depth + 1, q, chord, chord_sq, out);
        if diff.abs() <= chord {
            self.query_rec(far, depth + 1, q, chord, chord_sq, out);
        }
    }
}
