//! Location model: woeid hierarchy, POI geofencing and per-query location
//! resolution.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::session::{EventKind, LatLon, LocalIntent, SessionEvent};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Walkable proximity to a POI.
pub const DEFAULT_POI_THRESHOLD_M: f64 = 25.0;
pub const DEFAULT_CELL_DEG: f64 = 0.01;

/// Searches covering more cells than this fall back to a full scan.
const MAX_SEARCH_CELLS: usize = 4096;
const METERS_PER_DEG_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid polygon {0}: {1}")]
    InvalidPolygon(String, String),
    #[error("invalid woeid table line {line}: {reason}")]
    InvalidWoeid { line: usize, reason: String },
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

type Vec3 = [f64; 3];

fn to_unit(p: LatLon) -> Vec3 {
    let (phi, lambda) = (p.lat.to_radians(), p.lon.to_radians());
    [phi.cos() * lambda.cos(), phi.cos() * lambda.sin(), phi.sin()]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Minimum great-circle distance in meters from `p` to the minor arc `a`-`b`.
pub fn point_segment_distance(p: LatLon, a: LatLon, b: LatLon) -> f64 {
    let endpoints = haversine_distance(p, a).min(haversine_distance(p, b));
    let (ua, ub, up) = (to_unit(a), to_unit(b), to_unit(p));
    let n = cross(ua, ub);
    let n_len = norm(n);
    if n_len < 1e-15 {
        return endpoints;
    }
    let n = [n[0] / n_len, n[1] / n_len, n[2] / n_len];
    let off = dot(up, n);
    let foot = [up[0] - off * n[0], up[1] - off * n[1], up[2] - off * n[2]];
    let foot_len = norm(foot);
    if foot_len < 1e-15 {
        return endpoints;
    }
    // the foot of the perpendicular must lie between a and b on the arc
    let within = dot(cross(ua, foot), n) >= 0.0 && dot(cross(foot, ub), n) >= 0.0;
    if !within {
        return endpoints;
    }
    let cross_track = EARTH_RADIUS_M * off.abs().atan2(foot_len);
    cross_track.min(endpoints)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoiPolygon {
    pub poi_id: String,
    pub name: String,
    /// Ring vertices, implicitly closed.
    pub vertices: Vec<LatLon>,
}

fn segments_intersect(p1: LatLon, p2: LatLon, q1: LatLon, q2: LatLon) -> bool {
    fn orient(a: LatLon, b: LatLon, c: LatLon) -> f64 {
        (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

impl PoiPolygon {
    pub fn new(poi_id: impl Into<String>, name: impl Into<String>, vertices: Vec<LatLon>) -> Self {
        PoiPolygon {
            poi_id: poi_id.into(),
            name: name.into(),
            vertices,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (LatLon, LatLon)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Checks vertex count, coordinate ranges and that the ring does not
    /// cross itself.
    pub fn validate(&self) -> Result<(), GeoError> {
        let bad = |msg: &str| Err(GeoError::InvalidPolygon(self.poi_id.clone(), msg.into()));
        if self.poi_id.is_empty() {
            return bad("empty poi id");
        }
        if self.vertices.len() < 3 {
            return bad("fewer than 3 vertices");
        }
        if self.vertices.iter().any(|v| !v.is_valid()) {
            return bad("coordinate out of range");
        }
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in i + 1..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return bad("self-intersecting ring");
                }
            }
        }
        Ok(())
    }

    /// Even-odd ray casting in lat/lon space.
    pub fn contains(&self, p: LatLon) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let t = (p.lat - a.lat) / (b.lat - a.lat);
                let lon_at = a.lon + t * (b.lon - a.lon);
                if p.lon < lon_at {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Zero when the point is inside, otherwise the distance to the nearest edge.
    pub fn distance_to(&self, p: LatLon) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), v| (a.min(v.lat), b.max(v.lat), c.min(v.lon), d.max(v.lon)),
        )
    }
}

/// Picks the best candidate: smallest distance, then smallest poi id.
fn better(candidate: (f64, &str), best: Option<(f64, &str)>) -> bool {
    match best {
        None => true,
        Some((d, id)) => candidate.0 < d || (candidate.0 == d && candidate.1 < id),
    }
}

/// Uniform lat/lon grid over POI polygons.
#[derive(Clone, Debug)]
pub struct PoiIndex {
    polygons: Vec<PoiPolygon>,
    cell_deg: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    /// Polygons that cannot be gridded (antimeridian crossers); always scanned.
    unindexed: Vec<usize>,
}

impl PoiIndex {
    pub fn build(polygons: Vec<PoiPolygon>) -> Result<Self, GeoError> {
        Self::with_cell_size(polygons, DEFAULT_CELL_DEG)
    }

    pub fn with_cell_size(polygons: Vec<PoiPolygon>, cell_deg: f64) -> Result<Self, GeoError> {
        assert!(cell_deg > 0.0, "cell size must be positive");
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut unindexed = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, poly) in polygons.iter().enumerate() {
            poly.validate()?;
            if !seen.insert(poly.poi_id.as_str()) {
                return Err(GeoError::InvalidPolygon(
                    poly.poi_id.clone(),
                    "duplicate poi id".into(),
                ));
            }
            let (lat0, lat1, lon0, lon1) = poly.bbox();
            let span = ((lat1 - lat0) / cell_deg + 1.0) * ((lon1 - lon0) / cell_deg + 1.0);
            if lon1 - lon0 > 180.0 || span > MAX_SEARCH_CELLS as f64 {
                unindexed.push(i);
                continue;
            }
            for r in cell_of(lat0, cell_deg)..=cell_of(lat1, cell_deg) {
                for c in cell_of(lon0, cell_deg)..=cell_of(lon1, cell_deg) {
                    cells.entry((r, c)).or_default().push(i);
                }
            }
        }
        Ok(PoiIndex {
            polygons,
            cell_deg,
            cells,
            unindexed,
        })
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn polygons(&self) -> &[PoiPolygon] {
        &self.polygons
    }

    pub fn get(&self, poi_id: &str) -> Option<&PoiPolygon> {
        self.polygons.iter().find(|p| p.poi_id == poi_id)
    }

    /// Indices of polygons whose bounding box may lie within `radius_m` of `p`.
    pub fn candidates(&self, p: LatLon, radius_m: f64) -> Vec<usize> {
        let dlat = radius_m / METERS_PER_DEG_LAT;
        let coslat = (p.lat.abs() + dlat).min(90.0).to_radians().cos();
        let near_pole = coslat < 1e-6;
        let dlon = if near_pole { 360.0 } else { dlat / coslat };
        // margin for rounding in cell assignment
        let margin = 1e-9;
        let (lat0, lat1) = (p.lat - dlat - margin, p.lat + dlat + margin);
        let (lon0, lon1) = (p.lon - dlon - margin, p.lon + dlon + margin);
        let rows = cell_of(lat1, self.cell_deg) - cell_of(lat0, self.cell_deg) + 1;
        let cols = cell_of(lon1, self.cell_deg) - cell_of(lon0, self.cell_deg) + 1;
        let crosses_meridian = lon0 < -180.0 || lon1 > 180.0;
        if near_pole || crosses_meridian || (rows * cols) as usize > MAX_SEARCH_CELLS {
            return (0..self.polygons.len()).collect();
        }
        let mut out: Vec<usize> = self.unindexed.clone();
        for r in cell_of(lat0, self.cell_deg)..=cell_of(lat1, self.cell_deg) {
            for c in cell_of(lon0, self.cell_deg)..=cell_of(lon1, self.cell_deg) {
                if let Some(list) = self.cells.get(&(r, c)) {
                    out.extend_from_slice(list);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The POI containing `p` or whose boundary lies within `threshold_m`.
    /// Nearest wins; equal distances go to the smaller poi id.
    pub fn assign(&self, p: LatLon, threshold_m: f64) -> Option<&str> {
        let mut best: Option<(f64, &str)> = None;
        for i in self.candidates(p, threshold_m) {
            let poly = &self.polygons[i];
            let d = poly.distance_to(p);
            if d <= threshold_m && better((d, &poly.poi_id), best) {
                best = Some((d, &poly.poi_id));
            }
        }
        best.map(|(_, id)| id)
    }
}

fn cell_of(deg: f64, cell: f64) -> i64 {
    (deg / cell).floor() as i64
}

pub fn build_poi_index(polygons: Vec<PoiPolygon>) -> Result<PoiIndex, GeoError> {
    PoiIndex::build(polygons)
}

pub fn assign_poi(point: LatLon, index: &PoiIndex, threshold_m: f64) -> Option<&str> {
    index.assign(point, threshold_m)
}

/// Reads `poi_id<TAB>name<TAB>lat1,lon1;lat2,lon2;...`.
pub fn parse_poi_file<R: BufRead>(reader: R) -> Result<Vec<PoiPolygon>, GeoError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| GeoError::MalformedLine {
            line: idx + 1,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", cols.len())));
        }
        let vertices = cols[2]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|pair| {
                let (lat, lon) = pair
                    .split_once(',')
                    .ok_or_else(|| bad(format!("bad vertex {pair:?}")))?;
                let lat = lat.trim().parse().map_err(|_| bad(format!("bad latitude {lat:?}")))?;
                let lon = lon.trim().parse().map_err(|_| bad(format!("bad longitude {lon:?}")))?;
                Ok(LatLon::new(lat, lon))
            })
            .collect::<Result<Vec<_>, GeoError>>()?;
        out.push(PoiPolygon::new(cols[0], cols[1], vertices));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WoeidLevel {
    Earth,
    Continent,
    Country,
    State,
    City,
    Zip,
    Neighborhood,
    Street,
}

impl WoeidLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            WoeidLevel::Earth => "Earth",
            WoeidLevel::Continent => "Continent",
            WoeidLevel::Country => "Country",
            WoeidLevel::State => "State",
            WoeidLevel::City => "City",
            WoeidLevel::Zip => "Zip",
            WoeidLevel::Neighborhood => "Neighborhood",
            WoeidLevel::Street => "Street",
        }
    }
}

impl fmt::Display for WoeidLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WoeidLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "earth" => WoeidLevel::Earth,
            "continent" => WoeidLevel::Continent,
            "country" => WoeidLevel::Country,
            "state" => WoeidLevel::State,
            "city" => WoeidLevel::City,
            "zip" => WoeidLevel::Zip,
            "neighborhood" => WoeidLevel::Neighborhood,
            "street" => WoeidLevel::Street,
            other => return Err(format!("unknown woeid level {other:?}")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Woeid {
    pub id: String,
    pub level: WoeidLevel,
    pub parent: Option<String>,
}

/// Woeid hierarchy keyed by id.
#[derive(Clone, Debug, Default)]
pub struct WoeidTable {
    entries: BTreeMap<String, Woeid>,
}

impl WoeidTable {
    /// Builds the table and checks that every parent chain strictly ascends.
    pub fn new(woeids: Vec<Woeid>) -> Result<Self, GeoError> {
        let mut entries = BTreeMap::new();
        for (i, w) in woeids.into_iter().enumerate() {
            if entries.contains_key(&w.id) {
                return Err(GeoError::InvalidWoeid {
                    line: i + 1,
                    reason: format!("duplicate id {}", w.id),
                });
            }
            entries.insert(w.id.clone(), w);
        }
        let table = WoeidTable { entries };
        for w in table.entries.values() {
            if let Some(pid) = &w.parent {
                let parent = table.entries.get(pid).ok_or_else(|| GeoError::InvalidWoeid {
                    line: 0,
                    reason: format!("{}: unknown parent {pid}", w.id),
                })?;
                if parent.level >= w.level {
                    return Err(GeoError::InvalidWoeid {
                        line: 0,
                        reason: format!("{}: parent {pid} is not at a higher level", w.id),
                    });
                }
            }
        }
        Ok(table)
    }

    pub fn get(&self, id: &str) -> Option<&Woeid> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Woeid> {
        self.entries.values()
    }

    /// Walks up to the City ancestor for woeids below City level.
    pub fn truncate_to_city<'a>(&'a self, id: &'a str) -> &'a str {
        let mut cur = match self.entries.get(id) {
            Some(w) => w,
            None => return id,
        };
        while cur.level > WoeidLevel::City {
            match cur.parent.as_ref().and_then(|p| self.entries.get(p)) {
                Some(p) => cur = p,
                None => break,
            }
        }
        &cur.id
    }
}

pub fn write_woeid_table<W: Write>(mut out: W, table: &WoeidTable) -> std::io::Result<()> {
    for w in table.iter() {
        writeln!(out, "{}\t{}\t{}", w.id, w.level, w.parent.as_deref().unwrap_or("-"))?;
    }
    Ok(())
}

/// Reads `id<TAB>level<TAB>parent_id` lines.
pub fn parse_woeid_table<R: BufRead>(reader: R) -> Result<WoeidTable, GeoError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = |reason: String| GeoError::InvalidWoeid {
            line: idx + 1,
            reason,
        };
        if cols.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", cols.len())));
        }
        let level = cols[1].parse().map_err(bad)?;
        out.push(Woeid {
            id: cols[0].to_owned(),
            level,
            parent: (cols[2] != "-" && !cols[2].is_empty()).then(|| cols[2].to_owned()),
        });
    }
    WoeidTable::new(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocationKind {
    WoeidLoc,
    PoiLoc,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocationToken {
    pub kind: LocationKind,
    pub id: String,
}

impl LocationToken {
    pub fn woeid(id: impl Into<String>) -> Self {
        LocationToken {
            kind: LocationKind::WoeidLoc,
            id: id.into(),
        }
    }

    pub fn poi(id: impl Into<String>) -> Self {
        LocationToken {
            kind: LocationKind::PoiLoc,
            id: id.into(),
        }
    }
}

/// Resolves location tokens for queries and sessions.
#[derive(Clone, Debug)]
pub struct LocationResolver {
    pub woeids: Option<WoeidTable>,
    pub pois: Option<PoiIndex>,
    pub poi_mode: bool,
    pub threshold_m: f64,
}

impl Default for LocationResolver {
    fn default() -> Self {
        LocationResolver {
            woeids: None,
            pois: None,
            poi_mode: false,
            threshold_m: DEFAULT_POI_THRESHOLD_M,
        }
    }
}

impl LocationResolver {
    pub fn new(woeids: Option<WoeidTable>, pois: Option<PoiIndex>, poi_mode: bool) -> Self {
        LocationResolver {
            woeids,
            pois,
            poi_mode,
            ..Default::default()
        }
    }

    /// The user's physical location for this event: a POI in POI mode,
    /// otherwise the user woeid.
    pub fn user_location(&self, event: &SessionEvent) -> Option<LocationToken> {
        user_location(event, self.poi_mode, self.pois.as_ref(), self.threshold_m, self.woeids.as_ref())
    }

    /// Location attached to a query: the user location for implicit local
    /// queries, the query woeid for explicit ones.
    pub fn resolve(&self, event: &SessionEvent) -> Option<LocationToken> {
        resolve(event, self.poi_mode, self.pois.as_ref(), self.threshold_m, self.woeids.as_ref())
    }
}

fn woeid_token(id: &str, woeids: Option<&WoeidTable>) -> LocationToken {
    match woeids {
        Some(table) => LocationToken::woeid(table.truncate_to_city(id)),
        None => LocationToken::woeid(id),
    }
}

fn user_location(
    event: &SessionEvent,
    poi_mode: bool,
    pois: Option<&PoiIndex>,
    threshold_m: f64,
    woeids: Option<&WoeidTable>,
) -> Option<LocationToken> {
    if poi_mode {
        let p = event.latlon?;
        pois?.assign(p, threshold_m).map(LocationToken::poi)
    } else {
        event.user_woeid.as_deref().map(|w| woeid_token(w, woeids))
    }
}

fn resolve(
    event: &SessionEvent,
    poi_mode: bool,
    pois: Option<&PoiIndex>,
    threshold_m: f64,
    woeids: Option<&WoeidTable>,
) -> Option<LocationToken> {
    if event.kind != EventKind::Query {
        return None;
    }
    match event.local_intent {
        LocalIntent::None => None,
        LocalIntent::Implicit => user_location(event, poi_mode, pois, threshold_m, woeids),
        LocalIntent::Explicit => event.query_woeid.as_deref().map(|w| woeid_token(w, woeids)),
    }
}

/// Resolves the location token of a query event without a woeid table.
pub fn resolve_location(
    event: &SessionEvent,
    poi_mode: bool,
    index: Option<&PoiIndex>,
) -> Option<LocationToken> {
    resolve(event, poi_mode, index, DEFAULT_POI_THRESHOLD_M, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn square(id: &str, lat: f64, lon: f64, half: f64) -> PoiPolygon {
        PoiPolygon::new(
            id,
            id,
            vec![
                LatLon::new(lat - half, lon - half),
                LatLon::new(lat - half, lon + half),
                LatLon::new(lat + half, lon + half),
                LatLon::new(lat + half, lon - half),
            ],
        )
    }

    #[test]
    fn haversine_basics() {
        let o = LatLon::new(0.0, 0.0);
        assert_eq!(haversine_distance(o, o), 0.0);
        assert_relative_eq!(
            haversine_distance(o, LatLon::new(0.0, 180.0)),
            PI * EARTH_RADIUS_M,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            PI * EARTH_RADIUS_M,
            20_015_086.796_020_57,
            max_relative = 1e-12
        );
    }

    #[test]
    fn one_degree_meridian_matches_spherical_oracle() {
        // spherical law of cosines on a meridian reduces to R * dphi exactly
        let oracle = EARTH_RADIUS_M * (1.0f64).to_radians();
        let d = haversine_distance(LatLon::new(0.0, 0.0), LatLon::new(1.0, 0.0));
        assert_relative_eq!(d, oracle, max_relative = 1e-12);
        assert_relative_eq!(d, 111_194.926_644_558_73, max_relative = 1e-12);
    }

    #[test]
    fn segment_distance_on_equator() {
        let a = LatLon::new(-0.001, 0.0);
        let b = LatLon::new(0.001, 0.0);
        let delta = (26.0 / EARTH_RADIUS_M).to_degrees();
        let p = LatLon::new(0.0, delta);
        assert_relative_eq!(point_segment_distance(p, a, b), 26.0, max_relative = 1e-9);
        // beyond the end of the arc the nearest point is the endpoint
        let q = LatLon::new(0.002, 0.0);
        assert_relative_eq!(
            point_segment_distance(q, a, b),
            haversine_distance(q, b),
            max_relative = 1e-9
        );
    }

    #[test]
    fn segment_distance_matches_dense_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let base = LatLon::new(rng.random_range(-60.0..60.0), rng.random_range(-170.0..170.0));
            let jitter = |rng: &mut rand_chacha::ChaCha8Rng| {
                LatLon::new(
                    base.lat + rng.random_range(-0.01..0.01),
                    base.lon + rng.random_range(-0.01..0.01),
                )
            };
            let (a, b, p) = (jitter(&mut rng), jitter(&mut rng), jitter(&mut rng));
            // slerp sampling along the arc
            let (ua, ub) = (to_unit(a), to_unit(b));
            let omega = dot(ua, ub).clamp(-1.0, 1.0).acos();
            let sampled = (0..=20_000)
                .map(|i| {
                    let t = i as f64 / 20_000.0;
                    let (wa, wb) = if omega < 1e-12 {
                        (1.0 - t, t)
                    } else {
                        (
                            ((1.0 - t) * omega).sin() / omega.sin(),
                            (t * omega).sin() / omega.sin(),
                        )
                    };
                    let v = [
                        wa * ua[0] + wb * ub[0],
                        wa * ua[1] + wb * ub[1],
                        wa * ua[2] + wb * ub[2],
                    ];
                    let q = LatLon::new(
                        v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt()).to_degrees(),
                        v[1].atan2(v[0]).to_degrees(),
                    );
                    haversine_distance(p, q)
                })
                .fold(f64::INFINITY, f64::min);
            let d = point_segment_distance(p, a, b);
            assert!(d <= sampled * (1.0 + 1e-9) + 1e-6, "{d} > sampled {sampled}");
            assert!(sampled - d < 0.2, "{d} vs sampled {sampled}");
        }
    }

    #[test]
    fn polygon_validation() {
        assert!(square("a", 0.0, 0.0, 0.001).validate().is_ok());
        let bowtie = PoiPolygon::new(
            "bow",
            "bow",
            vec![
                LatLon::new(0.0, 0.0),
                LatLon::new(1.0, 1.0),
                LatLon::new(1.0, 0.0),
                LatLon::new(0.0, 1.0),
            ],
        );
        assert!(matches!(bowtie.validate(), Err(GeoError::InvalidPolygon(..))));
        let two = PoiPolygon::new("two", "two", vec![LatLon::new(0.0, 0.0), LatLon::new(1.0, 1.0)]);
        assert!(PoiIndex::build(vec![two]).is_err());
    }

    #[test]
    fn empty_index_and_single_polygon() {
        let idx = PoiIndex::build(vec![]).unwrap();
        assert!(idx.candidates(LatLon::new(10.0, 10.0), 25.0).is_empty());
        assert_eq!(idx.assign(LatLon::new(10.0, 10.0), 25.0), None);

        let idx = PoiIndex::build(vec![square("p", 10.0, 10.0, 0.001)]).unwrap();
        assert_eq!(idx.assign(LatLon::new(10.0, 10.0), 25.0), Some("p"));
        assert_eq!(idx.assign(LatLon::new(11.0, 10.0), 25.0), None);
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let poly = PoiPolygon::new(
            "edge",
            "edge",
            vec![
                LatLon::new(-0.001, 0.0),
                LatLon::new(0.001, 0.0),
                LatLon::new(0.0, -0.002),
            ],
        );
        let idx = PoiIndex::build(vec![poly.clone()]).unwrap();
        let p26 = LatLon::new(0.0, (26.0 / EARTH_RADIUS_M).to_degrees());
        assert_eq!(idx.assign(p26, 25.0), None);
        let d = poly.distance_to(p26);
        assert_eq!(idx.assign(p26, d), Some("edge"));
        assert_eq!(idx.assign(p26, d.next_down()), None);
    }

    #[test]
    fn nearest_then_lexicographic() {
        let a = square("b_poi", 0.0, 0.0, 0.0001);
        let b = square("a_poi", 0.0, 0.0, 0.0001);
        let idx = PoiIndex::build(vec![a, b]).unwrap();
        assert_eq!(idx.assign(LatLon::new(0.0, 0.0), 25.0), Some("a_poi"));
    }

    #[test]
    fn antimeridian_falls_back_to_scan() {
        let poly = square("dateline", 0.0, 179.9995, 0.0004);
        let idx = PoiIndex::build(vec![poly]).unwrap();
        let p = LatLon::new(0.0, 179.99999);
        assert!(idx.candidates(p, 25.0).contains(&0));
        assert_eq!(idx.assign(LatLon::new(0.0, 179.9995), 25.0), Some("dateline"));
    }

    #[test]
    fn woeid_table_and_truncation() {
        let table = parse_woeid_table(
            "w_earth\tEarth\t-\nw_us\tCountry\tw_earth\nw_ny\tState\tw_us\n\
             w_nyc\tCity\tw_ny\nw_10001\tZip\tw_nyc\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(table.truncate_to_city("w_10001"), "w_nyc");
        assert_eq!(table.truncate_to_city("w_nyc"), "w_nyc");
        assert_eq!(table.truncate_to_city("w_ny"), "w_ny");
        assert_eq!(table.truncate_to_city("unknown"), "unknown");

        let bad = parse_woeid_table("a\tCity\tb\nb\tZip\t-\n".as_bytes());
        assert!(bad.is_err());
    }

    #[test]
    fn poi_file_parsing() {
        let polys =
            parse_poi_file("p1\tStadium\t0,0;0,0.001;0.001,0.001;0.001,0\n".as_bytes()).unwrap();
        assert_eq!(polys[0].vertices.len(), 4);
        assert!(parse_poi_file("p1\tStadium\t0;1\n".as_bytes()).is_err());
    }

    #[test]
    fn resolution_rules() {
        let implicit = SessionEvent::query("coffee shops near me", 0, LocalIntent::Implicit)
            .with_user_woeid("woeid_12345");
        assert_eq!(
            resolve_location(&implicit, false, None),
            Some(LocationToken::woeid("woeid_12345"))
        );
        let explicit = SessionEvent::query("best hotels in new york city", 0, LocalIntent::Explicit)
            .with_query_woeid("woeid_2459115")
            .with_user_woeid("woeid_boston");
        assert_eq!(
            resolve_location(&explicit, false, None),
            Some(LocationToken::woeid("woeid_2459115"))
        );
        let plain = SessionEvent::query("cheap flights", 0, LocalIntent::None).with_user_woeid("w");
        assert_eq!(resolve_location(&plain, false, None), None);
        let missing = SessionEvent::query("pizza near me", 0, LocalIntent::Implicit);
        assert_eq!(resolve_location(&missing, false, None), None);

        let idx = PoiIndex::build(vec![square("stadium", 10.0, 10.0, 0.001)]).unwrap();
        let at_poi = SessionEvent::query("tickets near me", 0, LocalIntent::Implicit)
            .with_latlon(10.0, 10.0)
            .with_user_woeid("w");
        assert_eq!(
            resolve_location(&at_poi, true, Some(&idx)),
            Some(LocationToken::poi("stadium"))
        );
        let mut explicit_at_poi = at_poi.clone();
        explicit_at_poi.local_intent = LocalIntent::Explicit;
        explicit_at_poi.query_woeid = Some("woeid_q".into());
        assert_eq!(
            resolve_location(&explicit_at_poi, true, Some(&idx)),
            Some(LocationToken::woeid("woeid_q"))
        );
    }

    fn arb_point() -> impl Strategy<Value = LatLon> {
        (-80.0f64..80.0, -179.0f64..179.0).prop_map(|(a, b)| LatLon::new(a, b))
    }

    proptest! {
        #[test]
        fn haversine_symmetric_and_triangle(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = haversine_distance(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - haversine_distance(b, a)).abs() <= 1e-6 * ab.max(1.0));
            let ac = haversine_distance(a, c);
            let cb = haversine_distance(c, b);
            prop_assert!(ab <= (ac + cb) * (1.0 + 1e-6) + 1e-6);
        }

        #[test]
        fn zero_threshold_is_containment(
            centers in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..5),
            p in (-50.0f64..50.0, -50.0f64..50.0),
        ) {
            let polys: Vec<PoiPolygon> = centers
                .iter()
                .enumerate()
                .map(|(i, &(la, lo))| square(&format!("p{i}"), la, lo, 5.0))
                .collect();
            let idx = PoiIndex::with_cell_size(polys.clone(), 1.0).unwrap();
            let p = LatLon::new(p.0, p.1);
            let contained: Option<&str> = polys
                .iter()
                .filter(|poly| poly.contains(p))
                .map(|poly| poly.poi_id.as_str())
                .min();
            prop_assert_eq!(idx.assign(p, 0.0), contained);
        }
    }
}
