//! Deterministic tabletop world.
//!
//! Objects sit on a ring around the arena center. The agent starts at the
//! center facing +x and inspects the table from a small set of stations,
//! each with a 60° half-angle view cone. A station reports at most
//! `percept_cap` objects (two by default), nearest first, which is what
//! makes the fetch game partially observable. The human speaker stands on
//! the +x side of the table facing the agent.
//!
//! Detection is perfect unless `noise_sigma > 0`: the simulator knows which
//! object is which for bookkeeping, but only feature vectors reach the
//! learner.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Frame, ObjectId, Pose};
use crate::rng::{rng_for, standard_normal};

pub const VIEW_HALF_ANGLE: f64 = PI / 3.0;
/// View range as a fraction of the arena diagonal.
pub const VIEW_RANGE_FRACTION: f64 = 0.4;
pub const DEFAULT_PERCEPT_CAP: usize = 2;

/// Object ring radius as a fraction of the shorter arena side.
const OBJECT_RING: f64 = 0.3;
/// Station ring radius as a fraction of the shorter arena side.
const STATION_RING: f64 = 0.1;
/// Speaker distance from the center as a fraction of the arena width.
const SPEAKER_OFFSET: f64 = 0.45;
/// Widest angular span (seen from the center) a single auto station covers.
const MAX_ARC: f64 = 80.0 * PI / 180.0;
const NOISE_STREAM: u64 = 0x006e_6f69_7365;
const LAYOUT_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Cube,
    Ball,
    Cone,
    Brick,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Cube, Shape::Ball, Shape::Cone, Shape::Brick];

    /// Default minor/major axis ratio range.
    fn ratio_range(self) -> [f64; 2] {
        match self {
            Shape::Cube | Shape::Ball => [1.0, 1.0],
            Shape::Cone => [0.3, 0.6],
            Shape::Brick => [0.2, 0.5],
        }
    }

    fn corner_count(self) -> u32 {
        match self {
            Shape::Cube | Shape::Brick => 8,
            Shape::Ball => 0,
            Shape::Cone => 1,
        }
    }
}

/// Shape requested by a config entry; `any` draws one per arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeChoice {
    Cube,
    Ball,
    Cone,
    Brick,
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: ShapeChoice,
    pub area_range: [f64; 2],
    pub albedo_range: [f64; 2],
    /// Minor/major axis ratio; defaults per shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner_count: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StationCount {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for StationCount {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            StationCount::Auto => s.serialize_str("auto"),
            StationCount::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for StationCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = StationCount;
            fn expecting(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                f.write_str("a positive integer or \"auto\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<StationCount, E> {
                Ok(StationCount::Fixed(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<StationCount, E> {
                usize::try_from(v).map(StationCount::Fixed).map_err(|_| E::custom("station_count must be nonnegative"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<StationCount, E> {
                if v == "auto" {
                    Ok(StationCount::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

fn default_cap() -> usize {
    DEFAULT_PERCEPT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaConfig {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub station_count: StationCount,
    /// Width and height; the arena is centered on the origin.
    pub bounds: [f64; 2],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_cap")]
    pub percept_cap: usize,
}

impl Default for ArenaConfig {
    /// Four objects of random shape on a 10×10 table.
    fn default() -> Self {
        let spec = ObjectSpec {
            shape: ShapeChoice::Any,
            area_range: [0.4, 4.0],
            albedo_range: [0.05, 0.95],
            ratio_range: None,
            corner_count: None,
        };
        ArenaConfig {
            objects: alloc::vec![spec; 4],
            station_count: StationCount::Auto,
            bounds: [10.0, 10.0],
            noise_sigma: 0.0,
            percept_cap: DEFAULT_PERCEPT_CAP,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], lo: f64, hi: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] || r[0] < lo || r[1] > hi {
        return Err(Error::Config(format!("{name} {:?} must satisfy {lo} <= lo <= hi <= {hi}", r)));
    }
    Ok(())
}

impl ArenaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::Config(String::from("config names no objects")));
        }
        for (i, o) in self.objects.iter().enumerate() {
            check_range(&format!("objects[{i}].area_range"), o.area_range, f64::MIN_POSITIVE, f64::MAX)?;
            check_range(&format!("objects[{i}].albedo_range"), o.albedo_range, 0.0, 1.0)?;
            if let Some(r) = o.ratio_range {
                check_range(&format!("objects[{i}].ratio_range"), r, f64::MIN_POSITIVE, 1.0)?;
            }
        }
        if !(self.bounds[0].is_finite() && self.bounds[1].is_finite() && self.bounds[0] > 0.0 && self.bounds[1] > 0.0) {
            return Err(Error::Config(format!("bounds {:?} must be positive", self.bounds)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma {} must be nonnegative", self.noise_sigma)));
        }
        if self.percept_cap == 0 {
            return Err(Error::Config(String::from("percept_cap must be at least 1")));
        }
        if self.station_count == StationCount::Fixed(0) {
            return Err(Error::Config(String::from("station_count must be at least 1")));
        }
        Ok(())
    }

    pub fn max_area(&self) -> f64 {
        self.objects.iter().map(|o| o.area_range[1]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub object_id: ObjectId,
    pub shape: Shape,
    pub footprint_area: f64,
    pub major: f64,
    pub minor: f64,
    pub corner_count: u32,
    pub albedo: f64,
    pub position: [f64; 2],
}

/// Feature normalization constants shared by every object in an arena.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScales {
    pub max_area: f64,
    pub view_range: f64,
}

/// Features of `object` with lateral/depth taken relative to `origin`.
pub fn extract_features(object: &SimObject, origin: &Pose, scales: &FeatureScales) -> Result<FeatureVector> {
    if object.major.is_nan() || object.major <= 0.0 {
        return Err(Error::InvalidObject { id: object.object_id, reason: String::from("major axis must be positive") });
    }
    let [x, y] = object.position;
    let (_, right) = origin.to_local(x, y);
    let distance = origin.distance_to(x, y);
    FeatureVector::clamped([
        object.footprint_area / scales.max_area,
        1.0 - object.minor / object.major,
        f64::from(object.corner_count.min(8)) / 8.0,
        object.albedo,
        right / scales.view_range,
        distance / scales.view_range,
    ])
}

/// One object's features in both frames. Intrinsic components agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramedFeatures {
    pub agent: FeatureVector,
    pub speaker: FeatureVector,
}

impl FramedFeatures {
    pub fn in_frame(&self, frame: Frame) -> &FeatureVector {
        match frame {
            Frame::Agent => &self.agent,
            Frame::Speaker => &self.speaker,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeenObject {
    pub object_id: ObjectId,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percept {
    pub station_index: usize,
    /// Nearest first (distance from the station); ties by id.
    pub visible: Vec<SeenObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arena {
    objects: Vec<SimObject>,
    stations: Vec<Pose>,
    speaker_pose: Pose,
    agent_start: Pose,
    rng_seed: u64,
    bounds: [f64; 2],
    scales: FeatureScales,
    noise_sigma: f64,
    percept_cap: usize,
}

impl Arena {
    /// Assembles an arena from explicit parts and checks its invariants:
    /// at least one object, unique ids, `minor <= major`, albedo in range,
    /// stations inside the bounds and every object inside some station's cone.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        objects: Vec<SimObject>,
        stations: Vec<Pose>,
        speaker_pose: Pose,
        bounds: [f64; 2],
        max_area: f64,
        noise_sigma: f64,
        percept_cap: usize,
        rng_seed: u64,
    ) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::Construction(String::from("arena needs at least one object")));
        }
        if stations.is_empty() {
            return Err(Error::Construction(String::from("arena needs at least one station")));
        }
        for (i, o) in objects.iter().enumerate() {
            if objects[..i].iter().any(|p| p.object_id == o.object_id) {
                return Err(Error::Construction(format!("duplicate object id {}", o.object_id)));
            }
            let bad = |reason: &str| Error::InvalidObject { id: o.object_id, reason: String::from(reason) };
            if o.major.is_nan() || o.major <= 0.0 || o.minor > o.major || o.minor < 0.0 {
                return Err(bad("axes must satisfy 0 <= minor <= major, major > 0"));
            }
            if !(0.0..=1.0).contains(&o.albedo) {
                return Err(bad("albedo outside [0, 1]"));
            }
            if !(o.footprint_area > 0.0 && o.footprint_area.is_finite()) {
                return Err(bad("footprint area must be positive"));
            }
        }
        let [w, h] = bounds;
        let inside = |p: &Pose| libm::fabs(p.x) <= w / 2.0 && libm::fabs(p.y) <= h / 2.0;
        if let Some(i) = stations.iter().position(|p| !inside(p)) {
            return Err(Error::Construction(format!("station {i} lies outside the bounds")));
        }
        let scales = FeatureScales { max_area, view_range: VIEW_RANGE_FRACTION * libm::hypot(w, h) };
        let arena = Arena {
            objects,
            stations,
            speaker_pose,
            agent_start: Pose::new(0.0, 0.0, 0.0),
            rng_seed,
            bounds,
            scales,
            noise_sigma,
            percept_cap,
        };
        for o in &arena.objects {
            if !(0..arena.stations.len()).any(|s| arena.in_view(s, o)) {
                return Err(Error::Construction(format!("object {} is outside every station's view", o.object_id)));
            }
        }
        Ok(arena)
    }

    pub fn objects(&self) -> &[SimObject] {
        &self.objects
    }

    pub fn object(&self, id: ObjectId) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.object_id == id)
    }

    pub fn stations(&self) -> &[Pose] {
        &self.stations
    }

    pub fn speaker_pose(&self) -> &Pose {
        &self.speaker_pose
    }

    pub fn agent_start(&self) -> &Pose {
        &self.agent_start
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn bounds(&self) -> [f64; 2] {
        self.bounds
    }

    pub fn scales(&self) -> &FeatureScales {
        &self.scales
    }

    pub fn percept_cap(&self) -> usize {
        self.percept_cap
    }

    pub fn set_percept_cap(&mut self, cap: usize) {
        self.percept_cap = cap.max(1);
    }

    pub fn frame_origin(&self, frame: Frame) -> &Pose {
        match frame {
            Frame::Agent => &self.agent_start,
            Frame::Speaker => &self.speaker_pose,
        }
    }

    fn in_view(&self, station: usize, object: &SimObject) -> bool {
        let pose = &self.stations[station];
        let [x, y] = object.position;
        pose.bearing_to(x, y) <= VIEW_HALF_ANGLE + 1e-12 && pose.distance_to(x, y) <= self.scales.view_range
    }

    /// Noise-free features of `object` relative to `frame`'s origin.
    pub fn features(&self, object: &SimObject, frame: Frame) -> Result<FeatureVector> {
        extract_features(object, self.frame_origin(frame), &self.scales)
    }

    /// Noise-free features of object `id` in both frames.
    pub fn framed_features(&self, id: ObjectId) -> Result<FramedFeatures> {
        let object = self.object(id).ok_or_else(|| Error::invalid(format!("no object {id} in arena")))?;
        Ok(FramedFeatures { agent: self.features(object, Frame::Agent)?, speaker: self.features(object, Frame::Speaker)? })
    }

    fn perceived_features(&self, station: usize, object: &SimObject, frame: Frame) -> Result<FeatureVector> {
        let clean = self.features(object, frame)?;
        if self.noise_sigma == 0.0 {
            return Ok(clean);
        }
        let mut rng = rng_for(self.rng_seed, &[NOISE_STREAM, station as u64, u64::from(object.object_id.0)]);
        let mut noisy = *clean.as_array();
        for v in noisy.iter_mut() {
            *v += self.noise_sigma * standard_normal(&mut rng);
        }
        FeatureVector::clamped(noisy)
    }

    /// What the agent detects from `station_index`: objects in the view
    /// cone and range, nearest `percept_cap` of them.
    pub fn percept_at(&self, station_index: usize, frame: Frame) -> Result<Percept> {
        if station_index >= self.stations.len() {
            return Err(Error::StationOutOfRange { index: station_index, count: self.stations.len() });
        }
        let pose = &self.stations[station_index];
        let mut in_cone: Vec<(f64, &SimObject)> = self
            .objects
            .iter()
            .filter(|o| self.in_view(station_index, o))
            .map(|o| (pose.distance_to(o.position[0], o.position[1]), o))
            .collect();
        in_cone.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.object_id.cmp(&b.1.object_id)));
        let visible = in_cone
            .into_iter()
            .take(self.percept_cap)
            .map(|(_, o)| Ok(SeenObject { object_id: o.object_id, features: self.perceived_features(station_index, o, frame)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Percept { station_index, visible })
    }

    /// Object ids that appear in at least one station's percept.
    pub fn perceivable_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = (0..self.stations.len())
            .filter_map(|s| self.percept_at(s, Frame::Agent).ok())
            .flat_map(|p| p.visible.into_iter().map(|v| v.object_id))
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

fn unit(angle: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(angle);
    (c, s)
}

fn wrap(angle: f64) -> f64 {
    let a = libm::fmod(angle, TAU);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

fn draw(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}

fn sample_angles(rng: &mut impl Rng, n: usize) -> Option<Vec<f64>> {
    let min_sep = PI / n as f64;
    let mut angles: Vec<f64> = Vec::with_capacity(n);
    let mut tries = 0;
    while angles.len() < n {
        tries += 1;
        if tries > 10_000 {
            return None;
        }
        let a: f64 = rng.random_range(0.0..TAU);
        let clear = angles.iter().all(|&b| {
            let d = libm::fabs(a - b);
            d.min(TAU - d) >= min_sep
        });
        if clear {
            angles.push(a);
        }
    }
    Some(angles)
}

/// Groups objects into arcs of at most two objects spanning at most
/// [`MAX_ARC`], starting after the widest angular gap. Returns one heading
/// per arc.
fn auto_headings(angles: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = angles.iter().map(|&a| wrap(a)).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut start = 0;
    let mut widest = -1.0;
    for i in 0..n {
        let prev = sorted[(i + n - 1) % n];
        let gap = if n == 1 { TAU } else { wrap(sorted[i] - prev) };
        if gap > widest {
            widest = gap;
            start = i;
        }
    }
    let unrolled: Vec<f64> = (0..n).map(|k| sorted[(start + k) % n] + if start + k >= n { TAU } else { 0.0 }).collect();
    let mut headings = Vec::new();
    let mut i = 0;
    while i < n {
        let first = unrolled[i];
        let mut last = first;
        if i + 1 < n && unrolled[i + 1] - first <= MAX_ARC {
            last = unrolled[i + 1];
            i += 1;
        }
        i += 1;
        headings.push(wrap((first + last) / 2.0));
    }
    headings
}

fn layout(config: &ArenaConfig, seed: u64, attempt: u64) -> Result<Arena> {
    let mut rng = rng_for(seed, &[attempt]);
    let [w, h] = config.bounds;
    let ring = OBJECT_RING * w.min(h);
    let station_ring = STATION_RING * w.min(h);
    let n = config.objects.len();
    let angles = sample_angles(&mut rng, n)
        .ok_or_else(|| Error::Construction(format!("cannot space {n} objects around the table")))?;

    let objects = config
        .objects
        .iter()
        .zip(&angles)
        .enumerate()
        .map(|(i, (spec, &angle))| {
            let shape = match spec.shape {
                ShapeChoice::Cube => Shape::Cube,
                ShapeChoice::Ball => Shape::Ball,
                ShapeChoice::Cone => Shape::Cone,
                ShapeChoice::Brick => Shape::Brick,
                ShapeChoice::Any => Shape::ALL[rng.random_range(0..Shape::ALL.len())],
            };
            let area = draw(&mut rng, spec.area_range);
            let ratio = draw(&mut rng, spec.ratio_range.unwrap_or(shape.ratio_range()));
            let albedo = draw(&mut rng, spec.albedo_range);
            let major = libm::sqrt(area / ratio);
            let (ux, uy) = unit(angle);
            SimObject {
                object_id: ObjectId(i as u32),
                shape,
                footprint_area: area,
                major,
                minor: major * ratio,
                corner_count: spec.corner_count.unwrap_or(shape.corner_count()),
                albedo,
                position: [ring * ux, ring * uy],
            }
        })
        .collect();

    let headings = match config.station_count {
        StationCount::Auto => auto_headings(&angles),
        StationCount::Fixed(k) => (0..k).map(|i| TAU * i as f64 / k as f64).collect(),
    };
    let stations = headings
        .iter()
        .map(|&hd| {
            let (ux, uy) = unit(hd);
            Pose::new(station_ring * ux, station_ring * uy, hd)
        })
        .collect();
    let speaker = Pose::new(SPEAKER_OFFSET * w, 0.0, PI);
    Arena::from_parts(objects, stations, speaker, config.bounds, config.max_area(), config.noise_sigma, config.percept_cap, seed)
}

/// Builds the arena for `(config, seed)`.
///
/// With `station_count: auto` the object layout is redrawn (deterministically)
/// until every object shows up in some station's capped percept. A fixed
/// station count that leaves an object unseen is a construction error.
pub fn build_arena(config: &ArenaConfig, seed: u64) -> Result<Arena> {
    config.validate()?;
    let attempts = match config.station_count {
        StationCount::Auto => LAYOUT_ATTEMPTS,
        StationCount::Fixed(_) => 1,
    };
    let mut last = Error::Construction(String::from("no layout attempted"));
    for attempt in 0..attempts {
        match layout(config, seed, attempt) {
            Ok(arena) => {
                let seen = arena.perceivable_ids();
                if seen.len() == arena.objects.len() {
                    return Ok(arena);
                }
                last = Error::Construction(format!(
                    "{} of {} objects never appear in a percept",
                    arena.objects.len() - seen.len(),
                    arena.objects.len()
                ));
            }
            Err(e @ Error::Construction(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "station", rename_all = "lowercase")]
pub enum Advance {
    Moved(usize),
    Exhausted,
}

/// Agent pose, visited stations and step count for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub visited: Vec<bool>,
    pub steps: u32,
    pub station: Option<usize>,
}

impl AgentState {
    pub fn new(arena: &Arena) -> Self {
        AgentState { pose: *arena.agent_start(), visited: alloc::vec![false; arena.stations().len()], steps: 0, station: None }
    }

    pub fn has_unvisited(&self) -> bool {
        self.visited.iter().any(|v| !v)
    }

    /// Moves to the nearest unvisited station (ties: lowest index).
    pub fn advance(&mut self, arena: &Arena) -> Advance {
        let mut best: Option<(usize, f64)> = None;
        for (i, station) in arena.stations().iter().enumerate() {
            if self.visited[i] {
                continue;
            }
            let d = self.pose.distance_to(station.x, station.y);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            None => Advance::Exhausted,
            Some((i, _)) => {
                self.visited[i] = true;
                self.pose = arena.stations()[i];
                self.steps += 1;
                self.station = Some(i);
                Advance::Moved(i)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn object(id: u32, x: f64, y: f64) -> SimObject {
        SimObject {
            object_id: ObjectId(id),
            shape: Shape::Ball,
            footprint_area: 1.0,
            major: 1.0,
            minor: 1.0,
            corner_count: 0,
            albedo: 0.5,
            position: [x, y],
        }
    }

    fn one_station(objects: Vec<SimObject>, heading: f64) -> Result<Arena> {
        Arena::from_parts(objects, vec![Pose::new(0.0, 0.0, heading)], Pose::new(4.5, 0.0, PI), [10.0, 10.0], 4.0, 0.0, 2, 0)
    }

    #[test]
    fn single_cube_arena() {
        let config = ArenaConfig {
            objects: vec![ObjectSpec {
                shape: ShapeChoice::Cube,
                area_range: [1.0, 2.0],
                albedo_range: [0.2, 0.8],
                ratio_range: None,
                corner_count: None,
            }],
            ..ArenaConfig::default()
        };
        let arena = build_arena(&config, 7).unwrap();
        assert_eq!(arena.objects().len(), 1);
        assert!(!arena.stations().is_empty());
        let p = arena.percept_at(0, Frame::Agent).unwrap();
        assert_eq!(p.visible.len(), 1);
        assert_eq!(p.visible[0].object_id, ObjectId(0));
    }

    #[test]
    fn build_is_deterministic() {
        let config = ArenaConfig::default();
        assert_eq!(build_arena(&config, 99).unwrap(), build_arena(&config, 99).unwrap());
        assert_ne!(build_arena(&config, 99).unwrap(), build_arena(&config, 100).unwrap());
    }

    #[test]
    fn four_objects_all_perceivable() {
        let arena = build_arena(&ArenaConfig::default(), 42).unwrap();
        assert_eq!(arena.perceivable_ids(), vec![ObjectId(0), ObjectId(1), ObjectId(2), ObjectId(3)]);
        // Partial observability: a single percept never covers all four.
        assert!(arena.stations().len() >= 2);
    }

    #[test]
    fn station_facing_away_sees_nothing() {
        let mut arena = one_station(vec![object(0, 3.0, 0.0)], 0.0).unwrap();
        arena.stations.push(Pose::new(0.0, 0.0, PI));
        assert!(arena.percept_at(1, Frame::Agent).unwrap().visible.is_empty());
        assert!(matches!(arena.percept_at(2, Frame::Agent), Err(Error::StationOutOfRange { index: 2, count: 2 })));
    }

    #[test]
    fn percept_keeps_two_nearest() {
        let arena = one_station(vec![object(0, 3.0, 0.0), object(1, 1.0, 0.2), object(2, 2.0, -0.3)], 0.0).unwrap();
        let p = arena.percept_at(0, Frame::Agent).unwrap();
        let ids: Vec<_> = p.visible.iter().map(|v| v.object_id).collect();
        assert_eq!(ids, vec![ObjectId(1), ObjectId(2)]);
    }

    #[test]
    fn dead_ahead_has_zero_lateral() {
        let arena = one_station(vec![object(0, 3.0, 0.0)], 0.0).unwrap();
        let p = arena.percept_at(0, Frame::Agent).unwrap();
        assert!(p.visible[0].features.get(crate::Feature::Lateral).abs() < 1e-9);
    }

    #[test]
    fn invisible_object_is_construction_error() {
        let err = one_station(vec![object(0, -3.0, 0.0)], 0.0).unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
    }

    #[test]
    fn fixed_station_count_can_be_unsatisfiable() {
        let config = ArenaConfig { station_count: StationCount::Fixed(1), ..ArenaConfig::default() };
        assert!(matches!(build_arena(&config, 3), Err(Error::Construction(_))));
    }

    #[test]
    fn feature_definitions() {
        let scales = FeatureScales { max_area: 4.0, view_range: 5.0 };
        let origin = Pose::new(0.0, 0.0, 0.0);
        let ball = object(0, 2.0, 0.0);
        let f = extract_features(&ball, &origin, &scales).unwrap();
        assert_eq!(f.get(crate::Feature::Elongation), 0.0);
        assert_eq!(f.get(crate::Feature::Cornerness), 0.0);
        assert_eq!(f.get(crate::Feature::Size), 0.25);
        assert!((f.get(crate::Feature::Depth) - 0.4).abs() < 1e-12);
        let cube = SimObject { corner_count: 8, shape: Shape::Cube, ..object(1, 0.0, 0.0) };
        assert_eq!(extract_features(&cube, &origin, &scales).unwrap().get(crate::Feature::Cornerness), 1.0);
        let many = SimObject { corner_count: 20, ..cube.clone() };
        assert_eq!(extract_features(&many, &origin, &scales).unwrap().get(crate::Feature::Cornerness), 1.0);
        let flat = SimObject { major: 0.0, minor: 0.0, ..cube };
        assert!(matches!(extract_features(&flat, &origin, &scales), Err(Error::InvalidObject { .. })));
    }

    #[test]
    fn frames_mirror_lateral() {
        // Agent at origin facing +x; speaker at (4.5, 0) facing -x.
        let arena = one_station(vec![object(0, 2.0, -1.3)], 0.0).unwrap();
        let f = arena.framed_features(ObjectId(0)).unwrap();
        let a = f.agent.get(crate::Feature::Lateral);
        let s = f.speaker.get(crate::Feature::Lateral);
        // Hand geometry: agent's right is -y, so lateral_agent = 1.3 / range;
        // the speaker's right is +y, so lateral_speaker = -1.3 / range.
        let range = 0.4 * libm::hypot(10.0, 10.0);
        assert!((a - 1.3 / range).abs() < 1e-12);
        assert!((s + 1.3 / range).abs() < 1e-12);
        assert!((a + s).abs() < 1e-9);
    }

    #[test]
    fn advance_picks_nearest_then_exhausts() {
        let mut arena = one_station(vec![object(0, 3.0, 0.0)], 0.0).unwrap();
        let mut st = AgentState::new(&arena);
        assert_eq!(st.advance(&arena), Advance::Moved(0));
        assert_eq!(st.advance(&arena), Advance::Exhausted);
        assert_eq!(st.steps, 1);

        arena.stations = vec![
            Pose::new(3.0, 0.0, 0.0),
            Pose::new(2.0, 2.0, 0.0),
            Pose::new(0.0, 1.0, 0.0),
            Pose::new(-2.0, 0.0, 0.0),
            Pose::new(0.0, -3.0, 0.0),
            Pose::new(0.0, 1.0, 0.0),
        ];
        let mut st = AgentState::new(&arena);
        // Stations 2 and 5 are equidistant from the origin; 2 wins.
        assert_eq!(st.advance(&arena), Advance::Moved(2));
        assert_eq!(st.advance(&arena), Advance::Moved(5));
    }

    #[test]
    fn noise_is_deterministic_and_in_range() {
        let config = ArenaConfig { noise_sigma: 0.2, ..ArenaConfig::default() };
        let arena = build_arena(&config, 5).unwrap();
        let clean = build_arena(&ArenaConfig::default(), 5).unwrap();
        let a = arena.percept_at(0, Frame::Speaker).unwrap();
        assert_eq!(a, arena.percept_at(0, Frame::Speaker).unwrap());
        assert_ne!(a, clean.percept_at(0, Frame::Speaker).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut c = ArenaConfig::default();
        c.objects.clear();
        assert!(matches!(build_arena(&c, 0), Err(Error::Config(_))));
        let mut c = ArenaConfig::default();
        c.objects[0].albedo_range = [0.5, 1.5];
        assert!(matches!(build_arena(&c, 0), Err(Error::Config(_))));
        let c = ArenaConfig { noise_sigma: -1.0, ..ArenaConfig::default() };
        assert!(c.validate().is_err());
    }
}
