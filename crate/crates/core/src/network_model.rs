//! Two-tier geometry: a hexagonal macrocell with rings of co-channel
//! neighbours, a lattice of equal subregions that may each host one
//! femtocell, and the deterministic weights of the interference-to-signal
//! sums.
//!
//! The central hexagon has its vertices at angles 0, 60, ..., 300 degrees, so
//! neighbouring macro sites sit at 30 + 60k degrees.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lognormal_algebra::WeightedTerm;
use crate::ratio_approx::{RatioKind, SurrogateSet};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Point2 {
            x: radius * angle.cos(),
            y: radius * angle.sin(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    /// Outdoor (macro link) exponent.
    pub alpha: f64,
    /// Indoor (femto link) exponent.
    pub beta: f64,
    /// Loss per wall crossing, dB.
    pub wall_loss_db: f64,
}

impl PathLossParams {
    pub fn new(alpha: f64, beta: f64, wall_loss_db: f64) -> Result<Self> {
        if !(alpha > 2.0 && beta > 2.0 && wall_loss_db >= 0.0 && wall_loss_db.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "path loss needs alpha > 2, beta > 2, wall loss >= 0 dB; got ({alpha}, {beta}, {wall_loss_db})"
            )));
        }
        Ok(PathLossParams {
            alpha,
            beta,
            wall_loss_db,
        })
    }

    /// Linear gain of one wall, `10^(-W/10)`.
    pub fn wall_gain(&self) -> f64 {
        dbm_to_linear(-self.wall_loss_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProfile {
    pub macro_dbm: f64,
    pub femto_dbm: f64,
}

impl PowerProfile {
    pub fn new(macro_dbm: f64, femto_dbm: f64) -> Result<Self> {
        if !macro_dbm.is_finite() || !femto_dbm.is_finite() {
            return Err(Error::InvalidConfig("transmit powers must be finite".into()));
        }
        Ok(PowerProfile { macro_dbm, femto_dbm })
    }

    /// Whether the macro tier out-powers the femto tier, as in every
    /// deployment this model targets.
    pub fn is_conventional(&self) -> bool {
        self.macro_dbm > self.femto_dbm
    }

    pub fn macro_mw(&self) -> f64 {
        dbm_to_linear(self.macro_dbm)
    }

    pub fn femto_mw(&self) -> f64 {
        dbm_to_linear(self.femto_dbm)
    }
}

/// `10^(dbm / 10)` milliwatts.
pub fn dbm_to_linear(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub r_macro_m: f64,
    pub r_femto_m: f64,
    pub rings: u32,
    /// Macro sites; index 0 is the serving site at the origin.
    pub macro_positions: Vec<Point2>,
    pub area_m2: f64,
}

impl NetworkLayout {
    /// Apothem of the central hexagon.
    pub fn apothem(&self) -> f64 {
        0.5 * 3f64.sqrt() * self.r_macro_m
    }

    /// Whether `p` lies in the closed central hexagon.
    pub fn contains(&self, p: Point2) -> bool {
        let tol = 1e-9 * self.r_macro_m;
        hexagon_normals()
            .iter()
            .all(|n| n.x * p.x + n.y * p.y <= self.apothem() + tol)
    }

    pub fn interfering_macros(&self) -> &[Point2] {
        &self.macro_positions[1..]
    }
}

fn hexagon_normals() -> [Point2; 6] {
    std::array::from_fn(|k| Point2::polar(1.0, PI / 6.0 + k as f64 * PI / 3.0))
}

/// Hexagonal macro layout with `rings` (1 or 2) rings of interferers.
pub fn build_layout(r_macro_m: f64, rings: u32, r_femto_m: f64) -> Result<NetworkLayout> {
    if !(r_macro_m > 0.0 && r_macro_m.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "macrocell radius must be positive, got {r_macro_m}"
        )));
    }
    if !(r_femto_m > 0.0 && r_femto_m < r_macro_m) {
        return Err(Error::InvalidConfig(format!(
            "femtocell radius must lie in (0, {r_macro_m}), got {r_femto_m}"
        )));
    }
    if !(1..=2).contains(&rings) {
        return Err(Error::InvalidConfig(format!(
            "only 1 or 2 interfering rings are supported, got {rings}"
        )));
    }

    let spacing = 3f64.sqrt() * r_macro_m;
    let mut macro_positions = vec![Point2::ORIGIN];
    for k in 0..6 {
        macro_positions.push(Point2::polar(spacing, PI / 6.0 + k as f64 * PI / 3.0));
    }
    if rings == 2 {
        for k in 0..6 {
            macro_positions.push(Point2::polar(2.0 * spacing, PI / 6.0 + k as f64 * PI / 3.0));
            macro_positions.push(Point2::polar(3.0 * r_macro_m, k as f64 * PI / 3.0));
        }
    }

    Ok(NetworkLayout {
        r_macro_m,
        r_femto_m,
        rings,
        macro_positions,
        area_m2: 1.5 * 3f64.sqrt() * r_macro_m * r_macro_m,
    })
}

/// Femtocell occupancy lattice over the central hexagon.
#[derive(Debug, Clone, PartialEq)]
pub struct SubregionGrid {
    /// Representative point (clipped-cell centroid) of each subregion.
    pub centers: Vec<Point2>,
    /// Area attributed to each subregion; slivers too small to be a
    /// subregion of their own are merged into their nearest neighbour.
    pub areas: Vec<f64>,
    pub cell_side_m: f64,
    pub p_occupancy: f64,
    /// Femtocells per m^2.
    pub intensity: f64,
    pub area_m2: f64,
}

impl SubregionGrid {
    pub fn n_subregions(&self) -> usize {
        self.centers.len()
    }

    /// Same partition with another femtocell intensity.
    pub fn with_intensity(&self, intensity: f64) -> Result<Self> {
        let p = occupancy_probability(intensity, self.area_m2, self.n_subregions())?;
        Ok(SubregionGrid {
            p_occupancy: p,
            intensity,
            ..self.clone()
        })
    }

    /// Mean number of femtocells in the macrocell.
    pub fn expected_femtocells(&self) -> f64 {
        self.intensity * self.area_m2
    }

    /// Subregion hosting a femtocell centred at `p`.
    pub fn nearest(&self, p: Point2) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = c.distance(p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

fn occupancy_probability(intensity: f64, area: f64, n: usize) -> Result<f64> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "femtocell intensity must be non-negative, got {intensity}"
        )));
    }
    let p = intensity * area / n as f64;
    if p >= 1.0 {
        return Err(Error::IntensityTooHigh { p });
    }
    Ok(p)
}

/// Partitions the central hexagon into `n_subregions` near-equal cells.
///
/// A square lattice (cells centred off the origin by half a side) is clipped
/// to the hexagon; clipped cells holding at least half a full square are kept
/// and the remaining slivers are merged into the nearest kept cell. The side
/// is scanned around `sqrt(|H| / N)` for the lattice with the fewest kept
/// cells not below `N`; any surplus is removed by merging the smallest cells
/// into their neighbours.
pub fn build_subregion_grid(layout: &NetworkLayout, n_subregions: usize, intensity: f64) -> Result<SubregionGrid> {
    if n_subregions == 0 {
        return Err(Error::InvalidConfig("need at least one subregion".into()));
    }
    let area = layout.area_m2;

    let (centers, areas, side) = if n_subregions == 1 {
        (vec![Point2::ORIGIN], vec![area], area.sqrt())
    } else {
        let nominal = (area / n_subregions as f64).sqrt();
        let mut best: Option<(usize, f64, f64)> = None;
        for t in 0..=2_000 {
            let side = nominal * (0.7 + 0.45 * t as f64 / 2_000.0);
            let count = lattice_cells(layout, side).kept.len();
            if count < n_subregions {
                continue;
            }
            let score = (count - n_subregions, (side - nominal).abs());
            if best.is_none_or(|(c, d, _)| score < (c, d)) {
                best = Some((score.0, score.1, side));
            }
        }
        let side = best
            .map(|b| b.2)
            .ok_or_else(|| Error::InvalidConfig(format!("cannot partition the cell into {n_subregions} subregions")))?;
        let mut cells = lattice_cells(layout, side);
        merge_smallest(&mut cells, n_subregions);
        (cells.kept, cells.areas, side)
    };

    let p = occupancy_probability(intensity, area, centers.len())?;
    Ok(SubregionGrid {
        centers,
        areas,
        cell_side_m: side,
        p_occupancy: p,
        intensity,
        area_m2: area,
    })
}

struct LatticeCells {
    kept: Vec<Point2>,
    areas: Vec<f64>,
}

fn lattice_cells(layout: &NetworkLayout, side: f64) -> LatticeCells {
    let r = layout.r_macro_m;
    let half_span = (r / side).ceil() as i64 + 1;
    let mut kept = Vec::new();
    let mut areas = Vec::new();
    let mut slivers = Vec::new();
    for i in -half_span..half_span {
        for j in -half_span..half_span {
            let cx = (i as f64 + 0.5) * side;
            let cy = (j as f64 + 0.5) * side;
            let poly = clip_square(layout, cx, cy, side);
            if poly.len() < 3 {
                continue;
            }
            let (a, c) = area_centroid(&poly);
            if a <= 0.0 {
                continue;
            }
            if a >= 0.5 * side * side {
                kept.push(c);
                areas.push(a);
            } else {
                slivers.push((a, c));
            }
        }
    }
    for (a, c) in slivers {
        if kept.is_empty() {
            break;
        }
        let idx = nearest_index(&kept, c);
        areas[idx] += a;
    }
    LatticeCells { kept, areas }
}

/// Folds the smallest cell into its nearest neighbour (area-weighted
/// centroid) until `target` cells remain.
fn merge_smallest(cells: &mut LatticeCells, target: usize) {
    while cells.kept.len() > target {
        let small = (0..cells.areas.len())
            .min_by(|&a, &b| cells.areas[a].total_cmp(&cells.areas[b]).then(a.cmp(&b)))
            .expect("non-empty");
        let (c, a) = (cells.kept.remove(small), cells.areas.remove(small));
        let idx = nearest_index(&cells.kept, c);
        let (k, ka) = (cells.kept[idx], cells.areas[idx]);
        let total = a + ka;
        cells.kept[idx] = Point2::new((k.x * ka + c.x * a) / total, (k.y * ka + c.y * a) / total);
        cells.areas[idx] = total;
    }
}

fn nearest_index(points: &[Point2], p: Point2) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, q) in points.iter().enumerate() {
        let d = q.distance(p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

// Sutherland-Hodgman against the six half-planes of the hexagon.
fn clip_square(layout: &NetworkLayout, cx: f64, cy: f64, side: f64) -> Vec<Point2> {
    let h = 0.5 * side;
    let mut poly = vec![
        Point2::new(cx - h, cy - h),
        Point2::new(cx + h, cy - h),
        Point2::new(cx + h, cy + h),
        Point2::new(cx - h, cy + h),
    ];
    let apothem = layout.apothem();
    for n in hexagon_normals() {
        if poly.is_empty() {
            break;
        }
        let dist = |p: &Point2| n.x * p.x + n.y * p.y - apothem;
        let mut out = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let a = poly[k];
            let b = poly[(k + 1) % poly.len()];
            let (da, db) = (dist(&a), dist(&b));
            if da <= 0.0 {
                out.push(a);
            }
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                let t = da / (da - db);
                out.push(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
            }
        }
        poly = out;
    }
    poly
}

fn area_centroid(poly: &[Point2]) -> (f64, Point2) {
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    if a2.abs() < f64::MIN_POSITIVE {
        return (0.0, Point2::ORIGIN);
    }
    (0.5 * a2.abs(), Point2::new(cx / (3.0 * a2), cy / (3.0 * a2)))
}

/// One draw of the Bernoulli occupancy vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FemtoConfiguration {
    pub occupied: Vec<bool>,
}

impl FemtoConfiguration {
    pub fn empty(n: usize) -> Self {
        FemtoConfiguration {
            occupied: vec![false; n],
        }
    }

    /// Bit `i` of `mask` becomes subregion `i`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        FemtoConfiguration {
            occupied: (0..n).map(|i| (mask >> i) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn count_occupied(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    pub fn occupied_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupied.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Each subregion independently hosts a femtocell with probability `p`.
pub fn sample_configuration<R: Rng + ?Sized>(grid: &SubregionGrid, rng: &mut R) -> FemtoConfiguration {
    let p = grid.p_occupancy;
    FemtoConfiguration {
        occupied: (0..grid.n_subregions()).map(|_| rng.random::<f64>() < p).collect(),
    }
}

/// `p^k (1 - p)^(N - k)`, evaluated in log space.
pub fn configuration_probability(grid: &SubregionGrid, config: &FemtoConfiguration) -> Result<f64> {
    let n = grid.n_subregions();
    if config.len() != n {
        return Err(Error::InvalidConfig(format!(
            "configuration has {} bits, grid has {n} subregions",
            config.len()
        )));
    }
    let k = config.count_occupied();
    let p = grid.p_occupancy;
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let log_prob = k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p();
    Ok(log_prob.exp())
}

/// Everything geometric and radio-related about one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layout: NetworkLayout,
    pub grid: SubregionGrid,
    pub powers: PowerProfile,
    pub pathloss: PathLossParams,
}

impl Network {
    pub fn new(
        layout: NetworkLayout,
        n_subregions: usize,
        intensity: f64,
        powers: PowerProfile,
        pathloss: PathLossParams,
    ) -> Result<Self> {
        let grid = build_subregion_grid(&layout, n_subregions, intensity)?;
        Ok(Network {
            layout,
            grid,
            powers,
            pathloss,
        })
    }

    pub fn with_intensity(&self, intensity: f64) -> Result<Self> {
        Ok(Network {
            grid: self.grid.with_intensity(intensity)?,
            ..self.clone()
        })
    }

    /// Where a femto user served by an FBS at `femto_center` is evaluated:
    /// on the cell edge, on the segment from the FBS toward the serving
    /// macro site.
    pub fn femto_user_position(&self, femto_center: Point2) -> Point2 {
        let d = femto_center.norm();
        let (ux, uy) = if d > 0.0 {
            (femto_center.x / d, femto_center.y / d)
        } else {
            (1.0, 0.0)
        };
        let rf = self.layout.r_femto_m;
        Point2::new(femto_center.x - rf * ux, femto_center.y - rf * uy)
    }
}

fn checked_distance(a: Point2, b: Point2, what: &str) -> Result<f64> {
    let d = a.distance(b);
    if d <= 0.0 {
        return Err(Error::Geometry(format!(
            "user at ({:.3}, {:.3}) is collocated with {what}",
            a.x, a.y
        )));
    }
    Ok(d)
}

/// Interference-to-signal terms for a macro user at `r`.
///
/// Neighbouring macro sites give `P_j D_j^-alpha / (P_0 |r|^-alpha)` with kind
/// `psi/psi0`; every occupied subregion gives
/// `W P_f D_i^-beta / (P_0 |r|^-alpha)` with kind `phi/psi0`.
pub fn mue_weighted_terms(
    net: &Network,
    surrogates: &SurrogateSet,
    r: Point2,
    config: &FemtoConfiguration,
) -> Result<Vec<WeightedTerm>> {
    if !net.layout.contains(r) {
        return Err(Error::Geometry(format!(
            "macro user ({:.3}, {:.3}) is outside the central cell",
            r.x, r.y
        )));
    }
    check_config(net, config)?;
    let signal_distance = checked_distance(r, Point2::ORIGIN, "the serving macro site")?;
    let alpha = net.pathloss.alpha;
    let beta = net.pathloss.beta;
    let p0 = net.powers.macro_mw();
    let signal = p0 * signal_distance.powf(-alpha);

    let mut terms = Vec::with_capacity(net.layout.macro_positions.len() - 1 + config.count_occupied());
    let macro_ratio = surrogates.get(RatioKind::RayleighOverRayleigh);
    for &m in net.layout.interfering_macros() {
        let d = checked_distance(r, m, "a macro site")?;
        terms.push(WeightedTerm::new(
            p0 * d.powf(-alpha) / signal,
            RatioKind::RayleighOverRayleigh,
            macro_ratio,
        )?);
    }
    let femto_ratio = surrogates.get(RatioKind::LogNormalOverRayleigh);
    let femto = net.pathloss.wall_gain() * net.powers.femto_mw();
    for i in config.occupied_indices() {
        let d = checked_distance(r, net.grid.centers[i], "a femtocell")?;
        terms.push(WeightedTerm::new(
            femto * d.powf(-beta) / signal,
            RatioKind::LogNormalOverRayleigh,
            femto_ratio,
        )?);
    }
    Ok(terms)
}

/// Interference-to-signal terms for the femto user of the FBS at
/// `femto_center`, placed by [`Network::femto_user_position`].
///
/// Every macro site, the serving one included, gives
/// `W P_j D_j^-alpha / (P_f R_f^-beta)` with kind `psi/phi0`; every other
/// occupied subregion gives `W^2 P_f D_i^-beta / (P_f R_f^-beta)` with kind
/// `phi/phi0`. The subregion hosting the serving FBS never interferes.
pub fn fue_weighted_terms(
    net: &Network,
    surrogates: &SurrogateSet,
    femto_center: Point2,
    config: &FemtoConfiguration,
) -> Result<Vec<WeightedTerm>> {
    if !net.layout.contains(femto_center) {
        return Err(Error::Geometry(format!(
            "femtocell ({:.3}, {:.3}) is outside the central cell",
            femto_center.x, femto_center.y
        )));
    }
    check_config(net, config)?;
    let user = net.femto_user_position(femto_center);
    let serving = net.grid.nearest(femto_center);
    let alpha = net.pathloss.alpha;
    let beta = net.pathloss.beta;
    let wall = net.pathloss.wall_gain();
    let pf = net.powers.femto_mw();
    let signal = pf * net.layout.r_femto_m.powf(-beta);

    let mut terms = Vec::with_capacity(net.layout.macro_positions.len() + config.count_occupied());
    let macro_ratio = surrogates.get(RatioKind::RayleighOverLogNormal);
    let pm = net.powers.macro_mw();
    for &m in &net.layout.macro_positions {
        let d = checked_distance(user, m, "a macro site")?;
        terms.push(WeightedTerm::new(
            wall * pm * d.powf(-alpha) / signal,
            RatioKind::RayleighOverLogNormal,
            macro_ratio,
        )?);
    }
    let femto_ratio = surrogates.get(RatioKind::LogNormalOverLogNormal);
    for i in config.occupied_indices().filter(|&i| i != serving) {
        let d = checked_distance(user, net.grid.centers[i], "a femtocell")?;
        terms.push(WeightedTerm::new(
            wall * wall * pf * d.powf(-beta) / signal,
            RatioKind::LogNormalOverLogNormal,
            femto_ratio,
        )?);
    }
    Ok(terms)
}

fn check_config(net: &Network, config: &FemtoConfiguration) -> Result<()> {
    if config.len() != net.grid.n_subregions() {
        return Err(Error::InvalidConfig(format!(
            "configuration has {} bits, grid has {} subregions",
            config.len(),
            net.grid.n_subregions()
        )));
    }
    Ok(())
}
