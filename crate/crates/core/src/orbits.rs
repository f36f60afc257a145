//! Energy surfaces, primitive periodic orbits and their classical data.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{flow_to, return_time};
use crate::quadrature::{brent, GaussLegendre};
use crate::symbols::FourierSymbol;
use crate::torus::{unwrap_step, wrap, LiftedPoint, TorusGeometry};

/// Smallest accepted marching-squares resolution.
pub const MIN_GRID_RES: usize = 64;
/// Fewest contour vertices for a loop to count as resolved.
const MIN_LOOP_POINTS: usize = 6;

/// Level-set extraction settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitOptions {
    pub grid_res: usize,
    /// Regularity threshold as a fraction of [`FourierSymbol::gradient_scale`].
    pub grad_threshold_rel: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { grid_res: 256, grad_threshold_rel: 1e-3 }
    }
}

impl OrbitOptions {
    pub fn with_grid(grid_res: usize) -> Self {
        Self { grid_res, ..Self::default() }
    }

    pub fn threshold(&self, symbol: &FourierSymbol) -> f64 {
        self.grad_threshold_rel * symbol.gradient_scale()
    }
}

fn gl10() -> &'static GaussLegendre {
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(10))
}

fn grad_norm(h: &FourierSymbol, x: f64, xi: f64) -> f64 {
    let (gx, gxi) = h.gradient(x, xi);
    gx.hypot(gxi)
}

/// Signed difference reduced to `(-p/2, p/2]`.
fn periodic_diff(d: f64, p: f64) -> f64 {
    let r = wrap(d + 0.5 * p, p) - 0.5 * p;
    if r == -0.5 * p {
        0.5 * p
    } else {
        r
    }
}

/// Distance on the torus between two projected points.
pub fn torus_distance(geom: &TorusGeometry, a: (f64, f64), b: (f64, f64)) -> f64 {
    periodic_diff(a.0 - b.0, geom.ell_x()).hypot(periodic_diff(a.1 - b.1, geom.ell_xi()))
}

/// Closed contour on the torus: lifted vertices of one traversal (the closing vertex,
/// `points[0]` shifted by the winding, is implied).
#[derive(Clone, Debug)]
pub struct Contour {
    pub points: Vec<LiftedPoint>,
    pub winding: (i64, i64),
}

impl Contour {
    fn shift(&self, geom: &TorusGeometry) -> (f64, f64) {
        (self.winding.0 as f64 * geom.ell_x(), self.winding.1 as f64 * geom.ell_xi())
    }

    /// Vertices with the closing vertex appended.
    fn closed(&self, geom: &TorusGeometry) -> Vec<(f64, f64)> {
        let (sx, sxi) = self.shift(geom);
        let mut v: Vec<(f64, f64)> = self.points.iter().map(|p| (p.x, p.xi)).collect();
        v.push((self.points[0].x + sx, self.points[0].xi + sxi));
        v
    }
}

struct Extraction {
    contours: Vec<Contour>,
    min_grad: f64,
}

type EdgeKey = (u8, usize, usize);

fn extract(symbol: &FourierSymbol, e: f64, grid_res: usize) -> Result<Extraction> {
    if grid_res < MIN_GRID_RES {
        return Err(Error::Resolution(format!("grid_res {grid_res} below {MIN_GRID_RES}")));
    }
    let geom = *symbol.geom();
    let g = grid_res;
    let (lx, lxi) = (geom.ell_x(), geom.ell_xi());
    let node = |i: usize, j: usize| (lx * i as f64 / g as f64, lxi * j as f64 / g as f64);
    let vals: Vec<f64> = (0..g * g)
        .map(|k| {
            let (x, xi) = node(k / g, k % g);
            symbol.eval(x, xi) - e
        })
        .collect();
    let v = |i: usize, j: usize| vals[(i % g) * g + (j % g)];
    let pos = |i: usize, j: usize| v(i, j) >= 0.0;

    // crossing point of each sign-changing edge, refined on the edge line
    let mut crossing: BTreeMap<EdgeKey, (f64, f64)> = BTreeMap::new();
    for i in 0..g {
        for j in 0..g {
            for dir in 0..2u8 {
                let (i2, j2) = if dir == 0 { (i + 1, j) } else { (i, j + 1) };
                if pos(i, j) == pos(i2, j2) {
                    continue;
                }
                let a = node(i, j);
                let b = node(i2, j2);
                let at = |lam: f64| (a.0 + lam * (b.0 - a.0), a.1 + lam * (b.1 - a.1));
                let lam = brent(|l| { let p = at(l); symbol.eval(p.0, p.1) - e }, 0.0, 1.0, 1e-16)
                    .expect("sign change on edge");
                let p = at(lam);
                crossing.insert((dir, i, j), geom.project(p.0, p.1));
            }
        }
    }
    if crossing.is_empty() {
        return Ok(Extraction { contours: Vec::new(), min_grad: f64::INFINITY });
    }

    // cell links; each crossing edge is shared by two cells and gets one link from each
    let mut adj: BTreeMap<EdgeKey, Vec<(EdgeKey, usize)>> = BTreeMap::new();
    let mut n_links = 0usize;
    let mut link = |a: EdgeKey, b: EdgeKey, adj: &mut BTreeMap<EdgeKey, Vec<(EdgeKey, usize)>>| {
        adj.entry(a).or_default().push((b, n_links));
        adj.entry(b).or_default().push((a, n_links));
        n_links += 1;
    };
    for i in 0..g {
        for j in 0..g {
            let (ip, jp) = ((i + 1) % g, (j + 1) % g);
            let edges: [EdgeKey; 4] = [(0, i, j), (1, ip, j), (0, i, jp), (1, i, j)];
            let hits: Vec<EdgeKey> = edges.iter().copied().filter(|k| crossing.contains_key(k)).collect();
            match hits.len() {
                0 => {}
                2 => link(hits[0], hits[1], &mut adj),
                4 => {
                    let (cx, cxi) = (lx * (i as f64 + 0.5) / g as f64, lxi * (j as f64 + 0.5) / g as f64);
                    let centre_pos = symbol.eval(cx, cxi) - e >= 0.0;
                    if centre_pos == pos(i, j) {
                        link(edges[0], edges[1], &mut adj);
                        link(edges[2], edges[3], &mut adj);
                    } else {
                        link(edges[3], edges[0], &mut adj);
                        link(edges[1], edges[2], &mut adj);
                    }
                }
                k => {
                    return Err(Error::Topology(format!("cell ({i},{j}) has {k} crossing edges")));
                }
            }
        }
    }
    for (k, nb) in &adj {
        if nb.len() != 2 {
            return Err(Error::Topology(format!("contour vertex {k:?} has degree {}", nb.len())));
        }
    }

    let mut visited: BTreeMap<EdgeKey, bool> = adj.keys().map(|k| (*k, false)).collect();
    let mut contours = Vec::new();
    let keys: Vec<EdgeKey> = adj.keys().copied().collect();
    for start in keys {
        if visited[&start] {
            continue;
        }
        let mut order = vec![start];
        visited.insert(start, true);
        let (mut cur, mut via) = (start, adj[&start][0].1);
        let mut next = adj[&start][0].0;
        while next != start {
            if visited[&next] {
                return Err(Error::Topology("open chain after assembly".into()));
            }
            visited.insert(next, true);
            order.push(next);
            let nb = &adj[&next];
            let (n2, l2) = if nb[0].1 == via { nb[1] } else { nb[0] };
            cur = next;
            via = l2;
            next = n2;
        }
        let _ = cur;
        let projected: Vec<(f64, f64)> = order.iter().map(|k| crossing[k]).collect();
        contours.push(lift_loop(&projected, &geom)?);
    }

    let mut min_grad = f64::INFINITY;
    for c in &contours {
        min_grad = min_grad.min(contour_min_grad(symbol, e, c));
    }
    // orient along the flow
    let contours = contours
        .into_iter()
        .map(|c| orient(symbol, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Extraction { contours, min_grad })
}

fn lift_loop(projected: &[(f64, f64)], geom: &TorusGeometry) -> Result<Contour> {
    let first = LiftedPoint::from_projected(projected[0].0, projected[0].1, geom);
    let mut pts = vec![first];
    for &p in &projected[1..] {
        let prev = *pts.last().unwrap();
        pts.push(unwrap_step(&prev, p, geom)?);
    }
    let close = unwrap_step(pts.last().unwrap(), projected[0], geom)?;
    let winding = (
        ((close.x - first.x) / geom.ell_x()).round() as i64,
        ((close.xi - first.xi) / geom.ell_xi()).round() as i64,
    );
    Ok(Contour { points: pts, winding })
}

fn orient(symbol: &FourierSymbol, c: Contour) -> Result<Contour> {
    let geom = *symbol.geom();
    let v = c.closed(&geom);
    let mut s = 0.0;
    for w in v.windows(2) {
        let m = (0.5 * (w[0].0 + w[1].0), 0.5 * (w[0].1 + w[1].1));
        let (gx, gxi) = symbol.gradient(m.0, m.1);
        s += (w[1].0 - w[0].0) * gxi - (w[1].1 - w[0].1) * gx;
    }
    if s >= 0.0 {
        return Ok(c);
    }
    let mut projected: Vec<(f64, f64)> = c.points.iter().map(|p| p.project(&geom)).collect();
    projected.reverse();
    lift_loop(&projected, &geom)
}

/// Newton projection onto `H = e` along the gradient.
fn project_to_level(symbol: &FourierSymbol, e: f64, mut p: (f64, f64)) -> (f64, f64) {
    for _ in 0..8 {
        let r = symbol.eval(p.0, p.1) - e;
        let (gx, gxi) = symbol.gradient(p.0, p.1);
        let g2 = gx * gx + gxi * gxi;
        if g2 == 0.0 {
            break;
        }
        p = (p.0 - r * gx / g2, p.1 - r * gxi / g2);
        if r.abs() < 1e-15 * symbol.value_scale().max(1.0) {
            break;
        }
    }
    p
}

/// Minimum of `|grad H|` along the contour, refined by golden-section search on the
/// segments next to each vertex minimum.
fn contour_min_grad(symbol: &FourierSymbol, e: f64, c: &Contour) -> f64 {
    let geom = *symbol.geom();
    let v = c.closed(&geom);
    let n = v.len() - 1;
    let g: Vec<f64> = v[..n].iter().map(|p| grad_norm(symbol, p.0, p.1)).collect();
    let mut best = g.iter().copied().fold(f64::INFINITY, f64::min);
    let on_segment = |a: (f64, f64), b: (f64, f64), lam: f64| {
        let p = project_to_level(symbol, e, (a.0 + lam * (b.0 - a.0), a.1 + lam * (b.1 - a.1)));
        grad_norm(symbol, p.0, p.1)
    };
    for k in 0..n {
        let (gp, gn) = (g[(k + n - 1) % n], g[(k + 1) % n]);
        if g[k] > gp || g[k] > gn {
            continue;
        }
        for (a, b) in [(v[(k + n - 1) % n], v[k]), (v[k], v[k + 1])] {
            // consecutive vertices may straddle the seam; re-lift b next to a
            let b = (a.0 + periodic_diff(b.0 - a.0, geom.ell_x()), a.1 + periodic_diff(b.1 - a.1, geom.ell_xi()));
            let (mut lo, mut hi) = (0.0, 1.0);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..40 {
                let c1 = hi - r * (hi - lo);
                let c2 = lo + r * (hi - lo);
                if on_segment(a, b, c1) < on_segment(a, b, c2) {
                    hi = c2;
                } else {
                    lo = c1;
                }
            }
            best = best.min(on_segment(a, b, 0.5 * (lo + hi)));
        }
    }
    best
}

/// Extracts `H^{-1}(e)` as oriented closed contours.
///
/// Errors with near-critical if `|grad H|` on the surface drops below the default threshold.
pub fn level_set(symbol: &FourierSymbol, e: f64, grid_res: usize) -> Result<Vec<Contour>> {
    let opts = OrbitOptions::with_grid(grid_res);
    let ex = extract(symbol, e, grid_res)?;
    let thr = opts.threshold(symbol);
    if ex.min_grad <= thr {
        return Err(Error::NearCritical { energy: e, grad_norm: ex.min_grad, threshold: thr });
    }
    Ok(ex.contours)
}

/// Outcome of [`regular_value_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// `None` for an empty level set.
    pub min_grad_norm: Option<f64>,
    pub empty: bool,
}

pub fn regular_value_check(symbol: &FourierSymbol, e: f64, grid_res: usize) -> Result<RegularityReport> {
    let opts = OrbitOptions::with_grid(grid_res);
    if symbol.gradient_scale() == 0.0 {
        return Ok(RegularityReport { regular: false, min_grad_norm: Some(0.0), empty: false });
    }
    let ex = match extract(symbol, e, grid_res) {
        Ok(ex) => ex,
        // a non-manifold level set is the generic symptom of a critical value
        Err(Error::Topology(_)) | Err(Error::AmbiguousLift { .. }) => {
            return Ok(RegularityReport { regular: false, min_grad_norm: None, empty: false })
        }
        Err(err) => return Err(err),
    };
    if ex.contours.is_empty() {
        return Ok(RegularityReport { regular: true, min_grad_norm: None, empty: true });
    }
    Ok(RegularityReport { regular: ex.min_grad > opts.threshold(symbol), min_grad_norm: Some(ex.min_grad), empty: false })
}

/// Time and `int xi dx` along the level curve between two lifted vertices on it.
///
/// The arc is parametrised as a graph over whichever coordinate changes more, with the other
/// coordinate recovered by Newton iteration at each Gauss–Legendre node.
fn segment_integrals(symbol: &FourierSymbol, e: f64, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let gl = gl10();
    let tol = 1e-15 * symbol.value_scale().max(1.0);
    let (dx, dxi) = (b.0 - a.0, b.1 - a.1);
    if dx == 0.0 && dxi == 0.0 {
        return (0.0, 0.0);
    }
    let mut t = 0.0;
    let mut act = 0.0;
    if dx.abs() >= dxi.abs() {
        for (&u, &w) in gl.nodes.iter().zip(&gl.weights) {
            let lam = 0.5 * (u + 1.0);
            let x = a.0 + lam * dx;
            let mut xi = a.1 + lam * dxi;
            for _ in 0..50 {
                let r = symbol.eval(x, xi) - e;
                let (_, gxi) = symbol.gradient(x, xi);
                let step = r / gxi;
                xi -= step;
                if r.abs() < tol || step.abs() < 1e-16 * (1.0 + xi.abs()) {
                    break;
                }
            }
            let (_, gxi) = symbol.gradient(x, xi);
            let wt = 0.5 * w * dx;
            t += wt / gxi;
            act += wt * xi;
        }
    } else {
        for (&u, &w) in gl.nodes.iter().zip(&gl.weights) {
            let lam = 0.5 * (u + 1.0);
            let xi = a.1 + lam * dxi;
            let mut x = a.0 + lam * dx;
            for _ in 0..50 {
                let r = symbol.eval(x, xi) - e;
                let (gx, _) = symbol.gradient(x, xi);
                let step = r / gx;
                x -= step;
                if r.abs() < tol || step.abs() < 1e-16 * (1.0 + x.abs()) {
                    break;
                }
            }
            let (gx, gxi) = symbol.gradient(x, xi);
            let wt = 0.5 * w * dxi;
            t -= wt / gx;
            act -= wt * xi * gxi / gx;
        }
    }
    (t, act)
}

/// Period and `oint xi dx` of a closed lifted vertex list.
fn loop_integrals(symbol: &FourierSymbol, e: f64, closed: &[(f64, f64)]) -> (f64, f64) {
    closed.windows(2).fold((0.0, 0.0), |(t, a), w| {
        let (dt, da) = segment_integrals(symbol, e, w[0], w[1]);
        (t + dt, a + da)
    })
}

/// Total turning of the phase velocity along the closed vertex list, in units of `2 pi`.
fn velocity_turns(symbol: &FourierSymbol, closed: &[(f64, f64)]) -> i64 {
    let ang = |p: (f64, f64)| {
        let (gx, gxi) = symbol.gradient(p.0, p.1);
        (-gx).atan2(gxi)
    };
    let mut total = 0.0;
    let mut prev = ang(closed[0]);
    for &p in &closed[1..] {
        let a = ang(p);
        total += periodic_diff(a - prev, 2.0 * PI);
        prev = a;
    }
    (total / (2.0 * PI)).round() as i64
}

/// A primitive periodic orbit: one connected component of the energy surface.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub energy: f64,
    pub period_primitive: f64,
    pub action_primitive: f64,
    pub winding: (i64, i64),
    pub maslov: i64,
    /// One primitive traversal in flow order; `samples[0] == start_point`.
    pub samples: Vec<LiftedPoint>,
    pub start_point: LiftedPoint,
}

impl PeriodicOrbit {
    fn from_contour(symbol: &FourierSymbol, e: f64, c: Contour) -> Result<Self> {
        let geom = *symbol.geom();
        if c.points.len() < MIN_LOOP_POINTS {
            return Err(Error::Resolution(format!(
                "contour at E = {e} has only {} vertices; increase grid_res",
                c.points.len()
            )));
        }
        let closed = c.closed(&geom);
        let (t, oint) = loop_integrals(symbol, e, &closed);
        let x_end = closed.last().unwrap().0;
        let action = oint - c.winding.1 as f64 * geom.ell_xi() * x_end;
        let maslov = 2 * velocity_turns(symbol, &closed);
        Ok(Self {
            energy: e,
            period_primitive: t,
            action_primitive: action,
            winding: c.winding,
            maslov,
            start_point: c.points[0],
            samples: c.points,
        })
    }

    fn shift(&self, geom: &TorusGeometry) -> (f64, f64) {
        (self.winding.0 as f64 * geom.ell_x(), self.winding.1 as f64 * geom.ell_xi())
    }

    /// Action recomputed with the traversal started at vertex `seed` (continuing the lift).
    pub fn action_from_seed(&self, symbol: &FourierSymbol, seed: usize) -> f64 {
        let geom = *symbol.geom();
        let (sx, sxi) = self.shift(&geom);
        let n = self.samples.len();
        let s = seed % n;
        let mut closed: Vec<(f64, f64)> = self.samples[s..].iter().map(|p| (p.x, p.xi)).collect();
        closed.extend(self.samples[..=s].iter().map(|p| (p.x + sx, p.xi + sxi)));
        let (_, oint) = loop_integrals(symbol, self.energy, &closed);
        oint - self.winding.1 as f64 * geom.ell_xi() * closed.last().unwrap().0
    }

    /// Independent period from direct integration of the flow until first return.
    pub fn ode_period(&self, symbol: &FourierSymbol, tol: f64) -> Result<f64> {
        let s = self.shift(symbol.geom());
        return_time(symbol, (self.start_point.x, self.start_point.xi), s, self.period_primitive, tol)
    }

    /// Torus distance between the start point and its image after one period of the flow.
    pub fn closure_error(&self, symbol: &FourierSymbol, tol: f64) -> Result<f64> {
        let geom = *symbol.geom();
        let (x, xi) = flow_to(symbol, (self.start_point.x, self.start_point.xi), self.period_primitive, tol)?;
        Ok(torus_distance(&geom, geom.project(x, xi), self.start_point.project(&geom)))
    }

    /// Smallest torus distance from `p` to a sample of this orbit.
    pub fn distance_to(&self, geom: &TorusGeometry, p: (f64, f64)) -> f64 {
        self.samples
            .iter()
            .map(|s| torus_distance(geom, s.project(geom), p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Data of the `k`-th repetition of a primitive orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Repetition {
    pub k: i64,
    pub period: f64,
    pub action: f64,
    pub maslov: i64,
}

/// `t_p = k t_p#`, `W_p = k W_p#`, `sigma_p = k sigma_p#`.
pub fn repetition(orbit: &PeriodicOrbit, k: i64) -> Repetition {
    Repetition {
        k,
        period: k as f64 * orbit.period_primitive,
        action: k as f64 * orbit.action_primitive,
        maslov: k * orbit.maslov,
    }
}

/// All primitive periodic orbits at one energy.
#[derive(Clone, Debug)]
pub struct OrbitCatalog {
    pub energy: f64,
    pub orbits: Vec<PeriodicOrbit>,
    pub volume: f64,
    pub regular: bool,
    pub min_grad_norm: f64,
    pub geom: TorusGeometry,
}

impl OrbitCatalog {
    pub fn min_period(&self) -> Option<f64> {
        self.orbits.iter().map(|o| o.period_primitive).reduce(f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct OrbitOut {
            period: f64,
            action: f64,
            winding: [i64; 2],
            maslov: i64,
            n_samples: usize,
        }
        #[derive(Serialize)]
        struct Out {
            energy: f64,
            volume: f64,
            regular: bool,
            min_grad_norm: Option<f64>,
            orbits: Vec<OrbitOut>,
        }
        let out = Out {
            energy: self.energy,
            volume: self.volume,
            regular: self.regular,
            min_grad_norm: self.min_grad_norm.is_finite().then_some(self.min_grad_norm),
            orbits: self
                .orbits
                .iter()
                .map(|o| OrbitOut {
                    period: o.period_primitive,
                    action: o.action_primitive,
                    winding: [o.winding.0, o.winding.1],
                    maslov: o.maslov,
                    n_samples: o.samples.len(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&out)?)
    }
}

/// Catalog with default options at the given grid resolution.
pub fn orbit_catalog(symbol: &FourierSymbol, e: f64, grid_res: usize) -> Result<OrbitCatalog> {
    orbit_catalog_with(symbol, e, &OrbitOptions::with_grid(grid_res))
}

pub fn orbit_catalog_with(symbol: &FourierSymbol, e: f64, opts: &OrbitOptions) -> Result<OrbitCatalog> {
    if symbol.gradient_scale() == 0.0 {
        return Err(Error::Regularity { energy: e, reason: "symbol is constant; no regular values".into() });
    }
    let ex = extract(symbol, e, opts.grid_res)?;
    let thr = opts.threshold(symbol);
    if ex.min_grad <= thr {
        return Err(Error::NearCritical { energy: e, grad_norm: ex.min_grad, threshold: thr });
    }
    let orbits = ex
        .contours
        .into_iter()
        .map(|c| PeriodicOrbit::from_contour(symbol, e, c))
        .collect::<Result<Vec<_>>>()?;
    let volume = orbits.iter().map(|o| o.period_primitive).sum();
    Ok(OrbitCatalog { energy: e, orbits, volume, regular: true, min_grad_norm: ex.min_grad, geom: *symbol.geom() })
}

/// Index of the orbit in `candidates` with the same winding that passes closest to `target`'s
/// start point.
pub fn match_orbit(geom: &TorusGeometry, candidates: &[PeriodicOrbit], target: &PeriodicOrbit) -> Option<usize> {
    let p = target.start_point.project(geom);
    candidates
        .iter()
        .enumerate()
        .filter(|(_, o)| o.winding == target.winding)
        .map(|(i, o)| (i, o.distance_to(geom, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// Action difference reduced modulo the cell area `l_x l_xi` (relifts change `W` by multiples).
pub fn action_difference(geom: &TorusGeometry, w1: f64, w0: f64) -> f64 {
    periodic_diff(w1 - w0, geom.ell_x() * geom.ell_xi())
}

/// Per-orbit result of [`action_derivative_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ActionDerivative {
    pub d_w_d_e: f64,
    pub period: f64,
    /// Relative deviation `|dW/dE - t| / t`.
    pub deviation: f64,
}

/// Central difference of `W(E)` against the period, orbit by orbit.
pub fn action_derivative_check(symbol: &FourierSymbol, e: f64, de: f64, grid_res: usize) -> Result<Vec<ActionDerivative>> {
    let geom = *symbol.geom();
    let c0 = orbit_catalog(symbol, e, grid_res)?;
    let cm = orbit_catalog(symbol, e - de, grid_res)?;
    let cp = orbit_catalog(symbol, e + de, grid_res)?;
    let sig = |c: &OrbitCatalog| {
        let mut w: Vec<(i64, i64)> = c.orbits.iter().map(|o| o.winding).collect();
        w.sort();
        w
    };
    if sig(&c0) != sig(&cm) || sig(&c0) != sig(&cp) {
        return Err(Error::Topology(format!("orbit topology changes within [{}, {}]", e - de, e + de)));
    }
    let mut out = Vec::new();
    for o in &c0.orbits {
        let im = match_orbit(&geom, &cm.orbits, o).ok_or_else(|| Error::Topology("unmatched orbit".into()))?;
        let ip = match_orbit(&geom, &cp.orbits, o).ok_or_else(|| Error::Topology("unmatched orbit".into()))?;
        let dw = action_difference(&geom, cp.orbits[ip].action_primitive, cm.orbits[im].action_primitive);
        let d = dw / (2.0 * de);
        let t = o.period_primitive;
        out.push(ActionDerivative { d_w_d_e: d, period: t, deviation: (d - t).abs() / t });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{cos_potential, harper, kinetic_cos};
    use approx::assert_relative_eq;

    fn square() -> TorusGeometry {
        TorusGeometry::square(8).unwrap()
    }

    #[test]
    fn harper_single_contractible_loop() {
        let h = harper(square());
        let loops = level_set(&h, 1.0, 128).unwrap();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].winding, (0, 0));
        for p in &loops[0].points {
            assert!((h.eval(p.x, p.xi) - 1.0).abs() < 1e-12);
        }
        // encircles the maximum at the origin
        assert!(loops[0].points.iter().all(|p| torus_distance(&square(), p.project(&square()), (0.0, 0.0)) < 2.0));
    }

    #[test]
    fn potential_loops_are_vertical() {
        let v = cos_potential(square());
        let loops = level_set(&v, 0.0, 128).unwrap();
        assert_eq!(loops.len(), 2);
        let mut xs: Vec<f64> = loops.iter().map(|c| c.points[0].project(&square()).0).collect();
        xs.sort_by(f64::total_cmp);
        assert_relative_eq!(xs[0], PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(xs[1], 1.5 * PI, epsilon = 1e-12);
        let mut w: Vec<_> = loops.iter().map(|c| c.winding).collect();
        w.sort();
        assert_eq!(w, vec![(0, -1), (0, 1)]);
    }

    #[test]
    fn kinetic_loops_are_horizontal() {
        let k = kinetic_cos(square());
        let loops = level_set(&k, 2.0, 128).unwrap();
        assert_eq!(loops.len(), 2);
        let mut w: Vec<_> = loops.iter().map(|c| c.winding).collect();
        w.sort();
        assert_eq!(w, vec![(-1, 0), (1, 0)]);
        for c in &loops {
            let xi = c.points[0].project(&square()).1;
            assert!((xi - PI / 2.0).abs() < 1e-12 || (xi - 1.5 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn potential_orbit_data() {
        let g = square();
        let v = cos_potential(g);
        let cat = orbit_catalog(&v, 0.3, 128).unwrap();
        assert_eq!(cat.orbits.len(), 2);
        let x_a = 0.3f64.acos();
        for o in &cat.orbits {
            let x0 = o.start_point.x;
            let hp = -x0.sin();
            assert_relative_eq!(o.period_primitive, 2.0 * PI / hp.abs(), max_relative = 1e-12);
            // W = -w_xi l_xi x0; the flow moves xi at rate -H'(x0)
            assert_eq!(o.winding.1, -(hp.signum() as i64));
            assert_relative_eq!(o.action_primitive, -(o.winding.1 as f64) * 2.0 * PI * x0, max_relative = 1e-12);
            assert_eq!(o.maslov, 0);
            assert!((x0 - x_a).abs() < 1e-12 || (x0 - (2.0 * PI - x_a)).abs() < 1e-12);
        }
    }

    #[test]
    fn harper_maslov_by_energy_sign() {
        let h = harper(square());
        let up = orbit_catalog(&h, 1.0, 128).unwrap();
        assert_eq!(up.orbits[0].maslov, 2);
        let down = orbit_catalog(&h, -1.0, 128).unwrap();
        assert_eq!(down.orbits[0].maslov, -2);
        assert_relative_eq!(up.orbits[0].period_primitive, down.orbits[0].period_primitive, max_relative = 1e-10);
        let k = kinetic_cos(square());
        assert!(orbit_catalog(&k, 2.0, 128).unwrap().orbits.iter().all(|o| o.maslov == 0));
    }

    #[test]
    fn regularity() {
        let h = harper(square());
        assert!(!regular_value_check(&h, 0.0, 128).unwrap().regular);
        let r = regular_value_check(&h, 1.0, 128).unwrap();
        assert!(r.regular && r.min_grad_norm.unwrap() > 0.5);
        let r = regular_value_check(&h, 2.5, 128).unwrap();
        assert!(r.regular && r.empty);
        assert!(matches!(orbit_catalog(&h, 0.0, 128), Err(Error::NearCritical { .. })));
        assert!(orbit_catalog(&h, 2.5, 128).unwrap().orbits.is_empty());
        let c = FourierSymbol::constant(square(), 1.0);
        assert!(matches!(orbit_catalog(&c, 1.0, 128), Err(Error::Regularity { .. })));
    }

    #[test]
    fn repetition_laws() {
        let h = harper(square());
        let o = &orbit_catalog(&h, 1.0, 128).unwrap().orbits[0];
        let r = repetition(o, 3);
        assert_eq!(r.maslov, 6);
        assert_relative_eq!(r.period, 3.0 * o.period_primitive);
        assert_relative_eq!(r.action, 3.0 * o.action_primitive);
    }

    #[test]
    fn harper_action_is_minus_area_and_seed_independent() {
        let h = harper(square());
        let o = orbit_catalog(&h, 1.0, 128).unwrap().orbits.remove(0);
        // counter-clockwise loop around the maximum
        assert!(o.action_primitive < 0.0);
        assert!((o.action_primitive.abs() - 7.29488).abs() < 1e-4);
        for s in [1, 7, 19, 40, 77] {
            let w = o.action_from_seed(&h, s);
            assert!((w - o.action_primitive).abs() < 1e-10 * o.action_primitive.abs());
        }
    }

    #[test]
    fn derivative_of_action_is_period() {
        let h = harper(square());
        for d in action_derivative_check(&h, 1.0, 1e-4, 128).unwrap() {
            assert!(d.deviation < 1e-4, "{d:?}");
        }
        let v = cos_potential(square());
        for d in action_derivative_check(&v, 0.3, 1e-4, 128).unwrap() {
            assert!(d.deviation < 1e-6, "{d:?}");
        }
    }

    #[test]
    fn ode_period_and_closure() {
        let h = harper(square());
        let cat = orbit_catalog(&h, 1.0, 128).unwrap();
        let o = &cat.orbits[0];
        let t = o.ode_period(&h, 1e-12).unwrap();
        assert!((t - o.period_primitive).abs() < 1e-8 * t);
        assert!(o.closure_error(&h, 1e-12).unwrap() < 1e-6 * 2.0 * PI);
    }

    #[test]
    fn catalog_json_schema() {
        let h = harper(square());
        let json = orbit_catalog(&h, 1.0, 128).unwrap().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["orbits"][0]["maslov"], 2);
        assert_eq!(v["orbits"][0]["winding"], serde_json::json!([0, 0]));
        assert!(v["volume"].as_f64().unwrap() > 8.0);
    }
}
