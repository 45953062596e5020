//! The dual particle system: on/off coalescing random walks on the SPDE
//! lattice, simulated event by event, and continuum single-particle on/off
//! Brownian paths.
//!
//! Lattice rates mirror the explicit scheme in [`crate::spde`]: an active
//! walker jumps to each neighbour at rate `1/(2 dx^2)`, falls dormant at rate
//! `c`, a dormant walker wakes at rate `c'`, and every unordered pair of
//! active walkers sharing a site merges at rate `1/dx`.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spde::SimConfig;
use crate::stats::{replicate_rng, McEstimate, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    Active,
    Dormant,
}

impl Marker {
    pub fn toggled(self) -> Self {
        match self {
            Marker::Active => Marker::Dormant,
            Marker::Dormant => Marker::Active,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Marker::Active => 'a',
            Marker::Dormant => 'd',
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "a" | "A" | "active" => Some(Marker::Active),
            "d" | "D" | "dormant" => Some(Marker::Dormant),
            _ => None,
        }
    }
}

/// Lattice walker; `site` counts lattice spacings from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Walker {
    pub id: u32,
    pub site: i64,
    pub marker: Marker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualRates {
    pub dx: f64,
    /// Total jump rate of one active walker.
    pub jump_rate: f64,
    /// Merge rate of one co-located active pair.
    pub coalesce_rate: f64,
    /// Active to dormant.
    pub on_rate: f64,
    /// Dormant to active.
    pub off_rate: f64,
}

impl DualRates {
    pub fn for_lattice(dx: f64, c: f64, c_prime: f64) -> Self {
        Self {
            dx,
            jump_rate: 1.0 / (dx * dx),
            coalesce_rate: 1.0 / dx,
            on_rate: c,
            off_rate: c_prime,
        }
    }

    pub fn from_sim(cfg: &SimConfig) -> Self {
        Self::for_lattice(cfg.grid.dx(), cfg.c, cfg.c_prime)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub jumps: u64,
    pub sleeps: u64,
    pub wakes: u64,
    pub coalescences: u64,
}

impl EventCounts {
    fn add(&mut self, o: &EventCounts) {
        self.jumps += o.jumps;
        self.sleeps += o.sleeps;
        self.wakes += o.wakes;
        self.coalescences += o.coalescences;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub walkers: Vec<Walker>,
    pub t: f64,
    pub rates: DualRates,
    pub events: EventCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Jump { walker: usize, right: bool },
    Sleep(usize),
    Wake(usize),
    Coalesce(usize, usize),
}

/// Linear scan over event buckets for a uniform draw.
struct Picker {
    remaining: f64,
    last: Option<Event>,
}

impl Picker {
    fn offer(&mut self, rate: f64, event: Event) -> bool {
        if rate <= 0.0 {
            return false;
        }
        self.last = Some(event);
        if self.remaining < rate {
            return true;
        }
        self.remaining -= rate;
        false
    }
}

impl DualState {
    /// Places walkers at lattice coordinates `x`; ids follow list order.
    pub fn new(start: &[(f64, Marker)], rates: DualRates) -> Result<Self> {
        let walkers = start
            .iter()
            .enumerate()
            .map(|(id, &(x, marker))| {
                let r = x / rates.dx;
                let site = r.round();
                if (r - site).abs() > 1e-6 {
                    return Err(Error::Precondition(format!(
                        "start position {x} is not on the lattice of spacing {}",
                        rates.dx
                    )));
                }
                Ok(Walker {
                    id: id as u32,
                    site: site as i64,
                    marker,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            walkers,
            t: 0.0,
            rates,
            events: EventCounts::default(),
        })
    }

    pub fn position(&self, w: &Walker) -> f64 {
        w.site as f64 * self.rates.dx
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    fn active_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = &self.walkers;
        (0..w.len()).flat_map(move |i| {
            (i + 1..w.len()).filter_map(move |j| {
                (w[i].marker == Marker::Active
                    && w[j].marker == Marker::Active
                    && w[i].site == w[j].site)
                    .then_some((i, j))
            })
        })
    }

    fn total_rate(&self) -> f64 {
        let r = &self.rates;
        let mut total = 0.0;
        for w in &self.walkers {
            total += match w.marker {
                Marker::Active => r.jump_rate + r.on_rate,
                Marker::Dormant => r.off_rate,
            };
        }
        total + self.active_pairs().count() as f64 * r.coalesce_rate
    }

    /// Samples the holding time and the event that ends it.
    fn next_event<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(f64, Event)> {
        let total = self.total_rate();
        if !(total > 0.0) {
            return None;
        }
        let hold = Exp::new(total).expect("positive rate").sample(rng);
        let mut pick = Picker {
            remaining: rng.random::<f64>() * total,
            last: None,
        };
        let r = &self.rates;
        for (i, w) in self.walkers.iter().enumerate() {
            let hit = match w.marker {
                Marker::Active => {
                    pick.offer(0.5 * r.jump_rate, Event::Jump { walker: i, right: true })
                        || pick.offer(0.5 * r.jump_rate, Event::Jump { walker: i, right: false })
                        || pick.offer(r.on_rate, Event::Sleep(i))
                }
                Marker::Dormant => pick.offer(r.off_rate, Event::Wake(i)),
            };
            if hit {
                return pick.last.map(|e| (hold, e));
            }
        }
        for (i, j) in self.active_pairs() {
            if pick.offer(r.coalesce_rate, Event::Coalesce(i, j)) {
                break;
            }
        }
        // rounding may push the draw past the last bucket; keep the last one
        pick.last.map(|e| (hold, e))
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::Jump { walker, right } => {
                self.walkers[walker].site += if right { 1 } else { -1 };
                self.events.jumps += 1;
            }
            Event::Sleep(i) => {
                self.walkers[i].marker = Marker::Dormant;
                self.events.sleeps += 1;
            }
            Event::Wake(i) => {
                self.walkers[i].marker = Marker::Active;
                self.events.wakes += 1;
            }
            Event::Coalesce(i, j) => {
                // the survivor keeps the lower id
                let drop = if self.walkers[i].id > self.walkers[j].id { i } else { j };
                self.walkers.remove(drop);
                self.events.coalescences += 1;
            }
        }
    }
}

/// Advances to the next event. Returns the holding time, which is infinite
/// (and the state untouched) when no event is enabled.
pub fn dual_step<R: Rng + ?Sized>(state: &mut DualState, rng: &mut R) -> f64 {
    match state.next_event(rng) {
        None => f64::INFINITY,
        Some((hold, event)) => {
            state.t += hold;
            state.apply(event);
            hold
        }
    }
}

/// Runs the lattice dual from `start` up to `t_end`.
pub fn run_dual<R: Rng + ?Sized>(
    start: &[(f64, Marker)],
    t_end: f64,
    rates: DualRates,
    rng: &mut R,
) -> Result<DualState> {
    let mut state = DualState::new(start, rates)?;
    advance_to(&mut state, t_end, rng);
    Ok(state)
}

fn advance_to<R: Rng + ?Sized>(state: &mut DualState, t_end: f64, rng: &mut R) {
    while let Some((hold, event)) = state.next_event(rng) {
        if state.t + hold > t_end {
            break;
        }
        state.t += hold;
        state.apply(event);
    }
    state.t = t_end;
}

/// Indicator `1_{x <= edge}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontIndicator {
    pub edge: f64,
}

impl FrontIndicator {
    pub const HEAVISIDE: FrontIndicator = FrontIndicator { edge: 0.0 };

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.edge + 1e-9 {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualEstimate {
    pub estimate: McEstimate,
    pub events: EventCounts,
}

/// Monte Carlo estimate of `E[prod_active u0(M) prod_dormant v0(M)]` at `t`.
///
/// The start list is put in canonical order first, so permutations of the
/// same configuration consume identical random streams.
pub fn dual_moment_estimate(
    start: &[(f64, Marker)],
    u0: FrontIndicator,
    v0: FrontIndicator,
    t: f64,
    replicates: usize,
    rates: DualRates,
    base_seed: u64,
) -> Result<DualEstimate> {
    if replicates < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    let mut start = start.to_vec();
    start.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let initial = DualState::new(&start, rates)?;
    let runs: Vec<(f64, EventCounts)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(base_seed, r, Stream::Dual);
            let mut state = initial.clone();
            advance_to(&mut state, t, &mut rng);
            let value = state
                .walkers
                .iter()
                .map(|w| {
                    let x = state.position(w);
                    match w.marker {
                        Marker::Active => u0.eval(x),
                        Marker::Dormant => v0.eval(x),
                    }
                })
                .product::<f64>();
            (value, state.events)
        })
        .collect();
    let samples: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mut events = EventCounts::default();
    for (_, e) in &runs {
        events.add(e);
    }
    Ok(DualEstimate {
        estimate: McEstimate::from_samples(&samples)?,
        events,
    })
}

/// Continuum on/off Brownian path recorded at a regular time lattice and at
/// every switch time. `markers[i]` holds on `[times[i], times[i + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnOffPath {
    pub start: (f64, Marker),
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub markers: Vec<Marker>,
    pub switch_times: Vec<f64>,
}

impl OnOffPath {
    pub fn terminal_position(&self) -> f64 {
        *self.positions.last().expect("path has a start epoch")
    }

    /// Total active time over the recorded horizon.
    pub fn active_time(&self) -> f64 {
        self.segments()
            .filter(|s| s.marker == Marker::Active)
            .map(|s| s.t1 - s.t0)
            .sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = PathSegment> + '_ {
        (0..self.times.len().saturating_sub(1)).map(move |i| PathSegment {
            t0: self.times[i],
            t1: self.times[i + 1],
            x0: self.positions[i],
            marker: self.markers[i],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSegment {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub marker: Marker,
}

/// Samples an on/off Brownian path on `[0, t_end]`. Switch times are exact;
/// positions are recorded at multiples of `dt_path` and at switches.
pub fn sample_onoff_path<R: Rng + ?Sized>(
    start: (f64, Marker),
    t_end: f64,
    dt_path: f64,
    c: f64,
    c_prime: f64,
    rng: &mut R,
) -> Result<OnOffPath> {
    if !(dt_path > 0.0) {
        return Err(Error::Domain { what: "dt_path", value: dt_path });
    }
    let mut path = OnOffPath {
        start,
        times: vec![0.0],
        positions: vec![start.0],
        markers: Vec::new(),
        switch_times: Vec::new(),
    };
    let clock = |m: Marker, rng: &mut R| {
        let rate = match m {
            Marker::Active => c,
            Marker::Dormant => c_prime,
        };
        if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(rng)
        } else {
            f64::INFINITY
        }
    };
    let mut t = 0.0;
    let mut x = start.0;
    let mut marker = start.1;
    let mut next_switch = clock(marker, rng);
    let mut k = 1usize;
    while t < t_end {
        let grid_epoch = (k as f64 * dt_path).min(t_end);
        let switching = next_switch < grid_epoch;
        let t_next = if switching { next_switch } else { grid_epoch };
        if marker == Marker::Active {
            let z: f64 = rng.sample(StandardNormal);
            x += (t_next - t).sqrt() * z;
        }
        path.markers.push(marker);
        path.times.push(t_next);
        path.positions.push(x);
        t = t_next;
        if switching {
            path.switch_times.push(t);
            marker = marker.toggled();
            next_switch = t + clock(marker, rng);
        } else {
            k += 1;
        }
    }
    Ok(path)
}
