//! Event-driven simulation of the symmetric exclusion process.
//!
//! Every particle attempts each of its `2d` nearest-neighbour moves at rate
//! `eps^-2`. The total attempt rate `N_p 2d L^2` depends only on the
//! (conserved) particle number, so one exponential clock drives the whole
//! system: draw the waiting time, pick a particle and a direction uniformly,
//! then jump if the target is empty or record a collision if it is not.

mod dynkin;
mod state;
mod trace;

pub use dynkin::{DynkinFunctional, DynkinSample, DynkinTracker};
pub use state::{Configuration, CounterField};
pub use trace::{EventKind, EventRecord, EventTrace, DEFAULT_TRACE_LIMIT, RECORD_BYTES};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initcond::sample_from_parameters;
use crate::observables::{self, ObservableKind};
use crate::rng::{open_unit, replica_rng};
use crate::testfn::TestFunction;
use crate::torus::{Sign, TorusGeometry};

/// Counters abort before they can pass `i64::MAX`.
const COUNTER_LIMIT: u64 = i64::MAX as u64;

/// `N_p * 2d * L^2`.
pub fn total_rate(state: &Configuration, geom: &TorusGeometry) -> f64 {
    let side = geom.side() as f64;
    state.particle_count() as f64 * (2 * geom.dim()) as f64 * side * side
}

/// Executes one attempt of the particle in `slot` along `(axis, sign)`.
///
/// Does not touch the clock; [`step_event`] and [`Simulation`] do.
pub fn apply_attempt(
    geom: &TorusGeometry,
    state: &mut Configuration,
    counters: &mut CounterField,
    slot: usize,
    axis: usize,
    sign: Sign,
) -> Result<(usize, EventKind)> {
    let x = state.particles()[slot];
    let edge = geom.edge_index(x, axis, sign);
    if counters.attempts[edge] >= COUNTER_LIMIT {
        return Err(Error::CounterOverflow { edge });
    }
    counters.attempts[edge] += 1;
    let y = geom.shift(x, axis, sign);
    if state.is_occupied(y) {
        counters.collisions[edge] += 1;
        Ok((edge, EventKind::Collision))
    } else {
        state.move_particle(slot, y);
        counters.jumps[edge] += 1;
        Ok((edge, EventKind::Jump))
    }
}

/// Draws a uniform `(particle, direction)` pair.
#[inline]
fn draw_attempt<R: Rng + ?Sized>(geom: &TorusGeometry, state: &Configuration, rng: &mut R) -> (usize, usize, Sign) {
    let slot = rng.random_range(0..state.particle_count());
    let dir = rng.random_range(0..2 * geom.dim());
    let sign = if dir % 2 == 0 { Sign::Plus } else { Sign::Minus };
    (slot, dir / 2, sign)
}

/// Advances the clock by `Exp(total_rate)` and executes one uniform attempt.
pub fn step_event<R: Rng + ?Sized>(
    geom: &TorusGeometry,
    state: &mut Configuration,
    counters: &mut CounterField,
    rng: &mut R,
) -> Result<EventRecord> {
    if state.particle_count() == 0 {
        return Err(Error::EmptySystem);
    }
    let time = state.time() - open_unit(rng).ln() / total_rate(state, geom);
    let (slot, axis, sign) = draw_attempt(geom, state, rng);
    let (edge, kind) = apply_attempt(geom, state, counters, slot, axis, sign)?;
    state.set_time(time);
    Ok(EventRecord { time, edge, kind })
}

/// One path of the process with its counters and tracked functionals.
///
/// The time of the first event after the current clock is kept between
/// calls to [`Simulation::advance_to`]; by memorylessness this is the same
/// law as redrawing, but it keeps the path independent of where the sample
/// times fall.
#[derive(Debug, Clone)]
pub struct Simulation<R> {
    geom: TorusGeometry,
    state: Configuration,
    initial: Vec<u8>,
    counters: CounterField,
    trackers: Vec<DynkinTracker>,
    rng: R,
    pending: Option<f64>,
    events: u64,
    budget: Option<u64>,
    trace: Option<EventTrace>,
    scratch: Vec<usize>,
    refresh_every: u64,
}

impl<R: Rng> Simulation<R> {
    pub fn new(geom: TorusGeometry, state: Configuration, rng: R) -> Self {
        let counters = CounterField::zeros(&geom);
        Self {
            initial: state.occupancy_vec(),
            state,
            counters,
            trackers: Vec::new(),
            rng,
            pending: None,
            events: 0,
            budget: None,
            trace: None,
            scratch: Vec::with_capacity(8 * geom.dim()),
            refresh_every: 1 << 16,
            geom,
        }
    }

    /// Aborts with [`Error::Budget`] once more than `budget` events would run.
    pub fn with_budget(mut self, budget: Option<u64>) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_trace(mut self, limit: usize) -> Self {
        self.trace = Some(EventTrace::with_limit(limit));
        self
    }

    /// Starts tracking `functional`; returns its index.
    pub fn track(&mut self, functional: DynkinFunctional) -> usize {
        self.trackers
            .push(DynkinTracker::new(functional, &self.state, &self.counters, &self.geom));
        self.trackers.len() - 1
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn state(&self) -> &Configuration {
        &self.state
    }

    pub fn counters(&self) -> &CounterField {
        &self.counters
    }

    pub fn initial_occupancy(&self) -> &[u8] {
        &self.initial
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn trace(&self) -> Option<&EventTrace> {
        self.trace.as_ref()
    }

    pub fn tracker(&self, idx: usize) -> &DynkinTracker {
        &self.trackers[idx]
    }

    pub fn dynkin_sample(&self, idx: usize) -> DynkinSample {
        self.trackers[idx].sample(&self.state, &self.counters)
    }

    fn hold(&mut self, dt: f64) {
        if dt > 0.0 {
            for t in &mut self.trackers {
                t.hold(dt);
            }
        }
    }

    /// Runs every event with time `<= t_target`, then sets the clock to `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let now = self.state.time();
        if !(t_target >= now) {
            return Err(Error::usage(format!(
                "cannot advance from t = {now} back to {t_target}"
            )));
        }
        if self.state.particle_count() == 0 {
            self.hold(t_target - now);
            self.state.set_time(t_target);
            return Ok(());
        }
        let rate = total_rate(&self.state, &self.geom);
        let mut now = now;
        loop {
            let next = match self.pending.take() {
                Some(t) => t,
                None => now - open_unit(&mut self.rng).ln() / rate,
            };
            if next > t_target {
                self.pending = Some(next);
                break;
            }
            if let Some(budget) = self.budget {
                if self.events >= budget {
                    return Err(Error::Budget {
                        budget,
                        events: self.events,
                        time: now,
                    });
                }
            }
            self.hold(next - now);
            now = next;
            self.fire(now)?;
        }
        self.hold(t_target - now);
        self.state.set_time(t_target);
        for t in &mut self.trackers {
            t.refresh(&self.state, &self.geom);
        }
        Ok(())
    }

    fn fire(&mut self, time: f64) -> Result<()> {
        let (slot, axis, sign) = draw_attempt(&self.geom, &self.state, &mut self.rng);
        let x = self.state.particles()[slot];
        let y = self.geom.shift(x, axis, sign);
        let moves = !self.state.is_occupied(y);
        if moves && !self.trackers.is_empty() {
            dynkin::edges_touching(&self.geom, [x, y], &mut self.scratch);
            for t in &mut self.trackers {
                t.adjust(&self.scratch, &self.state, &self.geom, -1.0);
            }
        }
        let (edge, kind) = apply_attempt(&self.geom, &mut self.state, &mut self.counters, slot, axis, sign)?;
        if moves && !self.trackers.is_empty() {
            for t in &mut self.trackers {
                t.adjust(&self.scratch, &self.state, &self.geom, 1.0);
            }
        }
        self.events += 1;
        if self.events.is_multiple_of(self.refresh_every) {
            for t in &mut self.trackers {
                t.refresh(&self.state, &self.geom);
            }
        }
        self.state.set_time(time);
        if let Some(tr) = &mut self.trace {
            tr.push(EventRecord { time, edge, kind });
        }
        Ok(())
    }

    /// Verifies the exact pathwise identities; returns the number of checks made.
    pub fn audit(&self) -> Result<u64> {
        audit_path(&self.geom, &self.initial, &self.state, &self.counters, self.events)
    }
}

/// Pathwise identities at one instant:
/// attempts = jumps + collisions per edge; `eta(x,t) - eta(x,0)` equals the
/// net jump inflow at every site; the particle count is conserved; the
/// attempts sum to the number of events.
pub fn audit_path(
    geom: &TorusGeometry,
    initial: &[u8],
    state: &Configuration,
    counters: &CounterField,
    events: u64,
) -> Result<u64> {
    counters.check_decomposition()?;
    state.check_consistency()?;
    let before: usize = initial.iter().map(|&o| o as usize).sum();
    if before != state.particle_count() {
        return Err(Error::PathwiseViolation(format!(
            "particle count changed from {before} to {}",
            state.particle_count()
        )));
    }
    let total = counters.total_attempts();
    if total != events {
        return Err(Error::PathwiseViolation(format!(
            "edge attempts sum to {total}, but {events} events ran"
        )));
    }
    for x in 0..geom.site_count() {
        let mut inflow: i128 = 0;
        for axis in 0..geom.dim() {
            for sign in Sign::BOTH {
                let y = geom.shift(x, axis, sign);
                inflow += counters.jumps[geom.edge_index(y, axis, sign.flip())] as i128;
                inflow -= counters.jumps[geom.edge_index(x, axis, sign)] as i128;
            }
        }
        let change = state.occupancy(x) as i128 - initial[x] as i128;
        if change != inflow {
            return Err(Error::PathwiseViolation(format!(
                "site {x}: occupation changed by {change}, net jump inflow is {inflow}"
            )));
        }
    }
    Ok(counters.edge_count() as u64 + geom.site_count() as u64 + 2)
}

/// Everything a replica needs; shared read-only by all replicas of a run.
#[derive(Debug, Clone)]
pub struct ReplicaPlan {
    pub geom: TorusGeometry,
    pub n: usize,
    /// Bernoulli parameter per site.
    pub parameters: Vec<f64>,
    pub sample_times: Vec<f64>,
    /// Pairings recorded at every sample time.
    pub observables: Vec<(ObservableKind, TestFunction)>,
    pub master_seed: u64,
    pub event_budget: Option<u64>,
    /// Length of the debug event trace; `0` disables it.
    pub trace_limit: usize,
}

/// Per-sample-time output of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    /// One pairing per registered observable.
    pub values: Vec<f64>,
    /// Dynkin data for cumulative observables.
    pub dynkin: Vec<Option<DynkinSample>>,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaResult {
    pub replica_id: u64,
    pub particle_count: usize,
    pub initial_values: Vec<f64>,
    pub samples: Vec<SampleRecord>,
    pub events: u64,
    /// Number of exact identity checks that held.
    pub identity_checks: u64,
    pub trace: Option<EventTrace>,
}

/// Runs one replica; a deterministic function of `(plan, replica_id)`.
pub fn run_replica(plan: &ReplicaPlan, replica_id: u64) -> Result<ReplicaResult> {
    let mut rng = replica_rng(plan.master_seed, replica_id);
    let initial = sample_from_parameters(&plan.parameters, &plan.geom, &mut rng);
    let mut sim = Simulation::new(plan.geom.clone(), initial, rng).with_budget(plan.event_budget);
    if plan.trace_limit > 0 {
        sim = sim.with_trace(plan.trace_limit);
    }
    let mut tracked = Vec::with_capacity(plan.observables.len());
    for (kind, phi) in &plan.observables {
        tracked.push(if kind.is_cumulative() {
            Some(sim.track(DynkinFunctional::new(*kind, phi, plan.n, &plan.geom)?))
        } else {
            None
        });
    }
    let pair_all = |sim: &Simulation<_>| -> Result<Vec<f64>> {
        plan.observables
            .iter()
            .map(|(kind, phi)| observables::pair(*kind, phi, sim.state(), sim.counters(), plan.n, &plan.geom))
            .collect()
    };
    let initial_values = pair_all(&sim)?;
    let mut identity_checks = sim.audit()?;
    let mut samples = Vec::with_capacity(plan.sample_times.len());
    for &t in &plan.sample_times {
        sim.advance_to(t)?;
        identity_checks += sim.audit()?;
        samples.push(SampleRecord {
            t,
            values: pair_all(&sim)?,
            dynkin: tracked.iter().map(|i| i.map(|i| sim.dynkin_sample(i))).collect(),
            events: sim.events(),
        });
    }
    Ok(ReplicaResult {
        replica_id,
        particle_count: sim.state().particle_count(),
        initial_values,
        samples,
        events: sim.events(),
        identity_checks,
        trace: sim.trace().cloned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring4() -> TorusGeometry {
        TorusGeometry::new(1, 4).unwrap()
    }

    #[test]
    fn total_rate_examples() {
        let g = ring4();
        assert_eq!(total_rate(&Configuration::from_sites(&g, &[0, 1]).unwrap(), &g), 64.0);
        assert_eq!(total_rate(&Configuration::empty(&g), &g), 0.0);
        let g2 = TorusGeometry::new(2, 3).unwrap();
        let c = Configuration::from_sites(&g2, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(total_rate(&c, &g2), 180.0);
    }

    #[test]
    fn forced_attempts() {
        let g = ring4();
        let mut c = Configuration::from_sites(&g, &[0]).unwrap();
        let mut k = CounterField::zeros(&g);
        let (e, kind) = apply_attempt(&g, &mut c, &mut k, 0, 0, Sign::Plus).unwrap();
        assert_eq!(kind, EventKind::Jump);
        assert_eq!((k.jumps[e], k.collisions[e]), (1, 0));
        assert_eq!(c.particles(), &[1]);

        let mut c = Configuration::from_sites(&g, &[0, 1]).unwrap();
        let mut k = CounterField::zeros(&g);
        let before = c.clone();
        let (e, kind) = apply_attempt(&g, &mut c, &mut k, 0, 0, Sign::Plus).unwrap();
        assert_eq!(kind, EventKind::Collision);
        assert_eq!(k.collisions[e], 1);
        assert_eq!(c, before);

        let (_, kind) = apply_attempt(&g, &mut c, &mut k, 0, 0, Sign::Minus).unwrap();
        assert_eq!(kind, EventKind::Jump);
        assert!(c.is_occupied(3) && !c.is_occupied(0));
    }

    #[test]
    fn step_on_empty_system_fails() {
        let g = ring4();
        let mut c = Configuration::empty(&g);
        let mut k = CounterField::zeros(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            step_event(&g, &mut c, &mut k, &mut rng),
            Err(Error::EmptySystem)
        ));
    }

    #[test]
    fn step_event_advances_clock() {
        let g = ring4();
        let mut c = Configuration::from_sites(&g, &[0, 2]).unwrap();
        let mut k = CounterField::zeros(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut last = 0.0;
        for _ in 0..100 {
            let r = step_event(&g, &mut c, &mut k, &mut rng).unwrap();
            assert!(r.time > last);
            last = r.time;
        }
        assert_eq!(k.total_attempts(), 100);
        k.check_decomposition().unwrap();
    }

    #[test]
    fn empty_system_advances_without_events() {
        let g = ring4();
        let mut sim = Simulation::new(g.clone(), Configuration::empty(&g), ChaCha8Rng::seed_from_u64(1));
        let one = TestFunction::constant(1.0);
        let i = sim.track(DynkinFunctional::new(ObservableKind::NetCollision, &one, 2, &g).unwrap());
        sim.advance_to(3.0).unwrap();
        assert_eq!(sim.events(), 0);
        assert_eq!(sim.state().time(), 3.0);
        assert_eq!(sim.dynkin_sample(i).qv_integral, 0.0);
        assert_eq!(sim.counters().total_attempts(), 0);
    }

    #[test]
    fn single_particle_never_collides() {
        let g = TorusGeometry::new(2, 5).unwrap();
        let c = Configuration::from_sites(&g, &[7]).unwrap();
        let mut sim = Simulation::new(g, c, ChaCha8Rng::seed_from_u64(3));
        sim.advance_to(5.0).unwrap();
        assert!(sim.events() > 100);
        assert!(sim.counters().collisions.iter().all(|&c| c == 0));
        assert_eq!(sim.counters().attempts, sim.counters().jumps);
        sim.audit().unwrap();
    }

    #[test]
    fn advance_rejects_going_backwards() {
        let g = ring4();
        let c = Configuration::from_sites(&g, &[0]).unwrap();
        let mut sim = Simulation::new(g, c, ChaCha8Rng::seed_from_u64(3));
        sim.advance_to(0.1).unwrap();
        assert!(sim.advance_to(0.05).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let g = TorusGeometry::new(1, 16).unwrap();
        let c = Configuration::from_sites(&g, &[0, 5, 9]).unwrap();
        let mut sim = Simulation::new(g, c, ChaCha8Rng::seed_from_u64(3)).with_budget(Some(10));
        match sim.advance_to(10.0) {
            Err(Error::Budget {
                budget: 10, events: 10, ..
            }) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn incremental_rates_match_recomputation() {
        let g = TorusGeometry::new(2, 6).unwrap();
        let c = Configuration::from_sites(&g, &[0, 1, 6, 7, 14, 20, 21, 33]).unwrap();
        let n = 8;
        let trig = crate::series::Series::mode(vec![1, 2], crate::series::Phase::Sin, 0.7)
            .add(&crate::series::Series::constant(2, 0.3));
        let signed = TestFunction::table(vec![
            (
                crate::testfn::Component {
                    axis: 0,
                    sign: Some(Sign::Plus),
                },
                trig.clone(),
            ),
            (
                crate::testfn::Component {
                    axis: 1,
                    sign: Some(Sign::Minus),
                },
                trig.scale(-2.0),
            ),
        ])
        .unwrap();
        let axis = TestFunction::table(vec![(crate::testfn::Component { axis: 1, sign: None }, trig.clone())]).unwrap();
        let scalar = TestFunction::Trig(trig);
        let mut sim = Simulation::new(g.clone(), c, ChaCha8Rng::seed_from_u64(9));
        let specs = [
            (ObservableKind::Empirical, &scalar),
            (ObservableKind::UniFlux, &signed),
            (ObservableKind::UniCollision, &signed),
            (ObservableKind::NetFlux, &axis),
            (ObservableKind::NetCollision, &axis),
        ];
        let ids: Vec<usize> = specs
            .iter()
            .map(|(k, phi)| sim.track(DynkinFunctional::new(*k, phi, n, &g).unwrap()))
            .collect();
        for step in 1..=40 {
            let t = step as f64 * 0.001;
            // advance_to refreshes; compare the incremental rates just before
            let mut probe = sim.clone();
            probe.refresh_every = u64::MAX;
            let target = t - 0.0005;
            let now = probe.state().time();
            if target > now {
                // run events without the final refresh
                let rate = total_rate(probe.state(), &g);
                loop {
                    let next = match probe.pending.take() {
                        Some(x) => x,
                        None => probe.state.time() - open_unit(&mut probe.rng).ln() / rate,
                    };
                    if next > target {
                        break;
                    }
                    probe.fire(next).unwrap();
                }
                for &i in &ids {
                    let (q, gm) = probe.tracker(i).rates();
                    let (q2, g2) = probe.tracker(i).functional().rates(probe.state(), &g);
                    assert!((q - q2).abs() < 1e-9 * (1.0 + q2.abs()), "drift {q} vs {q2}");
                    assert!((gm - g2).abs() < 1e-9 * (1.0 + g2.abs()), "gamma {gm} vs {g2}");
                }
            }
            sim.advance_to(t).unwrap();
        }
    }

    #[test]
    fn functional_values_match_pairings() {
        let g = TorusGeometry::new(1, 10).unwrap();
        let c = Configuration::from_sites(&g, &[0, 1, 2, 5]).unwrap();
        let n = 4;
        let s = crate::series::Series::mode(vec![1], crate::series::Phase::Cos, 1.0);
        let axis = TestFunction::table(vec![(crate::testfn::Component { axis: 0, sign: None }, s.clone())]).unwrap();
        let signed = TestFunction::table(vec![(
            crate::testfn::Component {
                axis: 0,
                sign: Some(Sign::Minus),
            },
            s.clone(),
        )])
        .unwrap();
        let scalar = TestFunction::Trig(s);
        let mut sim = Simulation::new(g.clone(), c, ChaCha8Rng::seed_from_u64(2));
        sim.advance_to(0.2).unwrap();
        for (kind, phi) in [
            (ObservableKind::Empirical, &scalar),
            (ObservableKind::UniFlux, &signed),
            (ObservableKind::UniCollision, &signed),
            (ObservableKind::NetFlux, &axis),
            (ObservableKind::NetCollision, &axis),
        ] {
            let f = DynkinFunctional::new(kind, phi, n, &g).unwrap();
            let direct = observables::pair(kind, phi, sim.state(), sim.counters(), n, &g).unwrap();
            assert!((f.value(sim.state(), sim.counters()) - direct).abs() < 1e-12, "{kind}");
        }
    }

    #[test]
    fn dynkin_rates_agree_with_closed_form_drifts() {
        let g = TorusGeometry::new(1, 4).unwrap();
        let c = Configuration::from_sites(&g, &[0, 1]).unwrap();
        let one = TestFunction::constant(1.0);
        let plus = TestFunction::on_component(1, 1.0, 0, Some(Sign::Plus)).unwrap();
        let n = 2;
        let f = DynkinFunctional::new(ObservableKind::UniFlux, &plus, n, &g).unwrap();
        assert!((f.rates(&c, &g).0 - observables::drift_uniflux(&plus, &c, n, &g).unwrap()).abs() < 1e-12);
        assert!((f.rates(&c, &g).1 - observables::gamma2_uniflux(&plus, &c, n, &g).unwrap()).abs() < 1e-12);
        let f = DynkinFunctional::new(ObservableKind::UniCollision, &one, n, &g).unwrap();
        assert!((f.rates(&c, &g).0 - observables::drift_unicol(&one, &c, n, &g).unwrap()).abs() < 1e-12);
        assert!((f.rates(&c, &g).1 - observables::gamma2_unicol(&one, &c, n, &g).unwrap()).abs() < 1e-12);
        let f = DynkinFunctional::new(ObservableKind::NetCollision, &one, n, &g).unwrap();
        assert!(f.rates(&c, &g).0.abs() < 1e-12);
        assert!((f.rates(&c, &g).1 - observables::gamma_k_netcol(&one, &c, n, &g, 2).unwrap()).abs() < 1e-12);
        let f = DynkinFunctional::new(ObservableKind::Empirical, &one, n, &g).unwrap();
        assert_eq!(f.rates(&c, &g), (0.0, 0.0));
    }

    #[test]
    fn pending_event_makes_path_independent_of_sample_grid() {
        let g = TorusGeometry::new(1, 12).unwrap();
        let c = Configuration::from_sites(&g, &[0, 3, 4, 8]).unwrap();
        let mut a = Simulation::new(g.clone(), c.clone(), ChaCha8Rng::seed_from_u64(4));
        let mut b = Simulation::new(g, c, ChaCha8Rng::seed_from_u64(4));
        a.advance_to(0.3).unwrap();
        for t in [0.01, 0.1, 0.17, 0.3] {
            b.advance_to(t).unwrap();
        }
        assert_eq!(a.counters(), b.counters());
        assert_eq!(a.state().particles(), b.state().particles());
    }
}
