//! Activation sets and lags for the block-iterative, asynchronous iteration.
//!
//! A schedule yields, for each tick `n`, the activated players `I_n` and couplings
//! `K_n`, each paired with the tick its computation reads from (`τ_i(n)`, `δ_k(n)`).
//! Every schedule activates all blocks at `n = 0`, keeps lags within
//! `[max(0, n − D), n]`, and covers every block in each window of `P + 1` ticks.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One activated block and the (possibly stale) tick it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activation {
    pub block: usize,
    pub read_at: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickPlan {
    pub players: Vec<Activation>,
    pub couplings: Vec<Activation>,
}

impl TickPlan {
    pub fn full(n: usize, num_players: usize, num_couplings: usize) -> Self {
        Self {
            players: (0..num_players).map(|block| Activation { block, read_at: n }).collect(),
            couplings: (0..num_couplings).map(|block| Activation { block, read_at: n }).collect(),
        }
    }

    pub fn player_ids(&self) -> Vec<usize> {
        self.players.iter().map(|a| a.block).collect()
    }

    pub fn coupling_ids(&self) -> Vec<usize> {
        self.couplings.iter().map(|a| a.block).collect()
    }
}

#[derive(Debug, Clone)]
pub enum ScheduleKind {
    Synchronous,
    /// Round-robin over consecutive groups of `block_size` blocks.
    Cyclic { block_size: usize },
    /// Each block activates with probability `activation_prob`; blocks idle for the
    /// last `P` ticks are force-activated. Lags are uniform in `[max(0, n − max_lag), n]`.
    Random { seed: u64, activation_prob: f64, max_lag: usize },
    /// Replays explicit plans; ticks beyond the script activate everything without lag.
    Scripted(Arc<Vec<TickPlan>>),
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Maximal lag `D`.
    pub max_lag: usize,
    /// Quasi-cyclic window `P`.
    pub window: usize,
}

impl Schedule {
    pub fn synchronous() -> Self {
        Self { kind: ScheduleKind::Synchronous, max_lag: 0, window: 0 }
    }

    pub fn cyclic(block_size: usize, window: usize) -> Self {
        Self { kind: ScheduleKind::Cyclic { block_size }, max_lag: 0, window }
    }

    pub fn random(seed: u64, activation_prob: f64, max_lag: usize, window: usize) -> Self {
        Self { kind: ScheduleKind::Random { seed, activation_prob, max_lag }, max_lag, window }
    }

    pub fn scripted(plans: Vec<TickPlan>, max_lag: usize, window: usize) -> Self {
        Self { kind: ScheduleKind::Scripted(Arc::new(plans)), max_lag, window }
    }

    /// Streaming generator; ticks must be drawn in order.
    pub fn generator(&self, num_players: usize, num_couplings: usize) -> ScheduleGenerator {
        ScheduleGenerator {
            schedule: self.clone(),
            num_players,
            num_couplings,
            next: 0,
            last_player: vec![0; num_players],
            last_coupling: vec![0; num_couplings],
        }
    }

    /// `(I_n, K_n, τ, δ)` at tick `n`. Deterministic in `(kind, seed, n)`; random
    /// schedules replay from tick 0.
    pub fn next_tick(&self, n: usize, num_players: usize, num_couplings: usize) -> TickPlan {
        let mut gen = self.generator(num_players, num_couplings);
        let mut plan = gen.next_plan();
        while gen.next <= n {
            plan = gen.next_plan();
        }
        plan
    }

    /// Replays ticks `0..horizon` and reports every violated schedule condition.
    pub fn audit(&self, horizon: usize, num_players: usize, num_couplings: usize) -> AuditReport {
        let mut report = AuditReport::default();
        let mut gen = self.generator(num_players, num_couplings);
        let p = self.window;
        let d = self.max_lag;
        let mut last_p: Vec<Option<usize>> = vec![None; num_players];
        let mut last_k: Vec<Option<usize>> = vec![None; num_couplings];
        for n in 0..horizon {
            let plan = gen.next_plan();
            if n == 0
                && (plan.players.len() != num_players || plan.couplings.len() != num_couplings)
            {
                report.push(ScheduleViolation::IncompleteFirstTick);
            }
            if plan.players.is_empty() && num_players > 0 {
                report.push(ScheduleViolation::EmptyActivation { n, couplings: false });
            }
            if plan.couplings.is_empty() && num_couplings > 0 {
                report.push(ScheduleViolation::EmptyActivation { n, couplings: true });
            }
            for (acts, last, size, couplings) in [
                (&plan.players, &mut last_p, num_players, false),
                (&plan.couplings, &mut last_k, num_couplings, true),
            ] {
                for a in acts {
                    if a.block >= size {
                        report.push(ScheduleViolation::UnknownBlock { n, block: a.block, couplings });
                        continue;
                    }
                    if a.read_at > n || a.read_at + d < n {
                        report.push(ScheduleViolation::LagOutOfRange {
                            n,
                            block: a.block,
                            read_at: a.read_at,
                            couplings,
                        });
                    }
                    last[a.block] = Some(n);
                }
                // Window [n − P, n] must contain an activation of every block.
                if n >= p {
                    for (block, l) in last.iter().enumerate() {
                        if l.is_none_or(|l| l + p < n) {
                            report.push(ScheduleViolation::Coverage {
                                window_start: n - p,
                                block,
                                couplings,
                            });
                        }
                    }
                }
            }
        }
        report
    }
}

/// Stateful replay of a [`Schedule`].
#[derive(Debug, Clone)]
pub struct ScheduleGenerator {
    schedule: Schedule,
    num_players: usize,
    num_couplings: usize,
    next: usize,
    last_player: Vec<usize>,
    last_coupling: Vec<usize>,
}

impl ScheduleGenerator {
    /// Tick index of the next plan.
    pub fn position(&self) -> usize {
        self.next
    }

    pub fn next_plan(&mut self) -> TickPlan {
        let n = self.next;
        self.next += 1;
        let (np, nk) = (self.num_players, self.num_couplings);
        if n == 0 {
            return TickPlan::full(0, np, nk);
        }
        let plan = match &self.schedule.kind {
            ScheduleKind::Synchronous => TickPlan::full(n, np, nk),
            ScheduleKind::Cyclic { block_size } => {
                let group = |size: usize| -> Vec<Activation> {
                    if size == 0 {
                        return Vec::new();
                    }
                    let bs = (*block_size).clamp(1, size);
                    let start = (n * bs) % size;
                    let mut ids: Vec<usize> = (0..bs).map(|j| (start + j) % size).collect();
                    ids.sort_unstable();
                    ids.into_iter().map(|block| Activation { block, read_at: n }).collect()
                };
                TickPlan { players: group(np), couplings: group(nk) }
            }
            ScheduleKind::Random { seed, activation_prob, max_lag } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(n as u64);
                let lo = n.saturating_sub(*max_lag);
                let p = self.schedule.window;
                let mut draw = |last: &[usize]| -> Vec<Activation> {
                    let size = last.len();
                    let mut acts = Vec::new();
                    for (block, &l) in last.iter().enumerate() {
                        let hit = rng.gen_bool(activation_prob.clamp(0.0, 1.0));
                        let read_at = rng.gen_range(lo..=n);
                        if hit || l + p < n {
                            acts.push(Activation { block, read_at });
                        }
                    }
                    if acts.is_empty() && size > 0 {
                        let block = rng.gen_range(0..size);
                        acts.push(Activation { block, read_at: rng.gen_range(lo..=n) });
                    }
                    acts
                };
                let players = draw(&self.last_player);
                let couplings = draw(&self.last_coupling);
                TickPlan { players, couplings }
            }
            ScheduleKind::Scripted(plans) => {
                plans.get(n).cloned().unwrap_or_else(|| TickPlan::full(n, np, nk))
            }
        };
        for a in &plan.players {
            if let Some(l) = self.last_player.get_mut(a.block) {
                *l = n;
            }
        }
        for a in &plan.couplings {
            if let Some(l) = self.last_coupling.get_mut(a.block) {
                *l = n;
            }
        }
        plan
    }
}

impl Iterator for ScheduleGenerator {
    type Item = TickPlan;

    fn next(&mut self) -> Option<TickPlan> {
        Some(self.next_plan())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    IncompleteFirstTick,
    EmptyActivation { n: usize, couplings: bool },
    UnknownBlock { n: usize, block: usize, couplings: bool },
    LagOutOfRange { n: usize, block: usize, read_at: usize, couplings: bool },
    Coverage { window_start: usize, block: usize, couplings: bool },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = |c: &bool| if *c { "coupling" } else { "player" };
        match self {
            ScheduleViolation::IncompleteFirstTick => write!(f, "tick 0 does not activate every block"),
            ScheduleViolation::EmptyActivation { n, couplings } => {
                write!(f, "tick {n} activates no {}", kind(couplings))
            }
            ScheduleViolation::UnknownBlock { n, block, couplings } => {
                write!(f, "tick {n} activates unknown {} {block}", kind(couplings))
            }
            ScheduleViolation::LagOutOfRange { n, block, read_at, couplings } => write!(
                f,
                "tick {n}: {} {block} reads tick {read_at}, outside [n - D, n]",
                kind(couplings)
            ),
            ScheduleViolation::Coverage { window_start, block, couplings } => write!(
                f,
                "{} {block} is not activated in the window starting at tick {window_start}",
                kind(couplings)
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub violations: Vec<ScheduleViolation>,
}

impl AuditReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: ScheduleViolation) {
        self.violations.push(v);
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synchronous_is_full_and_lag_free() {
        let s = Schedule::synchronous();
        for n in [0, 1, 17] {
            assert_eq!(s.next_tick(n, 3, 2), TickPlan::full(n, 3, 2));
        }
        assert!(s.audit(100, 3, 2).is_empty());
    }

    #[test]
    fn cyclic_round_robin() {
        let s = Schedule::cyclic(1, 2);
        let ids: Vec<Vec<usize>> = (0..5).map(|n| s.next_tick(n, 3, 0).player_ids()).collect();
        assert_eq!(ids, vec![vec![0, 1, 2], vec![1], vec![2], vec![0], vec![1]]);
        assert!(s.audit(100, 3, 0).is_empty());
        // Window too short for the cycle length.
        assert!(!Schedule::cyclic(1, 1).audit(100, 3, 0).is_empty());
    }

    #[test]
    fn random_covers_and_bounds_lags() {
        let s = Schedule::random(17, 0.5, 3, 3);
        let mut gen = s.generator(4, 2);
        let plans: Vec<TickPlan> = (0..1000).map(|_| gen.next_plan()).collect();
        for (n, plan) in plans.iter().enumerate() {
            for a in plan.players.iter().chain(&plan.couplings) {
                assert!(a.read_at <= n && a.read_at + 3 >= n);
            }
        }
        for start in 0..(1000 - 3) {
            for block in 0..4 {
                assert!((start..=start + 3).any(|n| plans[n].player_ids().contains(&block)));
            }
            for block in 0..2 {
                assert!((start..=start + 3).any(|n| plans[n].coupling_ids().contains(&block)));
            }
        }
        assert!(s.audit(10_000, 4, 2).is_empty());
    }

    #[test]
    fn random_is_deterministic_and_pure() {
        let s = Schedule::random(42, 0.3, 5, 4);
        let mut gen = s.generator(3, 1);
        let streamed: Vec<TickPlan> = (0..60).map(|_| gen.next_plan()).collect();
        for n in [0, 1, 13, 59] {
            assert_eq!(s.next_tick(n, 3, 1), streamed[n]);
        }
        let other = Schedule::random(43, 0.3, 5, 4);
        assert_ne!((0..60).map(|n| other.next_tick(n, 3, 1)).collect::<Vec<_>>(), streamed);
    }

    #[test]
    fn low_probability_still_nonempty() {
        let s = Schedule::random(1, 0.0, 0, 10);
        assert!(s.audit(500, 5, 3).is_empty());
    }

    #[test]
    fn skipped_player_is_a_coverage_violation() {
        let p = 2;
        // Player 1 idles for ticks 1..=P+2.
        let mut plans = vec![TickPlan::full(0, 3, 0)];
        for n in 1..=p + 2 {
            plans.push(TickPlan {
                players: vec![Activation { block: 0, read_at: n }, Activation { block: 2, read_at: n }],
                couplings: vec![],
            });
        }
        let s = Schedule::scripted(plans, 0, p);
        let report = s.audit(20, 3, 0);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, ScheduleViolation::Coverage { block: 1, couplings: false, .. })));
    }

    #[test]
    fn excessive_lag_is_reported() {
        let plans = vec![
            TickPlan::full(0, 1, 0),
            TickPlan::full(1, 1, 0),
            TickPlan { players: vec![Activation { block: 0, read_at: 0 }], couplings: vec![] },
        ];
        let report = Schedule::scripted(plans.clone(), 2, 0).audit(5, 1, 0);
        assert!(report.is_empty(), "{report}");
        let report = Schedule::scripted(plans, 1, 0).audit(5, 1, 0);
        assert_eq!(
            report.violations,
            vec![ScheduleViolation::LagOutOfRange { n: 2, block: 0, read_at: 0, couplings: false }]
        );
    }
}
