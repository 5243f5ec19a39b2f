use std::path::PathBuf;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::audit::{window_variant_update, AuditConfig, AuditSample, AuditState};
use crate::error::{Error, Result};
use crate::ids::{finite_ir, select_deterministic, select_randomized, InfoTarget};
use crate::pricing::{Observation, PriceGrid};
use crate::trace::Alert;
use crate::universes::{
    generate, load_vintage, GeneratorConfig, InitiatorRun, InjectKind, MultiUniverse, Universe,
    WeightRule, BELIEF_FLOOR, LIKELIHOOD_FLOOR,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Yellow/red auditing with `I(a*; d)` gains.
    #[default]
    Standard,
    /// As standard, with `I(θ; d)` gains.
    Theta,
    /// No cards; a moving-window universe is refit every round.
    Window,
    /// Plain information-directed pricing on the initial universes.
    NoAudit,
}

impl Variant {
    pub fn key(self) -> &'static str {
        match self {
            Variant::Standard => "acidp",
            Variant::Theta => "acidp-theta",
            Variant::Window => "acidp-window",
            Variant::NoAudit => "acidp-noaudit",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// `argmin Δ²/g` over single arms.
    #[default]
    Deterministic,
    /// Sample from the ratio-minimising distribution over arm pairs.
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcidpConfig {
    /// Perceived universes built per exploration sweep.
    pub l_p: usize,
    /// Passes over the grid per perceived universe.
    pub n_init: usize,
    #[serde(skip)]
    pub variant: Variant,
    pub selector: Selector,
    pub generator: GeneratorConfig,
    pub audit: AuditConfig,
    pub weights: WeightRule,
    pub likelihood_floor: f64,
    pub belief_floor: f64,
    /// Lowest-belief universes are dropped beyond this many.
    pub max_universes: usize,
    /// Universe file loaded as vintage universes at start.
    pub vintage: Option<PathBuf>,
    /// Prior weight of a perceived universe relative to an average vintage one.
    pub perceived_prior_ratio: f64,
    /// Summon the generator as soon as a red-card sweep completes.
    pub regenerate_after_red: bool,
    pub verbose_audit: bool,
}

impl Default for AcidpConfig {
    fn default() -> Self {
        Self {
            l_p: 2,
            n_init: 1,
            variant: Variant::Standard,
            selector: Selector::Deterministic,
            generator: GeneratorConfig::default(),
            audit: AuditConfig::default(),
            weights: WeightRule::Relative,
            likelihood_floor: LIKELIHOOD_FLOOR,
            belief_floor: BELIEF_FLOOR,
            max_universes: 30,
            vintage: None,
            perceived_prior_ratio: 2.0,
            regenerate_after_red: true,
            verbose_audit: false,
        }
    }
}

/// Why an exploration sweep is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepReason {
    Start,
    Red,
}

#[derive(Debug, Clone)]
pub enum Phase {
    Initializing {
        run: InitiatorRun,
        reason: SweepReason,
        built: Vec<Universe>,
    },
    Running,
}

/// Information-directed pricing over a multi-universe with market-shift
/// auditing.
///
/// Each round: compute `Δ` and `g`, take the ratio-minimising arm; on a
/// pending yellow card inject counterfactual universes and, once beliefs
/// have converged, possibly start a sweep of audit arms (which then
/// override the selection one per round); on a pending red card re-explore
/// the whole grid and add freshly perceived universes. After the outcome is
/// observed the auditing tests run and beliefs are updated.
#[derive(Debug)]
pub struct Acidp {
    cfg: AcidpConfig,
    grid: PriceGrid,
    mu: MultiUniverse,
    phase: Phase,
    audit: AuditState,
    vintage: Vec<(Universe, f64)>,
    pending_yellow: bool,
    pending_red: bool,
    /// Set by the first yellow card after a sweep; the ε-auditor stands by
    /// from then until the next red card.
    standby: bool,
    auditing_now: bool,
    alert: Alert,
    window_id: Option<u64>,
    log: Vec<String>,
    sweeps: usize,
    red_cards: usize,
    yellow_cards: usize,
}

impl Acidp {
    pub fn new(grid: PriceGrid, cfg: AcidpConfig) -> Result<Self> {
        if cfg.l_p == 0 || cfg.n_init == 0 {
            return Err(Error::config("l_p and n_init must be at least 1"));
        }
        if !(cfg.likelihood_floor >= 0.0)
            || cfg.likelihood_floor * (f64::from(grid.batch_size()) + 1.0) > 1.0
        {
            return Err(Error::config("likelihood floor too large for the batch size"));
        }
        if !(0.0..1.0).contains(&cfg.belief_floor) {
            return Err(Error::config("belief floor must lie in [0, 1)"));
        }
        if cfg.max_universes < cfg.l_p {
            return Err(Error::config("max_universes must be at least l_p"));
        }
        if !(cfg.perceived_prior_ratio > 0.0) {
            return Err(Error::config("perceived_prior_ratio must be positive"));
        }
        let vintage = match &cfg.vintage {
            Some(path) => {
                let v = load_vintage(path)?;
                for (u, _) in &v {
                    if u.arms() != grid.len() || u.batch_size() != grid.batch_size() {
                        return Err(Error::config(format!(
                            "vintage universes in {} do not match the price grid",
                            path.display()
                        )));
                    }
                }
                v
            }
            None => Vec::new(),
        };
        let audit = AuditState::new(cfg.audit.clone())?;
        let mut mu = MultiUniverse::empty(grid.len(), grid.batch_size());
        mu.set_belief_floor(cfg.belief_floor);
        let run = InitiatorRun::new(
            cfg.l_p,
            cfg.n_init,
            grid.len(),
            grid.batch_size(),
            cfg.likelihood_floor,
        )?;
        Ok(Self {
            phase: Phase::Initializing {
                run,
                reason: SweepReason::Start,
                built: Vec::new(),
            },
            grid,
            mu,
            audit,
            vintage,
            pending_yellow: false,
            pending_red: false,
            standby: false,
            auditing_now: false,
            alert: Alert::None,
            window_id: None,
            log: Vec::new(),
            sweeps: 1,
            red_cards: 0,
            yellow_cards: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AcidpConfig {
        &self.cfg
    }

    pub fn multiverse(&self) -> &MultiUniverse {
        &self.mu
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn is_initializing(&self) -> bool {
        matches!(self.phase, Phase::Initializing { .. })
    }

    pub fn audit_state(&self) -> &AuditState {
        &self.audit
    }

    /// `(yellow, red)` cards raised so far.
    pub fn card_counts(&self) -> (usize, usize) {
        (self.yellow_cards, self.red_cards)
    }

    /// Exploration sweeps started so far (including the initial one).
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Queues an alert as if the auditing tests had just raised it.
    pub fn force_alert(&mut self, alert: Alert) {
        match alert {
            Alert::None => {}
            Alert::Yellow => self.pending_yellow = true,
            Alert::Red => {
                self.pending_red = true;
                self.pending_yellow = false;
            }
        }
    }

    fn info_target(&self) -> InfoTarget {
        match self.cfg.variant {
            Variant::Theta => InfoTarget::Universe,
            _ => InfoTarget::OptimalArm,
        }
    }

    fn start_sweep(&mut self, reason: SweepReason) -> Result<()> {
        let run = InitiatorRun::new(
            self.cfg.l_p,
            self.cfg.n_init,
            self.grid.len(),
            self.grid.batch_size(),
            self.cfg.likelihood_floor,
        )?;
        self.phase = Phase::Initializing {
            run,
            reason,
            built: Vec::new(),
        };
        self.audit.reset();
        self.standby = false;
        self.sweeps += 1;
        Ok(())
    }

    fn finish_sweep(&mut self, reason: SweepReason, built: Vec<Universe>) -> Result<()> {
        match reason {
            SweepReason::Start if self.mu.is_empty() => {
                let l_v = self.vintage.len();
                let vintage_total: f64 = self.vintage.iter().map(|(_, p)| p).sum();
                let mut us = Vec::with_capacity(built.len() + l_v);
                let mut ws = Vec::with_capacity(built.len() + l_v);
                for u in built {
                    us.push(u);
                    ws.push(self.cfg.perceived_prior_ratio);
                }
                for (u, p) in self.vintage.drain(..) {
                    // stored beliefs keep their shape; on average a vintage
                    // universe weighs 1 against the perceived ratio
                    let w = if vintage_total > 0.0 {
                        p / vintage_total * l_v as f64
                    } else {
                        1.0
                    };
                    us.push(u);
                    ws.push(w);
                }
                self.mu = MultiUniverse::with_weights(us, ws)?;
                self.mu.set_belief_floor(self.cfg.belief_floor);
            }
            _ => {
                self.mu.inject(built, InjectKind::Red, self.cfg.weights)?;
                // Fresh perceived universes are point masses at large batch
                // sizes; smooth counterfactuals around them keep Bayes alive.
                self.pending_yellow = self.cfg.regenerate_after_red;
            }
        }
        self.prune();
        self.phase = Phase::Running;
        Ok(())
    }

    fn prune(&mut self) {
        let keep: Vec<u64> = self.window_id.into_iter().collect();
        self.mu.prune(self.cfg.max_universes, &keep);
    }

    fn note(&mut self, line: String) {
        if self.cfg.verbose_audit {
            self.log.push(line);
        }
    }

    fn select(&self, rng: &mut dyn RngCore) -> usize {
        let ir = finite_ir(&self.mu, &self.grid, self.info_target());
        match self.cfg.selector {
            Selector::Deterministic => select_deterministic(&ir).arm,
            Selector::Randomized => select_randomized(&ir, rng).0,
        }
    }

    fn window_step(&mut self, obs: &Observation) -> Result<()> {
        if obs.round <= self.cfg.audit.window {
            return Ok(());
        }
        let window = self.audit.window_vec();
        let fit = window_variant_update(
            &self.mu,
            &window,
            *obs,
            &self.grid,
            self.cfg.likelihood_floor,
        )?;
        match self.window_id.and_then(|id| self.mu.position(id).map(|_| id)) {
            Some(id) => self.mu.replace(id, fit.universe)?,
            None => {
                let w = match self.cfg.weights {
                    WeightRule::Relative => self.mu.max_belief(),
                    WeightRule::Literal => 1.0,
                };
                self.window_id = Some(self.mu.insert(fit.universe, w)?);
                self.prune();
            }
        }
        Ok(())
    }
}

impl Policy for Acidp {
    fn name(&self) -> &str {
        self.cfg.variant.key()
    }

    fn hyperparameters(&self) -> String {
        format!("L={},n={}", self.cfg.l_p, self.cfg.n_init)
    }

    fn choose(&mut self, t: usize, rng: &mut dyn RngCore) -> Result<usize> {
        self.auditing_now = false;
        if self.pending_red {
            self.pending_red = false;
            self.pending_yellow = false;
            self.start_sweep(SweepReason::Red)?;
            self.note(format!("round={t} red-sweep start"));
        }
        if let Phase::Initializing { run, .. } = &self.phase {
            return run
                .next_arm()
                .ok_or_else(|| Error::Runtime("exploration sweep out of arms".into()));
        }

        let mut arm = self.select(rng);
        if self.pending_yellow {
            self.pending_yellow = false;
            let fresh = generate(&self.mu, &self.grid, &self.cfg.generator, rng)?;
            let added = fresh.len();
            self.mu.inject(fresh, InjectKind::Yellow, self.cfg.weights)?;
            self.prune();
            self.standby = true;
            self.note(format!("round={t} counterfactuals={added} universes={}", self.mu.len()));
        }
        if self.standby && self.audit.is_converged() && self.audit.is_idle() {
            let eps = self.audit.epsilon();
            if eps > 0.0 && rng.random::<f64>() < eps && self.audit.schedule_sweep(self.grid.len()) {
                self.note(format!("round={t} audit-sweep scheduled epsilon={eps:.3e}"));
            }
        }
        if let Some(a) = self.audit.next_audit_arm() {
            arm = a;
            self.auditing_now = true;
        }
        Ok(arm)
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.alert = Alert::None;
        if obs.arm >= self.grid.len() || obs.demand > self.grid.batch_size() {
            return Err(Error::Runtime(format!(
                "observation outside the grid: arm {}, demand {}",
                obs.arm + 1,
                obs.demand
            )));
        }

        if let Phase::Initializing { run, built, .. } = &mut self.phase {
            if let Some(u) = run.record(obs.arm, obs.demand)? {
                built.push(u);
            }
            let done = run.is_done();
            if !self.mu.is_empty() {
                self.mu.bayes_update(obs.arm, obs.demand)?;
            }
            self.audit.push(*obs);
            if done {
                let phase = std::mem::replace(&mut self.phase, Phase::Running);
                if let Phase::Initializing { reason, built, .. } = phase {
                    self.finish_sweep(reason, built)?;
                }
            }
            return Ok(());
        }

        let n = self.grid.batch_size();
        if self.auditing_now {
            let p0 = self.mu.predictive_demand()[obs.arm];
            self.audit.record_sample(AuditSample {
                round: obs.round,
                arm: obs.arm,
                demand: obs.demand,
                p0,
            });
        }
        self.audit.push(*obs);

        match self.cfg.variant {
            Variant::NoAudit => {}
            Variant::Window => self.window_step(obs)?,
            Variant::Standard | Variant::Theta => {
                if let Some(rep) = self.audit.yellow_check(obs, n) {
                    if rep.yellow {
                        self.alert = Alert::Yellow;
                        self.yellow_cards += 1;
                        self.pending_yellow = true;
                        self.audit.on_yellow();
                        self.note(format!(
                            "round={} arm={} X={:.6} m={} LB={:.6} UB={:.6} yellow",
                            rep.round,
                            rep.arm + 1,
                            rep.x,
                            rep.m,
                            rep.lb,
                            rep.ub
                        ));
                    }
                }
                if let Some(red) = self.audit.finish_sweep(n) {
                    let ps: Vec<String> = red.pvalues.iter().map(|p| format!("{p:.3e}")).collect();
                    self.note(format!(
                        "round={} audit pvalues=[{}] threshold={:.3e} {}",
                        obs.round,
                        ps.join(","),
                        red.threshold,
                        if red.red { "red" } else { "pass" }
                    ));
                    if red.red {
                        self.alert = Alert::Red;
                        self.red_cards += 1;
                        self.pending_red = true;
                        self.pending_yellow = false;
                    } else {
                        self.audit.on_pass();
                    }
                }
            }
        }

        self.mu.bayes_update(obs.arm, obs.demand)?;
        self.audit.track_convergence(self.mu.max_belief());
        Ok(())
    }

    fn last_alert(&self) -> Alert {
        self.alert
    }

    fn drain_audit_log(&mut self) -> Vec<String> {
        std::mem::take(&mut self.log)
    }
}
