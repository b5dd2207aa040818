//! External processes: worlds the agents act in.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, StructureSpec, TransitionEdges};
use crate::planning::Environment;
use crate::prob::{sample_index, ConditionalTable, ProbVector};

pub(crate) fn pv(v: Vec<f64>) -> Result<ProbVector> {
    ProbVector::new(v)
}

pub(crate) fn table(child: usize, parents: Vec<usize>, cols: Vec<Vec<f64>>) -> Result<ConditionalTable> {
    ConditionalTable::new(child, parents, cols.into_iter().map(pv).collect::<Result<_>>()?)
}

fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn check_prob(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Config(format!("{name} = {x} is not a probability")));
    }
    Ok(())
}

/// A world that is itself a factorial POMDP: hidden state evolves by the
/// model's transition tables and emits observations through its likelihood
/// tables. Optionally the model is swapped for another at a scripted step.
#[derive(Debug, Clone)]
pub struct PomdpWorld {
    pub model: GenerativeModel,
    /// Replacement model and the number of completed steps after which it
    /// takes over.
    pub switch: Option<(usize, GenerativeModel)>,
    /// Current external state, one value per factor.
    pub state: Vec<usize>,
    steps: usize,
    initial: GenerativeModel,
}

impl PomdpWorld {
    pub fn new(model: GenerativeModel) -> Self {
        PomdpWorld {
            state: vec![0; model.spec.factor_count()],
            initial: model.clone(),
            model,
            switch: None,
            steps: 0,
        }
    }

    pub fn with_switch(model: GenerativeModel, at: usize, next: GenerativeModel) -> Result<Self> {
        if next.spec.factor_cards != model.spec.factor_cards
            || next.spec.modality_cards != model.spec.modality_cards
            || next.spec.action_card != model.spec.action_card
        {
            return Err(Error::Config("switched model must keep every cardinality".into()));
        }
        let mut w = Self::new(model);
        w.switch = Some((at, next));
        Ok(w)
    }

    /// Sample one observation per modality from the current state.
    pub fn sense(&self, rng: &mut dyn RngCore) -> Vec<usize> {
        (0..self.model.spec.modality_count())
            .map(|m| sample_index(self.model.likelihood_column(m, &self.state).as_slice(), rng))
            .collect()
    }

    /// Next-state distribution per factor under `action`.
    pub fn action_effect(&self, action: usize) -> Vec<&ProbVector> {
        (0..self.state.len())
            .map(|f| self.model.transition_column(f, &self.state, action))
            .collect()
    }
}

impl Environment for PomdpWorld {
    fn observation_cards(&self) -> Vec<usize> {
        self.model.spec.modality_cards.clone()
    }

    fn action_card(&self) -> usize {
        self.model.spec.action_card
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<usize> {
        self.model = self.initial.clone();
        self.steps = 0;
        self.state = self.model.d.iter().map(|d| sample_index(d.as_slice(), rng)).collect();
        self.sense(rng)
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        if action >= self.model.spec.action_card {
            return Err(Error::Domain(format!("action {action} out of range")));
        }
        if let Some((at, next)) = &self.switch {
            if self.steps == *at {
                self.model = next.clone();
            }
        }
        let next: Vec<usize> = self
            .action_effect(action)
            .into_iter()
            .map(|p| sample_index(p.as_slice(), rng))
            .collect();
        self.state = next;
        self.steps += 1;
        Ok(self.sense(rng))
    }
}

/// Grid moves: stay, up, down, left, right.
pub const GRID_ACTIONS: usize = 5;

/// A rectangular grid with walls. The agent observes its cell index
/// (`row · width + col`). A move fails with probability `slip`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<(usize, usize)>,
    pub slip: f64,
    pub start: (usize, usize),
    /// Current `(row, col)`.
    pub position: (usize, usize),
}

impl GridWorld {
    pub fn new(width: usize, height: usize, walls: Vec<(usize, usize)>, slip: f64, start: (usize, usize)) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("grid needs at least one cell".into()));
        }
        check_prob("slip", slip)?;
        let inside = |&(r, c): &(usize, usize)| r < height && c < width;
        if !walls.iter().all(inside) || !inside(&start) || walls.contains(&start) {
            return Err(Error::Config("walls and start must be inside the grid, start not a wall".into()));
        }
        Ok(GridWorld {
            width,
            height,
            walls,
            slip,
            start,
            position: start,
        })
    }

    pub fn cell(&self, (r, c): (usize, usize)) -> usize {
        r * self.width + c
    }

    /// Where `action` leads from `from` when it does not slip.
    pub fn target(&self, from: (usize, usize), action: usize) -> (usize, usize) {
        let (r, c) = from;
        let to = match action {
            1 if r > 0 => (r - 1, c),
            2 if r + 1 < self.height => (r + 1, c),
            3 if c > 0 => (r, c - 1),
            4 if c + 1 < self.width => (r, c + 1),
            _ => from,
        };
        if self.walls.contains(&to) {
            from
        } else {
            to
        }
    }

    /// The grid as a one-factor POMDP with an identity likelihood.
    pub fn to_model(&self) -> Result<GenerativeModel> {
        let n = self.width * self.height;
        let spec = StructureSpec {
            label: "grid".into(),
            factor_cards: vec![n],
            modality_cards: vec![n],
            likelihood_edges: vec![vec![0]],
            transitions: vec![TransitionEdges::controlled()],
            action_card: GRID_ACTIONS,
        };
        let mut cols = Vec::with_capacity(n * GRID_ACTIONS);
        for j in 0..n {
            for a in 0..GRID_ACTIONS {
                let from = (j / self.width, j % self.width);
                let mut v = one_hot(n, j);
                let to = self.cell(self.target(from, a));
                v[j] -= 1.0 - self.slip;
                v[to] += 1.0 - self.slip;
                cols.push(v);
            }
        }
        let b = table(n, vec![n, GRID_ACTIONS], cols)?;
        let a = table(n, vec![n], (0..n).map(|j| one_hot(n, j)).collect())?;
        GenerativeModel::new(spec, vec![a], vec![b], vec![vec![0.0; n]], vec![pv(one_hot(n, self.cell(self.start)))?], None)
    }
}

impl Environment for GridWorld {
    fn observation_cards(&self) -> Vec<usize> {
        vec![self.width * self.height]
    }

    fn action_card(&self) -> usize {
        GRID_ACTIONS
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<usize> {
        self.position = self.start;
        vec![self.cell(self.position)]
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        if action >= GRID_ACTIONS {
            return Err(Error::Domain(format!("action {action} out of range")));
        }
        let slipped = sample_index(&[1.0 - self.slip, self.slip], rng) == 1;
        if !slipped {
            self.position = self.target(self.position, action);
        }
        Ok(vec![self.cell(self.position)])
    }
}

/// Two arms behind a start cell. Observations: location (start, arm 0,
/// arm 1) and reward (none, win, loss). Arm 0 wins with `reward_prob`,
/// arm 1 with `1 − reward_prob`. Action `a` walks to arm `a`.
pub fn bandit(reward_prob: f64) -> Result<GenerativeModel> {
    check_prob("reward_prob", reward_prob)?;
    let spec = StructureSpec {
        label: "bandit".into(),
        factor_cards: vec![3],
        modality_cards: vec![3, 3],
        likelihood_edges: vec![vec![0], vec![0]],
        transitions: vec![TransitionEdges::controlled()],
        action_card: 2,
    };
    let p = reward_prob;
    let loc = table(3, vec![3], (0..3).map(|j| one_hot(3, j)).collect())?;
    let reward = table(3, vec![3], vec![vec![1.0, 0.0, 0.0], vec![0.0, p, 1.0 - p], vec![0.0, 1.0 - p, p]])?;
    let b = table(3, vec![3, 2], (0..6).map(|i| one_hot(3, 1 + i % 2)).collect())?;
    GenerativeModel::new(
        spec,
        vec![loc, reward],
        vec![b],
        vec![vec![0.0; 3], vec![0.0, 2.0, -2.0]],
        vec![pv(one_hot(3, 0))?],
        None,
    )
}

/// T-maze locations.
pub const TMAZE_CENTER: usize = 0;
pub const TMAZE_CUE: usize = 1;
pub const TMAZE_LEFT: usize = 2;
pub const TMAZE_RIGHT: usize = 3;

/// The T-maze with an information cue.
///
/// Factors: location (center, cue, left, right), controlled, with absorbing
/// arms; context (reward on the left or on the right), constant. Action `a`
/// walks to location `a`. Modalities: location; cue (none, says left, says
/// right), informative only at the cue location with accuracy
/// `cue_accuracy`; reward (none, win, loss), winning with `reward_prob` in
/// the arm the context favours and `1 − reward_prob` in the other.
pub fn tmaze(cue_accuracy: f64, reward_prob: f64) -> Result<GenerativeModel> {
    check_prob("cue_accuracy", cue_accuracy)?;
    check_prob("reward_prob", reward_prob)?;
    let spec = StructureSpec {
        label: "t-maze".into(),
        factor_cards: vec![4, 2],
        modality_cards: vec![4, 3, 3],
        likelihood_edges: vec![vec![0], vec![0, 1], vec![0, 1]],
        transitions: vec![TransitionEdges::controlled(), TransitionEdges::autonomous()],
        action_card: 4,
    };
    let loc = table(4, vec![4], (0..4).map(|j| one_hot(4, j)).collect())?;
    let mut cue = Vec::new();
    let mut reward = Vec::new();
    for l in 0..4 {
        for ctx in 0..2 {
            cue.push(if l == TMAZE_CUE {
                let mut v = vec![0.0; 3];
                v[1 + ctx] = cue_accuracy;
                v[2 - ctx] = 1.0 - cue_accuracy;
                v
            } else {
                one_hot(3, 0)
            });
            reward.push(match l {
                TMAZE_LEFT | TMAZE_RIGHT => {
                    let good = (l == TMAZE_LEFT) == (ctx == 0);
                    let win = if good { reward_prob } else { 1.0 - reward_prob };
                    vec![0.0, win, 1.0 - win]
                }
                _ => one_hot(3, 0),
            });
        }
    }
    let mut moves = Vec::new();
    for l in 0..4 {
        for a in 0..4 {
            let arm = l == TMAZE_LEFT || l == TMAZE_RIGHT;
            moves.push(one_hot(4, if arm { l } else { a }));
        }
    }
    GenerativeModel::new(
        spec,
        vec![loc, table(3, vec![4, 2], cue)?, table(3, vec![4, 2], reward)?],
        vec![table(4, vec![4, 4], moves)?, table(2, vec![2], vec![one_hot(2, 0), one_hot(2, 1)])?],
        vec![vec![0.0; 4], vec![0.0; 3], vec![0.0, 3.0, -3.0]],
        vec![pv(one_hot(4, TMAZE_CENTER))?, pv(vec![0.5, 0.5])?],
        None,
    )
}

/// Trap-world locations and actions.
pub const TRAP_START: usize = 0;
pub const TRAP_SAFE: usize = 1;
pub const TRAP_HIGH: usize = 2;
pub const TRAP_TRAP: usize = 3;
pub const TRAP_GO_SAFE: usize = 1;
pub const TRAP_GAMBLE: usize = 2;

/// From the start the agent can stay, walk to a safe cell, or gamble on a
/// fair coin between a high cell and a trap. Every other cell absorbs.
/// Outcome utilities are `safe = 1`, `high = 1 + spread`,
/// `trap = 1 − spread`, `start = start_utility`, so the gamble matches the
/// safe cell in expected utility. Preferences are proportional to utility.
pub fn trap_world(spread: f64, start_utility: f64) -> Result<GenerativeModel> {
    if !(0.0 < spread && spread < 1.0) || !(start_utility > 0.0) {
        return Err(Error::Config("need 0 < spread < 1 and a positive start utility".into()));
    }
    let spec = StructureSpec {
        label: "trap".into(),
        factor_cards: vec![4],
        modality_cards: vec![4],
        likelihood_edges: vec![vec![0]],
        transitions: vec![TransitionEdges::controlled()],
        action_card: 3,
    };
    let mut cols = Vec::new();
    for l in 0..4 {
        for a in 0..3 {
            cols.push(match (l, a) {
                (TRAP_START, TRAP_GO_SAFE) => one_hot(4, TRAP_SAFE),
                (TRAP_START, TRAP_GAMBLE) => vec![0.0, 0.0, 0.5, 0.5],
                _ => one_hot(4, l),
            });
        }
    }
    let utilities = [start_utility, 1.0, 1.0 + spread, 1.0 - spread];
    GenerativeModel::new(
        spec,
        vec![table(4, vec![4], (0..4).map(|j| one_hot(4, j)).collect())?],
        vec![table(4, vec![4, 3], cols)?],
        vec![utilities.iter().map(|u| u.ln()).collect()],
        vec![pv(one_hot(4, TRAP_START))?],
        None,
    )
}

fn sticky(k: usize, stickiness: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut v = vec![(1.0 - stickiness) / (k - 1) as f64; k];
            v[j] = stickiness;
            v
        })
        .collect()
}

fn noisy_identity(k: usize, noise: f64) -> Vec<Vec<f64>> {
    sticky(k, 1.0 - noise)
}

/// The fixed structure used for structure recovery: two binary factors
/// evolving on their own, each seen through its own binary channel.
pub fn two_chain_spec() -> StructureSpec {
    StructureSpec {
        label: "two-chains".into(),
        factor_cards: vec![2, 2],
        modality_cards: vec![2, 2],
        likelihood_edges: vec![vec![0], vec![1]],
        transitions: vec![TransitionEdges::autonomous(), TransitionEdges::autonomous()],
        action_card: 1,
    }
}

pub fn two_chains(stickiness: f64, noise: f64) -> Result<GenerativeModel> {
    check_prob("stickiness", stickiness)?;
    check_prob("noise", noise)?;
    let spec = two_chain_spec();
    let a = (0..2).map(|_| table(2, vec![2], noisy_identity(2, noise))).collect::<Result<_>>()?;
    let b = (0..2)
        .map(|_| table(2, vec![2], sticky(2, stickiness)))
        .collect::<Result<_>>()?;
    GenerativeModel::new(spec, a, b, vec![vec![0.0; 2]; 2], vec![pv(vec![0.5, 0.5])?; 2], None)
}

/// After the switch the second chain copies the first one's previous state
/// with probability `coupling` instead of evolving on its own.
pub fn coupled_chains(coupling: f64, stickiness: f64, noise: f64) -> Result<GenerativeModel> {
    check_prob("coupling", coupling)?;
    let base = two_chains(stickiness, noise)?;
    let mut spec = base.spec.clone();
    spec.label = "coupled-chains".into();
    spec.transitions[1] = TransitionEdges {
        action_dependent: false,
        parents: vec![0],
    };
    // Parents: own previous state, then the first chain's.
    let mut cols = Vec::new();
    for _own in 0..2 {
        for other in 0..2 {
            let mut v = vec![1.0 - coupling; 2];
            v[other] = coupling;
            cols.push(v);
        }
    }
    GenerativeModel::new(
        spec,
        base.a.clone(),
        vec![base.b[0].clone(), table(2, vec![2, 2], cols)?],
        base.c.clone(),
        base.d.clone(),
        None,
    )
}

/// Positions of the target in the rescue and obedience worlds.
pub const SAFE: usize = 0;
pub const EDGE: usize = 1;
pub const PIT: usize = 2;

/// Empath actions.
pub const WAIT: usize = 0;
pub const HELP: usize = 1;

/// Obedience outcomes.
pub const NO_COMMAND: usize = 0;
pub const FOLLOWED: usize = 1;
pub const IGNORED: usize = 2;

/// Parameters shared by the rescue and obedience worlds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescueParams {
    /// Probability of drifting from safe to the edge.
    pub drift_to_edge: f64,
    /// Probability of falling from the edge into the pit.
    pub drift_to_pit: f64,
    /// Probability of climbing out of the pit unaided.
    pub climb_out: f64,
    /// Probability that help (a pull, or an obeyed command) moves the
    /// target one position back.
    pub help_success: f64,
    /// Probability that the empath's sighting of the target is wrong.
    pub sighting_noise: f64,
    /// Probability that the target feels comfortable, per position.
    pub comfort: [f64; 3],
    /// Where the target believes it will be at every next step.
    pub target_expects: [f64; 3],
}

impl Default for RescueParams {
    fn default() -> Self {
        RescueParams {
            drift_to_edge: 0.3,
            drift_to_pit: 0.5,
            climb_out: 0.1,
            help_success: 0.8,
            sighting_noise: 0.1,
            comfort: [0.95, 0.7, 0.1],
            target_expects: [0.9, 0.08, 0.02],
        }
    }
}

impl RescueParams {
    pub fn check(&self) -> Result<()> {
        for (name, x) in [
            ("drift_to_edge", self.drift_to_edge),
            ("drift_to_pit", self.drift_to_pit),
            ("climb_out", self.climb_out),
            ("help_success", self.help_success),
            ("sighting_noise", self.sighting_noise),
        ] {
            check_prob(name, x)?;
        }
        for &c in &self.comfort {
            check_prob("comfort", c)?;
        }
        pv(self.target_expects.to_vec()).map_err(|e| Error::Config(format!("target_expects: {e}")))?;
        Ok(())
    }

    /// Next-position distribution without help.
    pub fn drift(&self, pos: usize) -> Vec<f64> {
        match pos {
            SAFE => vec![1.0 - self.drift_to_edge, self.drift_to_edge, 0.0],
            EDGE => vec![0.0, 1.0 - self.drift_to_pit, self.drift_to_pit],
            _ => vec![0.0, self.climb_out, 1.0 - self.climb_out],
        }
    }

    /// Next-position distribution when help is given.
    pub fn helped(&self, pos: usize) -> Vec<f64> {
        let back = one_hot(3, pos.saturating_sub(1));
        self.drift(pos)
            .iter()
            .zip(&back)
            .map(|(d, b)| self.help_success * b + (1.0 - self.help_success) * d)
            .collect()
    }

    /// The target's own model: it senses comfort or pain and believes it
    /// will always be where `target_expects` says, whatever happened before.
    pub fn target_model(&self) -> Result<GenerativeModel> {
        let spec = StructureSpec {
            label: "target".into(),
            factor_cards: vec![3],
            modality_cards: vec![2],
            likelihood_edges: vec![vec![0]],
            transitions: vec![TransitionEdges::autonomous()],
            action_card: 1,
        };
        let a = table(2, vec![3], self.comfort.iter().map(|&c| vec![c, 1.0 - c]).collect())?;
        let b = table(3, vec![3], vec![self.target_expects.to_vec(); 3])?;
        GenerativeModel::new(spec, vec![a], vec![b], vec![vec![0.0, 0.0]], vec![pv(self.target_expects.to_vec())?], None)
    }

    /// The empath's model of the rescue world: the target's position,
    /// moved by drift or by a pull, seen through a noisy sighting.
    pub fn empath_model(&self) -> Result<GenerativeModel> {
        let spec = StructureSpec {
            label: "rescue".into(),
            factor_cards: vec![3],
            modality_cards: vec![3],
            likelihood_edges: vec![vec![0]],
            transitions: vec![TransitionEdges::controlled()],
            action_card: 2,
        };
        let mut cols = Vec::new();
        for pos in 0..3 {
            cols.push(self.drift(pos));
            cols.push(self.helped(pos));
        }
        GenerativeModel::new(
            spec,
            vec![table(3, vec![3], noisy_identity(3, self.sighting_noise))?],
            vec![table(3, vec![3, 2], cols)?],
            vec![vec![0.0; 3]],
            vec![pv(one_hot(3, SAFE))?],
            None,
        )
    }
}

/// The target sits inside the world; the empath sees it only through its
/// sensors. With `obedience` the help action is a command the target obeys
/// with probability `help_success`, and a second observation reports
/// whether a command was followed.
#[derive(Debug, Clone)]
pub struct RescueWorld {
    pub params: RescueParams,
    pub obedience: bool,
    pub position: usize,
    /// The target's last sensation: 0 comfort, 1 pain.
    pub sensation: usize,
    target: GenerativeModel,
    sighting: Vec<Vec<f64>>,
}

impl RescueWorld {
    pub fn new(params: RescueParams, obedience: bool) -> Result<Self> {
        params.check()?;
        Ok(RescueWorld {
            target: params.target_model()?,
            sighting: noisy_identity(3, params.sighting_noise),
            params,
            obedience,
            position: SAFE,
            sensation: 0,
        })
    }

    pub fn target_model(&self) -> &GenerativeModel {
        &self.target
    }

    fn observe(&mut self, outcome: Option<usize>, rng: &mut dyn RngCore) -> Vec<usize> {
        let c = self.params.comfort[self.position];
        self.sensation = sample_index(&[c, 1.0 - c], rng);
        let seen = sample_index(&self.sighting[self.position], rng);
        match outcome {
            Some(o) => vec![seen, o],
            None => vec![seen],
        }
    }
}

impl Environment for RescueWorld {
    fn observation_cards(&self) -> Vec<usize> {
        if self.obedience {
            vec![3, 3]
        } else {
            vec![3]
        }
    }

    fn action_card(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<usize> {
        self.position = SAFE;
        let outcome = self.obedience.then_some(NO_COMMAND);
        self.observe(outcome, rng)
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        if action >= 2 {
            return Err(Error::Domain(format!("action {action} out of range")));
        }
        let drift = self.params.drift(self.position);
        let (next, outcome) = if action == WAIT {
            (sample_index(&drift, rng), NO_COMMAND)
        } else if self.obedience {
            if sample_index(&[self.params.help_success, 1.0 - self.params.help_success], rng) == 0 {
                (self.position.saturating_sub(1), FOLLOWED)
            } else {
                (sample_index(&drift, rng), IGNORED)
            }
        } else {
            (sample_index(&self.params.helped(self.position), rng), NO_COMMAND)
        };
        self.position = next;
        let outcome = self.obedience.then_some(outcome);
        Ok(self.observe(outcome, rng))
    }
}
