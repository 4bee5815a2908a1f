//! Kinematic put-block-in-drawer environment.
//!
//! The workspace is the unit square. A drawer sits on the right side of the
//! table and slides along -x when pulled. Skills succeed geometrically: the
//! skill parameters must land within `position_tolerance` of the skill's
//! target point. Stage rewards are granted once per episode; the env never
//! truncates an episode on its own.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};

pub type Point = [f64; 2];

/// Parameterized motion primitive chosen by the high-level policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SkillId {
    Pull,
    Grasp,
    Push,
    Put,
}

impl SkillId {
    pub const ALL: [SkillId; 4] = [SkillId::Pull, SkillId::Grasp, SkillId::Push, SkillId::Put];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<SkillId> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SkillId::Pull => "pull",
            SkillId::Grasp => "grasp",
            SkillId::Push => "push",
            SkillId::Put => "put",
        }
    }

    /// The meta-task this skill accomplishes when it succeeds.
    pub fn meta_task(self) -> MetaTaskId {
        match self {
            SkillId::Pull => MetaTaskId::OpenDrawer,
            SkillId::Grasp => MetaTaskId::GraspBlock,
            SkillId::Put => MetaTaskId::PutBlock,
            SkillId::Push => MetaTaskId::CloseDrawer,
        }
    }
}

/// One of the four stages of the task, in completion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetaTaskId {
    OpenDrawer,
    GraspBlock,
    PutBlock,
    CloseDrawer,
}

impl MetaTaskId {
    pub const ALL: [MetaTaskId; 4] = [
        MetaTaskId::OpenDrawer,
        MetaTaskId::GraspBlock,
        MetaTaskId::PutBlock,
        MetaTaskId::CloseDrawer,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<MetaTaskId> {
        Self::ALL.get(i).copied()
    }

    pub fn skill(self) -> SkillId {
        match self {
            MetaTaskId::OpenDrawer => SkillId::Pull,
            MetaTaskId::GraspBlock => SkillId::Grasp,
            MetaTaskId::PutBlock => SkillId::Put,
            MetaTaskId::CloseDrawer => SkillId::Push,
        }
    }
}

/// Workspace coordinates that instantiate a skill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillParams {
    pub x: f64,
    pub y: f64,
}

impl SkillParams {
    pub fn new(x: f64, y: f64) -> Self {
        SkillParams { x, y }
    }

    pub fn point(self) -> Point {
        [self.x, self.y]
    }

    pub fn in_workspace(self) -> bool {
        in_unit_square([self.x, self.y])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub skill: SkillId,
    pub params: SkillParams,
}

impl Action {
    pub fn new(skill: SkillId, params: SkillParams) -> Self {
        Action { skill, params }
    }
}

/// Ground-truth object state seen by the parameter policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub block_xy: Point,
    pub drawer_handle_xy: Point,
    /// 0.0 closed, 1.0 open.
    pub drawer_openness: f64,
    pub block_in_drawer: bool,
    pub gripper_holding: bool,
}

impl ObjectState {
    pub const FEATURE_DIM: usize = 7;

    pub fn is_open(&self) -> bool {
        self.drawer_openness >= 0.5
    }

    /// Raw feature vector: block xy, handle xy, openness, block_in_drawer, holding.
    pub fn features(&self) -> [f64; Self::FEATURE_DIM] {
        [
            self.block_xy[0],
            self.block_xy[1],
            self.drawer_handle_xy[0],
            self.drawer_handle_xy[1],
            self.drawer_openness,
            f64::from(u8::from(self.block_in_drawer)),
            f64::from(u8::from(self.gripper_holding)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    StageSuccess,
    InvalidStep,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_obs: ObjectState,
    pub done: bool,
    pub stage_completed: Option<MetaTaskId>,
    pub kind: OutcomeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn center(&self) -> Point {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min[0] < other.max[0]
            && other.min[0] < self.max[0]
            && self.min[1] < other.max[1]
            && other.min[1] < self.max[1]
    }

    pub fn translated(&self, d: Point) -> Rect {
        Rect {
            min: add(self.min, d),
            max: add(self.max, d),
        }
    }

    fn is_well_formed(&self) -> bool {
        self.min.iter().chain(&self.max).all(|v| v.is_finite())
            && self.min[0] <= self.max[0]
            && self.min[1] <= self.max[1]
    }
}

/// Rewards emitted by the stage machine. Only tests change these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    /// Indexed by `MetaTaskId`.
    pub stage: [f64; 4],
    pub invalid_step: f64,
    pub collision: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable {
            stage: [60.0, 70.0, 80.0, 100.0],
            invalid_step: -2.0,
            collision: -8.0,
        }
    }
}

impl RewardTable {
    pub fn scaled(&self, k: f64) -> RewardTable {
        RewardTable {
            stage: self.stage.map(|r| r * k),
            invalid_step: self.invalid_step * k,
            collision: self.collision * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub rng_seed: u64,
    pub position_tolerance: f64,
    /// Closed-drawer footprint. The front edge is the `min.x` side.
    pub drawer_rect: Rect,
    /// Handle offsets relative to the closed front-edge midpoint.
    pub handle_offset_closed: Point,
    pub handle_offset_open: Point,
    pub block_spawn_region: Rect,
    pub rewards: RewardTable,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            rng_seed: 0,
            position_tolerance: 0.1,
            drawer_rect: Rect::new([0.6, 0.4], [0.9, 0.7]),
            handle_offset_closed: [0.0, 0.0],
            handle_offset_open: [-0.15, 0.0],
            block_spawn_region: Rect::new([0.05, 0.05], [0.45, 0.95]),
            rewards: RewardTable::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let tol = self.position_tolerance;
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Config(format!(
                "position_tolerance must be > 0, got {tol}"
            )));
        }
        for (name, r) in [
            ("drawer_rect", &self.drawer_rect),
            ("block_spawn_region", &self.block_spawn_region),
        ] {
            if !r.is_well_formed() || !in_unit_square(r.min) || !in_unit_square(r.max) {
                return Err(Error::Config(format!("{name} must lie within [0,1]^2")));
            }
        }
        if self.block_spawn_region.intersects(&self.drawer_rect) {
            return Err(Error::Config(
                "block_spawn_region overlaps the closed drawer".into(),
            ));
        }
        for open in [false, true] {
            let box_ = self.drawer_box(open);
            if !in_unit_square(self.handle_at(open))
                || !in_unit_square(box_.min)
                || !in_unit_square(box_.max)
            {
                return Err(Error::Config(
                    "drawer handle or open drawer leaves the workspace".into(),
                ));
            }
        }
        let r = &self.rewards;
        if !r
            .stage
            .iter()
            .chain([&r.invalid_step, &r.collision])
            .all(|v| v.is_finite())
        {
            return Err(Error::Config("rewards must be finite".into()));
        }
        Ok(())
    }

    fn front_midpoint(&self) -> Point {
        [self.drawer_rect.min[0], self.drawer_rect.center()[1]]
    }

    /// Drawer displacement between closed and open.
    fn slide(&self) -> Point {
        sub(self.handle_offset_open, self.handle_offset_closed)
    }

    pub fn handle_at(&self, open: bool) -> Point {
        let off = if open {
            self.handle_offset_open
        } else {
            self.handle_offset_closed
        };
        add(self.front_midpoint(), off)
    }

    pub fn drawer_box(&self, open: bool) -> Rect {
        if open {
            self.drawer_rect.translated(self.slide())
        } else {
            self.drawer_rect
        }
    }

    /// Put target: centre of the drawer box at its current position.
    pub fn interior_center(&self, open: bool) -> Point {
        self.drawer_box(open).center()
    }
}

/// Sum of the four stage rewards: the return of a flawless episode.
pub fn max_episode_reward(config: &EnvConfig) -> f64 {
    config.rewards.stage.iter().sum()
}

#[derive(Debug, Clone)]
pub struct DrawerEnv {
    config: EnvConfig,
    state: ObjectState,
    credited: [bool; 4],
}

impl DrawerEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let state = initial_state(&config, config.block_spawn_region.center());
        Ok(DrawerEnv {
            config,
            state,
            credited: [false; 4],
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &ObjectState {
        &self.state
    }

    /// Stages already rewarded in the current episode.
    pub fn credited(&self) -> [bool; 4] {
        self.credited
    }

    /// Closes the drawer, empties the gripper, and spawns the block at a
    /// position drawn from `(config.rng_seed, episode_seed)`.
    pub fn reset(&mut self, episode_seed: u64) -> ObjectState {
        let mut rng = seeded_rng(derive_seed(self.config.rng_seed, episode_seed));
        let region = self.config.block_spawn_region;
        let block = [
            sample_span(&mut rng, region.min[0], region.max[0]),
            sample_span(&mut rng, region.min[1], region.max[1]),
        ];
        self.state = initial_state(&self.config, block);
        self.credited = [false; 4];
        self.state
    }

    pub fn step(&mut self, action: Action) -> StepOutcome {
        let cfg = &self.config;
        let tol = cfg.position_tolerance;
        let rewards = cfg.rewards;
        let p = action.params;
        if !p.x.is_finite() || !p.y.is_finite() || !p.in_workspace() {
            return self.invalid();
        }
        let p = p.point();
        let s = self.state;
        let open = s.is_open();
        let near = |target: Point| dist(p, target) <= tol;

        match action.skill {
            SkillId::Pull => {
                if open || !near(cfg.handle_at(false)) {
                    return self.invalid();
                }
                self.set_drawer(true);
                self.credit(MetaTaskId::OpenDrawer)
            }
            SkillId::Grasp => {
                if s.gripper_holding || s.block_in_drawer || !near(s.block_xy) {
                    return self.invalid();
                }
                self.state.gripper_holding = true;
                self.credit(MetaTaskId::GraspBlock)
            }
            SkillId::Put => {
                if !open && cfg.drawer_box(false).contains(p) {
                    return StepOutcome {
                        reward: rewards.collision,
                        next_obs: self.state,
                        done: false,
                        stage_completed: None,
                        kind: OutcomeKind::Collision,
                    };
                }
                if !open || !s.gripper_holding || !cfg.drawer_box(true).contains(p) {
                    return self.invalid();
                }
                self.state.gripper_holding = false;
                self.state.block_in_drawer = true;
                self.state.block_xy = p;
                self.credit(MetaTaskId::PutBlock)
            }
            SkillId::Push => {
                if !open || !near(cfg.handle_at(true)) {
                    return self.invalid();
                }
                self.set_drawer(false);
                let earlier_done = self.credited[..3].iter().all(|&c| c);
                if s.block_in_drawer && earlier_done {
                    let mut out = self.credit(MetaTaskId::CloseDrawer);
                    out.done = out.kind == OutcomeKind::StageSuccess;
                    out
                } else {
                    self.invalid()
                }
            }
        }
    }

    fn set_drawer(&mut self, open: bool) {
        let cfg = &self.config;
        let was_open = self.state.is_open();
        self.state.drawer_openness = if open { 1.0 } else { 0.0 };
        self.state.drawer_handle_xy = cfg.handle_at(open);
        if self.state.block_in_drawer && was_open != open {
            let d = if open { cfg.slide() } else { sub([0.0, 0.0], cfg.slide()) };
            self.state.block_xy = add(self.state.block_xy, d);
        }
    }

    /// Stage reward on first completion this episode; a redundant success
    /// keeps its physical effect but scores as an invalid step.
    fn credit(&mut self, task: MetaTaskId) -> StepOutcome {
        if self.credited[task.index()] {
            return self.invalid();
        }
        self.credited[task.index()] = true;
        StepOutcome {
            reward: self.config.rewards.stage[task.index()],
            next_obs: self.state,
            done: false,
            stage_completed: Some(task),
            kind: OutcomeKind::StageSuccess,
        }
    }

    fn invalid(&self) -> StepOutcome {
        StepOutcome {
            reward: self.config.rewards.invalid_step,
            next_obs: self.state,
            done: false,
            stage_completed: None,
            kind: OutcomeKind::InvalidStep,
        }
    }
}

fn initial_state(cfg: &EnvConfig, block: Point) -> ObjectState {
    ObjectState {
        block_xy: block,
        drawer_handle_xy: cfg.handle_at(false),
        drawer_openness: 0.0,
        block_in_drawer: false,
        gripper_holding: false,
    }
}

fn sample_span(rng: &mut crate::rng::Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

pub(crate) fn in_unit_square(p: Point) -> bool {
    (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
