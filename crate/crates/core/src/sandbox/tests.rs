use super::*;
use crate::inference::{exact_point_log_evidence, DataBatch};
use crate::planning::Every;
use rand::SeedableRng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn grid_moves_and_walls() {
    let mut g = GridWorld::new(3, 3, vec![(0, 2)], 0.0, (1, 1)).unwrap();
    let mut r = rng(0);
    assert_eq!(g.reset(&mut r), vec![4]);
    assert_eq!(g.step(4, &mut r).unwrap(), vec![5]);
    assert_eq!(g.position, (1, 2));
    // Up from (1, 2) is the wall at (0, 2).
    assert_eq!(g.step(1, &mut r).unwrap(), vec![5]);
    // Right edge.
    assert_eq!(g.step(4, &mut r).unwrap(), vec![5]);
    assert_eq!(g.step(2, &mut r).unwrap(), vec![8]);
    assert!(g.step(GRID_ACTIONS, &mut r).is_err());
    assert!(GridWorld::new(2, 2, vec![(0, 0)], 0.0, (0, 0)).is_err());
    assert!(GridWorld::new(2, 2, vec![], 1.5, (0, 0)).is_err());

    let m = g.to_model().unwrap();
    // From cell 4, "up" lands in cell 1.
    assert_eq!(m.b[0].column(&[4, 1]).as_slice()[1], 1.0);
}

#[test]
fn grid_slip_frequency() {
    let slip = 0.2;
    let mut g = GridWorld::new(2, 1, vec![], slip, (0, 0)).unwrap();
    let mut r = rng(11);
    g.reset(&mut r);
    let n = 100_000;
    let mut slipped = 0usize;
    for _ in 0..n {
        let before = g.position;
        let action = if before.1 == 0 { 4 } else { 3 };
        g.step(action, &mut r).unwrap();
        if g.position == before {
            slipped += 1;
        }
    }
    let freq = slipped as f64 / n as f64;
    let se = (slip * (1.0 - slip) / n as f64).sqrt();
    assert!((freq - slip).abs() < 3.0 * se, "{freq}");
}

#[test]
fn pomdp_world_is_seeded_and_switches() {
    let m = two_chains(0.9, 0.1).unwrap();
    let next = coupled_chains(1.0, 0.9, 0.1).unwrap();
    let run = |seed| {
        let mut w = PomdpWorld::with_switch(m.clone(), 3, next.clone()).unwrap();
        let mut r = rng(seed);
        let mut obs = vec![w.reset(&mut r)];
        for _ in 0..10 {
            obs.push(w.step(0, &mut r).unwrap());
        }
        (obs, w.model.spec.label.clone())
    };
    let (a, label) = run(3);
    assert_eq!(a, run(3).0);
    assert_eq!(label, "coupled-chains");
    let mut w = PomdpWorld::new(m.clone());
    assert!(w.step(1, &mut rng(0)).is_err());
    assert!(PomdpWorld::with_switch(m, 1, bandit(0.8).unwrap()).is_err());
}

#[test]
fn constant_target_repeats_its_action() {
    let model = bandit(0.7).unwrap();
    let mut t = TargetAgent::new(model, vec![vec![0.0; 3]; 2], TargetScript::Constant { action: 1 }).unwrap();
    let mut r = rng(0);
    for _ in 0..5 {
        assert_eq!(scripted_target_step(&mut t, &mut r).unwrap(), 1);
    }
    let model = bandit(0.7).unwrap();
    assert!(TargetAgent::new(model, vec![vec![0.0; 3]; 2], TargetScript::Constant { action: 2 }).is_err());
}

fn mover(stick: f64) -> GenerativeModel {
    use crate::genmodel::TransitionEdges;
    let spec = StructureSpec {
        label: "mover".into(),
        factor_cards: vec![2],
        modality_cards: vec![2],
        likelihood_edges: vec![vec![0]],
        transitions: vec![TransitionEdges::controlled()],
        action_card: 2,
    };
    let mut cols = Vec::new();
    for _ in 0..2 {
        for a in 0..2 {
            let mut v = vec![1.0 - stick; 2];
            v[a] = stick;
            cols.push(v);
        }
    }
    GenerativeModel::new(
        spec,
        vec![worlds::table(2, vec![2], vec![vec![0.95, 0.05], vec![0.05, 0.95]]).unwrap()],
        vec![worlds::table(2, vec![2, 2], cols).unwrap()],
        vec![vec![0.0; 2]],
        vec![ProbVector::uniform(2).unwrap()],
        None,
    )
    .unwrap()
}

/// Target and world share a model; returns the target's surprises and the
/// history it saw.
fn live(prefs: Vec<f64>, steps: usize, seed: u64) -> (Vec<f64>, DataBatch) {
    let model = mover(0.9);
    let mut world = PomdpWorld::new(model.clone());
    let script = TargetScript::Efe {
        horizon: 1,
        temperature: 0.0,
    };
    let mut t = TargetAgent::new(model, vec![prefs], script).unwrap();
    let mut r = rng(seed);
    let mut obs = world.reset(&mut r);
    let mut data = DataBatch::new(vec![obs.clone()], vec![]).unwrap();
    for step in 0..steps {
        t.observe(&obs).unwrap();
        if step + 1 == steps {
            break;
        }
        let a = scripted_target_step(&mut t, &mut r).unwrap();
        obs = world.step(a, &mut r).unwrap();
        data.push(a, obs.clone());
    }
    (t.harms.clone(), data)
}

#[test]
fn satisfiable_target_settles() {
    let mut before = 0.0;
    let mut after = 0.0;
    for seed in 0..20 {
        let (h, _) = live(vec![3.0, 0.0], 30, seed);
        before += h[0];
        after += h[20..].iter().sum::<f64>() / 10.0;
    }
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn target_surprise_is_exact_evidence() {
    // Preferences on an outcome the world rarely emits: the accumulated
    // surprise still equals the enumeration oracle's evidence.
    let (h, data) = live(vec![0.0, 0.0], 12, 4);
    let total: f64 = h.iter().sum();
    let exact = exact_point_log_evidence(&mover(0.9), &data).unwrap();
    assert!((total + exact).abs() < 1e-9);
    for t in 1..=data.len() {
        let floor = -exact_point_log_evidence(&mover(0.9), &data.prefix(t)).unwrap();
        assert!(h[..t].iter().sum::<f64>() >= floor - 1e-9);
    }
}

fn quick(world: WorldConfig, steps: usize) -> Scenario {
    Scenario::new("test", 5, steps, world)
}

#[test]
fn zero_steps_give_empty_outputs() {
    for world in [
        WorldConfig::Bandit { reward_prob: 0.8 },
        WorldConfig::Rescue {
            params: RescueParams::default(),
        },
        WorldConfig::Obedience {
            params: RescueParams::default(),
        },
    ] {
        let out = run_scenario(&quick(world, 0)).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.metrics, Metrics::default());
    }
}

#[test]
fn structure_recovery_produces_weight_curve() {
    let mut s = quick(
        WorldConfig::StructureRecovery {
            stickiness: 0.9,
            noise: 0.1,
        },
        12,
    );
    s.agent.structure.particles = 3;
    s.agent.structure.fit_restarts = 1;
    s.agent.schedule.structure_every = Every::Steps(6);
    let out = run_scenario(&s).unwrap();
    assert_eq!(out.metrics.weight_on_true.len(), 12);
    assert_eq!(out.metrics.free_energy.len(), 12);
    assert!(out.metrics.weight_on_true.iter().all(|w| (0.0..=1.0).contains(w)));
    assert_eq!(out.posterior.unwrap().particles.len(), 3);
}

#[test]
fn bandit_agent_prefers_the_winning_arm() {
    let mut s = quick(WorldConfig::Bandit { reward_prob: 0.9 }, 40);
    let efe = run_scenario(&s).unwrap();
    s.agent.controller = Controller::Random;
    let random = run_scenario(&s).unwrap();
    let a = efe.metrics.preferred_outcome_rate.unwrap();
    let b = random.metrics.preferred_outcome_rate.unwrap();
    assert!(a > b, "{a} vs {b}");
}

#[test]
fn rescue_empath_beats_random() {
    let mut wins = 0;
    for seed in 0..5 {
        let mut s = quick(
            WorldConfig::Rescue {
                params: RescueParams::default(),
            },
            40,
        );
        s.seed = seed;
        s.agent.schedule.action_temperature = 1e-9;
        let empath = run_scenario(&s).unwrap();
        s.agent.controller = Controller::Random;
        let random = run_scenario(&s).unwrap();
        if empath.metrics.mean_harm[0] < random.metrics.mean_harm[0] {
            wins += 1;
        }
        let rec = empath.trace.records[3].harm.as_ref().unwrap();
        assert_eq!(rec.realized.len(), 1);
        assert!((rec.bins[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(wins, 5);
}

#[test]
fn rescue_harm_model_orders_positions() {
    let hm = rescue_harm_model(&RescueParams::default(), 8).unwrap();
    let h = expected_harm(&hm);
    assert!(h[SAFE] < h[EDGE] && h[EDGE] < h[PIT]);
}

#[test]
fn obedience_learns_to_value_compliance() {
    let mut s = quick(
        WorldConfig::Obedience {
            params: RescueParams::default(),
        },
        30,
    );
    s.empath.training_episodes = 5;
    let out = run_scenario(&s).unwrap();
    let aux = out.metrics.aux_preferences.unwrap();
    assert!(aux[0][FOLLOWED] > aux[0][IGNORED]);
    assert_eq!(out.trace.len(), 150);
    assert!(out.trace.records.windows(2).all(|w| w[1].step == w[0].step + 1));
}

#[test]
fn runs_are_deterministic() {
    for world in [
        WorldConfig::TMaze {
            cue_accuracy: 0.95,
            reward_prob: 0.8,
        },
        WorldConfig::Rescue {
            params: RescueParams::default(),
        },
    ] {
        let s = quick(world, 15);
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a.trace.to_jsonl().unwrap(), b.trace.to_jsonl().unwrap());
        assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
    }
}

#[test]
fn config_round_trip_and_rejections() {
    let text = r#"
schema = "inferno-config/1"
name = "switch"
seed = 3
steps = 50

[world]
kind = "switching"
stickiness = 0.9
noise = 0.1
coupling = 0.95
switch_at = 25

[agent.schedule]
structure_every = 10
reduce_every = "never"
"#;
    let s = Scenario::from_toml(text).unwrap();
    assert_eq!(s.agent.schedule.structure_every, Every::Steps(10));
    assert_eq!(Scenario::from_toml(&s.to_toml().unwrap()).unwrap(), s);

    let unknown = text.replace("noise = 0.1", "noise = 0.1\ncolour = 1");
    assert!(matches!(Scenario::from_toml(&unknown), Err(Error::Config(_))));
    let top = format!("{text}\nextra = 1\n").replace("steps = 50", "steps = 50\nbogus = 2");
    assert!(matches!(Scenario::from_toml(&top), Err(Error::Config(_))));
    let version = text.replace("inferno-config/1", "inferno-config/9");
    assert!(matches!(Scenario::from_toml(&version), Err(Error::Config(_))));
    let bad = text.replace("stickiness = 0.9", "stickiness = 1.9");
    assert!(matches!(Scenario::from_toml(&bad), Err(Error::Config(_))));

    let rescue = "schema = \"inferno-config/1\"\nname = \"r\"\nsteps = 5\n[world]\nkind = \"rescue\"\n[world.params]\nhelp_success = 0.5\n";
    let s = Scenario::from_toml(rescue).unwrap();
    match s.world {
        WorldConfig::Rescue { params } => assert_eq!(params.help_success, 0.5),
        _ => panic!("wrong world"),
    }
}

#[test]
fn data_file_round_trip_and_errors() {
    let data = DataBatch::new(vec![vec![0, 1], vec![1, 1], vec![1, 0]], vec![0, 2]).unwrap();
    let file = DataFile::new(vec![2, 2], 3, data).unwrap();
    let text = serialize_data(&file);
    assert!(text.starts_with("inferno-data/1\n"));
    assert_eq!(deserialize_data(&text).unwrap(), file);

    let cases = [
        text.replace("inferno-data/1", "inferno-data/2"),
        text.replace("o 1 0", "o 1 2"),
        text.replace("a 2", "a 3"),
        text.replace("o 1 1", "o 1"),
        text.replace("end\n", ""),
        format!("{text}o 0 0\n"),
    ];
    for bad in cases {
        assert!(matches!(deserialize_data(&bad), Err(Error::Parse { .. })), "{bad}");
    }
}

#[test]
fn metrics_csv_and_plotdata() {
    let m = Metrics {
        steps: 2,
        mean_harm: vec![0.5],
        weight_on_true: vec![0.25, 0.75],
        harm: vec![vec![0.1, 0.9]],
        ..Metrics::default()
    };
    let csv = m.to_csv();
    assert!(csv.contains("mean_harm_0,0.5\n"));
    assert!(csv.contains("final_weight_on_true,0.75\n"));
    let files = m.plotdata();
    assert_eq!(files.len(), 2);
    assert_eq!(files[0].1, "step,weight\n0,0.25\n1,0.75\n");
}
