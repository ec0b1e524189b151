use yagitrack::ekf::FilterState;
use yagitrack::io::detections::{emission_rng, simulate_scenario, synthesize_detections};
use yagitrack::io::validation::validation_scenario;
use yagitrack::io::Detection;
use yagitrack::observation::xi;
use yagitrack::tracker::{enumerate_initial_states, handle_gap, score_track, select_initial_state};
use yagitrack::{track, StateVector, TowerSite, TrackerConfig};

struct Run {
    towers: Vec<TowerSite>,
    config: TrackerConfig,
    truth: Vec<(f64, StateVector)>,
    detections: Vec<Detection>,
}

fn validation_run(seed: u64) -> Run {
    let scenario = validation_scenario(seed);
    let towers = scenario.sites().unwrap();
    let truth = simulate_scenario(&scenario).unwrap();
    let detections = synthesize_detections(&truth, &scenario, &towers, &mut emission_rng(seed)).unwrap();
    Run {
        towers,
        config: scenario.tracker_config(),
        truth,
        detections,
    }
}

fn truth_at(run: &Run, t: f64) -> StateVector {
    run.truth.iter().find(|(tt, _)| (tt - t).abs() < 1e-6).unwrap().1
}

fn usable(run: &Run) -> Vec<Detection> {
    run.detections
        .iter()
        .filter(|d| f64::from(d.z) >= run.config.z_threshold)
        .cloned()
        .collect()
}

#[test]
fn enumeration_contains_the_generating_position() {
    let run = validation_run(4);
    let config = &run.config;
    let rx = &config.receiver;
    let tower = &run.towers[0];
    let start = run
        .truth
        .iter()
        .position(|(_, s)| (s.x - tower.x).hypot(s.y - tower.y) > 2000.0)
        .unwrap();
    // Noise-free readings at the assumed altitude, rounded to the display
    // resolution.
    let at_z0 = |s: &StateVector| StateVector::with_altitude(s.x, s.vx, s.y, s.vy, config.z0);
    let noiseless: Vec<Detection> = run.truth[start..start + 2]
        .iter()
        .map(|(t, s)| {
            let s = &at_z0(s);
            let beam = tower.best_beam(s.x, s.y);
            let z = rx.display_from_xi(xi(s, tower, beam, &config.pattern).unwrap()).round();
            Detection {
                tag_id: "sim".into(),
                t: *t,
                tower_id: tower.id.clone(),
                beam_index: beam,
                z: z as u8,
            }
        })
        .collect();
    let cands = enumerate_initial_states(&noiseless[0], &noiseless[1], &run.towers, config).unwrap();
    let s0 = run.truth[start].1;
    let r = (s0.x - tower.x).hypot(s0.y - tower.y);
    let nearest = cands
        .iter()
        .map(|c| (c.x - s0.x).hypot(c.y - s0.y))
        .fold(f64::INFINITY, f64::min);
    assert!(nearest < 0.01 * r + 5.0, "nearest candidate {nearest} m from the truth at range {r} m");
    assert!(cands.iter().all(|c| c.vx.hypot(c.vy) <= config.v_max + 1e-9));
}

#[test]
fn candidate_nearest_truth_wins_selection() {
    let trials = 50;
    let mut wins = 0;
    for seed in 1..=trials {
        let run = validation_run(seed);
        let u = usable(&run);
        let cands = enumerate_initial_states(&u[0], &u[1], &run.towers, &run.config).unwrap();
        let (t0, t1) = (truth_at(&run, u[0].t), truth_at(&run, u[1].t));
        let dt = u[1].t - u[0].t;
        // Distance of the candidate pair from the true positions at both
        // initialising instants.
        let miss = |c: &StateVector| {
            (c.x - t0.x)
                .hypot(c.y - t0.y)
                .hypot((c.x + c.vx * dt - t1.x).hypot(c.y + c.vy * dt - t1.y))
        };
        let nearest = *cands.iter().min_by(|a, b| miss(a).total_cmp(&miss(b))).unwrap();
        let (chosen, _) = select_initial_state(&cands, &run.detections, &run.towers, &run.config).unwrap();
        wins += usize::from(chosen == nearest);
    }
    assert!(
        wins * 5 >= trials as usize * 4,
        "nearest candidate selected in {wins} of {trials} trials"
    );
}

#[test]
fn single_candidate_is_returned() {
    let run = validation_run(2);
    let only = StateVector::with_altitude(run.towers[0].x + 5000.0, 0.0, run.towers[0].y, 0.0, 15.0);
    let (chosen, track) = select_initial_state(&[only], &run.detections, &run.towers, &run.config).unwrap();
    assert_eq!(chosen, only);
    assert!(!track.points.is_empty());
}

#[test]
fn grossly_wrong_candidate_does_not_win() {
    let run = validation_run(3);
    let u = usable(&run);
    let cands = enumerate_initial_states(&u[0], &u[1], &run.towers, &run.config).unwrap();
    let few: Vec<StateVector> = cands.iter().step_by(cands.len() / 8).copied().collect();
    let (_, base) = select_initial_state(&few, &run.detections, &run.towers, &run.config).unwrap();
    let wrong = StateVector::with_altitude(run.towers[0].x - 60_000.0, 15.0, run.towers[0].y + 60_000.0, -15.0, 15.0);
    let mut more = few.clone();
    more.push(wrong);
    let (chosen, with_wrong) = select_initial_state(&more, &run.detections, &run.towers, &run.config).unwrap();
    assert_ne!(chosen, wrong);
    assert_eq!(score_track(&with_wrong.points).unwrap(), score_track(&base.points).unwrap());
}

fn with_gap(run: &Run, from: f64, to: f64) -> Vec<Detection> {
    run.detections
        .iter()
        .filter(|d| d.t < from || d.t >= to)
        .cloned()
        .collect()
}

#[test]
fn track_invariants() {
    let run = validation_run(6);
    let log = with_gap(&run, 400.0, 800.0);
    let cfg = &run.config;
    let out = track(&log, &run.towers, cfg).unwrap();
    assert!(out.points.iter().all(|p| p.state.altitude() >= 0.0));
    assert!(out.points.windows(2).all(|w| w[1].t >= w[0].t));

    let kept: Vec<f64> = log.iter().filter(|d| f64::from(d.z) >= cfg.z_threshold).map(|d| d.t).collect();
    let expected = 1 + kept.windows(2).filter(|w| w[1] - w[0] > cfg.t_gap_max).count();
    assert_eq!(expected, 2);
    assert_eq!(out.segments(), expected);
    for w in out.points.windows(2) {
        let new_segment = w[1].segment != w[0].segment;
        assert_eq!(new_segment, w[1].t - w[0].t > cfg.t_gap_max, "at t = {}", w[1].t);
    }

    // Sub-threshold readings never matter.
    let raised: Vec<Detection> = log
        .iter()
        .map(|d| {
            let mut d = d.clone();
            if f64::from(d.z) < cfg.z_threshold {
                d.z = (cfg.z_threshold - 1.0) as u8 - d.z % 2;
            }
            d
        })
        .collect();
    assert_eq!(track(&raised, &run.towers, cfg).unwrap().points, out.points);

    assert_eq!(track(&log, &run.towers, cfg).unwrap().points, out.points);
}

#[test]
fn gap_restart_is_reachable() {
    let run = validation_run(7);
    let before: Vec<Detection> = run.detections.iter().filter(|d| d.t < 400.0).cloned().collect();
    let after: Vec<Detection> = run
        .detections
        .iter()
        .filter(|d| d.t >= 800.0 && f64::from(d.z) >= run.config.z_threshold)
        .cloned()
        .collect();
    let last = track(&before, &run.towers, &run.config).unwrap().last_state().unwrap();
    let gap = after[0].t - last.t;
    let cfg = &run.config;

    let restart = handle_gap(&last, gap, &after, &run.towers, cfg).unwrap().unwrap();
    let moved = (restart.x - last.mean.x).hypot(restart.y - last.mean.y);
    assert!(moved <= cfg.v_max * gap, "{moved} m in {gap} s");
    assert!((restart.altitude() - last.mean.altitude()).abs() < 1e-9 * last.mean.altitude().max(1.0));

    // A very long gap never binds: the farthest candidate of the whole set.
    let free = handle_gap(&last, 1e9, &after, &run.towers, cfg).unwrap().unwrap();
    let far = (free.x - last.mean.x).hypot(free.y - last.mean.y);
    assert!(far >= moved);

    // No time: nothing but the previous position itself can be reached.
    let stuck = FilterState { t: after[0].t, ..last };
    if let Some(s) = handle_gap(&stuck, 0.0, &after, &run.towers, cfg).unwrap() {
        assert!((s.x - last.mean.x).hypot(s.y - last.mean.y) < 1e-9);
    }
}

#[test]
fn simultaneous_readings_share_a_state() {
    let run = validation_run(8);
    let mut log = run.detections.clone();
    // A second, identical tower hears every pulse on the same bearing.
    let mut twin = run.towers[0].clone();
    twin.id = "TWIN".into();
    let towers = vec![run.towers[0].clone(), twin];
    let copies: Vec<Detection> = log
        .iter()
        .map(|d| Detection {
            tower_id: "TWIN".into(),
            ..d.clone()
        })
        .collect();
    log.extend(copies);
    log.sort_by(|a, b| a.t.total_cmp(&b.t));
    let out = track(&log, &towers, &run.config).unwrap();
    let single = track(&run.detections, &run.towers, &run.config).unwrap();
    for w in out.points.windows(2).filter(|w| w[0].t == w[1].t) {
        assert_eq!(w[0].state, w[1].state);
    }
    assert_eq!(out.points.len(), 2 * single.points.len());
}
