use std::path::Path;

use nalgebra::{Matrix3, Rotation2};
use proptest::prelude::*;

use traj_assess::context::{dca_pair, interaction_energy, local_density, ttc_pair, Ttc};
use traj_assess::ingest::{assemble_dataset, parse_annotations_str, Homography, RawRow, SourceSchema};
use traj_assess::overall::{cluster_count, positional_entropy, GmmConfig};
use traj_assess::predictability::{conditional_entropy, log_trajlet_kernel, posterior_weights, KernelConfig};
use traj_assess::preprocess::{filter_static, kalman_smooth, split_trajlets, SmootherConfig, TrajletConfig};
use traj_assess::regularity::regularity;
use traj_assess::types::{bounding_area, build_frames, AgentId, AgentState, Trajectory, Trajlet, Vec2};

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

/// A trajectory sampled every `period` seconds from a random walk.
fn walk(agent: &str, start: f64, steps: &[Vec2], origin: Vec2, period: f64) -> Trajectory {
    let id = AgentId::from(agent);
    let mut p = origin;
    let states = steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            p += s;
            AgentState::new(id.clone(), start + k as f64 * period, p)
        })
        .collect();
    Trajectory::new(id, states).unwrap()
}

fn with_velocities(states: &[AgentState], period: f64) -> Vec<AgentState> {
    let n = states.len();
    (0..n)
        .map(|k| {
            let (a, b) = if k + 1 < n { (k, k + 1) } else { (k - 1, k) };
            let v = (states[b].position - states[a].position) / period;
            states[k].clone().with_velocity(v)
        })
        .collect()
}

fn trajlet_from(id: usize, points: &[Vec2]) -> Trajlet {
    let agent = AgentId::new(format!("t{id}"));
    let raw: Vec<AgentState> = points
        .iter()
        .enumerate()
        .map(|(k, p)| AgentState::new(agent.clone(), k as f64 * 0.4, *p))
        .collect();
    Trajlet {
        id,
        agent_id: agent,
        states: with_velocities(&raw, 0.4),
        observed_count: 8,
        future_count: 4,
        is_static: false,
    }
}

fn rigid(t: &Trajlet, rot: &Rotation2<f64>, shift: Vec2) -> Trajlet {
    let mut m = t.clone();
    for s in &mut m.states {
        s.position = rot * s.position + shift;
        s.velocity = s.velocity.map(|v| rot * v);
    }
    m
}

fn agent(p: Vec2, v: Vec2) -> AgentState {
    AgentState::new(AgentId::from("a"), 0.0, p).with_velocity(v)
}

fn other(p: Vec2, v: Vec2) -> AgentState {
    AgentState::new(AgentId::from("b"), 0.0, p).with_velocity(v)
}

/// Trajlet bundle close enough that kernels never underflow.
fn bundle() -> impl Strategy<Value = Vec<Vec<Vec2>>> {
    prop::collection::vec(prop::collection::vec(vec2(0.4), 12), 4..14).prop_map(|sets| {
        sets.into_iter()
            .map(|jitter| {
                jitter
                    .iter()
                    .enumerate()
                    .map(|(k, j)| Vec2::new(1.2 * 0.4 * k as f64, 0.0) + j)
                    .collect()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frames_conserve_states(
        tracks in prop::collection::vec((0u32..20, prop::collection::vec(vec2(0.5), 1..30)), 1..8)
    ) {
        let trajs: Vec<Trajectory> = tracks
            .iter()
            .enumerate()
            .map(|(i, (start, steps))| walk(&format!("{i}"), *start as f64 * 0.4, steps, Vec2::zeros(), 0.4))
            .collect();
        let frames = build_frames(&trajs).unwrap();
        let total: usize = trajs.iter().map(|t| t.len()).sum();
        prop_assert_eq!(frames.iter().map(|f| f.count()).sum::<usize>(), total);
        for f in &frames {
            let mut ids: Vec<_> = f.entries.iter().map(|e| e.agent_id.clone()).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), f.count());
            prop_assert!(f.entries.iter().all(|e| (e.timestamp - f.timestamp).abs() < 1e-9));
        }
    }

    #[test]
    fn area_is_translation_invariant(steps in prop::collection::vec(vec2(3.0), 2..40), shift in vec2(500.0)) {
        let a = walk("a", 0.0, &steps, Vec2::zeros(), 0.4);
        let b = walk("a", 0.0, &steps, shift, 0.4);
        let (_, area_a) = bounding_area(&[a]).unwrap();
        let (_, area_b) = bounding_area(&[b]).unwrap();
        prop_assert!((area_a - area_b).abs() <= 1e-9 * area_a.max(1.0));
    }

    #[test]
    fn trajlet_count_and_span(samples in 1usize..80, stride_tenths in 4u32..70) {
        let cfg = TrajletConfig {
            stride: stride_tenths as f64 * 0.1,
            ..TrajletConfig::default()
        };
        let steps = vec![Vec2::new(0.5, 0.0); samples];
        let traj = walk("a", 3.2, &steps, Vec2::zeros(), cfg.period());
        let trajlets = split_trajlets(&traj, &cfg).unwrap();
        let duration = traj.duration();
        let want = if duration + 1e-6 < cfg.delta {
            0
        } else {
            ((duration - cfg.delta) / cfg.stride + 1e-9).floor() as usize + 1
        };
        prop_assert_eq!(trajlets.len(), want);
        for t in &trajlets {
            prop_assert!(t.span() <= cfg.delta + 1e-9 && t.span() >= cfg.delta - cfg.period() - 1e-9);
            prop_assert_eq!(t.observed_count + t.future_count, t.states.len());
            prop_assert!(t.states.iter().all(|s| s.agent_id == traj.agent_id));
        }
    }

    #[test]
    fn smoothing_commutes_with_translation(steps in prop::collection::vec(vec2(0.6), 2..40), shift in vec2(1000.0)) {
        let cfg = SmootherConfig::default();
        let a = kalman_smooth(&walk("a", 0.0, &steps, Vec2::zeros(), 0.4), &cfg).unwrap();
        let b = kalman_smooth(&walk("a", 0.0, &steps, shift, 0.4), &cfg).unwrap();
        for (x, y) in a.states().iter().zip(b.states()) {
            prop_assert!((x.position + shift - y.position).norm() < 1e-9);
            prop_assert!((x.velocity.unwrap() - y.velocity.unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn static_flags_survive_rigid_motion(
        paths in prop::collection::vec(prop::collection::vec(vec2(0.15), 12), 1..10),
        angle in -3.2f64..3.2,
        shift in vec2(300.0),
    ) {
        let rot = Rotation2::new(angle);
        let cfg = TrajletConfig::default();
        let trajlets: Vec<Trajlet> = paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut acc = Vec2::zeros();
                let pts: Vec<Vec2> = p.iter().map(|s| { acc += s; acc }).collect();
                trajlet_from(i, &pts)
            })
            .collect();
        let moved: Vec<Trajlet> = trajlets.iter().map(|t| rigid(t, &rot, shift)).collect();
        let a = filter_static(trajlets, &cfg);
        let b = filter_static(moved, &cfg);
        for (x, y) in a.iter().zip(&b) {
            // exact ties at the threshold are measure-zero; guard them anyway
            if (x.path_length() - cfg.min_path_len).abs() > 1e-9 {
                prop_assert_eq!(x.is_static, y.is_static);
            }
        }
    }

    #[test]
    fn homography_round_trip(
        scale in 0.02f64..0.2,
        skew in -0.01f64..0.01,
        persp in (-1e-4f64..1e-4, -1e-4f64..1e-4),
        offset in vec2(50.0),
        points in prop::collection::vec((0.0f64..640.0, 0.0f64..480.0), 1..30),
    ) {
        let m = Matrix3::new(scale, skew, offset.x, -skew, scale, offset.y, persp.0, persp.1, 1.0);
        let h = Homography::new(m).unwrap();
        let inv = h.inverse().unwrap();
        for (x, y) in points {
            let p = Vec2::new(x, y);
            let back = inv.project(h.project(p).unwrap()).unwrap();
            prop_assert!((back - p).norm() < 1e-6);
        }
    }

    #[test]
    fn grouping_keeps_every_row(kinds in prop::collection::vec((0u8..4, 0usize..5), 1..60)) {
        // rows per agent get distinct frames; some carry a non-pedestrian label
        let mut frames = [0u32; 5];
        let rows: Vec<RawRow> = kinds
            .iter()
            .enumerate()
            .map(|(line, (kind, agent))| {
                frames[*agent] += 1;
                RawRow {
                    line: line + 1,
                    frame: frames[*agent] as f64,
                    agent_id: format!("{agent}"),
                    x: line as f64,
                    y: 0.5 * line as f64,
                    agent_type: Some(if *kind == 0 { "car".into() } else { "pedestrian".into() }),
                }
            })
            .collect();
        let n_rows = rows.len();
        match assemble_dataset("p", rows, &SourceSchema::generic_csv(), None, 2.5) {
            Ok(ds) => prop_assert_eq!(ds.state_count() + ds.flags.excluded_rows, n_rows),
            Err(_) => prop_assert!(kinds.iter().all(|(k, _)| *k == 0)),
        }
    }

    #[test]
    fn weights_are_a_distribution(paths in bundle(), rotate_by in 0usize..13) {
        let trajlets: Vec<Trajlet> = paths.iter().enumerate().map(|(i, p)| trajlet_from(i, p)).collect();
        let refs: Vec<&Trajlet> = trajlets.iter().collect();
        let cfg = KernelConfig::default();
        let w = posterior_weights(refs[0], &refs, &cfg).unwrap();
        prop_assert!(w.weights.iter().all(|x| *x >= 0.0));
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let shift = rotate_by % refs.len();
        let mut permuted = refs.clone();
        permuted.rotate_left(shift);
        let wp = posterior_weights(refs[0], &permuted, &cfg).unwrap();
        for (k, x) in wp.weights.iter().enumerate() {
            prop_assert!((x - w.weights[(k + shift) % refs.len()]).abs() < 1e-12);
        }
    }

    #[test]
    fn far_references_change_nothing(paths in bundle(), prune in any::<bool>()) {
        let trajlets: Vec<Trajlet> = paths.iter().enumerate().map(|(i, p)| trajlet_from(i, p)).collect();
        let far: Vec<Trajlet> = trajlets
            .iter()
            .map(|t| rigid(t, &Rotation2::identity(), Vec2::new(1500.0, -1200.0)))
            .enumerate()
            .map(|(i, mut t)| { t.id = 1000 + i; t })
            .collect();
        let near: Vec<&Trajlet> = trajlets.iter().collect();
        let mut all = near.clone();
        all.extend(far.iter());
        let cfg = KernelConfig { prune, ..KernelConfig::default() };
        let a = posterior_weights(near[0], &near, &cfg).unwrap();
        let b = posterior_weights(near[0], &all, &cfg).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!(b.weights[near.len()..].iter().all(|x| *x < 1e-9));
        let ha = conditional_entropy(near[0], &near, &cfg).unwrap();
        let hb = conditional_entropy(near[0], &all, &cfg).unwrap();
        prop_assert!(ha.is_finite());
        prop_assert!((ha - hb).abs() < 1e-9, "{} vs {}", ha, hb);
    }

    #[test]
    fn kernel_factorizes(a in prop::collection::vec(vec2(5.0), 12), b in prop::collection::vec(vec2(5.0), 12), h in 0.2f64..2.0) {
        let whole = log_trajlet_kernel(&a, &b, h).unwrap();
        let parts = log_trajlet_kernel(&a[..8], &b[..8], h).unwrap() + log_trajlet_kernel(&a[8..], &b[8..], h).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1.0));
    }

    #[test]
    fn kde_entropy_is_rigid_invariant(points in prop::collection::vec(vec2(4.0), 2..60), angle in -3.2f64..3.2, shift in vec2(200.0)) {
        let rot = Rotation2::new(angle);
        let moved: Vec<Vec2> = points.iter().map(|p| rot * p + shift).collect();
        let a = positional_entropy(&points, 0.5).unwrap();
        let b = positional_entropy(&moved, 0.5).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn regularity_record_bounds(steps in prop::collection::vec(vec2(0.8), 12), angle in -3.2f64..3.2, shift in vec2(100.0)) {
        let mut acc = Vec2::zeros();
        let pts: Vec<Vec2> = steps.iter().map(|s| { acc += s; acc }).collect();
        let t = trajlet_from(0, &pts);
        let r = regularity(&t).unwrap();
        prop_assert!(r.speed_avg >= 0.0 && r.speed_range >= 0.0);
        prop_assert!(r.accel_avg >= 0.0 && r.accel_max >= r.accel_avg - 1e-12);
        if let Some(f) = r.efficiency {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        }
        if let Some(d) = r.deviation_absavg_deg {
            prop_assert!((0.0..=180.0).contains(&d));
        }

        let m = regularity(&rigid(&t, &Rotation2::new(angle), shift)).unwrap();
        prop_assert!((r.speed_avg - m.speed_avg).abs() < 1e-9);
        prop_assert!((r.accel_max - m.accel_max).abs() < 1e-9);
        match (r.efficiency, m.efficiency) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
            (x, y) => prop_assert_eq!(x.is_some(), y.is_some()),
        }
        if let (Some(x), Some(y)) = (r.deviation_avg, m.deviation_avg) {
            prop_assert!((x - y).abs() < 1e-9);
        }

        // reversal: same path walked backwards
        let mut rev = t.clone();
        rev.states.reverse();
        for s in &mut rev.states {
            s.velocity = s.velocity.map(|v| -v);
        }
        let b = regularity(&rev).unwrap();
        prop_assert!((r.speed_avg - b.speed_avg).abs() < 1e-9);
        if let (Some(x), Some(y)) = (r.efficiency, b.efficiency) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn pairwise_symmetry_and_contact(pa in vec2(10.0), pb in vec2(10.0), va in vec2(2.0), vb in vec2(2.0), angle in -3.2f64..3.2, shift in vec2(100.0)) {
        let (a, b) = (agent(pa, va), other(pb, vb));
        let d = dca_pair(&a, &b).unwrap();
        prop_assert!((d - dca_pair(&b, &a).unwrap()).abs() < 1e-9);
        prop_assert!(d <= (pa - pb).norm() + 1e-12);
        let t = ttc_pair(&a, &b, 0.3).unwrap();
        let t_rev = ttc_pair(&b, &a, 0.3).unwrap();
        match (t, t_rev) {
            (Ttc::At(x), Ttc::At(y)) => {
                prop_assert!((x - y).abs() < 1e-9);
                let gap = ((pa + va * x) - (pb + vb * x)).norm();
                prop_assert!((gap - 0.6).abs() < 1e-6);
            }
            (x, y) => prop_assert_eq!(x, y),
        }

        let rot = Rotation2::new(angle);
        let (ma, mb) = (agent(rot * pa + shift, rot * va), other(rot * pb + shift, rot * vb));
        prop_assert!((dca_pair(&ma, &mb).unwrap() - d).abs() < 1e-9);
        match (t, ttc_pair(&ma, &mb, 0.3).unwrap()) {
            (Ttc::At(x), Ttc::At(y)) => prop_assert!((x - y).abs() < 1e-9),
            (x, y) => prop_assert_eq!(x, y),
        }
        let pts = [pa, pb, pa + va];
        let moved: Vec<Vec2> = pts.iter().map(|p| rot * p + shift).collect();
        let l = local_density(pa, &pts, 1.0, 0.05).unwrap();
        let lm = local_density(moved[0], &moved, 1.0, 0.05).unwrap();
        prop_assert!((l - lm).abs() <= 1e-9 * l.max(1.0));
    }

    #[test]
    fn energy_decreases(t in 0.01f64..50.0, dt in 1e-3f64..5.0, k in 0.1f64..5.0, upper in 0.5f64..10.0) {
        prop_assert!(interaction_energy(t + dt, k, upper).unwrap() < interaction_energy(t, k, upper).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cluster_count_ignores_translation(points in prop::collection::vec(vec2(5.0), 20..40), shift in vec2(100.0), seed in 0u64..50) {
        let cfg = GmmConfig { k_max: 4, ..GmmConfig::default() };
        let moved: Vec<Vec2> = points.iter().map(|p| p + shift).collect();
        let a = cluster_count(&points, &cfg, seed).unwrap();
        prop_assert_eq!(a.k, cluster_count(&moved, &cfg, seed).unwrap().k);
        prop_assert_eq!(a, cluster_count(&points, &cfg, seed).unwrap());
    }
}

#[test]
fn parsing_is_deterministic() {
    let text = "frame,id,x,y\n0,1,0.5,1.0\n1,1,0.9,1.1\n0,2,3.0,3.0\n1,2,3.1,2.9\n";
    let schema = SourceSchema::generic_csv();
    let build = || {
        let rows = parse_annotations_str(text, &schema, Path::new("mem.csv")).unwrap();
        let ds = assemble_dataset("mem", rows, &schema, None, 2.5).unwrap();
        serde_json::to_string(&ds).unwrap()
    };
    assert_eq!(build(), build());
}
