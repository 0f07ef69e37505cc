use hapnav_core::cloth::{generate_patch, generate_tube, step_cloth, stretch_sweep, ClothMaterial, ClothParams, ColliderMotion, ContactReport};
use hapnav_core::funnel_env::{EnvConfig, EnvState, FunnelEnv, Terminal};
use hapnav_core::geom::{Capsule, FunnelSurface, Rotation, Spline, Vec3};
use hapnav_core::manipulator::{bin_forces, ik_energy, ik_solve, parse_manipulator, IkConfig, SphereCommand};
use hapnav_core::trpo::gae_episode;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    any::<u64>().prop_map(|s| Rotation::random(&mut ChaCha8Rng::seed_from_u64(s)).rotate(Vec3::Z))
}

fn funnel() -> impl Strategy<Value = FunnelSurface> {
    (vec3(0.3), unit(), 0.05..0.3f64, 1.2..3.0f64, 0.1..0.6f64).prop_map(|(c, axis, throat, ratio, h)| FunnelSurface {
        throat_center: c,
        axis,
        mouth_radius: throat * ratio,
        throat_radius: throat,
        height: h,
    })
}

/// Dense grid over the shell: axial stations times angular stations.
fn shell_samples(f: &FunnelSurface) -> Vec<Vec3> {
    let u = f.axis.any_orthogonal();
    let v = f.axis.cross(u);
    let mut out = Vec::new();
    for i in 0..=200 {
        let a = f.height * i as f64 / 200.0;
        let r = f.radius_at(a);
        for j in 0..720 {
            let t = std::f64::consts::TAU * j as f64 / 720.0;
            out.push(f.throat_center + f.axis * a + (u * t.cos() + v * t.sin()) * r);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn funnel_closest_point_beats_samples(f in funnel(), p in vec3(1.0)) {
        let c = f.closest_point(p);
        let best = shell_samples(&f).iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min);
        // Sample spacing bounds how far the grid minimum can sit above the true one.
        prop_assert!(c.distance <= best + 1e-9, "closest {} grid {}", c.distance, best);
        prop_assert!(best - c.distance < 5e-3);
    }

    #[test]
    fn penetration_is_one_lipschitz(f in funnel(), p in vec3(0.8), d in vec3(0.05), r in 0.02..0.3f64) {
        let a = f.sphere_penetration(p, r).depth;
        let b = f.sphere_penetration(p + d, r).depth;
        prop_assert!((a - b).abs() <= d.norm() + 1e-12);
    }

    #[test]
    fn spline_interpolates_control_points(pts in prop::collection::vec(vec3(2.0), 2..8)) {
        // Consecutive duplicates are rejected by construction; keep distinct points only.
        let mut cps: Vec<Vec3> = Vec::new();
        for p in pts {
            if cps.last().map_or(true, |q: &Vec3| q.distance(p) > 1e-3) {
                cps.push(p);
            }
        }
        prop_assume!(cps.len() >= 2);
        let s = Spline::new(cps.clone()).unwrap();
        for (k, p) in cps.iter().enumerate() {
            prop_assert!(s.point_at_arc_length(s.control_point_arc_length(k)).distance(*p) < 1e-6);
        }
    }

    #[test]
    fn env_reward_and_observation_invariants(seed in any::<u64>(), actions in prop::collection::vec(vec3(3.0), 1..40)) {
        let env = FunnelEnv::new(EnvConfig::default()).unwrap();
        let (mut state, obs) = env.reset(seed).unwrap();
        prop_assert_eq!(obs.rel_pos + state.sphere_pos, state.target);
        let mut replay: EnvState = state.clone();
        for a in actions {
            if state.status.is_done() {
                break;
            }
            let r = env.step(&mut state, a).unwrap();
            let r2 = env.step(&mut replay, a).unwrap();
            prop_assert_eq!(r, r2);
            prop_assert_eq!(r.obs.rel_pos + state.sphere_pos, state.target);
            let rest = r.reward + state.sphere_pos.distance(state.target);
            let expected = match r.terminal {
                Terminal::ReachedTarget => 5.0,
                Terminal::DeepPenetration => -10.0,
                _ => 0.0,
            };
            prop_assert!((rest - expected).abs() <= 4.0 * f64::EPSILON * expected.abs().max(1.0), "{rest} vs {expected}");
            prop_assert!(!(r.terminal == Terminal::DeepPenetration && state.sphere_pos.distance(state.target) < env.config().epsilon));
        }
    }

    #[test]
    fn gae_limits_match_closed_forms(
        rv in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..30),
        boot in -5.0..5.0f64,
        gamma in 0.5..1.0f64,
    ) {
        let (r, v): (Vec<f64>, Vec<f64>) = rv.into_iter().unzip();
        let n = r.len();
        let td = gae_episode(&r, &v, boot, gamma, 0.0);
        let mc = gae_episode(&r, &v, boot, gamma, 1.0);
        for t in 0..n {
            let next = if t + 1 < n { v[t + 1] } else { boot };
            prop_assert!((td[t] - (r[t] + gamma * next - v[t])).abs() < 1e-10);
            let mut ret = 0.0;
            let mut disc = 1.0;
            for k in t..n {
                ret += disc * r[k];
                disc *= gamma;
            }
            ret += disc * boot;
            prop_assert!((mc[t] - (ret - v[t])).abs() < 1e-10);
        }
    }
}

fn tube_with_pins() -> hapnav_core::cloth::ClothMesh {
    let mat = ClothMaterial { vertex_mass: 1e-3, stretch_stiffness: 0.9, bend_stiffness: 0.1 };
    generate_tube(0.6, 0.12, 9, 12, true, &mat).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pinned_vertices_never_move(mu in 0.0..2.0f64, moves in prop::collection::vec((vec3(0.3), 0.02..0.15f64), 1..6), steps in 1usize..40) {
        let mut mesh = tube_with_pins();
        let pinned: Vec<(usize, Vec3)> = mesh.pinned().into_iter().map(|i| (i, mesh.positions[i])).collect();
        prop_assume!(!pinned.is_empty());
        let params = ClothParams { friction: mu, ..Default::default() };
        for k in 0..steps {
            let (c, r) = moves[k % moves.len()];
            let (c2, _) = moves[(k + 1) % moves.len()];
            let m = ColliderMotion { from: Capsule::sphere(c, r), to: Capsule::sphere(c2, r) };
            step_cloth(&mut mesh, &params, &[m]).unwrap();
        }
        for (i, p) in pinned {
            prop_assert_eq!(mesh.positions[i], p);
        }
    }

    #[test]
    fn rest_state_is_a_fixed_point(size in 0.2..1.0f64, n in 3usize..10, frame in any::<u64>()) {
        let mat = ClothMaterial::default();
        let mut mesh = generate_patch(size, n, &mat).unwrap();
        let rot = Rotation::random(&mut ChaCha8Rng::seed_from_u64(frame));
        mesh.transform(|v| rot.rotate(v), Vec3::new(0.1, -0.2, 0.3));
        mesh.prev_positions = mesh.positions.clone();
        let start = mesh.positions.clone();
        let params = ClothParams { gravity: Vec3::ZERO, ..Default::default() };
        for step in 1..=20 {
            step_cloth(&mut mesh, &params, &[]).unwrap();
            let drift = mesh.positions.iter().zip(&start).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max);
            prop_assert!(drift < 1e-12 * step as f64, "drift {drift} after {step} steps");
        }
    }

    #[test]
    fn stretch_sweep_never_increases_energy(noise in 0.001..0.05f64, seed in any::<u64>()) {
        use rand::Rng;
        let mut mesh = tube_with_pins();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..mesh.num_vertices() {
            if !mesh.is_pinned(i) {
                mesh.positions[i] += Vec3::new(rng.gen_range(-noise..noise), rng.gen_range(-noise..noise), rng.gen_range(-noise..noise));
            }
        }
        let mut before = mesh.stretch_energy();
        for _ in 0..5 {
            stretch_sweep(&mut mesh);
            let after = mesh.stretch_energy();
            prop_assert!(after <= before * (1.0 + 1e-12) + 1e-18, "{before} -> {after}");
            before = after;
        }
    }

    #[test]
    fn contact_forces_only_on_corrected_vertices(c in vec3(0.1), r in 0.05..0.15f64, d in vec3(0.05)) {
        let mut mesh = tube_with_pins();
        let m = ColliderMotion { from: Capsule::sphere(c + Vec3::Z * 0.3, r), to: Capsule::sphere(c + d + Vec3::Z * 0.3, r) };
        let rep: ContactReport = step_cloth(&mut mesh, &ClothParams::default(), &[m]).unwrap();
        for (f, col) in rep.forces.iter().zip(&rep.collider) {
            if col.is_none() {
                prop_assert_eq!(*f, Vec3::ZERO);
            }
        }
    }
}

const ARM: &str = include_str!("../data/arm.manip");

fn arm_q(seed: u64) -> (hapnav_core::manipulator::Manipulator, Vec<f64>) {
    use rand::Rng;
    let m = parse_manipulator(ARM).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q: Vec<f64> = m.chain.lower().iter().zip(m.chain.upper()).map(|(lo, hi)| if hi > *lo { rng.gen_range(*lo + 1e-3..=hi - 1e-3) } else { *lo }).collect();
    (m, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binning_partitions_contacts(
        centers in prop::collection::vec(vec3(1.0), 1..10),
        verts in prop::collection::vec((vec3(1.0), vec3(2.0), any::<bool>()), 0..60),
        fmax in 0.1..10.0f64,
    ) {
        let n = verts.len();
        let mut rep = ContactReport { forces: vec![Vec3::ZERO; n], collider: vec![None; n] };
        for (j, (_, f, on)) in verts.iter().enumerate() {
            if *on {
                rep.forces[j] = *f;
                rep.collider[j] = Some(0);
            }
        }
        let pos: Vec<Vec3> = verts.iter().map(|v| v.0).collect();
        let bins = bin_forces(&rep, &pos, &centers, fmax);
        let total: Vec3 = rep.forces.iter().copied().sum();
        let back: Vec3 = bins.iter().map(|b| *b * fmax).sum();
        prop_assert!((total - back).norm() <= 1e-12 * (1.0 + total.norm()) * n.max(1) as f64);
    }

    #[test]
    fn ik_descends_and_respects_limits(seed in any::<u64>(), goals in prop::collection::vec(vec3(1.0), 9)) {
        let (m, q0) = arm_q(seed);
        let cmds: Vec<SphereCommand> = (0..m.layout.len())
            .map(|k| SphereCommand { sphere: k, current: Vec3::ZERO, desired: goals[k % goals.len()], weight: m.layout.weight(k) })
            .collect();
        let r = ik_solve(&m.chain, &m.layout, &q0, &cmds, &IkConfig::default());
        prop_assert!(r.energy <= r.initial_energy);
        prop_assert!(m.chain.within_limits(&r.q));
        prop_assert!((ik_energy(&m.chain, &m.layout, &r.q, &cmds) - r.energy).abs() <= 1e-12 * (1.0 + r.energy));
    }

    #[test]
    fn jacobian_matches_finite_differences(seed in any::<u64>(), link in 0usize..3, t in 0.0..1.0f64) {
        let (m, q) = arm_q(seed);
        let c = &m.chain;
        let l = &c.links[link];
        let local = l.a.lerp(l.b, t);
        let pose = c.forward_kinematics(&q);
        let p = c.point(&pose, link, local);
        let jac = c.point_jacobian(&pose, link, p);
        let h = 1e-6;
        for (k, col) in jac.iter().enumerate() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += h;
            qm[k] -= h;
            // Central differences without clamping, so limits do not bias the estimate.
            let fd = (c.point(&c.forward_kinematics(&qp), link, local) - c.point(&c.forward_kinematics(&qm), link, local)) / (2.0 * h);
            prop_assert!((fd - *col).norm() < 1e-6, "dof {k}: fd {fd:?} analytic {col:?}");
        }
    }
}
