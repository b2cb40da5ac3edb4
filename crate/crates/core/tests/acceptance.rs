//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The desk-scale training criteria take several minutes on one core; set
//! `PROXOPS_SKIP_DESK=1` to skip them (they then print SKIP). Verdicts go
//! to stderr, so they show without `--nocapture`.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proxops::action::ActionSpaceSpec;
use proxops::docking::{self, DockingConfig, DockingEnv, DockingTermination};
use proxops::dynamics::{step_delta_v, DynamicsParams, HillState, Propagator, ThrustCommand, MEAN_MOTION};
use proxops::env::Task;
use proxops::experiment::{run_seed, ExperimentConfig, FINAL_EVAL_SEED_BASE};
use proxops::inspection::{
    adaptive_w_update, visible_and_illuminated, ChiefModel, InspectionConfig, InspectionEnv,
    InspectionTermination, PointMask, SunState, W_MAX,
};
use proxops::metrics::{evaluate_policy, iqm, EpisodeMetrics, Metric};
use proxops::net::{HeadKind, LossSpec, NetConfig, PolicyValueNet, Sample};
use proxops::ppo::Scale;
use proxops::report::{group_runs, load_runs, table_rows, write_report};
use proxops::rollout::{gae, RandomPolicy};

struct Verdict {
    id: &'static str,
    name: &'static str,
    pass: Option<bool>,
    blocking: bool,
    detail: String,
}

impl Verdict {
    fn new(id: &'static str, name: &'static str, pass: bool, detail: String) -> Self {
        Self {
            id,
            name,
            pass: Some(pass),
            blocking: true,
            detail,
        }
    }

    fn advisory(mut self) -> Self {
        self.blocking = false;
        self
    }

    fn skipped(id: &'static str, name: &'static str) -> Self {
        Self {
            id,
            name,
            pass: None,
            blocking: true,
            detail: "PROXOPS_SKIP_DESK set".into(),
        }
    }

    fn print(&self) {
        let tag = match self.pass {
            Some(true) => "PASS",
            Some(false) if self.blocking => "FAIL",
            Some(false) => "FAIL (non-blocking)",
            None => "SKIP",
        };
        emit(&format!("{tag} [{}] {}: {}", self.id, self.name, self.detail));
    }
}

/// Writes straight to stderr so the verdicts show even when the harness
/// captures test output.
fn emit(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

// ---------------------------------------------------------------- dynamics

/// Closed-form unforced Clohessy-Wiltshire solution.
fn cw_closed_form(s0: [f64; 6], n: f64, t: f64) -> [f64; 6] {
    let [x, y, z, vx, vy, vz] = s0;
    let (s, c) = (n * t).sin_cos();
    [
        (4.0 - 3.0 * c) * x + s / n * vx + 2.0 / n * (1.0 - c) * vy,
        6.0 * (s - n * t) * x + y - 2.0 / n * (1.0 - c) * vx + (4.0 * s - 3.0 * n * t) / n * vy,
        c * z + s / n * vz,
        3.0 * n * s * x + c * vx + 2.0 * s * vy,
        -6.0 * n * (1.0 - c) * x - 2.0 * s * vx + (4.0 * c - 3.0) * vy,
        -n * s * z + c * vz,
    ]
}

fn dynamics_oracle() -> Verdict {
    let t0 = Instant::now();
    let params = DynamicsParams::inspection();
    let prop = Propagator::new(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_z) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let s0: [f64; 6] = std::array::from_fn(|i| {
            if i < 3 {
                rng.random_range(-100.0..100.0)
            } else {
                rng.random_range(-0.3..0.3)
            }
        });
        let mut s = HillState::from_array(s0);
        for k in 1..=1223 {
            s = prop.propagate(&s, &ThrustCommand::zero()).unwrap();
            let exact = cw_closed_form(s0, MEAN_MOTION, k as f64 * params.dt);
            let got = s.to_array();
            for i in 0..6 {
                let e = (got[i] - exact[i]).abs();
                worst = worst.max(e);
                if i == 2 || i == 5 {
                    worst_z = worst_z.max(e);
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict::new(
        "1",
        "dynamics vs closed-form CW, 20 states x 1223 steps",
        worst < 1e-8 && worst_z < 1e-9 && secs < 1.0,
        format!("max err {worst:.2e} (z axis {worst_z:.2e}), {secs:.3} s"),
    )
}

// ---------------------------------------------------------------- formulas

fn formula_suite() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |what: &str, got: f64, want: f64, tol: f64| {
        if (got - want).abs() > tol {
            failures.push(format!("{what}: got {got}, want {want}"));
        }
    };
    let dv = step_delta_v(&ThrustCommand::new(1.0, 1.0, 1.0), &DynamicsParams::inspection());
    check("step delta-v", dv, 2.5, 1e-12);
    let dcfg = DockingConfig::default();
    check("max speed at 10 m", docking::max_speed(10.0, &dcfg), 0.2, 1e-12);
    check("max speed at 110 m", docking::max_speed(110.0, &dcfg), 0.4054, 1e-12);
    check("w (0.001, 0.95)", adaptive_w_update(0.001, 0.95), 0.00105, 1e-15);
    check("w (0.001, 0.70)", adaptive_w_update(0.001, 0.70), 0.001, 0.0);
    check("w (0.05, 0.85)", adaptive_w_update(0.05, 0.85), 0.05, 0.0);
    check("w upper clamp", adaptive_w_update(W_MAX, 0.95), W_MAX, 0.0);
    check("iqm", iqm(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap(), 4.5, 1e-12);
    let detail = if failures.is_empty() {
        "delta-v 2.5, limit 0.2 / 0.4054, w schedule, iqm 4.5".into()
    } else {
        failures.join("; ")
    };
    Verdict::new("2", "exact-value formulas", failures.is_empty(), detail)
}

// ---------------------------------------------------------------- geometry

/// Roots of `a t^2 + b t + c`, if real.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    Some(((-b - r) / (2.0 * a), (-b + r) / (2.0 * a)))
}

/// Whether the ray `p + t dir`, `t in (eps, t_max)`, passes through the
/// sphere of radius `radius` centred at the origin.
fn ray_hits_sphere(p: Vector3<f64>, dir: Vector3<f64>, t_max: f64, radius: f64) -> bool {
    let eps = 1e-9;
    match quadratic_roots(dir.dot(&dir), 2.0 * p.dot(&dir), p.dot(&p) - radius * radius) {
        None => false,
        Some((t1, t2)) => {
            // the chord between the roots lies inside the sphere
            let lo = t1.max(eps);
            let hi = t2.min(t_max);
            hi - lo > eps
        }
    }
}

fn geometry_oracle() -> Verdict {
    let t0 = Instant::now();
    let model = ChiefModel::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0usize;
    for _ in 0..1000 {
        let r = rng.random_range(model.crash_distance()..800.0);
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let deputy = dir * r;
        let sun = SunState::new(rng.random_range(0.0..std::f64::consts::TAU));
        let s = sun.unit_vector();
        let mask = visible_and_illuminated(&model, &deputy, &sun).unwrap();
        for i in 0..model.len() {
            let p = model.surface_point(i);
            let lit = !ray_hits_sphere(p, s, f64::INFINITY, model.radius) && p.dot(&s) != 0.0;
            let seen = !ray_hits_sphere(p, deputy - p, 1.0, model.radius);
            if (lit && seen) != mask.contains(i) {
                mismatches += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict::new(
        "3",
        "visibility/illumination vs ray casting, 1000 geometries",
        mismatches == 0 && secs < 5.0,
        format!("{mismatches} mismatches over {} point tests, {secs:.3} s", 1000 * model.len()),
    )
}

// ---------------------------------------------------------------- gradients

fn gradient_check() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = LossSpec {
        clip_eps: 0.2,
        value_coef: 0.5,
        entropy_coef: 0.01,
    };
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for net_index in 0..10 {
        for head in [HeadKind::Gaussian, HeadKind::Categorical { choices: [3, 5, 7][net_index % 3] }] {
            let obs_dim = rng.random_range(3..12);
            let layers = rng.random_range(1..3);
            let cfg = NetConfig {
                obs_dim,
                hidden: (0..layers).map(|_| rng.random_range(4..17)).collect(),
                head,
                init_log_std: rng.random_range(-1.5..0.0),
                policy_output_gain: 1.0,
                value_output_gain: 1.0,
            };
            let mut net = PolicyValueNet::init(cfg, &mut rng).unwrap();
            let batch: Vec<Sample> = (0..16)
                .map(|_| {
                    let obs: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
                    let (dist, _) = net.forward(&obs).unwrap();
                    let (action, log_prob, _) = dist.sample(&mut rng, false);
                    Sample {
                        obs,
                        action,
                        old_log_prob: log_prob + rng.random_range(-0.4..0.4),
                        advantage: rng.random_range(-2.0..2.0),
                        value_target: rng.random_range(-2.0..2.0),
                    }
                })
                .collect();
            let (_, grad) = net.gradients(&spec, &batch).unwrap();
            for _ in 0..100 {
                let k = rng.random_range(0..net.num_params());
                let orig = net.params()[k];
                net.params_mut()[k] = orig + eps;
                let up = net.loss(&spec, &batch).unwrap().loss;
                net.params_mut()[k] = orig - eps;
                let down = net.loss(&spec, &batch).unwrap().loss;
                net.params_mut()[k] = orig;
                let fd = (up - down) / (2.0 * eps);
                let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict::new(
        "4",
        "analytic PPO-loss gradient vs central differences",
        worst < 1e-4 && secs < 30.0,
        format!("{checked} coordinates over 20 nets, max relative error {worst:.2e}, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- GAE

/// Direct double sum of discounted TD residuals, cut at episode ends.
fn gae_oracle(r: &[f64], v: &[f64], d: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if d[t] {
                0.0
            } else if t + 1 < n {
                v[t + 1]
            } else {
                boot
            };
            r[t] + g * next - v[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                sum += weight * delta[k];
                if d[k] {
                    break;
                }
                weight *= g * l;
            }
            sum
        })
        .collect()
}

fn gae_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    let mut run = |rng: &mut ChaCha8Rng, d: Vec<bool>| {
        let n = d.len();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let boot = rng.random_range(-1.0..1.0);
        let g = rng.random_range(0.9..1.0);
        let l = rng.random_range(0.8..1.0);
        let (adv, ret) = gae(&r, &v, &d, boot, g, l);
        let want = gae_oracle(&r, &v, &d, boot, g, l);
        for t in 0..n {
            worst = worst.max((adv[t] - want[t]).abs());
            worst = worst.max((ret[t] - (want[t] + v[t])).abs());
        }
        cases += 1;
    };
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        run(&mut rng, d);
    }
    for n in 1..=6usize {
        for bits in 0..(1u32 << n) {
            let d = (0..n).map(|i| bits >> i & 1 == 1).collect();
            run(&mut rng, d);
        }
    }
    Verdict::new(
        "5",
        "GAE vs direct sum",
        worst <= 1e-12,
        format!("{cases} sequences, max abs error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------- rewards

fn random_thrust(rng: &mut ChaCha8Rng, u: f64) -> ThrustCommand {
    ThrustCommand::new(rng.random_range(-u..u), rng.random_range(-u..u), rng.random_range(-u..u))
}

fn reward_decomposition() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad_sums = 0usize;
    let mut worst_telescope = 0.0f64;
    let mut episodes = 0usize;

    let insp = InspectionEnv::new(InspectionConfig::default()).unwrap();
    let mut s = insp.reset(0, false);
    for k in 0..10_000u64 {
        let (next, out) = insp.step(&s, &random_thrust(&mut rng, 1.0)).unwrap();
        let sum = out.components.named().iter().fold(0.0, |a, (_, v)| a + v);
        if sum != out.reward {
            bad_sums += 1;
        }
        s = if out.done.is_terminal() { insp.reset(k + 1, false) } else { next };
    }

    let dock = DockingEnv::new(DockingConfig::default()).unwrap();
    let a = docking::distance_decay();
    let mut s = dock.reset(0);
    let mut r0 = s.phys.distance();
    let mut telescoped = 0.0;
    for k in 0..10_000u64 {
        // drift toward the chief now and then so some episodes end by contact
        let thrust = if k % 3 == 0 {
            ThrustCommand(-s.phys.position.normalize() * 0.1)
        } else {
            random_thrust(&mut rng, 0.1)
        };
        let (next, out) = dock.step(&s, &thrust).unwrap();
        let sum = out.components.named().iter().fold(0.0, |a, (_, v)| a + v);
        if sum != out.reward {
            bad_sums += 1;
        }
        telescoped += out.components.dist_change;
        let closed = 2.0 * ((-a * next.phys.distance()).exp() - (-a * r0).exp());
        worst_telescope = worst_telescope.max((telescoped - closed).abs());
        s = if out.done.is_terminal() {
            episodes += 1;
            let fresh = dock.reset(k + 1);
            r0 = fresh.phys.distance();
            telescoped = 0.0;
            fresh
        } else {
            next
        };
    }
    Verdict::new(
        "6",
        "reward equals sum of components; distance term telescopes",
        bad_sums == 0 && worst_telescope <= 1e-9,
        format!(
            "2 x 10^4 steps, {bad_sums} mismatched sums, telescoping error {worst_telescope:.2e} over {episodes} finished docking episodes"
        ),
    )
}

// ---------------------------------------------------------------- terminations

fn termination_tags() -> Verdict {
    let mut got = Vec::new();

    let insp = InspectionEnv::new(InspectionConfig::default()).unwrap();
    let model = insp.model();
    let still = |p: [f64; 3]| HillState::from_array([p[0], p[1], p[2], 0.0, 0.0, 0.0]);
    let moving = |p: [f64; 3], v: [f64; 3]| HillState::from_array([p[0], p[1], p[2], v[0], v[1], v[2]]);
    let step_insp = |s: proxops::inspection::InspectionState| {
        insp.step(&s, &ThrustCommand::zero()).unwrap().1.done
    };

    // one point left, in plain view and sunlit
    let last = (0..model.len())
        .max_by(|&i, &j| {
            let xy = |k: usize| model.direction(k).xy().norm();
            xy(i).total_cmp(&xy(j))
        })
        .unwrap();
    let n = model.direction(last);
    let mut s = insp.start_from(still((n * 200.0).into()), SunState::new(n.y.atan2(n.x)), 0, true);
    s.inspected = PointMask::full(model.len());
    s.inspected.clear(last);
    got.push(("inspection all-inspected", step_insp(s), InspectionTermination::AllInspected));

    let s = insp.start_from(moving([16.0, 0.0, 0.0], [-0.5, 0.0, 0.0]), SunState::new(0.0), 0, true);
    got.push(("inspection crash", step_insp(s), InspectionTermination::Crash));

    let s = insp.start_from(moving([799.0, 0.0, 0.0], [0.5, 0.0, 0.0]), SunState::new(0.0), 0, true);
    got.push(("inspection out-of-bounds", step_insp(s), InspectionTermination::OutOfBounds));

    let mut s = insp.start_from(still([0.0, 0.0, 200.0]), SunState::new(0.0), 0, true);
    s.step_count = insp.config().max_steps - 1;
    got.push(("inspection timeout", step_insp(s), InspectionTermination::Timeout));

    let dock = DockingEnv::new(DockingConfig::default()).unwrap();
    let step_dock = |s: proxops::docking::DockingState| dock.step(&s, &ThrustCommand::zero()).unwrap().1.done;
    let cases = [
        ("docking docked", moving([10.1, 0.0, 0.0], [-0.15, 0.0, 0.0]), 0, DockingTermination::Docked),
        ("docking crashed", moving([10.3, 0.0, 0.0], [-0.5, 0.0, 0.0]), 0, DockingTermination::Crashed),
        ("docking out-of-bounds", moving([799.9, 0.0, 0.0], [0.5, 0.0, 0.0]), 0, DockingTermination::OutOfBounds),
        ("docking timeout", still([0.0, 0.0, 100.0]), dock.config().max_steps - 1, DockingTermination::Timeout),
    ];
    let mut dock_got = Vec::new();
    for (name, phys, steps, want) in cases {
        let mut s = dock.start_from(phys);
        s.step_count = steps;
        dock_got.push((name, step_dock(s), want));
    }

    let wrong: Vec<String> = got
        .iter()
        .filter(|(_, g, w)| g != w)
        .map(|(n, g, _)| format!("{n} -> {g:?}"))
        .chain(dock_got.iter().filter(|(_, g, w)| g != w).map(|(n, g, _)| format!("{n} -> {g:?}")))
        .collect();
    Verdict::new(
        "9",
        "termination tags from constructed states",
        wrong.is_empty(),
        if wrong.is_empty() {
            "4 inspection + 4 docking states each end with exactly their tag".into()
        } else {
            wrong.join("; ")
        },
    )
}

// ---------------------------------------------------------------- desk runs

const DESK_SEEDS: [u64; 3] = [0, 1, 2];

/// Trains every seed of `cfg`, writes the report, and returns the pooled
/// final-evaluation episodes.
fn desk_experiment(cfg: &ExperimentConfig) -> Vec<EpisodeMetrics> {
    for &seed in &cfg.seeds {
        run_seed(cfg, seed).unwrap();
    }
    let runs = load_runs(&cfg.config_dir()).unwrap();
    let rows = table_rows(&group_runs(&runs)).unwrap();
    write_report(&rows, &cfg.config_dir().join("report")).unwrap();
    runs.into_iter().flat_map(|r| r.episodes).collect()
}

fn desk_config(task: Task, space: ActionSpaceSpec, seeds: &[u64], root: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(task, space, Scale::Desk, root);
    cfg.seeds = seeds.to_vec();
    cfg.final_eval_cases = 10;
    cfg
}

fn metric_iqm(m: Metric, eps: &[EpisodeMetrics]) -> f64 {
    iqm(&m.values(eps)).unwrap()
}

fn desk_docking(root: &Path) -> (Verdict, ExperimentConfig) {
    let t0 = Instant::now();
    let space = ActionSpaceSpec::continuous(0.1).unwrap();
    let cfg = desk_config(Task::Docking, space.clone(), &DESK_SEEDS, root);
    let trained = desk_experiment(&cfg);
    let random = evaluate_policy(
        Task::Docking,
        &space,
        &RandomPolicy { space: space.clone() },
        trained.len(),
        FINAL_EVAL_SEED_BASE,
        false,
    )
    .unwrap();
    let base = metric_iqm(Metric::Success, &random);
    let succ = metric_iqm(Metric::Success, &trained);
    let initial = iqm(&trained.iter().map(|e| e.initial_distance).collect::<Vec<_>>()).unwrap();
    let fin = iqm(&trained.iter().map(|e| e.final_distance).collect::<Vec<_>>()).unwrap();
    let raw_rate = trained.iter().map(|e| e.success as f64).sum::<f64>() / trained.len() as f64;
    let pass = base == 0.0 && succ > base && fin < initial;
    (
        Verdict::new(
            "7a",
            "desk docking, continuous 0.1 N, seeds 0-2",
            pass,
            format!(
                "success IQM {succ:.3} (raw rate {raw_rate:.3}) vs random {base:.3}; final distance IQM {fin:.1} m vs initial {initial:.1} m; {} episodes, {:.0} s",
                trained.len(),
                t0.elapsed().as_secs_f64()
            ),
        ),
        cfg,
    )
}

fn desk_inspection(root: &Path) -> (Verdict, Verdict) {
    let t0 = Instant::now();
    let d3 = desk_config(Task::Inspection, ActionSpaceSpec::uniform(3, 0.1).unwrap(), &DESK_SEEDS, root);
    let d3_eps = desk_experiment(&d3);
    let points = metric_iqm(Metric::InspectedPoints, &d3_eps);
    let b = Verdict::new(
        "7b",
        "desk inspection, discrete-3 0.1 N, seeds 0-2",
        points >= 50.0,
        format!(
            "inspected points IQM {points:.1} over {} episodes, {:.0} s",
            d3_eps.len(),
            t0.elapsed().as_secs_f64()
        ),
    );

    let cont = desk_config(Task::Inspection, ActionSpaceSpec::continuous(1.0).unwrap(), &DESK_SEEDS, root);
    let cont_eps = desk_experiment(&cont);
    let dv_d3 = metric_iqm(Metric::DeltaV, &d3_eps);
    let dv_cont = metric_iqm(Metric::DeltaV, &cont_eps);
    let c = Verdict::new(
        "7c",
        "delta-v ordering, discrete-3 0.1 N below continuous 1.0 N",
        dv_d3 <= 1.2 * dv_cont,
        format!("delta-v IQM {dv_d3:.3} vs {dv_cont:.3} m/s (20% slack)"),
    )
    .advisory();
    (b, c)
}

fn determinism(first: &ExperimentConfig, root: &Path) -> Verdict {
    let mut again = first.clone();
    again.output_dir = root.to_path_buf();
    again.seeds = vec![0];
    let mut once = first.clone();
    once.seeds = vec![0];
    desk_experiment(&again);
    // the first tree holds three seeds; compare the seed-0 run and a
    // single-seed report rebuilt from it
    let single = root.join("single_report");
    let runs = load_runs(&once.run_dir(0)).unwrap();
    write_report(&table_rows(&group_runs(&runs)).unwrap(), &single).unwrap();

    let files = [
        "eval_log.csv",
        "train_log.csv",
        "final_eval.csv",
        "action_histogram.csv",
        "trajectory.csv",
        "final_policy.bin",
    ];
    let mut differing = Vec::new();
    for f in files {
        let a = std::fs::read(once.run_dir(0).join(f)).unwrap();
        let b = std::fs::read(again.run_dir(0).join(f)).unwrap();
        if a != b {
            differing.push(f.to_string());
        }
    }
    let report_dir = again.config_dir().join("report");
    for entry in std::fs::read_dir(&report_dir).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(single.join(&name)).unwrap();
        let b = std::fs::read(report_dir.join(&name)).unwrap();
        if a != b {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    Verdict::new(
        "8",
        "repeated desk run is byte-identical",
        differing.is_empty(),
        if differing.is_empty() {
            "run logs, final evaluation, histogram, trajectory, checkpoint and report all identical".into()
        } else {
            format!("differs: {}", differing.join(", "))
        },
    )
}

#[test]
fn acceptance() {
    let mut verdicts = vec![
        dynamics_oracle(),
        formula_suite(),
        geometry_oracle(),
        gradient_check(),
        gae_check(),
        reward_decomposition(),
    ];
    for v in &verdicts {
        v.print();
    }
    let push = |v: Verdict, all: &mut Vec<Verdict>| {
        v.print();
        all.push(v);
    };
    if std::env::var_os("PROXOPS_SKIP_DESK").is_some() {
        for (id, name) in [
            ("7a", "desk docking"),
            ("7b", "desk inspection"),
            ("7c", "delta-v ordering"),
            ("8", "determinism"),
        ] {
            push(Verdict::skipped(id, name), &mut verdicts);
        }
    } else {
        let root = tempfile::tempdir().unwrap();
        let (a, docking_cfg) = desk_docking(&root.path().join("first"));
        push(a, &mut verdicts);
        let (b, c) = desk_inspection(&root.path().join("first"));
        push(b, &mut verdicts);
        push(c, &mut verdicts);
        push(determinism(&docking_cfg, &root.path().join("second")), &mut verdicts);
    }
    push(termination_tags(), &mut verdicts);

    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| v.blocking && v.pass == Some(false))
        .map(|v| v.id)
        .collect();
    emit(&format!(
        "acceptance: {} pass, {} fail, {} skipped",
        verdicts.iter().filter(|v| v.pass == Some(true)).count(),
        verdicts.iter().filter(|v| v.pass == Some(false)).count(),
        verdicts.iter().filter(|v| v.pass.is_none()).count()
    ));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
