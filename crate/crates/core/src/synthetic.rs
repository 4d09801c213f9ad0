//! Seeded stand-ins for recorded demonstrations.
//!
//! Positions follow minimum-jerk profiles `p0 + (p1 − p0)(10s³ − 15s⁴ + 6s⁵)`.
//! Orientation rotation vectors are interpolated with the same profile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{DemoSet, Provenance};
use crate::error::{CoreError, Result};
use crate::trajectory::{Channel, ChannelLayout, Sample, Trajectory};

pub const SAMPLE_RATE: f64 = 50.0;
pub const DOOR_CLASS: &str = "door";
pub const DOOR_FRAME: &str = "door_handle";
pub const DOOR_TASK: &str = "reach_handle";
pub const PUNCH_CLASS: &str = "punch_target";
pub const PUNCH_FRAME: &str = "punch_target";
pub const PUNCH_FAMILIES: [&str; 3] = ["jab", "hook", "uppercut"];
/// Label of the single primitive fitted over every punch family.
pub const PUNCH_TASK: &str = "punch";
/// Peak lateral/vertical excursion separating the punch families, meters.
pub const PUNCH_BUMP: f64 = 0.25;
/// Endpoint jitter of door reaches around the handle origin, meters.
pub const DOOR_END_JITTER: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    /// `demos` reaches towards a door handle, starting at approach angles
    /// (yaw about the handle's vertical axis) drawn from `approach_angle`.
    DoorReach { demos: usize, approach_angle: (f64, f64) },
    /// Three punch families with `per_family` demos each.
    Punch { per_family: usize },
}

impl TaskSpec {
    pub fn door(demos: usize) -> Self {
        TaskSpec::DoorReach {
            demos,
            approach_angle: (-0.4, 0.4),
        }
    }

    pub fn punch(per_family: usize) -> Self {
        TaskSpec::Punch { per_family }
    }
}

pub fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

pub fn door_layout() -> ChannelLayout {
    ChannelLayout::new(vec![
        Channel::position("right_hand"),
        Channel::orientation("right_hand"),
    ])
}

pub fn punch_layout() -> ChannelLayout {
    ChannelLayout::new(vec![
        Channel::position("left_hand"),
        Channel::orientation("left_hand"),
        Channel::orientation("left_forearm"),
        Channel::orientation("chest"),
    ])
}

/// One demo set per task: a single set for door reaches, one per family for punches.
pub fn generate_synthetic(spec: &TaskSpec, seed: u64) -> Result<Vec<DemoSet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *spec {
        TaskSpec::DoorReach { demos, approach_angle } => {
            if demos < 2 {
                return Err(CoreError::InvalidArgument("door reach needs at least 2 demos".into()));
            }
            if approach_angle.0.is_nan() || approach_angle.1.is_nan() || approach_angle.0 > approach_angle.1 {
                return Err(CoreError::InvalidArgument("approach angle range is reversed".into()));
            }
            let trajs = (0..demos)
                .map(|_| door_reach(&mut rng, approach_angle))
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![DemoSet::new(DOOR_TASK, DOOR_FRAME, Provenance::Synthetic, trajs)?])
        }
        TaskSpec::Punch { per_family } => {
            if per_family < 2 {
                return Err(CoreError::InvalidArgument(
                    "punch families need at least 2 demos each".into(),
                ));
            }
            PUNCH_FAMILIES
                .iter()
                .enumerate()
                .map(|(family, label)| {
                    let trajs = (0..per_family)
                        .map(|_| punch(&mut rng, family))
                        .collect::<Result<Vec<_>>>()?;
                    DemoSet::new(label, PUNCH_FRAME, Provenance::Synthetic, trajs)
                })
                .collect()
        }
    }
}

/// Pools per-family punch sets into the single multi-technique set.
pub fn pool_punches(families: &[DemoSet]) -> Result<DemoSet> {
    let demos = families.iter().flat_map(|s| s.demos.iter().cloned()).collect();
    DemoSet::new(PUNCH_TASK, PUNCH_FRAME, Provenance::Synthetic, demos)
}

fn gaussian3(rng: &mut ChaCha8Rng, sd: f64) -> [f64; 3] {
    let n = Normal::new(0.0, sd).expect("finite standard deviation");
    [n.sample(rng), n.sample(rng), n.sample(rng)]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn lerp3(a: [f64; 3], b: [f64; 3], k: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * k,
        a[1] + (b[1] - a[1]) * k,
        a[2] + (b[2] - a[2]) * k,
    ]
}

fn sampled(duration: f64, layout: ChannelLayout, frame: &str, f: impl Fn(f64) -> Vec<f64>) -> Result<Trajectory> {
    let n = (duration * SAMPLE_RATE).round() as usize + 1;
    let samples = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            Sample::new(i as f64 / SAMPLE_RATE, f(s))
        })
        .collect();
    Trajectory::new(layout, frame, samples)
}

/// Point inside a ball of radius `r`, drawn uniformly.
fn in_ball(rng: &mut ChaCha8Rng, r: f64) -> [f64; 3] {
    loop {
        let p = [
            rng.random_range(-r..=r),
            rng.random_range(-r..=r),
            rng.random_range(-r..=r),
        ];
        if p.iter().map(|v| v * v).sum::<f64>() <= r * r {
            return p;
        }
    }
}

fn door_reach(rng: &mut ChaCha8Rng, approach: (f64, f64)) -> Result<Trajectory> {
    let yaw = if approach.0 < approach.1 {
        rng.random_range(approach.0..approach.1)
    } else {
        approach.0
    };
    let distance = rng.random_range(0.5..0.6);
    let height = rng.random_range(-0.08..0.08);
    let p0 = [distance * yaw.cos(), distance * yaw.sin(), height];
    let p1 = in_ball(rng, DOOR_END_JITTER);
    let r0 = add([0.0, 0.0, 0.5 * yaw], gaussian3(rng, 0.03));
    let r1 = gaussian3(rng, 0.01);
    let duration = rng.random_range(1.5..2.0);
    sampled(duration, door_layout(), DOOR_FRAME, |s| {
        let b = min_jerk(s);
        let mut v = lerp3(p0, p1, b).to_vec();
        v.extend(lerp3(r0, r1, b));
        v
    })
}

/// Family offset at phase `s`: zero for jabs, sideways for hooks, from below
/// for uppercuts.
pub fn punch_offset(family: usize, s: f64) -> [f64; 3] {
    let bump = PUNCH_BUMP * 16.0 * s * s * (1.0 - s) * (1.0 - s);
    match family {
        0 => [0.0; 3],
        1 => [0.0, bump, 0.0],
        _ => [0.0, 0.0, -bump],
    }
}

fn punch(rng: &mut ChaCha8Rng, family: usize) -> Result<Trajectory> {
    let p0 = add([-0.45, 0.15, -0.05], gaussian3(rng, 0.02));
    let p1 = gaussian3(rng, 0.02);
    // final hand, forearm and chest rotations per family
    let twist = match family {
        0 => ([-1.2, 0.0, 0.0], [-0.6, 0.0, 0.0], [0.0, 0.0, -0.15]),
        1 => ([0.0, 0.0, -1.0], [0.0, 0.0, -0.7], [0.0, 0.0, -0.45]),
        _ => ([0.0, -1.0, 0.0], [0.0, -0.7, 0.0], [0.0, 0.2, -0.1]),
    };
    let hand = add(twist.0, gaussian3(rng, 0.05));
    let forearm = add(twist.1, gaussian3(rng, 0.05));
    let chest = add(twist.2, gaussian3(rng, 0.03));
    let start = [gaussian3(rng, 0.03), gaussian3(rng, 0.03), gaussian3(rng, 0.02)];
    let duration = rng.random_range(0.55..0.7);
    sampled(duration, punch_layout(), PUNCH_FRAME, |s| {
        let b = min_jerk(s);
        let mut v = add(lerp3(p0, p1, b), punch_offset(family, s)).to_vec();
        v.extend(lerp3(start[0], hand, b));
        v.extend(lerp3(start[1], forearm, b));
        v.extend(lerp3(start[2], chest, b));
        v
    })
}

/// Adds zero-mean Gaussian noise to every value of a trajectory; positions
/// get `position_sd`, everything else `orientation_sd`.
pub fn with_noise(traj: &Trajectory, position_sd: f64, orientation_sd: f64, rng: &mut ChaCha8Rng) -> Trajectory {
    let pos = Normal::new(0.0, position_sd.max(0.0)).expect("finite standard deviation");
    let ori = Normal::new(0.0, orientation_sd.max(0.0)).expect("finite standard deviation");
    let kinds: Vec<bool> = traj
        .channels
        .channels()
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.kind == crate::trajectory::ChannelKind::Position, c.dim))
        .collect();
    let mut out = traj.clone();
    for s in &mut out.samples {
        for (v, &is_pos) in s.values.iter_mut().zip(&kinds) {
            *v += if is_pos { pos.sample(rng) } else { ori.sample(rng) };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_jerk_profile() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn door_reaches_end_at_the_handle() {
        let sets = generate_synthetic(&TaskSpec::door(20), 7).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].demos.len(), 20);
        for d in &sets[0].demos {
            let end = &d.samples.last().unwrap().values;
            let r = (end[0].powi(2) + end[1].powi(2) + end[2].powi(2)).sqrt();
            assert!(r <= DOOR_END_JITTER + 1e-12);
            let start = &d.samples[0].values;
            let r0 = (start[0].powi(2) + start[1].powi(2)).sqrt();
            assert!((0.5..0.6).contains(&r0));
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_synthetic(&TaskSpec::punch(9), 11).unwrap();
        let b = generate_synthetic(&TaskSpec::punch(9), 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&TaskSpec::punch(9), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pooled_punches_keep_every_demo() {
        let sets = generate_synthetic(&TaskSpec::punch(9), 3).unwrap();
        let pooled = pool_punches(&sets).unwrap();
        assert_eq!(pooled.task_label, PUNCH_TASK);
        assert_eq!(pooled.demos.len(), 27);
        assert_eq!(pooled.demos[9], sets[1].demos[0]);
    }

    #[test]
    fn punch_families_are_separated_at_mid_phase() {
        let sets = generate_synthetic(&TaskSpec::punch(9), 3).unwrap();
        let mids: Vec<Vec<[f64; 3]>> = sets
            .iter()
            .map(|s| {
                s.demos
                    .iter()
                    .map(|d| {
                        let v = &d.samples[(d.len() - 1) / 2].values;
                        [v[0], v[1], v[2]]
                    })
                    .collect()
            })
            .collect();
        let mean = |ps: &[[f64; 3]]| {
            let n = ps.len() as f64;
            [0, 1, 2].map(|k| ps.iter().map(|p| p[k]).sum::<f64>() / n)
        };
        let sd = |ps: &[[f64; 3]]| {
            let m = mean(ps);
            let n = ps.len() as f64;
            (ps.iter()
                .map(|p| (0..3).map(|k| (p[k] - m[k]).powi(2)).sum::<f64>())
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        };
        let worst_sd = mids.iter().map(|m| sd(m)).fold(0.0, f64::max);
        for i in 0..3 {
            for j in i + 1..3 {
                let (a, b) = (mean(&mids[i]), mean(&mids[j]));
                let gap = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
                assert!(gap >= 5.0 * worst_sd, "{gap} vs {worst_sd}");
            }
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(generate_synthetic(&TaskSpec::door(1), 0).is_err());
        assert!(generate_synthetic(&TaskSpec::punch(1), 0).is_err());
        let reversed = TaskSpec::DoorReach {
            demos: 5,
            approach_angle: (0.5, -0.5),
        };
        assert!(generate_synthetic(&reversed, 0).is_err());
    }
}
