//! Turning accepted trajectories into training records.

use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sft::{SftRecord, Source};
use crate::protocol::{Trajectory, WorkerOrigin};

/// A planner record plus one record per worker call, or nothing when the
/// reward does not beat `k`. Worker calls that never reached the model
/// (empty retrieval) or fell back after an unusable reply are not training
/// data and are skipped.
pub fn select_training_units(t: &Trajectory, k: f64) -> Vec<SftRecord> {
    let Some(reward) = t.reward.filter(|&r| r > k) else {
        return Vec::new();
    };
    let mut out = vec![SftRecord::new(Source::Planner, &t.question_id, reward, &t.messages)];
    out.extend(
        t.worker_calls
            .iter()
            .filter(|c| c.origin == WorkerOrigin::Model)
            .map(|c| SftRecord::new(Source::Worker, &t.question_id, reward, &c.conversation())),
    );
    out
}

/// Drops trajectories of the same question that repeat an earlier one's
/// final answer and message list.
pub fn dedup(trajectories: &[Trajectory]) -> Vec<&Trajectory> {
    let mut seen = HashSet::new();
    trajectories
        .iter()
        .filter(|t| seen.insert((&t.question_id, &t.final_answer, &t.messages)))
        .collect()
}

/// Selects every deduplicated trajectory above `k`.
pub fn select_all(trajectories: &[Trajectory], k: f64) -> Vec<SftRecord> {
    dedup(trajectories)
        .into_iter()
        .flat_map(|t| select_training_units(t, k))
        .collect()
}

/// Uniformly draws up to `limit` trajectories with exact match 1 (seeded)
/// and expands each without a threshold. Drawn trajectories keep their
/// input order.
pub fn warmup_select(trajectories: &[Trajectory], limit: usize, seed: u64) -> Vec<SftRecord> {
    let correct: Vec<&Trajectory> = trajectories.iter().filter(|t| t.em == Some(1)).collect();
    let mut picked: Vec<usize> = if correct.len() <= limit {
        (0..correct.len()).collect()
    } else {
        index::sample(&mut ChaCha8Rng::seed_from_u64(seed), correct.len(), limit).into_vec()
    };
    picked.sort_unstable();
    picked
        .into_iter()
        .flat_map(|i| select_training_units(correct[i], f64::NEG_INFINITY))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Material;
    use crate::protocol::{EpisodeStatus, Message, WorkerCall};

    fn call(origin: WorkerOrigin) -> WorkerCall {
        WorkerCall {
            iteration: 0,
            subquestion: "sq".into(),
            target: None,
            materials: vec![Material::text("m")],
            prompt: vec![Message::system("ws"), Message::user("Question: sq\nContext:\n[0] m")],
            reply_raw: "<select>[0]</select><sentence>s</sentence>".into(),
            selected: vec![0],
            sentence: "s".into(),
            origin,
        }
    }

    pub(crate) fn traj(id: &str, reward: f64, em: u8, calls: Vec<WorkerCall>) -> Trajectory {
        Trajectory {
            question_id: id.into(),
            question: "q".into(),
            messages: vec![
                Message::system("s"),
                Message::user("Question: q"),
                Message::assistant("<search>sq</search>"),
                Message::user("Obs: s"),
                Message::assistant("<answer>a</answer>"),
            ],
            final_answer: Some("a".into()),
            reward: Some(reward),
            em: Some(em),
            iterations_used: usize::from(!calls.is_empty()),
            worker_calls: calls,
            status: EpisodeStatus::Answered,
            seed: 0,
        }
    }

    #[test]
    fn one_plus_worker_calls() {
        let t = traj("q", 1.0, 1, vec![call(WorkerOrigin::Model), call(WorkerOrigin::Model)]);
        let recs = select_training_units(&t, 0.5);
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].source, Source::Planner);
        assert!(recs.iter().all(|r| r.mask_is_sound() && r.reward == 1.0));
        assert_eq!(recs[1].messages.len(), 3);
    }

    #[test]
    fn threshold_is_strict() {
        assert!(select_training_units(&traj("q", 0.4, 0, vec![]), 0.5).is_empty());
        assert!(select_training_units(&traj("q", 0.5, 0, vec![]), 0.5).is_empty());
        assert_eq!(select_training_units(&traj("q", 0.51, 0, vec![]), 0.5).len(), 1);
    }

    #[test]
    fn non_model_worker_calls_are_skipped() {
        let t = traj("q", 1.0, 1, vec![call(WorkerOrigin::Fallback), call(WorkerOrigin::NoMaterials), call(WorkerOrigin::Model)]);
        assert_eq!(select_training_units(&t, 0.0).len(), 2);
    }

    #[test]
    fn duplicates_collapse() {
        let ts = vec![traj("q", 1.0, 1, vec![]), traj("q", 1.0, 1, vec![]), traj("r", 1.0, 1, vec![])];
        assert_eq!(dedup(&ts).len(), 2);
        assert_eq!(select_all(&ts, 0.5).len(), 2);
    }

    #[test]
    fn warmup_sizes() {
        let few: Vec<Trajectory> = (0..10).map(|i| traj(&format!("q{i}"), 1.0, 1, vec![])).collect();
        assert_eq!(warmup_select(&few, 300, 1).len(), 10);

        let many: Vec<Trajectory> = (0..1000).map(|i| traj(&format!("q{i}"), 1.0, 1, vec![])).collect();
        let a = warmup_select(&many, 300, 7);
        assert_eq!(a.len(), 300);
        assert_eq!(a, warmup_select(&many, 300, 7));
        assert_ne!(a, warmup_select(&many, 300, 8));

        let wrong: Vec<Trajectory> = (0..5).map(|i| traj(&format!("q{i}"), 0.5, 0, vec![])).collect();
        assert!(warmup_select(&wrong, 300, 1).is_empty());
    }
}
