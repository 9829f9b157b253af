use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{BaseDataset, BaseSample, Dataset, ManeuverLabel, Split};
use crate::rng;

/// Parameters of the synthetic base-dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub n: usize,
    /// Fraction of samples whose target agent is not visible.
    pub not_visible_rate: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SynthOptions {
    pub fn new(n: usize, not_visible_rate: f64, seed: u64) -> Self {
        Self {
            n,
            not_visible_rate,
            test_fraction: 0.03,
            seed,
        }
    }

    /// Labels cycle through the twelve base maneuvers (counts differ by at most
    /// one) in a seeded order; exactly `round(n · rate)` samples are hidden.
    /// The output is raw: labels are not yet relabeled for visibility.
    pub fn generate(&self) -> BaseDataset {
        let n = self.n;
        let mut labels: Vec<ManeuverLabel> = (0..n).map(|i| ManeuverLabel::BASE[i % 12]).collect();
        labels.shuffle(&mut rng::keyed(self.seed, "synth-labels", &[]));

        let hidden_count = count_for(n, self.not_visible_rate);
        let mut hidden = vec![false; n];
        for i in index::sample(
            &mut rng::keyed(self.seed, "synth-hidden", &[]),
            n,
            hidden_count,
        ) {
            hidden[i] = true;
        }
        let test_count = count_for(n, self.test_fraction);
        let mut test = vec![false; n];
        for i in index::sample(
            &mut rng::keyed(self.seed, "synth-split", &[]),
            n,
            test_count,
        ) {
            test[i] = true;
        }

        let records = (0..n)
            .map(|i| {
                let sample_id = format!("s{i:06}");
                let agent: u32 =
                    rng::keyed(self.seed, "synth-agent", &[&sample_id]).random_range(1..1000);
                BaseSample {
                    video_ref: format!("bev://clips/{sample_id}.mp4"),
                    agent_id: agent.to_string(),
                    label: labels[i],
                    agent_visible: !hidden[i],
                    split: if test[i] { Split::Test } else { Split::Train },
                    sample_id,
                }
            })
            .collect();
        Dataset::new(records).expect("generated ids are unique")
    }
}

fn count_for(n: usize, rate: f64) -> usize {
    ((n as f64) * rate.clamp(0.0, 1.0)).round() as usize
}

/// Deterministic stand-in for a labeled driving dataset.
pub fn gen_synthetic_base(n: usize, not_visible_rate: f64, seed: u64) -> BaseDataset {
    SynthOptions::new(n, not_visible_rate, seed).generate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{apply_visibility_relabel, label_counts};

    #[test]
    fn twelve_samples_cover_each_label_once() {
        let ds = gen_synthetic_base(12, 0.0, 7);
        assert_eq!(ds.len(), 12);
        assert!(ds.iter().all(|s| s.agent_visible));
        let counts = label_counts(&ds);
        assert_eq!(counts.len(), 12);
        assert!(counts.values().all(|&c| c == 1));
    }

    #[test]
    fn deterministic_output() {
        let a = gen_synthetic_base(300, 0.188, 5).to_canonical_bytes();
        let b = gen_synthetic_base(300, 0.188, 5).to_canonical_bytes();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic_base(300, 0.188, 6).to_canonical_bytes());
    }

    #[test]
    fn sentinel_fraction_after_relabel() {
        let ds = apply_visibility_relabel(&gen_synthetic_base(2000, 0.188, 1));
        let hidden = label_counts(&ds)[&ManeuverLabel::AgentNotVisible];
        let frac = hidden as f64 / 2000.0;
        assert!((frac - 0.188).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn agent_ids_are_numeric() {
        let ds = gen_synthetic_base(50, 0.1, 2);
        assert!(ds
            .iter()
            .all(|s| s.agent_id.chars().all(|c| c.is_ascii_digit())));
    }
}
