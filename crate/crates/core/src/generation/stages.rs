use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::expert::{answer_text, DistractorRequest, Expert};
use super::pool::{AnswerPool, Stage1Output};
use super::rewrite::{mentions_agent, rewrite_agent_id};
use crate::dataset::{
    AnswerOption, BaseSample, ManeuverLabel, McqaInstance, OptionOrigin, Variant,
};
use crate::{rng, Error, Result};

/// Stage I: realize the question and ground-truth answer for one sample.
///
/// The question must name the target agent by id; the answer must be
/// non-empty. Violations are content errors that flag the sample.
pub fn format_qa(sample: &BaseSample, expert: &dyn Expert) -> Result<Stage1Output> {
    let qa = expert.realize(sample)?;
    let content = |message: &str| Error::Content {
        sample_id: sample.sample_id.clone(),
        message: message.to_string(),
    };
    if !mentions_agent(&qa.question, &sample.agent_id) {
        return Err(content("question does not reference the target agent"));
    }
    if qa.answer.trim().is_empty() {
        return Err(content("empty ground-truth answer"));
    }
    Ok(Stage1Output {
        sample_id: sample.sample_id.clone(),
        agent_id: sample.agent_id.clone(),
        video_ref: sample.video_ref.clone(),
        label: sample.label,
        question: qa.question,
        gt_answer: qa.answer,
    })
}

fn normalized(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Stage II baseline: ask the expert for `k − 1` distractors.
///
/// Candidates that are blank, duplicate the answer or each other, or share
/// the answer's label are dropped. A shortfall is a generation error that
/// carries the usable texts.
pub fn gen_distractors_llm(
    stage1: &Stage1Output,
    expert: &dyn Expert,
    k: usize,
) -> Result<Vec<AnswerOption>> {
    let count = k.saturating_sub(1);
    let request = DistractorRequest {
        sample_id: &stage1.sample_id,
        agent_id: &stage1.agent_id,
        label: stage1.label,
        question: &stage1.question,
        video_ref: &stage1.video_ref,
        gt_answer: &stage1.gt_answer,
        count,
    };
    let proposals = expert.propose_distractors(&request)?;
    let mut seen = HashSet::from([normalized(&stage1.gt_answer)]);
    let mut kept = Vec::with_capacity(count);
    for p in proposals {
        if kept.len() == count {
            break;
        }
        let text = p.text.trim().to_string();
        if text.is_empty() || p.label == stage1.label || !seen.insert(normalized(&text)) {
            continue;
        }
        kept.push(AnswerOption {
            text,
            source_label: p.label,
            source_sample_id: stage1.sample_id.clone(),
            is_correct: false,
            origin: OptionOrigin::LlmDistractor,
        });
    }
    if kept.len() < count {
        return Err(Error::Generation {
            sample_id: stage1.sample_id.clone(),
            message: format!(
                "expert produced {} usable distractors, need {count}",
                kept.len()
            ),
            partial: kept.into_iter().map(|o| o.text).collect(),
        });
    }
    Ok(kept)
}

/// Label-space distractor sampling.
///
/// Walks the labels other than the sample's own in a uniformly random order
/// and takes one pooled answer from each until `k − 1` are collected. Pool
/// entries from the sample itself, or whose rewritten text collides with an
/// option already chosen, are never used. A label whose bucket has nothing
/// usable is skipped in favour of the next one; if the walk runs out, the
/// skipped labels are filled from the label template.
pub fn debias_distractors(
    stage1: &Stage1Output,
    pool: &AnswerPool,
    k: usize,
    seed: u64,
) -> Result<Vec<AnswerOption>> {
    let count = k.saturating_sub(1);
    let mut eligible: Vec<ManeuverLabel> = ManeuverLabel::ALL
        .into_iter()
        .filter(|&l| l != stage1.label)
        .collect();
    if eligible.len() < count {
        return Err(Error::Generation {
            sample_id: stage1.sample_id.clone(),
            message: format!("{} eligible labels, need {count}", eligible.len()),
            partial: Vec::new(),
        });
    }
    let mut rng = rng::keyed(seed, "debias", &[&stage1.sample_id]);
    eligible.shuffle(&mut rng);

    let mut used_texts = HashSet::from([normalized(&stage1.gt_answer)]);
    let mut chosen = Vec::with_capacity(count);
    let mut skipped = Vec::new();
    for &label in &eligible {
        if chosen.len() == count {
            break;
        }
        let candidates: Vec<(String, String)> = pool
            .bucket(label)
            .iter()
            .filter(|e| e.sample_id != stage1.sample_id)
            .filter_map(|e| {
                let text = rewrite_agent_id(&e.text, &stage1.agent_id).ok()?;
                (!used_texts.contains(&normalized(&text))).then(|| (e.sample_id.clone(), text))
            })
            .collect();
        match candidates.choose(&mut rng) {
            Some((source, text)) => {
                used_texts.insert(normalized(text));
                chosen.push(AnswerOption {
                    text: text.clone(),
                    source_label: label,
                    source_sample_id: source.clone(),
                    is_correct: false,
                    origin: OptionOrigin::PoolDistractor,
                });
            }
            None => skipped.push(label),
        }
    }
    for label in skipped {
        if chosen.len() == count {
            break;
        }
        let text = answer_text(&stage1.agent_id, label);
        if !used_texts.insert(normalized(&text)) {
            continue;
        }
        chosen.push(AnswerOption {
            text,
            source_label: label,
            source_sample_id: format!("template:{label}"),
            is_correct: false,
            origin: OptionOrigin::PoolDistractor,
        });
    }
    if chosen.len() < count {
        return Err(Error::Generation {
            sample_id: stage1.sample_id.clone(),
            message: format!(
                "only {} distinct distractors available, need {count}",
                chosen.len()
            ),
            partial: chosen.into_iter().map(|o| o.text).collect(),
        });
    }
    Ok(chosen)
}

/// Combine the answer and distractors into an instance with the options in a
/// uniformly random order keyed by `(seed, sample_id)`.
pub fn assemble_instance(
    stage1: &Stage1Output,
    distractors: Vec<AnswerOption>,
    k: usize,
    variant: Variant,
    seed: u64,
) -> Result<McqaInstance> {
    if distractors.len() + 1 != k {
        return Err(Error::Integrity(format!(
            "`{}` has {} distractors, expected {}",
            stage1.sample_id,
            distractors.len(),
            k - 1
        )));
    }
    let mut options = Vec::with_capacity(k);
    options.push(AnswerOption {
        text: stage1.gt_answer.clone(),
        source_label: stage1.label,
        source_sample_id: stage1.sample_id.clone(),
        is_correct: true,
        origin: OptionOrigin::Stage1Gt,
    });
    options.extend(distractors);
    let mut texts = HashSet::new();
    if !options.iter().all(|o| texts.insert(o.text.as_str())) {
        return Err(Error::Integrity(format!(
            "`{}` has duplicate option texts",
            stage1.sample_id
        )));
    }
    options.shuffle(&mut rng::keyed(seed, "assemble", &[&stage1.sample_id]));
    let correct_index = options
        .iter()
        .position(|o| o.is_correct)
        .expect("answer present");
    Ok(McqaInstance {
        sample_id: stage1.sample_id.clone(),
        question: stage1.question.clone(),
        video_ref: stage1.video_ref.clone(),
        options,
        correct_index,
        variant,
        generation_seed: seed,
    })
}

/// Blocked randomization of answer positions across a dataset.
///
/// Each consecutive block of `k` instances receives a seeded permutation of
/// `0..k` as its answer positions, so position counts differ by at most one
/// (per option count). The answer is swapped into place; the relative order of
/// the distractors stays as assembled.
pub fn balance_positions(instances: &mut [McqaInstance], seed: u64) {
    let mut by_k: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        by_k.entry(inst.k()).or_default().push(i);
    }
    for (k, members) in by_k {
        if k == 0 {
            continue;
        }
        for (block, chunk) in members.chunks(k).enumerate() {
            let mut slots: Vec<usize> = (0..k).collect();
            slots.shuffle(&mut rng::keyed(
                seed,
                "positions",
                &[&k.to_string(), &block.to_string()],
            ));
            for (&idx, &target) in chunk.iter().zip(&slots) {
                let inst = &mut instances[idx];
                inst.options.swap(inst.correct_index, target);
                inst.correct_index = target;
            }
        }
    }
}

/// An instance with its options removed: the model must produce the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenEndedItem {
    pub sample_id: String,
    pub question: String,
    pub video_ref: String,
    pub answer: String,
}

impl OpenEndedItem {
    /// Re-attach options to recover the multiple-choice form.
    pub fn reattach(
        self,
        options: Vec<AnswerOption>,
        correct_index: usize,
        variant: Variant,
        generation_seed: u64,
    ) -> McqaInstance {
        McqaInstance {
            sample_id: self.sample_id,
            question: self.question,
            video_ref: self.video_ref,
            options,
            correct_index,
            variant,
            generation_seed,
        }
    }
}

pub fn mcqa_to_openended(inst: &McqaInstance) -> OpenEndedItem {
    OpenEndedItem {
        sample_id: inst.sample_id.clone(),
        question: inst.question.clone(),
        video_ref: inst.video_ref.clone(),
        answer: inst.options[inst.correct_index].text.clone(),
    }
}
