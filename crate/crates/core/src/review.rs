//! Human review campaigns: sessions, a durable answer log and baseline reports.
//!
//! All state is derived from an append-only `events.jsonl` in the data
//! directory. Each event is synced to disk before the call that produced it
//! returns, and reopening the store replays the log.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::McqaDataset;
use crate::{rng, Error, Result, Scalar};

pub const EVENT_LOG: &str = "events.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub sample_id: String,
    pub chosen_index: usize,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub reviewer_id: String,
    pub dataset_id: String,
    pub campaign_id: String,
    pub seed: u64,
    pub show_video: bool,
    /// Presentation order for this reviewer.
    pub items: Vec<String>,
    pub answers: Vec<Answer>,
}

impl ReviewSession {
    pub fn is_complete(&self) -> bool {
        self.answers.len() == self.items.len()
    }

    pub fn answered(&self, sample_id: &str) -> bool {
        self.answers.iter().any(|a| a.sample_id == sample_id)
    }

    pub fn next_unanswered(&self) -> Option<(usize, &str)> {
        self.items
            .iter()
            .enumerate()
            .find(|(_, id)| !self.answered(id))
            .map(|(i, id)| (i, id.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSession {
    pub reviewer_id: String,
    pub dataset_id: String,
    pub sample_count: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub show_video: bool,
    /// Defaults to `"{dataset_id}:{seed}"`.
    #[serde(default)]
    pub campaign_id: Option<String>,
}

fn default_true() -> bool {
    true
}

/// What a reviewer sees for one item. Never carries correctness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemView {
    pub session_id: String,
    pub sample_id: String,
    pub position: usize,
    pub total: usize,
    pub question: String,
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub sample_id: String,
    pub answered: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    SessionCreated { session: ReviewSession },
    AnswerSubmitted { session_id: String, answer: Answer },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewerStat<T> {
    pub reviewer_id: String,
    pub session_id: String,
    pub n_answered: usize,
    pub correct: usize,
    pub accuracy: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport<T> {
    pub campaign_id: String,
    pub n_items: usize,
    pub n_reviewers: usize,
    pub reviewers: Vec<ReviewerStat<T>>,
    pub mean_accuracy: T,
    /// Symmetric, unit diagonal, row/column order as `reviewers`.
    /// `None` where two reviewers share no answered item.
    pub agreement: Vec<Vec<Option<T>>>,
    /// Mean over reviewer pairs with overlap; absent with fewer than two reviewers.
    pub mean_pairwise_agreement: Option<T>,
    pub omitted_pairs: Vec<(String, String)>,
    /// Sessions in the campaign that are not yet complete and were left out.
    pub pending_sessions: Vec<String>,
}

impl<T: Scalar> BaselineReport<T> {
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> BaselineReport<U> {
        BaselineReport {
            campaign_id: self.campaign_id.clone(),
            n_items: self.n_items,
            n_reviewers: self.n_reviewers,
            reviewers: self
                .reviewers
                .iter()
                .map(|r| ReviewerStat {
                    reviewer_id: r.reviewer_id.clone(),
                    session_id: r.session_id.clone(),
                    n_answered: r.n_answered,
                    correct: r.correct,
                    accuracy: f(r.accuracy),
                })
                .collect(),
            mean_accuracy: f(self.mean_accuracy),
            agreement: self
                .agreement
                .iter()
                .map(|row| row.iter().map(|c| c.map(&f)).collect())
                .collect(),
            mean_pairwise_agreement: self.mean_pairwise_agreement.map(&f),
            omitted_pairs: self.omitted_pairs.clone(),
            pending_sessions: self.pending_sessions.clone(),
        }
    }

    /// Round once, after exact aggregation.
    pub fn to_f64(&self) -> BaselineReport<f64> {
        self.map(|x| x.to_f64_lossy())
    }
}

/// Accuracy and raw pairwise agreement over completed sessions.
pub fn baseline_report<T: Scalar>(
    campaign_id: &str,
    sessions: &[&ReviewSession],
    dataset: &McqaDataset,
) -> Result<BaselineReport<T>> {
    let (done, pending): (Vec<&ReviewSession>, Vec<&ReviewSession>) =
        sessions.iter().partition(|s| s.is_complete());
    if done.is_empty() {
        return Err(Error::Precondition(format!(
            "campaign `{campaign_id}` has no completed session"
        )));
    }
    let choices: Vec<BTreeMap<&str, usize>> = done
        .iter()
        .map(|s| {
            s.answers
                .iter()
                .map(|a| (a.sample_id.as_str(), a.chosen_index))
                .collect()
        })
        .collect();
    let mut reviewers = Vec::with_capacity(done.len());
    for (s, picks) in done.iter().zip(&choices) {
        let mut correct = 0;
        for (id, &chosen) in picks {
            let inst = dataset.get(id).ok_or_else(|| {
                Error::Integrity(format!("answered item `{id}` missing from dataset"))
            })?;
            correct += (inst.correct_index == chosen) as usize;
        }
        reviewers.push(ReviewerStat {
            reviewer_id: s.reviewer_id.clone(),
            session_id: s.session_id.clone(),
            n_answered: picks.len(),
            correct,
            accuracy: T::ratio(correct as u64, picks.len().max(1) as u64),
        });
    }
    let r = done.len();
    let mean_accuracy =
        reviewers.iter().fold(T::zero(), |acc, s| acc + s.accuracy) / T::from_count(r as u64);

    let mut agreement = vec![vec![None; r]; r];
    let mut pair_sum = T::zero();
    let mut pairs = 0u64;
    let mut omitted_pairs = Vec::new();
    for i in 0..r {
        agreement[i][i] = Some(T::one());
        for j in i + 1..r {
            let (mut shared, mut same) = (0u64, 0u64);
            for (id, ci) in &choices[i] {
                if let Some(cj) = choices[j].get(id) {
                    shared += 1;
                    same += (ci == cj) as u64;
                }
            }
            if shared == 0 {
                omitted_pairs.push((done[i].session_id.clone(), done[j].session_id.clone()));
                continue;
            }
            let a = T::ratio(same, shared);
            agreement[i][j] = Some(a);
            agreement[j][i] = Some(a);
            pair_sum = pair_sum + a;
            pairs += 1;
        }
    }
    let n_items = choices
        .iter()
        .flat_map(|c| c.keys())
        .collect::<BTreeSet<_>>()
        .len();
    Ok(BaselineReport {
        campaign_id: campaign_id.to_string(),
        n_items,
        n_reviewers: r,
        reviewers,
        mean_accuracy,
        agreement,
        mean_pairwise_agreement: (pairs > 0).then(|| pair_sum / T::from_count(pairs)),
        omitted_pairs,
        pending_sessions: pending.iter().map(|s| s.session_id.clone()).collect(),
    })
}

struct State {
    sessions: BTreeMap<String, ReviewSession>,
    log: File,
}

/// Review sessions over a fixed set of loaded datasets.
pub struct ReviewStore {
    dir: PathBuf,
    datasets: BTreeMap<String, McqaDataset>,
    state: Mutex<State>,
}

impl std::fmt::Debug for ReviewStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReviewStore")
            .field("dir", &self.dir)
            .field("datasets", &self.datasets.keys().collect::<Vec<_>>())
            .finish()
    }
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl ReviewStore {
    /// Open (or create) the store in `dir` and replay its event log.
    pub fn open(dir: &Path, datasets: BTreeMap<String, McqaDataset>) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(EVENT_LOG);
        let mut sessions = BTreeMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            let mut reader = BufReader::new(file);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let read = reader
                    .read_line(&mut line)
                    .map_err(|e| Error::io(&path, e))?;
                if read == 0 {
                    break;
                }
                lineno += 1;
                // A torn final write never got acknowledged; drop it.
                if !line.ends_with('\n') {
                    break;
                }
                let event: Event =
                    serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse {
                        line: lineno,
                        message: e.to_string(),
                    })?;
                apply(&mut sessions, event)?;
            }
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            datasets,
            state: Mutex::new(State { sessions, log }),
        })
    }

    pub fn dataset_ids(&self) -> impl Iterator<Item = &str> {
        self.datasets.keys().map(String::as_str)
    }

    fn dataset(&self, id: &str) -> Result<&McqaDataset> {
        self.datasets
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("dataset `{id}`")))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn append(&self, state: &mut State, event: &Event) -> Result<()> {
        let path = self.dir.join(EVENT_LOG);
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        state
            .log
            .write_all(line.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        state.log.sync_data().map_err(|e| Error::io(&path, e))
    }

    /// Start a session. Reviewers in one campaign get the same items in
    /// their own seeded order.
    pub fn create_session(&self, req: NewSession) -> Result<ReviewSession> {
        let ds = self.dataset(&req.dataset_id)?;
        if req.sample_count == 0 || req.sample_count > ds.len() {
            return Err(Error::Precondition(format!(
                "sample_count must be in 1..={}, got {}",
                ds.len(),
                req.sample_count
            )));
        }
        let mut pool: Vec<usize> = (0..ds.len()).collect();
        pool.shuffle(&mut rng::keyed(
            req.seed,
            "review-campaign",
            &[&req.dataset_id],
        ));
        let mut items: Vec<String> = pool[..req.sample_count]
            .iter()
            .map(|&i| ds.records()[i].sample_id.clone())
            .collect();
        items.shuffle(&mut rng::keyed(
            req.seed,
            "review-order",
            &[&req.dataset_id, &req.reviewer_id],
        ));
        let mut state = self.lock();
        let session = ReviewSession {
            session_id: format!("session-{:04}", state.sessions.len() + 1),
            campaign_id: req
                .campaign_id
                .unwrap_or_else(|| format!("{}:{}", req.dataset_id, req.seed)),
            reviewer_id: req.reviewer_id,
            dataset_id: req.dataset_id,
            seed: req.seed,
            show_video: req.show_video,
            items,
            answers: Vec::new(),
        };
        let event = Event::SessionCreated {
            session: session.clone(),
        };
        self.append(&mut state, &event)?;
        apply(&mut state.sessions, event)?;
        Ok(session)
    }

    pub fn session(&self, session_id: &str) -> Result<ReviewSession> {
        self.lock()
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session `{session_id}`")))
    }

    /// The next unanswered item, or `None` once the session is complete.
    pub fn next_item(&self, session_id: &str) -> Result<Option<ItemView>> {
        let session = self.session(session_id)?;
        let Some((position, sample_id)) = session.next_unanswered() else {
            return Ok(None);
        };
        let inst = self
            .dataset(&session.dataset_id)?
            .get(sample_id)
            .ok_or_else(|| Error::Integrity(format!("item `{sample_id}` missing from dataset")))?;
        Ok(Some(ItemView {
            session_id: session.session_id.clone(),
            sample_id: sample_id.to_string(),
            position,
            total: session.items.len(),
            question: inst.question.clone(),
            options: inst.options.iter().map(|o| o.text.clone()).collect(),
            video_ref: session.show_video.then(|| inst.video_ref.clone()),
        }))
    }

    /// Record an answer; returns only after it is on disk.
    pub fn submit_answer(
        &self,
        session_id: &str,
        sample_id: &str,
        chosen_index: usize,
    ) -> Result<Ack> {
        let mut state = self.lock();
        let session = state
            .sessions
            .get(session_id)
            .ok_or_else(|| Error::NotFound(format!("session `{session_id}`")))?;
        if !session.items.iter().any(|i| i == sample_id) {
            return Err(Error::NotFound(format!(
                "item `{sample_id}` in session `{session_id}`"
            )));
        }
        if session.answered(sample_id) {
            return Err(Error::Conflict(format!(
                "item `{sample_id}` already answered"
            )));
        }
        let k = self
            .dataset(&session.dataset_id)?
            .get(sample_id)
            .map(|i| i.k())
            .unwrap_or(0);
        if chosen_index >= k {
            return Err(Error::Precondition(format!(
                "chosen_index {chosen_index} out of range for {k} options"
            )));
        }
        let event = Event::AnswerSubmitted {
            session_id: session_id.to_string(),
            answer: Answer {
                sample_id: sample_id.to_string(),
                chosen_index,
                timestamp: now_millis(),
            },
        };
        self.append(&mut state, &event)?;
        apply(&mut state.sessions, event)?;
        let session = &state.sessions[session_id];
        Ok(Ack {
            session_id: session_id.to_string(),
            sample_id: sample_id.to_string(),
            answered: session.answers.len(),
            remaining: session.items.len() - session.answers.len(),
        })
    }

    pub fn sessions_in(&self, campaign_id: &str) -> Vec<ReviewSession> {
        self.lock()
            .sessions
            .values()
            .filter(|s| s.campaign_id == campaign_id)
            .cloned()
            .collect()
    }

    /// Baseline over the campaign's completed sessions, from one snapshot.
    pub fn report<T: Scalar>(&self, campaign_id: &str) -> Result<BaselineReport<T>> {
        let sessions = self.sessions_in(campaign_id);
        let first = sessions
            .first()
            .ok_or_else(|| Error::NotFound(format!("campaign `{campaign_id}`")))?;
        let ds = self.dataset(&first.dataset_id)?;
        let refs: Vec<&ReviewSession> = sessions.iter().collect();
        baseline_report(campaign_id, &refs, ds)
    }
}

fn apply(sessions: &mut BTreeMap<String, ReviewSession>, event: Event) -> Result<()> {
    match event {
        Event::SessionCreated { session } => {
            sessions.insert(session.session_id.clone(), session);
        }
        Event::AnswerSubmitted { session_id, answer } => {
            sessions
                .get_mut(&session_id)
                .ok_or_else(|| {
                    Error::Integrity(format!("answer for unknown session `{session_id}`"))
                })?
                .answers
                .push(answer);
        }
    }
    Ok(())
}
