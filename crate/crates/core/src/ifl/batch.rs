//! Concurrent batch runs and their on-disk log.
//!
//! The run log has one JSON line per iteration record, tagged with the
//! question id; the last line of each run also carries its stop reason.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{run_ifl, IflConfig, IflError, IflRun, IterationRecord, StopReason};
use crate::corpus::CorpusRecord;
use crate::critic::Critic;
use crate::feedback::BandThresholds;
use crate::gateway::Generator;

/// Runs every record, at most `config.parallelism` at a time. Results come
/// back in input order.
pub fn run_batch(
    records: &[CorpusRecord],
    generator: &dyn Generator,
    critic: &dyn Critic,
    thresholds: &BandThresholds,
    config: &IflConfig,
) -> Vec<Result<IflRun, IflError>> {
    let slots: Vec<Mutex<Option<Result<IflRun, IflError>>>> = records.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.parallelism.clamp(1, records.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(record) = records.get(i) else {
                    break;
                };
                let result = run_ifl(
                    &record.to_question(),
                    &record.docs,
                    generator,
                    critic,
                    thresholds,
                    config,
                );
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogLine {
    pub question_id: String,
    #[serde(flatten)]
    pub record: IterationRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn run_log_lines(runs: &[IflRun]) -> Vec<RunLogLine> {
    let mut lines = Vec::new();
    for run in runs {
        let last = run.records.len() - 1;
        for (i, record) in run.records.iter().enumerate() {
            lines.push(RunLogLine {
                question_id: run.question_id.clone(),
                record: record.clone(),
                stop_reason: (i == last).then_some(run.stop_reason),
                error: if i == last { run.error.clone() } else { None },
            });
        }
    }
    lines
}

/// Writes the log through a temporary file renamed into place.
pub fn write_run_log(path: &Path, runs: &[IflRun]) -> std::io::Result<()> {
    let text = crate::jsonl::to_jsonl_string(&run_log_lines(runs));
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(tmp, path)
}

/// Regroups log lines into runs. Each run's lines must be contiguous with
/// indices 0, 1, ... and end with a stop reason.
pub fn read_run_log(path: &Path) -> Result<Vec<IflRun>, IflError> {
    let lines: Vec<RunLogLine> = crate::jsonl::read_jsonl(path).map_err(|e| IflError::Log(e.to_string()))?;
    let mut runs: Vec<IflRun> = Vec::new();
    let mut open: Option<IflRun> = None;
    for (n, line) in lines.into_iter().enumerate() {
        let current = match open.take() {
            Some(run) if run.question_id == line.question_id => run,
            Some(run) => {
                return Err(IflError::Log(format!(
                    "line {}: run for {} ends without a stop reason",
                    n + 1,
                    run.question_id
                )))
            }
            None => IflRun {
                question_id: line.question_id.clone(),
                records: Vec::new(),
                final_answer: Default::default(),
                stop_reason: StopReason::MaxIterations,
                error: None,
            },
        };
        let mut current = current;
        if line.record.index != current.records.len() {
            return Err(IflError::Log(format!(
                "line {}: expected iteration {} for {}, found {}",
                n + 1,
                current.records.len(),
                line.question_id,
                line.record.index
            )));
        }
        current.records.push(line.record);
        match line.stop_reason {
            Some(reason) => {
                current.stop_reason = reason;
                current.error = line.error;
                current.final_answer = current.records.last().expect("pushed").answer.clone();
                runs.push(current);
            }
            None => open = Some(current),
        }
    }
    if let Some(run) = open {
        return Err(IflError::Log(format!(
            "run for {} ends without a stop reason",
            run.question_id
        )));
    }
    Ok(runs)
}

/// Provenance of a batch run, written next to the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: IflConfig,
    pub thresholds: BandThresholds,
    pub generator_model: String,
    pub critic: String,
    pub corpus: Option<String>,
    pub run_log: String,
    pub started_at: String,
    pub finished_at: String,
    pub questions: usize,
    pub completed: usize,
    /// Question id to error message for runs that produced no answer.
    pub failures: BTreeMap<String, String>,
    /// Question id to per-iteration generation time in milliseconds.
    pub wall_time_ms: BTreeMap<String, Vec<f64>>,
}

impl RunManifest {
    pub fn wall_times(runs: &[IflRun]) -> BTreeMap<String, Vec<f64>> {
        runs.iter()
            .map(|r| {
                let times = r.records.iter().map(|i| i.wall_time.as_secs_f64() * 1000.0).collect();
                (r.question_id.clone(), times)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::CriticParams;
    use crate::gateway::{MockGenerator, MockScript};
    use crate::synthetic::synthetic_corpus;

    fn runs() -> (Vec<CorpusRecord>, Vec<IflRun>) {
        let corpus = synthetic_corpus(6, 3);
        let generator = MockGenerator::new(MockScript::feedback_responsive_from_corpus(&corpus, 3));
        let config = IflConfig {
            parallelism: 3,
            early_stop_all_praise: false,
            ..Default::default()
        };
        let runs = run_batch(
            &corpus,
            &generator,
            &CriticParams::default(),
            &BandThresholds::default(),
            &config,
        )
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
        (corpus, runs)
    }

    #[test]
    fn batch_preserves_order() {
        let (corpus, runs) = runs();
        let ids: Vec<_> = runs.iter().map(|r| r.question_id.clone()).collect();
        let expected: Vec<_> = corpus.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn run_log_round_trips() {
        let (_, runs) = runs();
        let dir = std::env::temp_dir().join(format!("ifl-batch-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("runs.jsonl");
        write_run_log(&path, &runs).unwrap();
        let back = read_run_log(&path).unwrap();
        assert_eq!(back.len(), runs.len());
        for (a, b) in back.iter().zip(&runs) {
            assert_eq!(a.question_id, b.question_id);
            assert_eq!(a.stop_reason, b.stop_reason);
            assert_eq!(a.final_answer, b.final_answer);
            assert_eq!(a.records.len(), b.records.len());
        }
        std::fs::remove_dir_all(dir).unwrap();
    }
}
