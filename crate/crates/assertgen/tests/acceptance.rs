mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use assertgen::core::metrics::{
    accurate_match, assert_method_match, edit_distance, lcs_percent, summarize, EquivalenceTable, LcsUnit,
};
use assertgen::core::model::{GenerationRecord, Prediction, PredictionSet, RecordStatus, Role, Transcript, Verdict};
use assertgen::harness::{ProjectRoots, PytestExecutor, RunnerConfig};
use assertgen::llm::ReplayBackend;
use assertgen::pipeline::{run_pipeline, PipelineOptions};
use assertgen::store::read_jsonl;
use common::{failing_output_mismatches, fixture, mask_case_mismatches, mine, read, round_trip_failures};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_lcs(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    go(a, b, 0, 0, &mut vec![vec![None; b.len() + 1]; a.len() + 1])
}

fn oracle_edit(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn metric_oracles() -> Check {
    const ALPHABET: &[char] = &['a', 'b', 'c', '(', ')', ' ', '=', '_', 'é', '1'];
    let mut rng = StdRng::seed_from_u64(7);
    let word = |rng: &mut StdRng| -> String {
        let n = rng.random_range(0..=40);
        (0..n).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
    };
    let started = Instant::now();
    for _ in 0..1000 {
        let (p, o) = (word(&mut rng), word(&mut rng));
        let (pc, oc): (Vec<char>, Vec<char>) = (p.chars().collect(), o.chars().collect());
        let want_lcs = if oc.is_empty() { 0.0 } else { oracle_lcs(&pc, &oc) as f64 * 100.0 / oc.len() as f64 };
        let got_lcs = lcs_percent(&p, &o, LcsUnit::Char);
        ensure(got_lcs == want_lcs, || format!("lcs({p:?}, {o:?}) = {got_lcs}, oracle {want_lcs}"))?;
        let (got, want) = (edit_distance(&p, &o), oracle_edit(&pc, &oc));
        ensure(got == want, || format!("ed({p:?}, {o:?}) = {got}, oracle {want}"))?;
    }
    let took = started.elapsed();
    ensure(took < Duration::from_secs(5), || format!("took {took:?}"))
}

fn masking_round_trip() -> Check {
    let bad = mask_case_mismatches();
    ensure(bad.is_empty(), || bad.join("; "))?;
    let entries = mine("shop", "shop");
    let (n, bad) = round_trip_failures("shop", &entries);
    ensure(n >= 20, || format!("only {n} test methods"))?;
    ensure(bad.is_empty(), || bad.join("; "))
}

const EQUIVALENT: &[(&str, &str)] = &[
    ("self.assertTrue(x == y)", "self.assertEqual(x, y)"),
    ("self.assertFalse(x != y)", "self.assertEqual(x, y)"),
    ("self.assertTrue(result is None)", "self.assertIsNone(result)"),
    ("self.assertEqual(len(items), 3)", "self.assertLen(items, 3)"),
    ("self.assertTrue(isinstance(a, list))", "self.assertIsInstance(a, list)"),
    ("self.assertRaises(ValueError, parse, 'x')", "with self.assertRaises(ValueError):\n    parse('x')"),
    ("self.assertEqual(expected, actual)", "self.assertEqual(actual, expected)"),
    ("assert a == b", "assert a == b"),
    ("self.assertTrue(k in d)", "self.assertIn(k, d)"),
];

const UNRELATED: &[(&str, &str)] = &[
    ("self.assertEqual(x, 1)", "self.assertEqual(x, 2)"),
    ("self.assertTrue(x == y)", "self.assertNotEqual(x, y)"),
    ("self.assertIsNone(a)", "self.assertIsNotNone(a)"),
    ("self.assertEqual(len(items), 3)", "self.assertLen(items, 4)"),
    ("self.assertTrue(isinstance(a, list))", "self.assertIsInstance(a, dict)"),
    ("self.assertIn(k, d)", "self.assertNotIn(k, d)"),
    ("self.assertRaises(ValueError, parse, 'x')", "with self.assertRaises(KeyError):\n    parse('x')"),
    ("assert a == b", "assert a != b"),
    ("self.assertTrue(a)", "self.assertFalse(a)"),
    ("self.assertGreater(a, b)", "self.assertLess(a, b)"),
    ("assert result == 5", "assert result == 4"),
    ("self.assertIs(a, b)", "self.assertEqual(a, b)"),
];

fn equivalence_classification() -> Check {
    let table = EquivalenceTable::default();
    let mut wrong = Vec::new();
    for (a, b) in EQUIVALENT {
        if !accurate_match(a, b, &table) || !accurate_match(b, a, &table) {
            wrong.push(format!("{a:?} ~ {b:?} not matched"));
        }
    }
    for (a, b) in UNRELATED {
        if accurate_match(a, b, &table) || accurate_match(b, a, &table) {
            wrong.push(format!("{a:?} ~ {b:?} matched"));
        }
    }
    ensure(wrong.is_empty(), || wrong.join("; "))
}

fn amm() -> Check {
    ensure(assert_method_match("self.assertIsInstance(a, List)", "self.assertIsInstance(a, pd.Array)"), || {
        "assertIsInstance pair is not a method match".into()
    })?;
    let records: Vec<GenerationRecord> = read_jsonl(&fixture("calc_results.golden.jsonl")).map_err(|e| e.to_string())?;
    let dataset = mine("calc", "calc");
    let s = summarize(&records, |id| dataset.iter().find(|e| e.id == id), &EquivalenceTable::default(), LcsUnit::Char);
    ensure(s.amm_pct().is_none() && s.n() == 0, || format!("keyword asserts counted for AMM: n = {}", s.n()))?;

    let mut shop = mine("shop", "shop");
    shop.retain(|e| e.method_name == "test_parse_returns_tuple" || e.method_name == "test_add_item_returns_item");
    let records: Vec<GenerationRecord> = shop
        .iter()
        .map(|e| {
            let texts: Vec<String> = e.asserts.iter().map(|a| a.text.replace("tuple", "list")).collect();
            GenerationRecord {
                final_predictions: Some(PredictionSet {
                    entry_id: e.id.clone(),
                    round: 1,
                    predictions: texts
                        .into_iter()
                        .enumerate()
                        .map(|(i, text)| Prediction { index: i as u32 + 1, text })
                        .collect(),
                    raw_response: String::new(),
                }),
                entry_id: e.id.clone(),
                status: RecordStatus::Ok,
                rounds: Vec::new(),
                sample_id: None,
                error: None,
                transcript: Transcript::new(e.id.clone()),
            }
        })
        .collect();
    let s = summarize(&records, |id| shop.iter().find(|e| e.id == id), &EquivalenceTable::default(), LcsUnit::Char);
    ensure(s.n() == 2 && s.amm_pct() == Some(100.0), || format!("n = {}, amm = {:?}", s.n(), s.amm_pct()))
}

fn run_replay(script: &str, filter: Option<&str>) -> Result<(Vec<GenerationRecord>, String), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("results.jsonl");
    let entries = mine("calc", "calc");
    let backend = ReplayBackend::load(&fixture(script)).map_err(|e| e.to_string())?;
    let roots = ProjectRoots::single(fixture("calc"));
    let runner = RunnerConfig { zero_durations: true, ..RunnerConfig::default() };
    let mut opts = PipelineOptions::default();
    if let Some(f) = filter {
        opts.filters.add(f)?;
    }
    run_pipeline(&entries, &out, &backend, || PytestExecutor::new(roots.clone(), runner.clone()), &opts)
        .map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    Ok((read_jsonl(&out).map_err(|e| e.to_string())?, text))
}

fn end_to_end_replay() -> Check {
    let started = Instant::now();
    let (records, text) = run_replay("calc_replay.jsonl", None)?;
    let took = started.elapsed();
    ensure(records.len() == 3, || format!("{} records", records.len()))?;
    let rounds: Vec<usize> = records.iter().map(|r| r.rounds.len()).collect();
    ensure(rounds == [1, 2, 1], || format!("rounds per entry {rounds:?}"))?;
    for r in &records {
        let last = r.rounds.last().map(|x| x.report.verdict);
        ensure(r.status == RecordStatus::Ok && last == Some(Verdict::Passed), || {
            format!("{}: {:?} {last:?}", r.entry_id, r.status)
        })?;
    }
    ensure(text == read("calc_results.golden.jsonl"), || "results differ from the golden file".into())?;
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))
}

fn feedback_fidelity() -> Check {
    let (records, _) = run_replay("calc_replay.jsonl", None)?;
    let add = records.iter().find(|r| r.entry_id.ends_with("::test_add")).ok_or("no test_add record")?;
    let feedback = add
        .transcript
        .turns
        .iter()
        .filter(|t| t.role == Role::User)
        .nth(2)
        .ok_or("no feedback turn")?;
    ensure(feedback.text.contains("Expected= 5, Actual= 4"), || feedback.text.clone())
}

fn multi_assert_contract() -> Check {
    let (records, _) = run_replay("calc_replay.jsonl", Some("asserts=multi"))?;
    let preds = &records[0].final_predictions.as_ref().ok_or("no predictions")?.predictions;
    let idx: Vec<u32> = preds.iter().map(|p| p.index).collect();
    ensure(idx == [1, 2, 3], || format!("indices {idx:?}"))?;

    let (records, _) = run_replay("calc_reask.jsonl", Some("asserts=multi"))?;
    let r = &records[0];
    let user: Vec<&str> = r.transcript.turns.iter().filter(|t| t.role == Role::User).map(|t| t.text.as_str()).collect();
    ensure(user.len() == 3 && user[2].starts_with("Your previous answer could not be read"), || {
        format!("user turns {user:?}")
    })?;
    let n = r.rounds.first().map_or(0, |x| x.predictions.predictions.len());
    ensure(n == 3, || format!("{n} predictions after the re-ask"))
}

fn text_mode_parsing() -> Check {
    let bad = failing_output_mismatches();
    ensure(bad.is_empty(), || bad.join("; "))
}

fn main() -> ExitCode {
    let checks: [Criterion; 8] = [
        ("metric oracle equivalence", metric_oracles),
        ("masking round-trip", masking_round_trip),
        ("equivalence classification", equivalence_classification),
        ("assert method match", amm),
        ("end-to-end replay", end_to_end_replay),
        ("feedback prompt fidelity", feedback_fidelity),
        ("multi-assert contract", multi_assert_contract),
        ("text-mode failure parsing", text_mode_parsing),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
