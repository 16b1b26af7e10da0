"""Library walkthrough: train a detect+discover pipeline on the demo
corpus, read the report, and route fresh utterances through it.

Half the intents are treated as known (kir=0.5) and half the known
training utterances keep their labels (lr=0.5); the rest become the
unlabeled pool the discovery side clusters.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from make_dataset import build

from intentlab import (Utterance, evaluate_pipeline, load_dataset,
                       load_pipeline, predict_pipeline, train_pipeline,
                       validate_config)


def main():
    out = Path(__file__).parent / "out"
    dataset = load_dataset(build(out / "assistant"), "tsv")

    config = validate_config({
        "dataset": "assistant", "task": "pipeline",
        "kir": 0.5, "lr": 0.5, "seed": 4,
        "detect": "adb", "discover": "semi_seeded",
        "hidden": 32, "repr_dim": 12, "epochs": 80, "learning_rate": 0.3,
        "max_features": 400, "adb_epochs": 150})

    print("training:")
    trained, record = train_pipeline(
        config, dataset,
        on_event=lambda e: print(f"  [{e['step']}] {e['message']}"))
    print(f"run {record.run_id} -> {record.state}")
    print(f"known intents: {', '.join(trained.plan.known_labels)}")
    print(f"held out as open: {', '.join(trained.plan.open_labels)}")

    report = evaluate_pipeline(trained, dataset, "test")
    print(f"\nknown_acc={report.known_acc:.4f}  open_nmi={report.open_nmi:.4f}")
    for label, counts in sorted(report.per_class.items()):
        total = counts["correct"] + counts["false"]
        print(f"  {label:>16}: {counts['correct']}/{total} correct")

    print("\ndiscovered-cluster keywords:")
    for cid in sorted(trained.keyword_recs):
        rec = trained.keyword_recs[cid]
        terms = ", ".join(f"{w} ({c:.2f})" for w, c in rec.items[:3])
        tag = "open" if trained.cluster_open.get(cid) else "known"
        print(f"  cluster {cid} [{tag}]: {terms}")

    # one query for a known intent, three for the held-out ones
    queries = [
        Utterance("q1", "wire twenty dollars to my landlord"),
        Utterance("q2", "do i need an umbrella in chicago today"),
        Utterance("q3", "what is the balance of my savings account"),
        Utterance("q4", "wake me up with an alarm at six am"),
    ]
    print("\nrouting fresh utterances:")
    for utt, pred in zip(queries, predict_pipeline(trained, queries)):
        if pred.kind == "known":
            where = f"known intent {pred.label!r}"
        else:
            kws = ", ".join(w for w, _ in (pred.keywords or [])[:3])
            where = f"open cluster {pred.cluster_id} ({kws})"
        print(f"  {utt.text!r}\n    -> {where}  conf={pred.confidence:.3f}")

    saved = out / "assistant-pipeline.json"
    trained.save(saved)
    reloaded = predict_pipeline(load_pipeline(saved), queries)
    assert [p.to_jsonable() for p in reloaded] == \
        [p.to_jsonable() for p in predict_pipeline(trained, queries)]
    print(f"\npipeline saved to {saved} (reload verified)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
