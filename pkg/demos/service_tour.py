"""Drive the HTTP service the way the web console does, over localhost.

Starts `intentlab serve` as a subprocess, registers the demo corpus,
submits a run, polls it to completion, then pulls the report, analysis
views, and batch predictions. Finishes by reading the same run back
through the command-line tools, since both front ends share one store.
"""

import json
import os
import socket
import subprocess
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from make_dataset import build

RUN_CONFIG = {
    "dataset": "assistant", "kir": 0.5, "lr": 0.5, "seed": 4,
    "detect": "adb", "discover": "semi_seeded",
    "hidden": 32, "repr_dim": 12, "epochs": 80, "learning_rate": 0.3,
    "max_features": 400, "adb_epochs": 150,
}


def api(method, url, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"content-type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def wait_for_server(base, deadline=30.0):
    stop = time.time() + deadline
    while time.time() < stop:
        try:
            return api("GET", f"{base}/config-schema")
        except (urllib.error.URLError, ConnectionError):
            time.sleep(0.1)
    raise RuntimeError("service did not come up")


def main():
    out = Path(__file__).parent / "out"
    corpus = build(out / "assistant")
    data_root = out / "service-data"

    with socket.socket() as probe:  # grab a free port
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    base = f"http://127.0.0.1:{port}/api/v1"

    env = dict(os.environ,
               INTENTLAB_DATA_ROOT=str(data_root),
               INTENTLAB_ADDR=f"127.0.0.1:{port}",
               INTENTLAB_WORKERS="1")
    server = subprocess.Popen(["intentlab", "serve"], env=env,
                              stdout=subprocess.DEVNULL,
                              stderr=subprocess.DEVNULL)
    try:
        schema = wait_for_server(base)
        print(f"service up at {base}")
        print(f"  {len(schema['fields'])} config fields, "
              f"detect={schema['methods']['detect']}, "
              f"views={schema['views']}")

        print("\nregistering the demo corpus:")
        entry = api("POST", f"{base}/datasets",
                    {"name": "assistant", "path": str(corpus), "format": "tsv"})
        print(f"  {entry['name']}: {entry['counts']}")

        print("\nsubmitting a run:")
        run_id = api("POST", f"{base}/runs", RUN_CONFIG)["run_id"]
        print(f"  {run_id} queued")
        seen = 0
        while True:
            record = api("GET", f"{base}/runs/{run_id}")
            for event in record["events"][seen:]:
                print(f"  [{event['step']}] {event['message']}")
            seen = len(record["events"])
            if record["state"] in ("finished", "failed"):
                break
            time.sleep(0.2)
        if record["state"] != "finished":
            raise RuntimeError(f"run failed: {record['error']}")

        report = api("GET", f"{base}/runs/{run_id}/report")
        print(f"\nreport: known_acc={report['known_acc']:.4f} "
              f"open_nmi={report['open_nmi']:.4f}")

        hist = api("GET", f"{base}/runs/{run_id}/views/confidence_histogram")
        known_n = sum(hist["known"])
        open_n = sum(hist["open"])
        print(f"confidence histogram: {known_n} known / {open_n} open "
              f"test utterances across {len(hist['edges']) - 1} bins")
        kws = api("GET", f"{base}/runs/{run_id}/views/keywords")
        for cluster in kws["clusters"]:
            top = ", ".join(k["keyword"] for k in cluster["keywords"][:3])
            print(f"  cluster {cluster['cluster_id']}: {top}")

        print("\nbatch prediction over the wire:")
        preds = api("POST", f"{base}/runs/{run_id}/predict", {"utterances": [
            {"id": "a", "text": "wire twenty dollars to my landlord"},
            {"id": "b", "text": "do i need an umbrella in chicago today"},
        ]})["predictions"]
        for p in preds:
            target = p["label"] if p["kind"] == "known" \
                else f"cluster {p['cluster_id']}"
            print(f"  {p['utterance_id']}: {p['kind']} -> {target}")

        print("\nsame store through the command-line tools:")
        for args in (["eval", "--run", run_id, "--metric", "all"],
                     ["export-views", "--run", run_id,
                      "--out", str(out / "views")]):
            shown = subprocess.run(
                ["intentlab", *args, "--data-root", str(data_root)],
                check=True, capture_output=True, text=True).stdout.strip()
            print(f"  $ intentlab {args[0]} ...\n    {shown}")
    finally:
        server.terminate()
        server.wait(timeout=10)
    print("\nservice stopped")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
