"""Generate a small voice-assistant intent corpus in the TSV layout.

Six intents, each realized by crossing phrase templates with slot values
and an optional politeness prefix. All combinations are enumerated once,
shuffled, and carved into splits, so no utterance repeats across
train/eval/test.
"""

import random
import sys
from pathlib import Path

PREFIXES = ["", "please ", "hey ", "can you ", "could you "]

# label -> (templates, slot values); vocabularies kept mostly disjoint so
# bag-of-words features have something to work with
INTENTS = {
    "check_balance": (
        ["what is the balance of my {} account",
         "show me how much money is in {}",
         "check my {} account balance",
         "current balance for the {} account",
         "how much do i have left in {}"],
        ["checking", "savings", "joint", "business", "credit"]),
    "transfer_money": (
        ["transfer {} dollars to my landlord",
         "send {} dollars over to alex",
         "wire {} dollars for this month's rent",
         "move {} dollars to mom right away",
         "make a transfer of {} dollars to dana"],
        ["forty", "ninety", "two hundred", "fifteen", "sixty"]),
    "get_weather": (
        ["what is the weather like in {}",
         "will it rain in {} tomorrow",
         "give me the forecast for {}",
         "how cold is it in {} right now",
         "do i need an umbrella in {} today"],
        ["boston", "denver", "seattle", "austin", "chicago"]),
    "play_music": (
        ["play some {} music",
         "put on a {} playlist",
         "i want to listen to {}",
         "queue up my favorite {} songs",
         "start the {} radio station"],
        ["jazz", "classical", "rock", "acoustic", "blues"]),
    "set_alarm": (
        ["set an alarm for {} tomorrow",
         "wake me up with an alarm at {}",
         "i need an alarm at {}",
         "schedule an alarm to wake me at {}",
         "new alarm at {} every weekday"],
        ["six am", "seven thirty", "five forty five", "noon", "eight"]),
    "book_restaurant": (
        ["book a table for {} tonight",
         "reserve dinner for {} at the bistro",
         "i need a restaurant reservation for {}",
         "get me a table for {} on friday",
         "make a dinner booking for {} people"],
        ["two", "four", "six", "three", "eight"]),
}

SPLIT_SIZES = {"train": 50, "eval": 8, "test": 8}


def build(root, seed=7):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    rows = {split: [] for split in SPLIT_SIZES}
    for label, (templates, slots) in INTENTS.items():
        combos = [p + t.format(s)
                  for p in PREFIXES for t in templates for s in slots]
        rng.shuffle(combos)
        at = 0
        for split, n in SPLIT_SIZES.items():
            for text in combos[at:at + n]:
                rows[split].append((text, label))
            at += n
    for split, pairs in rows.items():
        rng.shuffle(pairs)
        lines = ["text\tlabel"] + [f"{t}\t{l}" for t, l in pairs]
        (root / f"{split}.tsv").write_text("\n".join(lines) + "\n",
                                           encoding="utf-8")
    return root


def main(argv):
    default = Path(__file__).parent / "out" / "assistant"
    out = build(Path(argv[1]) if len(argv) > 1 else default)
    total = sum(SPLIT_SIZES.values()) * len(INTENTS)
    print(f"wrote {len(INTENTS)} intents, {total} utterances to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
