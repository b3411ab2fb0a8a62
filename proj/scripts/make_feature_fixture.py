"""Builds the candle fixture and the golden feature CSV for the 50-tweet set.

tests/fixtures/candles.csv        15-minute closes from 2019-02-28 23:45 to
                                  2019-03-04 02:15 with three missing candles
                                  on 2019-03-02; 2019-03-04 is incomplete
tests/fixtures/features_golden.csv  expected featurize output

Independent of the C++ code: plain dict lookups, forward fill and per-bin
averages written from the feature rules.
"""
import csv
import datetime as dt
import math
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
rng = random.Random(424242)
UTC = dt.timezone.utc
STEP = 900
GAP_CAP = 4

first = int(dt.datetime(2019, 2, 28, 23, 45, tzinfo=UTC).timestamp())
last = int(dt.datetime(2019, 3, 4, 2, 15, tzinfo=UTC).timestamp())
missing = {int(dt.datetime(2019, 3, 2, h, m, tzinfo=UTC).timestamp()) for h, m in [(5, 0), (5, 15), (12, 30)]}


def iso(ts):
    return dt.datetime.fromtimestamp(ts, UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


candles = {}
price = 3850.0
for ts in range(first, last + 1, STEP):
    price *= math.exp(rng.gauss(0.0, 0.003))
    if ts in missing:
        continue
    candles[ts] = round(price, 2)

with open(ROOT / "candles.csv", "w", newline="") as f:
    f.write("timestamp,close\n")
    for ts in sorted(candles):
        f.write(f"{iso(ts)},{candles[ts]!r}\n")

with open(ROOT / "tweets_ingested.csv", newline="") as f:
    tweets = list(csv.DictReader(f))

INT_FIELDS = ["gif_count", "photo_count", "video_count", "is_quote_status", "possibly_sensitive",
              "favourites_count", "followers_count", "friends_count", "listed_count", "verified",
              "default_profile", "default_profile_image"]


def as_int(v):
    return {"true": 1, "false": 0}.get(v, None) if v in ("true", "false") else int(v)


bins = {}
for t in tweets:
    ts = int(dt.datetime.strptime(t["created_at"], "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=UTC).timestamp())
    bins.setdefault(ts - ts % STEP, []).append(t)


def day_rows(day):
    rows, gaps = [], 0
    for k in range(96):
        ts = day + k * STEP
        prev = [c for t0, c in candles.items() if t0 <= ts - STEP]
        prev_close = candles[max(t0 for t0 in candles if t0 <= ts - STEP)] if prev else None
        if ts in candles and prev_close is not None:
            r = math.log(candles[ts]) - math.log(prev_close)
        else:
            gaps += 1
            r = 0.0
        group = bins.get(ts, [])
        n = len(group)
        vals = [0.0] * 14
        if n:
            vals[0] = float(n)
            s = 0.0
            for t in group:
                s += float(t["vader_compound"])
            vals[1] = s / n
            for j, name in enumerate(INT_FIELDS):
                vals[2 + j] = sum(as_int(t[name]) for t in group) / n
        rows.append([iso(ts), repr(r)] + [repr(v) for v in vals])
    return rows, gaps


header = ["timestamp", "log_return", "count", "vader_compound"] + INT_FIELDS
out = [",".join(header)]
day = first - first % 86400
while day <= last:
    rows, gaps = day_rows(day)
    if gaps <= GAP_CAP:
        out.extend(",".join(r) for r in rows)
    day += 86400

(ROOT / "features_golden.csv").write_text("\n".join(out) + "\n")
