"""Builds the 50-tweet raw fixture plus its expected outputs.

tests/fixtures/tweets_raw.jsonl       raw API-shaped tweets (general, quote,
                                      retweet, reply; some extended, some with
                                      missing user fields)
tests/fixtures/tweets_expected.csv    flattened schema values, input order
tests/fixtures/tweets_ingested.csv    golden ingest output (sorted, with the
                                      reference VADER compound)

The flattening below is written from the schema rules alone and shares no
code with the C++ implementation.
"""
import csv
import datetime as dt
import json
import pathlib
import random

from vaderSentiment.vaderSentiment import SentimentIntensityAnalyzer

ROOT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
rng = random.Random(20190301)

PHRASES = [
    "Bitcoin breaking out again", "$BTC looks weak here", "sold my BTC, feeling great",
    "bitcoin fees are terrible today", "Is Bitcoin dead? no way!!", "BTC dominance rising",
    "HODL $BTC forever", "Bitcoin, not crypto", "The BTC chart is a disaster", "love the Bitcoin community",
    "BTC pump incoming?? maybe", "worried about Bitcoin regulation", "Bitcoin adoption is AMAZING",
    "BTC, \"digital gold\" they said", "quiet day for Bitcoin\nwaiting",
]
START = dt.datetime(2019, 3, 1, tzinfo=dt.timezone.utc)
SPAN = 2 * 86400 + 3 * 3600  # tweets run into the third day


def twitter_time(t):
    return t.strftime("%a %b %d %H:%M:%S +0000 %Y")


def media(kinds):
    return [{"id": rng.randrange(10**12), "type": k, "media_url": "http://x/y.jpg"} for k in kinds]


def user(missing=False):
    u = {
        "id": rng.randrange(10**9), "screen_name": "user%d" % rng.randrange(1000),
        "favourites_count": rng.randrange(0, 50000), "followers_count": rng.randrange(0, 200000),
        "friends_count": rng.randrange(0, 5000), "listed_count": rng.randrange(0, 900),
        "verified": rng.random() < 0.2, "default_profile": rng.random() < 0.5,
        "default_profile_image": rng.random() < 0.1, "lang": "en", "location": "somewhere",
    }
    if missing:
        del u["listed_count"]
        del u["verified"]
    return u


def base(t, text, kinds=(), extended=False, missing_user=False):
    tw = {
        "created_at": twitter_time(t), "id": rng.randrange(10**17), "id_str": "x",
        "text": text[:140], "source": "web", "truncated": extended, "in_reply_to_status_id": None,
        "in_reply_to_user_id": None, "user": user(missing_user), "geo": None, "coordinates": None,
        "place": None, "is_quote_status": False, "retweet_count": 0, "favorite_count": 0,
        "entities": {"hashtags": [], "urls": [], "user_mentions": [], "symbols": []},
        "favorited": False, "retweeted": False, "filter_level": "low", "lang": "en",
        "timestamp_ms": str(int(t.timestamp() * 1000)),
    }
    if extended:
        tw["extended_tweet"] = {"full_text": text, "entities": {}}
        if kinds:
            tw["extended_tweet"]["extended_entities"] = {"media": media(kinds)}
    elif kinds:
        tw["entities"]["media"] = media(kinds[:1])
        tw["extended_entities"] = {"media": media(kinds)}
    if rng.random() < 0.5:
        tw["possibly_sensitive"] = rng.random() < 0.3
    return tw


def make(i):
    t = START + dt.timedelta(seconds=rng.randrange(SPAN))
    text = rng.choice(PHRASES) + (" #%d" % i)
    kind = ["general", "quote", "retweet", "reply"][i % 4]
    kinds = rng.choice([(), (), ("photo",), ("photo", "photo"), ("video",), ("animated_gif",)])
    extended = i % 7 == 0
    tw = base(t, text, kinds, extended, missing_user=(i % 13 == 5))
    if kind == "quote":
        tw["is_quote_status"] = True
        tw["quoted_status"] = base(t - dt.timedelta(hours=1), "original " + text, ("photo",))
    elif kind == "retweet":
        inner = base(t - dt.timedelta(hours=2), text, kinds)
        tw = base(t, "RT @someone: " + text, (), False, missing_user=(i % 13 == 5))
        tw["retweeted_status"] = inner
    elif kind == "reply":
        tw["in_reply_to_status_id"] = rng.randrange(10**17)
    return tw


def flatten(tw):
    def media_counts(obj):
        for path in (("extended_tweet", "extended_entities", "media"), ("extended_entities", "media"),
                     ("entities", "media")):
            cur = obj
            for k in path:
                cur = cur.get(k) if isinstance(cur, dict) else None
                if cur is None:
                    break
            if isinstance(cur, list):
                types = [m.get("type") for m in cur]
                return True, types.count("animated_gif"), types.count("photo"), types.count("video")
        return False, 0, 0, 0

    found, gif, photo, video = media_counts(tw)
    if not found and tw.get("retweeted_status"):
        found, gif, photo, video = media_counts(tw["retweeted_status"])
    if tw.get("extended_tweet", {}).get("full_text") is not None:
        text = tw["extended_tweet"]["full_text"]
    else:
        text = tw.get("full_text") or tw.get("text", "")
    u = tw.get("user") or {}
    quote = bool(tw.get("is_quote_status")) or tw.get("retweeted_status") is not None \
        or tw.get("quoted_status") is not None or tw.get("in_reply_to_status_id") is not None
    when = dt.datetime.strptime(tw["created_at"], "%a %b %d %H:%M:%S +0000 %Y")
    return {
        "created_at": when.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "gif_count": gif, "photo_count": photo, "video_count": video,
        "is_quote_status": quote, "possibly_sensitive": tw.get("possibly_sensitive") is True,
        "tweet_text": text,
        "favourites_count": u.get("favourites_count", 0), "followers_count": u.get("followers_count", 0),
        "friends_count": u.get("friends_count", 0), "listed_count": u.get("listed_count", 0),
        "verified": u.get("verified", False), "default_profile": u.get("default_profile", False),
        "default_profile_image": u.get("default_profile_image", False),
    }


FIELDS = ["created_at", "gif_count", "photo_count", "video_count", "is_quote_status", "possibly_sensitive",
          "tweet_text", "favourites_count", "followers_count", "friends_count", "listed_count", "verified",
          "default_profile", "default_profile_image"]


def cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


tweets = [make(i) for i in range(50)]
with open(ROOT / "tweets_raw.jsonl", "w", encoding="utf-8") as f:
    for tw in tweets:
        f.write(json.dumps(tw, ensure_ascii=False) + "\n")

rows = [flatten(tw) for tw in tweets]
with open(ROOT / "tweets_expected.csv", "w", newline="", encoding="utf-8") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(FIELDS)
    for r in rows:
        w.writerow([cell(r[k]) for k in FIELDS])

analyzer = SentimentIntensityAnalyzer()
ordered = sorted(rows, key=lambda r: r["created_at"])  # stable
with open(ROOT / "tweets_ingested.csv", "w", newline="", encoding="utf-8") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(FIELDS + ["vader_compound"])
    for r in ordered:
        compound = analyzer.polarity_scores(r["tweet_text"])["compound"]
        w.writerow([cell(r[k]) for k in FIELDS] + [repr(float(compound))])
print("wrote", len(tweets), "tweets")
