"""Scores a fixed corpus with the vaderSentiment reference package and writes
tests/fixtures/vader_reference.csv (text, neg, neu, pos, compound)."""
import csv
import pathlib

from vaderSentiment.vaderSentiment import SentimentIntensityAnalyzer

TEXTS = [
    "VADER is smart, handsome, and funny.",
    "VADER is VERY SMART, uber handsome, and FRIGGIN FUNNY!!!",
    "VADER is not smart, handsome, nor funny.",
    "At least it isn't a horrible book.",
    "The book was only kind of good.",
    "The plot was good, but the characters are uncompelling and the dialog is not great.",
    "Today only kinda sux! But I'll get by, lol",
    "Make sure you :) or :D today!",
    "Catch utf-8 emoji such as \U0001F498 and \U0001F48B and \U0001F601",
    "Sentiment analysis has never been this good!",
    "With VADER, sentiment analysis is the shit!",
    "Without a doubt, an excellent idea.",
    "Roger Dodger is one of the least compelling variations on this theme.",
    "Bitcoin is crashing hard, this is terrible news for $BTC holders",
    "BTC to the moon!!! best investment ever???",
    "No good reason to sell bitcoin now, no way",
    "I'm not sure whether Bitcoin will recover... kind of worried tbh",
    "HODL!!!! Bitcoin is AMAZING but the fees are awful",
    "Is $BTC a bubble?? Absolutely not, it's barely started",
    "bitcoin price unchanged at 6400 USD",
]

out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "vader_reference.csv"
analyzer = SentimentIntensityAnalyzer()
with open(out, "w", newline="", encoding="utf-8") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["text", "neg", "neu", "pos", "compound"])
    for t in TEXTS:
        s = analyzer.polarity_scores(t)
        w.writerow([t, repr(s["neg"]), repr(s["neu"]), repr(s["pos"]), repr(s["compound"])])
print(f"wrote {len(TEXTS)} rows to {out}")
