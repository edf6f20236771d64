"""Walkthrough: channel reputation series and its regression on click rate.

Reputation change of an email is the next email's open rate minus its own.
We fit ordinary least squares (with constant) of reputation on click rate
and use the fitted line to forecast the next change.

Run: python demos/reputation_regression.py
"""

import random

from commtool.metrics import ols_fit, predict_reputation_change, reputation_series


def main():
    rng = random.Random(3)
    # a channel drifting down, with click rate cushioning the decline
    opens, clicks = [0.72], []
    for t in range(11):
        click = max(0.02, min(0.5, rng.gauss(0.18, 0.07)))
        clicks.append(click)
        drift = -0.035 + 0.25 * click + rng.gauss(0, 0.01)
        opens.append(min(1.0, max(0.0, opens[-1] + drift)))

    series = reputation_series(list(enumerate(opens)))
    print("t   open    click   reputation_t")
    for point, click in zip(series, clicks):
        print(f"{point.seq_index:<3} {point.open_rate:.3f}  {click:.3f}   {point.reputation:+.3f}")

    fit = ols_fit(clicks[:-1], [p.reputation for p in series[:-1]])
    print(f"\nOLS reputation ~ click rate (n={fit.n}):")
    print(f"  slope {fit.slope:+.3f}  p {fit.p_value:.3f}  CI [{fit.ci_low:+.3f}, {fit.ci_high:+.3f}]")

    history = list(zip(opens[:-1], clicks))
    change = predict_reputation_change(history, opens[-1], clicks[-1])
    print(f"\nforecast reputation change for the next email: {change:+.3f}")
    print(f"implied next open rate: {opens[-1] + change:.3f}")


if __name__ == "__main__":
    main()
