"""Walkthrough: train reading-time estimators and compare them to heuristics.

Builds a synthetic labeled dataset (truth follows the center-weighted
heuristic plus user noise), then cross-validates a few model variants with
leave-one-user-out folds.

Run: python demos/train_estimator.py   (takes ~1 minute)
"""

from commtool.estimation import TrainConfig, cross_validate
from commtool.simulate import make_reading_dataset


def fmt(x):
    return "  n/a" if x is None else f"{x:5.3f}"


def main():
    dataset = make_reading_dataset(
        n_users=6, sessions_per_user=6, session_len_s=80, n_sections=12, noise=0.03, seed=0
    )
    print(f"dataset: {len(dataset)} rows, {len(dataset.users())} users, "
          f"{len(dataset.sessions())} sessions")

    rows = []
    for variant, config in [
        ("baseline1", None),
        ("baseline2", None),
        ("baseline3", None),
        ("logistic", TrainConfig(seed=0, pos_weight=1.0)),
        ("baseline_nn", TrainConfig(seed=0, pos_weight=1.0, max_epochs=15)),
    ]:
        result = cross_validate(variant, dataset, config)
        m = result.mean
        rows.append((variant, m.per_error, m.abs_error, m.accuracy, m.read_precision, m.read_recall))

    print(f"\n{'model':<14}{'per_err':>9}{'abs_err':>9}{'accuracy':>10}{'read_prec':>11}{'read_rec':>10}")
    for variant, per, abse, acc, prec, rec in rows:
        print(f"{variant:<14}{fmt(per):>9}{fmt(abse):>9}{fmt(acc):>10}{fmt(prec):>11}{fmt(rec):>10}")


if __name__ == "__main__":
    main()
