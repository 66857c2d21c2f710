#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lotus/errors.hpp"
#include "lotus/metrics.hpp"

#include "support/oracles.hpp"

using namespace lotus;

namespace {

EmotionLabelSet flags(std::array<int, 5> values) {
  EmotionLabelSet out;
  for (std::size_t k = 0; k < kNumEmotions; ++k) out[k] = static_cast<std::uint8_t>(values[k]);
  return out;
}

}  // namespace

TEST_CASE("confusion counts on the two-row example") {
  std::vector<EmotionLabelSet> gold = {flags({1, 0, 1, 0, 0}), flags({0, 1, 0, 0, 1})};
  std::vector<EmotionLabelSet> pred = {flags({1, 0, 0, 0, 0}), flags({0, 1, 0, 0, 1})};
  const auto counts = confusion(gold, pred);

  CHECK(counts.per_label[0] == LabelCounts{1, 0, 0, 1});  // anger
  CHECK(counts.per_label[1] == LabelCounts{1, 0, 0, 1});  // fear
  CHECK(counts.per_label[2] == LabelCounts{0, 0, 1, 1});  // joy
  CHECK(counts.per_label[3] == LabelCounts{0, 0, 0, 2});  // sadness all-negative
  CHECK(counts.per_label[4] == LabelCounts{1, 0, 0, 1});  // surprise

  const auto mm = macro_micro(counts);
  CHECK(mm.macro.f1 == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(mm.micro.f1 == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("confusion identity and empty cases") {
  std::vector<EmotionLabelSet> rows = {flags({1, 1, 0, 0, 1}), flags({0, 0, 0, 1, 0})};
  const auto counts = confusion(rows, rows);
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    CHECK(counts.per_label[k].fp == 0);
    CHECK(counts.per_label[k].fn == 0);
  }

  std::vector<EmotionLabelSet> empty;
  const auto zero = confusion(empty, empty);
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    CHECK(zero.per_label[k] == LabelCounts{0, 0, 0, 0});
  }

  std::vector<EmotionLabelSet> one = {flags({0, 0, 0, 0, 0})};
  CHECK_THROWS_AS(confusion(rows, one), ArgumentError);
}

TEST_CASE("prf formulas and the zero-division rule") {
  const Prf a = prf(3, 0, 1);
  CHECK(a.precision == doctest::Approx(1.0));
  CHECK(a.recall == doctest::Approx(0.75));
  CHECK(a.f1 == doctest::Approx(6.0 / 7.0).epsilon(1e-12));

  const Prf zero = prf(0, 0, 0);
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.f1 == 0.0);

  const Prf perfect = prf(5, 0, 0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
}

TEST_CASE("macro and micro on perfect and all-miss predictions") {
  std::vector<EmotionLabelSet> gold = {flags({1, 1, 1, 1, 1}), flags({1, 0, 1, 0, 1})};

  auto mm = macro_micro(confusion(gold, gold));
  CHECK(mm.macro.precision == 1.0);
  CHECK(mm.macro.recall == 1.0);
  CHECK(mm.macro.f1 == 1.0);
  CHECK(mm.micro.f1 == 1.0);

  std::vector<EmotionLabelSet> none = {flags({0, 0, 0, 0, 0}), flags({0, 0, 0, 0, 0})};
  mm = macro_micro(confusion(gold, none));
  CHECK(mm.macro.precision == 0.0);
  CHECK(mm.macro.recall == 0.0);
  CHECK(mm.macro.f1 == 0.0);
  CHECK(mm.micro.precision == 0.0);
  CHECK(mm.micro.recall == 0.0);
  CHECK(mm.micro.f1 == 0.0);
}

TEST_CASE("aggregate fixture and degenerate cases") {
  const std::vector<double> four = {0.70, 0.72, 0.74, 0.72};
  const auto agg = aggregate(four);
  CHECK(agg.mean == doctest::Approx(0.72).epsilon(1e-12));
  // sqrt(0.0008 / 3), derived by hand from the deviations.
  CHECK(agg.std == doctest::Approx(std::sqrt(0.0008 / 3.0)).epsilon(1e-12));

  const std::vector<double> single = {0.5};
  CHECK(aggregate(single).mean == 0.5);
  CHECK(aggregate(single).std == 0.0);

  const std::vector<double> constant = {0.3, 0.3, 0.3};
  CHECK(aggregate(constant).mean == doctest::Approx(0.3));
  CHECK(aggregate(constant).std == doctest::Approx(0.0));

  CHECK_THROWS_AS(aggregate(std::vector<double>{}), ArgumentError);
}

TEST_CASE("oracle equivalence on random small matrices") {
  std::mt19937_64 rng(20250808);
  for (int iteration = 0; iteration < 1000; ++iteration) {
    std::uniform_int_distribution<std::size_t> size_pick(0, 8);
    const std::size_t n = size_pick(rng);
    // Skewed positive rates exercise the zero-division branches often.
    std::bernoulli_distribution gold_pos(iteration % 5 == 0 ? 0.0 : 0.4);
    std::bernoulli_distribution pred_pos(iteration % 7 == 0 ? 0.0 : 0.4);

    std::vector<std::array<int, 5>> gold(n);
    std::vector<std::array<int, 5>> pred(n);
    std::vector<EmotionLabelSet> gold_flags(n);
    std::vector<EmotionLabelSet> pred_flags(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) {
        gold[i][k] = gold_pos(rng) ? 1 : 0;
        pred[i][k] = pred_pos(rng) ? 1 : 0;
        gold_flags[i][k] = static_cast<std::uint8_t>(gold[i][k]);
        pred_flags[i][k] = static_cast<std::uint8_t>(pred[i][k]);
      }
    }

    const auto expected = testsupport::oracle_metrics(gold, pred);
    const auto report = evaluate(gold_flags, pred_flags);
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      CHECK(std::abs(report.per_label[k].precision - expected.per_label[k].precision) <= 1e-12);
      CHECK(std::abs(report.per_label[k].recall - expected.per_label[k].recall) <= 1e-12);
      CHECK(std::abs(report.per_label[k].f1 - expected.per_label[k].f1) <= 1e-12);
    }
    CHECK(std::abs(report.macro.precision - expected.macro.precision) <= 1e-12);
    CHECK(std::abs(report.macro.recall - expected.macro.recall) <= 1e-12);
    CHECK(std::abs(report.macro.f1 - expected.macro.f1) <= 1e-12);
    CHECK(std::abs(report.micro.precision - expected.micro.precision) <= 1e-12);
    CHECK(std::abs(report.micro.recall - expected.micro.recall) <= 1e-12);
    CHECK(std::abs(report.micro.f1 - expected.micro.f1) <= 1e-12);
  }
}

TEST_CASE("micro P = R = F1 when pooled positives match") {
  std::mt19937_64 rng(99);
  for (int iteration = 0; iteration < 200; ++iteration) {
    std::uniform_int_distribution<std::size_t> size_pick(1, 10);
    const std::size_t n = size_pick(rng);
    std::bernoulli_distribution positive(0.35);

    std::vector<EmotionLabelSet> gold(n);
    std::vector<int> bits;
    bits.reserve(n * kNumEmotions);
    for (auto& row : gold) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) {
        row[k] = positive(rng) ? 1 : 0;
        bits.push_back(row[k]);
      }
    }
    // Permuting the flattened flags preserves the pooled positive total.
    std::shuffle(bits.begin(), bits.end(), rng);
    std::vector<EmotionLabelSet> pred(n);
    std::size_t cursor = 0;
    for (auto& row : pred) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) row[k] = static_cast<std::uint8_t>(bits[cursor++]);
    }

    const auto mm = macro_micro(confusion(gold, pred));
    CHECK(mm.micro.precision == mm.micro.recall);
    // F1 = 2PR/(P+R) collapses to P algebraically; allow rounding ulps
    CHECK(mm.micro.f1 == doctest::Approx(mm.micro.precision).epsilon(1e-12));
  }
}

TEST_CASE("swapping gold and pred swaps precision and recall") {
  std::mt19937_64 rng(7);
  for (int iteration = 0; iteration < 200; ++iteration) {
    std::uniform_int_distribution<std::size_t> size_pick(0, 10);
    const std::size_t n = size_pick(rng);
    std::bernoulli_distribution positive(0.5);

    std::vector<EmotionLabelSet> a(n);
    std::vector<EmotionLabelSet> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) {
        a[i][k] = positive(rng) ? 1 : 0;
        b[i][k] = positive(rng) ? 1 : 0;
      }
    }

    const auto forward = evaluate(a, b);
    const auto backward = evaluate(b, a);
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      CHECK(forward.counts.per_label[k].fp == backward.counts.per_label[k].fn);
      CHECK(forward.counts.per_label[k].fn == backward.counts.per_label[k].fp);
      CHECK(forward.per_label[k].precision == backward.per_label[k].recall);
      CHECK(forward.per_label[k].recall == backward.per_label[k].precision);
    }
    CHECK(forward.macro.precision == backward.macro.recall);
    CHECK(forward.macro.recall == backward.macro.precision);
    CHECK(forward.micro.precision == backward.micro.recall);
  }
}

TEST_CASE("confusion totals partition the example count") {
  std::mt19937_64 rng(123);
  std::bernoulli_distribution positive(0.5);
  const std::size_t n = 37;
  std::vector<EmotionLabelSet> gold(n);
  std::vector<EmotionLabelSet> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      gold[i][k] = positive(rng) ? 1 : 0;
      pred[i][k] = positive(rng) ? 1 : 0;
    }
  }
  const auto counts = confusion(gold, pred);
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    const auto& c = counts.per_label[k];
    CHECK(c.tp + c.fp + c.fn + c.tn == n);
  }
}

TEST_CASE("metrics report serializes every block") {
  std::vector<EmotionLabelSet> gold = {flags({1, 0, 1, 0, 0})};
  std::vector<EmotionLabelSet> pred = {flags({1, 0, 0, 0, 1})};
  const auto j = evaluate(gold, pred).to_json();
  CHECK(j.contains("per_label"));
  CHECK(j.contains("macro"));
  CHECK(j.contains("micro"));
  CHECK(j.contains("counts"));
  CHECK(j["per_label"].contains("anger"));
  CHECK(j["counts"]["anger"]["tp"] == 1);
  CHECK(j["counts"]["surprise"]["fp"] == 1);
  CHECK(j["counts"]["joy"]["fn"] == 1);
}
