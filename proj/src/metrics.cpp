#include "lotus/metrics.hpp"

#include <cmath>

#include "lotus/errors.hpp"

namespace lotus {

namespace {

nlohmann::json prf_to_json(const Prf& p) {
  return nlohmann::json{
      {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace

ConfusionCounts confusion(std::span<const EmotionLabelSet> gold,
                          std::span<const EmotionLabelSet> pred) {
  if (gold.size() != pred.size()) {
    throw ArgumentError("gold/pred length mismatch: " + std::to_string(gold.size()) +
                        " vs " + std::to_string(pred.size()));
  }
  ConfusionCounts counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      const bool g = gold[i][k] != 0;
      const bool p = pred[i][k] != 0;
      auto& c = counts.per_label[k];
      if (g && p) {
        ++c.tp;
      } else if (!g && p) {
        ++c.fp;
      } else if (g && !p) {
        ++c.fn;
      } else {
        ++c.tn;
      }
    }
  }
  return counts;
}

Prf prf(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  Prf out;
  const std::uint64_t pred_pos = tp + fp;
  const std::uint64_t gold_pos = tp + fn;
  out.precision = pred_pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_pos);
  out.recall = gold_pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_pos);
  const double pr = out.precision + out.recall;
  out.f1 = pr == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / pr;
  return out;
}

MacroMicro macro_micro(const ConfusionCounts& counts) {
  MacroMicro out;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    const auto& c = counts.per_label[k];
    const Prf label = prf(c.tp, c.fp, c.fn);
    out.macro.precision += label.precision;
    out.macro.recall += label.recall;
    out.macro.f1 += label.f1;
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  out.macro.precision /= static_cast<double>(kNumEmotions);
  out.macro.recall /= static_cast<double>(kNumEmotions);
  out.macro.f1 /= static_cast<double>(kNumEmotions);
  out.micro = prf(tp, fp, fn);
  return out;
}

MetricsReport evaluate(std::span<const EmotionLabelSet> gold,
                       std::span<const EmotionLabelSet> pred) {
  MetricsReport report;
  report.counts = confusion(gold, pred);
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    const auto& c = report.counts.per_label[k];
    report.per_label[k] = prf(c.tp, c.fp, c.fn);
  }
  const MacroMicro mm = macro_micro(report.counts);
  report.macro = mm.macro;
  report.micro = mm.micro;
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per_label_json;
  nlohmann::json counts_json;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    const std::string name(kEmotionNames[k]);
    per_label_json[name] = prf_to_json(per_label[k]);
    const auto& c = counts.per_label[k];
    counts_json[name] = nlohmann::json{
        {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
  }
  return nlohmann::json{{"per_label", per_label_json},
                        {"macro", prf_to_json(macro)},
                        {"micro", prf_to_json(micro)},
                        {"counts", counts_json}};
}

MeanStd aggregate(std::span<const double> values) {
  if (values.empty()) {
    throw ArgumentError("aggregate requires at least one value");
  }
  MeanStd out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double sq = 0.0;
    for (double v : values) {
      const double d = v - out.mean;
      sq += d * d;
    }
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace lotus
