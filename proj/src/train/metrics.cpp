#include "sft/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "sft/error.hpp"

namespace sft::train {

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

BinaryConfusion ConfusionMatrix::one_vs_rest(std::size_t k) const {
  BinaryConfusion b;
  for (std::size_t t = 0; t < classes; ++t) {
    for (std::size_t p = 0; p < classes; ++p) {
      const auto n = at(t, p);
      if (t == k && p == k) {
        b.tp += n;
      } else if (t == k) {
        b.fn += n;
      } else if (p == k) {
        b.fp += n;
      } else {
        b.tn += n;
      }
    }
  }
  return b;
}

double accuracy(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& truth) {
  if (predicted.size() != truth.size()) throw ContractError("prediction and label counts differ");
  if (truth.empty()) throw ContractError("accuracy of an empty set is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double f1_score(const BinaryConfusion& cm) {
  const double tp = static_cast<double>(cm.tp);
  const double p = cm.tp + cm.fp == 0 ? 0.0 : tp / static_cast<double>(cm.tp + cm.fp);
  const double r = cm.tp + cm.fn == 0 ? 0.0 : tp / static_cast<double>(cm.tp + cm.fn);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.classes == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.classes; ++k) sum += f1_score(cm.one_vs_rest(k));
  return sum / static_cast<double>(cm.classes);
}

namespace {

struct Ranked {
  std::vector<std::pair<double, std::int32_t>> items;  // sorted by score descending
  std::uint64_t pos = 0, neg = 0;
};

Ranked rank(const std::vector<double>& scores, const std::vector<std::int32_t>& labels) {
  if (scores.size() != labels.size()) throw ContractError("score and label counts differ");
  Ranked r;
  r.items.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ContractError("ROC labels must be 0 or 1");
    r.items.emplace_back(scores[i], labels[i]);
    (labels[i] ? r.pos : r.neg) += 1;
  }
  if (r.pos == 0 || r.neg == 0) throw UndefinedMetricError("AUROC needs both classes present");
  std::sort(r.items.begin(), r.items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  return r;
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<std::int32_t>& labels) {
  const Ranked r = rank(scores, labels);
  // Twice the Mann-Whitney U in integers: each negative outranked by a
  // positive counts 2, each tie 1.
  std::uint64_t twice_u = 0, neg_below = r.neg;
  for (std::size_t i = 0; i < r.items.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, n = 0;
    while (j < r.items.size() && r.items[j].first == r.items[i].first) {
      (r.items[j].second ? p : n) += 1;
      ++j;
    }
    neg_below -= n;
    twice_u += p * (2 * neg_below + n);
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(r.pos) * static_cast<double>(r.neg));
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores, const std::vector<std::int32_t>& labels) {
  const Ranked r = rank(scores, labels);
  std::vector<RocPoint> pts;
  pts.push_back({0.0, 0.0, r.items.front().first + 1.0});
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < r.items.size();) {
    const double thr = r.items[i].first;
    while (i < r.items.size() && r.items[i].first == thr) {
      (r.items[i].second ? tp : fp) += 1;
      ++i;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(r.neg), static_cast<double>(tp) / static_cast<double>(r.pos),
                   thr});
  }
  return pts;
}

double trapezoid_area(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

std::string roc_csv(const std::vector<RocPoint>& points) {
  std::string out = "fpr,tpr,threshold\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.9g\n", p.fpr, p.tpr, p.threshold);
    out += buf;
  }
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (std::size_t p = 0; p < cm.classes; ++p) out += "," + std::to_string(p);
  out += "\n";
  for (std::size_t t = 0; t < cm.classes; ++t) {
    out += std::to_string(t);
    for (std::size_t p = 0; p < cm.classes; ++p) out += "," + std::to_string(cm.at(t, p));
    out += "\n";
  }
  return out;
}

}  // namespace sft::train
