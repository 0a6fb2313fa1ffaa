#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sft::train {

struct BinaryConfusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
};

// counts[true][pred], C x C.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::uint64_t total() const;
  // One-vs-rest view of class k.
  BinaryConfusion one_vs_rest(std::size_t k) const;
};

double accuracy(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& truth);

// 2PR/(P+R) for the positive class, 0 when P+R = 0.
double f1_score(const BinaryConfusion& cm);
// Unweighted mean of per-class one-vs-rest F1.
double macro_f1(const ConfusionMatrix& cm);

// Mann-Whitney form: P(score+ > score-) + 0.5 P(=). Throws
// UndefinedMetricError unless both classes occur. labels are 0/1.
double auroc(const std::vector<double>& scores, const std::vector<std::int32_t>& labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // predict positive when score >= threshold
};

// (0,0), one point per distinct threshold in decreasing order, ending at (1,1).
std::vector<RocPoint> roc_points(const std::vector<double>& scores, const std::vector<std::int32_t>& labels);
double trapezoid_area(const std::vector<RocPoint>& points);

std::string roc_csv(const std::vector<RocPoint>& points);
std::string confusion_csv(const ConfusionMatrix& cm);

}  // namespace sft::train
