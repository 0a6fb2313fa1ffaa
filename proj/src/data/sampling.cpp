#include <numeric>
#include <random>

#include "sft/dataset.hpp"
#include "sft/error.hpp"

namespace sft::data {

Split random_split(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw ContractError("a 70/10/20 split needs at least 3 examples, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  const std::size_t n_train = (7 * n) / 10;
  const std::size_t n_val = n / 10;
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

std::int32_t sampling_class(const Example& ex, TaskKind task) {
  if (task != TaskKind::Multilabel13) return ex.labels.at(0);
  for (auto v : ex.labels) {
    if (v != 0) return 1;
  }
  return 0;
}

SamplerWeights sampler_weights(const std::vector<std::int32_t>& classes) {
  SamplerWeights w;
  for (auto c : classes) ++w.class_counts[c];
  for (const auto& [c, count] : w.class_counts) w.class_weights[c] = 1.0 / static_cast<double>(count);
  w.example_weights.reserve(classes.size());
  for (auto c : classes) w.example_weights.push_back(w.class_weights.at(c));
  return w;
}

std::vector<std::size_t> weighted_sample(const SamplerWeights& weights, std::size_t n, Rng& rng) {
  if (weights.example_weights.empty()) {
    if (n == 0) return {};
    throw ContractError("cannot sample from an empty weight vector");
  }
  for (double w : weights.example_weights) {
    if (!(w > 0.0)) throw ContractError("sampling weights must be positive");
  }
  std::discrete_distribution<std::size_t> dist(weights.example_weights.begin(), weights.example_weights.end());
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = dist(rng);
  return out;
}

std::vector<std::size_t> train_order(const SamplerWeights& weights, std::size_t draws, Rng& rng) {
  return weighted_sample(weights, draws == 0 ? weights.example_weights.size() : draws, rng);
}

std::vector<std::size_t> natural_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

}  // namespace sft::data
