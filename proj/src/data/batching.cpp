#include <algorithm>

#include "sft/dataset.hpp"
#include "sft/error.hpp"

namespace sft::data {

std::vector<EncodedExample> encode_examples(const Dataset& ds, const std::vector<std::size_t>& indices,
                                            const Tokenizer& tok, std::size_t seq_len) {
  std::vector<EncodedExample> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto& ex = ds.examples.at(i);
    EncodedExample e;
    e.ids = tok.encode(ex.text);
    if (e.ids.size() > seq_len) e.ids.resize(seq_len);
    if (e.ids.empty()) e.ids.push_back(tok.pad_id());
    e.labels = ex.labels;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Batch> make_batches(const std::vector<EncodedExample>& examples, const std::vector<std::size_t>& order,
                                std::size_t seq_len, std::size_t batch_size, std::int32_t pad_id) {
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    Batch b;
    b.tokens.ids.rows = n;
    b.tokens.ids.cols = seq_len;
    b.tokens.ids.ids.reserve(n * seq_len);
    b.tokens.mask.reserve(n * seq_len);
    const std::size_t cols = examples.at(order[start]).labels.size();
    b.labels.rows = n;
    b.labels.cols = cols;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& ex = examples.at(order[start + k]);
      if (ex.labels.size() != cols) throw ContractError("examples in one batch carry different label widths");
      const auto row = pad_truncate(ex.ids, seq_len, pad_id);
      b.tokens.ids.ids.insert(b.tokens.ids.ids.end(), row.ids.begin(), row.ids.end());
      b.tokens.mask.insert(b.tokens.mask.end(), row.mask.begin(), row.mask.end());
      b.labels.values.insert(b.labels.values.end(), ex.labels.begin(), ex.labels.end());
      b.rows.push_back(order[start + k]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace sft::data
