#pragma once

#include <cstdint>
#include <vector>

namespace sft {

// Integer targets for a batch: rows x cols. Binary and multiclass tasks use
// one column (0/1 or a class index); multilabel tasks one 0/1 column per label.
struct LabelGrid {
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::vector<std::int32_t> values;

  std::int32_t at(std::size_t r, std::size_t c = 0) const { return values[r * cols + c]; }
};

}  // namespace sft
