#pragma once

#include <cstdint>
#include <vector>

#include "sft/labeler_io.hpp"

namespace sft::train {

struct SyntheticOptions {
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::size_t max_bytes = 63;  // every report fits a 64-token byte-level window
};

// Short template reports mixing finding keywords with negation and
// uncertainty phrasing, plus normal-study sentences. Labels come from
// running the weak labeler over the text, not from the templates.
std::vector<label::ReportRecord> synthetic_reports(const SyntheticOptions& options);

}  // namespace sft::train
