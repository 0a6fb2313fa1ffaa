#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sft/freeze_policy.hpp"
#include "sft/gpt_model.hpp"

namespace sft::tune {

// Paper convention counts linear layers without bias vectors (attention
// 4d^2, FFN 2 d d_ff); full convention counts every tensor the model holds.
enum class Convention { Paper, Full };

std::string to_string(Convention c);
Convention convention_from_string(const std::string& name);

struct LedgerRow {
  std::string component;
  std::uint64_t count = 0;
  std::uint64_t trainable = 0;
};

struct ParamLedger {
  Convention convention = Convention::Paper;
  std::size_t n_layer = 0;

  // Per-component counts.
  std::uint64_t token_embeddings = 0;       // V d
  std::uint64_t positional_embeddings = 0;  // T_max d
  std::uint64_t embeddings = 0;             // sum of both
  std::uint64_t block_attention = 0;
  std::uint64_t block_ffn = 0;
  std::uint64_t block_ln = 0;
  std::uint64_t block_total = 0;
  std::uint64_t final_ln = 0;
  std::uint64_t head = 0;

  // embeddings, blocks.0 .. blocks.L-1, lnf, head
  std::vector<LedgerRow> rows;

  std::uint64_t total = 0;
  std::uint64_t trainable = 0;
  std::uint64_t frozen = 0;

  double trainable_fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(trainable) / static_cast<double>(total);
  }
};

ParamLedger count_params(const gpt::GptConfig& cfg, const FreezePolicy& policy, Convention convention);

// Whether a named tensor contributes to the given convention's counts.
bool counted_in(const std::string& name, Convention convention);

// Two-convention component table.
std::string ledger_csv(const ParamLedger& paper, const ParamLedger& full);
std::string ledger_text(const ParamLedger& paper, const ParamLedger& full, const std::string& policy_name);

// 1234567 -> "1,234,567"
std::string with_thousands(std::uint64_t value);
// 1538 -> "1.5k", 7084034 -> "7.08M", 123654914 -> "124M"
std::string humanize_count(std::uint64_t value);

}  // namespace sft::tune
