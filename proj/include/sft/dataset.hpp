#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sft/gpt_model.hpp"
#include "sft/label_grid.hpp"
#include "sft/rng.hpp"
#include "sft/tokenizer.hpp"

namespace sft::data {

// binary: one 0/1 label; multiclass4: one class in {0,1,2,3} using the
// Pos 1 / Neg 0 / Unc 2 / Null 3 encoding; multilabel13: 13 0/1 labels.
enum class TaskKind { Binary, Multiclass4, Multilabel13 };

std::string to_string(TaskKind task);
TaskKind task_from_string(const std::string& name);
gpt::HeadKind head_for(TaskKind task);
std::size_t classes_for(TaskKind task);     // logits per example
std::size_t label_columns(TaskKind task);   // label values per example

struct Example {
  std::string id;
  std::string text;
  std::vector<std::int32_t> labels;
};

struct Dataset {
  TaskKind task = TaskKind::Binary;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
};

// Rows are {note_id, text, label} or {note_id, text, labels: [...]}, or a
// labeled-report file read through `target`: a column such as
// label_any_disease_pos_or_unc (binary) or y_edema_3 (multiclass4), or for
// multilabel13 the suffix bin_posonly / bin_pos_or_unc.
Dataset load_dataset(const std::filesystem::path& path, TaskKind task, const std::string& target = "");
void check_labels(const Dataset& ds);

// One JSONL line per example with note_id, text and label(s).
std::string dataset_jsonl(const Dataset& ds);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Fisher-Yates permutation of 0..N-1, then sizes floor(0.7N), floor(0.1N),
// remainder. N < 3 is a contract error.
Split random_split(std::size_t n, std::uint64_t seed);

struct SamplerWeights {
  std::map<std::int32_t, std::size_t> class_counts;
  std::map<std::int32_t, double> class_weights;  // 1 / c_k
  std::vector<double> example_weights;           // s_i = w_{y_i}
};

// Class key of an example: its label for single-label tasks, "any positive"
// for multilabel rows.
std::int32_t sampling_class(const Example& ex, TaskKind task);
SamplerWeights sampler_weights(const std::vector<std::int32_t>& classes);

// n independent draws with replacement, P(i) = s_i / sum s.
std::vector<std::size_t> weighted_sample(const SamplerWeights& weights, std::size_t n, Rng& rng);

struct EncodedExample {
  std::vector<std::int32_t> ids;  // truncated to the sequence length
  std::vector<std::int32_t> labels;
};

// Tokenizes and truncates; texts that encode to nothing become one pad
// token so every row keeps a last token.
std::vector<EncodedExample> encode_examples(const Dataset& ds, const std::vector<std::size_t>& indices,
                                            const Tokenizer& tok, std::size_t seq_len);

struct Batch {
  gpt::TokenBatch tokens;
  LabelGrid labels;
  std::vector<std::size_t> rows;  // positions in the encoded split
};

// Batches of B in the given order; the last batch may be short.
std::vector<Batch> make_batches(const std::vector<EncodedExample>& examples, const std::vector<std::size_t>& order,
                                std::size_t seq_len, std::size_t batch_size, std::int32_t pad_id);

// Training order: `draws` weighted draws (default one per example).
std::vector<std::size_t> train_order(const SamplerWeights& weights, std::size_t draws, Rng& rng);
std::vector<std::size_t> natural_order(std::size_t n);

}  // namespace sft::data
