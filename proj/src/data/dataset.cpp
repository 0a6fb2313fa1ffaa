#include "sft/dataset.hpp"

#include "sft/error.hpp"
#include "sft/labeler.hpp"
#include "sft/labeler_io.hpp"

namespace sft::data {

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Binary: return "binary";
    case TaskKind::Multiclass4: return "multiclass4";
    case TaskKind::Multilabel13: return "multilabel13";
  }
  return "binary";
}

TaskKind task_from_string(const std::string& name) {
  if (name == "binary") return TaskKind::Binary;
  if (name == "multiclass4") return TaskKind::Multiclass4;
  if (name == "multilabel13") return TaskKind::Multilabel13;
  throw ConfigError("unknown task '" + name + "' (expected binary, multiclass4 or multilabel13)");
}

gpt::HeadKind head_for(TaskKind task) {
  switch (task) {
    case TaskKind::Binary: return gpt::HeadKind::BinarySigmoid;
    case TaskKind::Multiclass4: return gpt::HeadKind::MultiClassSoftmax;
    case TaskKind::Multilabel13: return gpt::HeadKind::MultiLabelSigmoid;
  }
  return gpt::HeadKind::BinarySigmoid;
}

std::size_t classes_for(TaskKind task) {
  switch (task) {
    case TaskKind::Binary: return 1;
    case TaskKind::Multiclass4: return 4;
    case TaskKind::Multilabel13: return 13;
  }
  return 1;
}

std::size_t label_columns(TaskKind task) { return task == TaskKind::Multilabel13 ? 13 : 1; }

namespace {

std::int32_t target_value(const nlohmann::json& row, const std::string& column, TaskKind task) {
  if (!row.contains(column)) throw ContractError("row lacks target column '" + column + "'");
  const auto v = label::int_field(row, column);
  const bool three_class = column.size() > 2 && column.compare(column.size() - 2, 2, "_3") == 0;
  if (task == TaskKind::Multiclass4 && three_class) {
    return label::encode(label::from_table_code(v ? std::optional<int>(static_cast<int>(*v)) : std::nullopt));
  }
  if (!v) throw ContractError("target column '" + column + "' is null");
  return static_cast<std::int32_t>(*v);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, TaskKind task, const std::string& target) {
  const auto rows = label::read_rows(path, label::format_from("", path));
  Dataset ds;
  ds.task = task;
  const auto conditions = label::LabelerConfig::defaults().conditions;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string where = "row " + std::to_string(i + 1);
    if (row.contains("__parse_error")) throw IoError(where + ": malformed JSON");
    Example ex;
    ex.id = label::string_field(row, "note_id");
    if (ex.id.empty()) ex.id = std::to_string(i);
    if (!row.contains("text") || !row.at("text").is_string()) {
      throw ContractError(where + " (note_id " + ex.id + "): missing text field");
    }
    ex.text = row.at("text").get<std::string>();
    try {
      if (task == TaskKind::Multilabel13) {
        if (target.empty() && row.contains("labels")) {
          for (const auto& v : row.at("labels")) ex.labels.push_back(v.get<std::int32_t>());
        } else {
          const std::string suffix = target.empty() ? "bin_pos_or_unc" : target;
          for (const auto& c : conditions) ex.labels.push_back(target_value(row, "y_" + c.name + "_" + suffix, task));
        }
      } else if (!target.empty()) {
        ex.labels.push_back(target_value(row, target, task));
      } else if (row.contains("label")) {
        ex.labels.push_back(target_value(row, "label", task));
      } else {
        throw ContractError("no 'label' field and no --target column given");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ContractError(where + " (note_id " + ex.id + "): bad label: " + e.what());
    } catch (const ContractError& e) {
      throw ContractError(where + " (note_id " + ex.id + "): " + e.what());
    }
    ds.examples.push_back(std::move(ex));
  }
  check_labels(ds);
  return ds;
}

void check_labels(const Dataset& ds) {
  const std::size_t cols = label_columns(ds.task);
  const std::int32_t hi = ds.task == TaskKind::Multiclass4 ? 4 : 2;
  for (const auto& ex : ds.examples) {
    if (ex.labels.size() != cols) {
      throw ContractError("example " + ex.id + " has " + std::to_string(ex.labels.size()) + " labels, task " +
                          to_string(ds.task) + " needs " + std::to_string(cols));
    }
    for (auto v : ex.labels) {
      if (v < 0 || v >= hi) {
        throw ContractError("example " + ex.id + " has label " + std::to_string(v) + " outside [0, " +
                            std::to_string(hi) + ") for task " + to_string(ds.task));
      }
    }
  }
}

std::string dataset_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& ex : ds.examples) {
    nlohmann::ordered_json row;
    row["note_id"] = ex.id;
    row["text"] = ex.text;
    if (ds.task == TaskKind::Multilabel13) {
      row["labels"] = ex.labels;
    } else {
      row["label"] = ex.labels.at(0);
    }
    out += row.dump() + "\n";
  }
  return out;
}

}  // namespace sft::data
