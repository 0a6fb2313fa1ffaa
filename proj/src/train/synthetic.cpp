#include "sft/synthetic.hpp"

#include <random>
#include <string>

#include "sft/rng.hpp"

namespace sft::train {

namespace {

const std::vector<std::string> kFindings = {
    "cardiomegaly", "edema",   "pneumonia", "atelectasis", "pneumothorax", "effusion",   "consolidation",
    "opacity",      "nodule",  "fracture",  "pacemaker",   "chest tube",   "pleural thickening"};

const std::vector<std::string> kAffirmed = {"{f} is present.", "there is {f}.", "mild {f}.", "small {f}.",
                                            "new {f}.", "{f} is seen.", "findings of {f}."};
const std::vector<std::string> kNegated = {"no {f}.", "no evidence of {f}.", "without {f}.", "negative for {f}.",
                                           "{f} has resolved.", "free of {f}."};
const std::vector<std::string> kUncertain = {"possible {f}.", "likely {f}.", "{f} cannot be excluded.",
                                             "questionable {f}.", "may represent {f}.", "suspicious for {f}."};
const std::vector<std::string> kNormal = {"no acute cardiopulmonary abnormality.", "lungs are clear.",
                                          "heart size is normal.", "no acute intrathoracic process.",
                                          "normal chest radiograph.", "unremarkable study."};

std::string fill(const std::string& pattern, const std::string& finding) {
  std::string out = pattern;
  const auto at = out.find("{f}");
  if (at != std::string::npos) out.replace(at, 3, finding);
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

std::string sentence(int kind, Rng& rng) {
  switch (kind) {
    case 0: return fill(pick(kAffirmed, rng), pick(kFindings, rng));
    case 1: return fill(pick(kNegated, rng), pick(kFindings, rng));
    case 2: return fill(pick(kUncertain, rng), pick(kFindings, rng));
    default: return pick(kNormal, rng);
  }
}

}  // namespace

std::vector<label::ReportRecord> synthetic_reports(const SyntheticOptions& options) {
  Rng rng = make_rng(options.seed);
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> count(1, 2);
  std::vector<label::ReportRecord> out;
  out.reserve(options.n);
  while (out.size() < options.n) {
    const int sentences = count(rng);
    std::string text;
    for (int s = 0; s < sentences; ++s) {
      if (s) text += ' ';
      text += sentence(kind(rng), rng);
    }
    if (text.size() > options.max_bytes) continue;
    label::ReportRecord rec;
    rec.note_id = "syn-" + std::to_string(out.size());
    rec.subject_id = std::to_string(1000 + out.size() % 97);
    rec.hadm_id = std::to_string(5000 + out.size());
    rec.text = text;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace sft::train
