#include <algorithm>
#include <fstream>
#include <set>

#include "sft/error.hpp"
#include "sft/labeler.hpp"

namespace sft::label {

namespace {

struct DefaultCondition {
  const char* name;
  std::vector<std::string> keywords;
};

const std::vector<DefaultCondition>& default_conditions() {
  static const std::vector<DefaultCondition> table = {
      {"enlarged_cardiomediastinum",
       {"enlarged cardiomediastinum", "enlarged cardiomediastinal silhouette", "cardiomediastinal enlargement",
        "widened mediastinum", "mediastinal widening", "widening of the mediastinum", "mediastinal enlargement"}},
      {"cardiomegaly",
       {"cardiomegaly", "enlarged cardiac silhouette", "enlargement of the cardiac silhouette", "enlarged heart",
        "heart size is enlarged", "heart is enlarged"}},
      {"lung_opacity",
       {"opacity", "opacities", "airspace opacity", "airspace opacities", "opacification", "airspace disease",
        "increased density"}},
      {"lung_lesion", {"lung lesion", "nodule", "pulmonary nodule", "mass", "masses", "lesion", "nodular opacity"}},
      {"edema",
       {"edema", "pulmonary edema", "interstitial edema", "vascular congestion", "pulmonary vascular congestion"}},
      {"consolidation", {"consolidation", "airspace consolidation"}},
      {"pneumonia", {"pneumonia", "infectious process"}},
      {"atelectasis", {"atelectasis", "atelectatic", "collapse", "volume loss"}},
      {"pneumothorax", {"pneumothorax", "pneumothoraces"}},
      {"pleural_effusion", {"pleural effusion", "effusion", "pleural fluid"}},
      {"pleural_other",
       {"pleural thickening", "pleural plaque", "pleural scarring", "pleural calcification", "fibrothorax"}},
      {"fracture", {"fracture", "rib fracture", "clavicle fracture", "clavicular fracture", "fractured"}},
      {"support_devices",
       {"endotracheal tube", "et tube", "central venous catheter", "central line", "picc", "picc line", "chest tube",
        "pacemaker", "ng tube", "nasogastric tube", "enteric tube", "tracheostomy tube", "support device"}},
  };
  return table;
}

std::vector<std::string> string_list(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("labeler config is missing '") + key + "'");
  const auto& v = doc.at(key);
  if (!v.is_array()) throw ConfigError(std::string("labeler config '") + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) throw ConfigError(std::string("labeler config '") + key + "' must hold strings only");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

LabelerConfig LabelerConfig::defaults() {
  LabelerConfig cfg;
  for (const auto& d : default_conditions()) {
    Condition c{d.name, {}};
    for (const auto& k : d.keywords) c.keywords.push_back({k, true});
    cfg.conditions.push_back(std::move(c));
  }
  cfg.negation_cues = {"no", "not", "without", "negative for", "no evidence of", "absent", "resolved",
                       "free of", "rather than", "no signs of", "ruled out"};
  cfg.uncertainty_cues = {"possible", "possibly", "likely", "may", "cannot exclude", "cannot be excluded",
                          "suggests", "suspicious for", "concerning for", "questionable", "probable", "probably",
                          "might", "could", "suggestive of", "versus", "equivocal"};
  cfg.no_finding_patterns = {"no acute cardiopulmonary abnormality", "no acute cardiopulmonary process",
                             "no acute cardiopulmonary disease", "no acute cardiopulmonary findings",
                             "no acute intrathoracic process", "no acute intrathoracic abnormality",
                             "no acute abnormality", "no acute findings", "no acute disease",
                             "normal chest radiograph", "normal chest x-ray", "unremarkable chest radiograph"};
  cfg.window_chars = 120;
  cfg.validate();
  return cfg;
}

LabelerConfig LabelerConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("labeler config must be a JSON object");
  LabelerConfig cfg;
  const bool plural_default = doc.value("plural_s", true);
  const auto names = string_list(doc, "conditions");
  if (!doc.contains("keywords") || !doc.at("keywords").is_object()) {
    throw ConfigError("labeler config 'keywords' must map each condition to a keyword list");
  }
  const auto& kw = doc.at("keywords");
  for (const auto& name : names) {
    if (!kw.contains(name)) throw ConfigError("no keywords configured for condition '" + name + "'");
    Condition c{name, {}};
    for (const auto& item : kw.at(name)) {
      if (item.is_string()) {
        c.keywords.push_back({item.get<std::string>(), plural_default});
      } else if (item.is_object() && item.contains("phrase")) {
        c.keywords.push_back({item.at("phrase").get<std::string>(), item.value("plural_s", plural_default)});
      } else {
        throw ConfigError("keyword for '" + name + "' must be a string or {phrase, plural_s}");
      }
    }
    cfg.conditions.push_back(std::move(c));
  }
  for (const auto& [key, value] : kw.items()) {
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      throw ConfigError("keywords given for unknown condition '" + key + "'");
    }
  }
  cfg.negation_cues = string_list(doc, "negation_cues");
  cfg.uncertainty_cues = string_list(doc, "uncertainty_cues");
  cfg.no_finding_patterns = string_list(doc, "no_finding_patterns");
  if (doc.contains("window_chars")) {
    const auto& w = doc.at("window_chars");
    if (!w.is_number_integer() || w.get<long long>() <= 0) throw ConfigError("window_chars must be a positive integer");
    cfg.window_chars = w.get<std::size_t>();
  }
  if (doc.contains("cue_scope")) {
    const auto scope = doc.at("cue_scope").get<std::string>();
    if (scope == "window") {
      cfg.cue_scope = CueScope::AnywhereInWindow;
    } else if (scope == "pre_mention") {
      cfg.cue_scope = CueScope::PreMention;
    } else {
      throw ConfigError("cue_scope must be 'window' or 'pre_mention', got '" + scope + "'");
    }
  }
  cfg.validate();
  return cfg;
}

LabelerConfig LabelerConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labeler config: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("labeler config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

nlohmann::ordered_json LabelerConfig::to_json() const {
  nlohmann::ordered_json doc;
  doc["conditions"] = nlohmann::ordered_json::array();
  nlohmann::ordered_json kw = nlohmann::ordered_json::object();
  for (const auto& c : conditions) {
    doc["conditions"].push_back(c.name);
    auto list = nlohmann::ordered_json::array();
    for (const auto& k : c.keywords) {
      if (k.plural_s) {
        list.push_back(k.phrase);
      } else {
        list.push_back({{"phrase", k.phrase}, {"plural_s", false}});
      }
    }
    kw[c.name] = list;
  }
  doc["keywords"] = kw;
  doc["negation_cues"] = negation_cues;
  doc["uncertainty_cues"] = uncertainty_cues;
  doc["no_finding_patterns"] = no_finding_patterns;
  doc["window_chars"] = window_chars;
  doc["cue_scope"] = cue_scope == CueScope::PreMention ? "pre_mention" : "window";
  return doc;
}

void LabelerConfig::validate() {
  if (conditions.empty()) throw ConfigError("labeler config needs at least one condition");
  if (window_chars == 0) throw ConfigError("window_chars must be positive");
  std::set<std::string> seen;
  for (auto& c : conditions) {
    if (c.name.empty()) throw ConfigError("condition names must be nonempty");
    if (!seen.insert(c.name).second) throw ConfigError("duplicate condition '" + c.name + "'");
    if (c.keywords.empty()) throw ConfigError("condition '" + c.name + "' has no keywords");
    for (auto& k : c.keywords) {
      k.phrase = normalize_text(k.phrase);
      if (k.phrase.empty()) throw ConfigError("condition '" + c.name + "' has an empty keyword");
    }
  }
  const auto clean = [](std::vector<std::string>& list, const char* what) {
    for (auto& s : list) {
      s = normalize_text(s);
      if (s.empty()) throw ConfigError(std::string("empty entry in ") + what);
    }
  };
  clean(negation_cues, "negation_cues");
  clean(uncertainty_cues, "uncertainty_cues");
  clean(no_finding_patterns, "no_finding_patterns");
}

std::size_t LabelerConfig::index_of(const std::string& condition) const {
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (conditions[i].name == condition) return i;
  }
  throw ConfigError("unknown condition '" + condition + "'");
}

}  // namespace sft::label
