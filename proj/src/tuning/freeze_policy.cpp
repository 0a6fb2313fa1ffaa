#include "sft/freeze_policy.hpp"

#include "sft/error.hpp"

namespace sft::tune {

bool glob_match(const std::string& pattern, const std::string& text) {
  std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (p < pattern.size() && pattern[p] == text[t]) {
      ++p;
      ++t;
    } else if (star != std::string::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

FreezePolicy FreezePolicy::parse(const std::string& text) {
  if (text == "head" || text == "head-only" || text == "head_only") return head_only();
  if (text == "selective") return selective();
  if (text == "full") return full();
  const std::string prefix = "custom:";
  if (text.rfind(prefix, 0) == 0) {
    std::vector<std::string> patterns;
    std::string rest = text.substr(prefix.size());
    std::size_t start = 0;
    while (start <= rest.size()) {
      const std::size_t comma = rest.find(',', start);
      const std::string item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!item.empty()) patterns.push_back(item);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (patterns.empty()) throw ConfigError("custom policy needs at least one pattern");
    return custom(std::move(patterns));
  }
  throw ConfigError("unknown freeze policy '" + text + "' (expected head, selective, full or custom:...)");
}

std::string FreezePolicy::name() const {
  switch (kind_) {
    case Kind::HeadOnly:
      return "head";
    case Kind::Selective:
      return "selective";
    case Kind::Full:
      return "full";
    case Kind::Custom: {
      std::string out = "custom:";
      for (std::size_t i = 0; i < patterns_.size(); ++i) out += (i ? "," : "") + patterns_[i];
      return out;
    }
  }
  return "unknown";
}

std::set<std::string> FreezePolicy::resolve(const gpt::GptConfig& cfg) const {
  std::set<std::string> trainable;
  const auto specs = gpt::param_specs(cfg);
  const std::string last_block = gpt::block_prefix(cfg.n_layer - 1);
  for (const auto& spec : specs) {
    const std::string& n = spec.name;
    const bool is_head = n.rfind("head.", 0) == 0;
    const bool is_lnf = n.rfind("lnf.", 0) == 0;
    switch (kind_) {
      case Kind::HeadOnly:
        if (is_head) trainable.insert(n);
        break;
      case Kind::Selective:
        if (is_head || is_lnf || n.rfind(last_block, 0) == 0) trainable.insert(n);
        break;
      case Kind::Full:
        trainable.insert(n);
        break;
      case Kind::Custom:
        break;
    }
  }
  if (kind_ == Kind::Custom) {
    for (const auto& pattern : patterns_) {
      bool any = false;
      for (const auto& spec : specs) {
        if (glob_match(pattern, spec.name)) {
          trainable.insert(spec.name);
          any = true;
        }
      }
      if (!any) throw ConfigError("freeze pattern '" + pattern + "' matches no parameter");
    }
  }
  return trainable;
}

void apply_policy(gpt::ModelParams& params, const gpt::GptConfig& cfg, const FreezePolicy& policy) {
  gpt::check_params(params, cfg);
  const auto trainable = policy.resolve(cfg);
  for (auto& [name, tensor] : params.entries()) {
    const bool on = trainable.count(name) != 0;
    tensor.set_requires_grad(on);
    if (on) tensor.zero_grad();
  }
}

void zero_grads(gpt::ModelParams& params) {
  for (auto& [name, tensor] : params.entries()) {
    if (tensor.requires_grad()) tensor.zero_grad();
  }
}

}  // namespace sft::tune
