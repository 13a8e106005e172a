#include "inti/compress/stage_spec.hpp"

#include "inti/errors.hpp"

namespace inti::compress {

std::string to_string(StageKind k) {
  switch (k) {
    case StageKind::kInti: return "inti";
    case StageKind::kLinearPool: return "linear_pool";
    case StageKind::kConvPool: return "conv_pool";
  }
  return "?";
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kSepToken: return "sep_token";
    case Fusion::kAddAll: return "add_all";
    case Fusion::kCatAll: return "cat_all";
  }
  return "?";
}

std::string to_string(HeadMode h) {
  switch (h) {
    case HeadMode::kSoftmax: return "softmax";
    case HeadMode::kSigmoid: return "sigmoid";
    case HeadMode::kAttention: return "attention";
  }
  return "?";
}

void to_json(nlohmann::json& j, const StageSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"insert_after_block", s.insert_after_block},
                     {"fusion", to_string(s.fusion)},
                     {"head", to_string(s.head)},
                     {"head_hidden_ratio", s.head_hidden_ratio}};
}

void from_json(const nlohmann::json& j, StageSpec& s) {
  s = StageSpec{};
  const auto kind = j.value("kind", std::string("inti"));
  if (kind == "inti") s.kind = StageKind::kInti;
  else if (kind == "linear_pool") s.kind = StageKind::kLinearPool;
  else if (kind == "conv_pool") s.kind = StageKind::kConvPool;
  else throw ConfigError("unknown stage kind '" + kind + "'");

  if (!j.contains("insert_after_block")) throw ConfigError("stage is missing insert_after_block");
  const auto at = j.at("insert_after_block").get<long long>();
  if (at < 0) throw ConfigError("insert_after_block must be non-negative");
  s.insert_after_block = static_cast<std::size_t>(at);

  const auto fusion = j.value("fusion", std::string("sep_token"));
  if (fusion == "sep_token") s.fusion = Fusion::kSepToken;
  else if (fusion == "add_all") s.fusion = Fusion::kAddAll;
  else if (fusion == "cat_all") s.fusion = Fusion::kCatAll;
  else throw ConfigError("unknown fusion mode '" + fusion + "'");

  const auto head = j.value("head", std::string("softmax"));
  if (head == "softmax") s.head = HeadMode::kSoftmax;
  else if (head == "sigmoid") s.head = HeadMode::kSigmoid;
  else if (head == "attention") s.head = HeadMode::kAttention;
  else throw ConfigError("unknown head mode '" + head + "'");

  s.head_hidden_ratio = j.value("head_hidden_ratio", 3.5);
  if (!(s.head_hidden_ratio > 0.0)) throw ConfigError("head_hidden_ratio must be positive");
}

}  // namespace inti::compress
