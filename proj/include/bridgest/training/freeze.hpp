#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "bridgest/model/bridge_model.hpp"

namespace bridgest::train {

inline const std::set<std::string> kParamGroups{"speech_encoder", "audio_encoder", "qformer", "lora", "decoder"};

struct FreezePolicy {
  std::set<std::string> trainable_groups{"qformer", "lora"};
  bool speech_encoder_trainable_first_epoch = false;

  void validate() const {
    for (const auto& g : trainable_groups) {
      if (!kParamGroups.count(g)) throw ConfigError("freeze policy: unknown parameter group '" + g + "'");
    }
  }

  static FreezePolicy en_to_indic() { return {}; }
  static FreezePolicy indic_to_en() { return {{"qformer", "lora"}, true}; }
};

/// Sets every trainable flag for `epoch` (0-based). Parameters leaving the
/// trainable set also lose their optimizer state.
inline void apply_freeze_policy(ParameterStore& store, const FreezePolicy& policy, std::size_t epoch) {
  policy.validate();
  for (const auto& name : store.names()) {
    const std::string g = model::param_group(name);
    if (!kParamGroups.count(g)) throw ConfigError("freeze policy: parameter '" + name + "' has unknown group '" + g + "'");
    bool on = policy.trainable_groups.count(g) != 0;
    if (g == "speech_encoder" && policy.speech_encoder_trainable_first_epoch) on = on || epoch == 0;
    store.set_trainable(name, on);
  }
}

inline nlohmann::json to_json(const FreezePolicy& p) {
  return {{"trainable_groups", p.trainable_groups},
          {"speech_encoder_trainable_first_epoch", p.speech_encoder_trainable_first_epoch}};
}

inline void from_json(const nlohmann::json& j, FreezePolicy& p) {
  for (const auto& [k, v] : j.items()) {
    if (k == "trainable_groups") p.trainable_groups = v.get<std::set<std::string>>();
    else if (k == "speech_encoder_trainable_first_epoch") p.speech_encoder_trainable_first_epoch = v.get<bool>();
    else throw ConfigError("freeze: unknown key '" + k + "'");
  }
  p.validate();
}

}  // namespace bridgest::train
