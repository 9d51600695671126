#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "tfhtmm/model.hpp"

namespace tfhtmm {

enum class ModelKind { kTf, kSp };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

using AnyModel = std::variant<TfModelParams, SpModelParams>;

inline ModelKind kind_of(const AnyModel& m) {
  return std::holds_alternative<TfModelParams>(m) ? ModelKind::kTf : ModelKind::kSp;
}

/// Everything needed to resume or evaluate a trained model.
struct Checkpoint {
  HyperParams hyper;
  AnyModel model;
  std::string rng_state;
  int iteration = 0;
};

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& state);

/// Self-describing JSON document ("format": "tfhtmm-checkpoint", "version": 1).
/// Doubles are written with round-trip precision, so parse(serialise(c))
/// reproduces c bit for bit.
std::string serialise_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

Checkpoint read_checkpoint_file(const std::string& path);
void write_checkpoint_file(const std::string& path, const Checkpoint& checkpoint);

std::string hyper_to_json_string(const HyperParams& hyper);

}  // namespace tfhtmm
