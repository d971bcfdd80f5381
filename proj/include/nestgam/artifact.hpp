#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nestgam/inference.hpp"
#include "nestgam/model.hpp"

namespace nestgam {

/// Everything needed to rebuild a fitted model and reproduce its predictions.
struct FitArtifact {
  int format_version = kFormatVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
  ModelSpec spec;
  DataTable train;
  FitState state;
  std::vector<std::optional<FrozenCentre>> frozen;
  std::string message;
};

FitArtifact make_artifact(const Model& model, const FitState& state, const DataTable& train,
                          const std::string& config_hash, std::uint64_t seed, const std::string& message = "");
std::string artifact_to_text(const FitArtifact& a);
FitArtifact artifact_from_text(const std::string& text);
void save_artifact(const std::string& path, const FitArtifact& a);
FitArtifact load_artifact(const std::string& path);

/// Rebuilds the model from the stored spec and training data, restoring frozen statistics.
Model rebuild_model(const FitArtifact& a);

}  // namespace nestgam
