#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace usrl {

inline constexpr const char* kVersion = "0.1.0";

const std::vector<std::string>& subcommand_names();

struct RunResult {
  std::vector<std::filesystem::path> artifacts;  // every file written, manifests excluded
};

// Validates `config` for the subcommand, runs it and writes `<artifact>.manifest.json` next to
// every artifact. Progress goes to `log` when given.
RunResult run_subcommand(const Config& config, const std::string& subcommand, std::ostream* log = nullptr);

// Artifact locations inside work_dir.
struct WorkPaths {
  std::filesystem::path dir;
  std::filesystem::path rules() const { return dir / "rules.tsv"; }
  std::filesystem::path silver() const { return dir / "silver.conll"; }
  std::filesystem::path identifier(int member) const { return dir / ("identifier-" + std::to_string(member) + ".ckpt"); }
  std::filesystem::path identifier_trace(int member) const {
    return dir / ("identifier-" + std::to_string(member) + ".trace.csv");
  }
  std::filesystem::path predicted() const { return dir / "predicted.conll"; }
  std::filesystem::path autoencoder() const { return dir / "autoencoder.ckpt"; }
  std::filesystem::path autoencoder_trace() const { return dir / "autoencoder.trace.csv"; }
  std::filesystem::path roles() const { return dir / "roles.ckpt"; }
  std::filesystem::path roles_trace() const { return dir / "roles.trace.csv"; }
  std::filesystem::path clusters() const { return dir / "clusters.tsv"; }
  std::filesystem::path baseline_clusters() const { return dir / "baseline-clusters.tsv"; }
  std::filesystem::path report(const std::string& name, const std::string& ext) const {
    return dir / (name + "-report." + ext);
  }
};

WorkPaths work_paths(const Config& config);

}  // namespace usrl
