#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tvc::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDivergence = 3,
  kArtifactMismatch = 4,
};

class ArtifactMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Records what a command read and wrote, with content hashes.
class Manifest {
 public:
  Manifest(std::string command, nlohmann::json config, std::uint64_t seed);

  void add_input(const std::filesystem::path& path);
  /// Writes `bytes` to `path` and records its hash.
  void write_output(const std::filesystem::path& path, const std::string& bytes);
  /// Stamps the finish time and writes manifest.json into `dir`.
  void save(const std::filesystem::path& dir);

 private:
  nlohmann::json doc_;
};

/// Throws ArtifactMismatch when a listed output is missing or its hash differs.
void verify_manifest(const std::filesystem::path& manifest_path);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace tvc::cli
