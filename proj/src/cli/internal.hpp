#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relloc/kinematics.hpp"
#include "relloc/observability.hpp"

namespace relloc::cli {

using json = nlohmann::json;

/// Raised for usage mistakes that CLI11 cannot see (missing files, bad grids).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collects the artifacts of one run under a single directory. Files are written to
/// hidden temporaries and only renamed into place by commit(), which ends with the
/// manifest so a manifest on disk always describes complete files.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);
  ~OutputDir();
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  const std::filesystem::path& root() const { return root_; }

  std::ostream& open(const std::string& name);
  void write(const std::string& name, const std::string& content);

  /// Renames every artifact into place, then writes manifest.json atomically.
  void commit(json manifest);
  std::vector<std::string> artifacts() const;

 private:
  std::filesystem::path root_;
  std::map<std::string, std::unique_ptr<std::ofstream>> files_;
  bool committed_{false};
};

/// Writes `content` to `path` through a temporary in the same directory and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Common manifest fields; callers add command-specific ones.
json base_manifest(const std::string& command, const std::string& config_path, std::uint64_t seed,
                   std::chrono::steady_clock::time_point started);

std::string tool_version();

/// Point sampled by an observability sweep.
struct GridPoint {
  RelativeState x;
  InputVector u;
};

enum class GridConstraint { None, FormationLock, TargetStationary };

struct GridSpec {
  enum class Mode { Grid, Random } mode{Mode::Grid};
  GridConstraint constraint{GridConstraint::None};
  std::size_t samples{1000};
  std::uint64_t seed{1};
  obs::Thresholds thresholds;

  struct Axis {
    double min{0.0};
    double max{0.0};
    std::size_t steps{1};
  };
  /// x, y, psi, vi_x, vi_y, r_i, vj_x, vj_y, r_j
  std::map<std::string, Axis> axes;
};

inline constexpr std::size_t kMaxGridPoints = 2'000'000;

/// Throws sim::ConfigError with the offending line.
GridSpec parse_grid(const std::string& yaml_text);
GridSpec load_grid(const std::filesystem::path& path);

/// Expands the spec into points, applying the constraint to each one.
std::vector<GridPoint> expand_grid(const GridSpec& spec);

}  // namespace relloc::cli
