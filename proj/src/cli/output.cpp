#include <system_error>

#include "internal.hpp"

#ifndef RELLOC_VERSION
#define RELLOC_VERSION "unknown"
#endif

namespace relloc::cli {

namespace fs = std::filesystem;

namespace {

fs::path temp_name(const fs::path& target) {
  return target.parent_path() / ("." + target.filename().string() + ".tmp");
}

}  // namespace

std::string tool_version() { return RELLOC_VERSION; }

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = temp_name(path);
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_)) throw UsageError("cannot create output directory " + root_.string());
}

OutputDir::~OutputDir() {
  if (committed_) return;
  // An aborted run leaves no half-written artifacts behind.
  for (auto& [name, f] : files_) {
    f->close();
    std::error_code ec;
    fs::remove(temp_name(root_ / name), ec);
  }
}

std::ostream& OutputDir::open(const std::string& name) {
  if (files_.count(name)) throw std::logic_error("artifact opened twice: " + name);
  auto f = std::make_unique<std::ofstream>(temp_name(root_ / name), std::ios::trunc);
  if (!*f) throw std::runtime_error("cannot write " + (root_ / name).string());
  auto& ref = *f;
  files_.emplace(name, std::move(f));
  return ref;
}

void OutputDir::write(const std::string& name, const std::string& content) { open(name) << content; }

std::vector<std::string> OutputDir::artifacts() const {
  std::vector<std::string> names;
  for (const auto& kv : files_) names.push_back(kv.first);
  return names;
}

void OutputDir::commit(json manifest) {
  for (auto& [name, f] : files_) {
    f->flush();
    if (!*f) throw std::runtime_error("write failed for " + (root_ / name).string());
    f->close();
    fs::rename(temp_name(root_ / name), root_ / name);
  }
  committed_ = true;
  manifest["artifacts"] = artifacts();
  write_atomic(root_ / "manifest.json", manifest.dump(2) + "\n");
}

json base_manifest(const std::string& command, const std::string& config_path, std::uint64_t seed,
                   std::chrono::steady_clock::time_point started) {
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {{"schema", "relloc run-manifest v1"},
          {"command", command},
          {"config", config_path},
          {"seed", seed},
          {"tool_version", tool_version()},
          {"wall_clock_s", runtime}};
}

}  // namespace relloc::cli
