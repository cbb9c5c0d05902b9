#include "output.hpp"

#include <algorithm>
#include <fstream>
#include <system_error>
#include <unistd.h>

#include "fuselab/errors.hpp"
#include "fuselab/svol.hpp"

namespace fuselab::cli {

namespace fs = std::filesystem;

namespace {

bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  if (fs::exists(a, ec) && fs::exists(b, ec)) return fs::equivalent(a, b, ec);
  return fs::weakly_canonical(a, ec) == fs::weakly_canonical(b, ec);
}

}  // namespace

OutputStage::OutputStage(fs::path dir, bool force, std::vector<fs::path> inputs)
    : dir_(std::move(dir)), force_(force), inputs_(std::move(inputs)) {
  if (dir_.empty()) throw UsageError("an output directory is required (-o)");
  if (fs::exists(dir_) && !fs::is_directory(dir_)) {
    throw UsageError("output path " + dir_.string() + " exists and is not a directory");
  }
}

OutputStage::~OutputStage() {
  if (!stage_.empty()) {
    std::error_code ec;
    fs::remove_all(stage_, ec);
  }
}

void OutputStage::claim(const std::string& name) {
  if (std::find(claimed_.begin(), claimed_.end(), name) != claimed_.end()) {
    throw UsageError("two outputs would share the name " + name);
  }
  const fs::path target = dir_ / name;
  for (const auto& in : inputs_) {
    if (same_file(in, target)) throw UsageError("output " + target.string() + " would overwrite an input");
  }
  if (fs::exists(target) && !force_) {
    throw UsageError(target.string() + " exists; pass --force to overwrite");
  }
  claimed_.push_back(name);
}

fs::path OutputStage::staged(const std::string& name) {
  if (std::find(claimed_.begin(), claimed_.end(), name) == claimed_.end()) {
    throw std::logic_error("output " + name + " was not claimed");
  }
  if (stage_.empty()) {
    fs::create_directories(dir_);
    stage_ = dir_ / (".fuselab-stage-" + std::to_string(::getpid()));
    fs::remove_all(stage_);
    fs::create_directory(stage_);
  }
  return stage_ / name;
}

void OutputStage::write_svol(const std::string& name, const VolumeGrid& grid) {
  fuselab::write_svol(grid, staged(name));
}

void OutputStage::write_text(const std::string& name, const std::string& text) {
  const fs::path p = staged(name);
  std::ofstream f(p, std::ios::binary);
  f << text;
  f.close();
  if (!f) throw FormatError(FormatError::Reason::kIo, "cannot write " + p.string());
}

void OutputStage::commit() {
  for (const auto& name : claimed_) {
    const fs::path from = staged(name);
    if (!fs::exists(from)) throw std::logic_error("claimed output " + name + " was never written");
  }
  for (const auto& name : claimed_) fs::rename(stage_ / name, dir_ / name);
}

}  // namespace fuselab::cli
