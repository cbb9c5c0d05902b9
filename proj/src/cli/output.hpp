#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuselab/volume.hpp"

namespace fuselab::cli {

/// Bad invocation detected after parsing (exit 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collects a command's outputs in a hidden staging directory and moves them
/// into place only on commit(), so a failed run leaves the output directory
/// untouched. Every name must be claimed before any work starts.
class OutputStage {
 public:
  OutputStage(std::filesystem::path dir, bool force, std::vector<std::filesystem::path> inputs);
  ~OutputStage();

  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  /// Throws UsageError if the target exists without --force or would
  /// replace one of the inputs.
  void claim(const std::string& name);

  void write_svol(const std::string& name, const VolumeGrid& grid);
  void write_text(const std::string& name, const std::string& text);

  void commit();

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return claimed_; }

 private:
  std::filesystem::path staged(const std::string& name);

  std::filesystem::path dir_;
  std::filesystem::path stage_;
  bool force_;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::string> claimed_;
};

}  // namespace fuselab::cli
