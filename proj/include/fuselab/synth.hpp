#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fuselab/fusion.hpp"
#include "fuselab/volume.hpp"
#include "json.hpp"

namespace fuselab::synth {

struct Lesion {
  std::array<std::int64_t, 3> center{};
  double radius = 0.0;  ///< voxels; a voxel is inside when its squared distance <= radius^2
};

struct PhantomSpec {
  Dim3 dims{16, 16, 16};
  std::vector<Lesion> lesions;
  double background_intensity = 100.0;
  double lesion_intensity = 200.0;
  double intensity_noise_sd = 10.0;
  std::uint64_t seed = 0;

  /// Throws ValidationError(kBadConfig) for an out-of-bounds sphere or a
  /// lesion that is not brighter than the background.
  void validate() const;
};

struct Phantom {
  VolumeGrid truth;  ///< binary
  VolumeGrid flair;  ///< intensity
};

Phantom generate_phantom(const PhantomSpec& spec);

struct RaterSpec {
  std::string id;
  double sensitivity = 0.9;
  double specificity = 0.9;
};

/// Without boundary_softening, each vote flips independently with the
/// rater's error rates. With it, only voxels on the truth boundary shell
/// (a 6-neighbour carries the other label) may flip, each with that
/// probability, and the rater's sens/spec are ignored.
struct RaterPanel {
  std::vector<RaterSpec> raters;
  std::optional<double> boundary_softening;
  std::uint64_t seed = 0;

  void validate() const;
};

ExpertStack simulate_raters(const VolumeGrid& truth, const RaterPanel& panel, std::size_t threads = 1);

/// q = (1 - blur)·y + blur·(1 - y), blur in [0, 0.5).
ExpertStack soften_votes(const ExpertStack& stack, double blur);

/// Generating parameters of a panel, in panel order.
RaterParams panel_params(const RaterPanel& panel);

/// Random spheres with radius in [min_radius, max_radius], kept inside the
/// grid, added until the union covers at least target_prevalence of it.
std::vector<Lesion> scatter_lesions(const Dim3& dims, double target_prevalence, double min_radius,
                                    double max_radius, std::uint64_t seed);

/// Fully resolved simulation recipe.
struct SimulationConfig {
  PhantomSpec phantom;
  RaterPanel panel;
};

/// Parses the simulate config. Errors are ValidationError(kBadConfig) and
/// name the offending key. Scatter settings are expanded into explicit
/// lesions so the resolved config fully determines the outputs.
SimulationConfig parse_simulation_config(const nlohmann::json& j);
nlohmann::json to_json(const SimulationConfig& cfg);

}  // namespace fuselab::synth
