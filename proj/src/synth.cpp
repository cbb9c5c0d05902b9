#include "fuselab/synth.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "fuselab/errors.hpp"
#include "fuselab/parallel.hpp"
#include "fuselab/philox.hpp"

namespace fuselab::synth {
namespace {

using VR = ValidationError::Reason;
using nlohmann::json;

constexpr std::uint32_t kTagFlair = 0x464C4149;    // "FLAI"
constexpr std::uint32_t kTagRater = 0x52415445;    // "RATE"
constexpr std::uint32_t kTagScatter = 0x53434154;  // "SCAT"

[[noreturn]] void bad_config(const std::string& msg) { throw ValidationError(VR::kBadConfig, msg); }

std::array<std::uint32_t, 2> split(std::uint64_t v) {
  return {static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v >> 32)};
}

std::int64_t extent(double radius) { return static_cast<std::int64_t>(std::floor(radius)); }

bool sphere_fits(const Lesion& l, const Dim3& dims) {
  const std::int64_t r = extent(l.radius);
  const std::array<std::size_t, 3> n{dims.nx, dims.ny, dims.nz};
  for (int a = 0; a < 3; ++a) {
    if (l.center[a] - r < 0 || l.center[a] + r >= static_cast<std::int64_t>(n[a])) return false;
  }
  return true;
}

/// Sets every voxel of the sphere to 1; returns how many were newly set.
std::size_t paint_sphere(const Lesion& l, const Dim3& dims, std::vector<double>& mask) {
  const std::int64_t r = extent(l.radius);
  const double r2 = l.radius * l.radius;
  std::size_t added = 0;
  for (std::int64_t dz = -r; dz <= r; ++dz) {
    for (std::int64_t dy = -r; dy <= r; ++dy) {
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        if (static_cast<double>(dx * dx + dy * dy + dz * dz) > r2) continue;
        const std::size_t t = linear_index(static_cast<std::size_t>(l.center[0] + dx),
                                           static_cast<std::size_t>(l.center[1] + dy),
                                           static_cast<std::size_t>(l.center[2] + dz), dims);
        if (mask[t] != 1.0) {
          mask[t] = 1.0;
          ++added;
        }
      }
    }
  }
  return added;
}

bool on_boundary(std::size_t t, const Dim3& dims, std::span<const double> truth) {
  const Coord3 c = coords_of(t, dims);
  const double v = truth[t];
  const auto differs = [&](std::size_t x, std::size_t y, std::size_t z) {
    return truth[linear_index(x, y, z, dims)] != v;
  };
  return (c.x > 0 && differs(c.x - 1, c.y, c.z)) || (c.x + 1 < dims.nx && differs(c.x + 1, c.y, c.z)) ||
         (c.y > 0 && differs(c.x, c.y - 1, c.z)) || (c.y + 1 < dims.ny && differs(c.x, c.y + 1, c.z)) ||
         (c.z > 0 && differs(c.x, c.y, c.z - 1)) || (c.z + 1 < dims.nz && differs(c.x, c.y, c.z + 1));
}

// Strict JSON readers: each names the full key path on failure.

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad_config(path.empty() ? "config must be an object" : path + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) bad_config((path.empty() ? "" : path + ".") + key + ": unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double get_number(const json& obj, const std::string& path, const char* key, std::optional<double> fallback) {
  const std::string where = join(path, key);
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    bad_config(where + ": required key missing");
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) bad_config(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad_config(where + ": must be finite");
  return d;
}

std::uint64_t get_uint(const json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    bad_config(where + ": expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::array<std::int64_t, 3> get_triple(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) bad_config(where + ": expected an array of 3 integers");
  std::array<std::int64_t, 3> out{};
  for (std::size_t a = 0; a < 3; ++a) {
    if (!v[a].is_number_integer()) bad_config(where + "[" + std::to_string(a) + "]: expected an integer");
    out[a] = v[a].get<std::int64_t>();
  }
  return out;
}

}  // namespace

void PhantomSpec::validate() const {
  (void)dims.count();
  if (!(lesion_intensity > background_intensity)) {
    bad_config("lesion_intensity must exceed background_intensity");
  }
  if (!(intensity_noise_sd >= 0.0) || !std::isfinite(intensity_noise_sd)) {
    bad_config("noise_sd must be a nonnegative finite number");
  }
  for (std::size_t k = 0; k < lesions.size(); ++k) {
    const auto& l = lesions[k];
    const std::string where = "lesions[" + std::to_string(k) + "]";
    if (!(l.radius >= 0.0) || !std::isfinite(l.radius)) bad_config(where + ".radius: must be >= 0");
    if (!sphere_fits(l, dims)) bad_config(where + ": sphere extends outside " + to_string(dims));
  }
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const std::size_t n = spec.dims.count();
  std::vector<double> truth(n, 0.0);
  for (const auto& l : spec.lesions) paint_sphere(l, spec.dims, truth);

  std::vector<double> flair(n);
  const auto key = Philox4x32::key_of(spec.seed);
  for (std::size_t t = 0; t < n; ++t) {
    double noise = 0.0;
    if (spec.intensity_noise_sd > 0.0) {
      const auto [lo, hi] = split(t);
      const auto r = Philox4x32::generate({lo, hi, 0, kTagFlair}, key);
      // Box-Muller on two open uniforms.
      const double u1 = open_uniform32(r[0]);
      const double u2 = open_uniform32(r[1]);
      noise = spec.intensity_noise_sd * std::sqrt(-2.0 * std::log(u1)) *
              std::cos(2.0 * std::numbers::pi * u2);
    }
    flair[t] = (truth[t] == 1.0 ? spec.lesion_intensity : spec.background_intensity) + noise;
  }
  return {VolumeGrid(spec.dims, VoxelKind::kBinaryLabel, std::move(truth)),
          VolumeGrid(spec.dims, VoxelKind::kIntensity, std::move(flair))};
}

void RaterPanel::validate() const {
  if (raters.empty()) bad_config("raters: at least one rater is required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < raters.size(); ++i) {
    const auto& r = raters[i];
    const std::string where = "raters[" + std::to_string(i) + "]";
    if (r.id.empty()) bad_config(where + ".id: must be nonempty");
    if (!ids.insert(r.id).second) bad_config(where + ".id: duplicate id '" + r.id + "'");
    if (!(r.sensitivity > 0.5 && r.sensitivity < 1.0)) bad_config(where + ".sensitivity: must lie in (0.5, 1)");
    if (!(r.specificity > 0.5 && r.specificity < 1.0)) bad_config(where + ".specificity: must lie in (0.5, 1)");
  }
  if (boundary_softening && !(*boundary_softening >= 0.0 && *boundary_softening <= 1.0)) {
    bad_config("boundary_softening: must lie in [0, 1]");
  }
}

ExpertStack simulate_raters(const VolumeGrid& truth, const RaterPanel& panel, std::size_t threads) {
  panel.validate();
  if (truth.kind() != VoxelKind::kBinaryLabel) {
    throw ValidationError(VR::kUnsupportedKind, "truth must be a binary grid");
  }
  truth.validate();
  const std::size_t n = truth.size();
  const auto key = Philox4x32::key_of(panel.seed);

  std::vector<std::uint8_t> shell;
  if (panel.boundary_softening) {
    shell.resize(n);
    for (std::size_t t = 0; t < n; ++t) shell[t] = on_boundary(t, truth.dims(), truth.values()) ? 1 : 0;
  }

  ExpertStack stack;
  for (std::size_t i = 0; i < panel.raters.size(); ++i) {
    const auto& r = panel.raters[i];
    std::vector<double> votes(n);
    parallel_ranges(n, threads, [&](std::size_t, Range range) {
      for (std::size_t t = range.begin; t < range.end; ++t) {
        const auto [lo, hi] = split(t);
        const auto w = Philox4x32::generate({lo, hi, static_cast<std::uint32_t>(i), kTagRater}, key);
        const double u = uniform53(w[0], w[1]);
        const bool lesion = truth[t] == 1.0;
        bool flip;
        if (panel.boundary_softening) {
          flip = shell[t] && u < *panel.boundary_softening;
        } else {
          flip = lesion ? u >= r.sensitivity : u >= r.specificity;
        }
        votes[t] = (lesion != flip) ? 1.0 : 0.0;
      }
    });
    stack.experts.emplace_back(truth.dims(), VoxelKind::kBinaryLabel, std::move(votes));
    stack.expert_ids.push_back(r.id);
  }
  return stack;
}

ExpertStack soften_votes(const ExpertStack& stack, double blur) {
  validate_stack(stack);
  if (stack.kind() != VoxelKind::kBinaryLabel) {
    throw ValidationError(VR::kUnsupportedKind, "soften_votes expects binary votes");
  }
  if (!(blur >= 0.0 && blur < 0.5)) bad_config("blur must lie in [0, 0.5)");
  ExpertStack out;
  out.expert_ids = stack.expert_ids;
  for (const auto& g : stack.experts) {
    std::vector<double> q(g.size());
    for (std::size_t t = 0; t < g.size(); ++t) q[t] = g[t] == 1.0 ? 1.0 - blur : blur;
    out.experts.emplace_back(g.dims(), VoxelKind::kSoftLabel, std::move(q));
  }
  return out;
}

RaterParams panel_params(const RaterPanel& panel) {
  RaterParams p;
  for (const auto& r : panel.raters) p.raters.push_back({r.sensitivity, r.specificity});
  return p;
}

std::vector<Lesion> scatter_lesions(const Dim3& dims, double target_prevalence, double min_radius,
                                    double max_radius, std::uint64_t seed) {
  if (!(target_prevalence >= 0.0 && target_prevalence < 1.0)) bad_config("prevalence must lie in [0, 1)");
  if (!(min_radius >= 0.0 && max_radius >= min_radius) || !std::isfinite(max_radius)) {
    bad_config("radii must satisfy 0 <= min_radius <= max_radius");
  }
  const std::size_t n = dims.count();
  const std::int64_t reach = extent(max_radius);
  for (std::size_t a : {dims.nx, dims.ny, dims.nz}) {
    if (static_cast<std::int64_t>(a) <= 2 * reach) bad_config("max_radius does not fit in " + to_string(dims));
  }
  const auto target = static_cast<std::size_t>(std::ceil(target_prevalence * static_cast<double>(n)));
  const auto key = Philox4x32::key_of(seed);
  std::vector<double> mask(n, 0.0);
  std::vector<Lesion> lesions;
  std::size_t covered = 0;
  constexpr std::uint32_t kMaxAttempts = 1u << 20;
  for (std::uint32_t k = 0; covered < target; ++k) {
    if (k == kMaxAttempts) throw Error("scatter_lesions could not reach the target prevalence");
    const auto w = Philox4x32::generate({k, 0, 0, kTagScatter}, key);
    const auto v = Philox4x32::generate({k, 1, 0, kTagScatter}, key);
    Lesion l;
    l.radius = min_radius + (max_radius - min_radius) * uniform53(w[0], w[1]);
    const std::int64_t r = extent(l.radius);
    const std::array<std::size_t, 3> size{dims.nx, dims.ny, dims.nz};
    const std::array<std::uint32_t, 3> draw{w[2], w[3], v[0]};
    for (int a = 0; a < 3; ++a) {
      const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(size[a]) - 2 * r);
      l.center[a] = r + static_cast<std::int64_t>(draw[a] % span);
    }
    const std::size_t added = paint_sphere(l, dims, mask);
    if (added == 0) continue;
    covered += added;
    lesions.push_back(l);
  }
  return lesions;
}

SimulationConfig parse_simulation_config(const json& j) {
  check_keys(j, "", {"dims", "seed", "phantom", "raters", "boundary_softening"});
  SimulationConfig cfg;
  if (!j.contains("dims")) bad_config("dims: required key missing");
  const auto d = get_triple(j.at("dims"), "dims");
  for (auto v : d) {
    if (v <= 0) bad_config("dims: entries must be positive");
  }
  const Dim3 dims{static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
  const std::uint64_t seed = j.contains("seed") ? get_uint(j.at("seed"), "seed") : 0;

  auto& ph = cfg.phantom;
  ph.dims = dims;
  ph.seed = seed;
  if (j.contains("phantom")) {
    const auto& p = j.at("phantom");
    check_keys(p, "phantom", {"background_intensity", "lesion_intensity", "noise_sd", "lesions", "scatter"});
    ph.background_intensity = get_number(p, "phantom", "background_intensity", ph.background_intensity);
    ph.lesion_intensity = get_number(p, "phantom", "lesion_intensity", ph.lesion_intensity);
    ph.intensity_noise_sd = get_number(p, "phantom", "noise_sd", ph.intensity_noise_sd);
    if (p.contains("lesions")) {
      const auto& arr = p.at("lesions");
      if (!arr.is_array()) bad_config("phantom.lesions: expected an array");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string where = "phantom.lesions[" + std::to_string(k) + "]";
        check_keys(arr[k], where, {"center", "radius"});
        if (!arr[k].contains("center")) bad_config(where + ".center: required key missing");
        Lesion l;
        l.center = get_triple(arr[k].at("center"), where + ".center");
        l.radius = get_number(arr[k], where, "radius", std::nullopt);
        if (l.radius < 0.0) bad_config(where + ".radius: must be >= 0");
        if (!sphere_fits(l, dims)) bad_config(where + ": sphere extends outside " + to_string(dims));
        ph.lesions.push_back(l);
      }
    }
    if (p.contains("scatter")) {
      const auto& s = p.at("scatter");
      check_keys(s, "phantom.scatter", {"prevalence", "min_radius", "max_radius"});
      const double prev = get_number(s, "phantom.scatter", "prevalence", std::nullopt);
      const double rmin = get_number(s, "phantom.scatter", "min_radius", 2.0);
      const double rmax = get_number(s, "phantom.scatter", "max_radius", 4.0);
      auto extra = scatter_lesions(dims, prev, rmin, rmax, seed);
      ph.lesions.insert(ph.lesions.end(), extra.begin(), extra.end());
    }
  }
  ph.validate();

  if (!j.contains("raters")) bad_config("raters: required key missing");
  const auto& rs = j.at("raters");
  if (!rs.is_array()) bad_config("raters: expected an array");
  const auto ids = default_ids(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const std::string where = "raters[" + std::to_string(i) + "]";
    check_keys(rs[i], where, {"id", "sensitivity", "specificity"});
    RaterSpec r;
    r.id = ids[i];
    if (rs[i].contains("id")) {
      if (!rs[i].at("id").is_string()) bad_config(where + ".id: expected a string");
      r.id = rs[i].at("id").get<std::string>();
    }
    r.sensitivity = get_number(rs[i], where, "sensitivity", std::nullopt);
    r.specificity = get_number(rs[i], where, "specificity", std::nullopt);
    cfg.panel.raters.push_back(r);
  }
  if (j.contains("boundary_softening")) {
    cfg.panel.boundary_softening = get_number(j, "", "boundary_softening", std::nullopt);
  }
  cfg.panel.seed = seed;
  cfg.panel.validate();
  return cfg;
}

json to_json(const SimulationConfig& cfg) {
  const auto& ph = cfg.phantom;
  json lesions = json::array();
  for (const auto& l : ph.lesions) lesions.push_back({{"center", l.center}, {"radius", l.radius}});
  json raters = json::array();
  for (const auto& r : cfg.panel.raters) {
    raters.push_back({{"id", r.id}, {"sensitivity", r.sensitivity}, {"specificity", r.specificity}});
  }
  json j = {
      {"dims", {ph.dims.nx, ph.dims.ny, ph.dims.nz}},
      {"seed", ph.seed},
      {"phantom",
       {{"background_intensity", ph.background_intensity},
        {"lesion_intensity", ph.lesion_intensity},
        {"noise_sd", ph.intensity_noise_sd},
        {"lesions", lesions}}},
      {"raters", raters},
  };
  if (cfg.panel.boundary_softening) j["boundary_softening"] = *cfg.panel.boundary_softening;
  return j;
}

}  // namespace fuselab::synth
