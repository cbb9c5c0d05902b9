#include <cmath>

#include "doctest.h"
#include "fuselab/synth.hpp"

using namespace fuselab;
using namespace fuselab::synth;
using nlohmann::json;

namespace {

std::size_t ones(const VolumeGrid& g) {
  std::size_t c = 0;
  for (double v : g.values()) c += v == 1.0;
  return c;
}

PhantomSpec sphere(Dim3 dims, std::int64_t c, double r) {
  PhantomSpec s;
  s.dims = dims;
  s.lesions = {{{c, c, c}, r}};
  return s;
}

RaterPanel panel_of(std::initializer_list<RaterSpec> raters, std::uint64_t seed) {
  RaterPanel p;
  p.raters = raters;
  p.seed = seed;
  return p;
}

std::string error_of(const json& j) {
  try {
    parse_simulation_config(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("phantom voxelization") {
  PhantomSpec empty;
  CHECK(ones(generate_phantom(empty).truth) == 0);
  CHECK(ones(generate_phantom(sphere({16, 16, 16}, 8, 0)).truth) == 1);
  CHECK(ones(generate_phantom(sphere({16, 16, 16}, 8, 3)).truth) == 123);
  CHECK(ones(generate_phantom(sphere({16, 16, 16}, 8, 1)).truth) == 7);
}

TEST_CASE("phantom validation") {
  CHECK_THROWS_AS(generate_phantom(sphere({16, 16, 16}, 1, 3)).truth, ValidationError);
  auto s = sphere({16, 16, 16}, 8, 2);
  s.lesion_intensity = s.background_intensity;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = sphere({16, 16, 16}, 8, 2);
  s.intensity_noise_sd = -1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("phantom is deterministic and FLAIR is brighter on lesions") {
  auto s = sphere({24, 24, 24}, 12, 5);
  s.seed = 99;
  const auto a = generate_phantom(s), b = generate_phantom(s);
  CHECK(a.truth == b.truth);
  CHECK(a.flair == b.flair);
  s.seed = 100;
  CHECK_FALSE(generate_phantom(s).flair == a.flair);

  double in = 0, out = 0;
  std::size_t n_in = 0;
  for (std::size_t t = 0; t < a.truth.size(); ++t) {
    if (a.truth[t] == 1.0) {
      in += a.flair[t];
      ++n_in;
    } else {
      out += a.flair[t];
    }
  }
  CHECK(in / n_in > out / (a.truth.size() - n_in));
}

TEST_CASE("near-perfect raters reproduce the truth") {
  auto s = sphere({32, 32, 32}, 16, 8);
  const auto truth = generate_phantom(s).truth;
  const auto stack = simulate_raters(truth, panel_of({{"a", 0.999999, 0.999999}}, 1));
  std::size_t hamming = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) hamming += stack.experts[0][t] != truth[t];
  CHECK(hamming <= 5);
}

TEST_CASE("flip rates match the configured sensitivity and specificity") {
  const Dim3 d{100, 100, 100};
  std::vector<double> v(d.count(), 0.0);
  for (std::size_t t = 0; t < v.size() / 2; ++t) v[t] = 1.0;
  const VolumeGrid truth(d, VoxelKind::kBinaryLabel, std::move(v));
  const auto stack = simulate_raters(truth, panel_of({{"a", 0.8, 0.9}, {"b", 0.65, 0.97}}, 7));
  const double sens[] = {0.8, 0.65}, spec[] = {0.9, 0.97};
  for (std::size_t i = 0; i < 2; ++i) {
    double tp = 0, tn = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double y = stack.experts[i][t];
      if (truth[t] == 1.0) tp += y;
      else tn += 1.0 - y;
    }
    CHECK(std::abs(tp / (truth.size() / 2) - sens[i]) < 0.01);
    CHECK(std::abs(tn / (truth.size() / 2) - spec[i]) < 0.01);
  }
}

TEST_CASE("rater simulation is deterministic and thread independent") {
  const auto truth = generate_phantom(sphere({20, 20, 20}, 10, 6)).truth;
  const auto panel = panel_of({{"a", 0.8, 0.9}, {"b", 0.7, 0.95}, {"c", 0.9, 0.6}}, 11);
  const auto one = simulate_raters(truth, panel);
  CHECK(one.expert_ids == std::vector<std::string>{"a", "b", "c"});
  for (std::size_t th : {1, 3}) {
    const auto again = simulate_raters(truth, panel, th);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again.experts[i] == one.experts[i]);
  }
  CHECK_FALSE(simulate_raters(truth, panel_of({{"a", 0.8, 0.9}}, 12)).experts[0] == one.experts[0]);
}

TEST_CASE("boundary mode flips only shell voxels") {
  const auto truth = generate_phantom(sphere({20, 20, 20}, 10, 6)).truth;
  auto panel = panel_of({{"a", 0.8, 0.9}}, 3);
  panel.boundary_softening = 0.5;
  const auto stack = simulate_raters(truth, panel);
  const Dim3 d = truth.dims();
  std::size_t flips = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (stack.experts[0][t] == truth[t]) continue;
    ++flips;
    const auto c = coords_of(t, d);
    bool shell = false;
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& o : off) {
      const auto x = static_cast<std::int64_t>(c.x) + o[0], y = static_cast<std::int64_t>(c.y) + o[1],
                 z = static_cast<std::int64_t>(c.z) + o[2];
      if (x < 0 || y < 0 || z < 0 || x >= 20 || y >= 20 || z >= 20) continue;
      shell |= truth[linear_index(x, y, z, d)] != truth[t];
    }
    CHECK(shell);
  }
  CHECK(flips > 0);
}

TEST_CASE("rater panel validation") {
  CHECK_THROWS_AS(panel_of({{"a", 0.5, 0.9}}, 0).validate(), ValidationError);
  CHECK_THROWS_AS(panel_of({{"a", 0.8, 1.0}}, 0).validate(), ValidationError);
  CHECK_THROWS_AS(panel_of({{"a", 0.8, 0.9}, {"a", 0.8, 0.9}}, 0).validate(), ValidationError);
  auto p = panel_of({{"a", 0.8, 0.9}}, 0);
  p.boundary_softening = 1.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  const auto params = panel_params(panel_of({{"a", 0.8, 0.9}, {"b", 0.7, 0.6}}, 0));
  CHECK(params[1].sensitivity == 0.7);
  CHECK(params[1].specificity == 0.6);
}

TEST_CASE("soften_votes") {
  ExpertStack s;
  s.experts = {VolumeGrid({3, 1, 1}, VoxelKind::kBinaryLabel, {1, 0, 1})};
  s.expert_ids = {"a"};
  const auto same = soften_votes(s, 0.0);
  CHECK(same.experts[0].kind() == VoxelKind::kSoftLabel);
  CHECK(std::equal(same.experts[0].values().begin(), same.experts[0].values().end(),
                   s.experts[0].values().begin()));
  const auto blurred = soften_votes(s, 0.2);
  CHECK(blurred.experts[0][0] == 0.8);
  CHECK(blurred.experts[0][1] == 0.2);
  CHECK(blurred.expert_ids == s.expert_ids);
  CHECK_THROWS_AS(soften_votes(s, 0.5), ValidationError);
  CHECK_THROWS_AS(soften_votes(s, -0.1), ValidationError);
}

TEST_CASE("scatter_lesions reaches the prevalence and stays in bounds") {
  const Dim3 d{32, 32, 32};
  const auto lesions = scatter_lesions(d, 0.02, 2, 4, 5);
  PhantomSpec s;
  s.dims = d;
  s.lesions = lesions;
  const auto truth = generate_phantom(s).truth;
  const double prev = static_cast<double>(ones(truth)) / d.count();
  CHECK(prev >= 0.02);
  CHECK(prev < 0.04);
  CHECK(scatter_lesions(d, 0.02, 2, 4, 5).size() == lesions.size());
}

TEST_CASE("simulation config parsing") {
  const json j = {{"dims", {16, 16, 16}},
                  {"seed", 4},
                  {"phantom", {{"lesions", {{{"center", {8, 8, 8}}, {"radius", 3}}}}}},
                  {"raters", {{{"sensitivity", 0.8}, {"specificity", 0.9}}, {{"id", "x"}, {"sensitivity", 0.7}, {"specificity", 0.95}}}}};
  const auto cfg = parse_simulation_config(j);
  CHECK(cfg.phantom.dims == Dim3{16, 16, 16});
  CHECK(cfg.phantom.lesions.size() == 1);
  CHECK(cfg.panel.raters[0].id == "e1");
  CHECK(cfg.panel.raters[1].id == "x");
  CHECK(parse_simulation_config(to_json(cfg)).panel.raters.size() == 2);

  auto missing = j;
  missing.erase("dims");
  CHECK(error_of(missing).find("dims") != std::string::npos);
  auto extra = j;
  extra["bogus"] = 1;
  CHECK(error_of(extra).find("bogus") != std::string::npos);
  auto outside = j;
  outside["phantom"]["lesions"][0]["center"] = {1, 1, 1};
  CHECK(error_of(outside).find("phantom.lesions[0]") != std::string::npos);
  auto weak = j;
  weak["raters"][0]["sensitivity"] = 0.4;
  CHECK(error_of(weak).find("raters[0]") != std::string::npos);
}
