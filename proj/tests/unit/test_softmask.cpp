#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "fuselab/softmask.hpp"
#include "fuselab/synth.hpp"

using namespace fuselab;

namespace {

const Dim3 kDims{9, 9, 9};

VolumeGrid flat_flair(Dim3 d, double level = 100.0) {
  return VolumeGrid::filled(d, VoxelKind::kIntensity, level);
}

std::size_t count_value(const VolumeGrid& g, double v) {
  std::size_t c = 0;
  for (double x : g.values()) c += x == v;
  return c;
}

VolumeGrid voxels(Dim3 d, std::initializer_list<std::array<std::size_t, 3>> at) {
  auto g = VolumeGrid::filled(d, VoxelKind::kBinaryLabel, 0.0);
  for (const auto& p : at) g[linear_index(p[0], p[1], p[2], d)] = 1.0;
  return g;
}

bool is_ring_of_cube(std::size_t t) {
  const auto c = coords_of(t, kDims);
  const auto in = [](std::size_t v, std::size_t lo, std::size_t hi) { return v >= lo && v <= hi; };
  const bool shell = in(c.x, 2, 6) && in(c.y, 2, 6) && in(c.z, 2, 6);
  const bool core = in(c.x, 3, 5) && in(c.y, 3, 5) && in(c.z, 3, 5);
  return shell && !core;
}

}  // namespace

TEST_CASE("structuring elements") {
  CHECK(StructuringElement::from_connectivity(6).offsets.size() == 6);
  CHECK(StructuringElement::from_connectivity(18).offsets.size() == 18);
  CHECK(StructuringElement::from_connectivity(26).offsets.size() == 26);
  CHECK_THROWS_AS(StructuringElement::from_connectivity(8), ValidationError);
  for (int c : {6, 18, 26}) {
    const auto se = StructuringElement::from_connectivity(c);
    std::set<std::array<int, 3>> all(se.offsets.begin(), se.offsets.end());
    for (const auto& o : se.offsets) CHECK(all.count({-o[0], -o[1], -o[2]}) == 1);
    CHECK(all.count({1, 0, 0}) == 1);
    CHECK(all.count({0, 0, -1}) == 1);
  }
}

TEST_CASE("connected_components") {
  const Dim3 d{6, 6, 6};
  CHECK(connected_components(voxels(d, {{0, 0, 0}, {5, 5, 5}}), 26).components.size() == 2);

  const auto cube = connected_components(fixture::cube_mask(kDims, 3, 3), 26);
  REQUIRE(cube.components.size() == 1);
  CHECK(cube.components[0].size() == 27);

  const auto diag = voxels(d, {{1, 1, 1}, {2, 2, 2}});
  CHECK(connected_components(diag, 26).components.size() == 1);
  CHECK(connected_components(diag, 6).components.size() == 2);
  const auto edge = voxels(d, {{1, 1, 1}, {2, 2, 1}});
  CHECK(connected_components(edge, 18).components.size() == 1);
  CHECK(connected_components(edge, 6).components.size() == 2);
}

TEST_CASE("connected_components labels every foreground voxel once") {
  std::mt19937_64 rng(3);
  const Dim3 d{7, 6, 5};
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = fixture::random_grid(d, VoxelKind::kBinaryLabel, rng);
    for (int conn : {6, 18, 26}) {
      const auto cc = connected_components(g, conn);
      std::size_t total = 0;
      for (std::size_t c = 0; c < cc.components.size(); ++c) {
        total += cc.components[c].size();
        for (std::size_t t : cc.components[c]) CHECK(cc.labels[t] == static_cast<std::int32_t>(c + 1));
      }
      CHECK(total == count_value(g, 1.0));
      for (std::size_t t = 0; t < g.size(); ++t) CHECK((cc.labels[t] == 0) == (g[t] == 0.0));
    }
  }
}

TEST_CASE("dilate") {
  const auto cube = fixture::cube_mask(kDims, 3, 3);
  CHECK(dilate(cube, StructuringElement::from_connectivity(26), 0) == cube);

  const auto cross = dilate(voxels(kDims, {{4, 4, 4}}), StructuringElement::from_connectivity(6), 1);
  CHECK(count_value(cross, 1.0) == 7);
  CHECK(count_value(dilate(cube, StructuringElement::from_connectivity(26), 1), 1.0) == 125);

  // Clipped at the corner: only the in-bounds octant survives.
  const auto corner = dilate(voxels(kDims, {{0, 0, 0}}), StructuringElement::from_connectivity(26), 1);
  CHECK(count_value(corner, 1.0) == 8);

  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = fixture::random_grid({5, 5, 5}, VoxelKind::kBinaryLabel, rng);
    const auto d = dilate(g, StructuringElement::from_connectivity(6), 2);
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (g[t] == 1.0) CHECK(d[t] == 1.0);
    }
  }
  CHECK_THROWS_AS(dilate(cube, StructuringElement::from_connectivity(6), -1), ValidationError);
}

TEST_CASE("nearest_rank_percentile") {
  const std::vector<double> v{5, 1, 4, 2, 3};
  CHECK(nearest_rank_percentile(v, 0) == 1);
  CHECK(nearest_rank_percentile(v, 10) == 1);
  CHECK(nearest_rank_percentile(v, 20) == 1);
  CHECK(nearest_rank_percentile(v, 21) == 2);
  CHECK(nearest_rank_percentile(v, 50) == 3);
  CHECK(nearest_rank_percentile(v, 100) == 5);
  CHECK_THROWS(nearest_rank_percentile({}, 10));
}

TEST_CASE("cube fixture with defaults: 27 at 1, 98 at gamma") {
  const auto cube = fixture::cube_mask(kDims, 3, 3);
  const auto rep = build_soft_mask_report(cube, flat_flair(kDims), SoftMaskConfig{});
  CHECK(count_value(rep.mask, 1.0) == 27);
  CHECK(count_value(rep.mask, 0.3) == 98);
  CHECK(count_value(rep.mask, 0.0) == kDims.count() - 125);
  REQUIRE(rep.components.size() == 1);
  CHECK(rep.components[0].dilation_iters == 1);
  CHECK(rep.components[0].dilated_voxels == 125);
  CHECK(rep.components[0].ring_included == 98);
  CHECK(rep.mask.kind() == VoxelKind::kSoftLabel);
}

TEST_CASE("ring voxels under the threshold are excluded") {
  const auto cube = fixture::cube_mask(kDims, 3, 3);
  auto flair = flat_flair(kDims);
  std::vector<std::size_t> dipped;
  for (std::size_t t = 0; t < kDims.count() && dipped.size() < 10; t += 7) {
    if (is_ring_of_cube(t)) dipped.push_back(t);
  }
  REQUIRE(dipped.size() == 10);
  for (std::size_t t : dipped) flair[t] = 40.0;
  const auto out = build_soft_mask(cube, flair, SoftMaskConfig{});
  CHECK(count_value(out, 1.0) == 27);
  CHECK(count_value(out, 0.3) == 88);
  for (std::size_t t : dipped) CHECK(out[t] == 0.0);
}

TEST_CASE("fixed threshold mode") {
  const auto cube = fixture::cube_mask(kDims, 3, 3);
  SoftMaskConfig cfg;
  cfg.threshold = ThresholdMode::fixed(150.0);
  const auto rep = build_soft_mask_report(cube, flat_flair(kDims), cfg);
  CHECK(count_value(rep.mask, 0.3) == 0);
  CHECK(count_value(rep.mask, 1.0) == 27);
  CHECK(rep.components[0].threshold == 150.0);
  CHECK(rep.components[0].ring_excluded == 98);
}

TEST_CASE("ratio 1 leaves the annotation unchanged") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = fixture::random_grid({6, 6, 6}, VoxelKind::kBinaryLabel, rng);
    SoftMaskConfig cfg;
    cfg.target_volume_ratio = 1.0;
    const auto r = build_soft_mask_report(g, fixture::random_grid({6, 6, 6}, VoxelKind::kIntensity, rng), cfg);
    CHECK(std::equal(r.mask.values().begin(), r.mask.values().end(), g.values().begin()));
    for (const auto& c : r.components) CHECK(c.dilation_iters == 0);
  }
}

TEST_CASE("soft mask invariants on random lesions") {
  std::mt19937_64 rng(12);
  const Dim3 d{16, 16, 16};
  for (int rep = 0; rep < 8; ++rep) {
    const auto lesions = synth::scatter_lesions(d, 0.05, 1, 3, rep);
    synth::PhantomSpec ph;
    ph.dims = d;
    ph.lesions = lesions;
    ph.seed = rep;
    const auto phantom = synth::generate_phantom(ph);
    // A rater that misses lesion voxels, so bright voxels end up in the rings.
    synth::RaterPanel panel;
    panel.raters = {{"r", 0.7, 0.99}};
    panel.seed = rep;
    const auto annotation = synth::simulate_raters(phantom.truth, panel).experts[0];
    SoftMaskConfig cfg;
    cfg.connectivity = rep % 2 ? 6 : 26;
    const auto r = build_soft_mask_report(annotation, phantom.flair, cfg);

    int max_iters = 0;
    for (const auto& c : r.components) max_iters = std::max(max_iters, c.dilation_iters);
    const auto bound = dilate(annotation, StructuringElement::from_connectivity(cfg.connectivity), max_iters);
    const auto cc = connected_components(annotation, cfg.connectivity);
    for (std::size_t t = 0; t < d.count(); ++t) {
      const double v = r.mask[t];
      CHECK((v == 0.0 || v == cfg.gamma || v == 1.0));
      CHECK((v == 1.0) == (annotation[t] == 1.0));
      if (v > 0.0) CHECK(bound[t] == 1.0);
    }
    std::size_t gamma_voxels = 0;
    // Every gamma voxel clears the threshold of at least one component that reaches it.
    for (std::size_t t = 0; t < d.count(); ++t) {
      if (r.mask[t] != cfg.gamma) continue;
      ++gamma_voxels;
      double lowest = INFINITY;
      for (const auto& c : r.components) lowest = std::min(lowest, c.threshold);
      CHECK(phantom.flair[t] >= lowest);
    }
    CHECK(r.components.size() == cc.components.size());
    CHECK(gamma_voxels > 0);
  }
}

TEST_CASE("gamma changes only ring voxels, monotonically") {
  const Dim3 d{16, 16, 16};
  synth::PhantomSpec ph;
  ph.dims = d;
  ph.lesions = synth::scatter_lesions(d, 0.04, 1, 3, 21);
  ph.seed = 21;
  const auto phantom = synth::generate_phantom(ph);
  // The phantom has no partial-volume halo, so a percentile threshold would
  // exclude the whole ring; a low fixed level keeps it.
  SoftMaskConfig lo, hi;
  lo.gamma = 0.2;
  hi.gamma = 0.6;
  lo.threshold = hi.threshold = ThresholdMode::fixed(0.0);
  const auto a = build_soft_mask(phantom.truth, phantom.flair, lo);
  const auto b = build_soft_mask(phantom.truth, phantom.flair, hi);
  std::size_t ring = 0;
  for (std::size_t t = 0; t < d.count(); ++t) {
    if (a[t] == b[t]) continue;
    ++ring;
    CHECK(a[t] == 0.2);
    CHECK(b[t] == 0.6);
  }
  CHECK(ring > 0);
}

TEST_CASE("original annotation beats a neighbour's ring") {
  // Two lesions one voxel apart: each one's ring covers the other, which stays 1.
  const Dim3 d{9, 5, 5};
  const auto g = voxels(d, {{3, 2, 2}, {5, 2, 2}});
  const auto out = build_soft_mask(g, flat_flair(d), SoftMaskConfig{});
  CHECK(out[linear_index(3, 2, 2, d)] == 1.0);
  CHECK(out[linear_index(5, 2, 2, d)] == 1.0);
  CHECK(out[linear_index(4, 2, 2, d)] == 0.3);
  CHECK(count_value(out, 1.0) == 2);
}

TEST_CASE("config validation and argument errors") {
  const auto bad = [](auto mutate) {
    SoftMaskConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ValidationError);
  };
  bad([](SoftMaskConfig& c) { c.gamma = 0.0; });
  bad([](SoftMaskConfig& c) { c.gamma = 1.0; });
  bad([](SoftMaskConfig& c) { c.target_volume_ratio = 0.9; });
  bad([](SoftMaskConfig& c) { c.threshold = ThresholdMode::percentile(101); });
  bad([](SoftMaskConfig& c) { c.connectivity = 4; });
  bad([](SoftMaskConfig& c) { c.max_dilation_iters = 0; });
  CHECK_NOTHROW(SoftMaskConfig{}.validate());

  const auto cube = fixture::cube_mask(kDims, 3, 3);
  CHECK_THROWS_AS(build_soft_mask(cube, flat_flair({9, 9, 8}), SoftMaskConfig{}), ValidationError);
  CHECK_THROWS_AS(build_soft_mask(cube, cube, SoftMaskConfig{}), ValidationError);
}

TEST_CASE("empty annotations give empty soft masks") {
  const auto empty = VolumeGrid::filled(kDims, VoxelKind::kBinaryLabel, 0.0);
  const auto out = build_soft_mask(empty, flat_flair(kDims), SoftMaskConfig{});
  CHECK(count_value(out, 0.0) == kDims.count());
}

TEST_CASE("build_soft_stack") {
  synth::PhantomSpec ph;
  ph.dims = {16, 16, 16};
  ph.lesions = synth::scatter_lesions(ph.dims, 0.05, 1, 3, 5);
  ph.seed = 5;
  const auto phantom = synth::generate_phantom(ph);
  synth::RaterPanel panel;
  panel.seed = 6;
  for (int i = 0; i < 7; ++i) panel.raters.push_back({"r" + std::to_string(i), 0.8, 0.95});
  const auto stack = synth::simulate_raters(phantom.truth, panel);
  const SoftMaskConfig cfg;
  const auto soft = build_soft_stack(stack, phantom.flair, cfg);
  REQUIRE(soft.size() == 7);
  CHECK(soft.expert_ids == stack.expert_ids);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(soft.experts[i] == build_soft_mask(stack.experts[i], phantom.flair, cfg));
    for (double v : soft.experts[i].values()) CHECK((v == 0.0 || v == 0.3 || v == 1.0));
  }

  ExpertStack one;
  one.experts = {stack.experts[0]};
  one.expert_ids = {"solo"};
  const auto single = build_soft_stack(one, phantom.flair, cfg);
  CHECK(single.experts[0] == build_soft_mask(stack.experts[0], phantom.flair, cfg));
  CHECK(single.expert_ids == one.expert_ids);

  ExpertStack blank;
  blank.experts = {VolumeGrid::filled(ph.dims, VoxelKind::kBinaryLabel, 0.0),
                   VolumeGrid::filled(ph.dims, VoxelKind::kBinaryLabel, 0.0)};
  blank.expert_ids = {"a", "b"};
  for (const auto& g : build_soft_stack(blank, phantom.flair, cfg).experts) CHECK(count_value(g, 0.0) == g.size());
}
