#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fuselab/fusion.hpp"
#include "fuselab/volume.hpp"
#include "oracles.hpp"

namespace fixture {

using fuselab::Dim3;
using fuselab::ExpertStack;
using fuselab::RaterParams;
using fuselab::VolumeGrid;
using fuselab::VoxelKind;

inline VolumeGrid random_grid(Dim3 dims, VoxelKind kind, std::mt19937_64& rng) {
  std::vector<double> v(dims.count());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(100.0, 30.0);
  for (auto& x : v) {
    switch (kind) {
      case VoxelKind::kBinaryLabel:
        x = u(rng) < 0.5 ? 1.0 : 0.0;
        break;
      case VoxelKind::kIntensity:
        x = n(rng);
        break;
      default:
        x = u(rng);
    }
  }
  return VolumeGrid(dims, kind, std::move(v));
}

/// Stack from a voxel-major vote table (votes[t][i]) laid out along x.
inline ExpertStack stack_from_votes(const oracle::VoteTable& votes, VoxelKind kind) {
  const std::size_t n = votes.size();
  const std::size_t m = votes.front().size();
  ExpertStack s;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> g(n);
    for (std::size_t t = 0; t < n; ++t) g[t] = votes[t][i];
    s.experts.emplace_back(Dim3{n, 1, 1}, kind, std::move(g));
  }
  s.expert_ids = fuselab::default_ids(m);
  return s;
}

inline oracle::VoteTable random_votes(std::size_t n, std::size_t m, bool hard, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  oracle::VoteTable v(n, std::vector<double>(m));
  for (auto& row : v) {
    for (auto& x : row) x = hard ? (u(rng) < 0.5 ? 1.0 : 0.0) : u(rng);
  }
  return v;
}

inline oracle::Theta random_theta(std::size_t m, std::mt19937_64& rng, double lo = 0.05, double hi = 0.95) {
  std::uniform_real_distribution<double> u(lo, hi);
  oracle::Theta th;
  for (std::size_t i = 0; i < m; ++i) {
    th.sens.push_back(u(rng));
    th.spec.push_back(u(rng));
  }
  return th;
}

inline RaterParams to_params(const oracle::Theta& th) {
  RaterParams p;
  for (std::size_t i = 0; i < th.sens.size(); ++i) p.raters.push_back({th.sens[i], th.spec[i]});
  return p;
}

inline std::vector<double> column(const ExpertStack& s, std::size_t t) {
  std::vector<double> v;
  for (const auto& g : s.experts) v.push_back(g[t]);
  return v;
}

inline oracle::VoteTable vote_table(const ExpertStack& s) {
  oracle::VoteTable v(s.voxel_count());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = column(s, t);
  return v;
}

/// Solid cube of side `side` with its low corner at `corner`.
inline VolumeGrid cube_mask(Dim3 dims, std::size_t corner, std::size_t side) {
  auto g = VolumeGrid::filled(dims, VoxelKind::kBinaryLabel, 0.0);
  for (std::size_t z = corner; z < corner + side; ++z)
    for (std::size_t y = corner; y < corner + side; ++y)
      for (std::size_t x = corner; x < corner + side; ++x) g[fuselab::linear_index(x, y, z, dims)] = 1.0;
  return g;
}

}  // namespace fixture
