#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "fuselab/parallel.hpp"
#include "fuselab/philox.hpp"
#include "fuselab/simd/kernels.hpp"

using namespace fuselab;
using namespace fuselab::simd;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), 8 * a.size()) == 0;
}

std::vector<double> uniform(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<double> labels(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = (rng() & 1) ? 1.0 : 0.0;
  return v;
}

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar kernels agree with naive loops") {
  std::mt19937_64 rng(5);
  const auto& k = table_for(Isa::kScalar);
  for (std::size_t n : {0, 1, 3, 4, 5, 17, 1000}) {
    const auto x = uniform(n, rng), y = uniform(n, rng);
    double s = 0, d = 0, dc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s += x[i];
      d += x[i] * y[i];
      dc += (1 - x[i]) * y[i];
    }
    CHECK(k.sum(x.data(), n) == doctest::Approx(s).epsilon(1e-13));
    CHECK(k.dot(x.data(), y.data(), n) == doctest::Approx(d).epsilon(1e-13));
    CHECK(k.dot_complement(x.data(), y.data(), n) == doctest::Approx(dc).epsilon(1e-13));
  }
}

TEST_CASE("vector kernels are bit-identical to the scalar reference") {
  const auto isas = vector_isas();
  if (isas.empty()) {
    MESSAGE("no vector ISA on this machine; only the scalar table is exercised");
    return;
  }
  std::mt19937_64 rng(11);
  const auto& ref = table_for(Isa::kScalar);
  for (Isa isa : isas) {
    const auto& k = table_for(isa);
    CAPTURE(isa_name(isa));
    for (std::size_t n = 0; n < 70; ++n) {
      for (std::size_t n2 : {n, n * 37 + 5}) {
        const auto x = uniform(n2, rng), y = uniform(n2, rng), lab = labels(n2, rng);
        CHECK(same_bits(k.sum(x.data(), n2), ref.sum(x.data(), n2)));
        CHECK(same_bits(k.dot(x.data(), y.data(), n2), ref.dot(x.data(), y.data(), n2)));
        CHECK(same_bits(k.dot_complement(lab.data(), y.data(), n2), ref.dot_complement(lab.data(), y.data(), n2)));

        auto a1 = x, a2 = x;
        k.add_select(a1.data(), lab.data(), -0.105, -2.3, n2);
        ref.add_select(a2.data(), lab.data(), -0.105, -2.3, n2);
        CHECK(same_bits(a1, a2));

        a1 = x, a2 = x;
        k.add(a1.data(), y.data(), n2);
        ref.add(a2.data(), y.data(), n2);
        CHECK(same_bits(a1, a2));

        std::vector<double> o1(n2), o2(n2);
        k.mix(o1.data(), x.data(), 0.83, 0.17, n2);
        ref.mix(o2.data(), x.data(), 0.83, 0.17, n2);
        CHECK(same_bits(o1, o2));

        k.mul(o1.data(), x.data(), y.data(), n2);
        ref.mul(o2.data(), x.data(), y.data(), n2);
        CHECK(same_bits(o1, o2));

        k.complement(o1.data(), x.data(), n2);
        ref.complement(o2.data(), x.data(), n2);
        CHECK(same_bits(o1, o2));
      }
    }
  }
}

TEST_CASE("vector kernels handle unaligned views") {
  const auto isas = vector_isas();
  std::mt19937_64 rng(2);
  const auto x = uniform(301, rng), y = uniform(301, rng);
  const auto& ref = table_for(Isa::kScalar);
  for (Isa isa : isas) {
    const auto& k = table_for(isa);
    for (std::size_t off = 0; off < 4; ++off) {
      CHECK(same_bits(k.dot(x.data() + off, y.data() + 3 - off, 290), ref.dot(x.data() + off, y.data() + 3 - off, 290)));
    }
  }
}

TEST_CASE("dispatch") {
  CHECK(parse_isa("scalar") == Isa::kScalar);
  CHECK(parse_isa("auto") == best_isa());
  CHECK(isa_supported(Isa::kScalar));
  CHECK_THROWS(parse_isa("sse9"));
  const Isa before = active_isa();
  set_isa(Isa::kScalar);
  CHECK(kernels().name == table_for(Isa::kScalar).name);
  set_isa(before);
  CHECK(active_isa() == before);
}

TEST_CASE("partition covers the range with fixed boundaries") {
  for (std::size_t n : {0, 1, 7, 100, 1001}) {
    for (std::size_t p : {1, 2, 3, 8}) {
      const auto r = partition(n, p);
      REQUIRE(r.size() == p);
      CHECK(r.front().begin == 0);
      CHECK(r.back().end == n);
      for (std::size_t k = 1; k < p; ++k) CHECK(r[k].begin == r[k - 1].end);
    }
  }
  CHECK(partition(10, 3)[1].begin == 3);
  CHECK(partition(10, 3)[2].begin == 6);
}

TEST_CASE("reduce_ranges depends on the thread count only") {
  std::mt19937_64 rng(9);
  const auto x = uniform(10007, rng);
  const auto& k = kernels();
  for (std::size_t threads : {1, 2, 3, 4}) {
    const auto f = [&](Range r) { return k.sum(x.data() + r.begin, r.size()); };
    const double a = reduce_ranges(x.size(), threads, f);
    const double b = reduce_ranges(x.size(), threads, f);
    CHECK(same_bits(a, b));
  }
}

TEST_CASE("Philox4x32-10 known answers") {
  // Reference vectors published with the Random123 library.
  const auto z = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(z == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto f = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
  CHECK(f == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  const auto pi = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                       {0xa4093822u, 0x299f31d0u});
  CHECK(pi == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("uniform helpers stay inside their intervals") {
  CHECK(open_uniform32(0) > 0.0);
  CHECK(open_uniform32(0xffffffffu) < 1.0);
  CHECK(uniform53(0, 0) == 0.0);
  CHECK(uniform53(0xffffffffu, 0xffffffffu) < 1.0);
}
