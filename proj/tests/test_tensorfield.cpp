#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "mrt/phantom.hpp"
#include "mrt/tensorfield.hpp"

using namespace mrt;

namespace {

GridSpec square_grid(int dim, double extent, int nodes) {
  GridSpec g;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    g.origin[size_t(a)] = -extent;
    g.spacing[size_t(a)] = 2.0 * extent / double(nodes - 1);
    g.counts[size_t(a)] = nodes;
  }
  return g;
}

std::string temp_base(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() / "mrt_tensorfield_tests";
  std::filesystem::create_directories(dir);
  return (dir / tag).string();
}

}  // namespace

TEST_CASE("grid validation rejects degenerate layouts") {
  GridSpec g = square_grid(2, 1.0, 8);
  CHECK_NOTHROW(g.validate());
  GridSpec bad_dim = g;
  bad_dim.dim = 1;
  CHECK_THROWS_AS(bad_dim.validate(), std::invalid_argument);
  GridSpec bad_h = g;
  bad_h.spacing[0] = 0.0;
  CHECK_THROWS_AS(bad_h.validate(), std::invalid_argument);
  GridSpec bad_n = g;
  bad_n.counts[1] = 3;
  CHECK_THROWS_AS(bad_n.validate(), std::invalid_argument);

  // node layout: row-major, last axis fastest
  std::array<int, kMaxDim> idx{1, 2, 0, 0};
  CHECK(g.node_linear(idx) == 1 * 8 + 2);
  Vec p = g.node_pos(idx);
  CHECK(p[0] == doctest::Approx(-1.0 + g.spacing[0]).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-1.0 + 2 * g.spacing[1]).epsilon(1e-15));
  Vec c = g.center();
  CHECK(c[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("support ball must keep a two-cell margin") {
  GridSpec g = square_grid(2, 1.0, 12);  // h = 2/11
  double h = g.spacing[0];
  CHECK_NOTHROW(SymTensorField(g, 0, 1.0 - 2.5 * h));
  CHECK_THROWS_AS(SymTensorField(g, 0, 1.0 - 1.5 * h), std::invalid_argument);
  CHECK_THROWS_AS(SymTensorField(g, 0, -0.5), std::invalid_argument);
}

TEST_CASE("cubic interpolation reproduces per-axis cubics exactly") {
  GridSpec g = square_grid(2, 1.0, 42);
  auto poly = [](const Vec& x) {
    double a = 2.0 + x[0] - 0.5 * x[0] * x[0] * x[0];
    double b = 1.0 - x[1] + x[1] * x[1] + 0.25 * x[1] * x[1] * x[1];
    return a * b;
  };
  SymTensorField f = SymTensorField::sample(g, 0, 0.9, [&](const Vec& x) {
    SymTensor t(0, 2);
    t[0] = poly(x);
    return t;
  });

  // points comfortably inside the ball, at generic (non-node) positions
  const double pts[][2] = {{0.137, -0.258}, {-0.41, 0.333}, {0.618, 0.2}, {-0.05, -0.61}, {0.0, 0.0}};
  for (auto& p : pts) {
    Vec x{p[0], p[1], 0.0, 0.0};
    CHECK(f.eval(x)[0] == doctest::Approx(poly(x)).epsilon(1e-12));
  }

  // exactly zero beyond the support ball, even where nodes carry data nearby
  Vec outside{0.93, 0.1, 0.0, 0.0};
  CHECK(f.eval(outside)[0] == 0.0);

  // outside the grid box entirely: still a well-defined zero, because the
  // support ball never reaches the box boundary
  Vec far{1.5, 0.0, 0.0, 0.0};
  CHECK(f.eval(far)[0] == 0.0);

  // node-exactness: interpolation weights collapse onto the stored value
  std::array<int, kMaxDim> idx{13, 20, 0, 0};
  Vec node = g.node_pos(idx);
  CHECK(f.eval(node)[0] == doctest::Approx(poly(node)).epsilon(1e-13));
}

TEST_CASE("interpolation handles the three-dimensional case") {
  GridSpec g = square_grid(3, 1.0, 24);
  auto poly = [](const Vec& x) { return (1.0 + x[0]) * (2.0 - x[1]) * (0.5 + x[2] * x[2]); };
  SymTensorField f = SymTensorField::sample(g, 1, 0.8, [&](const Vec& x) {
    SymTensor t(1, 3);
    t[0] = poly(x);
    t[1] = -2.0 * poly(x);
    t[2] = x[0] + x[1];
    return t;
  });
  Vec x{0.21, -0.17, 0.33, 0.0};
  SymTensor v = f.eval(x);
  CHECK(v[0] == doctest::Approx(poly(x)).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(-2.0 * poly(x)).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx(x[0] + x[1]).epsilon(1e-12));
}

TEST_CASE("l2_norm integrates the squared tensor magnitude") {
  // Gaussian squared integrates in closed form; the support tail is far
  // below the tolerance.
  GridSpec g = square_grid(2, 1.8, 96);
  SymTensorField f = SymTensorField::sample(g, 0, 1.6, [&](const Vec& x) {
    SymTensor t(0, 2);
    t[0] = std::exp(-4.0 * (x[0] * x[0] + x[1] * x[1]));
    return t;
  });
  double want = M_PI / 8.0;  // integral of exp(-8 |x|^2) over the plane
  CHECK(f.l2_norm() * f.l2_norm() == doctest::Approx(want).epsilon(1e-6));

  // off-diagonal components count twice in the pointwise square
  auto profile = [](const Vec& x) { return std::exp(-3.0 * (x[0] * x[0] + x[1] * x[1])) * (1.0 + x[0]); };
  SymTensorField scalar = SymTensorField::sample(g, 0, 1.6, [&](const Vec& x) {
    SymTensor t(0, 2);
    t[0] = profile(x);
    return t;
  });
  SymTensorField offdiag = SymTensorField::sample(g, 2, 1.6, [&](const Vec& x) {
    SymTensor t(2, 2);
    t.at(MultiIndex{0, 1}) = profile(x);
    return t;
  });
  CHECK(offdiag.l2_norm() == doctest::Approx(std::sqrt(2.0) * scalar.l2_norm()).epsilon(1e-12));
}

TEST_CASE("enforce_support masks hand-written node data") {
  GridSpec g = square_grid(2, 1.0, 16);
  SymTensorField f(g, 0, 0.5);
  // poke a value well outside the ball, then re-mask
  std::array<int, kMaxDim> corner{1, 1, 0, 0};
  f.node_data(g.node_linear(corner))[0] = 7.0;
  std::array<int, kMaxDim> middle{8, 8, 0, 0};
  f.node_data(g.node_linear(middle))[0] = 3.0;
  f.enforce_support();
  CHECK(f.node_data(g.node_linear(corner))[0] == 0.0);
  CHECK(f.node_data(g.node_linear(middle))[0] == 3.0);
}

TEST_CASE("field save/load round-trips bit for bit") {
  PhantomSpec spec;
  spec.kind = "gaussian";
  spec.dim = 2;
  spec.top_rank = 2;
  spec.nodes = 24;
  spec.seed = 77;
  Rng rng(spec.seed);
  SymTensorField f = make_phantom_field(spec, 2, rng);

  std::string base = temp_base("roundtrip_field");
  f.save(base);
  SymTensorField g = SymTensorField::load(base);
  CHECK(g.rank() == f.rank());
  CHECK(g.support_radius() == f.support_radius());
  CHECK(g.grid() == f.grid());
  REQUIRE(g.raw().size() == f.raw().size());
  CHECK(g.raw() == f.raw());  // exact payload, not approximate
}

TEST_CASE("bundle save/load preserves every rank") {
  PhantomSpec spec;
  spec.kind = "gaussian";
  spec.dim = 2;
  spec.top_rank = 3;
  spec.nodes = 20;
  spec.seed = 5;
  TensorBundle F = make_phantom(spec);
  CHECK(F.top_rank() == 3);

  auto dir = std::filesystem::temp_directory_path() / "mrt_tensorfield_tests" / "bundle";
  std::filesystem::create_directories(dir);
  F.save(dir.string());
  TensorBundle G = TensorBundle::load(dir.string());
  REQUIRE(G.top_rank() == 3);
  for (int r = 0; r <= 3; ++r) {
    CHECK(G.part(r).raw() == F.part(r).raw());
    CHECK(G.part(r).grid() == F.part(r).grid());
  }
}

TEST_CASE("bundle construction rejects mismatched parts") {
  GridSpec g = square_grid(2, 1.0, 12);
  GridSpec g2 = square_grid(2, 1.2, 12);
  std::vector<SymTensorField> parts;
  parts.emplace_back(g, 0, 0.5);
  parts.emplace_back(g2, 1, 0.5);
  CHECK_THROWS_AS(TensorBundle(std::move(parts)), std::invalid_argument);

  std::vector<SymTensorField> wrong_order;
  wrong_order.emplace_back(g, 1, 0.5);
  CHECK_THROWS_AS(TensorBundle(std::move(wrong_order)), std::invalid_argument);
}

TEST_CASE("phantom kinds produce the advertised structure") {
  // i_delta-lifted phantoms decompose with the requested lift depth
  PhantomSpec spec;
  spec.kind = "i_delta-lifted";
  spec.dim = 3;
  spec.top_rank = 4;
  spec.nodes = 16;
  spec.lift_level = 2;
  spec.seed = 9;
  TensorBundle F = make_phantom(spec);
  const GridSpec& g = F.grid();
  std::array<int, kMaxDim> mid{8, 8, 8, 0};
  std::int64_t node = g.node_linear(mid);
  SymTensor top(4, 3);
  for (int c = 0; c < top.size(); ++c) top[c] = F.part(4).node_data(node)[c];
  if (norm(top) > 1e-12) {
    IsotropySplit is = isotropy_split(top, 1e-8);
    CHECK(is.level == 2);
  }

  // deterministic: same seed, same bytes
  TensorBundle F2 = make_phantom(spec);
  for (int r = 0; r <= 4; ++r) CHECK(F2.part(r).raw() == F.part(r).raw());

  PhantomSpec other = spec;
  other.seed = 10;
  TensorBundle F3 = make_phantom(other);
  bool all_equal = true;
  for (int r = 0; r <= 4; ++r) all_equal = all_equal && F3.part(r).raw() == F.part(r).raw();
  CHECK_FALSE(all_equal);
}
