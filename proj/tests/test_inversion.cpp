#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mrt/inversion.hpp"
#include "mrt/phantom.hpp"

using namespace mrt;

namespace {

TensorBundle smooth_bundle(int dim, int top_rank, int nodes, std::uint64_t seed) {
  PhantomSpec spec;
  spec.kind = "polynomial-bump";
  spec.dim = dim;
  spec.top_rank = top_rank;
  spec.nodes = nodes;
  spec.seed = seed;
  spec.support_radius = 0.9;
  return make_phantom(spec);
}

std::vector<Ray> probe_rays(Rng& rng, int dim, int count) {
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Ray ray;
    double nrm2 = 0.0;
    for (int a = 0; a < dim; ++a) {
      ray.x[static_cast<std::size_t>(a)] = rng.uniform(-0.3, 0.3);
      ray.xi[static_cast<std::size_t>(a)] = rng.uniform(-1.0, 1.0);
      nrm2 += ray.xi[static_cast<std::size_t>(a)] * ray.xi[static_cast<std::size_t>(a)];
    }
    const double s = rng.uniform(0.85, 1.2) / std::sqrt(std::max(nrm2, 1e-8));
    for (int a = 0; a < dim; ++a) ray.xi[static_cast<std::size_t>(a)] *= s;
    rays.push_back(ray);
  }
  return rays;
}

// Rank-0 field holding one canonical component of a tensor field. Shares the
// donor's grid and interpolant, so its plain ray transform is an oracle for
// component recovery that carries no independent discretization error.
SymTensorField component_field(const SymTensorField& part, int comp) {
  SymTensorField g(part.grid(), 0, part.support_radius());
  for (std::int64_t n = 0; n < part.grid().node_count(); ++n)
    g.node_data(n)[0] = part.node_data(n)[comp];
  g.enforce_support();
  return g;
}

// Multiplicity-weighted relative L2 distance between a gridded reconstruction
// and a reference field evaluated at the same nodes.
double rel_l2(const SymTensorField& recon, const SymTensorField& truth) {
  const GridSpec& g = recon.grid();
  const ComponentSpace& space = component_space(recon.rank(), g.dim);
  double num = 0.0, den = 0.0;
  std::array<int, kMaxDim> idx{};
  for (std::int64_t n = 0; n < g.node_count(); ++n) {
    std::int64_t rem = n;
    for (int a = g.dim - 1; a >= 0; --a) {
      idx[static_cast<std::size_t>(a)] = int(rem % g.counts[static_cast<std::size_t>(a)]);
      rem /= g.counts[static_cast<std::size_t>(a)];
    }
    const SymTensor t = truth.eval(g.node_pos(idx));
    const double* r = recon.node_data(n);
    for (int c = 0; c < space.size; ++c) {
      const double d = r[c] - t[c];
      num += space.mult[static_cast<std::size_t>(c)] * d * d;
      den += space.mult[static_cast<std::size_t>(c)] * t[c] * t[c];
    }
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

double worst_component_error(const TensorBundle& F, int j, const std::vector<Ray>& rays) {
  const int dim = F.grid().dim;
  const ComponentSpace& space = component_space(j, dim);
  double worst = 0.0, scale = 1e-8;
  for (int ci = 0; ci < space.size; ++ci) {
    SymTensorField oracle = component_field(F.part(j), ci);
    for (const Ray& ray : rays) {
      const double want = mrt_rank(oracle, ray, 0);
      const double got = recover_component(F, j, space.index[static_cast<std::size_t>(ci)], ray);
      worst = std::max(worst, std::fabs(got - want));
      scale = std::max(scale, std::fabs(want));
    }
  }
  return worst / scale;
}

}  // namespace

TEST_CASE("component recovery matches direct transforms of each component") {
  SUBCASE("n=2, ranks up to 2") {
    for (int m = 1; m <= 2; ++m) {
      TensorBundle F = smooth_bundle(2, m, 128, 17 + std::uint64_t(m));
      Rng rng(99);
      const std::vector<Ray> rays = probe_rays(rng, 2, 12);
      for (int j = 0; j <= m; ++j) {
        const double err = worst_component_error(F, j, rays);
        CAPTURE(m);
        CAPTURE(j);
        CHECK(err <= 5e-3);
      }
    }
  }
  SUBCASE("n=3, rank 2") {
    TensorBundle F = smooth_bundle(3, 2, 64, 23);
    Rng rng(98);
    const std::vector<Ray> rays = probe_rays(rng, 3, 10);
    for (int j = 0; j <= 2; ++j) {
      const double err = worst_component_error(F, j, rays);
      CAPTURE(j);
      CHECK(err <= 5e-3);
    }
  }
  SUBCASE("n=2, rank 3 needs third derivatives and a finer phantom") {
    TensorBundle F = smooth_bundle(2, 3, 192, 37);
    Rng rng(97);
    const std::vector<Ray> rays = probe_rays(rng, 2, 8);
    for (int j = 0; j <= 3; ++j) {
      const double err = worst_component_error(F, j, rays);
      CAPTURE(j);
      CHECK(err <= 2e-2);
    }
  }
  SUBCASE("argument validation") {
    const MomentFn dummy = [](int, const Vec&, const Vec&) { return 0.0; };
    Ray ray;
    ray.x = {0.0, 0.0, 0.0, 0.0};
    ray.xi = {1.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(recover_component(dummy, 5, 0, MultiIndex{}, ray, 2), std::invalid_argument);
    CHECK_THROWS_AS(recover_component(dummy, 2, 3, MultiIndex{0, 0, 0}, ray, 2), std::invalid_argument);
    CHECK_THROWS_AS(recover_component(dummy, 4, 4, MultiIndex{0, 0, 0, 0}, ray, 2), std::invalid_argument);
    CHECK_THROWS_AS(recover_component(dummy, 2, 1, MultiIndex{0, 1}, ray, 2), std::invalid_argument);
    CHECK_THROWS_AS(recover_component(dummy, 2, 1, MultiIndex{3}, ray, 2), std::invalid_argument);
  }
}

TEST_CASE("scalar moment recovery shares the j=0 code path bit for bit") {
  TensorBundle F = smooth_bundle(2, 2, 64, 5);
  MomentCache cache(moment_evaluator(F));
  Ray ray;
  ray.x = {0.1, -0.2, 0.0, 0.0};
  ray.xi = {0.9, 0.5, 0.0, 0.0};
  const double a = recover_component(cache.fn(), 2, 0, MultiIndex{}, ray, 2);
  const double b = recover_scalar_moment(cache.fn(), 2, ray, 2);
  CHECK(a == b);
}

TEST_CASE("filtered backprojection reconstructs a Gaussian from its sinogram") {
  const double sig = 0.25;
  const LineIntegralFn xray = [sig](const Vec& point, const Vec& dir) {
    // Line integral of exp(-|x|^2/sig^2): only the offset part survives.
    const double s = point[0] * (-dir[1]) + point[1] * dir[0];
    return std::sqrt(M_PI) * sig * std::exp(-s * s / (sig * sig));
  };
  ParallelBeamData data = make_parallel_beam(xray, 180, 192, 1.5);
  const double s96 = data.offset(96);
  CHECK(data.at(0, 96) ==
        doctest::Approx(std::sqrt(M_PI) * sig * std::exp(-s96 * s96 / (sig * sig))).epsilon(1e-12));

  GridSpec grid;
  grid.dim = 2;
  for (int a = 0; a < 2; ++a) {
    grid.counts[static_cast<std::size_t>(a)] = 64;
    grid.origin[static_cast<std::size_t>(a)] = -1.0;
    grid.spacing[static_cast<std::size_t>(a)] = 2.0 / 63.0;
  }
  SymTensorField rec = invert_scalar_xray(data, grid, 0.9);

  double num = 0.0, den = 0.0;
  for (std::int64_t n = 0; n < grid.node_count(); ++n) {
    const int i0 = int(n / 64), i1 = int(n % 64);
    const double x0 = grid.origin[0] + grid.spacing[0] * i0;
    const double x1 = grid.origin[1] + grid.spacing[1] * i1;
    const double r2 = x0 * x0 + x1 * x1;
    const double t = r2 <= 0.81 ? std::exp(-r2 / (sig * sig)) : 0.0;
    const double d = rec.node_data(n)[0] - t;
    num += d * d;
    den += t * t;
  }
  CHECK(std::sqrt(num / den) <= 0.03);

  SUBCASE("too few angles are rejected") {
    ParallelBeamData small = make_parallel_beam(xray, 59, 64, 1.5);
    CHECK_THROWS_AS(invert_scalar_xray(small, grid, 0.9), std::invalid_argument);
  }
  SUBCASE("geometry validation") {
    ParallelBeamData bad = data;
    bad.samples.pop_back();
    CHECK_THROWS_AS(invert_scalar_xray(bad, grid, 0.9), std::invalid_argument);
    GridSpec g3 = grid;
    g3.dim = 3;
    g3.counts[2] = 4;
    g3.spacing[2] = 0.5;
    g3.origin[2] = -1.0;
    CHECK_THROWS_AS(invert_scalar_xray(data, g3, 0.9), std::invalid_argument);
  }
}

TEST_CASE("full pipeline reconstructs rank by rank") {
  TensorBundle F = smooth_bundle(2, 1, 128, 21);
  PipelineConfig cfg;
  cfg.angles = 90;
  cfg.offsets = 128;
  cfg.recon_nodes = 48;
  cfg.quad.panels = 16;
  InverseReport rep = full_inverse_pipeline(F, cfg);

  REQUIRE(rep.ranks.size() == 2);
  CHECK(rep.max_moment == 1);
  CHECK(rep.ranks[0].recovered);
  CHECK(rep.ranks[1].recovered);
  const double e0 = rel_l2(rep.reconstruction.part(0), F.part(0));
  const double e1 = rel_l2(rep.reconstruction.part(1), F.part(1));
  CAPTURE(e0);
  CAPTURE(e1);
  CHECK(e0 <= 0.05);
  CHECK(e1 <= 0.05);
}

TEST_CASE("pipeline reports unavailable ranks honestly") {
  TensorBundle F = smooth_bundle(2, 2, 128, 29);
  PipelineConfig cfg;
  cfg.max_moment = 1;  // moments of order 2 withheld
  cfg.angles = 90;
  cfg.offsets = 128;
  cfg.recon_nodes = 48;
  cfg.quad.panels = 16;
  InverseReport rep = full_inverse_pipeline(F, cfg);

  REQUIRE(rep.ranks.size() == 3);
  CHECK(rep.max_moment == 1);
  CHECK(rep.ranks[0].recovered);
  CHECK(rep.ranks[1].recovered);
  CHECK_FALSE(rep.ranks[2].recovered);
  CHECK(rep.ranks[2].note == "requires moments up to order 2");
  CHECK(rep.reconstruction.part(2).l2_norm() == 0.0);
  CHECK(rel_l2(rep.reconstruction.part(0), F.part(0)) <= 0.08);
  CHECK(rel_l2(rep.reconstruction.part(1), F.part(1)) <= 0.08);
}

TEST_CASE("dimension-3 pipeline stacks plane reconstructions") {
  PhantomSpec spec;
  spec.kind = "polynomial-bump";
  spec.dim = 3;
  spec.top_rank = 0;
  spec.nodes = 48;
  spec.seed = 31;
  spec.support_radius = 0.8;
  TensorBundle F = make_phantom(spec);

  PipelineConfig cfg;
  cfg.angles = 64;
  cfg.offsets = 96;
  cfg.recon_nodes = 32;
  cfg.support_radius = 0.8;
  cfg.quad.panels = 12;
  cfg.quad.order = 6;
  InverseReport rep = full_inverse_pipeline(F, cfg);
  const double e0 = rel_l2(rep.reconstruction.part(0), F.part(0));
  CAPTURE(e0);
  CHECK(e0 <= 0.05);
}

TEST_CASE("pipeline input validation") {
  PhantomSpec spec;
  spec.dim = 2;
  spec.top_rank = 4;
  spec.nodes = 24;
  spec.seed = 3;
  spec.support_radius = 0.7;
  TensorBundle F4 = make_phantom(spec);
  CHECK_THROWS_AS(full_inverse_pipeline(F4), std::invalid_argument);
}
