#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "mrt/phantom.hpp"
#include "mrt/raytransform.hpp"
#include "mrt/spherekernel.hpp"
#include "mrt/symtensor.hpp"

using namespace mrt;

namespace {

SymTensor random_tensor(int rank, int dim, Rng& rng) {
  SymTensor t(rank, dim);
  for (int c = 0; c < t.size(); ++c) t[c] = rng.uniform(-1.0, 1.0);
  return t;
}

// Pullback under an axis relabeling: out_{i1..im} = t_{perm(i1)..perm(im)},
// perm given as new-label -> old-label.
SymTensor permute_axes(const SymTensor& t, const std::vector<int>& perm) {
  SymTensor out(t.rank(), t.dim());
  const ComponentSpace& sp = out.space();
  for (int o = 0; o < sp.size; ++o) {
    MultiIndex mapped = sp.index[std::size_t(o)];
    for (int q = 0; q < mapped.rank; ++q)
      mapped.ix[std::size_t(q)] = std::uint8_t(perm[std::size_t(mapped[q])]);
    mapped.canonicalize();
    out[o] = t.at(mapped);
  }
  return out;
}

SliceSpec basic_slice(int dim, int rank, int axis, int r_nodes = 65, int resolution = 8) {
  SliceSpec spec;
  spec.dim = dim;
  spec.rank = rank;
  spec.axis = axis;
  spec.slice_coord = 0.2;
  spec.center = Vec{};
  spec.center[std::size_t((axis + 1) % dim)] = 1.4;  // polar center away from the origin
  spec.r_max = 1.0;
  spec.r_nodes = r_nodes;
  spec.thetas = make_theta_grid(dim - 1, resolution);
  return spec;
}

// Smooth bounded scalar used to modulate tensor-valued sample functions.
double wave(const Vec& x, int dim, double a, double b) {
  double s = 0.0;
  for (int q = 0; q < dim; ++q) s += (a + 0.31 * double(q)) * x[std::size_t(q)];
  return std::sin(s) + b * std::cos(0.7 * s);
}

void scale_bundle(TensorBundle& F, double s) {
  const std::int64_t total = F.grid().node_count();
  for (int r = 0; r <= F.top_rank(); ++r) {
    SymTensorField& part = F.part(r);
    for (std::int64_t node = 0; node < total; ++node) {
      double* d = part.node_data(node);
      for (int c = 0; c < part.ncomp(); ++c) d[c] *= s;
    }
  }
}

double bundle_norm(const TensorBundle& F) {
  double sq = 0.0;
  for (int r = 0; r <= F.top_rank(); ++r) {
    const double n = F.part(r).l2_norm();
    sq += n * n;
  }
  return std::sqrt(sq);
}

}  // namespace

TEST_CASE("theta grids integrate sphere moments and carry unit directions") {
  // S^0: two points, measure 2.
  ThetaGrid g1 = make_theta_grid(1, 0);
  CHECK(g1.count() == 2);
  CHECK(g1.weights[0] + g1.weights[1] == doctest::Approx(2.0));
  CHECK(g1.dirs[0][0] == 1.0);
  CHECK(g1.dirs[1][0] == -1.0);

  // S^1: uniform angles, measure 2 pi, exact second moment pi.
  ThetaGrid g2 = make_theta_grid(2, 16);
  double total = 0.0, second = 0.0;
  for (int t = 0; t < g2.count(); ++t) {
    total += g2.weights[std::size_t(t)];
    second += g2.weights[std::size_t(t)] * g2.dirs[std::size_t(t)][0] * g2.dirs[std::size_t(t)][0];
  }
  CHECK(total == doctest::Approx(2.0 * M_PI).epsilon(1e-13));
  CHECK(second == doctest::Approx(M_PI).epsilon(1e-12));

  // S^2: measure 4 pi, exact quadratic moments 4 pi / 3 along every axis.
  ThetaGrid g3 = make_theta_grid(3, 6);
  total = 0.0;
  double m0 = 0.0, m2 = 0.0;
  for (int t = 0; t < g3.count(); ++t) {
    const Vec& d = g3.dirs[std::size_t(t)];
    const double w = g3.weights[std::size_t(t)];
    total += w;
    m0 += w * d[0] * d[0];
    m2 += w * d[2] * d[2];
    CHECK(std::abs(d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - 1.0) <= 1e-13);
  }
  CHECK(total == doctest::Approx(4.0 * M_PI).epsilon(1e-13));
  CHECK(m0 == doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-12));
  CHECK(m2 == doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(make_theta_grid(4, 8), std::invalid_argument);
  CHECK_THROWS_AS(make_theta_grid(2, 1), std::invalid_argument);
}

TEST_CASE("the contraction vector squares to zero for every grid direction") {
  for (int dim = 2; dim <= 4; ++dim)
    for (int axis = 0; axis < dim; ++axis) {
      ThetaGrid g = make_theta_grid(dim - 1, 10);
      for (int t = 0; t < g.count(); ++t) {
        auto zeta = null_vector(dim, axis, g.dirs[std::size_t(t)]);
        std::complex<double> sq(0.0, 0.0);
        for (int a = 0; a < dim; ++a) sq += zeta[std::size_t(a)] * zeta[std::size_t(a)];
        CHECK(std::abs(sq) <= 1e-14);
        CHECK(zeta[std::size_t(axis)] == std::complex<double>(1.0, 0.0));
      }
    }
  // dim 2 is exact: omega = +-1 makes 1 + (i omega)^2 vanish identically.
  auto zeta = null_vector(2, 0, make_theta_grid(1, 0).dirs[0]);
  std::complex<double> sq = zeta[0] * zeta[0] + zeta[1] * zeta[1];
  CHECK(sq.real() == 0.0);
  CHECK(sq.imag() == 0.0);
}

TEST_CASE("slice geometry: points, spacing, and shape validation") {
  SliceSpec spec = basic_slice(3, 2, 0);
  SliceField f(spec);
  CHECK(f.ncomp() == component_count(2, 3));
  CHECK(f.r(0) == doctest::Approx(-1.0));
  CHECK(f.r(spec.r_nodes - 1) == doctest::Approx(1.0));

  // Every sample point lies on the slice and at distance |r| from the center.
  for (int t = 0; t < spec.thetas.count(); t += 3)
    for (int j = 0; j < spec.r_nodes; j += 16) {
      Vec p = f.point(t, j);
      CHECK(p[0] == doctest::Approx(spec.slice_coord));
      const double d1 = p[1] - spec.center[1];
      const double d2 = p[2] - spec.center[2];
      CHECK(std::sqrt(d1 * d1 + d2 * d2) == doctest::Approx(std::abs(f.r(j))).epsilon(1e-12));
    }

  SliceSpec bad = spec;
  bad.thetas = make_theta_grid(1, 0);
  CHECK_THROWS_AS(SliceField{bad}, std::invalid_argument);
  bad = spec;
  bad.r_nodes = 4;
  CHECK_THROWS_AS(SliceField{bad}, std::invalid_argument);
  bad = spec;
  bad.axis = 3;
  CHECK_THROWS_AS(SliceField{bad}, std::invalid_argument);
}

TEST_CASE("moment conditions annihilate Kronecker-lifted fields pointwise") {
  Rng rng(404);
  for (int dim : {2, 3}) {
    const int m = 3;
    SymTensor base = random_tensor(m - 2, dim, rng);
    auto fn = [&](const Vec& x) {
      return i_delta(scale(base, wave(x, dim, 0.9, 0.4)));
    };
    SliceSpec spec = basic_slice(dim, m, 0);
    SliceField f = SliceField::sample(spec, fn);
    MomentConditionReport rep = moment_conditions(f);
    CHECK(rep.alpha_count == m + 1);
    CHECK(rep.theta_count == spec.thetas.count());
    CHECK(rep.max_abs <= 1e-12);
  }

  // The all-zero slice reports exactly zero.
  SliceField zero(basic_slice(3, 2, 1));
  CHECK(moment_conditions(zero).max_abs == 0.0);
}

TEST_CASE("rank-0 moments match the one-dimensional radial integral") {
  const double sigma = 0.15;
  SliceSpec spec = basic_slice(3, 0, 0, 401, 6);
  auto fn = [&](const Vec& x) {
    const double d1 = x[1] - spec.center[1];
    const double d2 = x[2] - spec.center[2];
    SymTensor t(0, 3);
    t[0] = std::exp(-(d1 * d1 + d2 * d2) / (sigma * sigma));
    return t;
  };
  SliceField f = SliceField::sample(spec, fn);
  MomentConditionReport rep = moment_conditions(f);
  // Along each line through the center the profile is exp(-r^2/sigma^2), so
  // the alpha = 0 moment is sigma * sqrt(pi) for every direction.
  const double oracle = sigma * std::sqrt(M_PI);
  for (int t = 0; t < rep.theta_count; ++t) {
    CHECK(std::abs(rep.at(0, t).real() - oracle) <= 1e-12);
    CHECK(std::abs(rep.at(0, t).imag()) <= 1e-14);
  }
}

TEST_CASE("slot pieces scale fixed-axis components by the binomial factor") {
  Rng rng(11);
  SymTensor g = random_tensor(3, 3, rng);
  // axis 0: piece p=1 over axes {1,2}: binom(3,1) * g_{j 0 0}.
  SymTensor p1 = slot_piece(g, 0, 1);
  CHECK(p1.rank() == 1);
  CHECK(p1.dim() == 2);
  CHECK(p1.at(MultiIndex{0}) == doctest::Approx(3.0 * g.at(MultiIndex{0, 0, 1})).epsilon(1e-15));
  CHECK(p1.at(MultiIndex{1}) == doctest::Approx(3.0 * g.at(MultiIndex{0, 0, 2})).epsilon(1e-15));
  // p = m keeps every non-axis component with coefficient 1.
  SymTensor p3 = slot_piece(g, 0, 3);
  CHECK(p3.at(MultiIndex{0, 1, 1}) == doctest::Approx(g.at(MultiIndex{1, 2, 2})).epsilon(1e-15));
  CHECK_THROWS_AS(slot_piece(g, 0, 4), std::invalid_argument);
}

TEST_CASE("construct_v recovers the potential of a Kronecker lift exactly") {
  // Identity input: v = 1.
  for (int dim = 2; dim <= 4; ++dim)
    for (int axis = 0; axis < dim; ++axis) {
      SymTensor v = construct_v_point(kronecker_delta(dim), axis);
      CHECK(v.rank() == 0);
      CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-15));
    }

  // f = i_delta(w) reconstructs: i_delta(construct_v(f)) = f, and the
  // potential itself matches w (scalar, vector, and matrix potentials).
  Rng rng(2024);
  for (int dim : {2, 3, 4})
    for (int m : {2, 3, 4})
      for (int axis = 0; axis < dim; ++axis)
        for (int rep = 0; rep < 8; ++rep) {
          SymTensor w = random_tensor(m - 2, dim, rng);
          SymTensor f = i_delta(w);
          SymTensor v = construct_v_point(f, axis);
          CHECK(v.rank() == m - 2);
          SymTensor recon = i_delta(v);
          const double fn = norm(f);
          double err = 0.0, verr = 0.0;
          for (int c = 0; c < f.size(); ++c) err = std::max(err, std::abs(recon[c] - f[c]));
          for (int c = 0; c < w.size(); ++c) verr = std::max(verr, std::abs(v[c] - w[c]));
          CHECK(err <= 1e-10 * std::max(1.0, fn));
          CHECK(verr <= 1e-10 * std::max(1.0, norm(w)));
        }

  CHECK_THROWS_AS(construct_v_point(SymTensor(1, 3), 0), std::invalid_argument);
  CHECK_THROWS_AS(construct_v_point(SymTensor(0, 3), 0), std::invalid_argument);
}

TEST_CASE("construct_v on slices: pointwise reconstruction and rank errors") {
  Rng rng(7);
  const int dim = 3, m = 3;
  SymTensor w0 = random_tensor(m - 2, dim, rng);
  SymTensor w1 = random_tensor(m - 2, dim, rng);
  auto w_fn = [&](const Vec& x) {
    return add(scale(w0, wave(x, dim, 1.1, 0.2)), scale(w1, wave(x, dim, 0.5, -0.7)));
  };
  SliceSpec spec = basic_slice(dim, m, 1, 33, 6);
  SliceField f = SliceField::sample(spec, [&](const Vec& x) { return i_delta(w_fn(x)); });
  SliceField v = construct_v(f);
  CHECK(v.spec().rank == m - 2);
  double err = 0.0;
  for (int t = 0; t < spec.thetas.count(); ++t)
    for (int j = 0; j < spec.r_nodes; ++j) {
      SymTensor recon = i_delta(v.tensor(t, j));
      SymTensor truth = f.tensor(t, j);
      for (int c = 0; c < truth.size(); ++c)
        err = std::max(err, std::abs(recon[c] - truth[c]));
    }
  CHECK(err <= 1e-9);

  SliceField low(basic_slice(dim, 1, 0));
  CHECK_THROWS_AS(construct_v(low), std::invalid_argument);
}

TEST_CASE("construct_v is equivariant under axis relabeling") {
  Rng rng(99);
  // perm maps new labels to old: f'(i..) = f(perm(i)..); the distinguished
  // axis follows the relabeling, and the potential transforms the same way.
  const std::vector<int> perm{2, 0, 1};
  for (int m : {2, 3, 4}) {
    SymTensor f = random_tensor(m, 3, rng);
    SymTensor fp = permute_axes(f, perm);
    for (int new_axis = 0; new_axis < 3; ++new_axis) {
      const int old_axis = perm[std::size_t(new_axis)];
      SymTensor vp = construct_v_point(fp, new_axis);
      SymTensor v_mapped = permute_axes(construct_v_point(f, old_axis), perm);
      for (int c = 0; c < vp.size(); ++c)
        CHECK(vp[c] == doctest::Approx(v_mapped[c]).epsilon(1e-13));
    }
  }
}

TEST_CASE("slice results are identical across slices of an axis-independent field") {
  Rng rng(31);
  const int dim = 3, m = 2, axis = 0;
  SymTensor b0 = random_tensor(m, dim, rng);
  // The sample function ignores the axis coordinate entirely.
  auto fn = [&](const Vec& x) {
    Vec y = x;
    y[std::size_t(axis)] = 0.0;
    return scale(b0, wave(y, dim, 0.8, 0.3));
  };
  std::vector<double> coords{-0.3, 0.1, 0.5};
  std::vector<SliceField> vs;
  std::vector<MomentConditionReport> reps;
  for (double c : coords) {
    SliceSpec spec = basic_slice(dim, m, axis, 33, 6);
    spec.slice_coord = c;
    SliceField f = SliceField::sample(spec, fn);
    reps.push_back(moment_conditions(f));
    vs.push_back(construct_v(f));
  }
  for (std::size_t s = 1; s < vs.size(); ++s) {
    for (int t = 0; t < vs[0].spec().thetas.count(); ++t)
      for (int j = 0; j < vs[0].spec().r_nodes; ++j) {
        const double* a = vs[0].values(t, j);
        const double* b = vs[s].values(t, j);
        for (int c = 0; c < vs[0].ncomp(); ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-14));
      }
    for (std::size_t q = 0; q < reps[0].residual.size(); ++q)
      CHECK(std::abs(reps[s].residual[q] - reps[0].residual[q]) <= 1e-14);
  }
}

TEST_CASE("build_G reduces to the paper-free base cases") {
  PhantomSpec spec;
  spec.kind = "polynomial-bump";
  spec.dim = 2;
  spec.nodes = 24;
  spec.support_radius = 0.7;
  spec.seed = 5;

  // m = 1: G1 = f^(0), G2 = f^(1), no lifting at all.
  spec.top_rank = 1;
  TensorBundle F1 = make_phantom(spec);
  GPair g1 = build_G(F1);
  CHECK(g1.G1.rank() == 0);
  CHECK(g1.G2.rank() == 1);
  const std::int64_t total = F1.grid().node_count();
  for (std::int64_t node = 0; node < total; node += 7) {
    CHECK(g1.G1.node_data(node)[0] == F1.part(0).node_data(node)[0]);
    for (int c = 0; c < 2; ++c) CHECK(g1.G2.node_data(node)[c] == F1.part(1).node_data(node)[c]);
  }

  // m = 2: G1 = i_delta f^(0) + f^(2) at every node.
  spec.top_rank = 2;
  TensorBundle F2 = make_phantom(spec);
  GPair g2 = build_G(F2);
  CHECK(g2.G1.rank() == 2);
  for (std::int64_t node = 0; node < total; node += 5) {
    SymTensor s0(0, 2);
    s0[0] = F2.part(0).node_data(node)[0];
    SymTensor expect = i_delta(s0);
    for (int c = 0; c < 3; ++c) expect[c] += F2.part(2).node_data(node)[c];
    for (int c = 0; c < 3; ++c)
      CHECK(g2.G1.node_data(node)[c] == doctest::Approx(expect[c]).epsilon(1e-15));
  }

  // m = 0: the odd sum is empty.
  spec.top_rank = 0;
  TensorBundle F0 = make_phantom(spec);
  GPair g0 = build_G(F0);
  CHECK(g0.G2.rank() == 0);
  CHECK(g0.G2.l2_norm() == 0.0);
  CHECK(g0.G1.l2_norm() > 0.0);
}

TEST_CASE("plancherel weights are positive and the report splits the total") {
  for (int m = 0; m <= 6; ++m)
    for (int q = 0; q <= m; ++q) CHECK(plancherel_weight(m, q) > 0.0);

  // Zero input: all terms vanish identically.
  PlancherelReport zrep = plancherel_check(SymTensor(4, 3), 0);
  CHECK(zrep.total == 0.0);
  for (double t : zrep.term) CHECK(t == 0.0);

  // Generic input: the total is the sum of the reported terms, every term is
  // nonnegative, and term l matches d * |piece|^2 directly.
  Rng rng(64);
  SymTensor g = random_tensor(4, 3, rng);
  PlancherelReport rep = plancherel_check(g, 0);
  CHECK(rep.term.size() == 3);
  CHECK(rep.piece_norm.size() == 5);
  double sum = 0.0;
  for (std::size_t l = 0; l < rep.term.size(); ++l) {
    CHECK(rep.term[l] >= 0.0);
    sum += rep.term[l];
    const int p = 4 - 2 * int(l);
    const double d = l == 0 ? 1.0 : plancherel_weight(4, p);
    CHECK(rep.term[l] ==
          doctest::Approx(d * rep.piece_norm[std::size_t(p)] * rep.piece_norm[std::size_t(p)])
              .epsilon(1e-12));
  }
  CHECK(rep.total == doctest::Approx(sum).epsilon(1e-15));

  CHECK_THROWS_AS(plancherel_check(SymTensor(3, 3), 0), std::invalid_argument);
}

namespace {

// Rows of the linear constraints that cut out the trace-free tensors obeying
// the even-chain relation; the basis runs over canonical components of g.
std::vector<std::vector<double>> kernel_constraint_rows(int m, int dim, int axis) {
  const int N = component_count(m, dim);
  std::vector<std::vector<double>> rows;
  for (int c = 0; c < N; ++c) {
    SymTensor basis(m, dim);
    basis[c] = 1.0;

    // trace-free: every component of j_delta(g) vanishes
    SymTensor tr = j_delta(basis);
    if (c == 0) rows.assign(std::size_t(tr.size()), std::vector<double>(std::size_t(N), 0.0));
    for (int o = 0; o < tr.size(); ++o) rows[std::size_t(o)][std::size_t(c)] = tr[o];
  }

  // even-chain: piece^m - sum_l (-1)^{l+1} i_delta^l piece^{m-2l} = 0
  const int base = int(rows.size());
  const int R = component_count(m, dim - 1);
  rows.resize(std::size_t(base + R), std::vector<double>(std::size_t(component_count(m, dim)), 0.0));
  for (int c = 0; c < component_count(m, dim); ++c) {
    SymTensor basis(m, dim);
    basis[c] = 1.0;
    SymTensor rel = slot_piece(basis, axis, m);
    double sign = 1.0;  // (-1)^{l+1} alternates starting at +1 for l = 1
    for (int l = 1; m - 2 * l >= 0; ++l) {
      SymTensor lifted = i_delta_pow(slot_piece(basis, axis, m - 2 * l), l);
      rel = add(rel, scale(lifted, -sign));
      sign = -sign;
    }
    for (int o = 0; o < R; ++o) rows[std::size_t(base + o)][std::size_t(c)] = rel[o];
  }
  return rows;
}

}  // namespace

TEST_CASE("constraint-solved tensors have vanishing even pieces and zero total") {
  Rng rng(555);
  struct Case {
    int m, dim, null_dim;
  };
  // The free directions are exactly the odd pieces that survive the trace
  // coupling: 2 for (m=2, n=3) and 4 for (m=4, n=3).
  for (Case cs : {Case{2, 3, 2}, Case{4, 3, 4}}) {
    const int N = component_count(cs.m, cs.dim);
    std::vector<std::vector<double>> rows = kernel_constraint_rows(cs.m, cs.dim, 0);

    // Normal matrix and its spectrum; the null space of A is the eigenspace
    // of A^T A at zero.
    Matrix ata(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        double s = 0.0;
        for (const std::vector<double>& r : rows) s += r[std::size_t(i)] * r[std::size_t(j)];
        ata(i, j) = s;
      }
    std::vector<double> eig;
    Matrix vecs(N, N);
    jacobi_eigensymm(ata, eig, vecs);
    const double lmax = eig[std::size_t(N - 1)];
    int nullity = 0;
    for (double e : eig)
      if (e <= 1e-12 * std::max(1.0, lmax)) ++nullity;
    CHECK(nullity == cs.null_dim);

    // Random combination of null vectors (columns of vecs holding the small
    // eigenvalues come first in ascending order).
    SymTensor g(cs.m, cs.dim);
    for (int v = 0; v < nullity; ++v) {
      const double coeff = rng.uniform(-1.0, 1.0);
      for (int c = 0; c < N; ++c) g[c] += coeff * vecs(c, v);
    }
    const double gn = norm(g);
    CHECK(gn > 1e-3);  // the combination is genuinely nonzero

    PlancherelReport rep = plancherel_check(g, 0);
    CHECK(std::abs(rep.total) <= 1e-12 * std::max(1.0, gn * gn));
    for (int p = 0; p <= cs.m; p += 2)
      CHECK(rep.piece_norm[std::size_t(p)] <= 1e-8 * std::max(1.0, gn));
    // The odd pieces carry all of the content.
    double odd = 0.0;
    for (int p = 1; p <= cs.m; p += 2) odd = std::max(odd, rep.piece_norm[std::size_t(p)]);
    CHECK(odd > 1e-3);
  }
}

TEST_CASE("weighted transforms ignore Kronecker lifts on unit-speed rays") {
  PhantomSpec spec;
  spec.kind = "polynomial-bump";
  spec.dim = 2;
  spec.top_rank = 1;
  spec.nodes = 48;
  spec.support_radius = 0.8;
  spec.seed = 88;
  TensorBundle F = make_phantom(spec);
  const SymTensorField& base = F.part(1);

  // Lift the rank-1 field twice: contractions against a unit direction see
  // exactly the same values, so the weighted integrals agree to rounding.
  SymTensorField lifted(F.grid(), 3, base.support_radius());
  const std::int64_t total = F.grid().node_count();
  for (std::int64_t node = 0; node < total; ++node) {
    SymTensor t(1, 2);
    t[0] = base.node_data(node)[0];
    t[1] = base.node_data(node)[1];
    SymTensor up = i_delta_pow(t, 1);
    for (int c = 0; c < lifted.ncomp(); ++c) lifted.node_data(node)[c] = up[c];
  }
  for (const Ray& ray : random_unit_rays(2, 6, 321))
    for (int k = 0; k <= 2; ++k) {
      const double a = mrt_rank(base, ray, k);
      const double b = mrt_rank(lifted, ray, k);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("membership: constructed members pass, simple non-members fail") {
  std::vector<Ray> rays = random_unit_rays(2, 24, 777, 0.5);

  PhantomSpec spec;
  spec.kind = "kernel-member";
  spec.dim = 2;
  spec.top_rank = 3;
  spec.nodes = 48;
  spec.support_radius = 0.8;
  spec.seed = 41;
  TensorBundle F = make_phantom(spec);
  scale_bundle(F, 1.0 / bundle_norm(F));
  KernelReport rep = kernel_membership(F, rays);
  CHECK(rep.in_kernel_forward);
  CHECK(rep.in_kernel_reverse);
  CHECK(rep.in_kernel_top_only);
  CHECK(rep.agree);
  CHECK(rep.per_k_residual.size() == 4);
  for (double r : rep.per_k_residual) CHECK(r <= 1e-7);
  CHECK(rep.residual_even <= 1e-12);
  CHECK(rep.residual_odd <= 1e-12);

  // m = 1: the null space is trivial, so any nonzero bundle fails both ways.
  spec.kind = "polynomial-bump";
  spec.top_rank = 1;
  TensorBundle F1 = make_phantom(spec);
  scale_bundle(F1, 1.0 / bundle_norm(F1));
  KernelReport rep1 = kernel_membership(F1, rays);
  CHECK_FALSE(rep1.in_kernel_forward);
  CHECK_FALSE(rep1.in_kernel_reverse);
  CHECK(rep1.agree);

  // The zero bundle is a member with exactly zero residuals.
  TensorBundle Z(std::vector<SymTensorField>{SymTensorField(F.grid(), 0, 0.8),
                                             SymTensorField(F.grid(), 1, 0.8),
                                             SymTensorField(F.grid(), 2, 0.8)});
  KernelReport repz = kernel_membership(Z, rays);
  CHECK(repz.in_kernel_forward);
  CHECK(repz.in_kernel_reverse);
  CHECK(repz.agree);
  for (double r : repz.per_k_residual) CHECK(r == 0.0);
  CHECK(repz.residual_even == 0.0);
  CHECK(repz.residual_odd == 0.0);

  CHECK_THROWS_AS(kernel_membership(F, std::vector<Ray>{}), std::invalid_argument);
}

TEST_CASE("fifty bundles round-trip membership with zero verdict disagreements") {
  int disagreements = 0;
  int wrong_verdicts = 0;
  for (int i = 0; i < 50; ++i) {
    const bool member = i % 2 == 0;
    PhantomSpec spec;
    spec.kind = "kernel-member";
    spec.dim = 2 + (i % 4 < 2 ? 0 : 1);
    spec.top_rank = 2 + (i % 3);
    spec.nodes = spec.dim == 2 ? 40 : 20;
    spec.support_radius = 0.7;
    spec.seed = 9000 + std::uint64_t(i);
    TensorBundle F = make_phantom(spec);

    if (!member) {
      // Push the top rank off the characterization by a smooth perturbation
      // far above the decision tolerance.
      Rng rng(spec.seed * 7 + 1);
      SymTensor dir = random_tensor(spec.top_rank, spec.dim, rng);
      auto bump = random_profile(rng, spec.dim, spec.support_radius);
      SymTensorField& top = F.part(spec.top_rank);
      const GridSpec& grid = F.grid();
      std::array<int, kMaxDim> idx{};
      for (std::int64_t node = 0; node < grid.node_count(); ++node) {
        const double amp = 0.1 * bump(grid.node_pos(idx));
        double* d = top.node_data(node);
        for (int c = 0; c < top.ncomp(); ++c) d[c] += amp * dir[c];
        for (int a = grid.dim - 1; a >= 0; --a) {
          if (++idx[std::size_t(a)] < grid.counts[std::size_t(a)]) break;
          idx[std::size_t(a)] = 0;
        }
      }
      top.enforce_support();
    }
    scale_bundle(F, 1.0 / bundle_norm(F));

    std::vector<Ray> rays = random_unit_rays(spec.dim, 40, 100 + std::uint64_t(i), 0.5);
    KernelReport rep = kernel_membership(F, rays, 1e-6);
    if (rep.in_kernel_forward != rep.in_kernel_reverse) ++disagreements;
    if (rep.in_kernel_top_only != rep.in_kernel_forward) ++disagreements;
    if (rep.in_kernel_forward != member) ++wrong_verdicts;
  }
  CHECK(disagreements == 0);
  CHECK(wrong_verdicts == 0);
}

TEST_CASE("slices of a membership bundle satisfy the moment conditions") {
  PhantomSpec spec;
  spec.kind = "kernel-member";
  spec.dim = 2;
  spec.top_rank = 2;
  spec.nodes = 96;
  spec.support_radius = 0.6;
  spec.seed = 300;
  TensorBundle F = make_phantom(spec);

  // The moment conditions act rank by rank through the same contraction the
  // transforms use; for a member bundle the alpha <= rank residuals summed
  // across ranks cancel. Here each individual i_delta-built top rank is
  // already annihilated pointwise, giving small per-rank residuals for the
  // lifted content. This exercises from_field sampling on gridded data.
  SliceSpec sl;
  sl.dim = 2;
  sl.axis = 0;
  sl.slice_coord = 0.1;
  sl.center = Vec{};
  sl.center[1] = 1.5;  // outside the unit support ball
  sl.r_max = 2.5;      // lines must traverse the whole support
  sl.r_nodes = 401;
  sl.thetas = make_theta_grid(1, 0);

  // Direct check: a pure i_delta lift sampled from grid data still has tiny
  // residuals (interpolation error only, the contraction kills it pointwise).
  SymTensorField lifted(F.grid(), 2, F.part(0).support_radius());
  for (std::int64_t node = 0; node < F.grid().node_count(); ++node) {
    SymTensor s(0, 2);
    s[0] = F.part(0).node_data(node)[0];
    SymTensor up = i_delta(s);
    for (int c = 0; c < 3; ++c) lifted.node_data(node)[c] = up[c];
  }
  SliceField slice = SliceField::from_field(lifted, sl);
  MomentConditionReport rep = moment_conditions(slice);
  CHECK(rep.max_abs <= 1e-10);
}
