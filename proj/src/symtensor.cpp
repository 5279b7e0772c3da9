#include "mrt/symtensor.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace mrt {

namespace {

void enumerate_rec(int rank, int dim, int pos, int minAxis, MultiIndex& cur,
                   std::vector<MultiIndex>& out) {
  if (pos == rank) {
    out.push_back(cur);
    return;
  }
  for (int a = minAxis; a < dim; ++a) {
    cur.ix[size_t(pos)] = std::uint8_t(a);
    enumerate_rec(rank, dim, pos + 1, a, cur, out);
  }
}

}  // namespace

int ComponentSpace::offset(const MultiIndex& m) const {
  // Rank the non-decreasing tuple lexicographically via the bijection with
  // strictly increasing tuples c_i = t_i + i over {0..dim+rank-2}.
  if (m.rank != rank) throw std::invalid_argument("ComponentSpace::offset: rank mismatch");
  int N = dim + rank - 1;
  int r = 0;
  int prev = -1;
  for (int i = 0; i < rank; ++i) {
    int ci = int(m.ix[size_t(i)]) + i;
    if (ci >= N || int(m.ix[size_t(i)]) >= dim)
      throw std::invalid_argument("ComponentSpace::offset: axis out of range");
    for (int v = prev + 1; v < ci; ++v) r += int(binom(N - 1 - v, rank - 1 - i));
    prev = ci;
  }
  return r;
}

const ComponentSpace& component_space(int rank, int dim) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<ComponentSpace>> cache;
  if (rank < 0 || rank > kMaxRank) throw std::invalid_argument("component_space: rank out of range");
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("component_space: dim out of range");
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{rank, dim}];
  if (!slot) {
    auto cs = std::make_unique<ComponentSpace>();
    cs->rank = rank;
    cs->dim = dim;
    MultiIndex cur;
    cur.rank = std::uint8_t(rank);
    enumerate_rec(rank, dim, 0, 0, cur, cs->index);
    cs->size = int(cs->index.size());
    cs->mult.reserve(cs->index.size());
    for (const auto& m : cs->index) cs->mult.push_back(multiplicity(m));
    slot = std::move(cs);
  }
  return *slot;
}

int component_count(int rank, int dim) { return int(binom(rank + dim - 1, rank)); }

SymTensor kronecker_delta(int dim) {
  SymTensor d(2, dim);
  for (int a = 0; a < dim; ++a) d.at(MultiIndex{a, a}) = 1.0;
  return d;
}

SymTensor symmetrize(const DenseTensor& t) {
  SymTensor out(t.rank, t.dim);
  const ComponentSpace& cs = out.space();
  std::array<int, kMaxRank> arr{};
  for (int c = 0; c < cs.size; ++c) {
    const MultiIndex& m = cs.index[size_t(c)];
    for (int i = 0; i < t.rank; ++i) arr[size_t(i)] = m[i];
    // Average over the distinct arrangements of the tuple; every permutation
    // of positions visits each arrangement equally often, so this equals the
    // average over all rank! permutations.
    double acc = 0.0;
    double distinct = 0.0;
    do {
      acc += t.at(arr.data());
      distinct += 1.0;
    } while (std::next_permutation(arr.begin(), arr.begin() + t.rank));
    out[c] = acc / distinct;
  }
  return out;
}

DenseTensor dense_from_sym(const SymTensor& t) {
  DenseTensor d(t.rank(), t.dim());
  const int n = t.dim();
  std::array<int, kMaxRank> idx{};
  std::size_t total = d.v.size();
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t rem = f;
    for (int i = t.rank() - 1; i >= 0; --i) {
      idx[size_t(i)] = int(rem % std::size_t(n));
      rem /= std::size_t(n);
    }
    MultiIndex m;
    m.rank = std::uint8_t(t.rank());
    for (int i = 0; i < t.rank(); ++i) m.ix[size_t(i)] = std::uint8_t(idx[size_t(i)]);
    m.canonicalize();
    d.v[f] = t.at(m);
  }
  return d;
}

SymTensor i_delta(const SymTensor& f) {
  const int m = f.rank();
  SymTensor out(m + 2, f.dim());
  const ComponentSpace& cs = out.space();
  // sigma(f (x) delta) collapses to an average over which unordered pair of
  // slots carries the delta: (m+2 choose 2)^{-1} sum_{a<b} delta_{j_a j_b} f_rest.
  const double w = 1.0 / binom(m + 2, 2);
  for (int c = 0; c < cs.size; ++c) {
    const MultiIndex& J = cs.index[size_t(c)];
    double acc = 0.0;
    for (int a = 0; a < m + 2; ++a) {
      for (int b = a + 1; b < m + 2; ++b) {
        if (J[a] != J[b]) continue;
        MultiIndex rest;
        rest.rank = std::uint8_t(m);
        int p = 0;
        for (int i = 0; i < m + 2; ++i)
          if (i != a && i != b) rest.ix[size_t(p++)] = std::uint8_t(J[i]);
        acc += f.at(rest);  // rest is already sorted (subsequence of sorted J)
      }
    }
    out[c] = w * acc;
  }
  return out;
}

SymTensor i_delta_pow(const SymTensor& f, int p) {
  if (p < 0) throw std::invalid_argument("i_delta_pow: negative power");
  SymTensor out = f;
  for (int i = 0; i < p; ++i) out = i_delta(out);
  return out;
}

SymTensor j_delta(const SymTensor& f) {
  const int m = f.rank();
  if (m < 2) throw std::invalid_argument("j_delta: rank must be at least 2");
  SymTensor out(m - 2, f.dim());
  const ComponentSpace& cs = out.space();
  for (int c = 0; c < cs.size; ++c) {
    const MultiIndex& J = cs.index[size_t(c)];
    double acc = 0.0;
    for (int k = 0; k < f.dim(); ++k) {
      MultiIndex full;
      full.rank = std::uint8_t(m);
      for (int i = 0; i < m - 2; ++i) full.ix[size_t(i)] = J.ix[size_t(i)];
      full.ix[size_t(m - 2)] = std::uint8_t(k);
      full.ix[size_t(m - 1)] = std::uint8_t(k);
      full.canonicalize();
      acc += f.at(full);
    }
    out[c] = acc;
  }
  return out;
}

double inner(const SymTensor& u, const SymTensor& w) {
  if (u.rank() != w.rank() || u.dim() != w.dim())
    throw std::invalid_argument("inner: shape mismatch");
  const ComponentSpace& cs = u.space();
  double s = 0.0;
  for (int c = 0; c < cs.size; ++c) s += cs.mult[size_t(c)] * u[c] * w[c];
  return s;
}

double norm(const SymTensor& u) { return std::sqrt(inner(u, u)); }

SymTensor add(const SymTensor& a, const SymTensor& b) { return axpy(1.0, a, b); }

SymTensor axpy(double alpha, const SymTensor& x, const SymTensor& y) {
  if (x.rank() != y.rank() || x.dim() != y.dim()) throw std::invalid_argument("axpy: shape mismatch");
  SymTensor out = y;
  for (int c = 0; c < x.size(); ++c) out[c] += alpha * x[c];
  return out;
}

SymTensor scale(const SymTensor& a, double s) {
  SymTensor out = a;
  for (int c = 0; c < out.size(); ++c) out[c] *= s;
  return out;
}

TraceSplit decompose(const SymTensor& f) {
  const int m = f.rank();
  if (m < 2) throw std::invalid_argument("decompose: rank must be at least 2");
  const int n = f.dim();
  const ComponentSpace& vs = component_space(m - 2, n);
  // Normal system in the multiplicity-weighted inner product:
  // <i_delta e_c, i_delta e_d> v_d = <f, i_delta e_c>; SPD because i_delta is
  // injective, so plain Cholesky is safe.
  Matrix A(vs.size, vs.size);
  std::vector<double> rhs(size_t(vs.size), 0.0);
  std::vector<SymTensor> lifted;
  lifted.reserve(size_t(vs.size));
  for (int c = 0; c < vs.size; ++c) {
    SymTensor e(m - 2, n);
    e[c] = 1.0;
    lifted.push_back(i_delta(e));
  }
  for (int c = 0; c < vs.size; ++c) {
    rhs[size_t(c)] = inner(f, lifted[size_t(c)]);
    for (int d = c; d < vs.size; ++d) {
      double a = inner(lifted[size_t(c)], lifted[size_t(d)]);
      A(c, d) = a;
      A(d, c) = a;
    }
  }
  std::vector<double> vflat = cholesky_solve(A, rhs);
  TraceSplit out;
  out.v = SymTensor(m - 2, n);
  for (int c = 0; c < vs.size; ++c) out.v[c] = vflat[size_t(c)];
  out.g = axpy(-1.0, i_delta(out.v), f);
  return out;
}

IsotropySplit isotropy_split(const SymTensor& f, double tol) {
  IsotropySplit out;
  out.core = f;
  const double ref = norm(f);
  if (ref == 0.0) {
    // zero tensor: fully isotropic down to the lowest representable core
    while (out.core.rank() >= 2) {
      out.core = SymTensor(out.core.rank() - 2, f.dim());
      ++out.level;
    }
    return out;
  }
  while (out.core.rank() >= 2) {
    TraceSplit ts = decompose(out.core);
    if (norm(ts.g) > tol * ref) break;
    out.core = ts.v;
    ++out.level;
  }
  return out;
}

double contract_full(const SymTensor& f, const Vec& xi) {
  const ComponentSpace& cs = f.space();
  double s = 0.0;
  for (int c = 0; c < cs.size; ++c) {
    double p = 1.0;
    const MultiIndex& m = cs.index[size_t(c)];
    for (int i = 0; i < f.rank(); ++i) p *= xi[size_t(m[i])];
    s += cs.mult[size_t(c)] * f[c] * p;
  }
  return s;
}

std::complex<double> contract_full(const SymTensor& f,
                                   const std::array<std::complex<double>, kMaxDim>& zeta) {
  const ComponentSpace& cs = f.space();
  std::complex<double> s = 0.0;
  for (int c = 0; c < cs.size; ++c) {
    std::complex<double> p = 1.0;
    const MultiIndex& m = cs.index[size_t(c)];
    for (int i = 0; i < f.rank(); ++i) p *= zeta[size_t(m[i])];
    s += cs.mult[size_t(c)] * f[c] * p;
  }
  return s;
}

SymTensor fix_last(const SymTensor& f, int axis) {
  const int m = f.rank();
  if (m < 1) throw std::invalid_argument("fix_last: rank must be at least 1");
  if (axis < 0 || axis >= f.dim()) throw std::invalid_argument("fix_last: axis out of range");
  SymTensor out(m - 1, f.dim());
  const ComponentSpace& cs = out.space();
  for (int c = 0; c < cs.size; ++c) {
    MultiIndex full;
    full.rank = std::uint8_t(m);
    for (int i = 0; i < m - 1; ++i) full.ix[size_t(i)] = cs.index[size_t(c)].ix[size_t(i)];
    full.ix[size_t(m - 1)] = std::uint8_t(axis);
    full.canonicalize();
    out[c] = f.at(full);
  }
  return out;
}

}  // namespace mrt
