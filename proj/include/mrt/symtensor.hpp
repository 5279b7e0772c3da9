#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "mrt/common.hpp"

namespace mrt {

// A multi-index is kept in canonical (non-decreasing) order; a symmetric
// rank-m tensor over dim-n then has binom(m+n-1, m) distinct components, and
// full contractions weight each one by the number of its rearrangements,
// multiplicity = m! / prod(count of each axis)!.
struct MultiIndex {
  std::array<std::uint8_t, kMaxRank> ix{};
  std::uint8_t rank = 0;

  MultiIndex() = default;
  MultiIndex(std::initializer_list<int> list) {
    if (list.size() > kMaxRank) throw std::invalid_argument("MultiIndex: rank too large");
    rank = std::uint8_t(list.size());
    int p = 0;
    for (int v : list) ix[size_t(p++)] = std::uint8_t(v);
    canonicalize();
  }
  void canonicalize() { std::sort(ix.begin(), ix.begin() + rank); }
  int operator[](int i) const { return ix[size_t(i)]; }
  bool operator==(const MultiIndex& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i)
      if (ix[size_t(i)] != o.ix[size_t(i)]) return false;
    return true;
  }
};

inline double multiplicity(const MultiIndex& m) {
  double d = 1.0;
  int i = 0;
  while (i < m.rank) {
    int j = i;
    while (j < m.rank && m.ix[size_t(j)] == m.ix[size_t(i)]) ++j;
    d *= factorial(j - i);
    i = j;
  }
  return factorial(m.rank) / d;
}

// Enumeration tables for the canonical component basis of one (rank, dim).
// Built once and cached; lookups afterwards are lock-free reads.
struct ComponentSpace {
  int rank = 0, dim = 0, size = 0;
  std::vector<MultiIndex> index;       // offset -> canonical tuple
  std::vector<double> mult;            // offset -> multiplicity
  int offset(const MultiIndex& m) const;
};

const ComponentSpace& component_space(int rank, int dim);

int component_count(int rank, int dim);

// Dense (not necessarily symmetric) tensor, row-major over n^m entries.
// Used as the input of symmetrize() and as the brute-force mirror in tests.
struct DenseTensor {
  int rank = 0, dim = 0;
  std::vector<double> v;

  DenseTensor() = default;
  DenseTensor(int r, int d) : rank(r), dim(d) {
    std::size_t n = 1;
    for (int i = 0; i < r; ++i) n *= std::size_t(d);
    v.assign(n, 0.0);
  }
  std::size_t flat(const int* idx) const {
    std::size_t f = 0;
    for (int i = 0; i < rank; ++i) f = f * std::size_t(dim) + std::size_t(idx[i]);
    return f;
  }
  double& at(const int* idx) { return v[flat(idx)]; }
  double at(const int* idx) const { return v[flat(idx)]; }
};

class SymTensor {
public:
  SymTensor() = default;
  SymTensor(int rank, int dim)
      : rank_(rank), dim_(dim), c_(size_t(component_count(rank, dim)), 0.0) {
    if (rank < 0 || rank > kMaxRank) throw std::invalid_argument("SymTensor: rank out of range");
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("SymTensor: dim out of range");
  }

  int rank() const { return rank_; }
  int dim() const { return dim_; }
  int size() const { return int(c_.size()); }
  const ComponentSpace& space() const { return component_space(rank_, dim_); }

  double& operator[](int offset) { return c_[size_t(offset)]; }
  double operator[](int offset) const { return c_[size_t(offset)]; }
  double* data() { return c_.data(); }
  const double* data() const { return c_.data(); }

  double at(MultiIndex m) const {
    m.canonicalize();
    return c_[size_t(space().offset(m))];
  }
  double& at(MultiIndex m) {
    m.canonicalize();
    return c_[size_t(space().offset(m))];
  }
  double operator()(std::initializer_list<int> idx) const { return at(MultiIndex(idx)); }

private:
  int rank_ = 0, dim_ = 1;
  std::vector<double> c_{0.0};
};

// --- construction helpers ---------------------------------------------------

SymTensor kronecker_delta(int dim);                       // rank-2 identity
SymTensor symmetrize(const DenseTensor& t);               // average over all permutations
DenseTensor dense_from_sym(const SymTensor& t);

// --- algebra ----------------------------------------------------------------

// i_delta: symmetrized multiplication by the Kronecker tensor, rank m -> m+2.
SymTensor i_delta(const SymTensor& f);
SymTensor i_delta_pow(const SymTensor& f, int p);

// j_delta: trace over the last two slots, rank m -> m-2.
SymTensor j_delta(const SymTensor& f);

// Full m-fold contraction sum (all n^m index tuples), written over canonical
// components with multiplicities. Makes i_delta and j_delta exact adjoints.
double inner(const SymTensor& u, const SymTensor& w);
double norm(const SymTensor& u);

SymTensor add(const SymTensor& a, const SymTensor& b);
SymTensor axpy(double alpha, const SymTensor& x, const SymTensor& y);  // alpha*x + y
SymTensor scale(const SymTensor& a, double s);

// Orthogonal splitting f = g + i_delta(v) with j_delta(g) = 0, solving the
// SPD system j_delta(i_delta(v)) = j_delta(f) for v.
struct TraceSplit {
  SymTensor g;  // trace-free part
  SymTensor v;  // potential of the isotropic part
};
TraceSplit decompose(const SymTensor& f);

// Largest l with f = i_delta^l(core): peel while the trace-free part of the
// current tensor stays below tol * |f|.
struct IsotropySplit {
  int level = 0;
  SymTensor core;
};
IsotropySplit isotropy_split(const SymTensor& f, double tol = 1e-10);

// Full contraction with the m-th tensor power of a vector; the complex
// overload serves the null-vector (e1 + i e_r) machinery.
double contract_full(const SymTensor& f, const Vec& xi);
std::complex<double> contract_full(const SymTensor& f, const std::array<std::complex<double>, kMaxDim>& zeta);

// Fix one slot of a symmetric tensor to a given axis: rank m -> m-1.
SymTensor fix_last(const SymTensor& f, int axis);

}  // namespace mrt
