#pragma once

// Axis-aligned rectangle algebra on the unit cube [0,1]^J and grid
// partitions that tile a family of rectangular generator sets.
//
// Rectangles are closed. Members of a RectUnion may share boundaries; since
// every distribution used with these sets is continuous, boundary overlaps
// never carry mass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtebounds {

/// Breakpoints closer than this collapse to a single value.
inline constexpr double kBreakpointTol = 1e-12;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by cells_within when a cell's interior meets both the set and its
/// complement, i.e. the set is not generated by the partition.
class StraddlingCellError : public std::runtime_error {
 public:
  explicit StraddlingCellError(const std::string& what) : std::runtime_error(what) {}
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

class Rect {
 public:
  Rect() = default;

  explicit Rect(std::vector<Interval> sides) : sides_(std::move(sides)) {
    if (sides_.empty()) throw GeometryError("Rect: dimension must be positive");
    for (const auto& s : sides_) {
      if (!(s.lo >= 0.0 && s.lo <= s.hi && s.hi <= 1.0)) {
        std::ostringstream os;
        os << "Rect: side [" << s.lo << ", " << s.hi << "] is not a sub-interval of [0,1]";
        throw GeometryError(os.str());
      }
    }
  }

  static Rect unit(std::size_t dim) { return Rect(std::vector<Interval>(dim, Interval{0.0, 1.0})); }

  std::size_t dim() const { return sides_.size(); }
  const Interval& operator[](std::size_t j) const { return sides_[j]; }
  std::span<const Interval> sides() const { return sides_; }

  double volume() const {
    double v = 1.0;
    for (const auto& s : sides_) v *= s.length();
    return v;
  }

  bool degenerate() const {
    return std::any_of(sides_.begin(), sides_.end(), [](const Interval& s) { return s.length() <= 0.0; });
  }

  /// Closed intersection; nullopt when the rectangles are disjoint.
  std::optional<Rect> intersect(const Rect& other) const {
    if (other.dim() != dim()) throw GeometryError("Rect::intersect: dimension mismatch");
    std::vector<Interval> out(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      out[j].lo = std::max(sides_[j].lo, other.sides_[j].lo);
      out[j].hi = std::min(sides_[j].hi, other.sides_[j].hi);
      if (out[j].lo > out[j].hi) return std::nullopt;
    }
    return Rect(std::move(out));
  }

  bool contains_point(std::span<const double> u) const {
    for (std::size_t j = 0; j < dim(); ++j) {
      if (u[j] < sides_[j].lo || u[j] > sides_[j].hi) return false;
    }
    return true;
  }

  friend bool operator==(const Rect&, const Rect&) = default;

 private:
  std::vector<Interval> sides_;
};

inline std::ostream& operator<<(std::ostream& os, const Rect& r) {
  for (std::size_t j = 0; j < r.dim(); ++j) {
    if (j) os << "x";
    os << "[" << r[j].lo << "," << r[j].hi << "]";
  }
  return os;
}

class RectUnion {
 public:
  explicit RectUnion(std::size_t dim = 1) : dim_(dim) {
    if (dim == 0) throw GeometryError("RectUnion: dimension must be positive");
  }

  RectUnion(std::size_t dim, std::vector<Rect> rects) : RectUnion(dim) {
    for (auto& r : rects) add(std::move(r));
  }

  static RectUnion full(std::size_t dim) { return RectUnion(dim, {Rect::unit(dim)}); }

  void add(Rect r) {
    if (r.dim() != dim_) throw GeometryError("RectUnion::add: dimension mismatch");
    rects_.push_back(std::move(r));
  }

  std::size_t dim() const { return dim_; }
  std::span<const Rect> rects() const { return rects_; }
  bool empty() const { return rects_.empty(); }
  std::size_t size() const { return rects_.size(); }

  /// Lebesgue volume, assuming members have disjoint interiors.
  double volume() const {
    double v = 0.0;
    for (const auto& r : rects_) v += r.volume();
    return v;
  }

  bool contains_point(std::span<const double> u) const {
    return std::any_of(rects_.begin(), rects_.end(), [&](const Rect& r) { return r.contains_point(u); });
  }

  friend bool operator==(const RectUnion&, const RectUnion&) = default;

 private:
  std::size_t dim_;
  std::vector<Rect> rects_;
};

/// Pairwise intersection of members; empty intersections are dropped,
/// measure-zero slivers are kept.
inline RectUnion intersect(const RectUnion& a, const RectUnion& b) {
  if (a.dim() != b.dim()) throw GeometryError("intersect: dimension mismatch");
  RectUnion out(a.dim());
  for (const auto& ra : a.rects()) {
    for (const auto& rb : b.rects()) {
      if (auto r = ra.intersect(rb)) out.add(std::move(*r));
    }
  }
  return out;
}

/// Sorted, deduplicated coordinates with 0 and 1 always present.
inline std::vector<double> merge_breakpoints(std::vector<double> values) {
  values.push_back(0.0);
  values.push_back(1.0);
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  for (double v : values) {
    if (out.empty() || v - out.back() > kBreakpointTol) out.push_back(v);
  }
  // Values within tolerance of 1 collapse onto the kept neighbour; pin it.
  out.back() = 1.0;
  return out;
}

struct PartitionOptions {
  std::size_t max_cells = 1'000'000;
};

/// Grid partition of [0,1]^J: the Cartesian product of the intervals between
/// adjacent breakpoints in each dimension. Cells are numbered in row-major
/// order of their multi-index (last dimension fastest).
class Partition {
 public:
  Partition(std::vector<std::vector<double>> breakpoints, std::vector<RectUnion> generators,
            const PartitionOptions& opt = {})
      : breakpoints_(std::move(breakpoints)), generators_(std::move(generators)) {
    if (breakpoints_.empty()) throw GeometryError("Partition: dimension must be positive");
    std::size_t cells = 1;
    for (const auto& bp : breakpoints_) {
      if (bp.size() < 2 || bp.front() != 0.0 || bp.back() != 1.0 || !std::is_sorted(bp.begin(), bp.end())) {
        throw GeometryError("Partition: breakpoints must be sorted and span [0,1]");
      }
      const std::size_t n = bp.size() - 1;
      if (cells > opt.max_cells / n) {
        throw GeometryError("Partition: cell count exceeds the cap of " + std::to_string(opt.max_cells));
      }
      cells *= n;
    }
    for (const auto& g : generators_) {
      if (g.dim() != dim()) throw GeometryError("Partition: generator dimension mismatch");
    }
    cell_count_ = cells;
    strides_.assign(dim(), 1);
    for (std::size_t j = dim() - 1; j-- > 0;) strides_[j] = strides_[j + 1] * intervals(j + 1);
  }

  std::size_t dim() const { return breakpoints_.size(); }
  std::size_t size() const { return cell_count_; }
  std::size_t intervals(std::size_t j) const { return breakpoints_[j].size() - 1; }
  std::span<const double> breakpoints(std::size_t j) const { return breakpoints_[j]; }
  std::span<const RectUnion> generators() const { return generators_; }

  std::vector<std::size_t> multi_index(std::size_t cell) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      idx[j] = cell / strides_[j];
      cell %= strides_[j];
    }
    return idx;
  }

  std::size_t interval_index(std::size_t cell, std::size_t j) const { return (cell / strides_[j]) % intervals(j); }

  std::size_t cell_index(std::span<const std::size_t> idx) const {
    std::size_t k = 0;
    for (std::size_t j = 0; j < dim(); ++j) k += idx[j] * strides_[j];
    return k;
  }

  std::size_t stride(std::size_t j) const { return strides_[j]; }

  Interval interval(std::size_t j, std::size_t i) const { return {breakpoints_[j][i], breakpoints_[j][i + 1]}; }

  Rect cell(std::size_t k) const {
    std::vector<Interval> sides(dim());
    for (std::size_t j = 0; j < dim(); ++j) sides[j] = interval(j, interval_index(k, j));
    return Rect(std::move(sides));
  }

  /// Index of the breakpoint within tolerance of v, if any.
  std::optional<std::size_t> find_breakpoint(std::size_t j, double v) const {
    const auto& bp = breakpoints_[j];
    auto it = std::lower_bound(bp.begin(), bp.end(), v - kBreakpointTol);
    if (it != bp.end() && std::abs(*it - v) <= kBreakpointTol) return static_cast<std::size_t>(it - bp.begin());
    return std::nullopt;
  }

  /// Same generators, with every interval bisected `rounds` times. The
  /// added breakpoints are redundant for the generators.
  Partition refined(int rounds) const {
    auto bps = breakpoints_;
    for (int r = 0; r < rounds; ++r) {
      for (auto& bp : bps) {
        std::vector<double> next;
        for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
          next.push_back(bp[i]);
          next.push_back(0.5 * (bp[i] + bp[i + 1]));
        }
        next.push_back(1.0);
        bp = std::move(next);
      }
    }
    return Partition(std::move(bps), generators_);
  }

 private:
  std::vector<std::vector<double>> breakpoints_;
  std::vector<RectUnion> generators_;
  std::vector<std::size_t> strides_;
  std::size_t cell_count_ = 0;
};

/// Grid partition whose breakpoints in each dimension are all endpoints of
/// the generators' rectangles (plus 0 and 1).
inline Partition build_partition(std::span<const RectUnion> generators, std::size_t dim,
                                 const PartitionOptions& opt = {}) {
  if (dim == 0) throw GeometryError("build_partition: dimension must be positive");
  std::vector<std::vector<double>> raw(dim);
  for (const auto& g : generators) {
    if (g.dim() != dim) throw GeometryError("build_partition: generator dimension mismatch");
    for (const auto& r : g.rects()) {
      for (std::size_t j = 0; j < dim; ++j) {
        raw[j].push_back(r[j].lo);
        raw[j].push_back(r[j].hi);
      }
    }
  }
  std::vector<std::vector<double>> bps;
  bps.reserve(dim);
  for (auto& v : raw) bps.push_back(merge_breakpoints(std::move(v)));
  return Partition(std::move(bps), std::vector<RectUnion>(generators.begin(), generators.end()), opt);
}

/// Cells whose union is s. Degenerate members of s contribute nothing.
inline std::vector<std::size_t> cells_within(const Partition& p, const RectUnion& s) {
  if (s.dim() != p.dim()) throw GeometryError("cells_within: dimension mismatch");
  std::vector<std::size_t> out;
  const std::size_t J = p.dim();
  std::vector<std::size_t> lo(J), hi(J);
  for (const auto& r : s.rects()) {
    if (r.degenerate()) continue;
    bool empty_box = false;
    for (std::size_t j = 0; j < J; ++j) {
      auto a = p.find_breakpoint(j, r[j].lo);
      auto b = p.find_breakpoint(j, r[j].hi);
      if (!a || !b) {
        std::ostringstream os;
        os << "cells_within: rectangle " << r << " has an endpoint in dimension " << j + 1
           << " that is not a partition breakpoint";
        throw StraddlingCellError(os.str());
      }
      lo[j] = *a;
      hi[j] = *b;
      empty_box = empty_box || hi[j] <= lo[j];
    }
    if (empty_box) continue;
    // Odometer over the index box [lo, hi).
    std::vector<std::size_t> idx = lo;
    bool done = false;
    while (!done) {
      out.push_back(p.cell_index(idx));
      std::size_t j = J;
      while (true) {
        if (j == 0) {
          done = true;
          break;
        }
        --j;
        if (++idx[j] < hi[j]) break;
        idx[j] = lo[j];
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Unit cube minus a. Built from the grid spanned by a's endpoints: cells
/// not covered by a member of a, so the result has disjoint interiors.
inline RectUnion complement(const RectUnion& a) {
  const std::size_t J = a.dim();
  if (a.empty()) return RectUnion::full(J);
  std::vector<RectUnion> gens{a};
  Partition grid = build_partition(gens, J);
  std::vector<char> covered(grid.size(), 0);
  for (std::size_t k : cells_within(grid, a)) covered[k] = 1;
  RectUnion out(J);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!covered[k]) out.add(grid.cell(k));
  }
  return out;
}

struct PartitionReport {
  bool coverage = true;
  bool disjoint = true;
  bool projections = true;
  bool tiling = true;
  std::string detail;

  bool ok() const { return coverage && disjoint && projections && tiling; }
};

/// Checks the partition requirements: coverage of the unit cube, disjoint
/// interiors, per-dimension projections equal or interior-disjoint, and exact
/// tiling of every registered generator. Works from the explicit cell list,
/// not from the grid structure.
inline PartitionReport validate_partition(const Partition& p, double tol = 1e-12) {
  PartitionReport rep;
  std::vector<Rect> cells;
  cells.reserve(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) cells.push_back(p.cell(k));

  double total = 0.0;
  for (const auto& c : cells) total += c.volume();
  if (std::abs(total - 1.0) > tol) {
    rep.coverage = false;
    rep.detail += "cell volumes sum to " + std::to_string(total) + "; ";
  }

  const std::size_t J = p.dim();
  for (std::size_t a = 0; a < cells.size(); ++a) {
    for (std::size_t b = a + 1; b < cells.size(); ++b) {
      bool interior_overlap = true;
      for (std::size_t j = 0; j < J; ++j) {
        const auto& ia = cells[a][j];
        const auto& ib = cells[b][j];
        const double overlap = std::min(ia.hi, ib.hi) - std::max(ia.lo, ib.lo);
        const bool same = std::abs(ia.lo - ib.lo) <= tol && std::abs(ia.hi - ib.hi) <= tol;
        if (overlap <= tol) interior_overlap = false;
        if (!same && overlap > tol && rep.projections) {
          rep.projections = false;
          rep.detail += "cells " + std::to_string(a) + " and " + std::to_string(b) +
                        " have partially overlapping projections in dimension " + std::to_string(j + 1) + "; ";
        }
      }
      if (interior_overlap && rep.disjoint) {
        rep.disjoint = false;
        rep.detail += "cells " + std::to_string(a) + " and " + std::to_string(b) + " overlap; ";
      }
    }
  }

  for (std::size_t g = 0; g < p.generators().size(); ++g) {
    const auto& gen = p.generators()[g];
    try {
      double vol = 0.0;
      for (std::size_t k : cells_within(p, gen)) vol += cells[k].volume();
      // Generator volume over its non-degenerate members, measured on the
      // union so overlapping members are not double counted.
      double target = 0.0;
      std::vector<RectUnion> single{gen};
      Partition own = build_partition(single, J);
      for (std::size_t k : cells_within(own, gen)) target += own.cell(k).volume();
      if (std::abs(vol - target) > tol) {
        rep.tiling = false;
        rep.detail += "generator " + std::to_string(g) + " is not tiled exactly; ";
      }
    } catch (const StraddlingCellError& e) {
      rep.tiling = false;
      rep.detail += "generator " + std::to_string(g) + ": " + e.what() + "; ";
    }
  }
  return rep;
}

}  // namespace mtebounds
