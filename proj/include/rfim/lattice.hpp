#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rfim {

/// A point of Z^d.
class Site {
 public:
  Site() = default;
  explicit Site(std::vector<int> coords) : coords_(std::move(coords)) {}
  Site(std::initializer_list<int> coords) : coords_(coords) {}

  [[nodiscard]] std::size_t dim() const noexcept { return coords_.size(); }
  [[nodiscard]] int operator[](std::size_t axis) const { return coords_[axis]; }
  [[nodiscard]] std::span<const int> coords() const noexcept { return coords_; }

  [[nodiscard]] Site shifted(std::size_t axis, int delta) const {
    Site s = *this;
    s.coords_[axis] += delta;
    return s;
  }

  // Lexicographic on coordinates.
  auto operator<=>(const Site&) const = default;

 private:
  std::vector<int> coords_;
};

// The 2d nearest neighbours of s, ordered coordinate-then-sign:
// (-e_0, +e_0, -e_1, +e_1, ...).
inline std::vector<Site> neighbors(const Site& s) {
  std::vector<Site> out;
  out.reserve(2 * s.dim());
  for (std::size_t a = 0; a < s.dim(); ++a) {
    out.push_back(s.shifted(a, -1));
    out.push_back(s.shifted(a, +1));
  }
  return out;
}

inline int linf_distance(const Site& a, const Site& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Exterior sites adjacent to a region, sorted lexicographically.
struct BoundarySet {
  std::vector<Site> sites;

  [[nodiscard]] std::size_t size() const noexcept { return sites.size(); }
  [[nodiscard]] bool contains(const Site& s) const {
    return std::binary_search(sites.begin(), sites.end(), s);
  }
};

/// Axis-aligned extent [lo, hi] (inclusive) of a box-shaped region.
struct BoxExtent {
  std::vector<int> lo;
  std::vector<int> hi;

  [[nodiscard]] int side(std::size_t axis) const { return hi[axis] - lo[axis] + 1; }
};

/// Finite, immutable subset of Z^d.
///
/// Sites are stored in lexicographic order; that order defines the index
/// used by every per-site array in the library. Neighbour lists, the bond
/// list and the exterior boundary are computed once at construction.
class LatticeRegion {
 public:
  using Bond = std::pair<std::size_t, std::size_t>;

  static LatticeRegion from_sites(std::vector<Site> sites) {
    if (sites.empty()) throw std::invalid_argument("LatticeRegion: empty site list");
    const std::size_t d = sites.front().dim();
    if (d == 0) throw std::invalid_argument("LatticeRegion: dimension must be >= 1");
    for (const auto& s : sites) {
      if (s.dim() != d) {
        throw std::invalid_argument("LatticeRegion: sites of mixed dimension");
      }
    }
    std::sort(sites.begin(), sites.end());
    if (std::adjacent_find(sites.begin(), sites.end()) != sites.end()) {
      throw std::invalid_argument("LatticeRegion: duplicate site");
    }
    return LatticeRegion(d, std::move(sites));
  }

  // All sites with lo[a] <= x[a] <= hi[a].
  static LatticeRegion from_extent(const std::vector<int>& lo, const std::vector<int>& hi) {
    if (lo.empty() || lo.size() != hi.size()) {
      throw std::invalid_argument("LatticeRegion: malformed extent");
    }
    std::size_t count = 1;
    for (std::size_t a = 0; a < lo.size(); ++a) {
      if (hi[a] < lo[a]) throw std::invalid_argument("LatticeRegion: empty extent");
      count *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
    }
    std::vector<Site> sites;
    sites.reserve(count);
    std::vector<int> x = lo;
    for (;;) {
      sites.emplace_back(x);
      std::size_t a = lo.size();
      while (a > 0) {
        --a;
        if (++x[a] <= hi[a]) break;
        x[a] = lo[a];
        if (a == 0) return LatticeRegion(lo.size(), std::move(sites));
      }
    }
  }

  // Cube of side 2k+1 centred at `center`.
  static LatticeRegion box(const Site& center, int k) {
    if (k < 0) throw std::invalid_argument("box_region: k must be nonnegative");
    std::vector<int> lo(center.coords().begin(), center.coords().end());
    std::vector<int> hi = lo;
    for (std::size_t a = 0; a < lo.size(); ++a) {
      lo[a] -= k;
      hi[a] += k;
    }
    return from_extent(lo, hi);
  }

  // Box [0, side)^d.
  static LatticeRegion cube(std::size_t d, int side) {
    if (side < 1) throw std::invalid_argument("cube: side must be >= 1");
    return from_extent(std::vector<int>(d, 0), std::vector<int>(d, side - 1));
  }

  [[nodiscard]] std::size_t dim() const noexcept { return d_; }
  [[nodiscard]] std::size_t size() const noexcept { return sites_.size(); }
  [[nodiscard]] const Site& site(std::size_t i) const { return sites_[i]; }
  [[nodiscard]] std::span<const Site> sites() const noexcept { return sites_; }

  [[nodiscard]] std::optional<std::size_t> index_of(const Site& s) const {
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
    if (it == sites_.end() || *it != s) return std::nullopt;
    return static_cast<std::size_t>(it - sites_.begin());
  }
  [[nodiscard]] bool contains(const Site& s) const { return index_of(s).has_value(); }

  // Unordered adjacent pairs (i < j) inside the region.
  [[nodiscard]] std::span<const Bond> bonds() const noexcept { return bonds_; }
  [[nodiscard]] std::span<const std::size_t> internal_neighbors(std::size_t i) const {
    return internal_[i];
  }
  // Indices into boundary().sites of the exterior neighbours of site i.
  [[nodiscard]] std::span<const std::size_t> boundary_neighbors(std::size_t i) const {
    return external_[i];
  }
  [[nodiscard]] const BoundarySet& boundary() const noexcept { return boundary_; }

  // Number of (region site, boundary site) adjacent pairs.
  [[nodiscard]] std::size_t boundary_bond_count() const noexcept {
    std::size_t c = 0;
    for (const auto& e : external_) c += e.size();
    return c;
  }

  // Present iff the region is exactly an axis-aligned box.
  [[nodiscard]] const std::optional<BoxExtent>& extent() const noexcept { return extent_; }

 private:
  LatticeRegion(std::size_t d, std::vector<Site> sorted_sites)
      : d_(d), sites_(std::move(sorted_sites)) {
    const std::size_t n = sites_.size();
    internal_.resize(n);
    external_.resize(n);
    std::vector<std::pair<Site, std::size_t>> outside;  // (site, owner)
    for (std::size_t i = 0; i < n; ++i) {
      for (const Site& nb : neighbors(sites_[i])) {
        if (auto j = index_of(nb)) {
          internal_[i].push_back(*j);
          if (i < *j) bonds_.emplace_back(i, *j);
        } else {
          outside.emplace_back(nb, i);
        }
      }
    }
    for (const auto& [s, owner] : outside) boundary_.sites.push_back(s);
    std::sort(boundary_.sites.begin(), boundary_.sites.end());
    boundary_.sites.erase(std::unique(boundary_.sites.begin(), boundary_.sites.end()),
                          boundary_.sites.end());
    for (const auto& [s, owner] : outside) {
      auto it = std::lower_bound(boundary_.sites.begin(), boundary_.sites.end(), s);
      external_[owner].push_back(static_cast<std::size_t>(it - boundary_.sites.begin()));
    }

    BoxExtent ext{std::vector<int>(sites_.front().coords().begin(), sites_.front().coords().end()),
                  std::vector<int>(sites_.front().coords().begin(), sites_.front().coords().end())};
    for (const auto& s : sites_) {
      for (std::size_t a = 0; a < d_; ++a) {
        ext.lo[a] = std::min(ext.lo[a], s[a]);
        ext.hi[a] = std::max(ext.hi[a], s[a]);
      }
    }
    std::size_t volume = 1;
    for (std::size_t a = 0; a < d_; ++a) volume *= static_cast<std::size_t>(ext.side(a));
    if (volume == n) extent_ = std::move(ext);
  }

  std::size_t d_;
  std::vector<Site> sites_;
  std::vector<std::vector<std::size_t>> internal_;
  std::vector<std::vector<std::size_t>> external_;
  std::vector<Bond> bonds_;
  BoundarySet boundary_;
  std::optional<BoxExtent> extent_;
};

inline LatticeRegion box_region(const Site& center, int k) {
  return LatticeRegion::box(center, k);
}

inline const BoundarySet& boundary(const LatticeRegion& region) { return region.boundary(); }

// Whether the box of radius k around site i fits inside the region.
inline bool box_contained(const LatticeRegion& region, const Site& center, int k) {
  if (const auto& ext = region.extent()) {
    for (std::size_t a = 0; a < region.dim(); ++a) {
      if (center[a] - k < ext->lo[a] || center[a] + k > ext->hi[a]) return false;
    }
    return true;
  }
  const LatticeRegion b = LatticeRegion::box(center, k);
  return std::all_of(b.sites().begin(), b.sites().end(),
                     [&](const Site& s) { return region.contains(s); });
}

/// Indices of the k-interior {i : box_region(i, k) is contained in region}.
inline std::vector<std::size_t> interior_indices(const LatticeRegion& region, int k) {
  if (k < 0) throw std::invalid_argument("interior: k must be nonnegative");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (box_contained(region, region.site(i), k)) out.push_back(i);
  }
  return out;
}

inline std::vector<Site> interior(const LatticeRegion& region, int k) {
  std::vector<Site> out;
  for (std::size_t i : interior_indices(region, k)) out.push_back(region.site(i));
  return out;
}

/// A sub-region together with the map from its indices to the host's.
struct SubRegion {
  LatticeRegion region;
  std::vector<std::size_t> host_index;  // sub index -> host index
  std::size_t center = 0;               // sub index of the defining site
};

// N = box_region(host.site(i), k) intersected with host.
inline SubRegion local_box(const LatticeRegion& host, std::size_t i, int k) {
  const Site& c = host.site(i);
  const LatticeRegion full = LatticeRegion::box(c, k);
  std::vector<Site> sites;
  for (const Site& s : full.sites()) {
    if (host.contains(s)) sites.push_back(s);
  }
  LatticeRegion sub = LatticeRegion::from_sites(std::move(sites));
  SubRegion out{std::move(sub), {}, 0};
  out.host_index.reserve(out.region.size());
  for (const Site& s : out.region.sites()) out.host_index.push_back(*host.index_of(s));
  out.center = *out.region.index_of(c);
  return out;
}

}  // namespace rfim
